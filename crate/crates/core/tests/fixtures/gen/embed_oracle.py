"""Reference model of the hashed character n-gram embedding, the label
normalizer and both annotation methods, used as a test oracle."""

import math
import re

MASK = (1 << 64) - 1
HASH_SEED = 0x7AB1EF0AC0DE5EED
GOLDEN = 0x9E3779B97F4A7C15


def normalize(s: str) -> str:
    s = s.replace("_", " ").replace("-", " ")
    out = []
    for i, c in enumerate(s):
        if i > 0 and c.isupper():
            prev = s[i - 1]
            nxt = s[i + 1] if i + 1 < len(s) else ""
            if prev.islower() or (prev.isupper() and nxt.islower()):
                out.append(" ")
        out.append(c.lower())
    return " ".join("".join(out).split())


def fnv1a(data: bytes) -> int:
    h = 0xCBF29CE484222325
    for b in data:
        h ^= b
        h = (h * 0x100000001B3) & MASK
    return h


def splitmix(state: int):
    state = (state + GOLDEN) & MASK
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK
    return state, z ^ (z >> 31)


class Hashed:
    def __init__(self, dim=64, min_n=3, max_n=6, buckets=2_000_000, seed=HASH_SEED, vectors=None):
        self.dim, self.min_n, self.max_n, self.buckets, self.seed = dim, min_n, max_n, buckets, seed
        self.vectors = vectors or {}
        self._cache = {}

    def bucket_vector(self, gram):
        b = fnv1a(gram.encode("utf-8")) % self.buckets
        state = self.seed ^ ((b * GOLDEN) & MASK)
        comps = []
        for _ in range(self.dim):
            state, x = splitmix(state)
            comps.append(((x >> 11) / float(1 << 53)) * 2.0 - 1.0)
        return comps

    def ngrams(self, word):
        marked = "<" + word + ">"
        grams = set()
        for n in range(self.min_n, self.max_n + 1):
            if n > len(marked):
                break
            for i in range(len(marked) - n + 1):
                grams.add(marked[i:i + n])
        if not grams:
            grams.add(marked)
        return sorted(grams)

    def token(self, word):
        if word in self.vectors:
            return list(self.vectors[word])
        if word not in self._cache:
            vs = [self.vectors.get(g) or self.bucket_vector(g) for g in self.ngrams(word)]
            self._cache[word] = mean(vs)
        return self._cache[word]

    def phrase(self, text):
        toks = text.split()
        if not toks:
            return None
        return mean([self.token(t) for t in toks])


def mean(vs):
    s = list(vs[0])
    for v in vs[1:]:
        s = [a + b for a, b in zip(s, v)]
    return [a / len(vs) for a in s]


def cosine(u, v):
    dot = sum(a * b for a, b in zip(u, v))
    nu = math.sqrt(sum(a * a for a in u))
    nv = math.sqrt(sum(b * b for b in v))
    return max(-1.0, min(1.0, dot / (nu * nv)))


def has_digit(s):
    return re.search(r"[0-9]", s) is not None


def annotate_column(col, name, registries, provider, threshold, label_vecs, margins=None):
    """All annotations for one column, in (ontology, method) order."""
    out = []
    norm = normalize(name)
    for onto, types in registries:
        if not norm or has_digit(norm):
            continue
        for t in types:
            if normalize(t["label"]) == norm:
                out.append({"column_index": col, "type_id": t["id"], "ontology": onto,
                            "method": "syntactic", "score": 1.0})
                break
        q = provider.phrase(norm)
        sims = [cosine(q, v) for v in label_vecs[onto]]
        best = max(range(len(sims)), key=lambda i: (sims[i], -i))
        if margins is not None:
            others = [s for i, s in enumerate(sims)
                      if normalize(types[i]["label"]) != normalize(types[best]["label"])]
            margins.append((name, onto, sims[best] - max(others), sims[best] - threshold))
        if sims[best] >= threshold:
            out.append({"column_index": col, "type_id": types[best]["id"], "ontology": onto,
                        "method": "semantic", "score": min(1.0, max(0.0, sims[best]))})
    return out
