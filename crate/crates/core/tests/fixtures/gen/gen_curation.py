"""Curation cases and their expected verdicts."""

import json
import random
import re
from pathlib import Path

ALLOW = {"mit", "apache-2.0", "bsd-2-clause", "bsd-3-clause", "bsd-3-clause-clear", "0bsd", "cc0-1.0", "cc-by-4.0"}
ORDER = ["NoLicense", "TooSmall", "UnnamedColumns", "NonStringHeader", "BlockedContent"]
NUM = re.compile(r"^[+-]?(\d+(\.\d*)?|\.\d+)([eE][+-]?\d+)?$")
PLACEHOLDER = re.compile(r"^(unnamed(:\s*|_|\s+)?\d+|\.\.\.\d+)$", re.I)
BLOCKED = ["twitter", "tweet", "reddit", "facebook"]


def verdict(case):
    h, rows, lic = case["header"], case["rows"], case["license"]
    why = set()
    if lic is None or lic.strip().lower() not in ALLOW:
        why.add("NoLicense")
    if len(rows) < 2 or len(h) < 2:
        why.add("TooSmall")
    unnamed = sum(1 for x in h if not x.strip() or PLACEHOLDER.match(x.strip()))
    if 2 * unnamed > len(h):
        why.add("UnnamedColumns")
    if any(NUM.match(x.strip()) for x in h):
        why.add("NonStringHeader")
    if any(b in x.lower() for x in h for b in BLOCKED):
        why.add("BlockedContent")
    reasons = [r for r in ORDER if r in why]
    return json.dumps({"accepted": not reasons, "reasons": reasons}, separators=(",", ":"))


MINIMAL = [
    ("min_no_license", ["a", "b"], [["1", "2"], ["3", "4"]], None),
    ("min_unknown_license", ["a", "b"], [["1", "2"], ["3", "4"]], "gpl-3.0"),
    ("min_too_small_rows", ["a", "b"], [["1", "2"]], "mit"),
    ("min_too_small_cols", ["a"], [["1"], ["2"]], "mit"),
    ("min_unnamed", ["Unnamed: 0", "", "c"], [["1", "2", "3"], ["4", "5", "6"]], "mit"),
    ("min_numeric_header", ["a", "2019"], [["1", "2"], ["3", "4"]], "mit"),
    ("min_blocked", ["user", "tweet_text"], [["1", "2"], ["3", "4"]], "mit"),
    ("ok_minimal", ["a", "b"], [["1", "2"], ["3", "4"]], "MIT"),
    ("edge_half_unnamed", ["Unnamed_1", "b"], [["1", "2"], ["3", "4"]], "mit"),
    ("edge_dots", ["...1", "...2", "c"], [["1", "2", "3"], ["4", "5", "6"]], "cc0-1.0"),
    ("edge_word_with_digits", ["col1", "v2"], [["1", "2"], ["3", "4"]], "apache-2.0"),
    ("edge_everything", ["1.5", "Facebook", "", " "], [["1", "2", "3", "4"]], None),
]

NAMES = ["id", "name", "city", "Unnamed: 3", "", "year", "1999", "reddit_score", "score", "label", "value", "...4"]
LICS = [None, "mit", "apache-2.0", "gpl-2.0", "cc-by-4.0", "unlicense", "0BSD"]


def write(fixtures: Path):
    rng = random.Random(31337)
    cases = [{"name": n, "header": h, "rows": r, "license": l} for n, h, r, l in MINIMAL]
    for i in range(48):
        cols = rng.randint(1, 5)
        header = [rng.choice(NAMES) for _ in range(cols)]
        rows = [[str(rng.randint(0, 99)) for _ in range(cols)] for _ in range(rng.randint(0, 4))]
        cases.append({"name": f"random_{i:02d}", "header": header, "rows": rows, "license": rng.choice(LICS)})
    verdicts = {c["name"]: verdict(c) for c in cases}
    for reason in ORDER:
        mins = [c["name"] for c in cases[:7] if json.loads(verdicts[c["name"]])["reasons"] == [reason]]
        assert mins, reason
    accepted = sum(1 for v in verdicts.values() if json.loads(v)["accepted"])
    out = fixtures / "curation"
    out.mkdir(parents=True, exist_ok=True)
    (out / "cases.json").write_text(json.dumps(cases, indent=1) + "\n")
    (out / "oracle.json").write_text(json.dumps(
        {"verdicts": verdicts, "accepted": accepted, "total": len(cases),
         "accepted_fraction": accepted / len(cases)}, indent=1, sort_keys=True) + "\n")
    return accepted, len(cases)


if __name__ == "__main__":
    print(write(Path(__file__).resolve().parent.parent))
