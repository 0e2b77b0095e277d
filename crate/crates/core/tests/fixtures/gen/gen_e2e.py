"""Simulated search backend, pipeline config and the expected manifest."""

import hashlib
import json
import shutil
from pathlib import Path

from gen_curation import verdict
from parse_oracle import parse

TOPICS = ["id", "name", "city"]

FILES = [
    # (repo, path, license, contains, bytes)
    ("acme/open-data", "people/staff.csv", "mit", ["name", "id"],
     b"id,name,email,city\n1,Ada Byron,ada@example.org,London\n2,Alan Turing,alan@example.org,Wilmslow\n"
     b"3,Grace Hopper,grace@example.org,Arlington\n"),
    ("acme/open-data", "geo/cities.csv", "mit", ["city"],
     b"# generated\ncity;country;population\nOslo;Norway;709000\nLima;Peru;9750000\nQuito;Ecuador;2800000\n"),
    ("acme/open-data", "misc/scores.tsv.csv", "apache-2.0", ["id"],
     b"id\tscore\tpassed\n1\t0.5\ttrue\n2\t0.75\tfalse\n\n3\t0.9\ttrue\n"),
    ("beta/stats", "runs.csv", "cc0-1.0", ["id"],
     b"\xef\xbb\xbfrun_id|duration|started|\r\n10|3.5|2021-01-04|\r\n11|2.25|2021-01-05|\r\n12|9|2021-02-01|\r\n"),
    ("beta/stats", "closed.csv", "gpl-3.0", ["id"], b"id,value\n1,2\n3,4\n"),
    ("beta/stats", "tiny.csv", "mit", ["id"], b"id,value\n1,2\n"),
    ("beta/stats", "social.csv", "mit", ["name"], b"name,tweet_count\nann,3\nbob,4\n"),
    ("gamma/misc", "list.csv", "mit", ["name"], b"name\nann\nbob\n"),
    ("gamma/misc", "years.csv", "bsd-3-clause", ["id"], b"id,2019,2020\n1,3,4\n2,5,6\n"),
    ("gamma/misc", "orders.csv", "mit", ["id", "city"],
     b"order_id,customer,Birth Date,home_location\n1,Jo Park,1990-02-03,Leeds\n2,Sam Lee,1985-11-30,York\n"),
    ("gamma/misc", "unrelated.csv", "mit", ["color"], b"color,hex\nred,#f00\nblue,#00f\n"),
    ("delta/x", "bad.csv", None, ["city"], b"a,b\n1,2,3\n4,5,6\n"),
]


def write(fixtures: Path):
    root = fixtures / "e2e"
    if root.exists():
        shutil.rmtree(root)
    sim = root / "sim"
    index = []
    for repo, path, lic, contains, raw in FILES:
        p = sim / repo / path
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_bytes(raw)
        index.append({"repo": repo, "path": path, "size": len(raw), "license": lic, "contains": contains})
    (sim / "index.json").write_text(json.dumps({"files": index}, indent=1) + "\n")
    (root / "config.toml").write_text(
        'topics = ["id", "name", "city"]\n'
        "seed = 7\n"
        "threshold = 0.5\n"
        "workers = 2\n"
        'out = "out"\n\n'
        "[backend]\n"
        'kind = "simulated"\n'
        'path = "sim"\n\n'
        "[[registries]]\n"
        'path = "../registry/dbpedia.jsonl"\n'
        'ontology = "dbpedia"\n\n'
        "[[registries]]\n"
        'path = "../registry/schemaorg.jsonl"\n'
        'ontology = "schemaorg"\n'
    )
    manifest = []
    for repo, path, lic, contains, raw in FILES:
        topic = next((t for t in TOPICS if t in contains), None)
        if topic is None:
            continue
        res = parse(raw)
        if "error" in res:
            continue
        case = {"header": res["header"], "rows": res["rows"], "license": lic}
        if not json.loads(verdict(case))["accepted"]:
            continue
        sha = hashlib.sha256(raw).hexdigest()
        tid = hashlib.sha256(f"{repo}\0{path}\0{sha}".encode()).hexdigest()[:16]
        rows, cols = res["dims"]
        manifest.append({
            "table_id": tid, "topic": topic, "repo_id": repo, "file_path": path,
            "source_url": f"https://raw.githubusercontent.com/{repo}/HEAD/{path}",
            "license_id": lic, "row_count": rows, "column_count": cols, "data": f"{topic}/{tid}.csv",
        })
    manifest.sort(key=lambda m: (m["topic"], m["table_id"]))
    with open(root / "expected_manifest.jsonl", "w") as f:
        for m in manifest:
            f.write(json.dumps(m, sort_keys=True) + "\n")
    return len(manifest)


if __name__ == "__main__":
    print(write(Path(__file__).resolve().parent.parent))
