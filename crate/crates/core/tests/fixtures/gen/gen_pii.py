"""PII tables with column annotations. Original values overlap the
generator word lists on purpose so collisions must be redrawn."""

import json
import random
from pathlib import Path

FIRST = ["Avery", "Blake", "Casey", "Dana", "Maria", "Jonas", "Aiko", "Tomasz", "Quinn", "Sage"]
LAST = ["Ashdown", "Fenwick", "Okafor", "Lindqvist", "Moreau", "Tanaka", "Vickery"]
CITIES = ["Brookmere", "Dunwick", "Lisbon", "Tromso", "Kyoto", "Oakhaven", "Quito"]
STREETS = ["Elm", "Rowan", "High", "Station", "Church"]


def ann(col, type_id, method="syntactic", score=1.0):
    return {"column_index": col, "type_id": type_id, "ontology": "dbpedia", "method": method, "score": score}


def person(rng):
    f, l = rng.choice(FIRST), rng.choice(LAST)
    return {
        "name": f"{f} {l}",
        "email": f"{f.lower()}.{l.lower()}{rng.randint(1, 99)}@example.invalid",
        "address": f"{rng.randint(1, 250)} {rng.choice(STREETS)} {rng.choice(['Street', 'Lane', 'Road'])}",
        "birth": f"{rng.randint(1940, 2004)}-{rng.randint(1, 12):02d}-{rng.randint(1, 28):02d}",
        "city": rng.choice(CITIES),
        "postcode": f"{rng.randint(0, 99999):05d}",
    }


def write(fixtures: Path):
    rng = random.Random(4242)
    tables = []

    rows = [person(rng) for _ in range(25)]
    tables.append({
        "name": "people_full",
        "header": ["Name", "Email", "Address", "Birth Date", "Home Location", "Postal Code", "score"],
        "rows": [[p["name"], p["email"], p["address"], p["birth"], p["city"], p["postcode"], str(i)]
                 for i, p in enumerate(rows)],
        "annotations": [ann(0, "name"), ann(1, "email"), ann(2, "address"), ann(3, "birthDate"),
                        ann(4, "homeLocation"), ann(5, "postalCode", "semantic", 0.81), ann(6, "score")],
        "pii_columns": [0, 1, 2, 3, 4, 5],
        "unchanged": False,
    })
    rows = [person(rng) for _ in range(12)]
    tables.append({
        "name": "name_only",
        "header": ["name", "team", "goals"],
        "rows": [[p["name"], rng.choice(["red", "blue"]), str(rng.randint(0, 9))] for p in rows],
        "annotations": [ann(0, "name"), ann(0, "name", "semantic", 1.0), ann(1, "team", "semantic", 0.7)],
        "pii_columns": [],
        "unchanged": True,
    })
    rows = [person(rng) for _ in range(8)]
    tables.append({
        "name": "name_with_place",
        "header": ["person", "birth_place", "rank"],
        "rows": [[p["name"], p["postcode"], str(i)] for i, p in enumerate(rows)],
        "annotations": [ann(0, "person", "semantic", 0.93), ann(1, "birthPlace", "semantic", 0.66), ann(2, "rank")],
        "pii_columns": [0, 1],
        "unchanged": False,
    })
    rows = [person(rng) for _ in range(30)]
    tables.append({
        "name": "contacts_dupes",
        "header": ["email", "city", "note"],
        "rows": [[rows[i % 5]["email"], rows[i % 3]["city"], "x"] for i in range(30)],
        "annotations": [ann(0, "email"), ann(1, "homeLocation", "semantic", 0.55)],
        "pii_columns": [0, 1],
        "unchanged": False,
    })
    tables.append({
        "name": "no_pii",
        "header": ["id", "value"],
        "rows": [[str(i), str(i * i)] for i in range(6)],
        "annotations": [ann(0, "id"), ann(1, "value", "semantic", 0.9)],
        "pii_columns": [],
        "unchanged": True,
    })
    rows = [person(rng) for _ in range(16)]
    tables.append({
        "name": "wordlist_collisions",
        "header": ["first", "born", "town"],
        "rows": [[p["name"].split()[0] + " " + "Ashdown", p["birth"], p["city"]] for p in rows],
        "annotations": [ann(0, "name"), ann(1, "birthDate"), ann(2, "homeLocation")],
        "pii_columns": [0, 1, 2],
        "unchanged": False,
    })
    out = fixtures / "pii"
    out.mkdir(parents=True, exist_ok=True)
    (out / "tables.json").write_text(json.dumps(tables, indent=1) + "\n")
    return len(tables)


if __name__ == "__main__":
    print(write(Path(__file__).resolve().parent.parent))
