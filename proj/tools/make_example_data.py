#!/usr/bin/env python3
"""Writes the small synthetic respondent files under data/examples.

Nothing here is real survey data; the files exist so every config in
data/configs runs end to end against the mock and echo backends.
"""
import csv
import random
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
OUT = ROOT / "data" / "examples"

STATES = ["Utah", "Ohio", "Texas", "Georgia", "Maine", "Oregon", "Florida", "Iowa", "Nevada", "Vermont"]


def maybe(rng, value, rate):
    return "-9" if rng.random() < rate else value


def study1(rng, n=120):
    rows, lists = [], []
    words_r = ["conservative", "patriotic", "religious", "traditional", "rich", "stubborn", "hardworking", "greedy"]
    words_d = ["liberal", "progressive", "caring", "educated", "naive", "diverse", "open-minded", "elitist"]
    for i in range(1, n + 1):
        party = rng.randint(1, 7)
        ideo = max(1, min(7, party + rng.choice([-1, 0, 0, 1])))
        rows.append({
            "respondent_id": f"P{i:04d}",
            "ideology": maybe(rng, str(ideo), 0.03),
            "party": str(party),
            "race": rng.choice(["1", "1", "1", "2", "3", "4", "5", "6"]),
            "gender": rng.choice(["1", "2"]),
            "income": maybe(rng, str(rng.choice([8000, 22000, 40000, 65000, 90000, 140000, 210000])), 0.05),
            "age": str(rng.randint(18, 85)),
        })
        for target, pool in (("Republican", words_r), ("Democratic", words_d)):
            picked = rng.sample(pool, 4)
            lists.append({"respondent_id": f"P{i:04d}", "target_party": target,
                          "entry1": picked[0], "entry2": picked[1], "entry3": picked[2], "entry4": picked[3]})
    return rows, lists


def study2(rng, year, n=400):
    rows = []
    for i in range(1, n + 1):
        party = rng.choices(range(1, 8), weights=[18, 12, 11, 14, 11, 12, 18])[0]
        lean = (party - 4) / 3.0
        p_rep = min(0.97, max(0.03, 0.5 + 0.45 * lean + rng.uniform(-0.1, 0.1)))
        vote = "2" if rng.random() < p_rep else "1"
        if rng.random() < 0.04:
            vote = "3"
        ideo = max(1, min(7, party + rng.choice([-2, -1, 0, 0, 0, 1, 2])))
        row = {
            "respondent_id": f"{year}-{i:04d}",
            "race": rng.choice(["1"] * 6 + ["2", "3", "4", "5", "5", "6"]),
            "gender": rng.choice(["1", "2"]),
            "age": maybe(rng, str(rng.randint(18, 90)), 0.03),
            "ideology": maybe(rng, str(ideo), 0.05),
            "party": maybe(rng, str(party), 0.01),
            "interest": maybe(rng, str(rng.randint(1, 4)), 0.01),
            "church": rng.choice(["0", "1"]),
            "discuss": rng.choice(["0", "1", "1"]),
            "flag": "-9" if year == "2020" else maybe(rng, str(rng.choice([1, 1, 2, 2, 3, 4, 5, 6, 7])), 0.01),
            "state": "-9" if year == "2020" else rng.choice(STATES),
            "vote": maybe(rng, vote, 0.02),
        }
        rows.append(row)
    return rows


def study3(rng, n=300):
    rows = []
    for i in range(1, n + 1):
        party = rng.randint(1, 7)
        voted = rng.choice(["1", "1", "1", "0"])
        if voted == "1":
            p_rep = min(0.95, max(0.05, 0.5 + 0.15 * (party - 4)))
            choice = "2" if rng.random() < p_rep else rng.choice(["1", "1", "1", "3"])
        else:
            choice = "0"
        rows.append({
            "respondent_id": f"R{i:04d}",
            "gender": rng.choice(["1", "2"]),
            "race": rng.choice(["1", "1", "1", "2", "3", "5"]),
            "age": maybe(rng, str(rng.randint(18, 90)), 0.04),
            "education": maybe(rng, str(rng.randint(1, 4)), 0.1),
            "patriotism": maybe(rng, str(rng.choice([1, 1, 2, 2, 3, 4, 5, 6, 7])), 0.01),
            "discuss": rng.choice(["0", "1", "1"]),
            "interest": maybe(rng, str(rng.randint(1, 4)), 0.01),
            "party": maybe(rng, str(party), 0.03),
            "voted": voted,
            "vote_choice": choice,
            "church": rng.choice(["0", "1"]),
            "ideology": maybe(rng, str(max(1, min(7, party + rng.choice([-1, 0, 1])))), 0.04),
        })
    return rows


def write(path, rows):
    with open(path, "w", newline="") as f:
        w = csv.DictWriter(f, fieldnames=list(rows[0].keys()), lineterminator="\n")
        w.writeheader()
        w.writerows(rows)


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    rng = random.Random(20221)
    rows, lists = study1(rng)
    write(OUT / "study1.csv", rows)
    write(OUT / "study1_human_lists.csv", lists)
    for year in ("2012", "2016", "2020"):
        write(OUT / f"study2_{year}.csv", study2(rng, year))
    write(OUT / "study3.csv", study3(rng))


if __name__ == "__main__":
    main()
