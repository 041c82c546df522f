#!/usr/bin/env python3
"""Builds the synthetic evaluation fixture under fixtures/eval/.

Eight generated threat matrices (S_1..S_8, 246 rows in total) carry one expert
judgment per row. The realism x false-positive cells follow the published
survey counts exactly. Systems S_2..S_8 accept every predicted label. S_1
carries a constructed set of corrections with 3 CIA and 41 STRIDE label flips
over 30 rows, giving losses that round to 0.03 and 0.23. The real corrections
were never published, so S_1 only illustrates the magnitude.

judgments_accept_all.json is the same judgment set with S_1's corrections
replaced by its predictions: every system then scores exactly zero.
"""

import json
import pathlib
import random

ROOT = pathlib.Path(__file__).resolve().parents[2]
OUT = ROOT / "fixtures" / "eval"

CIA = ["Confidentiality", "Integrity", "Availability"]
STRIDE = ["Spoofing", "Tampering", "Repudiation", "Information Disclosure",
          "Denial of Service", "Elevation of Privilege"]
LIKERT = ["Strongly Disagree", "Disagree", "Neutral", "Agree", "Strongly Agree"]

# Rows per system; S_1 first.
ROWS = [30, 28, 29, 31, 31, 32, 30, 35]
# False positive Yes / No by realism level.
CELLS = {True: [53, 13, 3, 16, 0], False: [0, 7, 28, 91, 35]}

S1_CIA_FLIPS = 3
S1_STRIDE_FLIPS = 41


def random_subset(rng, universe):
    k = rng.choice([1, 1, 1, 2, 2, 3])
    picked = set(rng.sample(range(len(universe)), k))
    return [u for i, u in enumerate(universe) if i in picked]


def build_matrices(rng):
    matrices = []
    for k, rows in enumerate(ROWS, 1):
        scenarios, cia, stride = [], [], []
        for i in range(1, rows + 1):
            scenarios.append({"id": i, "description": f"S_{k} synthetic threat scenario {i}",
                              "related_components": []})
            cia.append(random_subset(rng, CIA))
            stride.append(random_subset(rng, STRIDE))
        matrices.append({
            "system_label": f"S_{k}",
            "scenarios": scenarios,
            "columns": [
                {"name": "CIA", "label_universe": CIA, "values": cia},
                {"name": "STRIDE", "label_universe": STRIDE, "values": stride},
            ],
        })
    return matrices


def flip(labels, universe, rng):
    """Toggles one label, keeping the set non-empty."""
    while True:
        u = rng.choice(universe)
        out = [x for x in labels if x != u] if u in labels else labels + [u]
        if out:
            return [x for x in universe if x in out]


def spread_flips(total, rows, cap, rng):
    """Distributes `total` single-label toggles over rows, at most `cap` per row."""
    counts = [0] * rows
    while total:
        i = rng.randrange(rows)
        if counts[i] < cap:
            counts[i] += 1
            total -= 1
    return counts


def symdiff(a, b):
    return len(set(a) ^ set(b))


def corrected(pred, universe, n_flips, rng):
    # Apply toggles until the symmetric difference equals n_flips exactly.
    while True:
        out = list(pred)
        for _ in range(n_flips):
            out = flip(out, universe, rng)
        if symdiff(out, pred) == n_flips:
            return out


def build_judgments(matrices, rng):
    cells = [(fp, level) for fp in (True, False) for level in range(5)
             for _ in range(CELLS[fp][level])]
    rng.shuffle(cells)

    s1 = matrices[0]
    cia_flips = spread_flips(S1_CIA_FLIPS, len(s1["scenarios"]), 1, rng)
    stride_flips = spread_flips(S1_STRIDE_FLIPS, len(s1["scenarios"]), 2, rng)

    judgments, accept_all = [], []
    it = iter(cells)
    for k, m in enumerate(matrices):
        cia_col, stride_col = m["columns"][0]["values"], m["columns"][1]["values"]
        for row, scen in enumerate(m["scenarios"]):
            fp, level = next(it)
            base = {
                "system_label": m["system_label"],
                "expert_id": f"E_{k + 1}",
                "scenario_id": scen["id"],
                "realism": LIKERT[level],
                "false_positive": fp,
                "corrected_cia": cia_col[row],
                "corrected_stride": stride_col[row],
            }
            accept_all.append(dict(base))
            if k == 0:
                base["corrected_cia"] = corrected(cia_col[row], CIA, cia_flips[row], rng)
                base["corrected_stride"] = corrected(stride_col[row], STRIDE, stride_flips[row], rng)
            judgments.append(base)
    return judgments, accept_all


def build_surveys(rng):
    out = []
    for k in range(1, 9):
        out.append({"system_label": f"S_{k}", "expert_id": f"E_{k}",
                    "q1_clarity": rng.choice(LIKERT[2:]), "q2_enhancement": rng.choice(LIKERT[2:])})
    return out


def main():
    rng = random.Random(20240607)
    OUT.mkdir(parents=True, exist_ok=True)
    matrices = build_matrices(rng)
    judgments, accept_all = build_judgments(matrices, rng)
    (OUT / "matrices.json").write_text(json.dumps({"matrices": matrices}, indent=1) + "\n")
    (OUT / "judgments.json").write_text(json.dumps({"judgments": judgments}, indent=1) + "\n")
    (OUT / "judgments_accept_all.json").write_text(
        json.dumps({"judgments": accept_all}, indent=1) + "\n")
    (OUT / "surveys.json").write_text(json.dumps({"responses": build_surveys(rng)}, indent=1) + "\n")


if __name__ == "__main__":
    main()
