"""Reference HDBSCAN labels from scikit-learn for the cross-check test.

Writes crates/core/tests/golden/hdbscan_sklearn.json: a list of
{"rows": [[...]], "labels": [...]} cases clustered with
min_cluster_size=2, min_samples=2 and excess-of-mass selection.
"""

import json
import pathlib

import numpy as np
from sklearn.cluster import HDBSCAN

OUT = pathlib.Path(__file__).resolve().parents[1] / "crates/core/tests/golden/hdbscan_sklearn.json"


def case(rng):
    dim = int(rng.integers(1, 6))
    groups = int(rng.integers(1, 6))
    rows = []
    for _ in range(groups):
        center = rng.uniform(-20, 20, dim)
        size = int(rng.integers(1, 9))
        spread = rng.uniform(0.1, 2.0)
        rows.extend(center + rng.normal(0, spread, (size, dim)))
    rows = np.array(rows)
    if len(rows) < 3:
        rows = np.vstack([rows, rng.uniform(-20, 20, (3, dim))])
    rng.shuffle(rows)
    return rows


def main():
    rng = np.random.default_rng(2024)
    cases = []
    for _ in range(60):
        rows = case(rng)
        labels = HDBSCAN(min_cluster_size=2, min_samples=2, cluster_selection_method="eom").fit(rows).labels_
        cases.append({"rows": rows.tolist(), "labels": [int(v) for v in labels]})
    OUT.write_text(json.dumps(cases))
    print(f"wrote {len(cases)} cases to {OUT}")


if __name__ == "__main__":
    main()
