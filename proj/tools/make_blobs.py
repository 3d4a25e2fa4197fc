#!/usr/bin/env python3
"""Regenerates the bundled synthetic datasets under data/.

blobs.csv   3000 rows, 8 features, 4 overlapping Gaussian clusters
blobs2.csv  1000 rows, 8 features, 2 classes split by a hyperplane with margin
"""
import random
import sys
from pathlib import Path

DIM = 8


def blobs(rng):
    centers = [[rng.uniform(-2.5, 2.5) for _ in range(DIM)] for _ in range(4)]
    rows = []
    for label, c in enumerate(centers):
        for _ in range(750):
            rows.append([rng.gauss(m, 1.6) for m in c] + [label])
    rng.shuffle(rows)
    return rows


def blobs2(rng):
    w = [rng.gauss(0, 1) for _ in range(DIM)]
    norm = sum(v * v for v in w) ** 0.5
    w = [v / norm for v in w]
    rows = []
    counts = [0, 0]
    while len(rows) < 1000:
        x = [rng.gauss(0, 2) for _ in range(DIM)]
        d = sum(a * b for a, b in zip(w, x))
        if abs(d) < 0.5:
            continue
        label = 1 if d > 0 else 0
        if counts[label] >= 500:
            continue
        counts[label] += 1
        rows.append(x + [label])
    return rows


def write(path, rows):
    with open(path, "w") as f:
        f.write(",".join(f"x{i}" for i in range(DIM)) + ",label\n")
        for r in rows:
            f.write(",".join(f"{v:.6f}" for v in r[:-1]) + f",{r[-1]}\n")


def main():
    out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).resolve().parent.parent / "data"
    write(out / "blobs.csv", blobs(random.Random(20240601)))
    write(out / "blobs2.csv", blobs2(random.Random(20240602)))


if __name__ == "__main__":
    main()
