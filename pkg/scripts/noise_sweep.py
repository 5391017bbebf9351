#!/usr/bin/env python3
"""How cluster recovery degrades with noise, for both feature levels.

For each noise level and seed, generate a planted fleet, run a single k-means
(no restarts) and compare with the planted archetypes by adjusted Rand index.

    python3 scripts/noise_sweep.py --seeds 20 --noise 0 0.02 0.05 0.1
"""

from __future__ import annotations

import argparse

import numpy as np

from amiwav.classification import extract_features, kmeans
from amiwav.ingest import SyntheticFleetSpec, archetype_of, generate_synthetic


def ari(a, b) -> float:
    _, ai = np.unique(np.asarray(a), return_inverse=True)
    _, bi = np.unique(np.asarray(b), return_inverse=True)
    table = np.zeros((ai.max() + 1, bi.max() + 1))
    np.add.at(table, (ai, bi), 1)
    comb = lambda x: float(np.sum(x * (x - 1) / 2))  # noqa: E731
    index, rows, cols, total = comb(table), comb(table.sum(1)), comb(table.sum(0)), comb(np.array([ai.size]))
    expected = rows * cols / total
    top = (rows + cols) / 2
    return 1.0 if top == expected else (index - expected) / (top - expected)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--customers", type=int, default=100)
    ap.add_argument("--seeds", type=int, default=20)
    ap.add_argument("--noise", type=float, nargs="+", default=[0.0, 0.02, 0.05, 0.1, 0.2])
    ap.add_argument("--restarts", type=int, default=1)
    args = ap.parse_args(argv)

    print(f"{'noise':>6} {'level':>5} {'ARI=1':>7} {'mean ARI':>9} {'min ARI':>8}")
    for noise in args.noise:
        spec = SyntheticFleetSpec(customers=args.customers, noise=noise)
        truth = [archetype_of(i, spec) for i in range(spec.customers)]
        fleets = [generate_synthetic(spec, seed=s) for s in range(args.seeds)]
        for level in (3, 4):
            scores = [
                ari(truth, kmeans(extract_features(f, level), 5, seed=s, restarts=args.restarts).labels)
                for s, f in enumerate(fleets)
            ]
            perfect = sum(x == 1.0 for x in scores)
            print(f"{noise:>6g} {level:>5} {perfect:>3}/{args.seeds:<3} {np.mean(scores):>9.4f} {np.min(scores):>8.4f}")


if __name__ == "__main__":
    main()
