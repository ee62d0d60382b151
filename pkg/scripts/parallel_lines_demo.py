#!/usr/bin/env python3
"""Affine vs linear treatment of two parallel lines.

Points on the lines x = -1 and x = +1 span the same plane once the origin
is adjoined, so the linear program cannot tell them apart; the affine
constraint keeps them separate. Prints both clustering errors.
"""

import argparse
import sys

import numpy as np

from ssc import AdmmConfig, DataMatrix, ProblemSpec, Variant, solve
from ssc.spectral import build_graph, normalize_coefficients, spectral_cluster
from ssc.synth import clustering_error


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--points-per-line", type=int, default=10)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    rng = np.random.default_rng(args.seed)
    m = args.points_per_line
    data = DataMatrix(
        np.hstack(
            [
                np.vstack([-np.ones(m), rng.uniform(-2, 2, m)]),
                np.vstack([np.ones(m), rng.uniform(-2, 2, m)]),
            ]
        )
    )
    truth = np.repeat([0, 1], m)

    for affine in (True, False):
        spec = ProblemSpec(
            variant=Variant.NOISE, affine=affine, alpha_z=800.0,
            normalize_columns=False,
        )
        res = solve(data, spec, AdmmConfig())
        graph = build_graph(normalize_coefficients(res.coefficients))
        labels = spectral_cluster(graph, 2, seed=args.seed).labels
        err = clustering_error(labels, truth)
        kind = "affine" if affine else "linear"
        print(f"{kind:6s} program: clustering error {err:.3f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
