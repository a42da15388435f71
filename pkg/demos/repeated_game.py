"""Repeated 2x2 game steered into the nonpositive orthant.

Certifies the separation margin on a grid, then runs the switching
controller against a best-response adversary and two fixed adversaries and
prints the distance of the running average at a few checkpoints.
"""

from __future__ import annotations

import argparse

import numpy as np

from approachability import RunConfig, check_assumption, run
from approachability.instances import nonpositive_orthant, repeated_game


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--steps", type=int, default=200_000)
    parser.add_argument("--seeds", type=int, default=5)
    args = parser.parse_args()

    game, target = repeated_game(), nonpositive_orthant()
    grid = [(a, b) for a in np.linspace(-2, 2, 10) for b in np.linspace(-2, 2, 10)]
    checks = [c for c in check_assumption(game, target, grid) if c.status != "inside"]
    print(f"{len(checks)} outside grid points, smallest margin {min(c.margin for c in checks):.3f}")

    adversaries = {
        "best-response": {"kind": "best-response"},
        "always column 0": {"kind": "fixed", "strategy": [[1.0, 0.0]]},
        "always column 1": {"kind": "fixed", "strategy": [[0.0, 1.0]]},
    }
    for name, adversary in adversaries.items():
        finals = []
        for seed in range(args.seeds):
            trace = run(RunConfig(game, target, dict(adversary), args.steps, stream=seed))
            finals.append(trace.dist_final)
            if seed == 0:
                marks = [n for n in (10, 100, 1000, 10_000, args.steps) if n <= trace.steps]
                path = ", ".join(f"n={n}: {trace.checkpoint(n):.2e}" for n in marks)
                print(f"[{name}] seed 0 distance {path}; {len(trace.anchors)} anchors")
        print(f"[{name}] median final distance over {args.seeds} seeds: {np.median(finals):.2e}")


if __name__ == "__main__":
    main()
