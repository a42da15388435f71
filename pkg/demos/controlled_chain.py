"""Two-state controlled chain: ergodicity check, a long run, and its anchors.

Prints the distance to the target at a few checkpoints, the first anchors the
controller created (center, radius, hold time, margin), and how many late
hold windows shrank the distance at the predicted exponential rate.
"""

from __future__ import annotations

import argparse

import numpy as np

from approachability import RunConfig, check_ergodicity, run
from approachability.harness import decay_check
from approachability.instances import controlled_chain, nonpositive_orthant


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--steps", type=int, default=500_000)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    model, target = controlled_chain(), nonpositive_orthant()
    report = check_ergodicity(model)
    print(f"ergodicity: {report.status}, reference state {report.reference_state}, "
          f"horizon {report.horizon}, delta {report.delta:.2f}")

    trace = run(RunConfig(model, target, {"kind": "best-response"}, args.steps, seed=args.seed))
    marks = [n for n in (10, 100, 1000, 10_000, 100_000, args.steps) if n <= trace.steps]
    print("distance " + ", ".join(f"n={n}: {trace.checkpoint(n):.2e}" for n in marks))
    print(f"status {trace.status}, {trace.n_switches} switches, {len(trace.anchors)} anchors")

    for anchor in trace.anchors[:5]:
        print(f"  anchor {anchor.index}: q={np.round(anchor.q, 4)}, rho={anchor.rho:.3g}, "
              f"hold {anchor.hold_time:.3g}, margin {anchor.margin:.3g}")

    windows, passed = decay_check(trace, target)
    print(f"late outside windows with exponential decay: {passed}/{windows}")


if __name__ == "__main__":
    main()
