"""A target no strategy can reach: every reward is (1, 1).

The separation check fails at the first switch and the run stops with the
assumption-violated status; the command line tool reports exit code 3.
"""

from __future__ import annotations

import warnings

from approachability import RunConfig, run, separating_strategy
from approachability.instances import constant_reward, nonpositive_orthant


def main():
    model, target = constant_reward(), nonpositive_orthant()
    sep = separating_strategy(model, target, [1.0, 1.0])
    print(f"separation at (1, 1): status {sep.status}, margin {sep.margin:.3f}")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        trace = run(RunConfig(model, target, {"kind": "uniform-random"}, 10_000))
    print(f"run status {trace.status} after {trace.steps} step(s); x = {trace.x_final}, "
          f"distance {trace.dist_final:.6f}")
    print(trace.message)


if __name__ == "__main__":
    main()
