"""Adversary behaviours for closed-loop experiments.

Every policy exposes the stationary strategy it plays from step ``n`` on and
the next step at which it would change that strategy on its own.  The
best-response kinds observe the player's emitted strategy (a deliberately
strong information model).
"""

from __future__ import annotations

import numpy as np

from .errors import ModelError
from .game_model import GameModel, StationaryStrategy
from .geometry import MEMBERSHIP_TOL, ConvexTarget
from .solver import adversary_best_response

NEVER = np.iinfo(np.int64).max
KINDS = ("fixed", "uniform-random", "periodic-switching", "best-response", "antagonist")


class AdversaryPolicy:
    kind = ""

    def reset(self, model: GameModel, target: ConvexTarget | None = None):
        self.model = model
        self.target = target
        self._current = StationaryStrategy.uniform(model.n_states, model.n_adversary_actions)

    def strategy(self, n, *, x=None, player_strategy=None, player_switched=False):
        return self._current

    def next_change(self, n: int) -> int:
        return NEVER

    def action(self, state: int, n: int, rng: np.random.Generator, **observed) -> int:
        dist = self.strategy(n, **observed).dist[state]
        return int(rng.choice(dist.size, p=dist))

    def _check(self, strategy: StationaryStrategy):
        shape = (self.model.n_states, self.model.n_adversary_actions)
        if strategy.dist.shape != shape:
            raise ModelError(f"adversary strategy shape {strategy.dist.shape} != {shape}")


class Fixed(AdversaryPolicy):
    kind = "fixed"

    def __init__(self, strategy):
        self.fixed = strategy if isinstance(strategy, StationaryStrategy) else StationaryStrategy(strategy)

    def reset(self, model, target=None):
        super().reset(model, target)
        self._check(self.fixed)
        self._current = self.fixed


class UniformRandom(AdversaryPolicy):
    kind = "uniform-random"


class PeriodicSwitching(AdversaryPolicy):
    kind = "periodic-switching"

    def __init__(self, strategies, period: int):
        if not strategies:
            raise ModelError("periodic adversary needs at least one strategy")
        if int(period) < 1:
            raise ModelError("period must be >= 1")
        self.cycle = [
            s if isinstance(s, StationaryStrategy) else StationaryStrategy(s) for s in strategies
        ]
        self.period = int(period)

    def reset(self, model, target=None):
        super().reset(model, target)
        for s in self.cycle:
            self._check(s)

    def strategy(self, n, **observed):
        return self.cycle[(n // self.period) % len(self.cycle)]

    def next_change(self, n):
        return (n // self.period + 1) * self.period


class BestResponse(AdversaryPolicy):
    """Re-solves its average-reward MDP whenever the player switches outside the target.

    While the running average is inside the target the direction is
    undefined and the previous response is kept.
    """

    kind = "best-response"

    def __init__(self, solver_tol: float = 1e-9):
        self.solver_tol = solver_tol

    def reset(self, model, target=None):
        super().reset(model, target)
        self._memo: dict = {}

    def _respond(self, x, player_strategy):
        if x is None or player_strategy is None or self.target is None:
            return
        gap = self.target.project(x) - np.asarray(x, dtype=float)
        if np.linalg.norm(gap) <= MEMBERSHIP_TOL:
            return
        key = (player_strategy.dist.tobytes(), (gap / np.linalg.norm(gap)).tobytes())
        response = self._memo.get(key)
        if response is None:
            response = adversary_best_response(self.model, player_strategy, gap, tol=self.solver_tol)
            self._memo[key] = response
        self._current = response

    def strategy(self, n, *, x=None, player_strategy=None, player_switched=False):
        if player_switched:
            self._respond(x, player_strategy)
        return self._current


class Antagonist(BestResponse):
    """Best response recomputed every ``every`` steps regardless of the player."""

    kind = "antagonist"

    def __init__(self, every: int, solver_tol: float = 1e-9):
        super().__init__(solver_tol)
        if int(every) < 1:
            raise ModelError("antagonist period must be >= 1")
        self.every = int(every)

    def strategy(self, n, *, x=None, player_strategy=None, player_switched=False):
        if n % self.every == 0:
            self._respond(x, player_strategy)
        return self._current

    def next_change(self, n):
        return (n // self.every + 1) * self.every


def adversary_from_dict(doc) -> AdversaryPolicy:
    doc = dict(doc)
    kind = doc.pop("kind", None)
    allowed = {
        "fixed": {"strategy"},
        "uniform-random": set(),
        "periodic-switching": {"strategies", "period"},
        "best-response": {"solver_tol"},
        "antagonist": {"every", "solver_tol"},
    }
    if kind not in allowed:
        raise ModelError(f"unknown adversary kind {kind!r}; expected one of {KINDS}")
    unknown = set(doc) - allowed[kind]
    if unknown:
        raise ModelError(f"unknown {kind} adversary keys: {sorted(unknown)}")
    try:
        if kind == "fixed":
            return Fixed(doc["strategy"])
        if kind == "uniform-random":
            return UniformRandom()
        if kind == "periodic-switching":
            return PeriodicSwitching(doc["strategies"], doc["period"])
        if kind == "best-response":
            return BestResponse(**doc)
        return Antagonist(**doc)
    except KeyError as exc:
        raise ModelError(f"{kind} adversary is missing {exc}") from exc
    except TypeError as exc:
        raise ModelError(f"malformed {kind} adversary: {exc}") from exc


def adversary_action(
    policy: AdversaryPolicy, state: int, n: int, rng: np.random.Generator,
    player_strategy: StationaryStrategy | None = None, x=None,
) -> int:
    """Sample the adversary's action at step ``n`` in ``state``."""
    return policy.action(
        state, n, rng, x=x, player_strategy=player_strategy,
        player_switched=player_strategy is not None,
    )
