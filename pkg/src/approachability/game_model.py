"""Finite controlled Markov games with vector rewards.

A game is described by a transition kernel ``kernel[s, up, ua, s']`` and a
vector reward ``reward[s, up, ua, :]``.  Player and adversary pick actions
independently in each state; holding both sides to stationary strategies
induces an ordinary Markov chain on the states, whose stationary law weights
the long-run average reward.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Mapping

import numpy as np

from .errors import ModelError, SolverError

PROB_TOL = 1e-12
MODEL_KEYS = ("states", "player_actions", "adversary_actions", "dim", "kernel", "reward")


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class GameModel:
    """Controlled Markov game with transition kernel and vector rewards.

    ``kernel`` has shape ``(S, P, A, S)`` and ``reward`` has shape
    ``(S, P, A, d)``, where ``P`` and ``A`` are the player and adversary
    action counts.
    """

    kernel: np.ndarray
    reward: np.ndarray

    def __post_init__(self):
        kernel = np.asarray(self.kernel, dtype=float)
        reward = np.asarray(self.reward, dtype=float)
        if kernel.ndim != 4 or kernel.shape[0] != kernel.shape[3]:
            raise ModelError(f"kernel must have shape (S, P, A, S), got {kernel.shape}")
        if reward.ndim != 4 or reward.shape[:3] != kernel.shape[:3]:
            raise ModelError(
                f"reward must have shape {kernel.shape[:3] + ('d',)}, got {reward.shape}"
            )
        if min(kernel.shape) < 1 or reward.shape[3] < 1:
            raise ModelError("all model dimensions must be at least 1")
        if not np.all(np.isfinite(kernel)) or np.any(kernel < 0):
            raise ModelError("kernel entries must be finite and nonnegative")
        row_err = np.max(np.abs(kernel.sum(axis=3) - 1.0))
        if row_err > PROB_TOL:
            raise ModelError(f"kernel rows must sum to 1 (max deviation {row_err:.3g})")
        if not np.all(np.isfinite(reward)):
            raise ModelError("reward vectors must be finite")
        object.__setattr__(self, "kernel", _frozen(kernel))
        object.__setattr__(self, "reward", _frozen(reward))

    @property
    def n_states(self) -> int:
        return self.kernel.shape[0]

    @property
    def n_player_actions(self) -> int:
        return self.kernel.shape[1]

    @property
    def n_adversary_actions(self) -> int:
        return self.kernel.shape[2]

    @property
    def dim(self) -> int:
        return self.reward.shape[3]

    def reward_vectors(self) -> np.ndarray:
        """Distinct reward vectors; their convex hull is the reward set."""
        return np.unique(self.reward.reshape(-1, self.dim), axis=0)

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any]) -> "GameModel":
        """Build a model from its JSON document, rejecting unknown keys."""
        if not isinstance(doc, Mapping):
            raise ModelError("model document must be a JSON object")
        unknown = set(doc) - set(MODEL_KEYS)
        if unknown:
            raise ModelError(f"unknown model keys: {sorted(unknown)}")
        missing = [k for k in MODEL_KEYS if k not in doc]
        if missing:
            raise ModelError(f"missing model keys: {missing}")
        sizes = []
        for key in MODEL_KEYS[:4]:
            value = doc[key]
            if isinstance(value, bool) or not isinstance(value, int) or value < 1:
                raise ModelError(f"'{key}' must be a positive integer")
            sizes.append(value)
        n_s, n_p, n_a, d = sizes
        try:
            kernel = np.array(doc["kernel"], dtype=float)
            reward = np.array(doc["reward"], dtype=float)
        except (TypeError, ValueError) as exc:
            raise ModelError(f"kernel/reward must be rectangular numeric arrays: {exc}") from exc
        if kernel.shape != (n_s, n_p, n_a, n_s):
            raise ModelError(f"kernel shape {kernel.shape} != {(n_s, n_p, n_a, n_s)}")
        if reward.shape != (n_s, n_p, n_a, d):
            raise ModelError(f"reward shape {reward.shape} != {(n_s, n_p, n_a, d)}")
        return cls(kernel, reward)

    def to_dict(self) -> dict:
        return {
            "states": self.n_states,
            "player_actions": self.n_player_actions,
            "adversary_actions": self.n_adversary_actions,
            "dim": self.dim,
            "kernel": self.kernel.tolist(),
            "reward": self.reward.tolist(),
        }


@dataclass(frozen=True)
class StationaryStrategy:
    """Per-state distribution over one side's actions, shape ``(S, n_actions)``."""

    dist: np.ndarray

    def __post_init__(self):
        dist = np.asarray(self.dist, dtype=float)
        if dist.ndim != 2 or 0 in dist.shape:
            raise ModelError(f"strategy must be a nonempty 2-d array, got shape {dist.shape}")
        if not np.all(np.isfinite(dist)) or np.any(dist < 0):
            raise ModelError("strategy entries must be finite and nonnegative")
        row_err = np.max(np.abs(dist.sum(axis=1) - 1.0))
        if row_err > PROB_TOL:
            raise ModelError(f"strategy rows must sum to 1 (max deviation {row_err:.3g})")
        object.__setattr__(self, "dist", _frozen(dist))

    @property
    def n_states(self) -> int:
        return self.dist.shape[0]

    @property
    def n_actions(self) -> int:
        return self.dist.shape[1]

    @classmethod
    def uniform(cls, n_states: int, n_actions: int) -> "StationaryStrategy":
        return cls(np.full((n_states, n_actions), 1.0 / n_actions))

    @classmethod
    def pure(cls, actions, n_actions: int) -> "StationaryStrategy":
        actions = np.asarray(actions, dtype=int)
        dist = np.zeros((actions.size, n_actions))
        dist[np.arange(actions.size), actions] = 1.0
        return cls(dist)

    def __eq__(self, other):
        if not isinstance(other, StationaryStrategy):
            return NotImplemented
        return self.dist.shape == other.dist.shape and bool(np.all(self.dist == other.dist))

    def __hash__(self):
        return hash((self.dist.shape, self.dist.tobytes()))


@dataclass(frozen=True)
class InducedChain:
    """Row-stochastic state transition matrix under a fixed strategy pair."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ModelError(f"chain matrix must be square, got {m.shape}")
        if np.any(m < 0) or np.max(np.abs(m.sum(axis=1) - 1.0)) > PROB_TOL:
            raise ModelError("chain matrix must be row-stochastic")
        object.__setattr__(self, "matrix", _frozen(m))


def _check_strategies(model: GameModel, pi_p: StationaryStrategy, pi_a: StationaryStrategy):
    if pi_p.dist.shape != (model.n_states, model.n_player_actions):
        raise ModelError(
            f"player strategy shape {pi_p.dist.shape} does not match "
            f"{(model.n_states, model.n_player_actions)}"
        )
    if pi_a.dist.shape != (model.n_states, model.n_adversary_actions):
        raise ModelError(
            f"adversary strategy shape {pi_a.dist.shape} does not match "
            f"{(model.n_states, model.n_adversary_actions)}"
        )


def induce_chain(
    model: GameModel, pi_p: StationaryStrategy, pi_a: StationaryStrategy
) -> InducedChain:
    _check_strategies(model, pi_p, pi_a)
    m = np.einsum("spat,sp,sa->st", model.kernel, pi_p.dist, pi_a.dist)
    # rows can drift by a few ulps; the kernel itself was validated
    m = np.clip(m, 0.0, None)
    m /= m.sum(axis=1, keepdims=True)
    return InducedChain(m)


def stationary_distribution(
    chain: InducedChain, tol: float = 1e-12, max_iter: int = 1_000_000
) -> np.ndarray:
    """Stationary law of a unichain Markov matrix by power iteration.

    Iterates the lazy matrix ``(I + P) / 2``, which has the same stationary
    law as ``P`` but is aperiodic, so periodic unichains converge as well.
    """
    p = chain.matrix
    n = p.shape[0]
    lazy = 0.5 * (p + np.eye(n))
    eta = np.full(n, 1.0 / n)
    diff = np.inf
    for _ in range(max_iter):
        nxt = eta @ lazy
        nxt /= nxt.sum()
        diff = np.max(np.abs(nxt - eta))
        eta = nxt
        if diff <= tol:
            break
    residual = float(np.max(np.abs(eta @ p - eta)))
    if diff > tol or residual > 1e-10:
        raise SolverError(
            f"power iteration did not converge in {max_iter} iterations "
            f"(residual {residual:.3g})",
            residual=residual,
        )
    return np.clip(eta, 0.0, None)


def average_reward(
    model: GameModel, pi_p: StationaryStrategy, pi_a: StationaryStrategy
) -> np.ndarray:
    """Long-run average reward vector under a fixed stationary pair."""
    eta = stationary_distribution(induce_chain(model, pi_p, pi_a))
    return np.einsum("spad,s,sp,sa->d", model.reward, eta, pi_p.dist, pi_a.dist)


@dataclass(frozen=True)
class ErgodicityReport:
    status: str  # "PASS" or "INCONCLUSIVE"
    reference_state: int | None = None
    horizon: int | None = None
    delta: float = 0.0
    message: str = field(default="")

    @property
    def passed(self) -> bool:
        return self.status == "PASS"


def check_ergodicity(model: GameModel) -> ErgodicityReport:
    """Sufficient uniform check that every stationary pair yields an ergodic chain.

    For each candidate state ``ref`` and horizon ``h <= S``, computes the
    smallest probability, over every (even history dependent) action sequence,
    of sitting in ``ref`` exactly ``h`` steps after leaving any state.  If that
    is bounded below by ``delta > 0`` the ``h``-step matrix of every induced
    chain has a common positive column, which forces a single recurrent class
    containing ``ref`` and aperiodicity.  Never reports PASS otherwise.
    """
    n_s = model.n_states
    worst = model.kernel.reshape(n_s, -1, n_s)
    best = None
    for h in range(1, n_s + 1):
        for ref in range(n_s):
            r = np.zeros(n_s)
            r[ref] = 1.0
            for _ in range(h):
                r = np.min(worst @ r, axis=1)
            delta = float(r.min())
            if delta > 0 and (best is None or delta > best[2]):
                best = (ref, h, delta)
        if best is not None:
            ref, h, delta = best
            return ErgodicityReport(
                "PASS",
                ref,
                h,
                delta,
                f"state {ref} is reached in exactly {h} step(s) with probability "
                f">= {delta:.6g} from every state under every action sequence",
            )
    return ErgodicityReport(
        "INCONCLUSIVE",
        message=(
            f"no state is reached from every state in exactly h <= {n_s} steps under "
            "all action sequences; the chain may still be ergodic but this check "
            "cannot certify it (periodic or adversarially reducible structure)"
        ),
    )
