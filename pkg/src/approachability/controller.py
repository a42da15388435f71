"""Two-time-scale strategy switching and the return-time baseline.

The player keeps a lazily built cover of the region outside the target by
anchor points ``q``.  Each anchor carries a separating strategy, a radius on
which that strategy still separates, and a hold time measured on the
harmonic clock.  At a switch step the running average is matched to the
lowest-index anchor whose half-radius ball contains it, and that anchor's
strategy is held until its hold time has elapsed.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import AssumptionViolated, ModelError
from .game_model import GameModel, StationaryStrategy
from .geometry import MEMBERSHIP_TOL, ConvexTarget, RewardGeometry, compute_vmax
from .solver import separating_strategy

SCHEMES = ("two-time-scale", "return-time")
INSIDE = -1


@dataclass(frozen=True)
class ControllerParams:
    beta: float = 0.5
    membership_tol: float = MEMBERSHIP_TOL
    solver_tol: float = 1e-9
    scheme: str = "two-time-scale"
    reference_state: int = 0

    def __post_init__(self):
        if not 0.0 < self.beta < 1.0:
            raise ModelError("beta must lie in (0, 1)")
        if self.scheme not in SCHEMES:
            raise ModelError(f"scheme must be one of {SCHEMES}")
        if self.membership_tol < 0 or self.solver_tol <= 0:
            raise ModelError("tolerances must be positive")

    @classmethod
    def from_dict(cls, doc) -> "ControllerParams":
        unknown = set(doc) - {"beta", "membership_tol", "solver_tol", "scheme", "reference_state"}
        if unknown:
            raise ModelError(f"unknown controller keys: {sorted(unknown)}")
        return cls(**doc)


@dataclass(frozen=True)
class AnchorEntry:
    q: np.ndarray
    rho: float
    hold_time: float
    strategy: StationaryStrategy
    index: int
    margin: float


def compute_rho(
    target: ConvexTarget, geometry: RewardGeometry, q, margin: float, beta: float = 0.5
) -> float:
    """Radius around ``q`` on which the separation margin stays above ``margin / 2``.

    The two perturbation terms in the separation inequality grow at most like
    ``3 * diam_K * |q - y|``; the ``beta`` term keeps the ball off the target.
    """
    if not margin > 0:
        raise ModelError("separation margin must be positive")
    c = 3.0 * geometry.diam_K
    by_margin = margin / (2.0 * c) if c > 0 else np.inf
    return float(min(by_margin, beta * target.distance(q)))


def compute_hold_time(rho: float, geometry: RewardGeometry) -> float:
    """Midpoint of ``(rho / (4 v_max), rho / (3 v_max))``."""
    if geometry.v_max <= 0:
        raise ModelError("all rewards coincide (v_max = 0); hold times are undefined")
    if not rho > 0:
        raise ModelError("rho must be positive")
    return 7.0 * rho / (24.0 * geometry.v_max)


def next_switch_step(start: int, hold_time: float) -> int:
    """First ``m`` with ``sum(1/i for i in range(start, m)) > hold_time``."""
    if start < 1:
        raise ModelError("switch steps start at 1")
    return int(_kernels.next_switch_step(int(start), float(hold_time)))


class Cover:
    """Lazily grown set of anchors; lookup returns the lowest covering index.

    Anchors are bucketed by the scale of their distance to the target and,
    within that, by the scale of ``rho``.  When ``rho < dist(q)`` a covering
    anchor satisfies ``|x - q| < dist(q) / 2``, which pins ``dist(q)`` to
    ``(2/3, 2) * dist(x)``, so only two or three distance buckets are
    searched.  Each ``rho`` bucket is a hash grid with cells at least ``rho``
    wide, so along every axis the covering anchor lies in ``x``'s cell or in
    the neighbour on the nearer side: ``2**d`` cells in all.  Anchors without that property are scanned linearly.
    """

    def __init__(self, dim: int):
        self.dim = dim
        self.anchors: list[AnchorEntry] = []
        self._points: list[list[float]] = []
        self._levels: dict[int, dict[int, dict[tuple, list[int]]]] = {}
        self._wide: list[int] = []

    def __len__(self) -> int:
        return len(self.anchors)

    def _covers(self, i: int, coords) -> bool:
        return math.dist(coords, self._points[i]) < self.anchors[i].rho / 2.0

    def lookup(self, x, dist: float | None = None) -> AnchorEntry | None:
        """Lowest-index anchor whose half-radius ball contains ``x``.

        ``dist`` is ``x``'s distance to the target; without it every bucket
        is searched.
        """
        coords = np.asarray(x, dtype=float).tolist()
        best = None
        for i in self._wide:
            if self._covers(i, coords):
                best = i
                break
        if dist is None:
            levels = list(self._levels)
        elif dist > 0:
            lo = math.floor(math.log2(dist * (2.0 / 3.0) * (1 - 1e-9)))
            hi = math.floor(math.log2(dist * 2.0 * (1 + 1e-9)))
            levels = range(lo, hi + 1)
        else:
            levels = ()
        for level in levels:
            for rho_level, grid in self._levels.get(level, {}).items():
                scale = 2.0 ** (rho_level + 1)
                choices = []
                for c in coords:
                    u = c / scale
                    h = math.floor(u)
                    choices.append((h, h - 1) if u - h < 0.5 else (h, h + 1))
                for cell in itertools.product(*choices):
                    for i in grid.get(cell, ()):
                        if best is not None and i >= best:
                            break
                        if self._covers(i, coords):
                            best = i
                            break
        return None if best is None else self.anchors[best]

    def lookup_linear(self, x) -> AnchorEntry | None:
        """Reference scan used to cross-check :meth:`lookup`."""
        coords = np.asarray(x, dtype=float).tolist()
        for i in range(len(self.anchors)):
            if self._covers(i, coords):
                return self.anchors[i]
        return None

    def add(self, q, rho, hold_time, strategy, margin, dist: float | None = None) -> AnchorEntry:
        """Append an anchor; ``dist`` is ``q``'s distance to the target."""
        entry = AnchorEntry(
            np.array(q, dtype=float), float(rho), float(hold_time), strategy,
            len(self.anchors), float(margin),
        )
        self.anchors.append(entry)
        self._points.append(entry.q.tolist())
        if dist is None or not rho < dist:
            self._wide.append(entry.index)
        else:
            level = math.floor(math.log2(dist))
            rho_level = math.floor(math.log2(rho))
            cell = tuple(math.floor(c / 2.0 ** (rho_level + 1)) for c in self._points[-1])
            grids = self._levels.setdefault(level, {})
            grids.setdefault(rho_level, {}).setdefault(cell, []).append(entry.index)
        return entry


@dataclass
class SwitchLog:
    steps: list = field(default_factory=list)
    anchors: list = field(default_factory=list)

    def append(self, step: int, anchor: int):
        self.steps.append(step)
        self.anchors.append(anchor)

    def extend_inside(self, start: int, stop: int):
        self.steps.extend(range(start, stop))
        self.anchors.extend([INSIDE] * (stop - start))


class TwoTimeScaleController:
    """Switching scheme driven by anchor hold times on the harmonic clock.

    Decisions start at step 1 (``x_1`` is the first reward); step 0 plays the
    fallback strategy.  Inside the target the fallback is played for one step
    at a time.
    """

    scheme = "two-time-scale"

    def __init__(
        self,
        model: GameModel,
        target: ConvexTarget,
        params: ControllerParams | None = None,
        geometry: RewardGeometry | None = None,
        cover: Cover | None = None,
        fallback: StationaryStrategy | None = None,
    ):
        self.model = model
        self.target = target
        self.params = params or ControllerParams()
        # v_max = 0 is only rejected when a hold time is needed: with a single
        # reward vector the target either contains it or separation fails first
        self.geometry = geometry or compute_vmax(model)
        self.cover = cover if cover is not None else Cover(model.dim)
        self.fallback = fallback or StationaryStrategy.uniform(
            model.n_states, model.n_player_actions
        )
        self.active: AnchorEntry | None = None
        self.current = self.fallback
        self.next_switch_step = 1
        self.last_switch_step = 0
        self.switch_log = SwitchLog()
        self._solutions: dict = {}

    @property
    def anchors(self) -> list[AnchorEntry]:
        return self.cover.anchors

    def lookup_or_create_anchor(self, x) -> AnchorEntry:
        x = np.asarray(x, dtype=float)
        dist = self.target.distance(x)
        entry = self.cover.lookup(x, dist)
        if entry is not None:
            return entry
        sep = separating_strategy(
            self.model, self.target, x, tol=self.params.solver_tol, cache=self._solutions
        )
        if not sep.ok:
            raise AssumptionViolated(
                f"no separating strategy at x={x.tolist()} (margin {sep.margin:.6g})",
                point=x, margin=sep.margin,
            )
        rho = compute_rho(self.target, self.geometry, x, sep.margin, self.params.beta)
        hold = compute_hold_time(rho, self.geometry)
        return self.cover.add(x, rho, hold, sep.strategy, sep.margin, dist)

    def is_inside(self, x) -> bool:
        return self.target.distance(x) <= self.params.membership_tol

    def on_step(self, n: int, x, theta: int | None = None) -> StationaryStrategy:
        """Strategy for step ``n`` given the running average ``x = x_n``."""
        if n < self.next_switch_step:
            return self.current
        self.last_switch_step = n
        if self.is_inside(x):
            self.active = None
            self.current = self.fallback
            self.next_switch_step = n + 1
            self.switch_log.append(n, INSIDE)
            return self.current
        entry = self.lookup_or_create_anchor(x)
        self.active = entry
        self.current = entry.strategy
        self.next_switch_step = next_switch_step(n, entry.hold_time)
        self.switch_log.append(n, entry.index)
        return self.current

    def hold(self):
        """``(end, stop_state, inside_run)`` for the segment that starts at the last switch."""
        return self.next_switch_step, -1, self.active is None and self.last_switch_step > 0

    def absorb_inside_run(self, start: int, stop: int):
        """Book-keep steps ``start..stop-1`` that the simulator played inside the target."""
        if stop > start:
            self.switch_log.extend_inside(start, stop)
            self.last_switch_step = stop - 1
        self.next_switch_step = max(self.next_switch_step, stop)


class ReturnTimeController(TwoTimeScaleController):
    """Baseline that re-selects its strategy only on visits to a reference state."""

    scheme = "return-time"

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        ref = self.params.reference_state
        if not 0 <= ref < self.model.n_states:
            raise ModelError(f"reference state {ref} out of range")
        self.next_switch_step = None

    def on_step(self, n: int, x, theta: int | None = None) -> StationaryStrategy:
        if n < 1 or theta != self.params.reference_state:
            return self.current
        self.last_switch_step = n
        if self.is_inside(x):
            self.active = None
            self.current = self.fallback
            self.switch_log.append(n, INSIDE)
        else:
            self.active = self.lookup_or_create_anchor(x)
            self.current = self.active.strategy
            self.switch_log.append(n, self.active.index)
        return self.current

    def hold(self):
        return None, self.params.reference_state, False

    def absorb_inside_run(self, start: int, stop: int):
        pass


def make_controller(model, target, params: ControllerParams | None = None, **kwargs):
    params = params or ControllerParams()
    cls = TwoTimeScaleController if params.scheme == "two-time-scale" else ReturnTimeController
    return cls(model, target, params, **kwargs)
