"""Closed convex targets in reward space and the reward-set diameter."""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Any, Mapping

import numpy as np
from scipy.optimize import linprog
from scipy.spatial.distance import pdist

from .errors import GeometryError, ModelError
from .game_model import GameModel

MEMBERSHIP_TOL = 1e-12


def _vector(x, dim: int | None = None, name: str = "point") -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ModelError(f"{name} must be a 1-d vector")
    if dim is not None and x.size != dim:
        raise ModelError(f"{name} has dimension {x.size}, expected {dim}")
    return x


class ConvexTarget:
    """Nonempty closed convex set with an exact nearest-point map."""

    kind: str = ""
    dim: int

    def project(self, x) -> np.ndarray:
        raise NotImplementedError

    def distance(self, x) -> float:
        x = _vector(x, self.dim)
        return float(np.linalg.norm(x - self.project(x)))

    def contains(self, x, tol: float = MEMBERSHIP_TOL) -> bool:
        return self.distance(x) <= tol

    def distance_many(self, points) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        return np.array([self.distance(p) for p in points])

    def constraints(self):
        """``(A, b, center, radius)`` with ``A y <= b`` and ``|y - center| <= radius``.

        Used by compiled simulation loops for exact (zero slack) membership
        tests; ``radius`` is ``inf`` when there is no ball constraint.
        """
        raise NotImplementedError

    def intersects_box(self, lo, hi) -> bool:
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError

    @property
    def witness(self) -> np.ndarray:
        raise NotImplementedError


def _none_to_inf(values, sign: float) -> np.ndarray:
    return np.array([sign * np.inf if v is None else v for v in values], dtype=float)


class Box(ConvexTarget):
    """Axis-aligned box; bounds may be infinite."""

    kind = "box"

    def __init__(self, lower, upper):
        lower = np.asarray(lower, dtype=float)
        upper = np.asarray(upper, dtype=float)
        if lower.ndim != 1 or lower.shape != upper.shape or lower.size == 0:
            raise ModelError("box bounds must be 1-d vectors of equal length")
        if np.any(np.isnan(lower)) or np.any(np.isnan(upper)) or np.any(lower > upper):
            raise ModelError("box requires lower <= upper in every coordinate")
        if np.any(lower == np.inf) or np.any(upper == -np.inf):
            raise ModelError("box is empty")
        self.lower, self.upper = lower, upper
        self.dim = lower.size

    def project(self, x) -> np.ndarray:
        return np.clip(_vector(x, self.dim), self.lower, self.upper)

    def distance_many(self, points) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        return np.linalg.norm(points - np.clip(points, self.lower, self.upper), axis=1)

    @property
    def witness(self) -> np.ndarray:
        return np.clip(np.zeros(self.dim), self.lower, self.upper)

    def constraints(self):
        eye = np.eye(self.dim)
        rows, rhs = [], []
        for i in range(self.dim):
            if np.isfinite(self.upper[i]):
                rows.append(eye[i])
                rhs.append(self.upper[i])
            if np.isfinite(self.lower[i]):
                rows.append(-eye[i])
                rhs.append(-self.lower[i])
        a = np.array(rows, dtype=float).reshape(-1, self.dim)
        return a, np.array(rhs, dtype=float), np.zeros(self.dim), np.inf

    def intersects_box(self, lo, hi) -> bool:
        return bool(np.all(np.maximum(self.lower, lo) <= np.minimum(self.upper, hi)))

    def to_dict(self) -> dict:
        def enc(v):
            return [None if not np.isfinite(t) else float(t) for t in v]

        return {"type": "box", "lower": enc(self.lower), "upper": enc(self.upper)}


class Ball(ConvexTarget):
    """Closed Euclidean ball."""

    kind = "ball"

    def __init__(self, center, radius: float):
        self.center = _vector(center, name="center")
        if not np.all(np.isfinite(self.center)):
            raise ModelError("ball center must be finite")
        if not (np.isfinite(radius) and radius > 0):
            raise ModelError("ball radius must be positive and finite")
        self.radius = float(radius)
        self.dim = self.center.size

    def project(self, x) -> np.ndarray:
        x = _vector(x, self.dim)
        offset = x - self.center
        norm = np.linalg.norm(offset)
        if norm <= self.radius:
            return x.copy()
        return self.center + offset * (self.radius / norm)

    def distance_many(self, points) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        return np.maximum(np.linalg.norm(points - self.center, axis=1) - self.radius, 0.0)

    @property
    def witness(self) -> np.ndarray:
        return self.center.copy()

    def constraints(self):
        return np.zeros((0, self.dim)), np.zeros(0), self.center.copy(), self.radius

    def intersects_box(self, lo, hi) -> bool:
        nearest = np.clip(self.center, lo, hi)
        return bool(np.linalg.norm(nearest - self.center) <= self.radius)

    def to_dict(self) -> dict:
        return {"type": "ball", "center": self.center.tolist(), "radius": self.radius}


class Halfspaces(ConvexTarget):
    """Intersection of halfspaces ``normals[i] . y <= offsets[i]``.

    Projection is exact when the point is feasible or a single projected
    constraint lands inside the set; otherwise Dykstra's alternating
    projections are run and the result is polished by an equality-constrained
    least-squares solve on the detected active set.
    """

    kind = "halfspaces"

    def __init__(self, normals, offsets, witness=None, tol: float = 1e-10, max_iter: int = 100_000):
        normals = np.asarray(normals, dtype=float)
        offsets = np.asarray(offsets, dtype=float)
        if normals.ndim != 2 or offsets.shape != (normals.shape[0],) or normals.shape[0] == 0:
            raise ModelError("halfspaces need an (m, d) normal matrix and m offsets")
        if not (np.all(np.isfinite(normals)) and np.all(np.isfinite(offsets))):
            raise ModelError("halfspace data must be finite")
        norms = np.linalg.norm(normals, axis=1)
        if np.any(norms == 0):
            raise ModelError("halfspace normals must be nonzero")
        self.normals, self.offsets = normals, offsets
        self._sq = norms**2
        self.dim = normals.shape[1]
        self.tol, self.max_iter = tol, max_iter
        if witness is None:
            res = linprog(
                np.zeros(self.dim), A_ub=normals, b_ub=offsets,
                bounds=[(None, None)] * self.dim, method="highs",
            )
            if res.status != 0:
                raise ModelError("halfspace intersection is empty")
            witness = res.x
        witness = _vector(witness, self.dim, "witness")
        if np.max(normals @ witness - offsets) > 1e-9:
            raise ModelError("supplied witness violates the halfspaces")
        self._witness = witness

    @property
    def witness(self) -> np.ndarray:
        return self._witness.copy()

    def _violation(self, y) -> np.ndarray:
        return self.normals @ y - self.offsets

    def project(self, x) -> np.ndarray:
        x = _vector(x, self.dim)
        viol = self._violation(x)
        if np.all(viol <= 0):
            return x.copy()
        bad = np.flatnonzero(viol > 0)
        if bad.size == 1:
            i = bad[0]
            y = x - (viol[i] / self._sq[i]) * self.normals[i]
            if np.all(self._violation(y) <= MEMBERSHIP_TOL):
                return y
        y = self._dykstra(x)
        return self._polish(x, y)

    def _dykstra(self, x: np.ndarray) -> np.ndarray:
        y = x.copy()
        incr = np.zeros_like(self.normals)
        for _ in range(self.max_iter):
            start = y.copy()
            for i in range(self.normals.shape[0]):
                z = y + incr[i]
                excess = self.normals[i] @ z - self.offsets[i]
                y = z - (excess / self._sq[i]) * self.normals[i] if excess > 0 else z
                incr[i] = z - y
            if np.max(np.abs(y - start)) <= self.tol and np.max(self._violation(y)) <= self.tol:
                return y
        residual = float(max(np.max(np.abs(y - start)), np.max(self._violation(y))))
        raise GeometryError(
            f"Dykstra projection did not converge in {self.max_iter} sweeps "
            f"(residual {residual:.3g})",
            residual=residual,
        )

    def _polish(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        active = np.flatnonzero(self._violation(y) >= -1e-8)
        if active.size == 0:
            return y
        a = self.normals[active]
        rhs = a @ x - self.offsets[active]
        lam, *_ = np.linalg.lstsq(a @ a.T, rhs, rcond=None)
        z = x - a.T @ lam
        ok = (
            np.all(lam >= -1e-9)
            and np.max(self._violation(z)) <= MEMBERSHIP_TOL
            and np.linalg.norm(z - y) <= 1e-6
        )
        return z if ok else y

    def constraints(self):
        return self.normals.copy(), self.offsets.copy(), np.zeros(self.dim), np.inf

    def intersects_box(self, lo, hi) -> bool:
        res = linprog(
            np.zeros(self.dim), A_ub=self.normals, b_ub=self.offsets,
            bounds=list(zip(lo, hi)), method="highs",
        )
        return res.status == 0

    def to_dict(self) -> dict:
        return {
            "type": "halfspaces",
            "normals": self.normals.tolist(),
            "offsets": self.offsets.tolist(),
            "witness": self._witness.tolist(),
        }


def target_from_dict(doc: Mapping[str, Any]) -> ConvexTarget:
    """Parse a ``{"type": ...}`` target document."""
    if not isinstance(doc, Mapping) or "type" not in doc:
        raise ModelError("target must be an object with a 'type' field")
    kind = doc["type"]
    params = {k: v for k, v in doc.items() if k != "type"}
    allowed = {
        "box": {"lower", "upper"},
        "ball": {"center", "radius"},
        "halfspaces": {"normals", "offsets", "witness"},
    }
    if kind not in allowed:
        raise ModelError(f"unknown target type {kind!r}")
    unknown = set(params) - allowed[kind]
    if unknown:
        raise ModelError(f"unknown {kind} target keys: {sorted(unknown)}")
    try:
        if kind == "box":
            return Box(_none_to_inf(params["lower"], -1.0), _none_to_inf(params["upper"], 1.0))
        if kind == "ball":
            return Ball(params["center"], params["radius"])
        return Halfspaces(params["normals"], params["offsets"], params.get("witness"))
    except KeyError as exc:
        raise ModelError(f"{kind} target is missing {exc}") from exc
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ModelError):
            raise
        raise ModelError(f"malformed {kind} target: {exc}") from exc


def project(target: ConvexTarget, x) -> np.ndarray:
    return target.project(x)


def distance(target: ConvexTarget, x) -> float:
    return target.distance(x)


@dataclass(frozen=True)
class RewardGeometry:
    """Largest distance between reward vectors (the reward-set diameter)."""

    v_max: float

    @property
    def diam_K(self) -> float:
        return self.v_max


def compute_vmax(model: GameModel) -> RewardGeometry:
    # sup over the hull of |kappa - x| is attained at hull vertices
    pts = model.reward_vectors()
    return RewardGeometry(float(pdist(pts).max()) if len(pts) > 1 else 0.0)


def check_target(target: ConvexTarget, model: GameModel) -> bool:
    """Warn when the target misses the bounding box of the reward vectors."""
    if target.dim != model.dim:
        raise ModelError(f"target dimension {target.dim} != reward dimension {model.dim}")
    pts = model.reward_vectors()
    ok = target.intersects_box(pts.min(axis=0), pts.max(axis=0))
    if not ok:
        warnings.warn(
            "target is disjoint from the bounding box of the reward vectors; "
            "the running average can never reach it",
            stacklevel=2,
        )
    return ok
