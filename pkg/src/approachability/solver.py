"""Zero-sum solvers used to build separating strategies.

Matrix games are solved exactly by a dense simplex method with Bland's rule.
Average-reward stochastic games (and the adversary's average-reward MDP) are
solved by relative value iteration whose per-state stage problems are matrix
games.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import ModelError, SolverError
from .game_model import GameModel, StationaryStrategy
from .geometry import MEMBERSHIP_TOL, ConvexTarget

PIVOT_TOL = 1e-12
DAMPING = 0.9


@dataclass(frozen=True)
class MatrixGame:
    """Zero-sum matrix game; the row player maximizes ``payoff``."""

    payoff: np.ndarray

    def __post_init__(self):
        a = np.atleast_2d(np.asarray(self.payoff, dtype=float))
        if a.ndim != 2 or a.size == 0 or not np.all(np.isfinite(a)):
            raise ModelError("payoff must be a nonempty finite matrix")
        object.__setattr__(self, "payoff", a)


@dataclass
class GameSolution:
    value: float
    row_strategy: np.ndarray
    col_strategy: np.ndarray
    bias: np.ndarray | None = None
    iterations: int = 0
    residual: float = 0.0

    @cached_property
    def player_strategy(self) -> StationaryStrategy:
        return StationaryStrategy(np.atleast_2d(self.row_strategy))

    @cached_property
    def adversary_strategy(self) -> StationaryStrategy:
        return StationaryStrategy(np.atleast_2d(self.col_strategy))


def _clean(p: np.ndarray) -> np.ndarray:
    p = np.clip(p, 0.0, None)
    return p / p.sum()


def _simplex_bland(b: np.ndarray):
    """Solve ``max 1.y s.t. b y <= 1, y >= 0`` for a positive matrix ``b``.

    Returns the primal solution, the dual solution and the optimal objective.
    Slack variables form the starting basis, so no phase one is needed.
    """
    m, n = b.shape
    tab = np.zeros((m + 1, n + m + 1))
    tab[:m, :n] = b
    tab[:m, n : n + m] = np.eye(m)
    tab[:m, -1] = 1.0
    tab[m, :n] = -1.0
    basis = list(range(n, n + m))
    while True:
        reduced = tab[m, :-1]
        candidates = np.flatnonzero(reduced < -PIVOT_TOL)
        if candidates.size == 0:
            break
        col = candidates[0]
        column = tab[:m, col]
        rows = np.flatnonzero(column > PIVOT_TOL)
        # positive payoffs make the program bounded
        ratios = tab[rows, -1] / column[rows]
        best = ratios.min()
        ties = rows[ratios <= best + PIVOT_TOL * max(1.0, abs(best))]
        row = min(ties, key=lambda r: basis[r])
        tab[row] /= tab[row, col]
        others = np.arange(m + 1) != row
        tab[others] -= np.outer(tab[others, col], tab[row])
        basis[row] = col
    primal = np.zeros(n + m)
    primal[basis] = tab[:m, -1]
    dual = tab[m, n : n + m].copy()
    return primal[:n], dual, tab[m, -1]


def solve_matrix_game(game: MatrixGame | np.ndarray) -> GameSolution:
    """Value and optimal mixed strategies of a zero-sum matrix game."""
    a = game.payoff if isinstance(game, MatrixGame) else MatrixGame(game).payoff
    shift = a.min() - 1.0
    y, x, total = _simplex_bland(a - shift)
    return GameSolution(
        value=float(1.0 / total + shift),
        row_strategy=_clean(x / total),
        col_strategy=_clean(y / total),
    )


@dataclass(frozen=True)
class ScalarGame:
    """Game with scalar rewards ``reward[s, up, ua]`` obtained by projecting
    vector rewards on a unit direction; ``scale`` is the original direction norm."""

    kernel: np.ndarray
    reward: np.ndarray
    direction: np.ndarray
    scale: float = 1.0

    @property
    def n_states(self) -> int:
        return self.kernel.shape[0]


def scalarize(model: GameModel, direction) -> ScalarGame:
    direction = np.asarray(direction, dtype=float)
    if direction.shape != (model.dim,) or not np.all(np.isfinite(direction)):
        raise ModelError(f"direction must be a finite vector of length {model.dim}")
    norm = float(np.linalg.norm(direction))
    if norm == 0.0:
        raise ModelError("zero direction: the point already lies in the target")
    unit = direction / norm
    return ScalarGame(model.kernel, model.reward @ unit, unit, norm)


def _relative_value_iteration(reward, kernel, stage, *, tol, max_iter, reference_state):
    """Relative value iteration with a per-state stage solver.

    ``stage(matrix)`` returns ``(value, row, col)``.  Switches to the damped
    kernel ``(1 - a) I + a P`` when the span residual stalls, which keeps
    the gain and optimal strategies but removes periodic oscillation.
    """
    n_s = reward.shape[0]
    h = np.zeros(n_s)
    p = kernel
    damped = False
    spans = []
    residual = np.inf
    for it in range(1, max_iter + 1):
        cont = p @ h
        results = [stage(reward[s] + cont[s]) for s in range(n_s)]
        w = np.array([r[0] for r in results])
        offset = w[reference_state]
        h_new = w - offset
        diff = h_new - h
        residual = float(diff.max() - diff.min())
        h = h_new
        if residual <= tol:
            rows = np.array([r[1] for r in results])
            cols = np.array([r[2] for r in results])
            bias = DAMPING * h if damped else h
            return GameSolution(float(offset), rows, cols, bias, it, residual)
        spans.append(residual)
        if not damped and len(spans) > 200 and residual > 0.9 * spans[-101]:
            damped = True
            eye = np.eye(n_s)[:, None, None, :]
            p = (1.0 - DAMPING) * eye + DAMPING * kernel
    raise SolverError(
        f"relative value iteration hit the cap of {max_iter} iterations "
        f"(span residual {residual:.3g}); the instance may be periodic or multichain",
        residual=residual,
    )


def _matrix_stage(matrix):
    sol = solve_matrix_game(MatrixGame(matrix))
    return sol.value, sol.row_strategy, sol.col_strategy


def solve_average_game(
    game: ScalarGame, tol: float = 1e-9, max_iter: int = 100_000, reference_state: int = 0
) -> GameSolution:
    """Value, player-optimal stationary strategy and bias of an average-reward game."""
    return _relative_value_iteration(
        game.reward, game.kernel, _matrix_stage,
        tol=tol, max_iter=max_iter, reference_state=reference_state,
    )


@dataclass
class SeparationResult:
    status: str  # "ok" or "assumption_violated"
    strategy: StationaryStrategy
    margin: float
    value: float
    projection: np.ndarray
    direction: np.ndarray
    solution: GameSolution

    @property
    def ok(self) -> bool:
        return self.status == "ok"


def separating_strategy(
    model: GameModel, target: ConvexTarget, x, tol: float = 1e-9, cache: dict | None = None
) -> SeparationResult:
    """Player strategy pushing the average reward across the hyperplane at ``x``'s projection.

    ``margin`` is the infimum over adversary strategies of
    ``<avg_reward - x_proj, x_proj - x>``; a nonpositive margin means no
    stationary strategy separates ``x`` from the target.

    The game only depends on the unit direction, so ``cache`` (a dict owned
    by the caller) memoizes solutions keyed by the direction's bytes.
    """
    x = np.asarray(x, dtype=float)
    x_proj = target.project(x)
    gap = x_proj - x
    dist = float(np.linalg.norm(gap))
    if dist <= MEMBERSHIP_TOL:
        raise ModelError("point lies in the target; no separating strategy is needed")
    game = scalarize(model, gap)
    key = game.direction.tobytes()
    sol = cache.get(key) if cache is not None else None
    if sol is None:
        sol = solve_average_game(game, tol=tol)
        if cache is not None:
            cache[key] = sol
    margin = sol.value * dist - float(x_proj @ gap)
    return SeparationResult(
        status="ok" if margin > 0 else "assumption_violated",
        strategy=sol.player_strategy,
        margin=float(margin),
        value=sol.value,
        projection=x_proj,
        direction=game.direction,
        solution=sol,
    )


def _min_stage(row):
    j = int(np.argmin(row[0]))
    col = np.zeros(row.shape[1])
    col[j] = 1.0
    return row[0, j], np.ones(1), col


def adversary_best_response(
    model: GameModel, pi_p: StationaryStrategy, direction, tol: float = 1e-9,
    max_iter: int = 100_000,
) -> StationaryStrategy:
    """Pure stationary adversary strategy minimizing the scalarized average reward."""
    if pi_p.dist.shape != (model.n_states, model.n_player_actions):
        raise ModelError("player strategy does not match the model")
    game = scalarize(model, direction)
    reward = np.einsum("spa,sp->sa", game.reward, pi_p.dist)[:, None, :]
    kernel = np.einsum("spat,sp->sat", model.kernel, pi_p.dist)[:, None, :, :]
    sol = _relative_value_iteration(
        reward, kernel, _min_stage, tol=tol, max_iter=max_iter, reference_state=0
    )
    return StationaryStrategy(sol.col_strategy)


@dataclass
class PointCheck:
    point: np.ndarray
    status: str  # "ok", "inside" or "assumption_violated"
    margin: float | None
    value: float | None


def check_assumption(
    model: GameModel, target: ConvexTarget, points, tol: float = 1e-9,
    membership_tol: float = MEMBERSHIP_TOL,
) -> list[PointCheck]:
    """Separation margin at each point; points in the target are reported as inside."""
    cache: dict = {}
    out = []
    for x in np.atleast_2d(np.asarray(points, dtype=float)):
        if target.distance(x) <= membership_tol:
            out.append(PointCheck(x, "inside", None, None))
            continue
        sep = separating_strategy(model, target, x, tol=tol, cache=cache)
        out.append(PointCheck(x, sep.status, sep.margin, sep.value))
    return out
