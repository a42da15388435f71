"""Closed-loop simulation, traces, and multi-seed experiments.

Reward steps are indexed ``n = 0, 1, ..., N - 1``; the running average obeys
``x_{n+1} = x_n + (kappa_n - x_n) / (n + 1)`` with ``x_0 = 0``, so ``x_1`` is
the first reward and ``x_N`` the average after the horizon.  Trace row ``n``
holds the state, actions and reward of step ``n`` together with ``x_n``, the
average the controller saw when choosing the strategy for that step.
"""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _kernels
from .adversary import AdversaryPolicy, adversary_from_dict
from .controller import INSIDE, AnchorEntry, ControllerParams, Cover, make_controller
from .errors import AssumptionViolated, ModelError, SolverError
from .game_model import GameModel, StationaryStrategy
from .geometry import ConvexTarget, check_target, compute_vmax

log = logging.getLogger(__name__)

BLOCK = 3 * 65536
CHECKPOINTS = (1_000, 10_000, 100_000)
TRACE_FMT = "%.17g"


def make_rng(seed: int, stream: int = 0) -> np.random.Generator:
    """PCG64 generator for run ``stream`` under a root ``seed``.

    Streams are split with ``SeedSequence(seed, spawn_key=(stream,))``, so
    run ``i`` of an experiment draws from the same substream whatever the
    order in which runs execute.
    """
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(stream,))))


def step_average(x, kappa, n: int) -> np.ndarray:
    """One running-average update: ``x + (kappa - x) / (n + 1)``."""
    if n < 0:
        raise ModelError("step index must be nonnegative")
    x = np.asarray(x, dtype=float)
    return x + (np.asarray(kappa, dtype=float) - x) / (n + 1)


@dataclass
class RunConfig:
    model: GameModel
    target: ConvexTarget
    adversary: AdversaryPolicy | dict
    horizon: int
    controller: ControllerParams = field(default_factory=ControllerParams)
    seed: int = 0
    stream: int = 0
    initial_state: int = 0
    record_stride: int | None = None
    cover: Cover | None = None

    def __post_init__(self):
        if self.horizon < 1:
            raise ModelError("horizon must be >= 1")
        if not 0 <= self.initial_state < self.model.n_states:
            raise ModelError("initial state out of range")
        if self.record_stride is not None and self.record_stride < 1:
            raise ModelError("record_stride must be >= 1")
        if isinstance(self.adversary, dict):
            self.adversary = adversary_from_dict(self.adversary)

    @property
    def stride(self) -> int:
        return self.record_stride or max(1, self.horizon // 100_000)


@dataclass
class RunTrace:
    """Recorded rows plus full-resolution arrays of one run."""

    status: str
    message: str
    horizon: int
    steps: int  # reward steps actually simulated
    rows: dict  # recorded columns, see TRACE_COLUMNS
    x_final: np.ndarray
    dist_final: float
    anchors: list[AnchorEntry]
    switch_steps: np.ndarray
    switch_anchor: np.ndarray
    t: np.ndarray  # t[n] for n = 0..steps
    xs: np.ndarray  # x_n for n = 0..steps
    kappa: np.ndarray  # kappa_n for n = 0..steps - 1
    switch: np.ndarray  # bool per step
    v_max: float
    config_id: str = ""
    seed: int = 0
    target: ConvexTarget | None = None

    @property
    def n_switches(self) -> int:
        return int(self.switch_steps.size)

    def checkpoint(self, n: int) -> float:
        """Distance of ``x_n`` to the target, NaN when ``n`` was not reached."""
        if n > self.steps:
            return float("nan")
        return float(self.target.distance(self.xs[n]))


def _cumulative(dist: np.ndarray) -> np.ndarray:
    cum = np.cumsum(dist, axis=-1)
    cum[..., -1] = 1.0
    return cum


class _Uniforms:
    def __init__(self, rng: np.random.Generator):
        self.rng = rng
        self.buf = rng.random(BLOCK)
        self.pos = 0

    def refill(self):
        self.buf = self.rng.random(BLOCK)
        self.pos = 0


def run(config: RunConfig, config_id: str = "") -> RunTrace:
    """Simulate the closed loop for ``config.horizon`` reward steps."""
    model, target = config.model, config.target
    check_target(target, model)
    geometry = compute_vmax(model)
    controller = make_controller(model, target, config.controller, geometry=geometry, cover=config.cover)
    adversary = config.adversary
    adversary.reset(model, target)

    n_total = config.horizon
    d = model.dim
    xs = np.zeros((n_total + 1, d))
    states = np.zeros(n_total, dtype=np.int64)
    ups = np.zeros(n_total, dtype=np.int64)
    uas = np.zeros(n_total, dtype=np.int64)
    switch = np.zeros(n_total, dtype=bool)
    anchor_col = np.full(n_total, INSIDE, dtype=np.int64)

    cum_k = _cumulative(model.kernel)
    reward = np.ascontiguousarray(model.reward)
    cons_a, cons_b, center, radius = target.constraints()
    cons_a = np.ascontiguousarray(cons_a, dtype=float)
    uniforms = _Uniforms(make_rng(config.seed, config.stream))
    cum_cache: dict[int, tuple[StationaryStrategy, np.ndarray]] = {}

    def cum_of(strategy: StationaryStrategy) -> np.ndarray:
        hit = cum_cache.get(id(strategy))
        if hit is None or hit[0] is not strategy:
            hit = (strategy, _cumulative(strategy.dist))
            cum_cache[id(strategy)] = hit
        return hit[1]

    theta = config.initial_state
    n = 0
    status, message = "ok", ""
    while n < n_total:
        x = xs[n]
        try:
            pstrat = controller.on_step(n, x, theta)
            switched = controller.last_switch_step == n and n >= 1
            astrat = adversary.strategy(n, x=x, player_strategy=pstrat, player_switched=switched)
        except AssumptionViolated as exc:
            status, message = "assumption_violated", str(exc)
            break
        except SolverError as exc:
            status, message = "solver_error", str(exc)
            break
        end, stop_state, inside_run = controller.hold()
        limit = min(n_total, adversary.next_change(n))
        if end is not None and not inside_run:
            limit = min(limit, end)
        start = n
        switch[start] = switched
        active = controller.active.index if controller.active is not None else INSIDE
        cum_p, cum_a = cum_of(pstrat), cum_of(astrat)
        while True:
            n, theta, pos, reason = _kernels.advance(
                n, limit, start, theta, stop_state, inside_run,
                xs, states, ups, uas, cum_p, cum_a, cum_k, reward,
                cons_a, cons_b, center, radius, uniforms.buf, uniforms.pos,
            )
            uniforms.pos = pos
            if reason != _kernels.BUFFER_EMPTY:
                break
            uniforms.refill()
        anchor_col[start:n] = active
        if inside_run:
            switch[start:n] = True
            controller.absorb_inside_run(start + 1, n)

    steps = n
    t = _kernels.rescaled_times(steps)
    kappa = reward[states[:steps], ups[:steps], uas[:steps]]
    log_steps = np.array(controller.switch_log.steps, dtype=np.int64)
    log_anchor = np.array(controller.switch_log.anchors, dtype=np.int64)
    stride = config.stride
    keep = np.zeros(steps, dtype=bool)
    keep[::stride] = True
    keep |= switch[:steps]
    idx = np.flatnonzero(keep)
    rows = {
        "n": idx,
        "t": t[idx],
        "state": states[idx],
        "u_p": ups[idx],
        "u_a": uas[idx],
        "kappa": kappa[idx],
        "x": xs[idx],
        "dist": target.distance_many(xs[idx]) if idx.size else np.zeros(0),
        "anchor": anchor_col[idx],
        "switch": switch[idx].astype(np.int64),
    }
    trace = RunTrace(
        status=status,
        message=message,
        horizon=n_total,
        steps=steps,
        rows=rows,
        x_final=xs[steps].copy(),
        dist_final=float(target.distance(xs[steps])),
        anchors=list(controller.anchors),
        switch_steps=log_steps,
        switch_anchor=log_anchor,
        t=t,
        xs=xs[: steps + 1],
        kappa=kappa,
        switch=switch[:steps],
        v_max=geometry.v_max,
        config_id=config_id,
        seed=config.stream,
        target=target,
    )
    return trace


TRACE_COLUMNS = ("n", "t", "state", "u_p", "u_a", "kappa", "x", "dist", "anchor", "switch")


def trace_header(dim: int) -> list[str]:
    return (
        ["n", "t", "state", "u_p", "u_a"]
        + [f"kappa_{k}" for k in range(dim)]
        + [f"x_{k}" for k in range(dim)]
        + ["dist", "anchor", "switch"]
    )


def trace_csv(trace: RunTrace) -> str:
    """Trace rows as CSV text, floats with 17 significant digits."""
    rows = trace.rows
    dim = trace.xs.shape[1]
    buf = io.StringIO()
    buf.write(",".join(trace_header(dim)) + "\n")
    if rows["n"].size:
        ints = np.column_stack([rows["n"], rows["state"], rows["u_p"], rows["u_a"]]).tolist()
        floats = np.column_stack([rows["t"], rows["kappa"], rows["x"], rows["dist"]]).tolist()
        tail = np.column_stack([rows["anchor"], rows["switch"]]).tolist()
        head_fmt = "%d,{0},%d,%d,%d,".format(TRACE_FMT)
        float_fmt = ",".join([TRACE_FMT] * (2 * dim + 1)) + ",%d,%d\n"
        buf.writelines(
            head_fmt % (i[0], f[0], i[1], i[2], i[3]) + float_fmt % (*f[1:], *e)
            for i, f, e in zip(ints, floats, tail)
        )
    return buf.getvalue()


def write_trace_csv(trace: RunTrace, path) -> Path:
    path = Path(path)
    path.write_text(trace_csv(trace))
    return path


def interpolate(trace: RunTrace, t: float) -> np.ndarray:
    """Piecewise-linear average trajectory on the harmonic clock."""
    times = trace.t
    if trace.steps < 1 or not times[1] <= t <= times[-1]:
        raise ValueError(f"t={t} outside [t(1), t(N)] = [{times[min(1, len(times) - 1)]}, {times[-1]}]")
    n = int(np.searchsorted(times, t, side="right") - 1)
    if n >= trace.steps:
        return trace.xs[trace.steps].copy()
    lo, hi = times[n], times[n + 1]
    w = (t - lo) / (hi - lo)
    return (1.0 - w) * trace.xs[n] + w * trace.xs[n + 1]


def lipschitz_ratio(trace: RunTrace) -> float:
    """Largest slope of the interpolated trajectory from t(1) on; bounded by v_max."""
    if trace.steps < 2:
        return 0.0
    dx = np.linalg.norm(np.diff(trace.xs[1:], axis=0), axis=1)
    dt = np.diff(trace.t[1:])
    return float(np.max(dx / dt))


def window_block_average(trace: RunTrace, left: int, right: int) -> np.ndarray:
    """Mean reward over steps ``left..right-1``; the player must not switch inside."""
    if not 0 <= left < right <= trace.steps:
        raise ValueError(f"window [{left}, {right}) outside the {trace.steps} simulated steps")
    if np.any(trace.switch[left + 1 : right]):
        raise ValueError(f"player switches strategy inside window [{left}, {right})")
    return trace.kappa[left:right].mean(axis=0)


def switch_windows(trace: RunTrace):
    """Completed hold windows ``(s_n, s_{n+1}, anchor)`` of the switch log."""
    s = trace.switch_steps
    return list(zip(s[:-1].tolist(), s[1:].tolist(), trace.switch_anchor[:-1].tolist()))


def decay_check(trace: RunTrace, target: ConvexTarget, min_step: int = 10_000, slack: float = 10.0):
    """Count late windows where the distance shrinks like ``exp(-elapsed time)``.

    A window from ``s`` to ``s'`` passes when
    ``dist(x_s') <= dist(x_s) * exp(-(t(s') - t(s))) + slack / s``.
    Returns ``(windows, passed)``.
    """
    total = passed = 0
    for s, s_next, anchor in switch_windows(trace):
        if s < min_step or anchor == INSIDE:
            continue
        d0 = target.distance(trace.xs[s])
        if d0 <= 0:
            continue
        d1 = target.distance(trace.xs[s_next])
        total += 1
        if d1 <= d0 * np.exp(-(trace.t[s_next] - trace.t[s])) + slack / s:
            passed += 1
    return total, passed


SUMMARY_COLUMNS = (
    "config_id", "seed", "steps", "dist_1e3", "dist_1e4", "dist_1e5",
    "dist_final", "switches", "anchors", "status",
)


def summary_row(trace: RunTrace) -> dict:
    row = {"config_id": trace.config_id, "seed": trace.seed, "steps": trace.steps}
    for name, n in zip(("dist_1e3", "dist_1e4", "dist_1e5"), CHECKPOINTS):
        row[name] = trace.checkpoint(n)
    row["dist_final"] = trace.dist_final
    row["switches"] = trace.n_switches
    row["anchors"] = len(trace.anchors)
    row["status"] = trace.status
    return row


def aggregate_row(config_id: str, rows: list[dict]) -> dict:
    def median(key):
        vals = np.array([r[key] for r in rows], dtype=float)
        vals = vals[~np.isnan(vals)]
        return float(np.median(vals)) if vals.size else float("nan")

    ok = sum(r["status"] == "ok" for r in rows)
    return {
        "config_id": config_id,
        "seed": "median",
        "steps": int(np.median([r["steps"] for r in rows])),
        **{k: median(k) for k in ("dist_1e3", "dist_1e4", "dist_1e5", "dist_final")},
        "switches": int(np.median([r["switches"] for r in rows])),
        "anchors": int(np.median([r["anchors"] for r in rows])),
        "status": f"ok={ok}/{len(rows)}",
    }


def _fmt(value) -> str:
    if isinstance(value, (float, np.floating)):
        return "" if np.isnan(value) else TRACE_FMT % value
    return str(value)


def summary_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SUMMARY_COLUMNS)
    for row in rows:
        writer.writerow([_fmt(row[c]) for c in SUMMARY_COLUMNS])
    return buf.getvalue()


@dataclass
class ExperimentSpec:
    """One configuration of an experiment suite."""

    config_id: str
    model: GameModel
    target: ConvexTarget
    adversary: dict
    horizon: int
    controller: ControllerParams = field(default_factory=ControllerParams)
    initial_state: int = 0
    record_stride: int | None = None

    def run_config(self, root_seed: int, stream: int) -> RunConfig:
        return RunConfig(
            model=self.model, target=self.target, adversary=dict(self.adversary),
            horizon=self.horizon, controller=self.controller, seed=root_seed,
            stream=stream, initial_state=self.initial_state,
            record_stride=self.record_stride,
        )


@dataclass
class ExperimentResult:
    rows: list[dict]  # per-run rows followed by one aggregate row per config
    decay: list[dict]
    traces: list[RunTrace]

    def runs(self, config_id: str | None = None) -> list[dict]:
        return [
            r for r in self.rows
            if r["seed"] != "median" and (config_id is None or r["config_id"] == config_id)
        ]

    def csv(self) -> str:
        return summary_csv(self.rows)


def _one(args):
    spec, root_seed, stream, keep = args
    try:
        trace = run(spec.run_config(root_seed, stream), config_id=spec.config_id)
    except (ModelError, SolverError) as exc:
        return None, {
            "config_id": spec.config_id, "seed": stream, "steps": 0,
            "dist_1e3": float("nan"), "dist_1e4": float("nan"), "dist_1e5": float("nan"),
            "dist_final": float("nan"), "switches": 0, "anchors": 0,
            "status": f"error: {exc}".replace(",", ";"),
        }, (0, 0)
    row = summary_row(trace)
    decay = decay_check(trace, spec.target)
    return (trace if keep else None), row, decay


def experiment(
    specs: list[ExperimentSpec],
    seeds: int,
    root_seed: int = 0,
    workers: int = 1,
    keep_traces: bool = False,
    out=None,
) -> ExperimentResult:
    """Run every (config, seed) pair and aggregate per config.

    Rows are ordered by (config, seed) whatever the completion order, so the
    summary is reproducible with any number of workers.  Per-run failures are
    recorded in the ``status`` column instead of aborting the batch.
    """
    if not specs:
        raise ModelError("experiment needs at least one configuration")
    jobs = [(spec, root_seed, s, keep_traces) for spec in specs for s in range(seeds)]
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_one, jobs))
    else:
        results = [_one(job) for job in jobs]
    rows, decay, traces = [], [], []
    for spec in specs:
        mine = [r for job, r in zip(jobs, results) if job[0] is spec]
        config_rows = [r[1] for r in mine]
        rows.extend(config_rows)
        rows.append(aggregate_row(spec.config_id, config_rows))
        for (_, row, (total, passed)) in mine:
            decay.append(
                {"config_id": spec.config_id, "seed": row["seed"], "windows": total, "passed": passed}
            )
        traces.extend(r[0] for r in mine if r[0] is not None)
    result = ExperimentResult(rows, decay, traces)
    if out is not None:
        Path(out).write_text(result.csv())
    return result


def simulate_chain_frequencies(matrix: np.ndarray, steps: int, rng, initial_state: int = 0):
    """Empirical state frequencies of a Markov chain over ``steps`` steps."""
    cum = _cumulative(np.asarray(matrix, dtype=float))
    counts = _kernels.simulate_chain(cum, steps, initial_state, rng.random(steps))
    return counts / steps


def _play_fixed(model, pi_p, pi_a, steps, rng, initial_state):
    xs = np.zeros((steps + 1, model.dim))
    states = np.zeros(steps, dtype=np.int64)
    ups = np.zeros(steps, dtype=np.int64)
    uas = np.zeros(steps, dtype=np.int64)
    empty = np.zeros((0, model.dim))
    buf = rng.random(3 * steps)
    _kernels.advance(
        0, steps, 0, initial_state, -1, False, xs, states, ups, uas,
        _cumulative(pi_p.dist), _cumulative(pi_a.dist), _cumulative(model.kernel),
        np.ascontiguousarray(model.reward), empty, np.zeros(0), np.zeros(model.dim), np.inf,
        buf, 0,
    )
    return xs, states, ups, uas


def simulate_fixed(
    model: GameModel, pi_p: StationaryStrategy, pi_a: StationaryStrategy, steps: int,
    rng: np.random.Generator, initial_state: int = 0,
) -> np.ndarray:
    """Rewards ``kappa_n`` of ``steps`` steps played with fixed stationary strategies."""
    _, states, ups, uas = _play_fixed(model, pi_p, pi_a, steps, rng, initial_state)
    return model.reward[states, ups, uas]


def fixed_trace(
    model: GameModel, target: ConvexTarget, pi_p: StationaryStrategy, pi_a: StationaryStrategy,
    steps: int, rng: np.random.Generator, initial_state: int = 0, record_stride: int = 1,
) -> RunTrace:
    """Trace of an open-loop run in which neither side ever switches."""
    xs, states, ups, uas = _play_fixed(model, pi_p, pi_a, steps, rng, initial_state)
    kappa = model.reward[states, ups, uas]
    idx = np.arange(0, steps, record_stride)
    rows = {
        "n": idx, "t": None, "state": states[idx], "u_p": ups[idx], "u_a": uas[idx],
        "kappa": kappa[idx], "x": xs[idx], "dist": target.distance_many(xs[idx]),
        "anchor": np.full(idx.size, INSIDE, dtype=np.int64),
        "switch": np.zeros(idx.size, dtype=np.int64),
    }
    t = _kernels.rescaled_times(steps)
    rows["t"] = t[idx]
    return RunTrace(
        status="ok", message="", horizon=steps, steps=steps, rows=rows,
        x_final=xs[steps].copy(), dist_final=float(target.distance(xs[steps])), anchors=[],
        switch_steps=np.zeros(0, dtype=np.int64), switch_anchor=np.zeros(0, dtype=np.int64),
        t=t, xs=xs, kappa=kappa, switch=np.zeros(steps, dtype=bool),
        v_max=compute_vmax(model).v_max, target=target,
    )
