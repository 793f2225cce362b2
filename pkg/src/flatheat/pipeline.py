"""Project, synthesize, predict, simulate and verify for one configuration."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from . import io
from .config import ConfigError, RunConfig
from .control import (
    ControlSchedule,
    ErrorModelConstants,
    StateField,
    TruncationOrders,
    calibrate_c1,
    control_value,
    error_bound,
    sample_schedule,
    state_prediction,
    truncation_residual,
)
from .flat_output import FlatOutputs
from .gevrey import GevreyStep
from .simulator import RunResult, SimGrid, compare_fields, half_step_times, run
from .spectral import (
    TensorCosineSeries,
    double_step_coefficients,
    free_evolution,
    project_profile,
    project_profile_2d,
    read_coefficients_csv,
    step_coefficients,
)

log = logging.getLogger(__name__)

__all__ = [
    "PAPER_STEP",
    "TAIL",
    "Problem",
    "build_problem",
    "initial_series",
    "initial_cells",
    "synthesize",
    "predict",
    "simulate",
    "measure_truncation",
    "interface_defect",
    "verify",
    "run_pipeline",
    "StudyTable",
    "convergence_study",
]

PAPER_STEP = ((-0.75, 1.25), 0.5)
TAIL = 10  # extra modes / Taylor terms used as the reference truncation


def _parse_step(arg: str):
    try:
        lo, hi, b = (float(v) for v in arg.split(","))
    except ValueError as exc:
        raise ConfigError(f"step initial data needs 'step:<lo>,<hi>,<breakpoint>', got 'step:{arg}'") from exc
    if not 0.0 < b < 1.0:
        raise ConfigError("step breakpoint must lie in (0, 1)")
    return (lo, hi), b


def _fit(c: np.ndarray, rows: int, cols: int) -> np.ndarray:
    out = np.zeros((rows, cols))
    r, k = min(rows, c.shape[0]), min(cols, c.shape[1])
    out[:r, :k] = c[:r, :k]
    return out


def _load_samples(path: str) -> np.ndarray:
    try:
        data = np.loadtxt(path, delimiter=",", comments="#", ndmin=2)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read samples from '{path}': {exc}") from exc
    return data


def initial_series(config: RunConfig, extra: int = 0) -> TensorCosineSeries:
    """Coefficients up to ``(j_bar + extra, n_bar + extra)``."""
    N = config.dimension
    rows = 1 if N == 1 else config.j_bar + extra + 1
    cols = config.n_bar + extra + 1
    kind, _, arg = config.initial.partition(":")
    cross = N - 1
    if kind == "zero":
        return TensorCosineSeries(np.zeros((rows, cols)), cross)
    if kind == "paper-step":
        return step_coefficients(*PAPER_STEP, cols - 1).as_tensor()
    if kind == "step":
        return step_coefficients(*_parse_step(arg), cols - 1).as_tensor()
    if kind == "double-step":
        return double_step_coefficients(rows - 1, cols - 1)
    if kind == "coeffs":
        try:
            s = read_coefficients_csv(arg)
        except (OSError, ValueError, KeyError) as exc:
            raise ConfigError(f"cannot read coefficients from '{arg}': {exc}") from exc
        s = s.as_tensor() if not isinstance(s, TensorCosineSeries) else s
        if s.cross_dim != cross:
            raise ConfigError(f"coefficient file has cross_dim={s.cross_dim}, config needs {cross}")
        return TensorCosineSeries(_fit(s.coeffs, rows, cols), cross)
    if kind == "file":
        data = _load_samples(arg)
        if N == 1:
            f = data[:, -1]
            n = min(cols - 1, (f.size - 2) // 2)
            if n < config.n_bar:
                raise ConfigError(f"'{arg}' has {f.size} samples, too few for n_bar={config.n_bar}")
            return TensorCosineSeries(_fit(project_profile(f, n).coeffs[None, :], 1, cols), 0)
        if N == 2:
            j = min(rows - 1, (data.shape[0] - 2) // 2)
            n = min(cols - 1, (data.shape[1] - 2) // 2)
            if j < config.j_bar or n < config.n_bar:
                raise ConfigError(f"'{arg}' has {data.shape} samples, too few for the requested orders")
            return TensorCosineSeries(_fit(project_profile_2d(data, j, n).coeffs, rows, cols), 1)
    raise ConfigError(f"initial data '{config.initial}' is not available in dimension {N}")


def _step_cell_average(levels, b: float, m: int) -> np.ndarray:
    lo, hi = levels
    left = np.arange(m) / m
    frac = np.clip((b - left) * m, 0.0, 1.0)  # share of each cell below b
    return frac * lo + (1.0 - frac) * hi


def initial_cells(config: RunConfig, grid: SimGrid) -> np.ndarray:
    """Cell-centred initial data (exact cell averages for piecewise constants)."""
    kind, _, arg = config.initial.partition(":")
    centers = grid.centers()
    if kind == "zero":
        return np.zeros(grid.cells)
    if kind in ("paper-step", "step"):
        levels, b = PAPER_STEP if kind == "paper-step" else _parse_step(arg)
        return _step_cell_average(levels, b, grid.cells[0])
    if kind == "double-step":
        m1, m2 = grid.cells
        a1 = _step_cell_average((0.0, 1.0), 0.5, m1)  # share above 1/2
        a2 = _step_cell_average((0.0, 1.0), 0.5, m2)
        same = np.outer(1 - a1, 1 - a2) + np.outer(a1, a2)
        return 0.25 * (1.0 - 2.0 * same)
    if kind == "file":
        data = _load_samples(arg)
        if grid.ndim == 1:
            f = data[:, -1]
            return np.interp(centers[0], np.linspace(0.0, 1.0, f.size), f)
        axes = tuple(np.linspace(0.0, 1.0, k) for k in data.shape)
        mesh = np.meshgrid(*centers, indexing="ij")
        return RegularGridInterpolator(axes, data)(np.stack(mesh, axis=-1))
    series = initial_series(config)
    if grid.ndim == 1:
        return free_evolution(series, 0.0, centers[0])
    X1, Z = np.meshgrid(*centers, indexing="ij")
    return free_evolution(series, 0.0, Z, xp=X1)


@dataclass(frozen=True)
class Problem:
    """A configuration with its flat-output family (built with ``TAIL`` spare modes)."""

    config: RunConfig
    flat: FlatOutputs
    orders: TruncationOrders

    @property
    def truncated(self) -> TensorCosineSeries:
        return self.flat.series.truncate(self.orders.j_bar if self.config.dimension > 1 else 0, self.orders.n_bar)

    @property
    def norm0(self) -> float:
        """``||theta0||_{L2}`` of the full initial data."""
        kind, _, arg = self.config.initial.partition(":")
        if kind == "paper-step":
            (lo, hi), b = PAPER_STEP
            return math.sqrt(lo * lo * b + hi * hi * (1 - b))
        if kind == "step":
            (lo, hi), b = _parse_step(arg)
            return math.sqrt(lo * lo * b + hi * hi * (1 - b))
        if kind == "double-step":
            return 0.25
        return math.sqrt(self.flat.series.energy())

    def constants(self) -> ErrorModelConstants:
        cfg = self.config
        base = ErrorModelConstants.default(cfg.tau, cfg.s)
        c = ErrorModelConstants(
            C1=base.C1 if cfg.C1 is None else cfg.C1,
            C2=base.C2 if cfg.C2 is None else cfg.C2,
            C3=base.C3 if cfg.C3 is None else cfg.C3,
            C4=base.C4 if cfg.C4 is None else cfg.C4,
        )
        try:
            c.validate(cfg.tau, cfg.s)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        return c


def build_problem(config: RunConfig) -> Problem:
    series = initial_series(config, extra=TAIL)
    flat = FlatOutputs(series, config.tau, config.T, GevreyStep(config.s))
    orders = TruncationOrders(config.i_bar, config.j_bar if config.dimension > 1 else 0, config.n_bar)
    return Problem(config, flat, orders)


def _cross_points(config: RunConfig) -> np.ndarray | None:
    if config.dimension == 1:
        return None
    if config.dimension == 2:
        return np.linspace(0.0, 1.0, config.cross_samples)
    g = np.linspace(0.0, 1.0, config.cross_samples)
    X, Y = np.meshgrid(g, g, indexing="ij")
    return np.column_stack([X.ravel(), Y.ravel()])


def synthesize(problem: Problem) -> ControlSchedule:
    """Control samples on ``control_samples`` uniform times in ``[0, T]``."""
    cfg = problem.config
    times = np.linspace(0.0, cfg.T, cfg.control_samples)
    xp = _cross_points(cfg)
    if cfg.dimension == 3:
        raise ConfigError("control export is limited to dimensions 1 and 2")
    return sample_schedule(problem.flat, problem.orders, times, xp)


def predict(problem: Problem, z=None) -> list[StateField]:
    """Truncated state at ``snapshots`` uniform times in ``[0, T]``.

    Free evolution of the truncated data up to ``tau``, the flatness series
    afterwards.
    """
    cfg = problem.config
    if cfg.dimension == 3:
        raise ConfigError("state export is limited to dimensions 1 and 2")
    z = np.linspace(0.0, 1.0, 101) if z is None else np.asarray(z, dtype=float)
    xp = _cross_points(cfg)
    times = np.linspace(0.0, cfg.T, cfg.snapshots)
    series = problem.truncated
    grid = (z,) if xp is None else (xp, z)
    fields = []
    late = times[times > cfg.tau]
    pred = state_prediction(problem.flat, problem.orders, late, z, xp) if late.size else None
    for k, t in enumerate(times):
        if t <= cfg.tau:
            if xp is None:
                v = free_evolution(series, t, z)
            else:
                X1, Z = np.meshgrid(xp, z, indexing="ij")
                v = free_evolution(series, t, Z, xp=X1)
        else:
            v = pred[k - (times.size - late.size)]
        fields.append(StateField(float(t), grid, v))
    return fields


def sim_grid(config: RunConfig) -> SimGrid:
    if config.dimension == 3:
        raise ConfigError("simulation is limited to dimensions 1 and 2")
    cells = (config.cells,) * config.dimension
    return SimGrid(cells, config.time_step)


def simulate(problem: Problem, grid: SimGrid | None = None) -> RunResult:
    """Drive the finite-volume model with the control sampled on its half-step grid."""
    cfg = problem.config
    grid = grid or sim_grid(cfg)
    times = half_step_times(cfg.T, grid.dt)
    xp = None if grid.ndim == 1 else grid.centers()[0]
    schedule = sample_schedule(problem.flat, problem.orders, times, xp)
    steps = int(np.ceil(cfg.T / grid.dt - 1e-9))
    every = max(1, steps // max(1, cfg.snapshots - 1))
    return run(initial_cells(cfg, grid), schedule, grid, cfg.T, snapshot_every=every)


def _verify_grids(config: RunConfig):
    t = np.linspace(config.tau, config.T, 61)
    z = np.linspace(0.0, 1.0, 51 if config.dimension == 1 else 21)
    xp = None
    if config.dimension == 2:
        xp = np.linspace(0.0, 1.0, 21)
    elif config.dimension == 3:
        g = np.linspace(0.0, 1.0, 7)
        X, Y = np.meshgrid(g, g, indexing="ij")
        xp = np.column_stack([X.ravel(), Y.ravel()])
    return t, z, xp


def _zero_below(series: TensorCosineSeries, j_min: int = 0, n_min: int = 0) -> TensorCosineSeries:
    c = np.array(series.coeffs)
    c[:j_min, :] = 0.0
    c[:, :n_min] = 0.0
    return TensorCosineSeries(c, series.cross_dim)


def measure_truncation(flat: FlatOutputs, orders: TruncationOrders, t, z, xp=None, delta=TAIL) -> dict:
    """Sup-norm size of the series left out by ``orders``.

    Each axis is compared with a truncation ``delta`` terms further out; by
    linearity the difference is evaluated directly from the omitted terms.
    ``delta`` may be an int or a mapping ``{"i": di, "j": dj, "n": dn}``.
    """
    d = delta if isinstance(delta, dict) else {"i": delta, "j": delta, "n": delta}
    ib, jb, nb = orders.i_bar, orders.j_bar, orders.n_bar
    out = {}
    if d.get("i"):
        wide = TruncationOrders(ib + d["i"], jb, nb)
        out["i"] = float(np.abs(state_prediction(flat, wide, t, z, xp, i_min=ib + 1)).max())
    if d.get("n"):
        tail = FlatOutputs(_zero_below(flat.series, n_min=nb + 1), flat.tau, flat.T, flat.step)
        out["n"] = float(np.abs(state_prediction(tail, TruncationOrders(ib, jb, nb + d["n"]), t, z, xp)).max())
    if d.get("j") and flat.domain.cross_dim > 0:
        tail = FlatOutputs(_zero_below(flat.series, j_min=jb + 1), flat.tau, flat.T, flat.step)
        out["j"] = float(np.abs(state_prediction(tail, TruncationOrders(ib, jb + d["j"], nb), t, z, xp)).max())
    out["total"] = sum(out.values())
    return out


def interface_defect(flat: FlatOutputs, orders: TruncationOrders) -> float:
    """``max_i |y^(i)(tau) - y_i|`` normalised by ``max(|y_i|, eps max_k |y_k|)``."""
    from .control import truncate_family

    fam = truncate_family(flat, orders)
    want = fam.tau_table(orders.i_bar)
    got = fam.y_table(np.array(flat.tau), orders.i_bar)
    scale = np.maximum(np.abs(want), 1e-16 * np.abs(want).max(axis=1, keepdims=True))
    scale = np.where(scale > 0, scale, 1.0)
    return float(np.max(np.abs(got - want) / scale))


def verify(problem: Problem, result: RunResult | None = None, predicted: list | None = None) -> dict:
    """Verification metrics as an ordered dict (written as the run report)."""
    cfg = problem.config
    flat, orders = problem.flat, problem.orders
    t, z, xp = _verify_grids(cfg)
    norm0 = problem.norm0
    rep = {"norm_theta0_l2": norm0}

    u_tau = control_value(flat, orders, np.array([cfg.tau]), xp)
    rep["control_at_tau_plus"] = float(np.abs(u_tau).max())
    rep["interface_defect_y"] = interface_defect(flat, orders)
    theta_tau = state_prediction(flat, orders, np.array([cfg.tau]), z, xp)[0]
    if xp is None:
        free = free_evolution(problem.truncated, cfg.tau, z)
    else:
        XP, Z = np.meshgrid(np.arange(np.shape(xp)[0]), z, indexing="ij")
        pts = np.asarray(xp)[XP]
        free = free_evolution(problem.truncated, cfg.tau, Z, xp=pts)
    rep["interface_defect_state"] = float(np.abs(theta_tau - free).max())
    rep["terminal_prediction_max"] = float(np.abs(state_prediction(flat, orders, np.array([cfg.T]), z, xp)).max())
    rep["residual_max"] = float(np.abs(truncation_residual(flat, orders, t, z, xp)).max())

    measured = measure_truncation(flat, orders, t, z, xp)
    for k, v in measured.items():
        rep[f"truncation_error_{k}"] = v
    consts = problem.constants()
    ref = TruncationOrders(max(2, orders.i_bar - TAIL), orders.j_bar, orders.n_bar)
    rep["error_model_reference_i_bar"] = ref.i_bar
    if norm0 > 0 and measured["total"] > 0:
        m_ref = measure_truncation(flat, ref, t, z, xp)["total"]
        if cfg.C1 is None:
            consts = calibrate_c1(m_ref, ref, consts, norm0, cfg.dimension)
        rep["error_model_C1"] = consts.C1
        rep["error_model_C1_source"] = "calibrated" if cfg.C1 is None else "configured"
        pred = error_bound(orders, consts, norm0, cfg.dimension)
        rep["error_model_prediction"] = pred
        rep["error_model_measured"] = measured["total"]
        rep["error_model_ratio"] = measured["total"] / pred
    else:
        rep["error_model_prediction"] = 0.0
        rep["error_model_measured"] = measured["total"]
    rep["error_model_C2"] = consts.C2
    rep["error_model_C3"] = consts.C3
    rep["error_model_C4"] = consts.C4

    if result is not None:
        for k, v in result.report.items():
            if k != "snapshot_times":
                rep[f"sim_{k}"] = v
        rep["sim_snapshots"] = len(result.snapshots)
        if predicted:
            diff = compare_fields(predicted[-1], result.final, sim_grid(cfg))
            rep["final_difference_l2"] = diff["l2"]
            rep["final_difference_linf"] = diff["linf"]
    exact = norm0 == 0.0 and not np.any(flat.series.coeffs)
    rep["null_steering"] = "exact" if exact else "approximate"
    return rep


def _fields_from_snapshots(result: RunResult, grid: SimGrid) -> list[StateField]:
    return [StateField(s.t, grid.centers(), s.values) for s in result.snapshots]


def run_pipeline(config: RunConfig, stages=("synthesize", "predict", "simulate", "verify"), figures: bool = True) -> dict:
    """Run the requested stages and write their artifacts to ``config.output``.

    Returns a mapping from artifact name to path.
    """
    out = Path(config.output)
    out.mkdir(parents=True, exist_ok=True)
    problem = build_problem(config)
    paths = {}
    schedule = predicted = result = None
    if "synthesize" in stages:
        schedule = synthesize(problem)
        paths["control"] = io.write_schedule(out / "control.csv", schedule, config)
    if "predict" in stages or "verify" in stages:
        predicted = predict(problem)
        paths["predicted"] = io.write_fields(out / "predicted.csv", predicted, config, "predicted-state")
    if "simulate" in stages or "verify" in stages:
        grid = sim_grid(config)
        result = simulate(problem, grid)
        paths["simulated"] = io.write_fields(
            out / "simulated.csv", _fields_from_snapshots(result, grid), config, "simulated-state"
        )
        paths["simulation_report"] = io.write_report(out / "simulation.txt", result.report, config)
    if "verify" in stages:
        rep = verify(problem, result, predicted)
        paths["report"] = io.write_report(out / "report.txt", rep, config)
    (out / "config.txt").write_text(config.to_text())
    paths["config"] = out / "config.txt"
    if figures:
        from . import plotting

        paths.update(plotting.render_run(out, config, schedule, predicted, result))
    return paths


@dataclass
class StudyTable:
    """Measured truncation sizes along each swept axis with fitted log-slopes."""

    rows: list = field(default_factory=list)  # (axis, order, feature, measured, model)
    slopes: dict = field(default_factory=dict)
    rates: dict = field(default_factory=dict)  # model decay rate per axis

    def column(self, axis: str, name: str) -> np.ndarray:
        idx = {"order": 1, "feature": 2, "measured": 3, "model": 4}[name]
        return np.array([r[idx] for r in self.rows if r[0] == axis])

    def write_csv(self, path, config: RunConfig) -> Path:
        axes = {"i": 0, "j": 1, "n": 2}
        rows = [[axes[a], o, f, m, p] for a, o, f, m, p in self.rows]
        extra = [(f"slope_{a}", io.format_float(v)) for a, v in self.slopes.items()]
        return io.write_artifact(
            path, "convergence-study", config, ["axis", "order", "feature", "measured", "model"], rows, extra
        )


def _feature(axis: str, k: int, dim: int) -> float:
    if axis == "i":
        return k * math.log(k)
    if axis == "n":
        return float(k * k)
    return float(k) ** (2.0 / (dim - 1))


def convergence_study(config: RunConfig, sweep: dict) -> StudyTable:
    """Measure the omitted-series size along each axis of ``sweep``.

    ``sweep`` maps ``"i"``, ``"j"`` or ``"n"`` to a list of orders.  The
    measurement at order ``k`` is the sup-norm difference to the next
    truncation in the sweep (the last point reuses the previous spacing).
    The model column is the matching term of the error model with ``C1``
    calibrated at the first point.
    """
    if not sweep:
        raise ConfigError("empty sweep")
    for axis, values in sweep.items():
        if axis not in ("i", "j", "n"):
            raise ConfigError(f"unknown sweep axis '{axis}'")
        if len(set(values)) < 3:
            raise ConfigError(f"sweep over {axis} needs at least 3 distinct values, got {list(values)}")
        if axis == "j" and config.dimension == 1:
            raise ConfigError("a j sweep needs dimension >= 2")
    steps = {a: sorted(set(v)) for a, v in sweep.items()}
    reach = {a: v[-1] + (v[-1] - v[-2]) for a, v in steps.items()}
    extra = max(TAIL, reach.get("n", 0) - config.n_bar, reach.get("j", 0) - config.j_bar)
    if reach.get("i", 0) > 63:
        raise ConfigError("i sweep exceeds the derivative engine's maximum order")
    series = initial_series(config, extra=extra)
    flat = FlatOutputs(series, config.tau, config.T, GevreyStep(config.s))
    t, z, xp = _verify_grids(config)
    problem = build_problem(config)
    consts = problem.constants()
    rate = {"i": consts.C3, "n": consts.C4, "j": consts.C2}
    table = StudyTable()
    norm0 = problem.norm0
    for axis, ks in steps.items():
        meas = []
        for a, k in enumerate(ks):
            nxt = ks[a + 1] if a + 1 < len(ks) else k + (k - ks[a - 1])
            o = {"i": config.i_bar, "j": config.j_bar, "n": config.n_bar}
            o[axis] = k
            orders = TruncationOrders(o["i"], o["j"] if config.dimension > 1 else 0, o["n"])
            m = measure_truncation(flat, orders, t, z, xp, delta={axis: nxt - k})[axis]
            meas.append(m)
        feats = np.array([_feature(axis, k, config.dimension) for k in ks])
        meas = np.array(meas)
        ok = meas > 0
        if ok.sum() >= 2:
            slope = float(np.polyfit(feats[ok], np.log(meas[ok]), 1)[0])
        else:
            slope = float("nan")
        c1 = meas[0] * math.exp(rate[axis] * feats[0]) / norm0 if norm0 > 0 else 0.0
        model = c1 * np.exp(-rate[axis] * feats) * norm0
        for k, f, m, p in zip(ks, feats, meas, model):
            table.rows.append((axis, k, float(f), float(m), float(p)))
        table.slopes[axis] = slope
        table.rates[axis] = rate[axis]
        log.info("sweep %s: slope %.4g (model rate %.4g)", axis, slope, rate[axis])
    return table
