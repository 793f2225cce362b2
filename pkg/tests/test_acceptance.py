"""Acceptance checks; each test prints one PASS/FAIL line (also summarised at the end).

Closed-loop thresholds are frozen from a grid-refinement oracle at the default
time step ``dt = 0.0025`` (a quarter of the 100-cell width), held fixed while
the grid is refined:

    1-D final relative norm: 100 / 200 / 400 cells -> 7.82e-6 / 5.96e-6 / 5.98e-6
    2-D final relative norm: 100^2 / 200^2 cells   -> 8.81e-7 / 4.19e-7
"""

import math
import time

import numpy as np

from flatheat import cli, io
from flatheat.config import preset
from flatheat.control import (
    ControlSchedule,
    TruncationOrders,
    control_value,
    state_prediction,
    truncate_family,
    truncation_residual,
)
from flatheat.gevrey import GevreyStep
from flatheat.pipeline import build_problem, convergence_study, interface_defect, simulate
from flatheat.simulator import SimGrid, run
from flatheat.spectral import step_coefficients

from oracles import modal_final_state

ORACLE_1D_400 = 5.98e-6
ORACLE_2D_200 = 4.19e-7
EPS1 = 3 * ORACLE_1D_400
EPS2 = 3 * ORACLE_2D_200


def test_c01_gevrey_step_exactness(verdict):
    t0 = time.perf_counter()
    g = GevreyStep(1.65)
    ends = [float(v) for v in g.value(np.array([0.0, 1.0]))]
    pts = np.array([g.guard_eps, 1.0 - g.guard_eps])
    d = g.step_derivatives(pts, 35)[1:]
    worst = float(np.abs(d).max())
    dt = time.perf_counter() - t0
    ok = ends[0] == 1.0 and ends[1] == 0.0 and worst < 1e-12 and dt < 1.0
    verdict(1, ok, f"phi(0)={ends[0]!r} phi(1)={ends[1]!r} max|phi^(p)| at guards={worst:.1e} ({dt:.2f}s)")
    assert ok


def test_c02_jet_matches_finite_differences(verdict):
    """Order p from a 5-point first difference of the jet's order p-1, step 1e-3.

    The error is normalised by the largest ``|f^(p)|`` over the 20 points,
    since pointwise ratios are undefined at zero crossings of ``f^(p)``.
    """
    t0 = time.perf_counter()
    g = GevreyStep(1.65)
    h = 1e-3
    ts = np.linspace(0.1, 0.9, 20)
    worst = 0.0
    for fn in (g.bump_derivatives, g.step_derivatives):
        for p in range(1, 7):
            exact = fn(ts, p)[p]

            def prev(t):
                return fn(t, p - 1)[p - 1]

            fd = (prev(ts - 2 * h) - 8 * prev(ts - h) + 8 * prev(ts + h) - prev(ts + 2 * h)) / (12 * h)
            worst = max(worst, float(np.abs(fd - exact).max() / np.abs(exact).max()))
    dt = time.perf_counter() - t0
    ok = worst <= 1e-5 and dt < 5.0
    verdict(2, ok, f"max relative FD mismatch orders 1-6 = {worst:.2e} ({dt:.2f}s)")
    assert ok


def test_c03_flat_output_interface(verdict):
    t0 = time.perf_counter()
    pb = build_problem(preset("paper-1d"))
    defect = interface_defect(pb.flat, pb.orders)
    at_T = truncate_family(pb.flat, pb.orders).y_table(np.array(pb.flat.T), 35)
    zero_T = bool(np.all(at_T == 0.0))
    dt = time.perf_counter() - t0
    ok = defect <= 1e-9 and zero_T and dt < 5.0
    verdict(3, ok, f"max normalised |y^(i)(tau)-y_i| = {defect:.1e}, y^(i)(T)==0: {zero_T} ({dt:.2f}s)")
    assert ok


def test_c04_terminal_null_prediction(verdict):
    z = np.linspace(0.0, 1.0, 201)
    pb1 = build_problem(preset("paper-1d"))
    th1 = state_prediction(pb1.flat, pb1.orders, np.array([pb1.config.T]), z)
    pb2 = build_problem(preset("paper-2d"))
    xp = np.linspace(0.0, 1.0, 101)
    th2 = state_prediction(pb2.flat, pb2.orders, np.array([pb2.config.T]), z, xp)
    ok = bool(np.all(th1 == 0.0) and np.all(th2 == 0.0))
    verdict(4, ok, f"theta_bar(T) max |.|: 1-D {float(np.abs(th1).max())!r}, 2-D {float(np.abs(th2).max())!r}")
    assert ok


def _fd_residual(flat, orders, t, z, dt, dx):
    tt = np.concatenate([t + k * dt for k in (-2, -1, 1, 2)])
    S = state_prediction(flat, orders, tt, z).reshape(4, t.size, z.size)
    d_t = (S[0] - 8 * S[1] + 8 * S[2] - S[3]) / (12 * dt)
    zz = np.concatenate([z + k * dx for k in (-2, -1, 0, 1, 2)])
    Q = state_prediction(flat, orders, t, zz).reshape(t.size, 5, z.size)
    lap = (-Q[:, 0] + 16 * Q[:, 1] - 30 * Q[:, 2] + 16 * Q[:, 3] - Q[:, 4]) / (12 * dx * dx)
    return d_t - lap


def test_c05_residual_witness(verdict):
    t0 = time.perf_counter()
    pb = build_problem(preset("paper-1d"))
    tau, T = pb.config.tau, pb.config.T
    t = np.linspace(tau, T, 52)[1:-1]  # keep the 5-point stencil inside [tau, T]
    z = np.linspace(0.0, 1.0, 50)
    sups, mism = [], []
    for ib in (20, 30):
        o = TruncationOrders(ib, 0, 25)
        R = truncation_residual(pb.flat, o, t, z)
        F = _fd_residual(pb.flat, o, t, z, 1e-4, 1e-3)
        sups.append(float(np.abs(R).max()))
        mism.append(float(np.abs(R - F).max() / np.abs(R).max()))
    dt = time.perf_counter() - t0
    ok = max(mism) <= 1e-3 and sups[1] < sups[0] and dt < 30.0
    verdict(
        5,
        ok,
        f"sup residual i=20: {sups[0]:.4g}, i=30: {sups[1]:.4g}; FD mismatch {mism[0]:.1e}, {mism[1]:.1e} ({dt:.1f}s)",
    )
    assert ok


def test_c06_closed_loop_1d(verdict):
    t0 = time.perf_counter()
    cfg = preset("paper-1d")
    pb = build_problem(cfg)
    res = simulate(pb)
    rel = res.report["relative_l2"]
    dt = time.perf_counter() - t0
    # oracle runs: refine space at the frozen dt; co-refined values for information
    dt0 = cfg.time_step
    fixed = {m: simulate(pb, SimGrid((m,), dt0)).report["relative_l2"] for m in (200, 400)}
    rich = fixed[400] + (fixed[400] - fixed[200]) / 3.0
    co = {m: simulate(pb, SimGrid((m,), 0.25 / m)).report["relative_l2"] for m in (200, 400)}
    c = step_coefficients((-0.75, 1.25), 0.5, 400).coeffs
    b = modal_final_state(pb.flat, pb.orders, c, cfg.T)
    cont = float(np.sqrt(np.sum(b**2)) / pb.norm0)
    ok = rel <= EPS1 and dt < 60.0
    verdict(
        6,
        ok,
        f"relative L2 {rel:.3e} <= eps1 {EPS1:.3e} ({dt:.1f}s); oracle 200/400 cells {fixed[200]:.3e}/{fixed[400]:.3e}, "
        f"Richardson {rich:.3e}; dt~h: {co[200]:.3e}/{co[400]:.3e}; modal continuum {cont:.1e}",
    )
    assert abs(fixed[400] - ORACLE_1D_400) < 0.05 * ORACLE_1D_400
    assert ok


def test_c07_closed_loop_2d(verdict):
    t0 = time.perf_counter()
    cfg = preset("paper-2d")
    pb = build_problem(cfg)
    res = simulate(pb)
    rel = res.report["relative_l2"]
    dt = time.perf_counter() - t0
    oracle = simulate(pb, SimGrid((200, 200), cfg.time_step)).report["relative_l2"]
    ok = rel <= EPS2 and dt < 600.0
    verdict(7, ok, f"relative L2 {rel:.3e} <= eps2 {EPS2:.3e} ({dt:.1f}s); oracle 200x200 {oracle:.3e}")
    assert abs(oracle - ORACLE_2D_200) < 0.05 * ORACLE_2D_200
    assert ok


def test_c08_truncation_decay_shapes(verdict):
    t0 = time.perf_counter()
    cfg1 = preset("paper-1d")
    tb = convergence_study(cfg1, {"i": [10, 15, 20, 25, 30], "n": [5, 10, 15, 20, 25]})
    C4 = tb.rates["n"]
    si, sn = tb.slopes["i"], tb.slopes["n"]
    tb2 = convergence_study(preset("paper-2d"), {"j": [5, 10, 15, 20, 25]})
    sj = tb2.slopes["j"]
    dt = time.perf_counter() - t0
    mono = bool(np.all(np.diff(tb.column("i", "measured")) < 0))
    ok = si < 0 and sj < 0 and sn < 0 and C4 / 3 <= -sn <= 3 * C4 and mono and dt < 300
    verdict(
        8,
        ok,
        f"slopes: i*ln(i) {si:.3f}, n^2 {sn:.3f} (|.| in [{C4 / 3:.3f}, {3 * C4:.3f}]), j^2 {sj:.3f}; "
        f"i-column decreasing: {mono} ({dt:.1f}s)",
    )
    assert ok


def test_c09_simulator_verification(verdict):
    t0 = time.perf_counter()
    T = 0.05
    errs = []
    for m in (40, 80):
        grid = SimGrid((m,), 0.125 / m)
        x = grid.centers()[0]
        th0 = math.sqrt(2) * np.cos(math.pi * x)
        sched = ControlSchedule.zero(np.linspace(0.0, T, 2 * int(round(T / grid.dt)) + 1))
        r = run(th0, sched, grid, T)
        exact = math.exp(-math.pi**2 * T) * th0
        errs.append(float(np.abs(r.final.values - exact).max()))
    ratio = errs[0] / errs[1]
    grid = SimGrid((50,), 0.005)
    x = grid.centers()[0]
    th0 = np.where(x < 0.3, 2.0, -1.0) + x**2
    sched = ControlSchedule.zero(np.linspace(0.0, 1.0, 401))
    r = run(th0, sched, grid, 1.0)
    mass = [s.values.sum() * grid.cell_volume for s in r.snapshots]
    drift = float(np.abs(np.array(mass) - mass[0]).max())
    c = run(np.full(50, 0.37), sched, grid, 1.0)
    const_ok = bool(np.all(c.final.values == 0.37))
    dt = time.perf_counter() - t0
    ok = 3.0 <= ratio <= 5.0 and drift <= 1e-10 and const_ok and dt < 30
    verdict(9, ok, f"h-halving error ratio {ratio:.3f}; mass drift {drift:.1e}; constant exact: {const_ok} ({dt:.2f}s)")
    assert ok


def test_c10_control_continuity_at_tau(verdict):
    t0 = time.perf_counter()
    pb = build_problem(preset("paper-1d"))
    tau = np.array([pb.config.tau])
    hi = float(abs(control_value(pb.flat, TruncationOrders(35, 0, 25), tau)[0]))
    lo = float(abs(control_value(pb.flat, TruncationOrders(15, 0, 10), tau)[0]))
    linf0 = 1.25
    dt = time.perf_counter() - t0
    ok = hi <= 1e-4 * linf0 and hi < lo and dt < 5.0
    verdict(10, ok, f"|u(tau+)| at (35,25) = {hi:.1e}, at (15,10) = {lo:.1e} ({dt:.2f}s)")
    assert ok


def test_c11_determinism_and_roundtrip(tmp_path, verdict):
    dirs = [tmp_path / "a", tmp_path / "b"]
    for d in dirs:
        assert cli.main(["reproduce", "paper-1d", "-o", str(d)]) == 0
    files = sorted(p.relative_to(dirs[0]) for p in dirs[0].rglob("*") if p.is_file())
    same = all((dirs[0] / f).read_bytes() == (dirs[1] / f).read_bytes() for f in files)
    want = preset("paper-1d")
    parsed = []
    for f in files:
        if f.suffix == ".csv":
            meta, _, _ = io.read_artifact(dirs[0] / f)
            parsed.append(io.header_config(meta) == want)
    ok = same and len(files) >= 5 and parsed and all(parsed)
    verdict(11, ok, f"{len(files)} artifacts byte-identical: {same}; {sum(parsed)}/{len(parsed)} headers re-parse")
    assert ok
