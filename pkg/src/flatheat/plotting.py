"""Figures for a run: control curve/surface, temperature surface, convergence plot."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

__all__ = [
    "plot_control_curve",
    "plot_control_surface",
    "plot_state_surface",
    "plot_state_slice",
    "plot_study",
    "render_run",
]

_RC = {
    "figure.figsize": (6.0, 4.0),
    "font.size": 9,
    "axes.linewidth": 0.6,
    "lines.linewidth": 1.2,
    "svg.hashsalt": "flatheat",
}


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    # no software/version tag so identical data give identical files
    fig.savefig(path, dpi=110, metadata={"Software": None})
    plt.close(fig)
    return path


def plot_control_curve(schedule, path) -> Path:
    """``u(t)`` on the rod."""
    with plt.rc_context(_RC):
        fig, ax = plt.subplots()
        ax.plot(schedule.times, schedule.values[:, 0], color="k")
        ax.axvline(schedule.tau, color="0.6", lw=0.6, ls="--")
        ax.set_xlabel("t")
        ax.set_ylabel("u(t)")
        ax.set_xlim(schedule.times[0], schedule.times[-1])
        ax.grid(alpha=0.3, lw=0.4)
        fig.tight_layout()
        return _save(fig, path)


def _surface(X, Y, Z, xlabel, ylabel, zlabel, path) -> Path:
    with plt.rc_context(_RC):
        fig = plt.figure(figsize=(6.5, 4.8))
        ax = fig.add_subplot(projection="3d")
        ax.plot_surface(X, Y, Z, cmap="viridis", linewidth=0, antialiased=False, rstride=1, cstride=1)
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        ax.set_zlabel(zlabel)
        ax.view_init(elev=28, azim=-125)
        fig.tight_layout()
        return _save(fig, path)


def plot_control_surface(schedule, path) -> Path:
    """``u(t, x1)`` on the face ``x2 = 1``."""
    T, X = np.meshgrid(schedule.times, schedule.space_grid, indexing="ij")
    return _surface(T, X, schedule.values, "t", "x1", "u", path)


def plot_state_surface(fields, path, zlabel="theta") -> Path:
    """``theta(t, x)`` from 1-D snapshots sharing one grid."""
    x = fields[0].grid[-1]
    t = np.array([f.t for f in fields])
    V = np.array([f.values for f in fields])
    Tm, Xm = np.meshgrid(t, x, indexing="ij")
    return _surface(Tm, Xm, V, "t", "x", zlabel, path)


def plot_state_slice(field, path, zlabel="theta") -> Path:
    """2-D field at one time as a surface over ``(x1, x2)``."""
    X1, X2 = np.meshgrid(*field.grid, indexing="ij")
    return _surface(X1, X2, field.values, "x1", "x2", zlabel, path)


def plot_study(table, path) -> Path:
    """Measured truncation size and calibrated model against the decay feature."""
    axes = sorted({r[0] for r in table.rows})
    labels = {"i": "i ln i", "n": "n^2", "j": "j^(2/(N-1))"}
    with plt.rc_context(_RC):
        fig, axs = plt.subplots(1, len(axes), figsize=(4.0 * len(axes), 3.4), squeeze=False)
        for ax, a in zip(axs[0], axes):
            f = table.column(a, "feature")
            ax.semilogy(f, table.column(a, "measured"), "ko-", ms=3, label="measured")
            ax.semilogy(f, table.column(a, "model"), "--", color="0.5", label="model")
            ax.set_xlabel(labels[a])
            ax.set_title(f"slope {table.slopes[a]:.3g}", fontsize=8)
            ax.grid(alpha=0.3, lw=0.4)
        axs[0][0].set_ylabel("sup |difference|")
        axs[0][0].legend(frameon=False, fontsize=7)
        fig.tight_layout()
        return _save(fig, path)


def render_run(out, config, schedule, predicted, result) -> dict:
    """Write whichever figures the available data allow; returns name -> path."""
    out = Path(out) / "figures"
    paths = {}
    if schedule is not None:
        if schedule.space_grid.size == 0:
            paths["fig_control"] = plot_control_curve(schedule, out / "control.png")
        else:
            paths["fig_control"] = plot_control_surface(schedule, out / "control_surface.png")
    if predicted:
        if len(predicted[0].grid) == 1:
            paths["fig_predicted"] = plot_state_surface(predicted, out / "predicted_state.png")
        else:
            mid = predicted[len(predicted) // 2]
            paths["fig_predicted"] = plot_state_slice(mid, out / "predicted_state_mid.png")
    if result is not None:
        from .control import StateField

        snaps = result.snapshots
        grid = tuple((np.arange(m) + 0.5) / m for m in np.shape(snaps[0].values))
        fields = [StateField(s.t, grid, s.values) for s in snaps]
        if len(grid) == 1:
            paths["fig_simulated"] = plot_state_surface(fields, out / "simulated_state.png")
        else:
            paths["fig_simulated"] = plot_state_slice(fields[0], out / "simulated_initial.png")
            paths["fig_simulated_final"] = plot_state_slice(fields[-1], out / "simulated_final.png")
    return paths
