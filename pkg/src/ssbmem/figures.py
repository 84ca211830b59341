"""Figure rendering for the report path.

Every emitted report renders its figures to PNG files next to the CSV
data. All plotting is non-interactive (Agg backend).
"""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .benchmark import classical_bound

_US = 1e6


def _save(fig, outdir, name):
    path = os.path.join(outdir, name)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return path


def render_run_figures(result, outdir) -> list:
    """Mean-quadrature and variance traces of a sequence run."""
    paths = []
    st = result.subtracted_norm
    t = st.times * _US

    fig, axes = plt.subplots(2, 1, figsize=(7, 6), sharex=True)
    axes[0].plot(t, st.mean_x, lw=1.2, color="tab:blue")
    axes[0].set_ylabel("mean X (shot units)")
    axes[1].plot(t, st.mean_y, lw=1.2, color="tab:red")
    axes[1].set_ylabel("mean Y (shot units)")
    axes[1].set_xlabel("time (us)")
    axes[0].set_title("transient-subtracted mean quadratures")
    for ax in axes:
        ax.grid(alpha=0.3)
    paths.append(_save(fig, outdir, "mean_quadratures.png"))

    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(t, result.signal_norm.var_x, lw=1.0, label="raw var X")
    ax.plot(t, st.var_x, lw=1.0, label="subtracted var X")
    ax.plot(t, result.corrected_var_x, lw=1.0, label="corrected var X")
    ax.axhline(1.0, color="gray", ls="--", lw=0.8, label="shot level")
    ax.set_xlabel("time (us)")
    ax.set_ylabel("variance (shot units)")
    ax.legend(fontsize="small")
    ax.grid(alpha=0.3)
    paths.append(_save(fig, outdir, "variances.png"))

    if result.tv is not None:
        paths.append(render_tv_diagram([(result.tv.t_total, result.tv.v_geo,
                                         result.tv.verdict)], outdir))
    return paths


def render_tv_diagram(points, outdir, name="tv_diagram.png"):
    """(T, V) operating points against the classical-memory bound."""
    fig, ax = plt.subplots(figsize=(5.5, 4.5))
    ts = np.linspace(0, max([p[0] for p in points] + [0.12]) * 1.3, 100)
    ts = np.clip(ts, 0, 2)
    ax.plot(ts, [classical_bound(t) for t in ts], "k--", lw=1,
            label="classical bound 1 + T/2")
    for t_total, v_geo, verdict_label in points:
        color = {"quantum": "tab:green", "classical": "tab:red"}.get(
            verdict_label, "tab:orange")
        ax.plot(t_total, v_geo, "o", color=color, ms=7)
    ax.set_xlabel("T")
    ax.set_ylabel("V")
    ax.legend(fontsize="small")
    ax.grid(alpha=0.3)
    return _save(fig, outdir, name)


_SWEEP_AXES = {
    "storage_time": ("hold_time", "eta", 1e6, "storage time (us)",
                     "amplitude efficiency"),
    "sideband_frequency": ("frequency_hz", "eta", 1e-6,
                           "sideband frequency (MHz)",
                           "amplitude efficiency"),
    "input_phase": ("phi_in", "phi_r", 1.0, "input phase (rad)",
                    "retrieved phase (rad)"),
    "larmor": ("larmor_hz", "phi_r", 1e-3, "Larmor frequency (kHz)",
               "retrieved phase (rad)"),
    "control_power": ("power", "fwhm_hz", 1e3, "control power (mW)",
                      "EIT window FWHM (Hz)"),
}


def render_sweep_figures(result, outdir) -> list:
    """One figure per sweep kind, plus a T-V diagram when available."""
    rows = [r for r in result.rows if "error" not in r]
    paths = []
    if not rows:
        return paths

    if result.kind == "dual_vs_single":
        fig, ax = plt.subplots(figsize=(6, 4.5))
        p = np.array([r["power"] for r in rows]) * 1e3
        ax.plot(p, [r["eta_single"] for r in rows], "s-",
                label="single sideband (tracked)")
        ax.plot(p, [r["eta_dual"] for r in rows], "o-",
                label="dual sideband")
        ax.set_xlabel("control power (mW)")
        ax.set_ylabel("amplitude efficiency")
        ax.legend(fontsize="small")
        ax.grid(alpha=0.3)
        paths.append(_save(fig, outdir, "sweep_dual_vs_single.png"))
        return paths

    x_key, y_key, x_scale, x_label, y_label = _SWEEP_AXES[result.kind]
    x = np.array([r[x_key] for r in rows]) * x_scale
    y = np.array([r[y_key] for r in rows])
    if y_key == "phi_r":
        y = np.unwrap(y)
    fig, ax = plt.subplots(figsize=(6, 4.5))
    ax.plot(x, y, "o", ms=5)
    if result.fit and result.kind == "storage_time":
        xs = np.linspace(x.min(), x.max(), 200)
        ax.plot(xs, result.fit["eta0"] *
                np.exp(-xs / (result.fit["tau_m"] * _US)), "-", lw=1,
                label=f"exp fit, tau_m = {result.fit['tau_m']*_US:.1f} us")
        ax.legend(fontsize="small")
    ax.set_xlabel(x_label)
    ax.set_ylabel(y_label)
    ax.grid(alpha=0.3)
    paths.append(_save(fig, outdir, f"sweep_{result.kind}.png"))

    tv_points = [(r["t_total"], r["v_geo"], r.get("verdict", ""))
                 for r in rows if "t_total" in r]
    if tv_points:
        paths.append(render_tv_diagram(tv_points, outdir))
    return paths
