"""Figures for the command-line report.

matplotlib is an optional dependency (the ``plot`` extra) and is imported only
here, with the non-interactive Agg backend.  The CSV files remain the primary
output; every figure is drawn from columns that are also written to disk.
"""

from __future__ import annotations

import os

import numpy as np


def _pyplot():
    try:
        import matplotlib
    except ImportError as exc:
        raise RuntimeError(
            "figures need matplotlib; install the 'plot' extra") from exc
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    return plt


def _save(fig, path):
    tmp = os.path.join(os.path.dirname(os.path.abspath(path)),
                       ".tmp-" + os.path.basename(path))
    # Fixed metadata keeps repeated renders byte-identical.
    fig.savefig(tmp, format="png", dpi=120, metadata={"Software": None})
    os.replace(tmp, path)


def plot_timeseries(series, path):
    """Population, coherence, normalised intensity and decay rate against log time."""
    plt = _pyplot()
    t = series.t[1:]
    eta = series.params.eta or 1.0
    fig, axes = plt.subplots(2, 2, figsize=(9, 6.5), sharex=True)
    panels = [
        (series.a[1:], "a"),
        (series.column("x")[1:], "x"),
        (-series.column("adot")[1:] / eta, r"$-\dot a/\eta$"),
        (series.column("Gamma")[1:], r"$\Gamma/\gamma$"),
    ]
    for ax, (y, label) in zip(axes.flat, panels):
        ax.plot(t, y, lw=1.2)
        ax.set_xscale("log")
        ax.set_ylabel(label)
    if np.all(series.column("Gamma")[1:] > 0):
        axes[1, 1].set_yscale("log")
    for ax in axes[1]:
        ax.set_xlabel(r"$\gamma t$")
    fig.suptitle(f"eta = {series.params.eta:g}")
    fig.tight_layout()
    _save(fig, path)
    plt.close(fig)


def plot_spectra(spectra, linewidth, path):
    """Snapshot spectra, each normalised to its peak, and the FWHM trace."""
    plt = _pyplot()
    fig, (ax0, ax1) = plt.subplots(1, 2, figsize=(10, 4))
    for spec in spectra:
        peak = spec.peak if spec.peak > 0 else 1.0
        ax0.plot(spec.omega_grid, spec.values / peak, lw=1, label=f"t = {spec.t:.3g}")
    if spectra:
        span = max(5 * (s.meta.get("Gamma_f", 1.0)) for s in spectra)
        ax0.set_xlim(-span, span)
        ax0.legend(fontsize=8)
    ax0.set_xlabel(r"$\omega/\gamma$")
    ax0.set_ylabel(r"$\Gamma(\omega)/\Gamma_{max}$")
    t, w = linewidth
    ax1.plot(t[1:], w[1:], lw=1.2)
    ax1.set_xscale("log")
    ax1.set_xlabel(r"$\gamma t$")
    ax1.set_ylabel(r"FWHM$/\gamma$")
    fig.tight_layout()
    _save(fig, path)
    plt.close(fig)


def plot_phase(traces, path):
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6, 4))
    for tr in traces:
        ax.plot(tr.t, tr.phi, lw=1.2, label=f"alpha = {tr.alpha:g}")
    ax.set_xscale("log")
    ax.set_xlabel(r"$\gamma t$")
    ax.set_ylabel(r"$\phi$ (rad)")
    ax.legend(fontsize=8)
    fig.tight_layout()
    _save(fig, path)
    plt.close(fig)


def plot_sweep(rows, path):
    """Burst time and peak intensity against optical depth."""
    plt = _pyplot()
    ok = [r for r in rows if r["status"] == "ok"]
    fig, (ax0, ax1) = plt.subplots(1, 2, figsize=(9, 3.8))
    eta = np.array([r["eta"] for r in ok])
    ax0.loglog(eta, [r["t_burst"] for r in ok], "o-")
    ax0.set_xlabel(r"$\eta$")
    ax0.set_ylabel(r"$t_{burst}$")
    ax1.semilogx(eta, [r["peak_adot_over_eta"] for r in ok], "o-")
    ax1.set_xlabel(r"$\eta$")
    ax1.set_ylabel(r"max $-\dot a/\eta$")
    fig.tight_layout()
    _save(fig, path)
    plt.close(fig)
