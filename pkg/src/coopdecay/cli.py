"""Command-line entry point: ``coopdecay run|sweep|spectrum|phase|validate``.

Exit codes: 0 success, 2 configuration or usage error, 3 solver failure,
4 every sweep point failed, 5 an oracle check failed.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import __version__
from . import io
from .analysis import (burst_metrics, default_omega_grid, linewidth_trace, phase_traces,
                       spectrum_at, subradiance_metrics)
from .config import RunConfig
from .dynamics import run, run_driven
from .errors import CoopDecayError, ConfigError, NoPlateau
from .model import Q0Mode

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_SWEEP, EXIT_VALIDATE = 0, 2, 3, 4, 5

SUMMARY_COLUMNS = ("eta", "C", "rho_size", "status", "t_burst",
                   "peak_adot_over_eta", "plateau_inv_xi_eta", "max_linewidth", "error")


class UsageError(Exception):
    pass


def _err(msg):
    print(f"coopdecay: {msg}", file=sys.stderr)


def _load(args):
    if args.config is None:
        raise UsageError("--config is required")
    cfg = RunConfig.load(args.config)
    if args.q0_mode is not None:
        cfg = cfg.with_(system=cfg.system.with_(q0_mode=Q0Mode(args.q0_mode)))
    return cfg


def _outdir(args, cfg):
    path = args.out if args.out is not None else cfg.output.directory
    os.makedirs(path, exist_ok=True)
    return path


def _figures(args, cfg):
    wanted = bool(args.plot or cfg.output.figures)
    if wanted:
        # Fail before any output exists when the plot extra is missing.
        from .plotting import _pyplot
        try:
            _pyplot()
        except RuntimeError as exc:
            raise UsageError(str(exc)) from exc
    return wanted


def simulate(cfg):
    """Run the configured dynamics; the driven system only when there is a drive."""
    if cfg.system.Omega > 0:
        return run_driven(cfg.system, cfg.integrator)
    return run(cfg.system, cfg.integrator)


def _meta(cfg, series, wall, command):
    return {"version": __version__, "command": command, "config": cfg.to_dict(),
            "solver_stats": dict(series.stats), "wall_time_s": wall}


def _run_and_write(cfg, out, command, figures=False):
    t0 = time.perf_counter()
    series = simulate(cfg)
    wall = time.perf_counter() - t0
    io.write_timeseries(os.path.join(out, "timeseries.csv"), series)
    io.write_json(os.path.join(out, "run_meta.json"), _meta(cfg, series, wall, command))
    if figures:
        from .plotting import plot_timeseries
        plot_timeseries(series, os.path.join(out, "timeseries.png"))
    return series


def cmd_run(args):
    cfg = _load(args)
    figures = _figures(args, cfg)
    out = _outdir(args, cfg)
    series = _run_and_write(cfg, out, "run", figures)
    print(f"wrote {len(series)} records to {out}")
    return EXIT_OK


def _point_summary(series, cfg):
    b = burst_metrics(series)
    try:
        plateau = subradiance_metrics(series, slope_tol=cfg.analysis.plateau_slope_tol,
                                      min_decades=cfg.analysis.plateau_min_decades
                                      ).plateau_value
    except NoPlateau:
        plateau = math.nan
    if cfg.system.C > 0:
        _, widths = linewidth_trace(series)
        max_width = float(np.max(widths))
    else:
        max_width = 0.0
    return b.t_peak, b.peak_rate_over_eta, plateau, max_width


def _sweep_point(job):
    index, cfg, out, figures = job
    row = {"eta": cfg.system.eta, "C": cfg.system.C,
           "rho_size": cfg.system.rho_size}
    point_dir = os.path.join(out, f"point_{index:03d}")
    os.makedirs(point_dir, exist_ok=True)
    try:
        series = _run_and_write(cfg, point_dir, "run", figures)
        t_burst, peak, plateau, width = _point_summary(series, cfg)
        row.update(status="ok", t_burst=t_burst, peak_adot_over_eta=peak,
                   plateau_inv_xi_eta=plateau, max_linewidth=width, error="")
    except CoopDecayError as exc:
        row.update(status="failed", t_burst=math.nan, peak_adot_over_eta=math.nan,
                   plateau_inv_xi_eta=math.nan, max_linewidth=math.nan,
                   error=f"{type(exc).__name__}: {exc}".replace(",", ";").replace("\n", " "))
    return row


def cmd_sweep(args):
    cfg = _load(args)
    points = cfg.sweep_params()
    if not points:
        raise ConfigError("[sweep] needs at least one eta or point")
    figures = _figures(args, cfg)
    out = _outdir(args, cfg)
    base = cfg.with_(sweep=type(cfg.sweep)())
    jobs = [(i, base.with_(system=p), out, figures) for i, p in enumerate(points)]
    if args.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            rows = list(pool.map(_sweep_point, jobs))
    else:
        rows = [_sweep_point(j) for j in jobs]
    io.write_csv(os.path.join(out, "summary.csv"), SUMMARY_COLUMNS,
                 ([r[c] for c in SUMMARY_COLUMNS] for r in rows))
    if figures:
        from .plotting import plot_sweep
        plot_sweep(rows, os.path.join(out, "summary.png"))
    n_ok = sum(r["status"] == "ok" for r in rows)
    print(f"{n_ok}/{len(rows)} sweep points succeeded")
    return EXIT_OK if n_ok else EXIT_SWEEP


def _parse_floats(text, name):
    try:
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError as exc:
        raise UsageError(f"{name} must be a comma-separated list of numbers") from exc


def _snap(series, t_req, cfg):
    rec = series.at_time(t_req)
    if t_req > 0 and rec.t > 0:
        half_cell = 0.5 * math.log(10) / cfg.integrator.points_per_decade
        if abs(math.log(rec.t / t_req)) > half_cell:
            _err(f"warning: requested t={t_req:g} snapped to grid time {rec.t:.6g}")
    elif t_req != rec.t:
        _err(f"warning: requested t={t_req:g} snapped to grid time {rec.t:.6g}")
    return rec


def cmd_spectrum(args):
    cfg = _load(args)
    times = _parse_floats(args.times, "--times") if args.times else cfg.analysis.snapshot_times
    if not times:
        raise UsageError("no snapshot times given (--times or analysis.snapshot_times)")
    for t in times:
        if not 0 <= t <= cfg.integrator.t_end:
            raise UsageError(f"snapshot time {t:g} outside [0, t_end={cfg.integrator.t_end:g}]")
    figures = _figures(args, cfg)
    out = _outdir(args, cfg)
    series = simulate(cfg)
    spectra = []
    for t_req in times:
        rec = _snap(series, t_req, cfg)
        grid = default_omega_grid(rec.rates.Gamma + cfg.system.gamma / 2,
                                  cfg.analysis.omega_half_width, cfg.analysis.omega_points)
        spec = spectrum_at(rec, cfg.system, grid,
                           self_consistent=cfg.analysis.self_consistent_spectrum)
        spectra.append(spec)
        io.write_csv(os.path.join(out, f"spectrum_{t_req:.6g}.csv"), ("omega", "Gamma"),
                     zip(spec.omega_grid, spec.values))
        if not spec.tails_ok:
            _err(f"warning: spectrum at t={rec.t:.6g} has tails at "
                 f"{spec.tail_ratio:.2e} of its peak")
    trace = linewidth_trace(series)
    io.write_csv(os.path.join(out, "linewidth.csv"), ("t", "fwhm"), zip(*trace))
    if figures:
        from .plotting import plot_spectra
        plot_spectra(spectra, trace, os.path.join(out, "spectra.png"))
    print(f"wrote {len(spectra)} spectra to {out}")
    return EXIT_OK


def cmd_phase(args):
    cfg = _load(args)
    alphas = _parse_floats(args.alpha, "--alpha") if args.alpha is not None else cfg.analysis.alphas
    if not alphas:
        raise UsageError("empty alpha list")
    if any(not a > 0 for a in alphas):
        raise UsageError("alpha values must be positive")
    figures = _figures(args, cfg)
    out = _outdir(args, cfg)
    series = simulate(cfg)
    traces = phase_traces(series, alphas, grid_points=cfg.analysis.omega_points,
                          half_width=cfg.analysis.omega_half_width)
    rows = []
    for tr in traces:
        norm = tr.normalized
        rows.extend((t, tr.alpha, p, q) for t, p, q in zip(tr.t, tr.phi, norm))
    io.write_csv(os.path.join(out, "phase.csv"), ("t", "alpha", "phi", "phi_normalized"), rows)
    if figures:
        from .plotting import plot_phase
        plot_phase(traces, os.path.join(out, "phase.png"))
    print(f"wrote phase traces for {len(traces)} alpha values to {out}")
    return EXIT_OK


def cmd_validate(args):
    from .validation import run_validation

    results = run_validation()
    width = max(len(r.name) for r in results)
    for r in results:
        tag = "PASS" if r.passed else "FAIL"
        line = f"{tag}  {r.name:<{width}}  error={r.error:.3e}  tol={r.tolerance:.0e}"
        print(line + (f"  {r.detail}" if r.detail and not r.passed else ""))
    if args.out is not None:
        os.makedirs(args.out, exist_ok=True)
        io.write_csv(os.path.join(args.out, "validation.csv"),
                     ("check", "passed", "error", "tolerance"),
                     ((r.name, str(r.passed).lower(), r.error, r.tolerance) for r in results))
    failed = sum(not r.passed for r in results)
    print(f"{len(results) - failed}/{len(results)} checks passed")
    return EXIT_OK if failed == 0 else EXIT_VALIDATE


COMMANDS = {"run": cmd_run, "sweep": cmd_sweep, "spectrum": cmd_spectrum,
            "phase": cmd_phase, "validate": cmd_validate}


def build_parser():
    p = argparse.ArgumentParser(prog="coopdecay",
                                description="Cooperative emission of a gas of two-level atoms.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", help="TOML configuration file")
    p.add_argument("--out", help="output directory (overrides output.directory)")
    p.add_argument("--jobs", type=int, default=1, help="parallel sweep points")
    p.add_argument("--q0-mode", choices=[m.value for m in Q0Mode],
                   help="override system.q0_mode")
    p.add_argument("--plot", action="store_true", help="also render PNG figures")
    p.add_argument("--times", help="spectrum: comma-separated snapshot times")
    p.add_argument("--alpha", help="phase: comma-separated lag constants")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.jobs < 1:
        _err("--jobs must be >= 1")
        return EXIT_CONFIG
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, UsageError) as exc:
        _err(str(exc))
        return EXIT_CONFIG
    except CoopDecayError as exc:
        _err(f"solver failure: {type(exc).__name__}: {exc}")
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
