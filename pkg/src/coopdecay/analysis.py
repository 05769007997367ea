"""Diagnostics computed from trajectories and single snapshots.

The instantaneous spectrum is the frequency-resolved decay rate Gamma(omega, t)
with the linewidth inside the source functions anchored at Gamma(0, t).  From
it follow the linewidth and the phase of the radiated field's first-order
correlation.  The subradiance diagnostic works on the population alone.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .dynamics import IntegratorConfig, run
from .errors import NegativeSpectralDensity, NoHalfCrossing, NoPlateau
from .model import Q0Mode
from .rates import compute_A1, compute_B, solve_gamma
from .sources import eval_sources, medium_response

GRID_HALF_WIDTH = 200.0
GRID_POINTS = 16385
TAIL_FLAG = 1e-4
NEG_CLAMP = 1e-12


def default_omega_grid(Gamma_f, half_width=GRID_HALF_WIDTH, n_points=GRID_POINTS):
    """Uniform symmetric grid of ``n_points`` over +-``half_width * Gamma_f``."""
    if n_points % 2 == 0:
        n_points += 1  # keep omega = 0 on the grid
    return np.linspace(-half_width * Gamma_f, half_width * Gamma_f, n_points)


def spectrum_values(state, Gamma, params, omega_grid, Delta=0.0):
    """Raw A1 + B on a frequency grid with the source linewidth fixed."""
    omega = np.asarray(omega_grid, dtype=float)
    if params.C == 0:
        return np.zeros_like(omega)
    dtl = params.delta_lamb + 2 * Delta + params.Delta0
    s = eval_sources(state, Gamma + params.gamma / 2, dtl, omega, params)
    med = medium_response(s.Pret, params)
    return compute_A1(s.P1, med.R, params) + compute_B(s.P2, med.R, med.rho_tilde, params)


@dataclass(frozen=True)
class Spectrum:
    t: float
    omega_grid: np.ndarray
    values: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def peak(self):
        return float(np.max(self.values))

    @property
    def tail_ratio(self):
        peak = self.peak
        if peak <= 0:
            return 0.0
        return float(max(self.values[0], self.values[-1]) / peak)

    @property
    def tails_ok(self):
        return self.tail_ratio < TAIL_FLAG


def _clamp_psd(values):
    peak = float(np.max(values)) if values.size else 0.0
    floor = -NEG_CLAMP * max(peak, 1e-300)
    low = float(np.min(values))
    if low < floor:
        raise NegativeSpectralDensity(f"Gamma(omega) reaches {low:.3e} (peak {peak:.3e})")
    return np.where(values < 0, 0.0, values)


def instantaneous_spectrum(state, rates, params, grid=None, t=math.nan,
                           self_consistent=False):
    """Gamma(omega, t) on a frequency grid.

    By default ``Gamma_f`` in the sources stays at its value for omega = 0.
    With ``self_consistent=True`` every frequency gets its own fixed point
    instead; this is much slower and exists for comparison.
    """
    Gf = rates.Gamma + params.gamma / 2
    omega = default_omega_grid(Gf) if grid is None else np.asarray(grid, dtype=float)
    if np.any(np.diff(omega) <= 0):
        raise ValueError("omega grid must be strictly increasing")
    if self_consistent and params.C > 0:
        values = np.empty_like(omega)
        warm = rates.Gamma
        order = np.argsort(np.abs(omega), kind="stable")
        for i in order:
            rep = solve_gamma(state, params, omega=float(omega[i]), warm_start=warm,
                              Delta=rates.Delta)
            values[i] = rep.Gamma
            warm = rep.Gamma
    else:
        values = spectrum_values(state, rates.Gamma, params, omega, Delta=rates.Delta)
    if not np.all(np.isfinite(values)):
        raise NegativeSpectralDensity("non-finite spectral density")
    values = _clamp_psd(values)
    spec = Spectrum(t=t, omega_grid=omega, values=values,
                    meta={"Gamma_f": Gf, "self_consistent": bool(self_consistent)})
    return spec


def spectrum_at(record, params, grid=None, **kw):
    """Spectrum for one time-series record."""
    return instantaneous_spectrum(record.state, record.rates, params, grid=grid,
                                  t=record.t, **kw)


def fwhm(spectrum):
    """Full width at half maximum by linear interpolation on each flank."""
    w, v = spectrum.omega_grid, spectrum.values
    i = int(np.argmax(v))
    half = v[i] / 2
    if not v[i] > 0:
        raise NoHalfCrossing("spectrum has no positive peak")
    left = np.nonzero(v[:i] < half)[0]
    right = np.nonzero(v[i:] < half)[0]
    if left.size == 0 or right.size == 0:
        raise NoHalfCrossing("spectrum does not fall to half maximum inside the grid")
    l0 = left[-1]
    r1 = i + right[0]
    wl = np.interp(half, [v[l0], v[l0 + 1]], [w[l0], w[l0 + 1]])
    wr = np.interp(half, [v[r1], v[r1 - 1]], [w[r1], w[r1 - 1]])
    return float(wr - wl)


def linewidth_trace(series, grid_points=4097):
    """FWHM of the spectrum at each record, on a grid scaled to that record."""
    params = series.params
    times, widths = [], []
    for rec in series:
        Gf = rec.rates.Gamma + params.gamma / 2
        grid = default_omega_grid(Gf, half_width=50.0, n_points=grid_points)
        times.append(rec.t)
        widths.append(fwhm(spectrum_at(rec, params, grid)) if params.C > 0 else 0.0)
    return np.array(times), np.array(widths)


# --------------------------------------------------------------------------
# Burst and subradiance.

@dataclass(frozen=True)
class BurstMetrics:
    t_peak: float
    peak_rate: float
    peak_rate_over_eta: float


def burst_metrics(series):
    """Time and height of the emission maximum (largest -a')."""
    t, adot = series.t, series.column("adot")
    i = int(np.argmax(-adot))
    eta = series.params.eta
    return BurstMetrics(float(t[i]), float(-adot[i]),
                        float(-adot[i] / eta) if eta > 0 else math.nan)


def xi_from_samples(t, a):
    """-d log a / dt by second-order finite differences (exact for quadratics)."""
    return -np.gradient(np.log(np.asarray(a, dtype=float)), np.asarray(t, dtype=float),
                        edge_order=2)


@dataclass(frozen=True)
class SubradianceMetrics:
    t: np.ndarray
    xi: np.ndarray
    plateau_value: float
    plateau_window: tuple
    lifetime: float


def _longest_run(mask):
    best, start, best_span = None, None, 0
    for i, ok in enumerate(np.append(mask, False)):
        if ok and start is None:
            start = i
        elif not ok and start is not None:
            if i - start > best_span:
                best, best_span = (start, i), i - start
            start = None
    return best


def subradiance_metrics(series=None, *, t=None, xi=None, eta=None, slope_tol=0.1,
                        min_decades=0.5, after=None):
    """Plateau of 1/(xi eta) in log time.

    Either pass a time series, whose ``xi`` column comes straight from the
    right-hand side, or explicit ``t``, ``xi`` and ``eta`` arrays.  The
    plateau is the longest window with ``|d log xi / d log t| < slope_tol``
    starting after ``after`` (by default the emission peak, so the flat
    stretch before the burst does not count).
    """
    if series is not None:
        t = series.t
        xi = series.column("xi")
        eta = series.params.eta
        if after is None:
            after = burst_metrics(series).t_peak
    t = np.asarray(t, dtype=float)
    xi = np.asarray(xi, dtype=float)
    after = 0.0 if after is None else after
    keep = (t > 0) & (t >= after) & (xi > 0) & np.isfinite(xi)
    tt, xx = t[keep], xi[keep]
    if tt.size < 3:
        raise NoPlateau("too few samples with positive decay rate")
    slope = np.gradient(np.log(xx), np.log(tt))
    span = _longest_run(np.abs(slope) < slope_tol)
    if span is None:
        raise NoPlateau("decay rate never flattens")
    i0, i1 = span
    if math.log10(tt[i1 - 1] / tt[i0]) < min_decades:
        raise NoPlateau(f"longest flat window spans {math.log10(tt[i1 - 1] / tt[i0]):.2f}"
                        f" decades, need {min_decades}")
    inv = 1.0 / (xx[i0:i1] * eta)
    value = float(np.mean(inv))
    return SubradianceMetrics(t=t, xi=xi, plateau_value=value,
                              plateau_window=(float(tt[i0]), float(tt[i1 - 1])),
                              lifetime=value * eta)


# --------------------------------------------------------------------------
# Phase of the radiated field.

def field_correlation(spectrum, delta_t):
    """Lag-``delta_t`` field correlation up to a constant, by trapezoid."""
    w = spectrum.omega_grid
    return complex(integrate.trapezoid(np.exp(-1j * w * delta_t) * spectrum.values, w))


def phase_angle(spectrum, delta_t):
    """-arg of the lag-``delta_t`` correlation, in (-pi, pi]."""
    corr = field_correlation(spectrum, delta_t)
    phi = -math.atan2(corr.imag, corr.real)
    return math.pi if phi == -math.pi else phi


@dataclass(frozen=True)
class PhaseTrace:
    alpha: float
    t: np.ndarray
    phi: np.ndarray

    @property
    def normalized(self):
        peak = np.nanmax(np.abs(self.phi)) if self.phi.size else 0.0
        return self.phi / peak if peak > 0 else self.phi


def phase_traces(series, alphas, grid_points=GRID_POINTS, half_width=GRID_HALF_WIDTH,
                 rel_floor=1e-6):
    """Phase angle at lag ``alpha * t`` for every record with t > 0.

    Where the correlation has decayed below ``rel_floor`` of its zero-lag
    value the phase is numerically meaningless and is reported as NaN.
    """
    params = series.params
    recs = [r for r in series if r.t > 0]
    t = np.array([r.t for r in recs])
    phis = {alpha: np.full(len(recs), np.nan) for alpha in alphas}
    for k, rec in enumerate(recs):
        Gf = rec.rates.Gamma + params.gamma / 2
        grid = default_omega_grid(Gf, half_width=half_width, n_points=grid_points)
        spec = spectrum_at(rec, params, grid)
        if not spec.peak > 0:
            continue
        norm = abs(field_correlation(spec, 0.0))
        for alpha in alphas:
            corr = field_correlation(spec, alpha * rec.t)
            if abs(corr) >= rel_floor * norm:
                phi = -math.atan2(corr.imag, corr.real)
                phis[alpha][k] = math.pi if phi == -math.pi else phi
    return [PhaseTrace(alpha=float(al), t=t, phi=phis[al]) for al in alphas]


# --------------------------------------------------------------------------
# Taylor versus exact wavenumber.

@dataclass(frozen=True)
class Q0Comparison:
    taylor: object
    exact: object
    max_abs_da: float
    window: tuple
    chi_trace: np.ndarray
    chi_at_a095: float


def chi_at_population(series, level=0.95):
    """|chi| where a first falls through ``level``, linearly interpolated."""
    a = series.a
    chi = np.abs(series.column("chi"))
    below = np.nonzero(a <= level)[0]
    if below.size == 0 or below[0] == 0:
        return math.nan
    i = below[0]
    w = (a[i - 1] - level) / (a[i - 1] - a[i])
    return float(chi[i - 1] + w * (chi[i] - chi[i - 1]))


def coherent_window(series, fraction=0.1):
    """(0, t_end) of the coherent stage: until x first falls below ``fraction``
    of its maximum after that maximum; the whole run if it never does."""
    t, x = series.t, series.column("x")
    i = int(np.argmax(x))
    below = np.nonzero(x[i:] < fraction * x[i])[0]
    return (0.0, float(t[i + below[0]]) if below.size else float(t[-1]))


def compare_q0_modes(params, config=None, window="coherent"):
    """Run both wavenumber modes and compare the populations.

    The sup-norm covers ``window``: ``"coherent"`` (burst and subradiance, see
    :func:`coherent_window`, taken from the Taylor run), ``None`` for the
    whole run, or an explicit ``(t0, t1)``.  ``chi_trace`` and ``chi_at_a095``
    come from the Taylor run, whose validity they monitor.
    """
    config = config or IntegratorConfig()
    taylor = run(params.with_(q0_mode=Q0Mode.TAYLOR), config)
    exact = run(params.with_(q0_mode=Q0Mode.EXACT), config)
    t = taylor.t
    if window == "coherent":
        window = coherent_window(taylor)
    t0, t1 = (0.0, math.inf) if window is None else window
    sel = (t >= t0) & (t <= t1)
    diff = float(np.max(np.abs(taylor.a[sel] - exact.a[sel])))
    return Q0Comparison(taylor=taylor, exact=exact, max_abs_da=diff,
                        window=(t0, t1), chi_trace=taylor.column("chi"),
                        chi_at_a095=chi_at_population(taylor))
