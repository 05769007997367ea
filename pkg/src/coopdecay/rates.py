"""Cooperative decay rates from the atomic state.

The single-atom rate is ``Gamma = A1 + B`` and the inter-atom rate is
``Gamma_bar = A2 + B``.  ``A1`` and ``B`` have closed forms over a spherical
sample with the probe atom at its centre; ``A2`` averages the second probe
atom over the sphere and is integrated numerically along the radius.  Because
the source functions depend on ``Gamma`` itself, the single-atom rate is the
root of an implicit equation that :func:`solve_gamma` solves.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate, optimize

from .errors import GridTooNarrow, NoRoot, OverflowGuard, QuadratureFailure
from .sources import eval_sources, medium_response

A1_EXP_LIMIT = 700.0
B_EXP_LIMIT = 1400.0
# 32 from the sphere volume integral of the dressed propagator; see compute_B.
B_PREFACTOR = 32.0
GAMMA_MAX = 1e9
GAMMA_MIN = 1e-6
_OVERFLOW_SENTINEL = -1e300


def _phi(x):
    """expm1(x)/x with the removable point at zero; scalar or array."""
    if isinstance(x, float) or np.ndim(x) == 0:
        if abs(x) < 1e-6:
            return 1 + x / 2 + x * x / 6
        return math.expm1(x) / x
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < 1e-6
    safe = np.where(small, 1.0, x)
    return np.where(small, 1 + x / 2 + x * x / 6, np.expm1(safe) / safe)


def compute_A1(P1, R, params):
    """One-atom contribution ``gamma^2 C rho P1 (e^R - 1)/R``."""
    if (R if isinstance(R, float) else np.max(R)) > A1_EXP_LIMIT:
        raise OverflowGuard(f"gain exponent R={np.max(R):.4g} too large")
    g = params.gamma
    return g * g * params.C * params.rho_size * P1 * _phi(R)


# Coefficients of (e^z (1 - z) - 1)/z^2 = sum_k (1 - k)/k! z^(k-2), k >= 2.
_B_SERIES = tuple((1 - k) / math.factorial(k) for k in range(2, 20))


def _b_kernel_sq(R, rho_tilde):
    """|e^z (1 - z) - 1|^2 / |z|^4 for z = (R - i rho_tilde)/2."""
    z = (R - 1j * rho_tilde) / 2
    if isinstance(z, complex) or np.ndim(z) == 0:
        if abs(z) < 0.1:
            s = 0j
            for c in reversed(_B_SERIES):
                s = s * z + c
            return abs(s) ** 2
        if R > 50:
            # e^R |(1 - z) - e^-z|^2 / |z|^4 evaluated through its logarithm
            log_val = R + 2 * math.log(abs((1 - z) - cmath.exp(-z))) - 4 * math.log(abs(z))
            if log_val >= 709:
                raise OverflowGuard(f"two-atom kernel overflows at R={R:.4g}")
            return math.exp(log_val)
        return abs(cmath.exp(z) * (1 - z) - 1) ** 2 / abs(z) ** 4
    z = np.asarray(z)
    small = np.abs(z) < 0.1
    series = np.zeros_like(z)
    for c in reversed(_B_SERIES):
        series = series * z + c
    zs = np.where(small, 1.0, z)
    with np.errstate(over="ignore", invalid="ignore"):
        direct = np.abs(np.exp(zs) * (1 - zs) - 1) ** 2 / np.abs(zs) ** 4
    return np.where(small, np.abs(series) ** 2, direct)


def compute_B(P2, R, rho_tilde, params):
    """Two-atom contribution from the coherent sum over the sample.

    ``B = 32 gamma^2 C^2 rho^4 P2 |e^z (1 - z) - 1|^2 / (rho_t^2 + R^2)^2`` with
    ``z = (R - i rho_t)/2``.  Since ``(rho_t^2 + R^2)^2 = 16 |z|^4`` the
    ratio is evaluated as a series in ``z`` near the removable point.
    """
    if (R if isinstance(R, float) else np.max(R)) > B_EXP_LIMIT:
        raise OverflowGuard(f"gain exponent R={np.max(R):.4g} too large")
    if isinstance(P2, float) and P2 == 0:
        return 0.0
    g, C, rho = params.gamma, params.C, params.rho_size
    return B_PREFACTOR / 16 * g * g * C * C * rho ** 4 * P2 * _b_kernel_sq(R, rho_tilde)


# --------------------------------------------------------------------------
# Inter-atom term A2.

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(16)


@lru_cache(maxsize=64)
def _radial_rule(rho, panel=1.0):
    """Composite Gauss-Legendre nodes and weights on [0, rho]."""
    n_panels = max(4, int(math.ceil(rho / panel)))
    edges = np.linspace(0.0, rho, n_panels + 1)
    half = np.diff(edges) / 2
    mid = (edges[:-1] + edges[1:]) / 2
    u = (mid[:, None] + half[:, None] * _GL_NODES[None, :]).ravel()
    w = (half[:, None] * _GL_WEIGHTS[None, :]).ravel()
    u.setflags(write=False)
    w.setflags(write=False)
    return u, w


def _a2_integrand(u, q, rho):
    """u times the radial kernel of the centre-probe/averaged-probe overlap."""
    qp, qpp = q.real, q.imag
    qs = q.conjugate()
    g = np.exp(1j * qs * u)
    h = np.exp(-1j * qs * u)
    first = g * (np.expm1(-2j * qp * u) / (-2j * qp) - u * _phi(2 * qpp * u))
    second = np.exp(2 * qpp * u) * (rho - u) * _phi(2 * qpp * (rho - u)) * (h - g)
    return u * (first + second)


def _coupling(P, params):
    """Constant shared by the one-atom integrals, per unit source."""
    g = params.gamma
    return g * g * params.C * P / (4 * math.pi)


def _sphere_volume(rho):
    return 4 * math.pi * rho ** 3 / 3


def compute_A2(P1, q0_over_k0, params, method="gauss", rel_tol=1e-8):
    """One-atom source contribution to the inter-atom rate.

    One probe atom sits at the centre of the sphere, the other is averaged
    uniformly over it.  The result carries the same coupling constant as
    :func:`a1_quadrature`, and only its real part (the symmetric average over
    the two probes) is kept.

    ``method`` is ``"gauss"`` (fixed composite Gauss-Legendre, the fast path)
    or ``"adaptive"`` (scipy's adaptive quadrature at ``rel_tol``).
    """
    if P1 == 0 or params.C == 0:
        return 0.0
    q = complex(q0_over_k0)
    if not (cmath.isfinite(q)):
        raise QuadratureFailure(f"non-finite wavenumber {q!r}")
    rho = params.rho_size
    if method == "gauss":
        u, w = _radial_rule(float(rho))
        with np.errstate(over="ignore", invalid="ignore"):
            integral = complex(np.dot(w, _a2_integrand(u, q, rho)))
    elif method == "adaptive":
        integral = _adaptive_complex(lambda s: _a2_integrand(s, q, rho), rho, rel_tol)
    else:
        raise ValueError(f"unknown quadrature method {method!r}")
    if not cmath.isfinite(integral):
        raise OverflowGuard(f"inter-atom integrand overflows (q={q:.4g})")
    overlap = 8 * math.pi ** 2 / _sphere_volume(rho) * (1j / q.conjugate()) * integral
    return _coupling(P1, params) * overlap.real


def _adaptive_complex(f, upper, rel_tol, limit=2000):
    parts = []
    for take in (np.real, np.imag):
        val, err, info = integrate.quad(lambda s: float(take(f(s))), 0.0, upper,
                                        epsabs=0.0, epsrel=rel_tol, limit=limit,
                                        full_output=True)[:3]
        if err > 1e-6 * max(abs(val), 1e-300) and err > 1e-14:
            raise QuadratureFailure(f"adaptive quadrature stalled (err={err:.2e})")
        parts.append(val)
    return complex(parts[0], parts[1])


def a1_quadrature(P1, q0_over_k0, params):
    """A1 as the radial integral of the squared propagator.

    Uses the coupling constant of :func:`compute_A2`; agreement with the
    closed form :func:`compute_A1` pins that constant.
    """
    q = complex(q0_over_k0)
    u, w = _radial_rule(float(params.rho_size))
    shell = 4 * math.pi * np.dot(w, np.exp(2 * q.imag * u))
    return _coupling(P1, params) * shell


def b_quadrature(P2, q0_over_k0, params):
    """B as the squared modulus of the integrated propagator, by quadrature."""
    q = complex(q0_over_k0)
    u, w = _radial_rule(float(params.rho_size))
    amp = np.dot(w, u * np.exp(-1j * q * u))
    g = params.gamma
    return 2 * g * g * params.C ** 2 * P2 * abs(amp) ** 2


# --------------------------------------------------------------------------
# Assembling and solving.

@dataclass(frozen=True)
class RateEval:
    Gamma_candidate: float
    Gamma_bar: float
    A1: float
    B: float
    A2: float
    sources: object
    medium: object


def _delta_tilde(params, Delta):
    return params.delta_lamb + 2 * Delta + params.Delta0


def gamma_map(state, params, Gamma, omega=0.0, Delta=0.0):
    """A1 + B evaluated with the sources taken at decay rate ``Gamma``."""
    if params.C == 0:
        return 0.0
    s = eval_sources(state, Gamma + params.gamma / 2, _delta_tilde(params, Delta),
                     omega, params)
    med = medium_response(s.Pret, params)
    return compute_A1(s.P1, med.R, params) + compute_B(s.P2, med.R, med.rho_tilde, params)


def assemble_rates(state, params, Gamma_guess, omega=0.0, Delta=0.0, a2_method="gauss"):
    """Candidate single-atom rate and the inter-atom rate at ``Gamma_guess``."""
    if Gamma_guess < 0:
        raise ValueError(f"Gamma_guess must be >= 0, got {Gamma_guess}")
    s = eval_sources(state, Gamma_guess + params.gamma / 2, _delta_tilde(params, Delta),
                     omega, params)
    med = medium_response(s.Pret, params)
    if params.C == 0:
        return RateEval(0.0, 0.0, 0.0, 0.0, 0.0, s, med)
    a1 = compute_A1(s.P1, med.R, params)
    b = compute_B(s.P2, med.R, med.rho_tilde, params)
    a2 = compute_A2(s.P1, med.q0_over_k0, params, method=a2_method)
    b_prime = b if params.inter_atom_b else 0.0
    return RateEval(a1 + b, a2 + b_prime, a1, b, a2, s, med)


@dataclass(frozen=True)
class GammaSolveReport:
    Gamma: float
    iterations: int
    residual: float
    method: str
    bracket: tuple | None = None


def solve_gamma(state, params, omega=0.0, warm_start=None, Delta=0.0, rel_tol=1e-10,
                strategy="auto", beta=0.5, max_fixed_point=400):
    """Self-consistent single-atom decay rate.

    ``strategy="auto"`` runs a damped fixed-point iteration from the warm
    start and hands over to a bracketed Brent solve as soon as the iteration
    stops contracting quickly (or from the first call, when there is no warm
    start).  ``"fixed-point"`` keeps iterating, halving the damping whenever
    the residual grows; ``"bisection"`` skips the iteration altogether.
    The bracketed stage uses Brent's method, which keeps bisection's
    guarantee while converging superlinearly.
    """
    if strategy not in ("auto", "fixed-point", "bisection"):
        raise ValueError(f"unknown strategy {strategy!r}")
    g_unit = params.gamma
    if params.C == 0:
        return GammaSolveReport(0.0, 0, 0.0, "trivial")

    def tol(G):
        return rel_tol * max(G, g_unit)

    def residual(G):
        try:
            return G - gamma_map(state, params, G, omega, Delta)
        except OverflowGuard:
            return _OVERFLOW_SENTINEL

    iterations = 0
    if strategy == "fixed-point" or (strategy == "auto" and warm_start is not None):
        G = g_unit if warm_start is None else max(float(warm_start), 0.0)
        adaptive = strategy == "auto"
        damping = beta
        G_prev = r_prev = None
        for iterations in range(1, max_fixed_point + 1):
            r = residual(G)
            if r == _OVERFLOW_SENTINEL:
                break
            if abs(r) <= tol(G):
                return GammaSolveReport(G, iterations, abs(r), "fixed-point")
            if r_prev is not None:
                if abs(r) > abs(r_prev):
                    if adaptive:
                        break
                    damping /= 2
                elif adaptive:
                    # Damping from the secant slope of the residual: for a
                    # map with derivative m' the optimal factor is 1/(1 - m').
                    slope = (r - r_prev) / (G - G_prev)
                    if not (slope > 0 and math.isfinite(slope)):
                        break
                    damping = 1.0 / slope
            G_prev, r_prev = G, r
            G = max(G - damping * r, 0.0)
            if G == G_prev:
                break
        if strategy == "fixed-point":
            raise NoRoot(f"fixed-point iteration did not converge (residual {r_prev:.3e})")

    if warm_start is None:
        guess, step = g_unit, 1.0
    else:
        guess, step = max(float(warm_start), GAMMA_MIN * g_unit), 1e-3
    lo, hi, f_lo, f_hi, n_bracket = _bracket(residual, guess, g_unit, step)
    iterations += n_bracket
    if f_lo == 0:
        return GammaSolveReport(lo, iterations, 0.0, "bisection-fallback", (lo, hi))
    if f_hi == 0:
        return GammaSolveReport(hi, iterations, 0.0, "bisection-fallback", (lo, hi))
    root, info = optimize.brentq(residual, lo, hi, xtol=1e-15 * g_unit,
                                 rtol=4 * np.finfo(float).eps, maxiter=200,
                                 full_output=True)
    iterations += info.function_calls
    res = abs(residual(root))
    if res > tol(root):
        # A steep residual can leave a large value at a root that is exact to
        # rounding; judge it by the implied error in Gamma instead.
        h = 1e-7 * max(root, g_unit)
        slope = abs(residual(root + h) - residual(max(root - h, 0.0))) / (root + h - max(root - h, 0.0))
        iterations += 2
        if not (math.isfinite(slope) and slope > 1 and res / slope <= tol(root)):
            raise NoRoot(f"bracketed solve left residual {res:.3e} at Gamma={root:.6g}")
    return GammaSolveReport(root, iterations, res, "bisection-fallback", (lo, hi))


def _bracket(residual, guess, g_unit, step):
    """Grow a bracket with a sign change of the residual outward from ``guess``.

    The relative step doubles on every expansion; the lower end is clamped at
    ``GAMMA_MIN`` and then zero, the upper end gives up at ``GAMMA_MAX``.
    """
    calls = 1
    f_guess = residual(guess)
    if f_guess < 0:
        lo, f_lo = guess, f_guess
        while True:
            hi = guess * (1 + step) + (g_unit * step if guess < g_unit else 0.0)
            if hi > GAMMA_MAX * g_unit:
                raise NoRoot(f"no sign change of the rate residual below {GAMMA_MAX:g}")
            f_hi = residual(hi)
            calls += 1
            if f_hi >= 0:
                return lo, hi, f_lo, f_hi, calls
            lo, f_lo = hi, f_hi
            step *= 2
    hi, f_hi = guess, f_guess
    while True:
        lo = guess / (1 + step)
        if lo < GAMMA_MIN * g_unit:
            lo = 0.0
        f_lo = residual(lo)
        calls += 1
        if f_lo <= 0:
            return lo, hi, f_lo, f_hi, calls
        if lo == 0.0:
            raise NoRoot("rate residual positive at Gamma=0: unphysical sources")
        hi, f_hi = lo, f_lo
        step *= 2


# --------------------------------------------------------------------------
# Light shift.

def kramers_kronig(omega_grid, values, omega_eval, check_tails=True, tail_tol=1e-6):
    """Induced light shift from a sampled rate spectrum.

    Evaluates ``-(1/2 pi) PV int Gamma(w')/(w' - w) dw'`` on a uniform grid by
    subtracting the singular part: the remainder is a smooth integrand handled
    by the trapezoid rule, and the subtracted constant integrates to a
    logarithm of the distances to the grid ends.
    """
    w = np.asarray(omega_grid, dtype=float)
    f = np.asarray(values, dtype=float)
    if w.ndim != 1 or w.shape != f.shape or w.size < 3:
        raise ValueError("omega_grid and values must be 1-d arrays of equal length")
    h = w[1] - w[0]
    if h <= 0 or np.max(np.abs(np.diff(w) - h)) > 1e-9 * max(abs(h), 1.0) * 10:
        raise ValueError("omega_grid must be uniform and increasing")
    if check_tails:
        peak = np.max(np.abs(f))
        if peak > 0 and max(abs(f[0]), abs(f[-1])) > tail_tol * peak:
            raise GridTooNarrow(
                f"spectrum tails {max(abs(f[0]), abs(f[-1])) / peak:.2e} of peak exceed {tail_tol:g}")
    scalar = np.ndim(omega_eval) == 0
    targets = np.atleast_1d(np.asarray(omega_eval, dtype=float))
    if np.any(targets <= w[0]) or np.any(targets >= w[-1]):
        raise GridTooNarrow("evaluation frequency outside the sampled grid")
    deriv = _node_derivative(f, h)
    out = np.empty(targets.shape)
    for k, w0 in enumerate(targets):
        diff = w - w0
        near = np.abs(diff) < 1e-6 * h
        f0 = np.interp(w0, w, f)
        g = (f - f0) / np.where(near, 1.0, diff)
        g[near] = deriv[near]
        pv = integrate.trapezoid(g, w) + f0 * math.log((w[-1] - w0) / (w0 - w[0]))
        out[k] = -pv / (2 * math.pi)
    return float(out[0]) if scalar else out


def _node_derivative(f, h):
    """Fourth-order central differences, second order at the two outer nodes."""
    d = np.gradient(f, h, edge_order=2)
    if f.size >= 5:
        d[2:-2] = (f[:-4] - 8 * f[1:-3] + 8 * f[3:-1] - f[4:]) / (12 * h)
    return d


def solve_light_shift(state, params, Gamma, omega_grid, damping=0.5, max_iter=50,
                      tol=1e-10, check_tails=False):
    """Light shift consistent with evaluating the spectrum at ``2 Delta + delta``.

    The rate spectrum is recomputed with the current shift in the detuning and
    ``Gamma_f`` anchored at ``Gamma``; the shift is updated with damping until it
    stops moving.  Returns ``(Delta, iterations)``.
    """
    from .analysis import spectrum_values

    Delta = 0.0
    for it in range(1, max_iter + 1):
        values = spectrum_values(state, Gamma, params, omega_grid, Delta=Delta)
        target = 2 * Delta + params.delta_lamb
        new = kramers_kronig(omega_grid, values, target, check_tails=check_tails)
        step = new - Delta
        Delta += damping * step
        if abs(step) <= tol * max(1.0, abs(Delta)):
            return Delta, it
    return Delta, max_iter
