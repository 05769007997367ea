"""Built-in oracle suite behind ``coopdecay validate``.

Each check compares the library against an answer obtained independently:
a closed form, a brute-force computation or a different quadrature.  None of
them needs input files or network access.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from . import rates
from .dynamics import IntegratorConfig, rhs_driven, rhs_nondriven, run, run_driven
from .model import AtomicState, RateSet, SystemParams
from .sources import eval_sources, medium_response


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    error: float
    tolerance: float
    detail: str = ""


def _result(name, error, tol, detail=""):
    ok = bool(np.isfinite(error) and error <= tol)
    return CheckResult(name, ok, float(error), tol, detail)


def check_vacuum_limit():
    ts = run(SystemParams(C=0.0, rho_size=10.0), IntegratorConfig(t_end=5.0))
    err = np.max(np.abs(ts.a / np.exp(-ts.t) - 1))
    return _result("vacuum decay a = exp(-t)", err, 1e-6)


def check_independent_atoms():
    ts = run(SystemParams(C=0.0, rho_size=10.0), IntegratorConfig(t_end=5.0))
    err = np.max(np.abs(ts.column("n") - (2 * ts.a - 1) ** 2))
    return _result("independent atoms n = (2a - 1)^2", err, 1e-8)


def check_quadratic_gamma(eta=100.0):
    params = SystemParams.from_eta(eta, 10.0)
    rep = rates.solve_gamma(AtomicState(a=0.5, n=0.0, x=0.0), params)
    exact = -0.25 + math.sqrt(0.0625 + 0.5 * eta)
    return _result("half-inverted rate closed form", abs(rep.Gamma / exact - 1), 1e-8,
                   f"Gamma={rep.Gamma:.12g} expected {exact:.12g}")


def _medium_states():
    return [AtomicState(1.0, 1.0, 0.0), AtomicState(0.8, 0.4, 0.1),
            AtomicState(0.5, 0.1, 0.15), AtomicState(0.3, 0.2, 0.05)]


def check_a2_normalization():
    """Radial quadrature of |propagator|^2 with the A2 constant against A1."""
    params = SystemParams(C=10.0, rho_size=10.0)
    worst = 0.0
    for st in _medium_states():
        G = 5.0
        s = eval_sources(st, G + 0.5, 0.0, 0.0, params)
        med = medium_response(s.Pret, params)
        closed = rates.compute_A1(s.P1, med.R, params)
        quad = rates.a1_quadrature(s.P1, med.q0_over_k0, params)
        worst = max(worst, abs(quad / closed - 1))
    return _result("A2 normalisation against A1", worst, 1e-6)


def check_b_quadrature():
    """Closed-form B against the squared integrated propagator."""
    params = SystemParams(C=10.0, rho_size=10.0)
    worst = 0.0
    for st in _medium_states():
        if st.x == 0:
            continue
        s = eval_sources(st, 5.5, 0.0, 0.0, params)
        med = medium_response(s.Pret, params)
        closed = rates.compute_B(s.P2, med.R, med.rho_tilde, params)
        quad = rates.b_quadrature(s.P2, med.q0_over_k0, params)
        worst = max(worst, abs(quad / closed - 1))
    return _result("two-atom term B against quadrature", worst, 1e-6)


def check_a2_transparent():
    """A2 in a transparent medium against a dense trapezoid reference."""
    params = SystemParams(C=10.0, rho_size=10.0)
    got = rates.compute_A2(0.5, 1.0 + 0j, params)
    u = np.linspace(0.0, params.rho_size, 1_000_001)
    ref_int = integrate.trapezoid(u * (2 * params.rho_size - u) * np.sin(u), u)
    ref = 1.5 * params.gamma ** 2 * params.C * 0.5 / params.rho_size ** 3 * ref_int
    return _result("A2 transparent-medium reference", abs(got / ref - 1), 1e-6)


def check_kk_lorentzian(width=1.0):
    grid = np.linspace(-1e3, 1e3, 20_001)
    values = width ** 2 / (width ** 2 + grid ** 2)
    points = np.array([0.3, 1.0, 2.5])
    got = rates.kramers_kronig(grid, values, points, check_tails=False)
    exact = width * points / (2 * (points ** 2 + width ** 2))
    return _result("Kramers-Kronig of a Lorentzian", np.max(np.abs(got / exact - 1)), 1e-4)


def check_rabi_limit(Omega=2.0):
    params = SystemParams(C=0.0, rho_size=10.0, gamma=1e-9, Omega=Omega)
    cfg = IntegratorConfig(t_end=3.0, t_out_start=1e-3, rel_tol=1e-10, abs_tol=1e-12)
    ts = run_driven(params, cfg, initial=AtomicState.ground())
    err = np.max(np.abs(ts.a - np.sin(Omega * ts.t) ** 2))
    return _result("undamped Rabi oscillation", err, 1e-6)


def check_reduction():
    """Driven system at Omega = 0 against the three-variable system."""
    params = SystemParams(C=10.0, rho_size=10.0)
    st = AtomicState(0.7, 0.3, 0.12)
    rs = RateSet.build(40.0, 20.0, params)
    d6 = rhs_driven(st, rs, params)
    d3 = rhs_nondriven(st, rs, params)
    alg = max(abs(d6[i] - d3[i]) for i in range(3)) + sum(abs(v) for v in d6[3:])
    cfg = IntegratorConfig(t_end=0.05)
    a = run(params, cfg)
    b = run_driven(params, cfg)
    same = all(ra.t == rb.t and ra.state.a == rb.state.a and ra.state.n == rb.state.n
               and ra.state.x == rb.state.x and ra.rates.Gamma == rb.rates.Gamma
               for ra, rb in zip(a, b)) and len(a) == len(b)
    return _result("Omega = 0 reduction (bit-identical)", alg + (0.0 if same else 1.0), 0.0)


def check_grid_scan(eta=100.0, n_grid=1_000_000):
    params = SystemParams.from_eta(eta, 10.0)
    st = AtomicState.inverted()
    solved = rates.solve_gamma(st, params).Gamma
    lo = max(eta / 600.0, 1e-3)
    grid = np.linspace(lo, 10 * eta, n_grid)
    s = eval_sources(st, grid + params.gamma / 2, 0.0, 0.0, params)
    med = medium_response(s.Pret, params)
    resid = grid - (rates.compute_A1(s.P1, med.R, params)
                    + rates.compute_B(s.P2, med.R, med.rho_tilde, params))
    idx = np.nonzero(np.diff(np.sign(resid)))[0]
    if idx.size == 0:
        return CheckResult("grid scan of the initial rate", False, math.inf, 1e-6,
                           "no sign change on the grid")
    i = idx[0]
    root = grid[i] - resid[i] * (grid[i + 1] - grid[i]) / (resid[i + 1] - resid[i])
    return _result("grid scan of the initial rate", abs(solved / root - 1), 1e-6,
                   f"solver {solved:.10g} scan {root:.10g}")


CHECKS = (
    check_vacuum_limit,
    check_independent_atoms,
    check_quadratic_gamma,
    check_a2_normalization,
    check_b_quadrature,
    check_a2_transparent,
    check_kk_lorentzian,
    check_rabi_limit,
    check_reduction,
    check_grid_scan,
)


def run_validation(checks=CHECKS):
    results = []
    for check in checks:
        try:
            results.append(check())
        except Exception as exc:  # a crashing oracle is a failed oracle
            results.append(CheckResult(check.__name__, False, math.inf, 0.0,
                                       f"{type(exc).__name__}: {exc}"))
    return results
