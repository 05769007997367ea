"""Time integration of the two-atom mean-field equations.

The rates ``Gamma`` and ``Gamma_bar`` depend on the instantaneous state, so the
right-hand side solves the self-consistency problem on every evaluation.  The
integrator is a Dormand-Prince 5(4) pair written out here rather than taken
from scipy, because the step controller must respect a rate-dependent step
cap and land exactly on the output grid, and the warm start for the rate
solve has to follow the accepted trajectory.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, replace

import numpy as np

from .errors import StepSizeUnderflow
from .model import AtomicState, RateSet, TimeSeries, TimeSeriesRecord
from .rates import assemble_rates, solve_gamma

# Dormand-Prince 5(4) tableau.
_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_B5 = (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0)
_B4 = (5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40)
_E = tuple(b5 - b4 for b5, b4 in zip(_B5, _B4))

DT_FLOOR = 1e-16


@dataclass(frozen=True)
class IntegratorConfig:
    rel_tol: float = 1e-8
    abs_tol: float = 1e-10
    dt_init: float | None = None
    dt_max_factor: float = 0.05
    t_end: float = 100.0
    t_out_start: float = 1e-5
    points_per_decade: int = 40
    # "stage" re-solves Gamma at every RK stage, "step" once per step.
    rate_freshness: str = "stage"
    gamma_rel_tol: float = 1e-10
    max_steps: int = 5_000_000

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ValueError("integrator tolerances must be positive")
        if not self.dt_max_factor > 0:
            raise ValueError("dt_max_factor must be positive")
        if not self.t_end > 0:
            raise ValueError("t_end must be positive")
        if not 0 < self.t_out_start < self.t_end:
            raise ValueError("t_out_start must lie in (0, t_end)")
        if self.points_per_decade < 1:
            raise ValueError("points_per_decade must be >= 1")
        if self.rate_freshness not in ("stage", "step"):
            raise ValueError(f"unknown rate_freshness {self.rate_freshness!r}")
        if self.dt_init is not None and not self.dt_init > 0:
            raise ValueError("dt_init must be positive")

    def with_(self, **changes):
        return replace(self, **changes)

    def to_dict(self):
        return asdict(self)

    def output_times(self):
        """t = 0 followed by a log-spaced grid ending exactly at ``t_end``."""
        decades = math.log10(self.t_end / self.t_out_start)
        n = max(2, int(round(decades * self.points_per_decade)) + 1)
        grid = np.logspace(math.log10(self.t_out_start), math.log10(self.t_end), n)
        grid[-1] = self.t_end
        return np.concatenate(([0.0], grid))


def rhs_nondriven(state, rates, params):
    """(a', n', x') of the three-variable system without drive."""
    g = params.gamma
    G, Gb = rates.Gamma, rates.Gamma_bar
    k = 2 * G + g
    adot = -k * state.a + G
    ndot = -2 * k * state.n - 2 * g * (2 * state.a - 1) + 8 * Gb * state.x
    xdot = -k * state.x + Gb * state.n
    return adot, ndot, xdot


def rhs_driven(state, rates, params):
    """Derivatives of all six variables, coherences complex.

    The population block is the non-driven expression plus drive and
    inter-atom spontaneous corrections, so a state without coherences and
    ``Omega = gamma_bar = 0`` reproduces :func:`rhs_nondriven` exactly.
    """
    g, gb, db, W = params.gamma, params.gamma_bar, params.delta_bar, params.Omega
    G, Gb = rates.Gamma, rates.Gamma_bar
    dt = rates.delta_tilde
    a, n, x = state.a, state.n, state.x
    r, m, rr = state.rho_eg, state.m_eg, state.rho_egeg
    adot, ndot, xdot = rhs_nondriven(state, rates, params)
    adot += -gb * x + 2 * W * r.imag
    ndot += 4 * gb * x + 8 * W * m.imag
    xdot += gb * n / 2 + gb * a - gb / 2 - 2 * W * m.imag
    k = g + 2 * G
    rdot = -(k / 2 + 1j * dt) * r + (gb + 2j * db) / 2 * m - 1j * W * (2 * a - 1)
    mdot = (-(3 * k / 2 + gb + 2 * Gb + 1j * dt) * m - (g + gb / 2 - 1j * db) * r
            - 1j * W * (n - 2 * x + 2 * rr))
    rrdot = -(k + 2j * dt) * rr - 2j * W * m
    return adot, ndot, xdot, rdot, mdot, rrdot


def _vec_rhs_nondriven(state, rates, params):
    return np.array(rhs_nondriven(state, rates, params))


def _vec_rhs_driven(state, rates, params):
    adot, ndot, xdot, rdot, mdot, rrdot = rhs_driven(state, rates, params)
    return np.array([adot, ndot, xdot, rdot.real, rdot.imag, mdot.real, mdot.imag,
                     rrdot.real, rrdot.imag])


class _RateOracle:
    """Solves the rates for successive states, warm-starting from the last one."""

    def __init__(self, params, config):
        self.params = params
        self.config = config
        self.warm = None
        self.Delta = 0.0
        self.solves = 0
        self.iterations = 0
        self.fallbacks = 0
        self.max_iterations = 0

    def __call__(self, state, warm=None):
        rep = solve_gamma(state, self.params, warm_start=self.warm if warm is None else warm,
                          Delta=self.Delta, rel_tol=self.config.gamma_rel_tol)
        self.solves += 1
        self.iterations += rep.iterations
        self.max_iterations = max(self.max_iterations, rep.iterations)
        if rep.method == "bisection-fallback":
            self.fallbacks += 1
        ev = assemble_rates(state, self.params, rep.Gamma, Delta=self.Delta)
        return RateSet.build(rep.Gamma, ev.Gamma_bar, self.params, self.Delta), ev

    def stats(self):
        return {"gamma_solves": self.solves, "gamma_iterations": self.iterations,
                "gamma_max_iterations": self.max_iterations,
                "gamma_fallbacks": self.fallbacks}


def _update_light_shift(oracle, state, Gamma):
    from .analysis import default_omega_grid
    from .rates import solve_light_shift

    grid = default_omega_grid(Gamma + oracle.params.gamma / 2, n_points=4097)
    oracle.Delta, _ = solve_light_shift(state, oracle.params, Gamma, grid)


def _integrate(params, config, initial, rhs, driven):
    initial.check()
    y = initial.to_vector(driven=driven)
    t_out = config.output_times()
    oracle = _RateOracle(params, config)
    series = TimeSeries(params=params)
    stage_fresh = config.rate_freshness == "stage"

    def f(yv, frozen=None):
        st = AtomicState.from_vector(yv)
        if frozen is not None:
            return rhs(st, frozen, params), frozen
        rates, _ = oracle(st)
        return rhs(st, rates, params), rates

    def record(t, yv):
        st = AtomicState.from_vector(yv)
        rates, ev = oracle(st)
        deriv = rhs(st, rates, params)
        adot = float(deriv[0])
        xi = -adot / st.a if st.a > 0 else math.nan
        series.append(TimeSeriesRecord(t=t, state=st, rates=rates, adot=adot, xi=xi,
                                       chi=complex(ev.medium.chi)))
        return rates

    rates0 = record(0.0, y)
    oracle.warm = rates0.Gamma
    if params.enable_kk_shift:
        _update_light_shift(oracle, initial, rates0.Gamma)

    def cap(rates):
        return config.dt_max_factor / (rates.Gamma + params.gamma + params.Omega
                                       + abs(rates.delta_tilde))

    k1, rates = f(y)
    dt = config.dt_init if config.dt_init is not None else min(cap(rates), 1e-3 * t_out[1])
    t = 0.0
    steps = rejected = 0
    out_idx = 1
    dt_floor = DT_FLOOR / params.gamma
    while out_idx < len(t_out):
        target = t_out[out_idx]
        h = min(dt, cap(rates))
        landing = h >= target - t
        if landing:
            h = target - t
        if h < dt_floor:
            raise StepSizeUnderflow(f"step {h:.3e} below floor at t={t:.6g}")
        if steps + rejected > config.max_steps:
            raise StepSizeUnderflow(f"step budget {config.max_steps} exhausted at t={t:.6g}")
        frozen = None if stage_fresh else rates
        ks = [k1]
        for i in range(1, 7):
            yi = y.copy()
            for aij, kj in zip(_A[i], ks):
                if aij:
                    yi += h * aij * kj
            ki, rates_i = f(yi, frozen)
            ks.append(ki)
        y_new = y.copy()
        for b, ki in zip(_B5, ks):
            if b:
                y_new += h * b * ki
        err_vec = np.zeros_like(y)
        for e, ki in zip(_E, ks):
            err_vec += h * e * ki
        # Max norm: components that stay exactly zero never affect the step.
        scale = config.abs_tol + config.rel_tol * np.maximum(np.abs(y), np.abs(y_new))
        err = float(np.max(np.abs(err_vec) / scale))
        if not (err <= 1.0 and np.all(np.isfinite(y_new))):
            rejected += 1
            dt = h * (max(0.2, 0.9 * err ** -0.2) if np.isfinite(err) else 0.2)
            continue
        t = target if landing else t + h
        y = y_new
        steps += 1
        if stage_fresh:
            # FSAL: the last stage was evaluated at (t, y) with fresh rates.
            k1, rates = ks[6], rates_i
        else:
            k1, rates = f(y)
        oracle.warm = rates.Gamma
        if landing:
            record(t, y)
            out_idx += 1
            if params.enable_kk_shift:
                _update_light_shift(oracle, AtomicState.from_vector(y), rates.Gamma)
                k1, rates = f(y)
        fac = 5.0 if err == 0 else min(5.0, max(0.2, 0.9 * err ** -0.2))
        dt = max(dt, h * fac) if landing else h * fac
    series.stats.update({"steps": steps, "rejected": rejected, **oracle.stats()})
    return series


def run(params, config=None, initial=None):
    """Integrate the non-driven three-variable system from full inversion."""
    config = config or IntegratorConfig()
    initial = initial or AtomicState.inverted()
    if not initial.is_nondriven:
        raise ValueError("run() takes a state without coherences; use run_driven()")
    return _integrate(params, config, initial, _vec_rhs_nondriven, driven=False)


def run_driven(params, config=None, initial=None):
    """Integrate all six variables, including the drive terms."""
    config = config or IntegratorConfig()
    initial = initial or AtomicState.inverted()
    return _integrate(params, config, initial, _vec_rhs_driven, driven=True)
