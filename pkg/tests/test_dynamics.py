import math

import numpy as np
import pytest
from scipy import linalg

from coopdecay.dynamics import IntegratorConfig, rhs_driven, rhs_nondriven, run, run_driven
from coopdecay.errors import StepSizeUnderflow
from coopdecay.model import AtomicState, RateSet, SystemParams

P = SystemParams(C=10.0, rho_size=10.0)


def test_rhs_hand_values():
    rs = RateSet.build(6.83, 1.0, P)
    adot, ndot, xdot = rhs_nondriven(AtomicState(1.0, 1.0, 0.0), rs, P)
    assert adot == pytest.approx(-7.83)
    assert ndot == pytest.approx(-31.32)
    assert xdot == pytest.approx(1.0)


def test_rhs_vacuum():
    rs = RateSet.build(0.0, 0.0, P)
    assert rhs_nondriven(AtomicState(0.4, 0.04, 0.0), rs, P)[0] == pytest.approx(-0.4)


def test_driven_reduces_to_nondriven():
    st = AtomicState(0.7, 0.3, 0.12)
    rs = RateSet.build(40.0, 20.0, P)
    d6 = rhs_driven(st, rs, P)
    assert d6[:3] == rhs_nondriven(st, rs, P)
    assert d6[3:] == (0j, 0j, 0j)


def test_driven_matches_hand_algebra():
    p = P.with_(Omega=0.7, gamma_bar=0.2, delta_bar=0.1)
    st = AtomicState(0.6, 0.1, 0.05, 0.1 + 0.2j, -0.03 + 0.01j, 0.02 - 0.04j)
    rs = RateSet.build(3.0, 1.5, p, Delta=0.25)
    adot, ndot, xdot, *_ = rhs_driven(st, rs, p)
    k = 2 * 3.0 + 1.0
    # population rows written out term by term; i(rho_ge - rho_eg) = 2 Im rho_eg
    assert adot == pytest.approx(3.0 - k * 0.6 - 0.2 * 0.05 + 2 * 0.7 * 0.2)
    assert ndot == pytest.approx(-2 * k * 0.1 - 2 * 0.2 + 8 * 1.5 * 0.05 + 4 * 0.2 * 0.05
                                 + 8 * 0.7 * 0.01)
    assert xdot == pytest.approx(-k * 0.05 + 1.5 * 0.1 + 0.1 * 0.1 + 0.2 * 0.6 - 0.1
                                 - 2 * 0.7 * 0.01)


def test_output_grid():
    cfg = IntegratorConfig(t_end=10.0, t_out_start=1e-3, points_per_decade=10)
    t = cfg.output_times()
    assert t[0] == 0 and t[1] == pytest.approx(1e-3) and t[-1] == 10.0
    assert t.size == 1 + 41


@pytest.mark.parametrize("bad", [dict(rel_tol=0), dict(t_end=-1), dict(t_out_start=200),
                                 dict(rate_freshness="never"), dict(points_per_decade=0)])
def test_bad_integrator_config(bad):
    with pytest.raises(ValueError):
        IntegratorConfig(**bad)


def test_vacuum_decay():
    ts = run(P.with_(C=0.0), IntegratorConfig(t_end=5.0))
    np.testing.assert_allclose(ts.a, np.exp(-ts.t), rtol=1e-6)
    np.testing.assert_allclose(ts.column("n"), (2 * ts.a - 1) ** 2, atol=1e-8)
    assert np.all(ts.column("x") == 0)
    np.testing.assert_allclose(ts.column("xi"), 1.0, rtol=1e-12)


def test_run_lands_on_output_grid(short_run):
    cfg = IntegratorConfig(t_end=1.0)
    np.testing.assert_array_equal(short_run.t, cfg.output_times())


def test_run_is_deterministic(short_run):
    again = run(P, IntegratorConfig(t_end=1.0))
    assert [r.state for r in again] == [r.state for r in short_run]
    assert [r.rates for r in again] == [r.rates for r in short_run]


def test_run_records_are_consistent(short_run):
    rec = short_run.records[40]
    adot, _, _ = rhs_nondriven(rec.state, rec.rates, P)
    assert rec.adot == adot
    assert rec.xi == pytest.approx(-adot / rec.state.a)
    assert short_run.stats["steps"] > 0 and short_run.stats["gamma_solves"] > 0


def test_superradiant_drop(short_run):
    a = short_run.a
    assert a[0] == 1.0
    assert a[-1] < 0.55
    x = short_run.column("x")
    assert x.max() > 0.1


def test_step_freshness_close_to_stage(short_run):
    # rates frozen over a step are first order in dt; the cap keeps that small
    coarse = run(P, IntegratorConfig(t_end=1.0, rate_freshness="step"))
    assert coarse.stats["gamma_solves"] < short_run.stats["gamma_solves"]
    assert np.max(np.abs(coarse.a - short_run.a)) < 5e-3


def test_run_rejects_coherent_state():
    with pytest.raises(ValueError):
        run(P, initial=AtomicState(0.5, 0.0, 0.0, 0.1 + 0j))


def test_step_budget():
    with pytest.raises(StepSizeUnderflow):
        run(P, IntegratorConfig(t_end=1.0, max_steps=10))


def test_driven_zero_drive_bit_identical():
    cfg = IntegratorConfig(t_end=0.05)
    a, b = run(P, cfg), run_driven(P, cfg)
    assert len(a) == len(b)
    for ra, rb in zip(a, b):
        assert (ra.t, ra.state.a, ra.state.n, ra.state.x) == (rb.t, rb.state.a, rb.state.n,
                                                               rb.state.x)
        assert ra.rates == rb.rates


def test_rabi_oscillation_from_ground():
    W = 2.0
    p = SystemParams(C=0.0, rho_size=1.0, gamma=1e-9, Omega=W)
    cfg = IntegratorConfig(t_end=3.0, t_out_start=1e-3, rel_tol=1e-10, abs_tol=1e-12)
    ts = run_driven(p, cfg, AtomicState.ground())
    np.testing.assert_allclose(ts.a, np.sin(W * ts.t) ** 2, atol=1e-6)


def test_rabi_period_from_inverted():
    W = 2.0
    p = SystemParams(C=0.0, rho_size=1.0, gamma=1e-9, Omega=W)
    cfg = IntegratorConfig(t_end=math.pi / W, t_out_start=1e-3, rel_tol=1e-10, abs_tol=1e-12)
    ts = run_driven(p, cfg)
    assert ts.a[-1] == pytest.approx(1.0, abs=1e-6)


def _bloch_steady_state(W, D, g=1.0):
    """Stationary excited population of one driven atom, from a linear solve.

    Unknowns (a, Re rho_eg, Im rho_eg) in the rotating frame.
    """
    # a' = -g a + 2 W Im r ;  r' = -(g/2 + i D) r - i W (2a - 1)
    M = np.array([[-g, 0.0, 2 * W],
                  [0.0, -g / 2, D],
                  [-2 * W, -D, -g / 2]])
    rhs = np.array([0.0, 0.0, -W])
    return linalg.solve(M, rhs)[0]


@pytest.mark.parametrize("W, D", [(0.3, 0.0), (0.5, 0.8)])
def test_weak_drive_steady_state(W, D):
    p = SystemParams(C=0.0, rho_size=1.0, Omega=W, Delta0=D)
    ts = run_driven(p, IntegratorConfig(t_end=60.0), AtomicState.ground())
    closed = W ** 2 / (0.25 + D ** 2 + 2 * W ** 2)
    assert _bloch_steady_state(W, D) == pytest.approx(closed, rel=1e-12)
    assert ts.a[-1] == pytest.approx(closed, rel=1e-6)
