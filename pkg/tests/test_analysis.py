import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from coopdecay.analysis import (Spectrum, burst_metrics, chi_at_population, coherent_window,
                                compare_q0_modes, default_omega_grid, field_correlation,
                                fwhm, instantaneous_spectrum, linewidth_trace, phase_angle,
                                phase_traces, spectrum_at, subradiance_metrics,
                                xi_from_samples)
from coopdecay.dynamics import IntegratorConfig
from coopdecay.errors import NegativeSpectralDensity, NoHalfCrossing, NoPlateau
from coopdecay.model import AtomicState, RateSet, SystemParams
from coopdecay.rates import solve_gamma

P = SystemParams(C=10.0, rho_size=10.0)


def lorentz(w, width, centre=0.0):
    return width ** 2 / (width ** 2 + (w - centre) ** 2)


def spec(w, v):
    return Spectrum(t=0.0, omega_grid=np.asarray(w), values=np.asarray(v))


def test_grid_contains_zero():
    g = default_omega_grid(2.0, half_width=10, n_points=100)
    assert g.size == 101 and g[50] == 0 and g[-1] == 20


@pytest.mark.parametrize("width", [0.3, 1.0, 7.0])
def test_fwhm_lorentzian(width):
    w = np.linspace(-100 * width, 100 * width, 20001)
    h = w[1] - w[0]
    assert fwhm(spec(w, lorentz(w, width))) == pytest.approx(2 * width, abs=h * h)


def test_fwhm_double_lorentzian_against_dense_scan():
    def f(w):
        return lorentz(w, 1.0, -0.8) + 0.6 * lorentz(w, 0.5, 1.1)

    dense = np.linspace(-40, 40, 10_000_001)
    v = f(dense)
    above = dense[v >= v.max() / 2]
    oracle = above[-1] - above[0]
    w = np.linspace(-40, 40, 8001)
    assert fwhm(spec(w, f(w))) == pytest.approx(oracle, abs=2e-4)


@settings(max_examples=50, deadline=None)
@given(scale=st.floats(1e-6, 1e6))
def test_fwhm_amplitude_independent(scale):
    w = np.linspace(-30, 30, 3001)
    v = lorentz(w, 1.3, 0.4)
    assert fwhm(spec(w, scale * v)) == pytest.approx(fwhm(spec(w, v)), rel=1e-12)


def test_fwhm_needs_both_flanks():
    w = np.linspace(-1, 1, 101)
    with pytest.raises(NoHalfCrossing):
        fwhm(spec(w, lorentz(w, 5.0)))
    with pytest.raises(NoHalfCrossing):
        fwhm(spec(w, np.zeros_like(w)))


def test_vacuum_spectrum_is_zero():
    p = P.with_(C=0.0)
    s = instantaneous_spectrum(AtomicState.inverted(), RateSet.build(0.0, 0.0, p), p)
    assert np.all(s.values == 0)


def _solved(state, params=P):
    G = solve_gamma(state, params).Gamma
    return RateSet.build(G, 0.0, params)


def test_early_spectrum_even_and_peaked():
    st_ = AtomicState.inverted()
    rs = _solved(st_)
    s = instantaneous_spectrum(st_, rs, P)
    np.testing.assert_allclose(s.values, s.values[::-1], rtol=1e-12)
    mid = s.values.size // 2
    assert s.values[mid] == pytest.approx(rs.Gamma, rel=1e-9)
    assert s.tails_ok


def test_negative_spectrum_rejected():
    with pytest.raises(NegativeSpectralDensity):
        from coopdecay.analysis import _clamp_psd
        _clamp_psd(np.array([1.0, -1e-6]))


def test_tiny_negative_values_clamped():
    from coopdecay.analysis import _clamp_psd
    assert _clamp_psd(np.array([1.0, -1e-14])).tolist() == [1.0, 0.0]


def test_self_consistent_spectrum_close_to_anchored():
    st_ = AtomicState(0.9, 0.64, 0.02)
    rs = _solved(st_)
    grid = default_omega_grid(rs.Gamma_f, half_width=5, n_points=41)
    a = instantaneous_spectrum(st_, rs, P, grid)
    b = instantaneous_spectrum(st_, rs, P, grid, self_consistent=True)
    assert b.values[20] == pytest.approx(a.values[20], rel=1e-9)
    assert b.meta["self_consistent"]


def test_burst_metrics(short_run):
    b = burst_metrics(short_run)
    i = int(np.argmax(-short_run.column("adot")))
    assert b.t_peak == short_run.t[i]
    assert b.peak_rate_over_eta == pytest.approx(-short_run.column("adot")[i] / 100)


def test_xi_from_samples_exponential():
    t = np.linspace(0, 3, 301)
    np.testing.assert_allclose(xi_from_samples(t, np.exp(-2.5 * t)), 2.5, rtol=1e-10)


def test_plateau_of_pure_exponential():
    t = np.logspace(-3, 2, 201)
    xi = np.full_like(t, 0.02)
    m = subradiance_metrics(t=t, xi=xi, eta=100.0)
    assert m.plateau_value == pytest.approx(0.5)
    assert m.plateau_window == (pytest.approx(1e-3), pytest.approx(1e2))
    assert m.lifetime == pytest.approx(50.0)


def test_plateau_respects_threshold():
    t = np.logspace(-3, 2, 201)
    xi = t ** -0.5  # slope -0.5 everywhere
    with pytest.raises(NoPlateau):
        subradiance_metrics(t=t, xi=xi, eta=1.0)
    m = subradiance_metrics(t=t, xi=xi, eta=1.0, slope_tol=0.6)
    assert m.plateau_window[0] == pytest.approx(1e-3)


def test_plateau_needs_min_span():
    t = np.logspace(-3, 2, 201)
    xi = np.where((t > 1) & (t < 2), 1.0, t ** 2)
    with pytest.raises(NoPlateau):
        subradiance_metrics(t=t, xi=xi, eta=1.0)


def test_phase_of_even_spectrum_is_zero():
    w = np.linspace(-200, 200, 40001)
    s = spec(w, lorentz(w, 1.0))
    for dt in (1e-4, 0.01, 0.3):
        assert phase_angle(s, dt) == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("w0, dt", [(3.0, 0.1), (-2.0, 0.25), (40.0, 0.1)])
def test_phase_shift_theorem(w0, dt):
    w = np.linspace(-400, 400, 80001)
    s = spec(w, lorentz(w, 1.0, w0) * (np.abs(w) < 300))
    want = math.remainder(w0 * dt, 2 * math.pi)
    assert phase_angle(s, dt) == pytest.approx(want, abs=2e-3)


def test_phase_continuous_at_zero_lag():
    w = np.linspace(-50, 50, 5001)
    s = spec(w, lorentz(w, 1.0, 2.0))
    assert phase_angle(s, 0.0) == 0.0
    assert abs(phase_angle(s, 1e-6)) < 1e-5
    assert field_correlation(s, 0.0).real > 0


def test_phase_traces_shape(short_run):
    traces = phase_traces(short_run, (0.1, 1.0), grid_points=2049, half_width=100)
    assert [tr.alpha for tr in traces] == [0.1, 1.0]
    for tr in traces:
        assert tr.t.size == len(short_run) - 1
        assert np.isfinite(tr.phi[0])
        assert np.nanmax(np.abs(tr.normalized)) == pytest.approx(1.0)


def test_linewidth_trace(short_run):
    t, widths = linewidth_trace(short_run, grid_points=1025)
    assert t.size == len(short_run)
    assert np.all(widths > 0)
    i = int(np.argmax(widths))
    assert widths[i] > 2 * widths[0]  # broadened during the burst


def test_spectrum_at_record(short_run):
    rec = short_run.records[10]
    s = spectrum_at(rec, P)
    assert s.t == rec.t


def test_chi_at_population(short_run):
    chi = chi_at_population(short_run)
    assert 0 < chi < 1
    a = short_run.a
    i = int(np.nonzero(a <= 0.95)[0][0])
    c = np.abs(short_run.column("chi"))
    assert min(c[i - 1], c[i]) <= chi <= max(c[i - 1], c[i])


def test_coherent_window(short_run):
    t0, t1 = coherent_window(short_run)
    assert t0 == 0 and t1 <= short_run.t[-1]


def test_q0_modes_identical_in_vacuum():
    cmp = compare_q0_modes(P.with_(C=0.0), IntegratorConfig(t_end=1.0))
    assert cmp.max_abs_da == 0
    assert [r.state for r in cmp.taylor] == [r.state for r in cmp.exact]
