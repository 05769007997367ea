"""Source functions and the dressed-propagator parameters they imply.

The one- and two-atom source functions ``P1``, ``P2`` and the retarded source
``Pret`` are evaluated in dimensionless form: the density and dipole prefactors
are stripped, leaving quantities with units of 1/gamma.  Every function here
accepts either a scalar frequency or a numpy array of frequencies.
"""

from __future__ import annotations

import cmath
from dataclasses import dataclass

import numpy as np

from .errors import DenominatorUnderflow
from .model import Q0Mode

DEN_FLOOR = 1e-300


@dataclass(frozen=True)
class SourceEval:
    P1: object
    P2: object
    Pret: object
    coeffs1: tuple
    coeffs2: tuple


@dataclass(frozen=True)
class MediumResponse:
    chi: object
    q0_over_k0: object
    R: object
    rho_tilde: object


def _is_scalar(v):
    return isinstance(v, (float, complex, int)) or np.ndim(v) == 0


def _check_den(den):
    if _is_scalar(den):
        if abs(den) < DEN_FLOOR:
            raise DenominatorUnderflow(f"|denominator|={abs(den):.3e}")
    elif np.any(np.abs(den) < DEN_FLOOR):
        raise DenominatorUnderflow("source denominator underflow on frequency grid")


def _denominator(Gf, dt, Omega, omega):
    g = Gf - 1j * omega
    return (dt * dt + g * g) * (2 * Gf - 1j * omega) + 4 * Omega * Omega * g


def coefficient_sets(state):
    """(A0, R_ge0, R_eg0) for the one-atom and the two-atom source."""
    r = state.rho_eg
    rr = (r * r.conjugate()).real
    one = (-state.a * r, state.a - rr, -r * r)
    two = ((r + state.m_eg) / 2 - state.a * r, state.x - rr, state.rho_egeg - r * r)
    return one, two


def _source_bracket(coeffs, Gf, dt, Omega, omega, den):
    A0, Rge0, Reg0 = coeffs
    num = (2 * Omega * A0 * (1j * Gf + omega - dt)
           + Rge0 * (2 * Gf - 1j * omega) * (Gf - 1j * omega + 1j * dt)
           + 2 * Omega * Omega * (Reg0 + Rge0))
    return (num / den).real


def _pret(state, Gf, dt, Omega, omega, den):
    num = ((2 * state.a - 1) * ((Gf + 1j * dt - 1j * omega) * (2 * Gf - 1j * omega)
                                + 2 * Omega * Omega)
           + 2 * Omega * state.rho_eg * (-1j * Gf + dt - omega))
    return num / den


def eval_sources(state, Gamma_f, delta_tilde, omega, params):
    """All three source functions at one decay rate, sharing the denominator."""
    if _is_scalar(Gamma_f) and Gamma_f <= 0:
        raise DenominatorUnderflow(f"Gamma_f must be positive, got {Gamma_f}")
    Omega = params.Omega
    den = _denominator(Gamma_f, delta_tilde, Omega, omega)
    _check_den(den)
    one, two = coefficient_sets(state)
    return SourceEval(
        P1=_source_bracket(one, Gamma_f, delta_tilde, Omega, omega, den),
        P2=_source_bracket(two, Gamma_f, delta_tilde, Omega, omega, den),
        Pret=_pret(state, Gamma_f, delta_tilde, Omega, omega, den),
        coeffs1=one,
        coeffs2=two,
    )


def eval_P1ret(state, rates, omega, params):
    """Dimensionless retarded one-atom source (complex, units 1/gamma)."""
    den = _denominator(rates.Gamma_f, rates.delta_tilde, params.Omega, omega)
    _check_den(den)
    return _pret(state, rates.Gamma_f, rates.delta_tilde, params.Omega, omega, den)


def eval_P1_P2(state, rates, omega, params):
    """One- and two-atom spontaneous sources without their prefactor."""
    s = eval_sources(state, rates.Gamma_f, rates.delta_tilde, omega, params)
    return s.P1, s.P2


def medium_response(Pret, params):
    """Expansion parameter, dressed wavenumber and propagation parameters.

    ``R`` is the single-pass gain exponent across the sample diameter and
    ``rho_tilde`` the corresponding phase.  In Taylor mode they follow from
    the first-order wavenumber; in exact mode from the square root, so the
    identity ``R = 2 rho Im(q0/k0)`` holds in both modes.
    """
    g, C, rho = params.gamma, params.C, params.rho_size
    chi = g * C * Pret
    if params.q0_mode is Q0Mode.TAYLOR:
        q = 1 + 0.5j * chi
        scale = g * C * rho
        R = scale * np.real(Pret)
        rho_tilde = 2 * rho - scale * np.imag(Pret)
    else:
        q = cmath.sqrt(1 + 1j * chi) if _is_scalar(chi) else np.sqrt(1 + 1j * chi)
        R = 2 * rho * np.imag(q)
        rho_tilde = 2 * rho * np.real(q)
    if _is_scalar(chi):
        R, rho_tilde = float(R), float(rho_tilde)
    return MediumResponse(chi=chi, q0_over_k0=q, R=R, rho_tilde=rho_tilde)
