"""Domain types shared by every other module.

All quantities are in reduced units: rates in units of the vacuum decay rate
``gamma`` and times in units of ``1/gamma``.  The medium enters only through
two dimensionless numbers, ``C`` (atoms per cubed wavelength, up to 4 pi^2)
and ``rho_size`` (pi times the sample diameter over the wavelength).
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field, fields, replace

import numpy as np

from .errors import InvalidParameters, InvalidState

BOUNDS_TOL = 1e-9
COHERENCE_TOL = 1e-6


class Q0Mode(str, enum.Enum):
    """How the dressed wavenumber is obtained from the retarded source."""

    TAYLOR = "taylor"
    EXACT = "exact"


@dataclass(frozen=True)
class SystemParams:
    C: float
    rho_size: float
    gamma: float = 1.0
    Omega: float = 0.0
    Delta0: float = 0.0
    delta_lamb: float = 0.0
    gamma_bar: float = 0.0
    delta_bar: float = 0.0
    q0_mode: Q0Mode = Q0Mode.TAYLOR
    enable_kk_shift: bool = False
    # Use B for the two-atom source term of the inter-atom rate; False drops it.
    inter_atom_b: bool = True
    eta: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "q0_mode", Q0Mode(self.q0_mode))
        for name in ("C", "rho_size", "gamma", "Omega", "Delta0", "delta_lamb",
                     "gamma_bar", "delta_bar"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise InvalidParameters(f"{name} must be finite, got {value!r}")
        if self.gamma <= 0:
            raise InvalidParameters(f"gamma must be > 0, got {self.gamma}")
        if self.C < 0:
            raise InvalidParameters(f"C must be >= 0, got {self.C}")
        if self.rho_size <= 0:
            raise InvalidParameters(f"rho_size must be > 0, got {self.rho_size}")
        if self.Omega < 0:
            raise InvalidParameters(f"Omega must be >= 0, got {self.Omega}")
        object.__setattr__(self, "eta", self.C * self.rho_size)

    @classmethod
    def from_eta(cls, eta, rho_size, **kwargs):
        """Build parameters at optical depth ``eta`` for a given sample size."""
        return cls(C=eta / rho_size, rho_size=rho_size, **kwargs)

    def with_(self, **changes):
        return replace(self, **changes)

    def to_dict(self):
        out = {}
        for f in fields(self):
            if not f.init:
                continue
            value = getattr(self, f.name)
            out[f.name] = value.value if isinstance(value, Q0Mode) else value
        return out


def derived_quantities(params):
    """Optical depth and the sample size in units of the inverse wavenumber."""
    return {"eta": params.C * params.rho_size, "k0l": 2.0 * params.rho_size}


@dataclass(frozen=True)
class AtomicState:
    """Permutation-symmetric two-atom mean-field variables.

    ``x`` is the symmetrised coherence (rho_eg,ge + rho_ge,eg)/2 and is real.
    The other three coherences are complex and vanish without a drive.
    """

    a: float
    n: float
    x: float
    rho_eg: complex = 0j
    m_eg: complex = 0j
    rho_egeg: complex = 0j

    @classmethod
    def inverted(cls):
        return cls(a=1.0, n=1.0, x=0.0)

    @classmethod
    def ground(cls):
        return cls(a=0.0, n=1.0, x=0.0)

    @property
    def is_nondriven(self):
        return self.rho_eg == 0 and self.m_eg == 0 and self.rho_egeg == 0

    def check(self):
        """Raise on out-of-range populations, warn on an unphysical coherence."""
        if not (-BOUNDS_TOL <= self.a <= 1 + BOUNDS_TOL):
            raise InvalidState(f"population a={self.a!r} outside [0, 1]")
        if not (-1 - BOUNDS_TOL <= self.n <= 1 + BOUNDS_TOL):
            raise InvalidState(f"inversion n={self.n!r} outside [-1, 1]")
        a = min(max(self.a, 0.0), 1.0)
        if abs(self.x) > math.sqrt(a * (1 - a)) + COHERENCE_TOL:
            warnings.warn(
                f"coherence |x|={abs(self.x):.3e} exceeds sqrt(a(1-a))",
                RuntimeWarning, stacklevel=2)
        return self

    def to_vector(self, driven=False):
        if not driven:
            return np.array([self.a, self.n, self.x])
        return np.array([self.a, self.n, self.x,
                         self.rho_eg.real, self.rho_eg.imag,
                         self.m_eg.real, self.m_eg.imag,
                         self.rho_egeg.real, self.rho_egeg.imag])

    @classmethod
    def from_vector(cls, y):
        if len(y) == 3:
            return cls(float(y[0]), float(y[1]), float(y[2]))
        return cls(float(y[0]), float(y[1]), float(y[2]),
                   complex(y[3], y[4]), complex(y[5], y[6]), complex(y[7], y[8]))


@dataclass(frozen=True)
class RateSet:
    Gamma: float
    Gamma_bar: float
    Delta: float
    Gamma_f: float
    delta_tilde: float

    @classmethod
    def build(cls, Gamma, Gamma_bar, params, Delta=0.0):
        return cls(
            Gamma=Gamma,
            Gamma_bar=Gamma_bar,
            Delta=Delta,
            Gamma_f=Gamma + params.gamma / 2,
            delta_tilde=params.delta_lamb + 2 * Delta + params.Delta0,
        )

    def check(self, rel=1e-6):
        if self.Gamma < 0:
            raise InvalidState(f"negative decay rate Gamma={self.Gamma!r}")
        if abs(self.Gamma_bar) > self.Gamma * (1 + rel) and self.Gamma > 0:
            warnings.warn(
                f"inter-atom rate {self.Gamma_bar:.4g} exceeds single-atom "
                f"rate {self.Gamma:.4g}", RuntimeWarning, stacklevel=2)
        return self


@dataclass(frozen=True)
class TimeSeriesRecord:
    t: float
    state: AtomicState
    rates: RateSet
    adot: float
    xi: float
    chi: complex


@dataclass
class TimeSeries:
    """Records on the output grid plus bookkeeping from the integrator."""

    params: SystemParams
    records: list = field(default_factory=list)
    stats: dict = field(default_factory=dict)

    def append(self, record):
        if self.records and record.t <= self.records[-1].t:
            raise ValueError("time series must be strictly increasing")
        self.records.append(record)

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def column(self, name):
        """Array of a named quantity across all records.

        Names cover record fields (``t``, ``adot``, ``xi``, ``chi``), state
        fields and rate fields.
        """
        first = self.records[0] if self.records else None
        if first is None:
            return np.array([])
        if hasattr(first, name):
            getter = lambda r: getattr(r, name)
        elif hasattr(first.state, name):
            getter = lambda r: getattr(r.state, name)
        elif hasattr(first.rates, name):
            getter = lambda r: getattr(r.rates, name)
        else:
            raise KeyError(name)
        dtype = complex if name in ("chi", "rho_eg", "m_eg", "rho_egeg") else float
        return np.array([getter(r) for r in self.records], dtype=dtype)

    @property
    def t(self):
        return self.column("t")

    @property
    def a(self):
        return self.column("a")

    def at_time(self, t):
        """Record whose time is nearest to ``t``."""
        times = self.t
        return self.records[int(np.argmin(np.abs(times - t)))]
