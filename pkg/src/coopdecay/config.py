"""Run configuration stored as TOML.

A configuration file has up to five tables: ``[system]`` (the physical
parameters), ``[integrator]``, ``[analysis]``, ``[output]`` and, for sweeps,
``[sweep]``.  Unknown keys anywhere are rejected so a misspelt parameter can
never silently fall back to its default.
"""

from __future__ import annotations

import math
import sys
from dataclasses import asdict, dataclass, field, fields, replace

import tomli_w

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .dynamics import IntegratorConfig
from .errors import ConfigError, InvalidParameters
from .model import SystemParams

_SYSTEM_KEYS = {f.name for f in fields(SystemParams) if f.init} | {"eta"}
_INTEGRATOR_KEYS = {f.name for f in fields(IntegratorConfig)}


@dataclass(frozen=True)
class AnalysisConfig:
    omega_half_width: float = 200.0
    omega_points: int = 16385
    alphas: tuple = (0.1, 0.3, 1.0)
    snapshot_times: tuple = ()
    plateau_slope_tol: float = 0.1
    plateau_min_decades: float = 0.5
    self_consistent_spectrum: bool = False

    def __post_init__(self):
        object.__setattr__(self, "alphas", tuple(float(a) for a in self.alphas))
        object.__setattr__(self, "snapshot_times",
                           tuple(float(t) for t in self.snapshot_times))
        if not self.omega_half_width > 0:
            raise ConfigError("analysis.omega_half_width must be positive")
        if self.omega_points < 3:
            raise ConfigError("analysis.omega_points must be at least 3")
        if not (self.plateau_slope_tol > 0 and self.plateau_min_decades > 0):
            raise ConfigError("plateau thresholds must be positive")


@dataclass(frozen=True)
class OutputConfig:
    directory: str = "out"
    figures: bool = False


@dataclass(frozen=True)
class SweepConfig:
    eta: tuple = ()
    points: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "eta", tuple(float(e) for e in self.eta))
        pts = []
        for p in self.points:
            if len(p) != 2:
                raise ConfigError(f"sweep point {p!r} must be [C, rho_size]")
            pts.append((float(p[0]), float(p[1])))
        object.__setattr__(self, "points", tuple(pts))

    def __bool__(self):
        return bool(self.eta or self.points)


@dataclass(frozen=True)
class RunConfig:
    system: SystemParams
    integrator: IntegratorConfig = field(default_factory=IntegratorConfig)
    analysis: AnalysisConfig = field(default_factory=AnalysisConfig)
    output: OutputConfig = field(default_factory=OutputConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)

    def with_(self, **changes):
        return replace(self, **changes)

    def sweep_params(self):
        """SystemParams for every sweep point, in file order (eta first)."""
        out = [self.system.with_(C=eta / self.system.rho_size) for eta in self.sweep.eta]
        out += [self.system.with_(C=C, rho_size=rho) for C, rho in self.sweep.points]
        return out

    def to_dict(self):
        d = {
            "system": self.system.to_dict(),
            "integrator": {k: v for k, v in self.integrator.to_dict().items()
                           if v is not None},
            "analysis": {k: list(v) if isinstance(v, tuple) else v
                         for k, v in asdict(self.analysis).items()},
            "output": asdict(self.output),
        }
        if self.sweep:
            d["sweep"] = {"eta": list(self.sweep.eta),
                          "points": [list(p) for p in self.sweep.points]}
        return d

    def to_toml(self):
        return tomli_w.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data):
        unknown = set(data) - {"system", "integrator", "analysis", "output", "sweep"}
        if unknown:
            raise ConfigError(f"unknown table(s): {', '.join(sorted(unknown))}")
        if "system" not in data:
            raise ConfigError("missing [system] table")
        system = _build_system(data["system"])
        integrator = _build(IntegratorConfig, data.get("integrator", {}), "integrator")
        analysis = _build(AnalysisConfig, data.get("analysis", {}), "analysis")
        output = _build(OutputConfig, data.get("output", {}), "output")
        sweep = _build(SweepConfig, data.get("sweep", {}), "sweep")
        return cls(system, integrator, analysis, output, sweep)

    @classmethod
    def from_toml(cls, text):
        try:
            data = tomllib.loads(text)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"malformed TOML: {exc}") from exc
        return cls.from_dict(data)

    @classmethod
    def load(cls, path):
        try:
            with open(path, "rb") as fh:
                raw = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        try:
            text = raw.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ConfigError(f"config {path} is not UTF-8") from exc
        return cls.from_toml(text)


def _check_table(table, allowed, name):
    if not isinstance(table, dict):
        raise ConfigError(f"[{name}] must be a table")
    unknown = set(table) - set(allowed)
    if unknown:
        raise ConfigError(f"unknown key(s) in [{name}]: {', '.join(sorted(unknown))}")


def _build(cls, table, name):
    _check_table(table, {f.name for f in fields(cls)}, name)
    try:
        return cls(**table)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid [{name}]: {exc}") from exc


def _build_system(table):
    _check_table(table, _SYSTEM_KEYS, "system")
    table = dict(table)
    eta = table.pop("eta", None)
    if eta is not None:
        if "C" in table:
            raise ConfigError("[system] takes either C or eta, not both")
        if "rho_size" not in table:
            raise ConfigError("[system] eta needs rho_size")
        table["C"] = eta / table["rho_size"]
    for key in ("C", "rho_size"):
        if key not in table:
            raise ConfigError(f"[system] is missing {key}")
    for key, value in table.items():
        if isinstance(value, float) and not math.isfinite(value):
            raise ConfigError(f"[system] {key} must be finite")
    try:
        return SystemParams(**table)
    except (InvalidParameters, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid [system]: {exc}") from exc
