"""Run configuration: ``key = value unit`` text files.

Grammar, one entry per line::

    # comment
    d   = 100 um
    L1  = 5 mm
    mode = dds

Dimensional values must carry a unit; dimensionless ones (fractions,
counts, flags) are bare.  Everything is stored in SI base units.
"""

from __future__ import annotations

import dataclasses
import re
from decimal import Decimal, InvalidOperation
from dataclasses import dataclass, field

from .engine import GridSpec
from .geometry import ExperimentGeometry, Mode, SourceRegion, Weighting
from .kinematics import BeamParameters, PhysicalConstants
from .timing import ShotConfig


class ConfigError(ValueError):
    """Invalid configuration; ``errors`` holds ``(line, message)`` pairs."""

    def __init__(self, errors: list[tuple[int, str]]):
        self.errors = errors
        super().__init__("\n".join(f"line {n}: {msg}" if n else msg for n, msg in errors))


# scale factors as decimal strings so that e.g. "100 um" is exactly 1e-4
UNITS = {
    "length": {"m": "1", "mm": "1e-3", "um": "1e-6", "µm": "1e-6", "μm": "1e-6",
               "nm": "1e-9", "cm": "1e-2"},
    "mass": {"kg": "1", "g": "1e-3", "u": "1.66053906660e-27"},
    "time": {"s": "1", "ms": "1e-3", "us": "1e-6", "µs": "1e-6", "μs": "1e-6", "ns": "1e-9"},
    "acceleration": {"m/s^2": "1", "m/s2": "1"},
}
SI_UNIT = {"length": "m", "mass": "kg", "time": "s", "acceleration": "m/s^2"}

# key -> (attribute, kind, lower bound, strict?)
# kinds: a unit family, "number" (bare float), "int", "bool", or a choice tuple
_KEYS = {
    "mode": ("mode", ("dds", "ghost"), None, False),
    "L1": ("source_slit_distance", "length", 0.0, True),
    "L2": ("slit_detector_distance", "length", 0.0, True),
    "d": ("slit_separation", "length", 0.0, True),
    "H": ("drop_height", "length", 0.0, True),
    "dx": ("detector_resolution", "length", 0.0, True),
    "slit_width": ("slit_width", "length", 0.0, False),
    "slit_subpoints": ("slit_subpoints", "int", 1, False),
    "S_x": ("extent_x", "length", 0.0, False),
    "S_y": ("extent_y", "length", 0.0, False),
    "S_z": ("extent_z", "length", 0.0, False),
    "weighting": ("weighting", ("uniform", "gaussian"), None, False),
    "sigma_x": ("sigma_x", "length", 0.0, True),
    "sigma_y": ("sigma_y", "length", 0.0, True),
    "sigma_z": ("sigma_z", "length", 0.0, True),
    "laser_wavelength": ("laser_wavelength", "length", 0.0, True),
    "mass": ("atomic_mass", "mass", 0.0, True),
    "spread_x": ("velocity_spread_x", "number", 0.0, True),
    "spread_yz": ("velocity_spread_yz", "number", 0.0, True),
    "gravity": ("gravity", "acceleration", 0.0, True),
    "window": ("window", "length", 0.0, True),
    "grid_a": ("grid_a", "int", 1, False),
    "grid_b": ("grid_b", "int", 1, False),
    "step_x": ("step_x", "length", 0.0, True),
    "step_y": ("step_y", "length", 0.0, True),
    "step_z": ("step_z", "length", 0.0, True),
    "integrate_z": ("integrate_z", "bool", None, False),
    "exact_prefactor": ("exact_prefactor", "bool", None, False),
    "tolerance": ("tolerance", "number", 0.0, True),
    "mean_pairs": ("mean_pairs", "number", 0.0, False),
    "efficiency": ("efficiency", "number", 0.0, False),
    "collision_time_constant": ("collision_time_constant", "time", 0.0, False),
    "collision_window": ("collision_window", "time", 0.0, False),
    "spread_z": ("velocity_spread_z", "number", 0.0, False),
    "pairing_window": ("pairing_window", "time", 0.0, True),
    "shots": ("shots", "int", 1, False),
    "seed": ("seed", "int", 0, False),
}
_REQUIRED = ("mode", "L1", "L2", "d", "S_x")
_UPPER = {"spread_x": 1.0, "spread_yz": 1.0, "efficiency": 1.0}
_ATTR_TO_KEY = {v[0]: k for k, v in _KEYS.items()}

_LINE = re.compile(r"^\s*([A-Za-z_][A-Za-z0-9_]*)\s*=\s*(.*?)\s*$")


@dataclass
class RunConfig:
    """Fully resolved run parameters, SI units."""

    mode: str = "dds"
    source_slit_distance: float = 5e-3
    slit_detector_distance: float = 25e-3
    slit_separation: float = 100e-6
    drop_height: float = 0.5
    detector_resolution: float = 60e-6
    slit_width: float = 0.0
    slit_subpoints: int = 1
    extent_x: float = 50e-6
    extent_y: float = 10e-6
    extent_z: float = 0.0
    weighting: str = "uniform"
    sigma_x: float | None = None
    sigma_y: float | None = None
    sigma_z: float | None = None
    laser_wavelength: float = 1.083e-6
    atomic_mass: float = 6.646e-27
    velocity_spread_x: float = 0.0044
    velocity_spread_yz: float = 0.091
    gravity: float = 9.81
    window: float = 1e-3
    grid_a: int = 201
    grid_b: int = 201
    step_x: float | None = None
    step_y: float | None = None
    step_z: float | None = None
    integrate_z: bool = False
    exact_prefactor: bool = False
    tolerance: float = 1e-3
    mean_pairs: float = 1.0
    efficiency: float = 1.0
    collision_time_constant: float = 150e-6
    collision_window: float = 1e-3
    velocity_spread_z: float = 0.091
    pairing_window: float = 2e-3
    shots: int = 1000
    seed: int = 0
    out: str | None = field(default=None, metadata={"serialize": False})

    # -- builders -------------------------------------------------------------
    def geometry(self) -> ExperimentGeometry:
        return ExperimentGeometry(
            self.source_slit_distance, self.slit_detector_distance, self.slit_separation,
            self.drop_height, self.detector_resolution, Mode(self.mode),
            self.slit_width, self.slit_subpoints,
        )

    def source(self) -> SourceRegion:
        sigma = None
        if self.weighting == "gaussian" and any(
                s is not None for s in (self.sigma_x, self.sigma_y, self.sigma_z)):
            ext = (self.extent_x, self.extent_y, self.extent_z)
            sigma = tuple(s if s is not None else (e / 4 if e > 0 else 1.0)
                          for s, e in zip((self.sigma_x, self.sigma_y, self.sigma_z), ext))
        return SourceRegion(self.extent_x, self.extent_y, self.extent_z,
                            Weighting(self.weighting), sigma)

    def beam(self) -> BeamParameters:
        return BeamParameters(self.laser_wavelength, self.atomic_mass, self.velocity_spread_x,
                              self.velocity_spread_yz, PhysicalConstants(gravity=self.gravity))

    def grid(self) -> GridSpec:
        return GridSpec(self.window, self.grid_a, self.window, self.grid_b)

    def shot_config(self) -> ShotConfig:
        return ShotConfig(self.mean_pairs, self.efficiency, self.collision_time_constant,
                          self.collision_window, self.velocity_spread_z, self.drop_height,
                          self.seed, self.beam(), self.window)

    def steps_override(self) -> tuple[float | None, float | None, float | None]:
        return (self.step_x, self.step_y, self.step_z)

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)

    # -- text form ------------------------------------------------------------
    def to_text(self) -> str:
        """Canonical SI serialization; ``parse_config(c.to_text()) == c``."""
        lines = []
        for f in dataclasses.fields(self):
            if f.metadata.get("serialize") is False:
                continue
            value = getattr(self, f.name)
            if value is None:
                continue
            key = _ATTR_TO_KEY[f.name]
            kind = _KEYS[key][1]
            if isinstance(kind, tuple):
                text = value
            elif kind == "bool":
                text = "true" if value else "false"
            elif kind == "int":
                text = str(int(value))
            elif kind == "number":
                text = repr(float(value))
            else:
                text = f"{float(value)!r} {SI_UNIT[kind]}"
            lines.append(f"{key} = {text}")
        return "\n".join(lines) + "\n"

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in dataclasses.fields(self)
                if f.metadata.get("serialize") is not False}


def _parse_value(key: str, raw: str):
    attr, kind, lower, strict = _KEYS[key]
    if isinstance(kind, tuple):
        if raw not in kind:
            raise ValueError(f"{key} must be one of {', '.join(kind)}, got {raw!r}")
        return attr, raw
    if kind == "bool":
        low = raw.lower()
        if low not in ("true", "false", "yes", "no", "1", "0"):
            raise ValueError(f"{key} must be a boolean, got {raw!r}")
        return attr, low in ("true", "yes", "1")
    parts = raw.split()
    if kind in ("int", "number"):
        if len(parts) != 1:
            raise ValueError(f"{key} is dimensionless; expected a bare number, got {raw!r}")
        try:
            value = int(parts[0]) if kind == "int" else float(parts[0])
        except ValueError:
            raise ValueError(f"{key}: cannot parse {parts[0]!r} as a number") from None
    else:
        if len(parts) != 2:
            raise ValueError(f"{key} needs a value and a {kind} unit "
                             f"(e.g. '{key} = 1 {SI_UNIT[kind]}'), got {raw!r}")
        number, unit = parts
        scale = UNITS[kind].get(unit)
        if scale is None:
            raise ValueError(f"{key}: bad {kind} unit {unit!r}; use one of {', '.join(UNITS[kind])}")
        try:
            value = float(Decimal(number) * Decimal(scale))
        except InvalidOperation:
            raise ValueError(f"{key}: cannot parse {number!r} as a number") from None
    if lower is not None and (value <= lower if strict else value < lower):
        op = ">" if strict else ">="
        raise ValueError(f"{key} out of range: must be {op} {lower}, got {value!r}")
    if key in _UPPER and value > _UPPER[key]:
        raise ValueError(f"{key} out of range: must be <= {_UPPER[key]}, got {value!r}")
    return attr, value


def parse_config(text: str, require: tuple[str, ...] = _REQUIRED) -> RunConfig:
    """Parse and validate; all problems are collected into one :class:`ConfigError`."""
    values: dict[str, object] = {}
    seen: dict[str, int] = {}
    errors: list[tuple[int, str]] = []
    for n, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        m = _LINE.match(body)
        if not m:
            errors.append((n, f"expected 'key = value unit', got {line.strip()!r}"))
            continue
        key, raw = m.groups()
        if key not in _KEYS:
            errors.append((n, f"unknown key {key!r}"))
            continue
        if key in seen:
            errors.append((n, f"duplicate key {key!r} (first on line {seen[key]})"))
            continue
        seen[key] = n
        try:
            attr, value = _parse_value(key, raw)
        except ValueError as exc:
            errors.append((n, str(exc)))
            continue
        values[attr] = value
    for key in require:
        if key not in seen:
            errors.append((0, f"missing required key {key!r}"))
    if errors:
        raise ConfigError(errors)
    cfg = RunConfig(**values)
    try:
        # cross-field validation through the domain constructors
        cfg.geometry()
        cfg.source()
        cfg.beam()
        cfg.grid()
        cfg.shot_config()
    except ValueError as exc:
        raise ConfigError([(0, str(exc))]) from None
    return cfg


def load_config(path, require: tuple[str, ...] = _REQUIRED) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read(), require)
