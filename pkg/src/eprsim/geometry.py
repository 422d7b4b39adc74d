"""Top-view geometry of the double double-slit and ghost set-ups.

Coordinates: origin at the condensate centre, side A along +y, side B along
-y, slits at ``y = +-L1`` and detectors at ``y = +-(L1 + L2)``, all at z = 0.
Gravity is ignored (top view).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np


class Mode(str, enum.Enum):
    DOUBLE_DOUBLE_SLIT = "dds"
    GHOST = "ghost"


class Weighting(str, enum.Enum):
    UNIFORM = "uniform"
    GAUSSIAN = "gaussian"


@dataclass(frozen=True)
class ExperimentGeometry:
    source_slit_distance: float  # L1
    slit_detector_distance: float  # L2
    slit_separation: float  # d
    drop_height: float = 0.5  # H
    detector_resolution: float = 60e-6  # delta x
    mode: Mode = Mode.DOUBLE_DOUBLE_SLIT
    # finite slit width sensitivity option; 0 means ideal point slits
    slit_width: float = 0.0
    slit_subpoints: int = 1

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode(self.mode))
        for name in ("source_slit_distance", "slit_detector_distance",
                     "slit_separation", "drop_height", "detector_resolution"):
            value = getattr(self, name)
            if not value > 0:
                raise ValueError(f"{name} must be > 0, got {value!r}")
        if self.slit_width < 0:
            raise ValueError("slit_width must be >= 0")
        if self.slit_subpoints < 1:
            raise ValueError("slit_subpoints must be >= 1")

    @property
    def L1(self) -> float:
        return self.source_slit_distance

    @property
    def L2(self) -> float:
        return self.slit_detector_distance

    @property
    def d(self) -> float:
        return self.slit_separation

    @property
    def detector_distance(self) -> float:
        return self.source_slit_distance + self.slit_detector_distance


@dataclass(frozen=True)
class SourceRegion:
    """Box-shaped emission region; a zero extent is a point on that axis.

    ``sigma`` is only used with Gaussian weighting, where it gives the
    per-axis standard deviation inside the box (None falls back to the
    extent / 4).
    """

    extent_x: float
    extent_y: float = 0.0
    extent_z: float = 0.0
    weighting: Weighting = Weighting.UNIFORM
    sigma: tuple[float, float, float] | None = None

    def __post_init__(self):
        object.__setattr__(self, "weighting", Weighting(self.weighting))
        if min(self.extents) < 0:
            raise ValueError("source extents must be >= 0")
        if self.sigma is not None:
            object.__setattr__(self, "sigma", tuple(float(s) for s in self.sigma))
            if len(self.sigma) != 3 or min(self.sigma) <= 0:
                raise ValueError("sigma must be three positive lengths")

    @property
    def extents(self) -> tuple[float, float, float]:
        return (self.extent_x, self.extent_y, self.extent_z)

    def weight(self, points: np.ndarray) -> np.ndarray:
        """Weighting g(r_S) at an (N, 3) array of source points."""
        points = np.asarray(points, dtype=float)
        if self.weighting is Weighting.UNIFORM:
            return np.ones(points.shape[0])
        sigma = self.sigma or tuple(e / 4.0 if e > 0 else 1.0 for e in self.extents)
        z = points / np.asarray(sigma)
        return np.exp(-0.5 * np.sum(z * z, axis=1))


@dataclass(frozen=True)
class PathSet:
    """Total path lengths from one source point to the two detectors.

    ``side_a`` holds one length per slit on side A; ``side_b`` holds one
    length per slit (double double-slit) or the single direct length (ghost).
    """

    side_a: tuple[float, ...]
    side_b: tuple[float, ...]
    mode: Mode


def slit_points(geom: ExperimentGeometry) -> np.ndarray:
    """Slit centres, rows ``a1, a2`` then (dds only) ``b1, b2``."""
    h = geom.d / 2.0
    a = [(h, geom.L1, 0.0), (-h, geom.L1, 0.0)]
    if geom.mode is Mode.GHOST:
        return np.array(a)
    b = [(h, -geom.L1, 0.0), (-h, -geom.L1, 0.0)]
    return np.array(a + b)


def slit_subpoint_offsets(geom: ExperimentGeometry) -> np.ndarray:
    """x offsets of the sub-points used to model a finite slit width."""
    n = geom.slit_subpoints
    if geom.slit_width == 0 or n == 1:
        return np.zeros(1)
    step = geom.slit_width / n
    return -geom.slit_width / 2.0 + step * (np.arange(n) + 0.5)


def detector_point(geom: ExperimentGeometry, side: str, x: float) -> np.ndarray:
    y = geom.detector_distance if side == "A" else -geom.detector_distance
    return np.array([x, y, 0.0])


def _dist(p, q) -> float:
    return math.sqrt(sum((a - b) ** 2 for a, b in zip(p, q)))


def two_segment_length(start, via, end) -> float:
    return _dist(start, via) + _dist(via, end)


def path_lengths(geom: ExperimentGeometry, source_point, x_a: float, x_b: float) -> PathSet:
    """Exact Euclidean path lengths through each slit (no paraxial expansion)."""
    rs = tuple(float(c) for c in source_point)
    ra = detector_point(geom, "A", x_a)
    rb = detector_point(geom, "B", x_b)
    slits = slit_points(geom)
    side_a = tuple(two_segment_length(rs, s, ra) for s in slits[:2])
    if geom.mode is Mode.GHOST:
        side_b = (_dist(rs, rb),)
    else:
        side_b = tuple(two_segment_length(rs, s, rb) for s in slits[2:])
    return PathSet(side_a=side_a, side_b=side_b, mode=geom.mode)


# Vectorized, cancellation-free forms used by the engine.  A segment of
# axial length ``dy`` and transverse offset squared ``t2`` has length
# ``dy + t2 / (sqrt(t2 + dy^2) + dy)``; only the second term ("excess") carries
# information once the axial parts are collected, and it is small, so it is
# kept at full relative precision.

def segment_excess(t2: np.ndarray, dy) -> np.ndarray:
    return t2 / (np.sqrt(t2 + dy * dy) + dy)


def side_excess(geom: ExperimentGeometry, side: str, slit_x: float,
                source: np.ndarray, x_det: np.ndarray) -> np.ndarray:
    """Path excess through one slit, shape (n_source, n_det).

    The full length is ``L1 + L2 -+ y_S + excess`` (minus on side A, plus on
    side B); the ``y_S`` parts of the two sides cancel in the pair phase.
    """
    xs, ys, zs = source[:, 0:1], source[:, 1:2], source[:, 2:3]
    dy1 = geom.L1 - ys if side == "A" else geom.L1 + ys
    e1 = segment_excess((slit_x - xs) ** 2 + zs * zs, dy1)
    e2 = segment_excess((x_det[None, :] - slit_x) ** 2, geom.L2)
    return e1 + e2


def direct_excess(geom: ExperimentGeometry, source: np.ndarray, x_det: np.ndarray) -> np.ndarray:
    """Excess of the direct source -> side-B detector path (ghost mode)."""
    xs, ys, zs = source[:, 0:1], source[:, 1:2], source[:, 2:3]
    dy = geom.detector_distance + ys
    return segment_excess((x_det[None, :] - xs) ** 2 + zs * zs, dy)
