"""Two-particle amplitudes and their coherent integration over the source.

For every source point the pair amplitude is a sum of path terms
``exp(i k (L_a + L_b))``.  It factorizes into a side-A sum times a side-B
sum, so the source integral over a detector grid is a single complex
matrix product ``alpha.T @ (g * beta)`` accumulated block by block.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .geometry import (
    ExperimentGeometry,
    Mode,
    PathSet,
    SourceRegion,
    direct_excess,
    side_excess,
    slit_points,
    slit_subpoint_offsets,
)

# Source samples per accumulation block.  Fixed so that the reduction order,
# and therefore every bit of the result, does not depend on the worker count.
BLOCK_SIZE = 256


class SamplingError(ValueError):
    """A source step is too coarse for the oscillating integrand."""

    def __init__(self, axis: str, step: float, required: float):
        self.axis = axis
        self.step = step
        self.required = required
        super().__init__(
            f"source step on axis {axis} is {step:.4g} m; phase-Nyquist rule "
            f"requires step <= {required:.4g} m"
        )


class ConvergenceError(RuntimeError):
    pass


class GridMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class GridSpec:
    """Detector window: ``n`` pixels spanning ``[-half_width, +half_width]`` per side."""

    half_width_a: float = 1e-3
    n_a: int = 201
    half_width_b: float | None = None
    n_b: int | None = None

    def __post_init__(self):
        if self.half_width_b is None:
            object.__setattr__(self, "half_width_b", self.half_width_a)
        if self.n_b is None:
            object.__setattr__(self, "n_b", self.n_a)
        if self.half_width_a <= 0 or self.half_width_b <= 0:
            raise ValueError("detector window must be > 0")
        if self.n_a < 1 or self.n_b < 1:
            raise ValueError("pixel counts must be >= 1")

    def axes(self) -> tuple[np.ndarray, np.ndarray]:
        return (_axis(self.half_width_a, self.n_a), _axis(self.half_width_b, self.n_b))

    @property
    def x_max(self) -> float:
        return max(self.half_width_a, self.half_width_b)


def _axis(half_width: float, n: int) -> np.ndarray:
    if n == 1:
        return np.zeros(1)
    return np.linspace(-half_width, half_width, n)


@dataclass(frozen=True)
class SourceSampling:
    """Midpoint-rule sample set over a :class:`SourceRegion`."""

    steps: tuple[float, float, float]
    counts: tuple[int, int, int]
    points: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)
    source: SourceRegion | None = field(default=None, repr=False)

    @property
    def total(self) -> int:
        return int(self.points.shape[0])


@dataclass
class TwoParticlePattern:
    x_a: np.ndarray
    x_b: np.ndarray
    values: np.ndarray  # values[i, j] = P(x_a[i], x_b[j])
    mode: Mode
    normalized: bool = False
    geometry: ExperimentGeometry | None = None
    source: SourceRegion | None = None
    sampling_steps: tuple[float, float, float] | None = None
    sampling_counts: tuple[int, int, int] | None = None

    @property
    def pitch_a(self) -> float:
        return float(self.x_a[1] - self.x_a[0]) if self.x_a.size > 1 else 0.0

    @property
    def pitch_b(self) -> float:
        return float(self.x_b[1] - self.x_b[0]) if self.x_b.size > 1 else 0.0

    def normalize(self) -> "TwoParticlePattern":
        """Copy scaled so that sum(P) * dx_A * dx_B == 1."""
        da = self.pitch_a or 1.0
        db = self.pitch_b or 1.0
        total = self.values.sum() * da * db
        if total <= 0:
            raise ValueError("cannot normalize an all-zero pattern")
        return TwoParticlePattern(
            self.x_a, self.x_b, self.values / total, self.mode, True,
            self.geometry, self.source, self.sampling_steps, self.sampling_counts,
        )

    def peak_normalized(self) -> np.ndarray:
        peak = self.values.max()
        return self.values / peak if peak > 0 else self.values.copy()


# -- point-source amplitudes -------------------------------------------------

def _phasors(lengths, k: float, ref: float) -> np.ndarray:
    # Lengths are referenced to a common value before multiplying by k; the
    # dropped factor exp(i k ref) is a global phase.
    return np.exp(1j * k * (np.asarray(lengths, dtype=float) - ref))


def point_amplitude_dds(paths: PathSet, wavelength: float) -> complex:
    """Sum of the four equal-weight path-pair terms."""
    if len(paths.side_a) != 2 or len(paths.side_b) != 2:
        raise ValueError("double double-slit amplitude needs two paths per side")
    k = 2.0 * math.pi / wavelength
    ref_a, ref_b = min(paths.side_a), min(paths.side_b)
    total = 0j
    for la in paths.side_a:
        for lb in paths.side_b:
            total += complex(np.exp(1j * k * ((la - ref_a) + (lb - ref_b))))
    return total


def point_amplitude_dds_factorized(paths: PathSet, wavelength: float) -> complex:
    k = 2.0 * math.pi / wavelength
    a = _phasors(paths.side_a, k, min(paths.side_a)).sum()
    b = _phasors(paths.side_b, k, min(paths.side_b)).sum()
    return complex(a * b)


def point_amplitude_ghost(paths: PathSet, wavelength: float) -> complex:
    """Two-term amplitude: only particle A passes a double slit."""
    if len(paths.side_a) != 2 or len(paths.side_b) != 1:
        raise ValueError("ghost amplitude needs two A paths and one B path")
    k = 2.0 * math.pi / wavelength
    # L_b enters as a global phase only, so it drops out of the reference
    return complex(_phasors(paths.side_a, k, min(paths.side_a)).sum())


def point_amplitude(paths: PathSet, wavelength: float) -> complex:
    if paths.mode is Mode.GHOST:
        return point_amplitude_ghost(paths, wavelength)
    return point_amplitude_dds(paths, wavelength)


# -- sampling ------------------------------------------------------------------

def phase_gradient_bound(geom: ExperimentGeometry, grid: GridSpec,
                         source: SourceRegion | None = None) -> float:
    """Conservative bound on |d(pair path)/d(source coordinate)|."""
    x_max = grid.x_max
    if source is not None:
        x_max = max(x_max, 0.5 * max(source.extents))
    slit_side = (geom.d + x_max) / geom.L1 + (geom.d + x_max) / geom.L2
    if geom.mode is Mode.GHOST:
        return slit_side + (geom.d + x_max) / geom.detector_distance
    return 2.0 * slit_side


def required_step(geom: ExperimentGeometry, grid: GridSpec, wavelength: float,
                  source: SourceRegion | None = None) -> float:
    """Largest source step keeping the phase increment per step <= pi/4."""
    return wavelength / (8.0 * phase_gradient_bound(geom, grid, source))


def _midpoints(extent: float, n: int) -> np.ndarray:
    if extent == 0:
        return np.zeros(1)
    step = extent / n
    return -extent / 2.0 + step * (np.arange(n) + 0.5)


def sample_source(source: SourceRegion, counts) -> SourceSampling:
    counts = tuple(1 if e == 0 else int(c) for e, c in zip(source.extents, counts))
    if min(counts) < 1:
        raise ValueError("sample counts must be >= 1")
    axes = [_midpoints(e, n) for e, n in zip(source.extents, counts)]
    steps = tuple(e / n for e, n in zip(source.extents, counts))
    # row-major: x slowest, z fastest
    gx, gy, gz = np.meshgrid(*axes, indexing="ij")
    points = np.column_stack([gx.ravel(), gy.ravel(), gz.ravel()])
    return SourceSampling(steps, counts, points, source.weight(points), source)


def refine_sampling(sampling: SourceSampling, factor: int = 2) -> SourceSampling:
    """Same region with every sampled axis split ``factor`` times finer."""
    counts = [c * factor if s > 0 else 1 for c, s in zip(sampling.counts, sampling.steps)]
    return sample_source(sampling.source, counts)


def auto_sampling(geom: ExperimentGeometry, source: SourceRegion, grid: GridSpec,
                  wavelength: float, refine: int = 1, integrate_z: bool = False) -> SourceSampling:
    """Coarsest sampling satisfying the phase rule, optionally refined ``refine`` times.

    The default integrates in the x-y plane only (z_S = 0); pass
    ``integrate_z=True`` to sample the z extent as well.
    """
    h = required_step(geom, grid, wavelength, source)
    extents = list(source.extents)
    if not integrate_z:
        extents[2] = 0.0
        source = SourceRegion(extents[0], extents[1], 0.0, source.weighting, source.sigma)
    counts = [max(1, math.ceil(e / h - 1e-9)) * refine if e > 0 else 1 for e in extents]
    return sample_source(source, counts)


def check_sampling(sampling: SourceSampling, geom: ExperimentGeometry, grid: GridSpec,
                   wavelength: float, source: SourceRegion | None = None) -> None:
    required = required_step(geom, grid, wavelength, source)
    for axis, step in zip("xyz", sampling.steps):
        if step > required * (1 + 1e-12):
            raise SamplingError(axis, step, required)


# -- integration -------------------------------------------------------------

def _side_sum(geom, side, slit_xs, offsets, pts, x_det, k, exact_prefactor):
    total = np.zeros((pts.shape[0], x_det.size), dtype=complex)
    n_sub = offsets.size
    for cx in slit_xs:
        for off in offsets:
            sx = cx + off
            excess = side_excess(geom, side, sx, pts, x_det)
            term = np.exp(1j * k * excess)
            if exact_prefactor:
                ys = pts[:, 1:2]
                dy1 = geom.L1 - ys if side == "A" else geom.L1 + ys
                r1 = np.sqrt((sx - pts[:, 0:1]) ** 2 + pts[:, 2:3] ** 2 + dy1 ** 2)
                r2 = np.sqrt((x_det[None, :] - sx) ** 2 + geom.L2 ** 2)
                term = term * (geom.L1 * geom.L2 / (r1 * r2))
            total += term
    return total / n_sub if n_sub > 1 else total


def _block_amplitude(geom, pts, weights, x_a, x_b, k, exact_prefactor):
    slits = slit_points(geom)
    offsets = slit_subpoint_offsets(geom)
    alpha = _side_sum(geom, "A", slits[:2, 0], offsets, pts, x_a, k, exact_prefactor)
    if geom.mode is Mode.GHOST:
        excess = direct_excess(geom, pts, x_b)
        beta = np.exp(1j * k * excess)
        if exact_prefactor:
            r = np.sqrt((x_b[None, :] - pts[:, 0:1]) ** 2 + pts[:, 2:3] ** 2
                        + (geom.detector_distance + pts[:, 1:2]) ** 2)
            beta = beta * (geom.detector_distance / r)
    else:
        beta = _side_sum(geom, "B", slits[2:, 0], offsets, pts, x_b, k, exact_prefactor)
    return alpha.T @ (weights[:, None] * beta)


def integrate_source(geom: ExperimentGeometry, source: SourceRegion, grid: GridSpec,
                     wavelength: float, sampling: SourceSampling | None = None,
                     workers: int = 1, exact_prefactor: bool = False,
                     normalize: bool = False) -> TwoParticlePattern:
    """Coherently sum the pair amplitude over the source, then take |.|^2.

    The amplitude is the weighted mean over source samples, so a point
    source reproduces :func:`point_amplitude` exactly.
    """
    if sampling is None:
        sampling = auto_sampling(geom, source, grid, wavelength)
    else:
        check_sampling(sampling, geom, grid, wavelength, source)
    x_a, x_b = grid.axes()
    k = 2.0 * math.pi / wavelength
    pts, w = sampling.points, sampling.weights
    bounds = [(s, min(s + BLOCK_SIZE, sampling.total)) for s in range(0, sampling.total, BLOCK_SIZE)]

    def run(bound):
        lo, hi = bound
        return _block_amplitude(geom, pts[lo:hi], w[lo:hi], x_a, x_b, k, exact_prefactor)

    amp = np.zeros((x_a.size, x_b.size), dtype=complex)
    if workers > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            # map preserves order: reduction is the same as the serial loop
            for partial in pool.map(run, bounds):
                amp += partial
    else:
        for bound in bounds:
            amp += run(bound)
    amp /= w.sum()
    pattern = TwoParticlePattern(
        x_a, x_b, np.abs(amp) ** 2, geom.mode, False, geom, source,
        sampling.steps, sampling.counts,
    )
    return pattern.normalize() if normalize else pattern


def convergence_check(coarse: TwoParticlePattern, fine: TwoParticlePattern) -> float:
    """Max-norm deviation of two peak-normalized patterns on the same grid."""
    if (coarse.values.shape != fine.values.shape
            or not np.array_equal(coarse.x_a, fine.x_a)
            or not np.array_equal(coarse.x_b, fine.x_b)):
        raise GridMismatchError("patterns are on different detector grids")
    return float(np.max(np.abs(coarse.peak_normalized() - fine.peak_normalized())))


@dataclass
class ConvergedPattern:
    pattern: TwoParticlePattern
    deviation: float
    coarse_counts: tuple[int, int, int]


def integrate_converged(geom: ExperimentGeometry, source: SourceRegion, grid: GridSpec,
                        wavelength: float, tolerance: float = 1e-3, workers: int = 1,
                        integrate_z: bool = False, exact_prefactor: bool = False,
                        sampling: SourceSampling | None = None) -> ConvergedPattern:
    """Run at step h and h/2; the refined pattern is returned if they agree.

    Raises :class:`ConvergenceError` when the halving deviation exceeds
    ``tolerance``.
    """
    if sampling is None:
        coarse_s = auto_sampling(geom, source, grid, wavelength, integrate_z=integrate_z)
    else:
        coarse_s = sampling
    fine_s = refine_sampling(coarse_s)
    coarse = integrate_source(geom, source, grid, wavelength, coarse_s, workers, exact_prefactor)
    fine = integrate_source(geom, source, grid, wavelength, fine_s, workers, exact_prefactor)
    dev = convergence_check(coarse, fine)
    if dev > tolerance:
        raise ConvergenceError(
            f"quadrature halving deviation {dev:.3g} exceeds tolerance {tolerance:.3g}"
        )
    return ConvergedPattern(fine, dev, coarse_s.counts)
