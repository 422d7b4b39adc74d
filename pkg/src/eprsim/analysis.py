"""Observables of a two-particle pattern: slices, fringe fits, visibilities.

Visibilities are always taken from a fitted ``A cos^2(pi (x - x0) / p) + B``
model rather than raw grid extrema.
"""

from __future__ import annotations

import enum
import logging
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import uniform_filter1d
from scipy.optimize import OptimizeWarning, curve_fit

from .engine import TwoParticlePattern
from .feasibility import fringe_distances
from .geometry import ExperimentGeometry, Mode
from .kinematics import BeamParameters

log = logging.getLogger(__name__)

CLASSICAL_VISIBILITY_BOUND = 0.5
FACTORIZABLE_FRACTION = 0.95


class Correlation(str, enum.Enum):
    NONE = "none"
    DIAGONAL = "diagonal"
    ANTI_DIAGONAL = "anti-diagonal"


@dataclass
class FringeFit:
    period: float
    offset: float
    visibility: float
    residual: float  # rms of the fit residual as a fraction of the profile peak
    amplitude: float = 0.0
    background: float = 0.0
    converged: bool = True

    def model(self, x):
        return cos2_model(np.asarray(x, dtype=float), self.amplitude, self.offset,
                          self.period, self.background)

    def nearest_maximum(self, x: float) -> float:
        n = round((x - self.offset) / self.period)
        return self.offset + n * self.period


@dataclass
class CorrelationDiagnosis:
    correlation: Correlation
    rank1_fraction: float


def cos2_model(x, amplitude, offset, period, background):
    return amplitude * np.cos(np.pi * (x - offset) / period) ** 2 + background


# -- slices -------------------------------------------------------------------

def _index(axis: np.ndarray, position: float) -> int:
    pitch = axis[1] - axis[0] if axis.size > 1 else 0.0
    lo, hi = axis[0] - pitch / 2, axis[-1] + pitch / 2
    if not lo <= position <= hi:
        raise IndexError(f"position {position:.4g} m outside window [{axis[0]:.4g}, {axis[-1]:.4g}] m")
    return int(np.argmin(np.abs(axis - position)))


def conditional_slice(pattern: TwoParticlePattern, side: str, position: float):
    """Profile on the other side given a detection at ``position`` on ``side``.

    Returns ``(x, profile)`` on the opposite side's axis; nearest pixel.
    """
    if side == "A":
        return pattern.x_b, pattern.values[_index(pattern.x_a, position), :].copy()
    if side == "B":
        return pattern.x_a, pattern.values[:, _index(pattern.x_b, position)].copy()
    raise ValueError(f"side must be 'A' or 'B', got {side!r}")


# -- fringe fitting -----------------------------------------------------------

def _normalize_params(a, x0, p, b):
    if a < 0:  # A cos^2 + B == -A cos^2(. - p/2) + (A + B)
        a, x0, b = -a, x0 + p / 2, b + a
    x0 = (x0 + p / 2) % p - p / 2
    return a, x0, p, b


def _visibility(a: float, b: float) -> float:
    lo, hi = b, a + b
    if hi <= 0:
        return 0.0
    return float(min(1.0, max(0.0, (hi - max(lo, 0.0)) / (hi + max(lo, 0.0)))))


def fit_fringes(x, y, period_hint: float) -> FringeFit:
    """Least-squares fit of ``A cos^2(pi (x - x0) / p) + B``.

    A linear fit at the hinted period seeds the nonlinear fit over all four
    parameters.  A non-converged fit is returned flagged, not raised.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if period_hint <= 0:
        raise ValueError("period hint must be > 0")
    span = x[-1] - x[0]
    if span < 2 * period_hint * (1 - 1e-9):
        raise ValueError(f"profile spans {span:.4g} m, less than two periods of {period_hint:.4g} m")
    peak = float(np.max(np.abs(y))) or 1.0
    ys = y / peak

    w = 2 * np.pi / period_hint
    design = np.column_stack([np.ones_like(x), np.cos(w * x), np.sin(w * x)])
    (c0, c1, c2), *_ = np.linalg.lstsq(design, ys, rcond=None)
    # c0 + c1 cos + c2 sin == A/2 cos(w (x - x0)) + B + A/2
    half_a = math.hypot(c1, c2)
    seed = (2 * half_a, math.atan2(c2, c1) / w, period_hint, c0 - half_a)

    converged = True
    try:
        with warnings.catch_warnings():
            # covariance is not used; a singular one is not a fit failure
            warnings.simplefilter("ignore", OptimizeWarning)
            params, _ = curve_fit(cos2_model, x, ys, p0=seed, maxfev=5000)
        if not np.all(np.isfinite(params)) or params[2] <= 0:
            raise RuntimeError("non-physical fit")
    except (RuntimeError, ValueError) as exc:
        log.warning("fringe fit did not converge: %s", exc)
        params, converged = np.array(seed), False
    a, x0, p, b = _normalize_params(*params)
    resid = ys - cos2_model(x, a, x0, p, b)
    rms = float(np.sqrt(np.mean(resid ** 2)) / max(np.max(ys), 1e-300))
    return FringeFit(period=float(p), offset=float(x0), visibility=_visibility(a, b),
                     residual=rms, amplitude=float(a * peak), background=float(b * peak),
                     converged=converged)


# -- visibilities -------------------------------------------------------------

def _central(pattern: TwoParticlePattern, fraction: float):
    ia = np.abs(pattern.x_a) <= fraction * np.max(np.abs(pattern.x_a)) + 1e-15
    ib = np.abs(pattern.x_b) <= fraction * np.max(np.abs(pattern.x_b)) + 1e-15
    return pattern.x_a[ia], pattern.x_b[ib], pattern.values[np.ix_(ia, ib)]


def corrected_pattern(values: np.ndarray) -> np.ndarray:
    """Joint pattern minus the product of its marginals, plus its mean.

    An exactly factorizable pattern becomes constant, so only the genuinely
    two-particle part keeps any fringe contrast.
    """
    total = values.sum()
    if total == 0:
        return values.copy()
    ma, mb = values.sum(axis=1), values.sum(axis=0)
    return values - np.outer(ma, mb) / total + values.mean()


def correlated_profile(pattern: TwoParticlePattern, slope: float = -1.0,
                       central_fraction: float = 0.5, corrected: bool = False):
    """Average P over lines of constant ``u = x_A + slope * x_B``.

    Uses the central ``central_fraction`` of the window on both sides and
    bins ``u`` at the side-A pixel pitch.  Returns ``(u, mean profile)``.
    """
    xa, xb, vals = _central(pattern, central_fraction)
    if corrected:
        vals = corrected_pattern(vals)
    u = xa[:, None] + slope * xb[None, :]
    pitch = pattern.pitch_a or 1.0
    half = central_fraction * np.max(np.abs(pattern.x_a))
    bins = np.rint(u / pitch).astype(int)
    keep = np.abs(bins * pitch) <= half + 1e-15
    b = bins[keep] - bins[keep].min()
    sums = np.bincount(b, weights=vals[keep])
    counts = np.bincount(b)
    ok = counts > 0
    centers = (np.arange(b.max() + 1) + bins[keep].min()) * pitch
    return centers[ok], sums[ok] / counts[ok]


def _default_geometry(pattern: TwoParticlePattern) -> ExperimentGeometry:
    if pattern.geometry is None:
        raise ValueError("pattern has no geometry; pass period/slope explicitly")
    return pattern.geometry


def correlation_axis(pattern: TwoParticlePattern, beam: BeamParameters | None = None):
    """Slope and u-period of the correlated coordinate for the pattern's mode.

    Double double-slit: ``u = x_A - x_B`` with period ``d_f``.  Ghost:
    ``u = x_A + (d_f^A / d_f^B) x_B`` with period ``d_f^A``, the line along
    which the phase of the anti-diagonal fringes is constant.
    """
    fr = fringe_distances(_default_geometry(pattern), beam)
    if pattern.mode is Mode.GHOST:
        return fr.ghost_a / fr.ghost_b, fr.ghost_a
    return -1.0, fr.dds


def two_particle_visibility(pattern: TwoParticlePattern, slope: float | None = None,
                            period: float | None = None, central_fraction: float | None = None,
                            corrected: bool = False, beam: BeamParameters | None = None) -> float:
    """Fitted visibility of the pattern projected onto the correlated coordinate.

    With ``corrected=True`` the product of the marginals is removed first
    (genuine two-particle visibility); an exactly factorizable pattern then
    scores 0, whereas the plain projection of a cos^2 x cos^2 product scores
    1/2.
    """
    if slope is None or period is None:
        s, p = correlation_axis(pattern, beam)
        slope = s if slope is None else slope
        period = p if period is None else period
    if central_fraction is None:
        central_fraction = 0.8 if pattern.mode is Mode.GHOST else 0.5
    u, prof = correlated_profile(pattern, slope, central_fraction, corrected)
    if np.ptp(prof) <= 1e-14 * max(np.max(np.abs(prof)), 1e-300):
        return 0.0
    return fit_fringes(u, prof, period).visibility


def marginal(pattern: TwoParticlePattern, side: str):
    if side == "A":
        return pattern.x_a, pattern.values.sum(axis=1)
    if side == "B":
        return pattern.x_b, pattern.values.sum(axis=0)
    raise ValueError(f"side must be 'A' or 'B', got {side!r}")


def marginal_visibility(pattern: TwoParticlePattern, side: str, period: float | None = None,
                        beam: BeamParameters | None = None) -> float:
    """Single-particle fringe visibility of one side's marginal distribution."""
    x, m = marginal(pattern, side)
    if period is None:
        fr = fringe_distances(_default_geometry(pattern), beam)
        period = fr.ghost_b if (pattern.mode is Mode.GHOST and side == "B") else fr.dds
    if np.ptp(m) <= 1e-14 * max(np.max(np.abs(m)), 1e-300):
        return 0.0
    return fit_fringes(x, m, period).visibility


def rank1_fraction(values: np.ndarray) -> float:
    s = np.linalg.svd(np.asarray(values, dtype=float), compute_uv=False)
    energy = float(np.sum(s * s))
    return float(s[0] ** 2 / energy) if energy > 0 else 1.0


def factorizability(pattern: TwoParticlePattern, threshold: float = FACTORIZABLE_FRACTION) -> CorrelationDiagnosis:
    """Rank-1 energy fraction and the orientation of the non-factorizable part.

    The orientation comes from the strongest 2-D Fourier component of the
    corrected pattern: opposite-sign spatial frequencies on the two axes mean
    fringes of constant ``x_A - x_B`` (diagonal), equal signs anti-diagonal.
    """
    frac = rank1_fraction(pattern.values)
    if frac >= threshold:
        return CorrelationDiagnosis(Correlation.NONE, frac)
    resid = corrected_pattern(pattern.values)
    resid = resid - resid.mean()
    spec = np.abs(np.fft.fft2(resid))
    fa = np.fft.fftfreq(resid.shape[0])
    fb = np.fft.fftfreq(resid.shape[1])
    # ignore the pure single-axis components
    spec[0, :] = 0
    spec[:, 0] = 0
    i, j = np.unravel_index(np.argmax(spec), spec.shape)
    kind = Correlation.DIAGONAL if fa[i] * fb[j] < 0 else Correlation.ANTI_DIAGONAL
    return CorrelationDiagnosis(kind, frac)


def conditional_maximum(pattern: TwoParticlePattern, side: str, position: float,
                        expected: float, period: float) -> float:
    """Fitted fringe maximum of a conditional slice nearest to ``expected``."""
    x, prof = conditional_slice(pattern, side, position)
    return fit_fringes(x, prof, period).nearest_maximum(expected)


# -- references and detector model -------------------------------------------

def analytic_reference(mode: Mode, regime: str, geom: ExperimentGeometry, x_a, x_b,
                       beam: BeamParameters | None = None) -> TwoParticlePattern:
    """Closed-form limiting patterns with unit peak.

    ``regime`` is ``product``, ``diagonal`` or ``anti-diagonal``.  For ghost
    geometry the anti-diagonal form uses the side-specific fringe distances;
    the product form has a flat side B (no slit there).
    """
    mode = Mode(mode)
    fr = fringe_distances(geom, beam)
    xa = np.asarray(x_a, dtype=float)[:, None]
    xb = np.asarray(x_b, dtype=float)[None, :]
    cos2 = lambda arg: np.cos(np.pi * arg) ** 2  # noqa: E731
    if regime == "product":
        if mode is Mode.GHOST:
            vals = cos2(xa / fr.ghost_a) * np.ones_like(xb)
        else:
            vals = cos2(xa / fr.dds) * cos2(xb / fr.dds)
    elif regime == "diagonal":
        vals = cos2((xa - xb) / fr.dds)
    elif regime == "anti-diagonal":
        if mode is Mode.GHOST:
            vals = cos2(xa / fr.ghost_a + xb / fr.ghost_b)
        else:
            vals = cos2((xa + xb) / fr.dds)
    else:
        raise ValueError(f"unknown regime {regime!r}")
    return TwoParticlePattern(np.asarray(x_a, dtype=float), np.asarray(x_b, dtype=float),
                              vals, mode, False, geom)


def overlap(p: np.ndarray, q: np.ndarray) -> float:
    """Normalized inner product <p, q> / (|p| |q|)."""
    p = np.asarray(p, dtype=float).ravel()
    q = np.asarray(q, dtype=float).ravel()
    return float(p @ q / (np.linalg.norm(p) * np.linalg.norm(q)))


def convolve_detector(pattern: TwoParticlePattern, resolution: float) -> TwoParticlePattern:
    """Separable box filter of width ``resolution`` on both detector axes."""
    out = pattern.values
    for axis, pitch in ((0, pattern.pitch_a), (1, pattern.pitch_b)):
        if pitch == 0 or resolution < pitch * (1 - 1e-9):
            warnings.warn(f"detector resolution {resolution:.3g} m is below the pixel pitch "
                          f"{pitch:.3g} m; axis {axis} left unfiltered", stacklevel=2)
            continue
        width = max(1, int(round(resolution / pitch)))
        if width > 1:
            out = uniform_filter1d(out, size=width, axis=axis, mode="nearest")
    if out is not pattern.values:
        total = pattern.values.sum()
        out = out * (total / out.sum()) if out.sum() > 0 else out
    else:
        out = out.copy()
    return TwoParticlePattern(pattern.x_a, pattern.x_b, out, pattern.mode, pattern.normalized,
                              pattern.geometry, pattern.source, pattern.sampling_steps,
                              pattern.sampling_counts)


def summarize(pattern: TwoParticlePattern, geom: ExperimentGeometry | None = None,
              beam: BeamParameters | None = None) -> dict:
    """All standard observables as a JSON-ready dict.

    Visibility figures are computed here; there are no reference values to
    compare them against, and the report says so.
    """
    if geom is not None and pattern.geometry is None:
        pattern.geometry = geom
    geom = _default_geometry(pattern)
    fr = fringe_distances(geom, beam)
    period_b = fr.ghost_b if pattern.mode is Mode.GHOST else fr.dds

    def fit(side, hint):
        try:
            x, prof = conditional_slice(pattern, side, 0.0)
            f = fit_fringes(x, prof, hint)
        except (ValueError, IndexError) as exc:
            return {"error": str(exc)}
        return {"period": f.period, "offset": f.offset, "visibility": f.visibility,
                "residual": f.residual, "converged": f.converged}

    def guarded(fn, *args, **kw):
        try:
            return fn(*args, **kw)
        except ValueError as exc:
            log.warning("%s failed: %s", fn.__name__, exc)
            return None

    v_raw = guarded(two_particle_visibility, pattern, beam=beam)
    v_gen = guarded(two_particle_visibility, pattern, corrected=True, beam=beam)
    diag = factorizability(pattern)
    slope, _ = correlation_axis(pattern, beam)
    return {
        "mode": pattern.mode.value,
        "fringe_distances": {"d_f": fr.dds, "d_f_A": fr.ghost_a, "d_f_B": fr.ghost_b},
        "slice_A0_fit": fit("A", period_b),
        "slice_B0_fit": fit("B", fr.dds),
        "marginal_visibility": {"A": guarded(marginal_visibility, pattern, "A", beam=beam),
                                "B": guarded(marginal_visibility, pattern, "B", beam=beam)},
        "two_particle_visibility": {"correlated_coordinate": f"x_A + ({slope:.6g}) x_B",
                                    "raw": v_raw, "genuine": v_gen},
        "above_classical_bound": None if v_raw is None else bool(v_raw > CLASSICAL_VISIBILITY_BOUND),
        "factorizability": {"rank1_fraction": diag.rank1_fraction,
                            "correlation": diag.correlation.value},
        "visibility_provenance": "computed by this tool (regression values, no external reference)",
    }
