"""Design conditions for the two-particle interference experiment.

Three requirements are checked: the source is large enough for momentum
correlation (I), fringes are resolvable by the detector (II) and, for the
double double-slit only, the source is small compared to the slit
separation (III).  Much-less-than comparisons are graded by margin ratio.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

from .geometry import ExperimentGeometry, Mode, SourceRegion
from .kinematics import BeamParameters, momentum_spread_fraction

PASS_MARGIN = 5.0
MARGINAL_MARGIN = 1.5
PIXELS_PER_FRINGE = 5

PASS, MARGINAL, FAIL, NOT_APPLICABLE = "pass", "marginal", "fail", "n/a"
_ORDER = {PASS: 0, MARGINAL: 1, FAIL: 2}


def grade_much_less(margin: float) -> str:
    if margin >= PASS_MARGIN:
        return PASS
    if margin >= MARGINAL_MARGIN:
        return MARGINAL
    return FAIL


@dataclass
class ConditionEntry:
    name: str
    lhs: float
    comparator: str
    rhs: float
    margin: float | None  # rhs / lhs; None when not applicable
    verdict: str
    quantity: str = ""
    note: str = ""
    bound: float | None = None  # condition II: largest admissible d


@dataclass
class FringeDistances:
    dds: float  # lambda L2 / d, also ghost side A
    ghost_a: float
    ghost_b: float  # lambda (2 L1 + L2) / d


@dataclass
class FeasibilityReport:
    mode: Mode
    entries: list[ConditionEntry]
    fringes: FringeDistances
    verdict: str
    inputs: dict = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)

    def entry(self, name: str) -> ConditionEntry:
        for e in self.entries:
            if e.name == name:
                return e
        raise KeyError(name)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["mode"] = self.mode.value
        return out


def fringe_distances(geom: ExperimentGeometry, beam: BeamParameters | None = None) -> FringeDistances:
    lam = (beam or BeamParameters()).de_broglie_wavelength
    df = lam * geom.L2 / geom.d
    return FringeDistances(dds=df, ghost_a=df, ghost_b=lam * (2 * geom.L1 + geom.L2) / geom.d)


def condition_I(geom: ExperimentGeometry, source: SourceRegion,
                beam: BeamParameters | None = None) -> ConditionEntry:
    """Momentum spread dp/p must be much smaller than the slit angle d / L1.

    Reported in source-size form: ``S_x >> (dp/p * S_x) * L1 / d``.
    """
    beam = beam or BeamParameters()
    spread_times_size = momentum_spread_fraction(1.0, beam.de_broglie_wavelength)
    threshold = spread_times_size * geom.L1 / geom.d
    sx = source.extent_x
    margin = sx / threshold if sx > 0 else 0.0
    return ConditionEntry("I", threshold, "<<", sx, margin, grade_much_less(margin),
                          quantity="S_x threshold [m] << S_x [m]")


def condition_II(geom: ExperimentGeometry, beam: BeamParameters | None = None) -> ConditionEntry:
    """Fringe distance must exceed five detector pixels (strict)."""
    beam = beam or BeamParameters()
    df = fringe_distances(geom, beam).dds
    need = PIXELS_PER_FRINGE * geom.detector_resolution
    margin = df / need
    d_max = slit_separation_bound(geom, beam)
    if df > need:
        verdict, note = PASS, ""
    else:
        verdict = FAIL
        note = (f"marginal-fail: a fringe spans only {df / geom.detector_resolution:.1f} "
                f"pixels; needs d < {d_max:.4g} m")
    return ConditionEntry("II", need, "<", df, margin, verdict,
                          quantity="5 dx [m] < d_f [m]", note=note, bound=d_max)


def slit_separation_bound(geom: ExperimentGeometry, beam: BeamParameters | None = None) -> float:
    """Upper bound on d from condition II: ``lambda L2 / (5 dx)``."""
    beam = beam or BeamParameters()
    return beam.de_broglie_wavelength * geom.L2 / (PIXELS_PER_FRINGE * geom.detector_resolution)


def condition_III(geom: ExperimentGeometry, source: SourceRegion) -> ConditionEntry:
    """Source small compared to slit separation; irrelevant for ghost imaging."""
    sx = source.extent_x
    if geom.mode is Mode.GHOST:
        return ConditionEntry("III", sx, "<<", geom.d, None, NOT_APPLICABLE,
                              quantity="S_x [m] << d [m]",
                              note="only one double slit: no second two-particle pattern to wash out")
    margin = geom.d / sx if sx > 0 else math.inf
    return ConditionEntry("III", sx, "<<", geom.d, margin, grade_much_less(margin),
                          quantity="S_x [m] << d [m]")


def evaluate_chain(geom: ExperimentGeometry, source: SourceRegion,
                   beam: BeamParameters | None = None) -> FeasibilityReport:
    beam = beam or BeamParameters()
    entries = [condition_I(geom, source, beam), condition_II(geom, beam), condition_III(geom, source)]
    # condition II being just missed (within the marginal band) downgrades to
    # marginal rather than fail: the detector still resolves ~4-5 pixels
    scored = []
    for e in entries:
        if e.verdict == NOT_APPLICABLE:
            continue
        if e.name == "II" and e.verdict == FAIL:
            scored.append(MARGINAL if e.margin * PASS_MARGIN >= 4.0 else FAIL)
        else:
            scored.append(e.verdict)
    overall = max(scored, key=_ORDER.__getitem__) if scored else PASS
    fr = fringe_distances(geom, beam)
    notes = []
    if geom.mode is Mode.GHOST:
        d_max_a = slit_separation_bound(geom, beam)
        d_max_b = beam.de_broglie_wavelength * (2 * geom.L1 + geom.L2) / (
            PIXELS_PER_FRINGE * geom.detector_resolution)
        notes.append(
            f"candidate slit-separation bounds from condition II: {d_max_a:.4g} m (side A fringe), "
            f"{d_max_b:.4g} m (side B fringe)"
        )
    inputs = {
        "mode": geom.mode.value, "L1": geom.L1, "L2": geom.L2, "d": geom.d,
        "detector_resolution": geom.detector_resolution, "S_x": source.extent_x,
        "de_broglie_wavelength": beam.de_broglie_wavelength,
    }
    return FeasibilityReport(geom.mode, entries, fr, overall, inputs, notes)


def format_report(report: FeasibilityReport) -> str:
    """Human-readable chain table, lengths in micrometres."""
    um = 1e6
    lines = [f"feasibility ({report.mode.value})",
             f"{'cond':<5}{'lhs [um]':>12}  {'cmp':<3}{'rhs [um]':>12}{'margin':>9}  verdict"]
    for e in report.entries:
        margin = "-" if e.margin is None else f"{e.margin:.2f}"
        lines.append(f"{e.name:<5}{e.lhs * um:>12.2f}  {e.comparator:<3}{e.rhs * um:>12.2f}"
                     f"{margin:>9}  {e.verdict}" + (f"  ({e.note})" if e.note else ""))
    i, ii, iii = (report.entry(n) for n in ("I", "II", "III"))
    if report.mode is Mode.DOUBLE_DOUBLE_SLIT:
        lines.append(f"chain: {i.lhs * um:.0f} um << {i.rhs * um:.0f} um << "
                     f"{iii.rhs * um:.0f} um < {ii.bound * um:.0f} um")
    fr = report.fringes
    lines.append(f"fringe distance d_f = {fr.dds * um:.1f} um; ghost d_f(A) = {fr.ghost_a * um:.1f} um, "
                 f"d_f(B) = {fr.ghost_b * um:.1f} um")
    lines.extend(report.notes)
    lines.append(f"overall: {report.verdict}")
    return "\n".join(lines)
