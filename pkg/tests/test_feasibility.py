import math

import pytest
from hypothesis import given, strategies as st

from eprsim import feasibility as fe
from eprsim.geometry import ExperimentGeometry, Mode, SourceRegion


def test_fringe_distances(dds_geometry, ghost_geometry):
    assert fe.fringe_distances(dds_geometry).dds == pytest.approx(270.75e-6, rel=1e-12)
    fr = fe.fringe_distances(ghost_geometry)
    assert fr.ghost_a == pytest.approx(541.5e-6, rel=1e-12)
    assert fr.ghost_b == pytest.approx(758.1e-6, rel=1e-12)


def test_double_slit_chain(dds_geometry):
    rep = fe.evaluate_chain(dds_geometry, SourceRegion(50e-6))
    i, ii, iii = (rep.entry(n) for n in ("I", "II", "III"))
    assert i.lhs == pytest.approx(27.93e-6, abs=5e-9)
    assert i.verdict == "marginal"
    assert ii.verdict == "fail" and "marginal-fail" in ii.note
    assert ii.bound == pytest.approx(90.25e-6, rel=1e-12)
    assert iii.margin == pytest.approx(2.0) and iii.verdict == "marginal"
    assert rep.verdict == "marginal"
    text = fe.format_report(rep)
    assert "28 um << 50 um << 100 um < 90 um" in text


def test_ghost_chain(ghost_geometry):
    rep = fe.evaluate_chain(ghost_geometry, SourceRegion(400e-6))
    assert rep.entry("I").lhs == pytest.approx(55.85e-6, abs=5e-9)
    assert rep.entry("I").verdict == "pass"
    assert rep.entry("II").verdict == "pass"
    assert rep.entry("III").verdict == "n/a" and rep.entry("III").margin is None
    assert rep.verdict == "pass"
    assert rep.to_dict()["mode"] == "ghost"


def test_grading_thresholds():
    assert fe.grade_much_less(5.0) == "pass"
    assert fe.grade_much_less(1.5) == "marginal"
    assert fe.grade_much_less(1.49) == "fail"


def test_far_fail():
    geom = ExperimentGeometry(5e-3, 25e-3, 500e-6, detector_resolution=60e-6)
    rep = fe.evaluate_chain(geom, SourceRegion(50e-6))
    assert rep.entry("II").verdict == "fail" and rep.verdict == "fail"


@given(st.floats(1e-7, 1e-4), st.floats(1.0, 1e3))
def test_margins_grow_in_the_ideal_limits(dx, factor):
    geom = ExperimentGeometry(5e-3, 25e-3, 50e-6, detector_resolution=dx, mode=Mode.GHOST)
    small = fe.evaluate_chain(geom, SourceRegion(100e-6))
    big_source = fe.evaluate_chain(geom, SourceRegion(100e-6 * factor))
    assert big_source.entry("I").margin >= small.entry("I").margin
    finer = ExperimentGeometry(5e-3, 25e-3, 50e-6, detector_resolution=dx / factor, mode=Mode.GHOST)
    assert fe.condition_II(finer).margin >= fe.condition_II(geom).margin
    huge = fe.evaluate_chain(finer, SourceRegion(1.0))
    if fe.condition_II(finer).margin > 1:
        assert huge.verdict == "pass"


def test_slit_bound_formula(dds_geometry):
    assert fe.slit_separation_bound(dds_geometry) == pytest.approx(1.083e-6 * 25e-3 / 300e-6)
    assert math.isclose(fe.condition_II(dds_geometry).margin, 270.75 / 300)
