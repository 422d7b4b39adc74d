import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from eprsim.geometry import (
    ExperimentGeometry, Mode, SourceRegion, Weighting, direct_excess, path_lengths,
    side_excess, slit_points,
)


def test_slit_points_layout(dds_geometry, ghost_geometry):
    pts = slit_points(dds_geometry)
    assert pts.shape == (4, 3)
    np.testing.assert_array_equal(pts[:, 0], [50e-6, -50e-6, 50e-6, -50e-6])
    np.testing.assert_array_equal(pts[:, 1], [5e-3, 5e-3, -5e-3, -5e-3])
    assert slit_points(ghost_geometry).shape == (2, 3)


def test_on_axis_lengths_are_symmetric(dds_geometry):
    p = path_lengths(dds_geometry, (0, 0, 0), 0.0, 0.0)
    assert p.side_a[0] == p.side_a[1] == p.side_b[0] == p.side_b[1]
    expected = math.hypot(50e-6, 5e-3) + math.hypot(50e-6, 25e-3)
    assert p.side_a[0] == pytest.approx(expected, rel=1e-15)


def test_ghost_side_b_is_direct(ghost_geometry):
    p = path_lengths(ghost_geometry, (10e-6, 0, 0), 1e-4, -2e-4)
    assert len(p.side_b) == 1
    assert p.side_b[0] == pytest.approx(math.hypot(-2e-4 - 10e-6, 30e-3), rel=1e-15)


@given(st.floats(-1e-4, 1e-4), st.floats(-1e-5, 1e-5), st.floats(-1e-5, 1e-5),
       st.floats(-1e-3, 1e-3))
def test_excess_form_matches_euclidean(xs, ys, zs, xd):
    geom = ExperimentGeometry(5e-3, 25e-3, 100e-6)
    src = np.array([[xs, ys, zs]])
    for side, sign, i in (("A", -1, 0), ("B", 1, 2)):
        p = path_lengths(geom, (xs, ys, zs), xd, xd)
        full = (p.side_a if side == "A" else p.side_b)[0]
        ex = side_excess(geom, side, slit_points(geom)[i, 0], src, np.array([xd]))[0, 0]
        assert geom.L1 + geom.L2 + sign * ys + ex == pytest.approx(full, rel=1e-14)


def test_direct_excess(ghost_geometry):
    src = np.array([[5e-6, 2e-6, 1e-6]])
    ex = direct_excess(ghost_geometry, src, np.array([3e-4]))[0, 0]
    full = math.sqrt((3e-4 - 5e-6) ** 2 + 1e-12 + (30e-3 + 2e-6) ** 2)
    assert 30e-3 + 2e-6 + ex == pytest.approx(full, rel=1e-15)


def test_invalid_geometry():
    with pytest.raises(ValueError):
        ExperimentGeometry(0.0, 25e-3, 100e-6)
    with pytest.raises(ValueError):
        ExperimentGeometry(5e-3, 25e-3, -1e-6)
    with pytest.raises(ValueError):
        SourceRegion(-1e-6)


def test_source_weights():
    pts = np.array([[0, 0, 0], [10e-6, 0, 0]])
    assert SourceRegion(50e-6).weight(pts).tolist() == [1.0, 1.0]
    g = SourceRegion(40e-6, weighting=Weighting.GAUSSIAN).weight(pts)
    assert g[0] == 1.0 and g[1] == pytest.approx(math.exp(-0.5))


def test_mode_values():
    assert Mode("dds") is Mode.DOUBLE_DOUBLE_SLIT and Mode("ghost") is Mode.GHOST
