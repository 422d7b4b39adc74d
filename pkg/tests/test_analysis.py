import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from eprsim import analysis as an
from eprsim.engine import TwoParticlePattern
from eprsim.feasibility import fringe_distances
from eprsim.geometry import Mode

X = np.linspace(-0.75e-3, 0.75e-3, 201)


@settings(max_examples=30, deadline=None)
@given(st.floats(200e-6, 400e-6), st.floats(-100e-6, 100e-6), st.floats(0.0, 2.0))
def test_fit_recovers_synthetic_fringes(period, offset, background):
    y = an.cos2_model(X, 1.0, offset, period, background)
    fit = an.fit_fringes(X, y, period * 1.02)
    assert fit.converged
    assert fit.period == pytest.approx(period, rel=1e-6)
    assert fit.visibility == pytest.approx(1.0 / (1.0 + 2 * background), abs=1e-6)
    assert abs(fit.nearest_maximum(offset) - offset) < 1e-9


def test_fit_rejects_short_profiles():
    with pytest.raises(ValueError):
        an.fit_fringes(X, np.ones_like(X), 1e-3)
    with pytest.raises(ValueError):
        an.fit_fringes(X, np.ones_like(X), -1.0)


def test_conditional_slice(dds_geometry):
    ref = an.analytic_reference(Mode.DOUBLE_DOUBLE_SLIT, "diagonal", dds_geometry, X, X)
    x, prof = an.conditional_slice(ref, "A", 0.0)
    assert x is ref.x_b and prof.argmax() == 100
    with pytest.raises(IndexError):
        an.conditional_slice(ref, "B", 1e-3)
    with pytest.raises(ValueError):
        an.conditional_slice(ref, "C", 0.0)


def test_references_classify(dds_geometry, ghost_geometry):
    prod = an.analytic_reference("dds", "product", dds_geometry, X, X)
    diag = an.analytic_reference("dds", "diagonal", dds_geometry, X, X)
    anti = an.analytic_reference("ghost", "anti-diagonal", ghost_geometry, X, X)
    assert an.factorizability(prod).correlation is an.Correlation.NONE
    assert an.rank1_fraction(prod.values) == pytest.approx(1.0)
    assert an.factorizability(diag).correlation is an.Correlation.DIAGONAL
    assert an.factorizability(anti).correlation is an.Correlation.ANTI_DIAGONAL
    with pytest.raises(ValueError):
        an.analytic_reference("dds", "spiral", dds_geometry, X, X)


def test_visibilities_of_limits(dds_geometry, ghost_geometry):
    prod = an.analytic_reference("dds", "product", dds_geometry, X, X)
    diag = an.analytic_reference("dds", "diagonal", dds_geometry, X, X)
    # the plain projection of a product keeps half the contrast; the
    # corrected one removes it entirely
    assert an.two_particle_visibility(prod) == pytest.approx(0.5, abs=0.02)
    assert an.two_particle_visibility(prod, corrected=True) < 1e-6
    assert an.two_particle_visibility(diag) == pytest.approx(1.0, abs=1e-6)
    assert an.marginal_visibility(prod, "A") == pytest.approx(1.0, abs=1e-6)
    assert an.marginal_visibility(diag, "A") < 0.1  # window is not a whole number of fringes
    xg = np.linspace(-1e-3, 1e-3, 201)
    anti = an.analytic_reference("ghost", "anti-diagonal", ghost_geometry, xg, xg)
    assert an.two_particle_visibility(anti) == pytest.approx(1.0, abs=1e-3)


def test_corrected_pattern_of_product_is_flat():
    p = np.outer(np.arange(1.0, 6.0), np.arange(2.0, 5.0))
    c = an.corrected_pattern(p)
    np.testing.assert_allclose(c, p.mean(), rtol=1e-12)


def test_correlation_axis(dds_geometry, ghost_geometry):
    fr = fringe_distances(ghost_geometry)
    g = an.analytic_reference("ghost", "anti-diagonal", ghost_geometry, X, X)
    assert an.correlation_axis(g) == pytest.approx((fr.ghost_a / fr.ghost_b, fr.ghost_a))
    d = an.analytic_reference("dds", "diagonal", dds_geometry, X, X)
    assert an.correlation_axis(d) == pytest.approx((-1.0, fringe_distances(dds_geometry).dds))


def test_missing_geometry_needs_explicit_period():
    p = TwoParticlePattern(X, X, np.ones((201, 201)), Mode.DOUBLE_DOUBLE_SLIT)
    with pytest.raises(ValueError):
        an.marginal_visibility(p, "A")
    assert an.marginal_visibility(p, "A", period=270e-6) == 0.0


def test_convolution_preserves_total(dds_geometry):
    ref = an.analytic_reference("dds", "diagonal", dds_geometry, X, X)
    out = an.convolve_detector(ref, 60e-6)
    assert out.values.sum() == pytest.approx(ref.values.sum(), rel=1e-12)
    assert out.values.max() < ref.values.max()
    with warnings.catch_warnings(record=True) as rec:
        warnings.simplefilter("always")
        same = an.convolve_detector(ref, 1e-6)
    assert rec and np.array_equal(same.values, ref.values)


def test_overlap_bounds(dds_geometry):
    d = an.analytic_reference("dds", "diagonal", dds_geometry, X, X).values
    assert an.overlap(d, d) == pytest.approx(1.0)
    assert 0 < an.overlap(d, np.ones_like(d)) < 1


def test_summary_keys(dds_geometry):
    ref = an.analytic_reference("dds", "diagonal", dds_geometry, X, X)
    s = an.summarize(ref)
    assert s["factorizability"]["correlation"] == "diagonal"
    assert s["above_classical_bound"] is True
    assert s["slice_A0_fit"]["period"] == pytest.approx(270.75e-6, rel=1e-6)
