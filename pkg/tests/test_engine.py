import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import bruteforce
from conftest import WAVELENGTH
from eprsim import engine
from eprsim.geometry import ExperimentGeometry, Mode, SourceRegion, path_lengths

SMALL = SourceRegion(4e-6, 1e-6, 0.0)  # 10 x 3 samples satisfy the phase rule
GRID21 = engine.GridSpec(0.5e-3, 21)


def _geom(mode):
    return ExperimentGeometry(5e-3, 25e-3, 100e-6 if mode == "dds" else 50e-6, mode=Mode(mode))


@pytest.mark.parametrize("mode", ["dds", "ghost"])
def test_matches_high_precision_bruteforce(mode):
    geom = _geom(mode)
    sampling = engine.sample_source(SMALL, (10, 3, 1))
    fast = engine.integrate_source(geom, SMALL, GRID21, WAVELENGTH, sampling)
    x_a, x_b = GRID21.axes()
    ref = np.array(bruteforce.pattern(mode, 5e-3, 25e-3, geom.d, WAVELENGTH,
                                      sampling.points.tolist(), sampling.weights.tolist(),
                                      x_a.tolist(), x_b.tolist()))
    assert np.max(np.abs(fast.values - ref)) / ref.max() <= 1e-12


@given(st.floats(-2e-5, 2e-5), st.floats(-5e-6, 5e-6), st.floats(-1e-3, 1e-3),
       st.floats(-1e-3, 1e-3))
def test_factorization_identity(xs, ys, xa, xb):
    paths = path_lengths(_geom("dds"), (xs, ys, 0.0), xa, xb)
    a = engine.point_amplitude_dds(paths, WAVELENGTH)
    b = engine.point_amplitude_dds_factorized(paths, WAVELENGTH)
    assert abs(a - b) <= 1e-12 * max(abs(a), 1.0)


def test_point_source_reproduces_point_amplitude():
    geom = _geom("dds")
    point = SourceRegion(0.0)
    pat = engine.integrate_source(geom, point, GRID21, WAVELENGTH)
    x_a, x_b = GRID21.axes()
    for i, j in [(0, 0), (3, 17), (10, 10), (20, 5)]:
        amp = engine.point_amplitude(path_lengths(geom, (0, 0, 0), x_a[i], x_b[j]), WAVELENGTH)
        # absolute lengths carry ~1 ulp of 30 mm, i.e. ~2e-11 rad of phase
        assert pat.values[i, j] == pytest.approx(abs(amp) ** 2, rel=1e-9)


def test_ghost_point_source_flat_on_side_b():
    pat = engine.integrate_source(_geom("ghost"), SourceRegion(0.0), GRID21, WAVELENGTH)
    spread = np.ptp(pat.values, axis=1)
    assert np.all(spread <= 1e-12 * pat.values.max())


@pytest.mark.parametrize("mode", ["dds", "ghost"])
def test_mirror_symmetry(mode):
    src = SourceRegion(20e-6, 4e-6)
    pat = engine.integrate_source(_geom(mode), src, GRID21, WAVELENGTH)
    v = pat.peak_normalized()
    np.testing.assert_allclose(v, v[::-1, ::-1], atol=1e-12)
    if mode == "dds":
        # source symmetric under y -> -y swaps the two sides
        np.testing.assert_allclose(v, v.T, atol=1e-12)


def test_worker_count_does_not_change_result():
    src = SourceRegion(50e-6, 10e-6)
    geom, grid = _geom("dds"), engine.GridSpec(0.5e-3, 41)
    serial = engine.integrate_source(geom, src, grid, WAVELENGTH, workers=1)
    assert serial.sampling_counts[0] * serial.sampling_counts[1] > engine.BLOCK_SIZE
    threaded = engine.integrate_source(geom, src, grid, WAVELENGTH, workers=3)
    assert np.array_equal(serial.values, threaded.values)


def test_undersampling_is_rejected():
    sampling = engine.sample_source(SourceRegion(50e-6), (10, 1, 1))
    with pytest.raises(engine.SamplingError) as info:
        engine.integrate_source(_geom("dds"), SourceRegion(50e-6), GRID21, WAVELENGTH, sampling)
    assert info.value.axis == "x"


def test_auto_sampling_obeys_phase_rule():
    geom, src = _geom("ghost"), SourceRegion(400e-6, 10e-6, 5e-6)
    s = engine.auto_sampling(geom, src, GRID21, WAVELENGTH)
    h = engine.required_step(geom, GRID21, WAVELENGTH, src)
    assert s.steps[0] <= h and s.steps[1] <= h
    assert s.counts[2] == 1
    assert engine.auto_sampling(geom, src, GRID21, WAVELENGTH, integrate_z=True).counts[2] > 1


def test_normalization():
    pat = engine.integrate_source(_geom("dds"), SourceRegion(20e-6), GRID21, WAVELENGTH,
                                  normalize=True)
    assert pat.normalized
    assert pat.values.sum() * pat.pitch_a * pat.pitch_b == pytest.approx(1.0, rel=1e-12)


def test_convergence_gate():
    geom, src = _geom("dds"), SourceRegion(50e-6, 10e-6)
    res = engine.integrate_converged(geom, src, GRID21, WAVELENGTH)
    assert res.deviation < 1e-3
    assert res.pattern.sampling_counts[0] == 2 * res.coarse_counts[0]
    with pytest.raises(engine.ConvergenceError):
        engine.integrate_converged(geom, src, GRID21, WAVELENGTH, tolerance=1e-12)


def test_grid_mismatch():
    geom, src = _geom("dds"), SourceRegion(10e-6)
    a = engine.integrate_source(geom, src, GRID21, WAVELENGTH)
    b = engine.integrate_source(geom, src, engine.GridSpec(0.5e-3, 11), WAVELENGTH)
    with pytest.raises(engine.GridMismatchError):
        engine.convergence_check(a, b)


def test_grid_spec_validation():
    with pytest.raises(ValueError):
        engine.GridSpec(0.0, 11)
    with pytest.raises(ValueError):
        engine.GridSpec(1e-3, 0)


@settings(max_examples=10, deadline=None)
@given(st.floats(0.0, 30e-6))
def test_values_nonnegative_and_bounded(extent):
    pat = engine.integrate_source(_geom("dds"), SourceRegion(extent), GRID21, WAVELENGTH)
    # |mean of four unit phasors|^2 <= 16
    assert np.all(pat.values >= 0) and pat.values.max() <= 16 + 1e-9


def test_exact_prefactor_is_small_correction():
    geom, src = _geom("dds"), SourceRegion(20e-6)
    plain = engine.integrate_source(geom, src, GRID21, WAVELENGTH).peak_normalized()
    exact = engine.integrate_source(geom, src, GRID21, WAVELENGTH, exact_prefactor=True).peak_normalized()
    assert 0 < np.max(np.abs(plain - exact)) < 1e-2
