import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hybridbf.array_rf import (ArrayGeometry, ElementPattern, QuantizerDiagnostics, RfHardwareModel,
                               apply_weight, levels_to_weight, normalize, quantize_weight,
                               steering_vector)
from hybridbf.errors import ConfigurationError

HW = RfHardwareModel()


def unit_vectors(n_min=1, n_max=12):
    comp = st.floats(-1, 1, allow_nan=False)
    return st.integers(n_min, n_max).flatmap(
        lambda n: st.lists(st.tuples(comp, comp), min_size=n, max_size=n)).map(
        lambda xs: np.array([a + 1j * b for a, b in xs])).filter(
        lambda w: np.linalg.norm(w) > 1e-3).map(normalize)


def test_hardware_constants():
    assert HW.phase_step_deg == 22.5
    assert HW.max_phase_error_deg == 11.25
    assert HW.amplitude_range_db == 15.75
    assert HW.max_amplitude_error_db == 0.125


def test_geometry_validation():
    with pytest.raises(ConfigurationError):
        ArrayGeometry(0, 1)
    with pytest.raises(ConfigurationError):
        ArrayGeometry(2, 2, spacing_wavelengths=0.0)
    assert ArrayGeometry(6, 2).num_elements == 12


@pytest.mark.parametrize("rows,cols", [(1, 1), (6, 1), (6, 2), (3, 4)])
def test_broadside_is_all_ones(rows, cols):
    a = steering_vector(ArrayGeometry(rows, cols), 0.0, 0.0)
    np.testing.assert_allclose(a, np.ones(rows * cols))


def test_endfire_half_wavelength_alternates():
    # rows are vertical, so endfire along the row axis is elevation 90 deg
    a = steering_vector(ArrayGeometry(6, 1, 0.5), 0.0, math.pi / 2)
    np.testing.assert_allclose(a, [1, -1, 1, -1, 1, -1], atol=1e-12)


def test_steering_2x2_matches_scalar_formula():
    # frozen from a scalar evaluation of 2 pi d (row u + col v), wrapped to (-pi, pi]
    expected = [0.0, 1.7712788604561294, 1.2893855635819786, 3.0606644240381082]
    a = steering_vector(ArrayGeometry(2, 2, 0.6), math.radians(30), math.radians(20))
    np.testing.assert_allclose(np.angle(a), expected, atol=1e-12)


@given(st.floats(-math.pi, math.pi), st.floats(-math.pi / 2, math.pi / 2))
def test_steering_unit_modulus(az, el):
    geo = ArrayGeometry(6, 2)
    a = steering_vector(geo, az, el)
    np.testing.assert_allclose(np.abs(a), 1.0, atol=1e-12)
    assert math.isclose(np.linalg.norm(a), math.sqrt(12), rel_tol=1e-12)


def test_steering_vectorised_shape():
    geo = ArrayGeometry(3, 2)
    az = np.linspace(-1, 1, 5)
    a = steering_vector(geo, az, np.zeros(5))
    assert a.shape == (6, 5)
    np.testing.assert_allclose(a[:, 2], steering_vector(geo, az[2], 0.0))


def test_cosine_pattern():
    pat = ElementPattern("cosine", front_to_back_db=20.0)
    assert pat.gain(0.0, 0.0) == pytest.approx(1.0)
    assert pat.gain(math.pi, 0.0) == pytest.approx(0.01)
    assert pat.gain(math.radians(60), 0.0) == pytest.approx(0.5)


def test_quantize_phase_rounding():
    w = np.array([np.exp(1j * np.radians(10)), np.exp(1j * np.radians(12))]) / math.sqrt(2)
    q = quantize_weight(w, HW)
    np.testing.assert_allclose(np.degrees(np.angle(q)), [0.0, 22.5], atol=1e-9)


def test_quantize_phase_tie_rounds_up():
    w = np.array([np.exp(1j * np.radians(11.25)), 1.0]) / math.sqrt(2)
    q = quantize_weight(w, HW)
    assert np.degrees(np.angle(q[0])) == pytest.approx(22.5)


def test_quantize_uniform_is_unchanged():
    w = np.ones(6) / math.sqrt(6)
    np.testing.assert_allclose(quantize_weight(w, HW), w, atol=1e-15)


def test_quantize_clamps_deep_attenuation():
    w = normalize(np.array([1.0, 1e-3]))  # 60 dB down
    q = quantize_weight(w, HW)
    att = 20 * np.log10(abs(q[0]) / abs(q[1]))
    assert att == pytest.approx(15.75)


def test_zero_coefficient_counted():
    diag = QuantizerDiagnostics()
    q = quantize_weight(np.array([1.0, 0.0, 0.0]), HW, diag)
    assert diag.zero_coefficients == 2
    assert abs(q[1]) == pytest.approx(10 ** (-15.75 / 20))


def test_quantize_matches_exhaustive_level_search():
    """Nearest level per element by brute force over all 16 x 64 quantizer states."""
    rng = np.random.default_rng(11)
    phases = 2 * np.pi * np.arange(HW.phase_levels) / HW.phase_levels
    atts = np.arange(HW.amplitude_levels) * HW.amplitude_step_db
    for _ in range(200):
        w = normalize(rng.standard_normal(8) + 1j * rng.standard_normal(8))
        q = quantize_weight(w, HW)
        ref = np.abs(w).max()
        for x, y in zip(w, q):
            dphi = np.abs(np.angle(np.exp(1j * (phases - np.angle(x)))))
            att = 20 * np.log10(ref / abs(x))
            datt = np.abs(atts - att)
            best_phase = phases[np.argmin(dphi)]
            best_att = atts[np.argmin(datt)]
            assert dphi.min() <= math.radians(11.25) + 1e-12
            assert abs(np.angle(y * np.exp(-1j * best_phase))) < 1e-9
            assert 20 * np.log10(ref / abs(y)) == pytest.approx(best_att, abs=1e-9)
            if att <= HW.amplitude_range_db:
                assert datt.min() <= 0.125 + 1e-12


@given(unit_vectors())
def test_quantizer_error_bounds(w):
    q = quantize_weight(w, HW)
    nz = np.abs(w) > 0
    dphi = np.degrees(np.abs(np.angle(q[nz] * np.conj(w[nz]))))
    assert dphi.max() <= 11.25 + 1e-6
    att_w = 20 * np.log10(np.abs(w).max() / np.abs(w[nz]))
    att_q = 20 * np.log10(np.abs(q).max() / np.abs(q[nz]))
    inside = att_w <= 15.75
    if inside.any():
        assert np.abs(att_w - att_q)[inside].max() <= 0.125 + 1e-9


@given(unit_vectors())
def test_quantizer_idempotent_up_to_scale(w):
    q1 = quantize_weight(w, HW)
    q2 = quantize_weight(q1, HW)
    np.testing.assert_allclose(q2, q1, atol=1e-12)
    q3 = quantize_weight(3.7 * q1, HW)
    np.testing.assert_allclose(q3 / np.linalg.norm(q3), q1 / np.linalg.norm(q1), atol=1e-12)


def test_quantization_loss_bound():
    """Matched-beam power loss from quantization stays within 0.5 dB (N <= 12)."""
    rng = np.random.default_rng(5)
    worst = 0.0
    for n in (2, 6, 12):
        for _ in range(10_000 // 3):
            w = normalize(rng.standard_normal(n) + 1j * rng.standard_normal(n))
            q = quantize_weight(w, HW)
            gain = abs(np.vdot(q, w)) ** 2 / np.vdot(q, q).real
            worst = max(worst, -10 * np.log10(gain))
    assert worst <= 0.5


def test_levels_round_trip():
    w = levels_to_weight(np.array([0, 4, 8]), np.array([0, 4, 63]), 0.5, HW)
    np.testing.assert_allclose(np.degrees(np.angle(w)), [0, 90, 180], atol=1e-9)
    np.testing.assert_allclose(np.abs(w), 0.5 * 10 ** (-np.array([0, 1.0, 15.75]) / 20))


def test_apply_weight_examples():
    h = np.array([1 + 2j, 3, -1j])
    assert apply_weight(np.array([1, 0, 0]), h) == h[0]
    a = steering_vector(ArrayGeometry(6, 1), 0.3, 0.2)
    y = apply_weight(a / np.linalg.norm(a), a)
    assert abs(y) ** 2 == pytest.approx(6.0)
    assert abs(apply_weight(np.array([1, 1j, 0]) / math.sqrt(2), np.array([1, 1j, 0]) * 0 + [1j, 1, 0])) < 1e-12
    with pytest.raises(ConfigurationError):
        apply_weight(np.ones(3), np.ones(4))


@settings(max_examples=200)
@given(unit_vectors(2, 12), st.integers(0, 2 ** 32 - 1))
def test_matched_filter_bound(w, seed):
    rng = np.random.default_rng(seed)
    h = rng.standard_normal(w.size) + 1j * rng.standard_normal(w.size)
    assert abs(apply_weight(w, h)) ** 2 <= np.vdot(h, h).real * (1 + 1e-12)
    matched = normalize(h)
    assert abs(apply_weight(matched, h)) ** 2 == pytest.approx(np.vdot(h, h).real, rel=1e-12)
