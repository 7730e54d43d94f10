import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hybridbf.array_rf import ArrayGeometry, ElementPattern, steering_vector
from hybridbf.channel import (ChannelStream, PathCluster, Trajectory, add_awgn, evolve_trajectory,
                              exact_correlation, generate_channel, rich_scattering_clusters,
                              validate_clusters)
from hybridbf.errors import ConfigurationError
from hybridbf.phy.numerology import DEFAULT_NUMEROLOGY as NUM

GEO = ArrayGeometry(6, 1, 0.5)


def test_single_cluster_flat_channel_is_scaled_steering():
    c = [PathCluster(0.4, -0.1, 1.0)]
    ch = generate_channel(c, GEO, 0, rng_seed=3)
    a = steering_vector(GEO, 0.4, -0.1)
    g = ch.h[0, 0] / a[0]
    assert abs(g) == pytest.approx(1.0)
    np.testing.assert_allclose(ch.h, np.broadcast_to(g * a, ch.h.shape), atol=1e-12)
    assert ch.h.shape == (NUM.active_subcarriers, 6)


def test_two_ray_frequency_response():
    """Two equal clusters, second delayed by 1/(2 B_active)."""
    tau = 1.0 / (2 * NUM.active_subcarriers * NUM.subcarrier_spacing)
    c = [PathCluster(0.0, 0.0, 0.5, 0.0), PathCluster(0.0, 0.0, 0.5, tau)]
    k = NUM.active_k
    means = []
    for seed in range(400):
        stream = ChannelStream(c, ArrayGeometry(1, 1), seed)
        g = stream.fading()
        h = stream.current().h[:, 0]
        expected = math.sqrt(0.5) * (g[0] + g[1] * np.exp(-2j * np.pi * k * NUM.subcarrier_spacing * tau))
        np.testing.assert_allclose(h, expected, atol=1e-12)
        power = np.abs(h) ** 2
        if seed == 0:
            assert power.max() - power.min() > 0.1
        means.append(power.mean())
    # per realisation the band mean depends on the relative phase; its ensemble mean is 1
    assert np.mean(means) == pytest.approx(1.0, abs=0.05)


def test_generate_channel_deterministic():
    rng = np.random.default_rng(0)
    c = rich_scattering_clusters(rng)
    a = generate_channel(c, GEO, 17, rng_seed=99, coherence=0.9)
    b = generate_channel(c, GEO, 17, rng_seed=99, coherence=0.9)
    assert np.array_equal(a.h, b.h)
    other = generate_channel(c, GEO, 17, rng_seed=100, coherence=0.9)
    assert not np.array_equal(a.h, other.h)


def test_stream_matches_pure_function():
    c = rich_scattering_clusters(np.random.default_rng(1))
    stream = ChannelStream(c, GEO, 5, coherence=0.8)
    for t in range(4):
        got = stream.step()
        assert np.array_equal(got.h, generate_channel(c, GEO, t, 5, coherence=0.8).h)


def test_empty_and_invalid_clusters():
    with pytest.raises(ConfigurationError):
        generate_channel([], GEO, 0, 1)
    with pytest.raises(ConfigurationError):
        exact_correlation([], GEO)
    with pytest.raises(ConfigurationError):
        validate_clusters([PathCluster(0, 0, 0.5)])
    with pytest.raises(ConfigurationError):
        validate_clusters([PathCluster(0, 0, 1.0, delay_s=NUM.cp_duration)])


def test_single_cluster_correlation_rank_one():
    a = steering_vector(GEO, 0.3, 0.2)
    R = exact_correlation([PathCluster(0.3, 0.2, 1.0)], GEO)
    np.testing.assert_allclose(R, np.outer(a, a.conj()), atol=1e-12)
    ev = np.linalg.eigvalsh(R)
    assert ev[-1] == pytest.approx(6.0)
    np.testing.assert_allclose(ev[:-1], 0.0, atol=1e-12)


def test_orthogonal_clusters_split_eigenvalues():
    # half-wavelength ULA: u = 0 and u = 1/3 give orthogonal steering vectors for N = 6
    el2 = math.asin(1 / 3)
    a1, a2 = steering_vector(GEO, 0.0, 0.0), steering_vector(GEO, 0.0, el2)
    assert abs(np.vdot(a1, a2)) < 1e-12
    R = exact_correlation([PathCluster(0, 0, 0.7), PathCluster(0, el2, 0.3)], GEO)
    ev = np.sort(np.linalg.eigvalsh(R))[::-1]
    np.testing.assert_allclose(ev[:2], [4.2, 1.8], atol=1e-12)
    np.testing.assert_allclose(ev[2:], 0.0, atol=1e-12)


def test_correlation_matches_monte_carlo():
    rng = np.random.default_rng(42)
    clusters = [PathCluster(float(a), float(e), p) for a, e, p in
                zip(rng.uniform(-1, 1, 3), rng.uniform(-0.5, 0.5, 3), [0.5, 0.3, 0.2])]
    geo = ArrayGeometry(4, 2, 0.5)
    R = exact_correlation(clusters, geo)
    stream = ChannelStream(clusters, geo, seed=7, coherence=0.0, subcarriers=[0])
    n_real = 100_000
    acc = np.zeros_like(R)
    for _ in range(n_real):
        h = stream.step().h[0]
        acc += np.outer(h, h.conj())
    S = acc / n_real
    assert np.linalg.norm(S - R) / np.linalg.norm(R) < 0.02


def test_mean_channel_power_matches_pattern_gain():
    pat = ElementPattern("cosine")
    geo = ArrayGeometry(6, 1, 0.5, pattern=pat)
    c = [PathCluster(0.5, 0.0, 0.6), PathCluster(-0.3, 0.1, 0.4)]
    R = exact_correlation(c, geo)
    expected = 6 * (0.6 * pat.gain(0.5, 0.0) + 0.4 * pat.gain(-0.3, 0.1))
    assert np.trace(R).real == pytest.approx(expected)


cluster_sets = st.lists(
    st.tuples(st.floats(-math.pi, math.pi), st.floats(-1.5, 1.5), st.floats(0.01, 1.0)),
    min_size=1, max_size=8).map(
    lambda xs: [PathCluster(a, e, p / sum(x[2] for x in xs)) for a, e, p in xs])


@given(cluster_sets)
def test_correlation_hermitian_psd(clusters):
    R = exact_correlation(clusters, ArrayGeometry(6, 2, 0.6))
    np.testing.assert_allclose(R, R.conj().T, atol=1e-12)
    assert np.linalg.eigvalsh(R).min() >= -1e-12
    assert np.trace(R).real == pytest.approx(12.0)


@given(st.floats(-math.pi, math.pi), st.floats(-1.5, 1.5))
def test_single_cluster_dominant_eigenvector(az, el):
    R = exact_correlation([PathCluster(az, el, 1.0)], GEO)
    v = np.linalg.eigh(R)[1][:, -1]
    a = steering_vector(GEO, az, el)
    assert abs(np.vdot(v, a / np.linalg.norm(a))) >= 1 - 1e-9


def test_trajectory_endpoints_and_midpoint():
    A = [PathCluster(-0.5, 0.0, 0.8, 1e-7, 0.01), PathCluster(0.5, 0.1, 0.2)]
    B = [PathCluster(0.5, 0.2, 0.4, 3e-7, 0.03), PathCluster(1.0, -0.1, 0.6)]
    tr = Trajectory(A, B, duration_subframes=100)
    assert evolve_trajectory(tr, 0) == A
    assert evolve_trajectory(tr, -5) == A
    assert evolve_trajectory(tr, 100) == B
    assert evolve_trajectory(tr, 1000) == B
    mid = evolve_trajectory(tr, 50)
    for m, a, b in zip(mid, A, B):
        assert m.azimuth == pytest.approx((a.azimuth + b.azimuth) / 2)
        assert m.elevation == pytest.approx((a.elevation + b.elevation) / 2)
        assert m.power_fraction == pytest.approx((a.power_fraction + b.power_fraction) / 2)
    assert sum(c.power_fraction for c in mid) == pytest.approx(1.0)


def test_trajectory_mismatch_rejected():
    with pytest.raises(ConfigurationError):
        Trajectory([PathCluster(0, 0, 1.0)], [PathCluster(0, 0, 0.5), PathCluster(1, 0, 0.5)], 10)


def test_trajectory_drives_stream():
    tr = Trajectory([PathCluster(0, 0, 1.0)], [PathCluster(0.6, 0, 1.0)], 10)
    stream = ChannelStream(tr, GEO, 1, subcarriers=[0])
    hs = [stream.step().h[0] for _ in range(12)]
    a_end = steering_vector(GEO, 0.6, 0.0)
    assert abs(np.vdot(hs[11], a_end)) == pytest.approx(6.0)
    assert abs(np.vdot(hs[0], steering_vector(GEO, 0.0, 0.0))) == pytest.approx(6.0)


def test_awgn_zero_noise_identity():
    x = np.exp(1j * np.arange(10))
    np.testing.assert_array_equal(add_awgn(x, 0.0, np.random.default_rng(0)), x)
    with pytest.raises(ConfigurationError):
        add_awgn(x, -1.0, np.random.default_rng(0))


def test_awgn_variance():
    y = add_awgn(np.zeros(1_000_000, complex), 1.0, np.random.default_rng(3))
    assert np.var(y) == pytest.approx(1.0, rel=0.005)
    # circular: real and imaginary halves carry equal power
    assert np.var(y.real) == pytest.approx(0.5, rel=0.01)


def test_awgn_snr_loopback():
    rng = np.random.default_rng(8)
    x = np.exp(2j * np.pi * rng.random(1_000_000))
    y = add_awgn(x, 0.1, rng)
    snr_db = 10 * np.log10(np.mean(np.abs(x) ** 2) / np.mean(np.abs(y - x) ** 2))
    assert snr_db == pytest.approx(10.0, abs=0.1)


def test_awgn_deterministic():
    x = np.ones(100, complex)
    a = add_awgn(x, 0.5, np.random.default_rng(4))
    b = add_awgn(x, 0.5, np.random.default_rng(4))
    assert np.array_equal(a, b)


@settings(max_examples=20)
@given(st.integers(0, 2 ** 32 - 1))
def test_rich_scattering_clusters_valid(seed):
    c = rich_scattering_clusters(np.random.default_rng(seed))
    validate_clusters(c)
    assert len(c) == 6
