"""Clustered multipath spatial channel, its exact correlation and AWGN.

Each cluster l contributes

    sqrt(p_l * G(dir_l)) * g_l(t) * a(dir_l) * exp(-j 2 pi k df tau_l)

to the element-domain response at subcarrier k, where G is the element
power pattern, a the steering vector and g_l a unit-variance fading
coefficient that is block-constant over a subframe.  The fading evolves as

    g_l(t+1) = exp(j w_l) * (rho * g_l(t) + sqrt(1 - rho**2) * n_l(t))

with g_l(0) = exp(j phi_l), phi_l uniform.  ``coherence`` (rho) = 1 gives a
pure Doppler rotation with constant modulus; rho = 0 draws independent
Rayleigh coefficients every subframe.
"""
from dataclasses import dataclass, replace
import math

import numpy as np

from .array_rf import steering_vector
from .errors import ConfigurationError
from .phy.numerology import DEFAULT_NUMEROLOGY


@dataclass(frozen=True)
class PathCluster:
    azimuth: float
    elevation: float
    power_fraction: float
    delay_s: float = 0.0
    doppler_phase_rate: float = 0.0  # rad / subframe


def validate_clusters(clusters, numerology=DEFAULT_NUMEROLOGY, tol=1e-6):
    if len(clusters) == 0:
        raise ConfigurationError("channel needs at least one cluster")
    total = sum(c.power_fraction for c in clusters)
    if abs(total - 1.0) > tol:
        raise ConfigurationError(f"cluster power fractions sum to {total}, expected 1")
    for c in clusters:
        if c.power_fraction < 0:
            raise ConfigurationError("negative cluster power")
        if not 0 <= c.delay_s < numerology.cp_duration:
            raise ConfigurationError(f"cluster delay {c.delay_s} s outside [0, CP)")


def _cluster_arrays(clusters):
    az = np.array([c.azimuth for c in clusters], dtype=float)
    el = np.array([c.elevation for c in clusters], dtype=float)
    p = np.array([c.power_fraction for c in clusters], dtype=float)
    tau = np.array([c.delay_s for c in clusters], dtype=float)
    w = np.array([c.doppler_phase_rate for c in clusters], dtype=float)
    return az, el, p, tau, w


def cluster_responses(clusters, geometry):
    """(N, L) matrix whose columns are sqrt(p_l G_l) a_l."""
    az, el, p, _, _ = _cluster_arrays(clusters)
    a = steering_vector(geometry, az, el)
    amp = np.sqrt(p * geometry.pattern.gain(az, el))
    return a * amp


def delay_phasors(clusters, subcarriers, numerology=DEFAULT_NUMEROLOGY):
    """(K, L) matrix exp(-j 2 pi k df tau_l)."""
    tau = np.array([c.delay_s for c in clusters], dtype=float)
    k = np.asarray(subcarriers, dtype=float)
    return np.exp(-2j * np.pi * np.outer(k * numerology.subcarrier_spacing, tau))


def exact_correlation(clusters, geometry):
    """E[h h^H] = sum_l p_l G_l a_l a_l^H (independent unit-variance fading)."""
    if len(clusters) == 0:
        raise ConfigurationError("channel needs at least one cluster")
    b = cluster_responses(clusters, geometry)
    return b @ b.conj().T


@dataclass
class SpatialChannel:
    """Element-domain response ``h[k, n]`` on the listed subcarriers for one subframe."""

    h: np.ndarray
    subcarriers: np.ndarray
    subframe_index: int


class ChannelStream:
    """Subframe-by-subframe channel generator for one link.

    ``clusters`` is either a fixed list of PathCluster or a callable mapping
    subframe index to a cluster list (e.g. a Trajectory).  All clusters lists
    must have the same length; fading state is indexed by cluster position.
    """

    def __init__(self, clusters, geometry, seed, coherence=1.0, subcarriers=None,
                 numerology=DEFAULT_NUMEROLOGY):
        self._source = clusters
        self.geometry = geometry
        self.coherence = coherence
        self.numerology = numerology
        self.subcarriers = numerology.active_k if subcarriers is None else np.asarray(subcarriers)
        first = self.clusters_at(0)
        validate_clusters(first, numerology)
        self._rng = np.random.default_rng(seed)
        self._n_clusters = len(first)
        self._g = np.exp(2j * np.pi * self._rng.random(self._n_clusters))
        self.subframe_index = 0
        self._cache_key = None

    def clusters_at(self, subframe_index):
        if callable(self._source):
            return self._source(subframe_index)
        return self._source

    def _structure(self, clusters):
        key = tuple(clusters)
        if key != self._cache_key:
            if len(clusters) != self._n_clusters:
                raise ConfigurationError("cluster count changed during a trial")
            self._resp = cluster_responses(clusters, self.geometry)
            self._phasors = delay_phasors(clusters, self.subcarriers, self.numerology)
            self._cache_key = key
        return self._resp, self._phasors

    def current(self):
        """Response at the current subframe without advancing."""
        clusters = self.clusters_at(self.subframe_index)
        resp, phasors = self._structure(clusters)
        h = (phasors * self._g[None, :]) @ resp.T
        return SpatialChannel(h, self.subcarriers, self.subframe_index)

    def fading(self):
        return self._g.copy()

    def advance(self):
        clusters = self.clusters_at(self.subframe_index)
        w = np.array([c.doppler_phase_rate for c in clusters])
        rot = np.exp(1j * w)
        rho = self.coherence
        if rho == 1.0:
            self._g = rot * self._g
        else:
            n = (self._rng.standard_normal(self._n_clusters)
                 + 1j * self._rng.standard_normal(self._n_clusters)) / math.sqrt(2)
            self._g = rot * (rho * self._g + math.sqrt(1 - rho ** 2) * n)
        self.subframe_index += 1

    def step(self):
        """Return the current subframe's channel, then advance."""
        out = self.current()
        self.advance()
        return out


def generate_channel(clusters, geometry, subframe_index, rng_seed, coherence=1.0,
                     subcarriers=None, numerology=DEFAULT_NUMEROLOGY):
    """Channel realisation at ``subframe_index``; a pure function of its inputs."""
    if len(clusters) == 0:
        raise ConfigurationError("channel needs at least one cluster")
    stream = ChannelStream(clusters, geometry, rng_seed, coherence, subcarriers, numerology)
    for _ in range(subframe_index):
        stream.advance()
    return stream.current()


@dataclass(frozen=True)
class Trajectory:
    """Linear motion between two cluster sets (Spot A -> Spot B)."""

    start: tuple
    end: tuple
    duration_subframes: int
    start_subframe: int = 0

    def __post_init__(self):
        object.__setattr__(self, "start", tuple(self.start))
        object.__setattr__(self, "end", tuple(self.end))
        if len(self.start) != len(self.end):
            raise ConfigurationError("trajectory endpoints have different cluster counts")
        if self.duration_subframes < 0:
            raise ConfigurationError("trajectory duration must be >= 0")

    def __call__(self, subframe_index):
        return evolve_trajectory(self, subframe_index)


def _lerp_cluster(a, b, f):
    return PathCluster(
        azimuth=a.azimuth + f * (b.azimuth - a.azimuth),
        elevation=a.elevation + f * (b.elevation - a.elevation),
        power_fraction=a.power_fraction + f * (b.power_fraction - a.power_fraction),
        delay_s=a.delay_s + f * (b.delay_s - a.delay_s),
        doppler_phase_rate=a.doppler_phase_rate + f * (b.doppler_phase_rate - a.doppler_phase_rate),
    )


def evolve_trajectory(trajectory, subframe_index):
    """Cluster set at ``subframe_index``: endpoints held outside the motion window."""
    t = subframe_index - trajectory.start_subframe
    if trajectory.duration_subframes == 0:
        return list(trajectory.end if t >= 0 else trajectory.start)
    if t <= 0:
        return list(trajectory.start)
    if t >= trajectory.duration_subframes:
        return list(trajectory.end)
    f = t / trajectory.duration_subframes
    return [_lerp_cluster(a, b, f) for a, b in zip(trajectory.start, trajectory.end)]


def rotate_clusters(clusters, d_azimuth=0.0, d_elevation=0.0):
    return [replace(c, azimuth=c.azimuth + d_azimuth,
                    elevation=float(np.clip(c.elevation + d_elevation, -np.pi / 2, np.pi / 2)))
            for c in clusters]


def rich_scattering_clusters(rng, num_clusters=6, mean_azimuth=0.0, mean_elevation=0.0,
                             angle_spread=np.deg2rad(15.0), delay_spread_s=100e-9,
                             max_delay_s=1e-6, max_doppler=0.05):
    """Laplacian angle offsets around a mean direction, exponential power-delay profile."""
    delays = np.sort(np.concatenate([[0.0], rng.exponential(delay_spread_s, num_clusters - 1)]))
    delays = np.minimum(delays, max_delay_s)
    powers = np.exp(-delays / delay_spread_s)
    powers /= powers.sum()
    az = mean_azimuth + rng.laplace(0.0, angle_spread, num_clusters)
    el = np.clip(mean_elevation + rng.laplace(0.0, angle_spread, num_clusters), -np.pi / 2, np.pi / 2)
    az = (az + np.pi) % (2 * np.pi) - np.pi
    dop = rng.uniform(-max_doppler, max_doppler, num_clusters)
    return [PathCluster(float(a), float(e), float(p), float(d), float(w))
            for a, e, p, d, w in zip(az, el, powers, delays, dop)]


def add_awgn(signal, noise_power, rng):
    """Add circular complex Gaussian noise of total power ``noise_power`` per sample."""
    signal = np.asarray(signal)
    if noise_power < 0:
        raise ConfigurationError("noise power must be >= 0")
    if noise_power == 0:
        return signal.astype(complex, copy=True)
    scale = math.sqrt(noise_power / 2)
    noise = rng.standard_normal(signal.shape) + 1j * rng.standard_normal(signal.shape)
    return signal + scale * noise
