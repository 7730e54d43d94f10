"""CSI-free analog beam tracking by two-sided perturbation probing.

One iteration:

1. draw a random unit direction ``p`` orthogonal to the current weight
   ``a`` and form the probe pair ``w+- = normalize(a +- delta p)``;
2. apply each probe for (at least) one subframe and measure the mean
   received baseband power under it;
3. turn the power difference into a directional-derivative estimate,
   fold it into an exponentially smoothed gradient and take the unit
   vector ``g`` along it;
4. step ``a <- normalize(a + alpha g)``.

The step size ``alpha`` is the decaying schedule ``alpha0 / (1 + i / tau)``
scaled by ``min(1, gain * (N - 1) * |s| / P)``, where ``|s|`` is the
smoothed gradient magnitude and ``P`` the running mean probe power.  The
ratio makes the weight trajectory independent of channel scale and shrinks
the step as the gradient vanishes at the optimum.
"""
from collections import deque
from dataclasses import dataclass, field, replace
import math

import numpy as np

from .array_rf import normalize, quantize_weight
from .errors import ConfigurationError

GAP_CAP_DB = 100.0


@dataclass(frozen=True)
class TrackerConfig:
    step0: float = 0.3
    step_tau: float = 200.0
    delta: float = 0.05
    smoothing: float = 0.7
    step_gain: float = 0.5
    history: int = 32
    min_separation: float = 1.0  # quantized probes: required share of the nominal separation
    max_delta: float = 0.5
    probe_attempts: int = 24

    def __post_init__(self):
        if not self.step0 > 0:
            raise ConfigurationError("step0 must be positive")
        if not 0 < self.delta < 1:
            raise ConfigurationError("delta must lie in (0, 1)")
        if not 0 <= self.smoothing < 1:
            raise ConfigurationError("smoothing must lie in [0, 1)")
        if self.history < 1:
            raise ConfigurationError("history must be >= 1")
        if not self.delta <= self.max_delta < 1:
            raise ConfigurationError("max_delta must lie in [delta, 1)")
        if self.probe_attempts < 1 or self.min_separation < 0:
            raise ConfigurationError("probe_attempts must be >= 1 and min_separation >= 0")


@dataclass
class PowerObservation:
    weight: np.ndarray  # weight actually applied (possibly quantized)
    power: float
    subframe_index: int = -1

    def __post_init__(self):
        if self.power < 0:
            raise ValueError("observed power must be >= 0")


@dataclass
class TrackerState:
    weight: np.ndarray
    iteration: int = 0
    step_size: float = 0.3
    delta: float = 0.05
    gradient: np.ndarray = None  # smoothed raw gradient estimate s_i
    mean_power: float = None
    history: deque = field(default_factory=lambda: deque(maxlen=32))

    def __post_init__(self):
        self.weight = np.asarray(self.weight, dtype=complex)
        if abs(np.linalg.norm(self.weight) - 1) > 1e-9:
            raise ConfigurationError("tracker weight must be unit norm")
        if self.gradient is None:
            self.gradient = np.zeros_like(self.weight)


def random_unit_vector(rng, n):
    return normalize(rng.standard_normal(n) + 1j * rng.standard_normal(n))


def initial_state(n, rng, config=TrackerConfig()):
    """Uniformly random unit weight on the complex sphere."""
    return TrackerState(random_unit_vector(rng, n), step_size=config.step0, delta=config.delta,
                        history=deque(maxlen=config.history))


def tangent(v, a):
    """Component of ``v`` orthogonal (complex sense) to unit vector ``a``."""
    return v - a * np.vdot(a, v)


def perturb(state, rng):
    """Probe pair (w+, w-) and the direction p used to build it."""
    a = state.weight
    while True:
        p = tangent(rng.standard_normal(a.size) + 1j * rng.standard_normal(a.size), a)
        n = np.linalg.norm(p)
        if n >= 1e-12:
            break
    p = p / n
    return normalize(a + state.delta * p), normalize(a - state.delta * p), p


def _align(w, a):
    """Unit-normalised ``w`` rotated so that <a, w> is real and non-negative."""
    w = np.asarray(w, dtype=complex)
    w = w / np.linalg.norm(w)
    c = np.vdot(a, w)
    return w if c == 0 else w * np.exp(-1j * np.angle(c))


def probe_direction(obs_plus, obs_minus, a):
    """Tangent direction actually separating the two applied probes."""
    return tangent(_align(obs_plus.weight, a) - _align(obs_minus.weight, a), a)


def raw_gradient(obs_plus, obs_minus, a):
    """Directional-derivative estimate times its direction.

    Powers are normalised by the applied weights' squared norms (quantized
    weights are not unit norm).  With unquantized probes the separation is
    2 delta / sqrt(1 + delta^2) along p, and the returned vector equals
    2 Re(p^H R a) p for a noiseless quadratic power P(w) = w^H R w.
    """
    q = probe_direction(obs_plus, obs_minus, a)
    nq = np.linalg.norm(q)
    if nq < 1e-12:
        return np.zeros_like(a)
    p_plus = obs_plus.power / np.vdot(obs_plus.weight, obs_plus.weight).real
    p_minus = obs_minus.power / np.vdot(obs_minus.weight, obs_minus.weight).real
    return (p_plus - p_minus) / nq ** 2 * q


def estimate_gradient(obs_plus, obs_minus, a, previous=None, smoothing=0.0):
    """Unit ascent direction g and the smoothed raw gradient it came from.

    ``previous`` is the last smoothed gradient; it is transported to the
    tangent space at ``a`` before mixing.  Equal powers give g = 0.
    """
    r = raw_gradient(obs_plus, obs_minus, a)
    if previous is None:
        s = r
    else:
        s = smoothing * tangent(previous, a) + (1 - smoothing) * r
    n = np.linalg.norm(s)
    if obs_plus.power == obs_minus.power or n == 0:
        return np.zeros_like(a), s
    return s / n, s


def directional_derivative(obs_plus, obs_minus, delta):
    """Central difference (P+ - P-) / (2 delta) of the probe pair."""
    return (obs_plus.power - obs_minus.power) / (2 * delta)


def scheduled_step(config, iteration):
    return config.step0 / (1 + iteration / config.step_tau)


def update_weight(state, g, config=TrackerConfig(), step=None):
    """New state with a_{i+1} = (a_i + alpha g) / |a_i + alpha g|."""
    alpha = state.step_size if step is None else step
    g = np.asarray(g, dtype=complex)
    ng = np.linalg.norm(g)
    if ng != 0 and abs(ng - 1) > 1e-9:
        raise ConfigurationError("gradient direction must be zero or unit norm")
    new = state.weight if ng == 0 else normalize(state.weight + alpha * g)
    i = state.iteration + 1
    return replace(state, weight=new, iteration=i, step_size=scheduled_step(config, i))


def dominant_eigenpairs(R, tol=1e-13, max_squarings=64, max_polish=200):
    """Dominant eigenpairs of a stack of Hermitian PSD matrices, shape (..., N, N).

    Power iteration accelerated by repeated squaring: the trace-normalised
    matrix is squared until R^(2^k) is numerically rank one, its strongest
    column seeds plain power iterations that stop once every residual
    |R a - lambda a| is below ``tol * lambda``.  Returns (vectors, values).
    """
    R = np.asarray(R, dtype=complex)
    batch = R.shape[:-2]
    n = R.shape[-1]
    R = R.reshape((-1, n, n))
    tr = np.trace(R, axis1=1, axis2=2).real
    zero = tr <= 0
    P = R / np.where(zero, 1.0, tr)[:, None, None]
    for _ in range(max_squarings):
        P2 = P @ P
        t2 = np.trace(P2, axis1=1, axis2=2).real
        P2 /= np.where(t2 > 0, t2, 1.0)[:, None, None]
        P2 = 0.5 * (P2 + np.conj(np.swapaxes(P2, 1, 2)))
        change = np.abs(P2 - P).max()
        P = P2
        if change < 1e-15:
            break
    cols = np.argmax(np.linalg.norm(P, axis=1), axis=1)
    a = P[np.arange(P.shape[0]), :, cols]
    na = np.linalg.norm(a, axis=1, keepdims=True)
    a = np.where(na > 0, a / np.where(na > 0, na, 1.0), np.eye(n, dtype=complex)[0])
    for _ in range(max_polish):
        b = np.einsum("bij,bj->bi", R, a)
        lam = np.einsum("bi,bi->b", a.conj(), b).real
        res = np.linalg.norm(b - lam[:, None] * a, axis=1)
        if np.all((res <= tol * np.abs(lam)) | zero):
            break
        nb = np.linalg.norm(b, axis=1, keepdims=True)
        a = np.where(nb > 0, b / np.where(nb > 0, nb, 1.0), a)
    b = np.einsum("bij,bj->bi", R, a)
    lam = np.einsum("bi,bi->b", a.conj(), b).real
    # phase convention: largest-magnitude entry real and positive
    k = np.argmax(np.abs(a), axis=1)
    a = a * np.exp(-1j * np.angle(a[np.arange(a.shape[0]), k]))[:, None]
    a[zero] = np.eye(n, dtype=complex)[0]
    lam[zero] = 0.0
    return a.reshape(batch + (n,)), lam.reshape(batch)


def eigen_oracle(R, degeneracy_tol=1e-6):
    """Optimal unit beam weight for correlation ``R`` and its average power.

    Returns (a, lambda_max, degenerate); ``degenerate`` flags a top
    eigenvalue of multiplicity > 1 within ``degeneracy_tol`` (relative), in
    which case ``a`` is some vector of the top eigenspace.
    """
    R = np.asarray(R, dtype=complex)
    a, lam = dominant_eigenpairs(R[None])
    a, lam = a[0], float(lam[0])
    if lam <= 0:
        return a, 0.0, True
    deflated = R - lam * np.outer(a, a.conj())
    _, lam2 = dominant_eigenpairs(deflated[None], tol=1e-10)
    return a, lam, bool(lam2[0] >= lam * (1 - degeneracy_tol))


def average_power(w, R):
    w = np.asarray(w, dtype=complex)
    return np.vdot(w, R @ w).real / np.vdot(w, w).real


def optimality_gap(weight, R, lam_max=None):
    """10 log10(lambda_max / (a^H R a)), capped at 100 dB."""
    if lam_max is None:
        _, lam_max, _ = eigen_oracle(R)
    p = average_power(weight, R)
    if p <= lam_max * 10 ** (-GAP_CAP_DB / 10):
        return GAP_CAP_DB
    return float(max(10 * math.log10(lam_max / p), 0.0))


class BeamTracker:
    """Stateful driver: hands out probe weights and consumes their power readings.

    Usage per iteration: ``w = next_probe()`` -> apply, measure ->
    ``observe(power)``; after the minus probe the weight is updated.
    With ``hardware`` set, probes are quantized before being handed out and
    the gradient is computed from the quantized weights.
    """

    def __init__(self, n, rng, config=TrackerConfig(), hardware=None, initial_weight=None):
        self.config = config
        self.hardware = hardware
        self.rng = rng
        if initial_weight is None:
            self.state = initial_state(n, rng, config)
        else:
            self.state = TrackerState(normalize(initial_weight), step_size=config.step0,
                                      delta=config.delta, history=deque(maxlen=config.history))
        self._pending = None
        self._obs = []

    @property
    def weight(self):
        return self.state.weight

    def _applied(self, w):
        return w if self.hardware is None else quantize_weight(w, self.hardware)

    def next_probe(self):
        if not self._obs:
            self._pending = self._draw_probes()
        return self._pending[len(self._obs)]

    def _draw_probes(self):
        """Probe pair as applied.

        A quantizer can collapse nearby probes onto the same levels, which
        makes the power difference meaningless.  Directions are redrawn until
        the applied probes are at least ``min_separation`` times the nominal
        distance apart; every fourth failed draw doubles delta (up to
        ``max_delta``).  The last draw is used if none qualifies.
        """
        cfg, st = self.config, self.state
        if self.hardware is None:
            w_plus, w_minus, p = perturb(st, self.rng)
            return w_plus, w_minus, p
        a = st.weight
        target = cfg.min_separation * 2 * st.delta / math.sqrt(1 + st.delta ** 2)
        probe = st
        for k in range(cfg.probe_attempts):
            w_plus, w_minus, p = perturb(probe, self.rng)
            q_plus, q_minus = self._applied(w_plus), self._applied(w_minus)
            sep = np.linalg.norm(tangent(_align(q_plus, a) - _align(q_minus, a), a))
            if sep >= target:
                break
            if k % 4 == 3:
                probe = replace(st, delta=min(2 * probe.delta, cfg.max_delta))
        return q_plus, q_minus, p

    def observe(self, power, subframe_index=-1):
        """Record the power measured under the last probe; returns True when the weight moved."""
        if self._pending is None:
            raise RuntimeError("observe() called before next_probe()")
        w = self._pending[len(self._obs)]
        obs = PowerObservation(w, max(float(power), 0.0), subframe_index)
        self._obs.append(obs)
        self.state.history.append((w, obs.power))
        if len(self._obs) < 2:
            return False
        self._step(*self._obs)
        self._obs = []
        self._pending = None
        return True

    def _step(self, obs_plus, obs_minus):
        cfg = self.config
        st = self.state
        a = st.weight
        mean = 0.5 * (obs_plus.power / np.vdot(obs_plus.weight, obs_plus.weight).real
                      + obs_minus.power / np.vdot(obs_minus.weight, obs_minus.weight).real)
        st.mean_power = mean if st.mean_power is None else (
            cfg.smoothing * st.mean_power + (1 - cfg.smoothing) * mean)
        g, s = estimate_gradient(obs_plus, obs_minus, a, st.gradient, cfg.smoothing)
        st.gradient = s
        if st.mean_power > 0:
            ratio = cfg.step_gain * (a.size - 1) * np.linalg.norm(s) / st.mean_power
        else:
            ratio = 1.0
        alpha = scheduled_step(cfg, st.iteration) * min(1.0, ratio)
        self.state = update_weight(st, g, cfg, step=alpha)


RS_PER_SUBFRAME = 800


def track_static(R, iterations, rng, config=TrackerConfig(), hardware=None, noise_power=0.0,
                 rs_count=RS_PER_SUBFRAME, initial_weight=None):
    """Drive a BeamTracker against a fixed correlation matrix.

    A noise-free reading under weight w is w^H R w.  With ``noise_power``
    > 0 it is the mean of |sqrt(w^H R w) + n_k|^2 over ``rs_count`` RS REs,
    n_k ~ CN(0, noise_power |w|^2), the same statistic the receiver reports.
    Returns (tracker, gaps) with gaps[i] the gap of the weight held after
    i iterations (quantized when ``hardware`` is set).
    """
    R = np.asarray(R, dtype=complex)
    _, lam, _ = eigen_oracle(R)
    tracker = BeamTracker(R.shape[0], rng, config, hardware=hardware, initial_weight=initial_weight)

    def held():
        return tracker.weight if hardware is None else quantize_weight(tracker.weight, hardware)

    def reading(w):
        p = np.vdot(w, R @ w).real
        if noise_power <= 0:
            return p
        s = np.sqrt(max(p, 0.0))
        sd = math.sqrt(noise_power * np.vdot(w, w).real / 2)
        n = sd * (rng.standard_normal(rs_count) + 1j * rng.standard_normal(rs_count))
        return float(np.mean(np.abs(s + n) ** 2))

    gaps = np.empty(iterations + 1)
    gaps[0] = optimality_gap(held(), R, lam)
    for i in range(iterations):
        for _ in range(2):
            tracker.observe(reading(tracker.next_probe()))
        gaps[i + 1] = optimality_gap(held(), R, lam)
    return tracker, gaps
