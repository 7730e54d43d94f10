"""Multi-cell downlink evaluation of conventional vs hybrid small cells.

Building model: ``floors`` stacked floors, each a box of ``length x width``
with ``floor_height`` spacing.  Base stations hang from the ceiling with
their arrays facing straight down; users stand on the floor at a fixed
height with two omnidirectional receive antennas.

BS local frame: boresight is global -z, array rows run along global x and
columns along global y, matching the array module's convention (boresight
+x, rows +z, columns +y).

Per link (BS -> MS) the small-scale channel is a cluster set around the
line-of-sight direction.  Every (receive antenna r, BS chain m) pair sees
the same clusters with independent fading, so both subarrays of a BS share
one correlation matrix.  The conventional BS drives one directive element
per chain (element 0 of the subarray, same fading draw).
"""
from dataclasses import dataclass, field
import math

import numpy as np

from .array_rf import ArrayGeometry, ElementPattern, RfHardwareModel, quantize_weight, steering_vector
from .beamtrack import dominant_eigenpairs
from .errors import ConfigurationError
from .seeding import DROPS, derive_rng

RATE_CAP_BPS = 200e6
VARIANTS = ("conventional", "conventional_no_ici", "hybrid", "hybrid_no_ici")


@dataclass(frozen=True)
class BaseStation:
    bs_id: int
    position: tuple  # (x, y, z) metres
    floor: int


@dataclass(frozen=True)
class Deployment:
    length: float = 60.0
    width: float = 20.0
    floor_height: float = 3.5
    ceiling_height: float = 3.0
    floors: int = 2
    bs_per_floor: int = 5
    tx_power_dbm: float = 23.0
    rf_chains: int = 2
    ms_antennas: int = 2
    ms_height: float = 1.5
    ms_per_floor: int = 50
    subarray: ArrayGeometry = field(
        default_factory=lambda: ArrayGeometry(6, 2, 0.6, ElementPattern("cosine")))
    hardware: RfHardwareModel = field(default_factory=RfHardwareModel)
    bs_positions: tuple = None  # explicit ((x, y, z), ...) overrides the regular layout

    def __post_init__(self):
        if self.floors < 1 or self.bs_per_floor < 0:
            raise ConfigurationError("deployment needs at least one floor")
        if self.rf_chains != 2 or self.ms_antennas != 2:
            raise ConfigurationError("only 2x2 single-user links are modelled")
        if not 0 < self.ms_height < self.ceiling_height <= self.floor_height:
            raise ConfigurationError("need 0 < ms_height < ceiling_height <= floor_height")
        if self.length <= 0 or self.width <= 0:
            raise ConfigurationError("floor dimensions must be positive")
        if not self.base_stations():
            raise ConfigurationError("deployment has no base stations")

    def base_stations(self):
        if self.bs_positions is not None:
            return [BaseStation(i, tuple(map(float, p)), int(p[2] // self.floor_height))
                    for i, p in enumerate(self.bs_positions)]
        out = []
        for f in range(self.floors):
            for j in range(self.bs_per_floor):
                x = (j + 0.5) * self.length / self.bs_per_floor
                y = self.width / 2
                z = f * self.floor_height + self.ceiling_height
                out.append(BaseStation(len(out), (x, y, z), f))
        return out

    def bs_array(self):
        return np.array([b.position for b in self.base_stations()], dtype=float)


@dataclass(frozen=True)
class PropagationModel:
    exponent: float = 3.0
    reference_loss_db: float = 38.0
    floor_loss_db: float = 18.0
    shadowing_db: float = 4.0
    min_distance: float = 1.0
    noise_psd_dbm_hz: float = -174.0
    noise_figure_db: float = 9.0
    bandwidth_hz: float = 20e6
    num_clusters: int = 6
    angle_spread: float = float(np.deg2rad(15.0))
    los_power_fraction: float = 0.5
    fading_draws: int = 4

    def __post_init__(self):
        if self.exponent < 0 or self.floor_loss_db < 0 or self.shadowing_db < 0:
            raise ConfigurationError("pathloss parameters must be non-negative")
        if self.num_clusters < 1 or self.fading_draws < 1:
            raise ConfigurationError("need at least one cluster and one fading draw")
        if not 0 <= self.los_power_fraction <= 1:
            raise ConfigurationError("LOS power fraction must lie in [0, 1]")

    def pathloss_db(self, distance, floors_crossed=0):
        d = np.maximum(np.asarray(distance, dtype=float), self.min_distance)
        return (self.reference_loss_db + 10 * self.exponent * np.log10(d)
                + self.floor_loss_db * np.asarray(floors_crossed))

    @property
    def noise_dbm(self):
        return self.noise_psd_dbm_hz + 10 * math.log10(self.bandwidth_hz) + self.noise_figure_db


@dataclass
class RateSample:
    ms_id: int
    serving_cell: int
    sinr_db: tuple  # per stream, averaged over fading draws
    rate_bps: float
    system: str


def drop_users(deployment, count, rng):
    """``count`` users per floor, uniform over the floor area at MS height.

    Returns (positions (F*count, 3), floor index per user).
    """
    if count < 1:
        raise ConfigurationError("need at least one user per floor")
    xs = rng.uniform(0, deployment.length, (deployment.floors, count))
    ys = rng.uniform(0, deployment.width, (deployment.floors, count))
    floors = np.repeat(np.arange(deployment.floors), count)
    z = floors * deployment.floor_height + deployment.ms_height
    pos = np.column_stack([xs.ravel(), ys.ravel(), z])
    return pos, floors


def local_angles(bs_pos, ms_pos):
    """(azimuth, elevation, distance) of each MS seen from each downward-facing BS.

    Broadcasts bs_pos (B, 3) against ms_pos (U, 3) to shape (U, B).
    """
    d = np.asarray(ms_pos, float)[:, None, :] - np.asarray(bs_pos, float)[None, :, :]
    dist = np.linalg.norm(d, axis=-1)
    lx, ly, lz = -d[..., 2], d[..., 1], d[..., 0]
    az = np.arctan2(ly, lx)
    el = np.arcsin(np.clip(lz / np.where(dist > 0, dist, 1.0), -1, 1))
    return az, el, dist


def floor_of(deployment, z):
    return np.floor(np.asarray(z) / deployment.floor_height).astype(int)


def long_term_gain_db(ms_pos, deployment, propagation, shadowing_db=None):
    """Received power in dBm at each MS from each BS (U, B), no beamforming."""
    bs = deployment.bs_array()
    az, el, dist = local_angles(bs, ms_pos)
    crossed = np.abs(floor_of(deployment, np.asarray(ms_pos)[:, 2])[:, None]
                     - floor_of(deployment, bs[:, 2] - 1e-9)[None, :])
    g = deployment.subarray.pattern.gain(az, el)
    p = deployment.tx_power_dbm - propagation.pathloss_db(dist, crossed) + 10 * np.log10(g)
    if shadowing_db is not None:
        p = p + shadowing_db
    return p


def associate(ms_pos, deployment, propagation, shadowing_db=None, tol_db=1e-9):
    """Serving BS per MS: strongest long-term power, ties to the lowest BS id."""
    p = long_term_gain_db(np.atleast_2d(ms_pos), deployment, propagation, shadowing_db)
    best = p.max(axis=1, keepdims=True)
    return np.argmax(p >= best - tol_db, axis=1)


def _link_clusters(rng, az0, el0, propagation):
    """Cluster angles/powers around LOS directions; arrays of shape (links, L)."""
    L = propagation.num_clusters
    shape = np.shape(az0) + (L,)
    az = np.asarray(az0)[..., None] + rng.laplace(0.0, propagation.angle_spread, shape)
    el = np.asarray(el0)[..., None] + rng.laplace(0.0, propagation.angle_spread, shape)
    az[..., 0] = az0
    el[..., 0] = el0
    az = (az + np.pi) % (2 * np.pi) - np.pi
    el = np.clip(el, -np.pi / 2, np.pi / 2)
    if L == 1:
        p = np.ones(shape)
    else:
        w = rng.exponential(1.0, shape[:-1] + (L - 1,))
        w /= w.sum(axis=-1, keepdims=True)
        p = np.concatenate([np.full(shape[:-1] + (1,), propagation.los_power_fraction),
                            (1 - propagation.los_power_fraction) * w], axis=-1)
    return az, el, p


def link_responses(geometry, az, el, p):
    """sqrt(p G) a for every cluster, shape (..., L, N)."""
    a = steering_vector(geometry, az, el)          # (N, ..., L)
    amp = np.sqrt(p * geometry.pattern.gain(az, el))
    return np.moveaxis(a, 0, -1) * amp[..., None]


def correlation_from_responses(b):
    """R = sum_l b_l b_l^H for responses (..., L, N)."""
    return np.einsum("...li,...lj->...ij", b, b.conj())


def compute_rate(H, interference_cov, noise_power, bandwidth=20e6, tx_power=1.0, cap=RATE_CAP_BPS):
    """Capped SU-MIMO rate with equal power over the transmit streams.

    ``H`` (..., Nr, Nt) includes path gain; ``interference_cov`` (..., Nr, Nr).
    Returns (rate_bps, per-stream SINR, regularised flag).  A singular
    Q = noise + interference is regularised with a 1e-30 floor.
    """
    H = np.asarray(H, dtype=complex)
    nr, nt = H.shape[-2:]
    Q = np.asarray(interference_cov, dtype=complex) + noise_power * np.eye(nr)
    floor = 1e-30
    lam_min = np.linalg.eigvalsh(Q)[..., 0]
    singular = lam_min <= floor
    if np.any(singular):
        Q = Q + np.where(singular, floor, 0.0)[..., None, None] * np.eye(nr)
    Qi = np.linalg.inv(Q)
    M = (tx_power / nt) * (np.conj(np.swapaxes(H, -1, -2)) @ Qi @ H)
    M = 0.5 * (M + np.conj(np.swapaxes(M, -1, -2)))
    ev = np.clip(np.linalg.eigvalsh(M), 0.0, None)
    rate = bandwidth * np.sum(np.log2(1 + ev), axis=-1)
    return np.minimum(rate, cap), ev[..., ::-1], singular


@dataclass
class DropResult:
    rates: dict         # variant -> array of per-scheduled-user rates
    serving: np.ndarray
    ms_ids: np.ndarray
    sinr_db: dict

    def samples(self):
        """Flatten into RateSample records."""
        out = []
        for v in VARIANTS:
            for i, (ms, cell) in enumerate(zip(self.ms_ids, self.serving)):
                out.append(RateSample(int(ms), int(cell), tuple(map(float, self.sinr_db[v][i])),
                                      float(self.rates[v][i]), v))
        return out


def beamform_weights(R, hardware=None):
    """Saturated (eigenvector) weights for a stack of correlations, optionally quantized."""
    w, lam = dominant_eigenpairs(R)
    if hardware is not None:
        w = np.stack([quantize_weight(x, hardware) for x in w.reshape(-1, w.shape[-1])]).reshape(w.shape)
    return w, lam


def beamform_downlink(h, weights=None):
    """Effective channels from element-domain channels.

    ``h`` (..., Nr, M, N) element responses of each (rx antenna, BS chain);
    ``weights`` (..., M, N) analog weights (hybrid) or None (conventional,
    element 0 only).  Returns (..., Nr, M).
    """
    h = np.asarray(h)
    if weights is None:
        return h[..., 0]
    return np.einsum("...rmn,...mn->...rm", h, np.conj(weights))


def simulate_drop(deployment, propagation, rng, quantize=True):
    """One drop: place users, associate, schedule one user per cell, rate all variants."""
    bs = deployment.bs_array()
    B = bs.shape[0]
    ms, _ = drop_users(deployment, deployment.ms_per_floor, rng)
    shadow = rng.normal(0.0, propagation.shadowing_db, (ms.shape[0], B))
    serving = associate(ms, deployment, propagation, shadow)
    cells = [b for b in range(B) if np.any(serving == b)]
    sched = np.array([rng.choice(np.flatnonzero(serving == b)) for b in cells], dtype=int)
    cells = np.array(cells, dtype=int)
    rates = {v: np.zeros(0) for v in VARIANTS}
    sinr = {v: np.zeros((0, 2)) for v in VARIANTS}
    if cells.size == 0:
        return DropResult(rates, cells, sched, sinr)

    geo = deployment.subarray
    U = sched.size
    pos = ms[sched]
    az, el, dist = local_angles(bs, pos)  # (U, B)
    crossed = np.abs(floor_of(deployment, pos[:, 2])[:, None] - floor_of(deployment, bs[:, 2] - 1e-9)[None, :])
    path_db = propagation.pathloss_db(dist, crossed) - shadow[sched]
    amp = 10 ** (-path_db / 20)
    caz, cel, cp = _link_clusters(rng, az, el, propagation)
    b = link_responses(geo, caz, cel, cp)             # (U, B, L, N)
    L, N = b.shape[-2:]
    F = propagation.fading_draws
    g = (rng.standard_normal((F, U, B, 2, 2, L)) + 1j * rng.standard_normal((F, U, B, 2, 2, L))) / math.sqrt(2)
    h = np.einsum("fubrml,ubln->fubrmn", g, b) * amp[None, :, :, None, None, None]

    # each cell's beam points at its own scheduled user
    own = b[np.arange(U), cells]                       # (U, L, N)
    R = correlation_from_responses(own)
    w, _ = beamform_weights(R, deployment.hardware if quantize else None)
    W = np.broadcast_to(w[:, None, :], (U, 2, N))     # same weight on both chains

    tx = 10 ** ((deployment.tx_power_dbm - 30) / 10)
    noise = 10 ** ((propagation.noise_dbm - 30) / 10)
    for system in ("conventional", "hybrid"):
        # heff[f, u, j] : effective 2x2 from BS cells[j] to scheduled user u
        hc = h[:, :, cells]                            # (F, U, U, 2, 2, N)
        heff = beamform_downlink(hc, None if system == "conventional" else W[None, None, :])
        direct = heff[:, np.arange(U), np.arange(U)]   # (F, U, 2, 2)
        cov = np.einsum("fujrm,fujsm->fujrs", heff, heff.conj()) * (tx / 2)
        cov[:, np.arange(U), np.arange(U)] = 0
        ici = cov.sum(axis=2)
        for tag, Q in ((system, ici), (system + "_no_ici", np.zeros_like(ici))):
            r, ev, _ = compute_rate(direct, Q, noise, propagation.bandwidth_hz, tx)
            rates[tag] = r.mean(axis=0)
            sinr[tag] = 10 * np.log10(np.maximum(ev.mean(axis=0), 1e-30))
    return DropResult(rates, cells, sched, sinr)


def _run_drops(args):
    deployment, propagation, seed, drops, quantize = args
    out = {v: [] for v in VARIANTS}
    for d in drops:
        res = simulate_drop(deployment, propagation, derive_rng(seed, DROPS, d), quantize)
        for v in VARIANTS:
            out[v].append(res.rates[v])
    return {v: np.concatenate(x) if x else np.zeros(0) for v, x in out.items()}


def empirical_cdf(samples):
    """(sorted values, cumulative fraction); one row per distinct value."""
    x = np.sort(np.asarray(samples, dtype=float))
    if x.size == 0:
        return x, x
    vals, idx = np.unique(x, return_index=True)
    ends = np.append(idx[1:], x.size)
    return vals, ends / x.size


@dataclass
class SystemResult:
    rates: dict
    means: dict = field(default_factory=dict)
    percentiles: dict = field(default_factory=dict)

    def __post_init__(self):
        for v, r in self.rates.items():
            self.means[v] = float(np.mean(r)) if r.size else float("nan")
            self.percentiles[v] = ({p: float(np.percentile(r, p)) for p in (5, 50, 95)}
                                   if r.size else {})

    def cdf(self, variant):
        return empirical_cdf(self.rates[variant])


def run_system_eval(deployment, propagation, drops, seed, workers=1, quantize=True, chunk=250):
    """Rates of every scheduled user over ``drops`` drops for all four variants.

    Drop ``d`` draws from ``derive_rng(seed, DROPS, d)``, so results do not
    depend on the worker count; chunks are merged in drop order.
    """
    if drops < 1:
        raise ConfigurationError("need at least one drop")
    jobs = [(deployment, propagation, seed, range(s, min(s + chunk, drops)), quantize)
            for s in range(0, drops, chunk)]
    if workers > 1 and len(jobs) > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(workers) as ex:
            parts = list(ex.map(_run_drops, jobs))
    else:
        parts = [_run_drops(j) for j in jobs]
    rates = {v: np.concatenate([p[v] for p in parts]) for v in VARIANTS}
    return SystemResult(rates)
