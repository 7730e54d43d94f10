"""Link-level orchestration: channel -> analog weight -> OFDM receiver -> tracker.

Time runs in subframes (1 ms).  The transmitter's sample stream reaches the
receiver ``timing_offset`` samples late; the receiver acquires timing on
PSS subframes and holds the estimate in between.  The analog weight applied
to a received subframe is the one active at that subframe's boundary.

Update cadence.  The RU applies a new weight every ``P`` subframes (one
probe per period, so one tracker iteration spans two periods).  The weight
applied at boundary ``B`` may only use observations from subframes that
ended by ``B - latency``.  Within each period the first
``abandoned_half_frames`` half-frames are excluded from decode statistics
but their power readings still feed the tracker.
"""
from dataclasses import dataclass, field
import hashlib
import math

import numpy as np

from .array_rf import ArrayGeometry, ElementPattern, RfHardwareModel
from .beamtrack import BeamTracker, TrackerConfig, average_power, eigen_oracle
from .channel import (ChannelStream, PathCluster, Trajectory, exact_correlation,
                      rich_scattering_clusters)
from .errors import ConfigurationError, SyncFailure
from .phy import ofdm, receiver
from .phy.filters import FilterSpec, design_lpf
from .phy.numerology import DEFAULT_NUMEROLOGY, has_pss
from .phy.sync import synchronize
from .seeding import CHANNEL, DATA, NOISE, TRACKER, derive_rng, derive_seed

TRACE_HEADER = ("subframe", "weight_id", "snr_db", "oracle_db", "gap_db", "evm_db")


@dataclass(frozen=True)
class LatencyModel:
    tcpip_ms: float = 2.0
    control_program_ms: float = 4.0
    ru_apply_ms: float = 1.0
    update_period_half_frames: int = 3  # 0: a new weight every subframe
    abandoned_half_frames: int = 2

    def __post_init__(self):
        if min(self.tcpip_ms, self.control_program_ms, self.ru_apply_ms) < 0:
            raise ConfigurationError("latency components must be >= 0")
        if self.update_period_half_frames < 0 or self.abandoned_half_frames < 0:
            raise ConfigurationError("half-frame counts must be >= 0")
        if self.update_period_half_frames == 0:
            if self.total_ms > 0:
                raise ConfigurationError("per-subframe updates require zero latency")
            if self.abandoned_half_frames:
                raise ConfigurationError("per-subframe updates cannot abandon half-frames")
            return
        if self.update_period_half_frames < math.ceil(self.total_ms / 5.0):
            raise ConfigurationError("update period shorter than the update latency")
        if self.abandoned_half_frames >= self.update_period_half_frames:
            raise ConfigurationError("cannot abandon every half-frame of a period")

    @classmethod
    def ideal(cls):
        """No latency, a new weight every subframe."""
        return cls(0.0, 0.0, 0.0, 0, 0)

    @property
    def total_ms(self):
        return self.tcpip_ms + self.control_program_ms + self.ru_apply_ms

    def period_subframes(self, numerology=DEFAULT_NUMEROLOGY):
        if self.update_period_half_frames == 0:
            return 1
        return self.update_period_half_frames * numerology.half_frame_subframes

    def latency_subframes(self):
        return math.ceil(self.total_ms - 1e-9)

    def abandoned_subframes(self, numerology=DEFAULT_NUMEROLOGY):
        return self.abandoned_half_frames * numerology.half_frame_subframes


@dataclass(frozen=True)
class LinkScenario:
    """Everything a link trial needs apart from the seed and the run length.

    ``clusters`` is a list of PathCluster, a Trajectory, or None (a rich-
    scattering set is then drawn from the trial seed).  ``snr_db`` is the
    per-element RE SNR for unit channel gain; ``inf`` disables noise.
    ``timing_offset`` None draws an offset in [0, timing_offset_max).
    """

    name: str = "rich"
    geometry: ArrayGeometry = field(default_factory=ArrayGeometry)
    hardware: RfHardwareModel = field(default_factory=RfHardwareModel)
    quantize: bool = True
    tracker: TrackerConfig = field(default_factory=TrackerConfig)
    clusters: object = None
    num_clusters: int = 6
    mean_azimuth: float = 0.0
    mean_elevation: float = 0.0
    angle_spread: float = float(np.deg2rad(15.0))
    max_doppler: float = 0.05
    coherence: float = 1.0
    snr_db: float = 10.0
    modulation: str = "16qam"
    timing_offset: int = None
    timing_offset_max: int = 2048
    timing_backoff: int = 8
    min_peak_ratio: float = 2.0
    baseline_element: int = 0
    tracking_threshold_db: float = 3.0

    def __post_init__(self):
        if not 0 <= self.coherence <= 1:
            raise ConfigurationError("coherence must lie in [0, 1]")
        if not 0 <= self.baseline_element < self.geometry.num_elements:
            raise ConfigurationError("baseline element outside the array")
        if self.timing_offset is not None and not 0 <= self.timing_offset < DEFAULT_NUMEROLOGY.subframe_samples:
            raise ConfigurationError("timing offset must lie within one subframe")

    def cluster_source(self, seed):
        if self.clusters is not None:
            return self.clusters
        rng = derive_rng(seed, CHANNEL, 0)
        return rich_scattering_clusters(rng, self.num_clusters, self.mean_azimuth,
                                        self.mean_elevation, self.angle_spread,
                                        max_doppler=self.max_doppler)

    @property
    def noise_power(self):
        return 0.0 if math.isinf(self.snr_db) else 10 ** (-self.snr_db / 10)


@dataclass
class AppliedWeight:
    weight_id: int
    weight: np.ndarray        # as applied (quantized when the scenario says so)
    apply_subframe: int
    source_subframe: int      # newest observation it depends on, -1 for none


@dataclass
class TrialRecord:
    scenario: str
    seed: int
    subframe: np.ndarray
    weight_id: np.ndarray
    snr_db: np.ndarray
    oracle_db: np.ndarray
    gap_db: np.ndarray
    evm_db: np.ndarray
    valid: np.ndarray          # sync succeeded and the subframe was demodulated
    decoded: np.ndarray        # counted in decode statistics (not abandoned)
    weights: list
    timing_estimates: np.ndarray
    timing_offset: int
    checksums: dict = field(default_factory=dict)

    def rows(self):
        for i in range(self.subframe.size):
            yield (int(self.subframe[i]), int(self.weight_id[i]), float(self.snr_db[i]),
                   float(self.oracle_db[i]), float(self.gap_db[i]), float(self.evm_db[i]))

    def mean_snr_db(self, fraction=0.5, decoded_only=True):
        """dB of the time-averaged linear SNR over the last ``fraction`` of subframes."""
        start = int(round(self.subframe.size * (1 - fraction)))
        sel = self.valid[start:].copy()
        if decoded_only:
            sel &= self.decoded[start:]
        snr = self.snr_db[start:][sel]
        snr = snr[np.isfinite(snr)]
        if snr.size == 0:
            return float("nan")
        return float(10 * np.log10(np.mean(10 ** (snr / 10))))


def audit_causality(record, latency, numerology=DEFAULT_NUMEROLOGY):
    """List of violations of the update cadence and latency rules (empty when clean)."""
    period = latency.period_subframes(numerology)
    lat = latency.total_ms
    problems = []
    for w in record.weights:
        if w.apply_subframe % period:
            problems.append(f"weight {w.weight_id} applied off-boundary at {w.apply_subframe}")
        if w.source_subframe >= 0 and w.apply_subframe - (w.source_subframe + 1) < lat - 1e-9:
            problems.append(f"weight {w.weight_id} uses subframe {w.source_subframe}, "
                            f"applied at {w.apply_subframe}")
    changes = np.flatnonzero(np.diff(record.weight_id)) + 1
    for i in changes:
        if record.subframe[i] % period:
            problems.append(f"weight change inside a period at subframe {record.subframe[i]}")
    return problems


class _Digest:
    def __init__(self):
        self._h = hashlib.sha256()

    def update(self, arr):
        self._h.update(np.ascontiguousarray(arr).tobytes())

    def hexdigest(self):
        return self._h.hexdigest()


class _WeightController:
    """Owns the tracker and enforces the RU cadence; a fixed weight when no tracker."""

    def __init__(self, tracker, fixed, latency, numerology):
        self.tracker = tracker
        self.period = latency.period_subframes(numerology)
        self.latency = latency.total_ms
        self.weights = []
        self._acc = []          # (subframe, power) readings for the probe on air
        self._probe_done = False
        if tracker is None:
            self._new(fixed, 0, -1)
        else:
            self._new(tracker.next_probe(), 0, -1)
        self._source = -1

    def _new(self, w, subframe, source):
        self.weights.append(AppliedWeight(len(self.weights), np.asarray(w), subframe, source))

    @property
    def current(self):
        return self.weights[-1]

    def observe(self, subframe, power):
        """Power reading for ``subframe`` (None when the subframe was unusable)."""
        if self.tracker is None:
            return
        start = self.current.apply_subframe
        deadline = start + self.period - self.latency  # reading must end by this time
        if power is not None and subframe + 1 <= deadline + 1e-9:
            self._acc.append((subframe, power))

    def boundary(self, subframe):
        """Called before ``subframe`` is received; switches weights on period boundaries."""
        if self.tracker is None or subframe == 0 or subframe % self.period:
            return
        if self._acc:
            src = max(s for s, _ in self._acc)
            self.tracker.observe(float(np.mean([p for _, p in self._acc])), src)
            self._source = max(self._source, src)
            w = self.tracker.next_probe()
        else:
            # nothing measured under this probe: keep it on air another period
            w = self.current.weight
        self._acc = []
        self._new(w, subframe, self._source)


def _modulated_subframe(grid, h_bb, numerology):
    values = grid.values.copy()
    rows = np.ones(numerology.num_rows, dtype=bool)
    rows[numerology.dc_row] = False
    values[rows] *= h_bb[:, None]
    values[~rows] = 0
    return ofdm.ofdm_modulate(values, numerology)


def run_link_trial(scenario, latency, subframes, seed, *, baseline=False, decode=True,
                   numerology=DEFAULT_NUMEROLOGY, iq_sink=None):
    """Simulate one link for ``subframes`` subframes; deterministic in ``seed``.

    ``baseline=True`` replaces the analog beamformer with the single
    element ``scenario.baseline_element`` (no tracker, no quantizer).
    ``decode=False`` skips equalisation (EVM stays NaN); SNR is still measured.
    ``iq_sink``, when given, receives every received sample chunk.
    """
    if subframes < 1:
        raise ConfigurationError("need at least one subframe")
    geo = scenario.geometry
    n = geo.num_elements
    source = scenario.cluster_source(seed)
    stream = ChannelStream(source, geo, derive_seed(seed, CHANNEL, 1), scenario.coherence,
                           numerology=numerology)
    noise_rng = derive_rng(seed, NOISE)
    data_rng = derive_rng(seed, DATA)
    offset_rng = derive_rng(seed, NOISE, 1)
    d0 = (scenario.timing_offset if scenario.timing_offset is not None
          else int(offset_rng.integers(0, scenario.timing_offset_max)))

    hw = scenario.hardware if scenario.quantize else None
    if baseline:
        tracker = None
        fixed = np.zeros(n, dtype=complex)
        fixed[scenario.baseline_element] = 1.0
    else:
        tracker = BeamTracker(n, derive_rng(seed, TRACKER), scenario.tracker, hardware=hw)
        fixed = None
    ctl = _WeightController(tracker, fixed, latency, numerology)

    taps = design_lpf(FilterSpec(sample_rate=numerology.sample_rate)).taps
    replica = ofdm.pss_time_replica(numerology)
    S = numerology.subframe_samples
    n_sym = numerology.symbols_per_subframe
    sigma2 = scenario.noise_power
    period = latency.period_subframes(numerology)
    abandon = latency.abandoned_subframes(numerology)

    ch_digest, noise_digest = _Digest(), _Digest()
    out = {k: np.full(subframes, np.nan) for k in ("snr", "oracle", "gap", "evm")}
    wid = np.zeros(subframes, dtype=int)
    valid = np.zeros(subframes, dtype=bool)
    decoded = np.zeros(subframes, dtype=bool)
    timing = np.full(subframes, -1, dtype=int)
    oracle_cache = {}

    prev_tail = np.zeros(d0, dtype=complex)
    held = None

    for t in range(subframes):
        ctl.boundary(t)
        applied = ctl.current
        wid[t] = applied.weight_id
        ch = stream.step()
        ch_digest.update(ch.h)
        clusters = stream.clusters_at(t)
        key = tuple(clusters)
        if key not in oracle_cache:
            R = exact_correlation(clusters, geo)
            oracle_cache[key] = (R, eigen_oracle(R)[1])
        R, lam = oracle_cache[key]
        p_w = average_power(applied.weight, R)
        out["oracle"][t] = 10 * np.log10(lam / (sigma2 if sigma2 > 0 else 1.0)) if lam > 0 else -np.inf
        out["gap"][t] = 10 * np.log10(lam / p_w) if p_w > 0 else np.inf

        # transmit subframe t; it reaches the receiver d0 samples into chunk t
        bits = ofdm.random_bits(data_rng, numerology, t, scenario.modulation)
        grid = ofdm.map_subframe(bits, scenario.modulation, t, numerology)
        rx = _modulated_subframe(grid, ch.h @ np.conj(applied.weight), numerology)
        unit = noise_rng.standard_normal((2, S))
        noise_digest.update(unit)
        if sigma2 > 0:
            wn = np.vdot(applied.weight, applied.weight).real
            rx = rx + math.sqrt(sigma2 * wn / 2) * (unit[0] + 1j * unit[1])
        block = np.concatenate([prev_tail, rx])   # receiver samples t*S .. (t+1)*S + d0
        prev_tail = rx[S - d0:]
        if iq_sink is not None:
            iq_sink(block[:S])

        if has_pss(numerology, t):
            try:
                est = synchronize(block, replica, taps, numerology, scenario.min_peak_ratio)
                held = max(est - scenario.timing_backoff, 0)
            except SyncFailure:
                held = None
        if held is None or held + S > block.size:
            ctl.observe(t, None)
            continue
        timing[t] = held
        y = ofdm.ofdm_demodulate(block, n_sym, numerology, start=held)
        snr = receiver.measure_snr(y, numerology)
        ctl.observe(t, receiver.rs_power(y, numerology))
        out["snr"][t] = float(snr.snr_db)
        valid[t] = True
        decoded[t] = t % period >= abandon
        if decode and decoded[t]:
            est_h = receiver.estimate_channel(y, numerology)
            out["evm"][t] = receiver.equalize_zf(y, est_h, grid.roles, scenario.modulation).evm_db

    return TrialRecord(
        scenario=scenario.name + (":baseline" if baseline else ""), seed=seed,
        subframe=np.arange(subframes), weight_id=wid, snr_db=out["snr"], oracle_db=out["oracle"],
        gap_db=out["gap"], evm_db=out["evm"], valid=valid, decoded=decoded,
        weights=[w for w in ctl.weights if w.apply_subframe < subframes],
        timing_estimates=timing, timing_offset=d0,
        checksums={"channel": ch_digest.hexdigest(), "noise": noise_digest.hexdigest()})


@dataclass
class ABSummary:
    seed: int
    hybrid_snr_db: float
    baseline_snr_db: float
    gain_db: float
    oracle_gain_db: float
    checksums_match: bool
    hybrid: TrialRecord = None
    baseline: TrialRecord = None


def oracle_gain_db(scenario, seed):
    """Eigen-gain of the first cluster set over the baseline element, in dB."""
    source = scenario.cluster_source(seed)
    clusters = source(0) if callable(source) else source
    R = exact_correlation(clusters, scenario.geometry)
    _, lam, _ = eigen_oracle(R)
    e = scenario.baseline_element
    return float(10 * np.log10(lam / R[e, e].real))


def run_ab_comparison(scenario, seed, subframes=400, latency=None, window=0.5, keep_records=False,
                      decode=False, numerology=DEFAULT_NUMEROLOGY):
    """Hybrid tracker vs single-element baseline on common random numbers."""
    latency = LatencyModel.ideal() if latency is None else latency
    hyb = run_link_trial(scenario, latency, subframes, seed, decode=decode, numerology=numerology)
    base = run_link_trial(scenario, latency, subframes, seed, baseline=True, decode=decode,
                          numerology=numerology)
    h_snr = hyb.mean_snr_db(window)
    b_snr = base.mean_snr_db(window)
    return ABSummary(seed, h_snr, b_snr, h_snr - b_snr, oracle_gain_db(scenario, seed),
                     hyb.checksums == base.checksums,
                     hyb if keep_records else None, base if keep_records else None)


@dataclass
class TrackingSummary:
    record: TrialRecord
    fraction_tracked: float   # share of in-motion subframes with gap below threshold
    reconvergence_subframes: int  # after the motion starts, first subframe back under threshold


def run_trajectory_test(scenario, seed, subframes, latency=None, transient=0,
                        numerology=DEFAULT_NUMEROLOGY, iq_sink=None):
    """Run a trial on a trajectory scenario and score how well the beam follows it.

    ``transient`` subframes after the trajectory start are excluded from the
    tracked fraction.
    """
    traj = scenario.clusters
    if not isinstance(traj, Trajectory):
        raise ConfigurationError("trajectory test needs a Trajectory scenario")
    latency = LatencyModel.ideal() if latency is None else latency
    rec = run_link_trial(scenario, latency, subframes, seed, numerology=numerology, iq_sink=iq_sink)
    t0 = traj.start_subframe
    t1 = max(t0 + traj.duration_subframes, t0 + 1)
    sel = (rec.subframe >= t0 + transient) & (rec.subframe < min(t1, subframes))
    if not sel.any():
        sel = rec.subframe >= t0 + transient
    gaps = rec.gap_db[sel]
    tracked = float(np.mean(gaps < scenario.tracking_threshold_db)) if gaps.size else float("nan")
    after = np.flatnonzero((rec.subframe >= t0) & (rec.gap_db < scenario.tracking_threshold_db))
    reconv = int(rec.subframe[after[0]] - t0) if after.size else -1
    return TrackingSummary(rec, tracked, reconv)


def single_path_scenario(azimuth=0.0, elevation=0.0, **kw):
    return LinkScenario(name="single_path",
                        clusters=[PathCluster(azimuth, elevation, 1.0)], **kw)


def directive_scenario(**kw):
    """Default rich-scattering scenario with a cosine element pattern."""
    geo = ArrayGeometry(6, 1, 0.6, ElementPattern("cosine"))
    return LinkScenario(name="rich", geometry=geo, **kw)
