"""Scenario files: INI-style sections of ``key = value`` lines.

Every section maps onto a dataclass; keys not declared by that dataclass are
rejected, with the offending line number in the message.  ``[run] seed`` is
mandatory.  Angles are given in degrees, cluster lists as
``azimuth_deg elevation_deg power [delay_ns [doppler_rad_per_subframe]]``
entries separated by ``;``.
"""
from dataclasses import dataclass, field, fields, replace
import configparser
import hashlib
import math
import re

from .array_rf import ArrayGeometry, ElementPattern, RfHardwareModel
from .beamtrack import TrackerConfig
from .channel import PathCluster, Trajectory
from .errors import ConfigurationError, HybridBFError
from .linksim import LatencyModel, LinkScenario
from .phy.numerology import Numerology
from .phy.ofdm import bits_per_symbol
from .syssim import Deployment, PropagationModel


@dataclass(frozen=True)
class RunConfig:
    seed: int = None
    mode: str = "trial"        # link command: trial | ab | trajectory
    subframes: int = 1000
    trials: int = 1            # ab mode: number of seeds
    drops: int = 1000
    workers: int = 0           # 0: one per available core
    out: str = "results"
    iq_dump: bool = False

    def __post_init__(self):
        if self.mode not in ("trial", "ab", "trajectory"):
            raise ConfigurationError(f"unknown mode {self.mode!r}")
        if self.subframes < 1 or self.trials < 1 or self.drops < 1 or self.workers < 0:
            raise ConfigurationError("counts must be positive")


@dataclass(frozen=True)
class ArrayConfig:
    rows: int = 6
    cols: int = 1
    spacing_wavelengths: float = 0.6
    pattern: str = "cosine"
    pattern_exponent: float = 1.0
    front_to_back_db: float = 20.0

    def __post_init__(self):
        self.build()

    def build(self):
        return ArrayGeometry(self.rows, self.cols, self.spacing_wavelengths,
                             ElementPattern(self.pattern, self.pattern_exponent, self.front_to_back_db))


@dataclass(frozen=True)
class HardwareConfig:
    phase_bits: int = 4
    amplitude_bits: int = 6
    amplitude_step_db: float = 0.25
    update_delay_ms: float = 1.0
    quantize: bool = True

    def __post_init__(self):
        if self.phase_bits < 1 or self.amplitude_bits < 1:
            raise ConfigurationError("quantizer needs at least one bit")
        if not self.amplitude_step_db > 0 or self.update_delay_ms < 0:
            raise ConfigurationError("amplitude step must be positive, delay non-negative")

    def build(self):
        return RfHardwareModel(self.phase_bits, self.amplitude_bits, self.amplitude_step_db,
                               self.update_delay_ms)


def parse_clusters(text):
    out = []
    for item in text.split(";"):
        item = item.strip()
        if not item:
            continue
        try:
            vals = [float(v) for v in item.split()]
        except ValueError:
            raise ConfigurationError(f"bad cluster entry {item!r}") from None
        if not 3 <= len(vals) <= 5:
            raise ConfigurationError(f"cluster entry {item!r} needs 3 to 5 numbers")
        vals += [0.0] * (5 - len(vals))
        out.append(PathCluster(math.radians(vals[0]), math.radians(vals[1]), vals[2],
                               vals[3] * 1e-9, vals[4]))
    return out


@dataclass(frozen=True)
class ChannelConfig:
    model: str = "rich"        # rich | clusters
    clusters: str = ""
    trajectory_end: str = ""
    trajectory_start: int = 0
    trajectory_duration: int = 0
    num_clusters: int = 6
    mean_azimuth_deg: float = 0.0
    mean_elevation_deg: float = 0.0
    angle_spread_deg: float = 15.0
    max_doppler: float = 0.05
    coherence: float = 1.0
    snr_db: float = 10.0

    def __post_init__(self):
        if self.model not in ("rich", "clusters"):
            raise ConfigurationError(f"unknown channel model {self.model!r}")
        if self.model == "clusters" and not parse_clusters(self.clusters):
            raise ConfigurationError("channel model 'clusters' needs a clusters list")
        if self.trajectory_end and self.model != "clusters":
            raise ConfigurationError("a trajectory needs an explicit clusters list")
        parse_clusters(self.trajectory_end)

    def cluster_source(self):
        if self.model == "rich":
            return None
        start = parse_clusters(self.clusters)
        if not self.trajectory_end:
            return start
        return Trajectory(start, parse_clusters(self.trajectory_end), self.trajectory_duration,
                          self.trajectory_start)


@dataclass(frozen=True)
class LinkConfig:
    modulation: str = "16qam"
    timing_offset: int = -1    # -1: drawn from the seed
    timing_offset_max: int = 2048
    timing_backoff: int = 8
    min_peak_ratio: float = 2.0
    baseline_element: int = 0
    tracking_threshold_db: float = 3.0
    window: float = 0.5        # ab mode: trailing share of subframes averaged

    def __post_init__(self):
        bits_per_symbol(self.modulation)
        if not 0 < self.window <= 1:
            raise ConfigurationError("window must lie in (0, 1]")


@dataclass(frozen=True)
class DeploymentConfig:
    length: float = 60.0
    width: float = 20.0
    floor_height: float = 3.5
    ceiling_height: float = 3.0
    floors: int = 2
    bs_per_floor: int = 5
    tx_power_dbm: float = 23.0
    ms_height: float = 1.5
    ms_per_floor: int = 50
    subarray_rows: int = 6
    subarray_cols: int = 2
    spacing_wavelengths: float = 0.6
    pattern: str = "cosine"
    pattern_exponent: float = 1.0
    front_to_back_db: float = 20.0
    quantize: bool = True

    def __post_init__(self):
        self.build(RfHardwareModel())

    def build(self, hardware):
        geo = ArrayGeometry(self.subarray_rows, self.subarray_cols, self.spacing_wavelengths,
                            ElementPattern(self.pattern, self.pattern_exponent, self.front_to_back_db))
        return Deployment(self.length, self.width, self.floor_height, self.ceiling_height,
                          self.floors, self.bs_per_floor, self.tx_power_dbm,
                          ms_height=self.ms_height, ms_per_floor=self.ms_per_floor,
                          subarray=geo, hardware=hardware)


SECTIONS = {
    "run": RunConfig,
    "numerology": Numerology,
    "array": ArrayConfig,
    "hardware": HardwareConfig,
    "channel": ChannelConfig,
    "link": LinkConfig,
    "tracker": TrackerConfig,
    "latency": LatencyModel,
    "deployment": DeploymentConfig,
    "propagation": PropagationModel,
}
REQUIRED = {("run", "seed")}

_SECTION_RE = re.compile(r"^\s*\[([^\]]+)\]")
_KEY_RE = re.compile(r"^\s*([^=:#;\s\[][^=:]*?)\s*[=:]")


def _line_index(text):
    """(section, key) -> line number, and section -> header line number."""
    keys, heads = {}, {}
    section = None
    for no, line in enumerate(text.splitlines(), 1):
        m = _SECTION_RE.match(line)
        if m:
            section = m.group(1).strip()
            heads.setdefault(section, no)
            continue
        m = _KEY_RE.match(line)
        if m and section is not None:
            keys.setdefault((section, m.group(1).strip().lower()), no)
    return keys, heads


def _field_types(cls):
    return {f.name: type(f.default) if f.default is not None else int for f in fields(cls)}


def _convert(value, kind):
    value = value.strip()
    if kind is bool:
        low = value.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"expected a boolean, got {value!r}")
    if kind is int:
        return int(value, 0)
    if kind is float:
        return float(value)
    return value


def _format(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


@dataclass(frozen=True)
class ScenarioConfig:
    run: RunConfig = field(default_factory=RunConfig)
    numerology: Numerology = field(default_factory=Numerology)
    array: ArrayConfig = field(default_factory=ArrayConfig)
    hardware: HardwareConfig = field(default_factory=HardwareConfig)
    channel: ChannelConfig = field(default_factory=ChannelConfig)
    link: LinkConfig = field(default_factory=LinkConfig)
    tracker: TrackerConfig = field(default_factory=TrackerConfig)
    latency: LatencyModel = field(default_factory=LatencyModel)
    deployment: DeploymentConfig = field(default_factory=DeploymentConfig)
    propagation: PropagationModel = field(default_factory=PropagationModel)
    source: str = field(default="<string>", compare=False)

    @classmethod
    def from_file(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_string(fh.read(), source=str(path))

    @classmethod
    def from_string(cls, text, source="<string>", require=True):
        keys, heads = _line_index(text)
        parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"),
                                           strict=True, default_section="__defaults__")
        try:
            parser.read_string(text, source=source)
        except configparser.Error as exc:
            raise ConfigurationError(f"{source}: {exc}") from None
        parts = {}
        for section in parser.sections():
            if section not in SECTIONS:
                raise ConfigurationError(f"{source}:{heads.get(section, '?')}: unknown section [{section}]")
            kinds = _field_types(SECTIONS[section])
            values = {}
            for key, raw in parser.items(section):
                where = f"{source}:{keys.get((section, key), heads.get(section, '?'))}"
                if key not in kinds:
                    raise ConfigurationError(f"{where}: unknown key '{key}' in [{section}]")
                try:
                    values[key] = _convert(raw, kinds[key])
                except ValueError as exc:
                    raise ConfigurationError(f"{where}: [{section}] {key}: {exc}") from None
            try:
                parts[section] = SECTIONS[section](**values)
            except (HybridBFError, ValueError) as exc:
                raise ConfigurationError(f"{source}:{heads.get(section, '?')}: [{section}] {exc}") from None
        cfg = cls(**parts, source=source)
        if require:
            cfg.check_required()
        return cfg

    def check_required(self):
        for section, key in sorted(REQUIRED):
            if getattr(getattr(self, section), key) is None:
                raise ConfigurationError(f"{self.source}: missing required key '{key}' in [{section}]")
        return self

    def to_string(self):
        lines = []
        for section in SECTIONS:
            obj = getattr(self, section)
            lines.append(f"[{section}]")
            for f in fields(obj):
                v = getattr(obj, f.name)
                if v is not None:
                    lines.append(f"{f.name} = {_format(v)}")
            lines.append("")
        return "\n".join(lines)

    def config_hash(self):
        """SHA-256 of the serialised config, ignoring keys that cannot change results."""
        neutral = replace(self, run=replace(self.run, out="", workers=0))
        return hashlib.sha256(neutral.to_string().encode()).hexdigest()

    def with_overrides(self, **run_overrides):
        """Copy with ``[run]`` keys replaced (None values ignored)."""
        vals = {k: v for k, v in run_overrides.items() if v is not None}
        if not vals:
            return self
        unknown = set(vals) - {f.name for f in fields(RunConfig)}
        if unknown:
            raise ConfigurationError(f"unknown run override(s): {sorted(unknown)}")
        return replace(self, run=replace(self.run, **vals))

    # builders

    def link_scenario(self):
        ch, lk = self.channel, self.link
        return LinkScenario(
            name=ch.model, geometry=self.array.build(), hardware=self.hardware.build(),
            quantize=self.hardware.quantize, tracker=self.tracker, clusters=ch.cluster_source(),
            num_clusters=ch.num_clusters, mean_azimuth=math.radians(ch.mean_azimuth_deg),
            mean_elevation=math.radians(ch.mean_elevation_deg),
            angle_spread=math.radians(ch.angle_spread_deg), max_doppler=ch.max_doppler,
            coherence=ch.coherence, snr_db=ch.snr_db, modulation=lk.modulation,
            timing_offset=None if lk.timing_offset < 0 else lk.timing_offset,
            timing_offset_max=lk.timing_offset_max, timing_backoff=lk.timing_backoff,
            min_peak_ratio=lk.min_peak_ratio, baseline_element=lk.baseline_element,
            tracking_threshold_db=lk.tracking_threshold_db)

    def build_deployment(self):
        return self.deployment.build(self.hardware.build())


def default_config_text(seed=1):
    """A complete scenario file with every key at its default."""
    cfg = ScenarioConfig(run=RunConfig(seed=seed))
    return cfg.to_string()
