"""Planar array geometry, steering vectors and the quantized RF front end.

Directions are expressed in the array's local frame: boresight along +x,
array rows along +z (vertical) and columns along +y (horizontal).  For an
arrival direction (azimuth, elevation) the direction cosines are

    u = sin(elevation)                    (row axis)
    v = cos(elevation) * sin(azimuth)     (column axis)
"""
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError


@dataclass(frozen=True)
class ElementPattern:
    """Power pattern of one antenna element, peak gain normalised to 1.

    ``kind="isotropic"`` is flat.  ``kind="cosine"`` is cos(theta)**exponent
    over the front hemisphere (theta measured from boresight) with a floor
    set by the front-to-back ratio.
    """

    kind: str = "isotropic"
    exponent: float = 1.0
    front_to_back_db: float = 20.0

    def __post_init__(self):
        if self.kind not in ("isotropic", "cosine"):
            raise ConfigurationError(f"unknown element pattern {self.kind!r}")
        if self.exponent < 0:
            raise ConfigurationError("pattern exponent must be >= 0")

    def gain(self, azimuth, elevation):
        azimuth = np.asarray(azimuth, dtype=float)
        elevation = np.asarray(elevation, dtype=float)
        if self.kind == "isotropic":
            return np.ones(np.broadcast(azimuth, elevation).shape)
        cos_theta = np.cos(elevation) * np.cos(azimuth)
        floor = 10.0 ** (-self.front_to_back_db / 10.0)
        front = np.clip(cos_theta, 0.0, None) ** self.exponent
        return np.maximum(front, floor)


@dataclass(frozen=True)
class ArrayGeometry:
    rows: int = 6
    cols: int = 1
    spacing_wavelengths: float = 0.6
    pattern: ElementPattern = field(default_factory=ElementPattern)

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ConfigurationError("array needs at least one row and one column")
        if not self.spacing_wavelengths > 0:
            raise ConfigurationError("element spacing must be positive")

    @property
    def num_elements(self):
        return self.rows * self.cols

    def element_indices(self):
        """(row, col) index of every element, row-major."""
        r, c = np.divmod(np.arange(self.num_elements), self.cols)
        return r, c


def direction_cosines(azimuth, elevation):
    azimuth = np.asarray(azimuth, dtype=float)
    elevation = np.asarray(elevation, dtype=float)
    return np.sin(elevation), np.cos(elevation) * np.sin(azimuth)


def steering_vector(geometry, azimuth, elevation):
    """Unnormalised array response (unit-modulus entries, norm sqrt(N)).

    Scalar angles give shape (N,); array angles of shape S give (N,) + S.
    """
    u, v = direction_cosines(azimuth, elevation)
    r, c = geometry.element_indices()
    shape = (-1,) + (1,) * u.ndim
    phase = 2 * np.pi * geometry.spacing_wavelengths * (r.reshape(shape) * u + c.reshape(shape) * v)
    return np.exp(1j * phase)


@dataclass(frozen=True)
class RfHardwareModel:
    """Phase shifter / variable attenuator pair driving each element."""

    phase_bits: int = 4
    amplitude_bits: int = 6
    amplitude_step_db: float = 0.25
    update_delay_ms: float = 1.0

    @property
    def phase_levels(self):
        return 2 ** self.phase_bits

    @property
    def amplitude_levels(self):
        return 2 ** self.amplitude_bits

    @property
    def phase_step_deg(self):
        return 360.0 / self.phase_levels

    @property
    def max_phase_error_deg(self):
        return self.phase_step_deg / 2

    @property
    def amplitude_range_db(self):
        return (self.amplitude_levels - 1) * self.amplitude_step_db

    @property
    def max_amplitude_error_db(self):
        return self.amplitude_step_db / 2


@dataclass
class QuantizerDiagnostics:
    zero_coefficients: int = 0


def quantize_levels(w, hw):
    """Integer phase and attenuation level per coefficient, plus the reference magnitude."""
    w = np.asarray(w, dtype=complex)
    mag = np.abs(w)
    ref = mag.max()
    # rounding to 9 decimals makes exact half-steps land on .5 before the floor
    turns = np.round(np.angle(w) / (2 * np.pi) * hw.phase_levels, 9)
    phase_idx = np.floor(turns + 0.5).astype(int) % hw.phase_levels
    zero = mag == 0
    with np.errstate(divide="ignore"):
        att_db = np.where(zero, np.inf, 20 * np.log10(ref / np.where(zero, 1.0, mag)))
    steps = np.round(att_db / hw.amplitude_step_db, 9)
    att_idx = np.where(zero, hw.amplitude_levels - 1,
                       np.clip(np.floor(np.minimum(steps, 1e9) + 0.5), 0, hw.amplitude_levels - 1))
    return phase_idx, att_idx.astype(int), ref, int(zero.sum())


def levels_to_weight(phase_idx, att_idx, ref, hw):
    phase = 2 * np.pi * np.asarray(phase_idx) / hw.phase_levels
    mag = ref * 10.0 ** (-np.asarray(att_idx) * hw.amplitude_step_db / 20.0)
    return mag * np.exp(1j * phase)


def quantize_weight(w, hw, diagnostics=None):
    """Snap each coefficient to the nearest phase-shifter / attenuator level.

    Attenuation is relative to the largest coefficient; the result is not
    renormalised.  An all-zero vector is returned unchanged.
    """
    w = np.asarray(w, dtype=complex)
    if not np.any(w):
        if diagnostics is not None:
            diagnostics.zero_coefficients += w.size
        return w.copy()
    phase_idx, att_idx, ref, n_zero = quantize_levels(w, hw)
    if diagnostics is not None:
        diagnostics.zero_coefficients += n_zero
    return levels_to_weight(phase_idx, att_idx, ref, hw)


def apply_weight(w, h):
    """Beamformed output w^H h.

    ``h`` of shape (N,) gives a scalar, shape (..., N) gives shape (...).
    """
    w = np.asarray(w)
    h = np.asarray(h)
    if w.ndim != 1 or h.shape[-1] != w.shape[0]:
        raise ConfigurationError(f"weight length {w.shape} does not match channel {h.shape}")
    return h @ np.conj(w)


def normalize(w):
    w = np.asarray(w, dtype=complex)
    n = np.linalg.norm(w)
    if n == 0:
        raise ConfigurationError("cannot normalise a zero vector")
    return w / n
