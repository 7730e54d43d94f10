"""Zadoff-Chu PSS, Gray QAM, resource-grid mapping and (de)modulation.

FFTs are unitary (``norm="ortho"``) in both directions, so the mean power
of a time-domain OFDM symbol equals the grid power of that symbol divided
by the FFT size.
"""
from dataclasses import dataclass
from functools import lru_cache
import math

import numpy as np

from ..errors import FramingError, ParameterError
from .numerology import (DATA, DEFAULT_NUMEROLOGY, NULL, PSS, PSS_LENGTH, PSS_SYMBOL, RS,
                         grid_layout, has_pss, pss_rows, rs_rows, rs_symbols)

DEFAULT_PSS_ROOT = 25
RS_SEED = 0x5EED

MODULATIONS = {"qpsk": 2, "4qam": 2, "16qam": 4, "64qam": 6}


def bits_per_symbol(modulation):
    try:
        return MODULATIONS[modulation.lower()]
    except KeyError:
        raise ParameterError(f"unknown modulation {modulation!r}") from None


def zadoff_chu(root, length=PSS_LENGTH):
    """x(n) = exp(-j pi u n (n+1) / length), n = 0..length-1."""
    if math.gcd(int(root), int(length)) != 1:
        raise ParameterError(f"root {root} is not coprime with {length}")
    n = np.arange(length)
    return np.exp(-1j * np.pi * root * n * (n + 1) / length)


def circular_autocorrelation(x):
    """R(tau) = sum_n x(n) conj(x(n - tau mod L)) for every shift."""
    x = np.asarray(x)
    return np.array([np.vdot(np.roll(x, tau), x) for tau in range(x.size)])


def _gray_pam_levels(m):
    """Amplitude for each Gray-coded label 0..m-1 of an m-ary PAM."""
    idx = np.arange(m)
    gray = idx ^ (idx >> 1)
    levels = np.empty(m)
    levels[gray] = 2 * idx - (m - 1)
    return levels


@lru_cache(maxsize=None)
def constellation(modulation):
    """Unit-average-power Gray QAM points indexed by the integer bit label."""
    b = bits_per_symbol(modulation)
    m = 2 ** (b // 2)
    pam = _gray_pam_levels(m)
    labels = np.arange(2 ** b)
    i_lab, q_lab = labels >> (b // 2), labels & (m - 1)
    pts = pam[i_lab] + 1j * pam[q_lab]
    pts = pts / np.sqrt(2 * (m * m - 1) / 3)
    pts.setflags(write=False)
    return pts


def _bits_to_labels(bits, b):
    bits = np.asarray(bits, dtype=np.int64).reshape(-1, b)
    return bits @ (1 << np.arange(b - 1, -1, -1))


def _labels_to_bits(labels, b):
    labels = np.asarray(labels, dtype=np.int64)
    return ((labels[:, None] >> np.arange(b - 1, -1, -1)) & 1).astype(np.uint8).ravel()


def qam_modulate(bits, modulation):
    b = bits_per_symbol(modulation)
    bits = np.asarray(bits)
    if bits.size % b:
        raise FramingError(f"{bits.size} bits is not a multiple of {b}")
    return constellation(modulation)[_bits_to_labels(bits, b)]


def qam_hard_decision(symbols, modulation):
    """Nearest constellation point and its bits (per-axis slicing)."""
    b = bits_per_symbol(modulation)
    m = 2 ** (b // 2)
    scale = np.sqrt(2 * (m * m - 1) / 3)
    by_amplitude = np.argsort(_gray_pam_levels(m))  # amplitude rank -> gray label
    s = np.asarray(symbols) * scale

    def axis(v):
        rank = np.clip(np.floor((v + m) / 2), 0, m - 1).astype(np.int64)
        return by_amplitude[rank]

    i_lab, q_lab = axis(s.real), axis(s.imag)
    labels = (i_lab << (b // 2)) | q_lab
    return constellation(modulation)[labels], _labels_to_bits(labels, b)


@lru_cache(maxsize=None)
def rs_values(numerology=DEFAULT_NUMEROLOGY):
    """Known QPSK RS symbols, shape (rs rows, rs symbols per subframe)."""
    rng = np.random.default_rng(RS_SEED)
    n_rows, n_sym = len(rs_rows(numerology)), len(rs_symbols(numerology))
    bits = rng.integers(0, 2, size=(n_rows, n_sym, 2))
    vals = ((1 - 2 * bits[..., 0]) + 1j * (1 - 2 * bits[..., 1])) / np.sqrt(2)
    vals.setflags(write=False)
    return vals


def pss_grid_values(root=DEFAULT_PSS_ROOT):
    """ZC sequence with the DC element punctured."""
    x = zadoff_chu(root).copy()
    x[PSS_LENGTH // 2] = 0
    return x


@dataclass
class ResourceGrid:
    values: np.ndarray  # (rows, symbols) complex
    roles: np.ndarray   # (rows, symbols) role labels
    subframe_index: int = 0
    modulation: str = "16qam"

    def copy_with(self, values):
        return ResourceGrid(values, self.roles, self.subframe_index, self.modulation)


def data_capacity_bits(numerology, subframe_index, modulation):
    roles = grid_layout(numerology, subframe_index)
    return int(np.count_nonzero(roles == DATA)) * bits_per_symbol(modulation)


def map_subframe(bits, modulation, subframe_index, numerology=DEFAULT_NUMEROLOGY,
                 pss_root=DEFAULT_PSS_ROOT):
    """Place QAM data, RS and (on PSS subframes) the PSS onto a grid.

    Data fills DATA REs symbol by symbol, lowest subcarrier first.
    """
    roles = grid_layout(numerology, subframe_index)
    n_data = int(np.count_nonzero(roles == DATA))
    b = bits_per_symbol(modulation)
    bits = np.asarray(bits)
    if bits.size != n_data * b:
        raise FramingError(f"subframe {subframe_index} carries {n_data * b} bits, got {bits.size}")
    values = np.zeros(roles.shape, dtype=complex)
    # transpose so data fills per symbol
    values.T[roles.T == DATA] = qam_modulate(bits, modulation)
    values[np.ix_(rs_rows(numerology), rs_symbols(numerology))] = rs_values(numerology)
    if has_pss(numerology, subframe_index):
        values[pss_rows(numerology), PSS_SYMBOL] = pss_grid_values(pss_root)
    return ResourceGrid(values, roles, subframe_index, modulation)


def extract_data(grid):
    return grid.values.T[grid.roles.T == DATA]


def ofdm_modulate(grid_values, numerology=DEFAULT_NUMEROLOGY):
    """Grid (rows, symbols) -> concatenated CP-OFDM samples."""
    grid_values = np.asarray(grid_values)
    n_sym = grid_values.shape[1]
    full = np.zeros((numerology.fft_size, n_sym), dtype=complex)
    full[numerology.fft_bins()] = grid_values
    t = np.fft.ifft(full, axis=0, norm="ortho")
    t = np.concatenate([t[-numerology.cp_samples:], t], axis=0)
    return t.T.ravel()


def ofdm_demodulate(samples, n_symbols, numerology=DEFAULT_NUMEROLOGY, start=0):
    """Strip CPs and FFT ``n_symbols`` symbols beginning at sample ``start``."""
    samples = np.asarray(samples)
    L = numerology.symbol_samples
    end = start + n_symbols * L
    if start < 0 or end > samples.size:
        raise FramingError("not enough samples to demodulate the requested symbols")
    block = samples[start:end].reshape(n_symbols, L)[:, numerology.cp_samples:]
    f = np.fft.fft(block, axis=1, norm="ortho")
    return f[:, numerology.fft_bins()].T


def build_subframe(bits, modulation, subframe_index, numerology=DEFAULT_NUMEROLOGY,
                   pss_root=DEFAULT_PSS_ROOT):
    """Map and OFDM-modulate one subframe; returns (samples, grid)."""
    grid = map_subframe(bits, modulation, subframe_index, numerology, pss_root)
    return ofdm_modulate(grid.values, numerology), grid


def random_bits(rng, numerology, subframe_index, modulation):
    n = data_capacity_bits(numerology, subframe_index, modulation)
    return rng.integers(0, 2, size=n, dtype=np.uint8)


def pss_time_replica(numerology=DEFAULT_NUMEROLOGY, pss_root=DEFAULT_PSS_ROOT):
    """Useful part (no CP) of an OFDM symbol that carries only the PSS."""
    full = np.zeros(numerology.fft_size, dtype=complex)
    full[numerology.fft_bins()[pss_rows(numerology)]] = pss_grid_values(pss_root)
    return np.fft.ifft(full, norm="ortho")

