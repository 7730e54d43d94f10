"""RS-based channel estimation, ZF equalisation and SNR measurement."""
from dataclasses import dataclass

import numpy as np

from .numerology import DATA, DEFAULT_NUMEROLOGY, rs_rows, rs_symbols
from .ofdm import qam_hard_decision, rs_values

H_FLOOR = 1e-12
EVM_FLOOR_DB = -300.0


def rs_ls_estimates(grid_values, numerology=DEFAULT_NUMEROLOGY):
    """Raw least-squares estimates at RS REs, shape (rs rows, rs symbols)."""
    y = np.asarray(grid_values)[np.ix_(rs_rows(numerology), rs_symbols(numerology))]
    return y / rs_values(numerology)


def estimate_channel(grid_values, numerology=DEFAULT_NUMEROLOGY):
    """Per-RE channel estimate for the whole subframe grid.

    Along frequency: linear interpolation in subcarrier index between RS
    positions, nearest RS held beyond the outermost ones.  Along time: each
    symbol reuses the latest RS-bearing symbol (the first one before it).
    """
    ls = rs_ls_estimates(grid_values, numerology)
    k = numerology.grid_k
    k_rs = k[rs_rows(numerology)]
    syms = rs_symbols(numerology)
    per_rs = np.empty((k.size, len(syms)), dtype=complex)
    for j in range(len(syms)):
        per_rs[:, j] = np.interp(k, k_rs, ls[:, j].real) + 1j * np.interp(k, k_rs, ls[:, j].imag)
    n_sym = np.asarray(grid_values).shape[1]
    source = np.searchsorted(syms, np.arange(n_sym), side="right") - 1
    source = np.maximum(source, 0)
    return per_rs[:, source]


@dataclass
class EqualizedData:
    symbols: np.ndarray
    decisions: np.ndarray
    bits: np.ndarray
    evm_db: float
    erased: int


def equalize_zf(grid_values, estimates, roles, modulation):
    """Single-tap ZF on DATA REs, hard Gray demapping and EVM.

    REs whose estimate magnitude falls below 1e-12 are erased: they are
    left out of the EVM and their bits are reported as zeros.
    """
    mask = (np.asarray(roles) == DATA).T
    y = np.asarray(grid_values).T[mask]
    h = np.asarray(estimates).T[mask]
    ok = np.abs(h) >= H_FLOOR
    x_hat = np.zeros_like(y)
    x_hat[ok] = y[ok] / h[ok]
    decisions, bits = qam_hard_decision(x_hat, modulation)
    b = bits.size // max(y.size, 1)
    if not ok.all():
        bits = bits.reshape(-1, b)
        bits[~ok] = 0
        bits = bits.ravel()
    if ok.any():
        err = np.mean(np.abs(x_hat[ok] - decisions[ok]) ** 2)
        evm = max(10 * np.log10(err), EVM_FLOOR_DB) if err > 0 else EVM_FLOOR_DB
    else:
        evm = np.inf
    return EqualizedData(x_hat, decisions, bits, float(evm), int((~ok).sum()))


@dataclass
class SnrEstimate:
    snr_db: float
    signal_power: float
    noise_power: float
    degenerate: bool = False


def measure_snr(grid_values, numerology=DEFAULT_NUMEROLOGY):
    """SNR from the RS symbols of one subframe.

    The channel is block-constant over a subframe, so the smoothed estimate
    at an RS subcarrier is the mean of its raw LS values over the RS
    symbols; the residual spread gives the per-RE noise power (unbiased with
    S-1 degrees of freedom) and the smoothed power, less its residual noise
    share, the signal power.
    """
    ls = rs_ls_estimates(grid_values, numerology)
    n_sym = ls.shape[1]
    if n_sym < 2:
        raise ValueError("SNR measurement needs at least two RS symbols")
    smooth = ls.mean(axis=1)
    noise = float(np.sum(np.abs(ls - smooth[:, None]) ** 2) / (ls.shape[0] * (n_sym - 1)))
    signal = float(np.mean(np.abs(smooth) ** 2) - noise / n_sym)
    if noise <= 0:
        return SnrEstimate(np.inf, signal, noise, degenerate=True)
    if signal <= 0:
        return SnrEstimate(-np.inf, signal, noise, degenerate=True)
    return SnrEstimate(10 * np.log10(signal / noise), signal, noise)


def rs_power(grid_values, numerology=DEFAULT_NUMEROLOGY):
    """Mean |h_LS|^2 over all RS REs (signal plus noise; the beam tracker's observable)."""
    return float(np.mean(np.abs(rs_ls_estimates(grid_values, numerology)) ** 2))
