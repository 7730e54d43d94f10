"""LTE 20 MHz numerology with extended cyclic prefix, and the subframe RE layout."""
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ..errors import ConfigurationError

# RE roles in a ResourceGrid
NULL = 0
DATA = 1
RS = 2
PSS = 3

PSS_LENGTH = 63
PSS_RESERVED_HALF_WIDTH = 36  # subcarriers each side of DC kept free on the PSS symbol
PSS_SYMBOL = 5  # sixth symbol of the first slot
RS_SYMBOLS_PER_SLOT = (0, 3)
RS_SPACING = 6


@dataclass(frozen=True)
class Numerology:
    sample_rate: float = 30.72e6
    fft_size: int = 2048
    subcarrier_spacing: float = 15e3
    cp_samples: int = 512
    symbols_per_slot: int = 6
    slots_per_frame: int = 20
    active_subcarriers: int = 1200
    bandwidth: float = 20e6

    def __post_init__(self):
        if self.active_subcarriers % 2:
            raise ConfigurationError("active subcarrier count must be even")
        if self.active_subcarriers + 1 > self.fft_size:
            raise ConfigurationError("active band does not fit the FFT")
        if self.active_subcarriers * self.subcarrier_spacing > self.bandwidth:
            raise ConfigurationError("active band exceeds the channel bandwidth")
        if abs(self.sample_rate - self.fft_size * self.subcarrier_spacing) > 1e-6 * self.sample_rate:
            raise ConfigurationError("sample rate must equal fft_size * subcarrier_spacing")

    @property
    def symbol_samples(self):
        return self.fft_size + self.cp_samples

    @property
    def slot_samples(self):
        return self.symbol_samples * self.symbols_per_slot

    @property
    def slot_duration(self):
        return self.slot_samples / self.sample_rate

    @property
    def symbols_per_subframe(self):
        return 2 * self.symbols_per_slot

    @property
    def subframe_samples(self):
        return 2 * self.slot_samples

    @property
    def subframes_per_frame(self):
        return self.slots_per_frame // 2

    @property
    def half_frame_subframes(self):
        return self.subframes_per_frame // 2

    @property
    def cp_duration(self):
        return self.cp_samples / self.sample_rate

    @property
    def grid_k(self):
        """Subcarrier index of every grid row; row ``active/2`` is DC."""
        half = self.active_subcarriers // 2
        return np.arange(-half, half + 1)

    @property
    def num_rows(self):
        return self.active_subcarriers + 1

    @property
    def dc_row(self):
        return self.active_subcarriers // 2

    @property
    def active_k(self):
        k = self.grid_k
        return k[k != 0]

    def fft_bins(self):
        return self.grid_k % self.fft_size

    def pss_position(self):
        """Sample index of the PSS useful part (after its CP) within its subframe."""
        return PSS_SYMBOL * self.symbol_samples + self.cp_samples


DEFAULT_NUMEROLOGY = Numerology()


def has_pss(numerology, subframe_index):
    return subframe_index % numerology.half_frame_subframes == 0


def rs_symbols(numerology):
    return tuple(slot * numerology.symbols_per_slot + s
                 for slot in (0, 1) for s in RS_SYMBOLS_PER_SLOT)


def rs_rows(numerology):
    """Grid rows carrying RS: every sixth active subcarrier, counting from the lowest."""
    active_rows = np.flatnonzero(numerology.grid_k != 0)
    return active_rows[::RS_SPACING]


def pss_rows(numerology):
    """Grid rows of the 63-length PSS, element 31 sitting on DC."""
    return numerology.dc_row + np.arange(PSS_LENGTH) - PSS_LENGTH // 2


@lru_cache(maxsize=None)
def _layout(numerology, with_pss):
    roles = np.full((numerology.num_rows, numerology.symbols_per_subframe), DATA, dtype=np.int8)
    roles[numerology.dc_row, :] = NULL
    if with_pss:
        reserved = np.abs(numerology.grid_k) <= PSS_RESERVED_HALF_WIDTH
        roles[reserved, PSS_SYMBOL] = NULL
        rows = pss_rows(numerology)
        rows = rows[rows != numerology.dc_row]
        roles[rows, PSS_SYMBOL] = PSS
    rows = rs_rows(numerology)
    for s in rs_symbols(numerology):
        roles[rows, s] = RS
    roles.setflags(write=False)
    return roles


def grid_layout(numerology, subframe_index):
    """RE role labels (rows x symbols) of the given subframe."""
    return _layout(numerology, has_pss(numerology, subframe_index))


def data_capacity(numerology, subframe_index):
    return int(np.count_nonzero(grid_layout(numerology, subframe_index) == DATA))
