"""LTE-style OFDM transmit/receive chain."""
from .filters import FilterDesign, FilterSpec, design_lpf
from .numerology import DEFAULT_NUMEROLOGY, Numerology, grid_layout, has_pss
from .ofdm import (ResourceGrid, build_subframe, map_subframe, ofdm_demodulate, ofdm_modulate,
                   pss_time_replica, random_bits, zadoff_chu)
from .receiver import EqualizedData, SnrEstimate, equalize_zf, estimate_channel, measure_snr
from .sync import synchronize
