"""Low-pass FIR used ahead of PSS correlation."""
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import signal

from ..errors import DesignError


@dataclass(frozen=True)
class FilterSpec:
    cutoff_hz: float = 1.4e6
    stopband_edge_hz: float = 2.0e6
    stopband_attenuation_db: float = 50.0
    passband_ripple_db: float = 0.1
    sample_rate: float = 30.72e6
    max_taps: int = 257


@dataclass(frozen=True)
class FilterDesign:
    taps: np.ndarray = field(repr=False)
    ripple_db: float
    stopband_db: float  # worst-case attenuation beyond the stopband edge (positive)
    dc_gain_db: float

    @property
    def group_delay(self):
        return (len(self.taps) - 1) // 2


def response_db(taps, sample_rate, n_points=4096):
    """Magnitude response in dB on ``n_points`` frequencies from 0 to Nyquist."""
    f, h = signal.freqz(taps, worN=n_points, fs=sample_rate)
    return f, 20 * np.log10(np.maximum(np.abs(h), 1e-300))


def mask_margins(taps, spec, n_points=4096):
    f, mag = response_db(taps, spec.sample_rate, n_points)
    pb = mag[f <= spec.cutoff_hz]
    sb = mag[f >= spec.stopband_edge_hz]
    return pb.max() - pb.min(), -sb.max(), mag[0]


@lru_cache(maxsize=None)
def design_lpf(spec=FilterSpec()):
    """Smallest odd-length equiripple linear-phase FIR meeting the mask."""
    dp = (10 ** (spec.passband_ripple_db / 20) - 1) / (10 ** (spec.passband_ripple_db / 20) + 1)
    ds = 10 ** (-spec.stopband_attenuation_db / 20)
    bands = [0, spec.cutoff_hz, spec.stopband_edge_hz, spec.sample_rate / 2]
    best = None
    for n in range(31, spec.max_taps + 1, 2):
        try:
            taps = signal.remez(n, bands, [1, 0], weight=[1 / dp, 1 / ds], fs=spec.sample_rate)
        except ValueError:
            continue
        taps = taps / taps.sum()
        ripple, atten, dc = mask_margins(taps, spec)
        best = (n, ripple, atten, dc)
        if ripple <= spec.passband_ripple_db and atten >= spec.stopband_attenuation_db \
                and abs(dc) <= spec.passband_ripple_db:
            taps.setflags(write=False)
            return FilterDesign(taps, ripple, atten, dc)
    margins = {} if best is None else {"taps": best[0], "ripple_db": best[1],
                                       "stopband_db": best[2], "dc_gain_db": best[3]}
    raise DesignError(f"LPF mask not met within {spec.max_taps} taps", margins)
