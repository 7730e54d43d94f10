"""PSS timing acquisition on low-pass filtered samples."""
import numpy as np
from scipy import signal

from ..errors import SyncFailure
from .numerology import DEFAULT_NUMEROLOGY

DEFAULT_PEAK_RATIO = 2.0


def pss_correlation(samples, replica, taps):
    """|xcorr|^2 between filtered samples and filtered replica, indexed by lag >= 0.

    Both inputs go through the same full-length convolution, so the filter
    group delay cancels and lag n means the replica starts at sample n.
    """
    x = signal.fftconvolve(samples, taps)
    r = signal.fftconvolve(replica, taps)
    c = signal.correlate(x, r, mode="full", method="fft")
    lags = signal.correlation_lags(x.size, r.size, mode="full")
    keep = (lags >= 0) & (lags <= len(samples) - len(replica))
    return np.abs(c[keep]) ** 2


def synchronize(samples, replica, taps, numerology=DEFAULT_NUMEROLOGY,
                min_peak_ratio=DEFAULT_PEAK_RATIO, guard=None):
    """Subframe start offset (samples) of the strongest PSS in ``samples``.

    The PSS replica is expected at ``numerology.pss_position()`` within its
    subframe, so the returned offset is the PSS lag minus that position.
    Near-ties resolve to the earliest lag.  Raises SyncFailure when the peak
    is not ``min_peak_ratio`` above the strongest lag outside the main lobe
    (other PSS repetitions a half-frame apart are also excluded).
    """
    metric = pss_correlation(samples, replica, taps)
    if metric.size == 0:
        raise SyncFailure("sample block shorter than the PSS replica")
    peak_val = metric.max()
    if peak_val <= 0:
        raise SyncFailure("no PSS energy", 0.0)
    peak = int(np.flatnonzero(metric >= peak_val * (1 - 1e-9))[0])
    offset = peak - numerology.pss_position()

    guard = numerology.cp_samples if guard is None else guard
    period = numerology.half_frame_subframes * numerology.subframe_samples
    lag = np.arange(metric.size)
    dist = np.abs((lag - peak + period // 2) % period - period // 2)
    outside = metric[dist > guard]
    second = outside.max() if outside.size else 0.0
    ratio = np.inf if second == 0 else peak_val / second
    if ratio < min_peak_ratio:
        raise SyncFailure(f"PSS peak ratio {ratio:.2f} below {min_peak_ratio}", ratio, offset)
    return offset
