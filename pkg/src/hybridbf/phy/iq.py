"""Raw IQ dump: interleaved little-endian float32 (I, Q) plus a one-line sidecar header.

The sidecar ``<path>.txt`` holds space-separated ``key=value`` pairs,
always including ``format=cf32_le``, ``samples`` and ``sample_rate``.
"""
from pathlib import Path

import numpy as np


class IqWriter:
    """Append-only IQ file; the sidecar is written on close."""

    def __init__(self, path, sample_rate, **meta):
        self.path = Path(path)
        self.sample_rate = sample_rate
        self.meta = meta
        self.samples = 0
        self._fh = open(self.path, "wb")

    def write(self, samples):
        samples = np.asarray(samples, dtype=np.complex64)
        inter = np.empty(2 * samples.size, dtype="<f4")
        inter[0::2] = samples.real
        inter[1::2] = samples.imag
        self._fh.write(inter.tobytes())
        self.samples += samples.size

    def close(self):
        if self._fh.closed:
            return
        self._fh.close()
        fields = {"format": "cf32_le", "samples": self.samples, "sample_rate": self.sample_rate,
                  **self.meta}
        header = " ".join(f"{k}={v}" for k, v in fields.items())
        Path(str(self.path) + ".txt").write_text(header + "\n")

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def write_iq(path, samples, sample_rate, **meta):
    with IqWriter(path, sample_rate, **meta) as w:
        w.write(samples)
    return Path(path)


def read_iq(path):
    raw = np.fromfile(path, dtype="<f4")
    return raw[0::2] + 1j * raw[1::2]


def read_iq_header(path):
    text = Path(str(path) + ".txt").read_text().strip()
    return dict(item.split("=", 1) for item in text.split())
