"""Seed splitting: every random stream is derived from one master seed."""
import numpy as np


def derive_seed(master, *keys):
    """Mix ``master`` with integer ``keys`` into an independent 64-bit seed."""
    ss = np.random.SeedSequence([int(master) & 0xFFFFFFFFFFFFFFFF, *[int(k) for k in keys]])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def derive_rng(master, *keys):
    return np.random.default_rng(derive_seed(master, *keys))


# stream identifiers used with derive_seed
CHANNEL = 1
NOISE = 2
DATA = 3
TRACKER = 4
LAYOUT = 5
DROPS = 6
TRIAL = 7
