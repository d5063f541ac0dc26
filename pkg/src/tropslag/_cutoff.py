"""C^2 quintic smoothstep and the edge cutoff built from it."""

import numpy as np


def smoothstep(x):
    x = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
    return x * x * x * (10.0 + x * (-15.0 + 6.0 * x))


def smoothstep_d1(x):
    x = np.asarray(x, dtype=float)
    y = np.clip(x, 0.0, 1.0)
    d = 30.0 * y * y * (1.0 - y) ** 2
    return np.where((x > 0) & (x < 1), d, 0.0)


def smoothstep_d2(x):
    x = np.asarray(x, dtype=float)
    y = np.clip(x, 0.0, 1.0)
    d = 60.0 * y * (1.0 - y) * (1.0 - 2.0 * y)
    return np.where((x > 0) & (x < 1), d, 0.0)


def chi(s):
    """1 for s <= -2, 0 for s >= -1."""
    return 1.0 - smoothstep(np.asarray(s, dtype=float) + 2.0)


def chi_d1(s):
    return -smoothstep_d1(np.asarray(s, dtype=float) + 2.0)


def chi_d2(s):
    return -smoothstep_d2(np.asarray(s, dtype=float) + 2.0)
