"""Subset-lattice utilities: masks, popcounts and fast zeta/Moebius sums.

Tables indexed by subsets of `n` sites are flat arrays of length 2**n,
entry `A` addressed by the bitmask of the subset.  The transforms run in
O(2**n * n) by sweeping one bit at a time.
"""

import numpy as np


def popcounts(n: int) -> np.ndarray:
    """Array of |A| for every mask A in [0, 2**n)."""
    masks = np.arange(1 << n, dtype=np.uint64)
    out = np.zeros(1 << n, dtype=np.int64)
    for b in range(n):
        out += (masks >> np.uint64(b)).astype(np.int64) & 1
    return out


def zeta_subsets(values: np.ndarray) -> np.ndarray:
    """Sums over sub-masks: out[A] = sum_{B subseteq A} values[B]."""
    out = np.array(values, dtype=np.float64, copy=True)
    n = _nbits(out.size)
    for b in range(n):
        step = 1 << b
        view = out.reshape(-1, 2 * step)
        view[:, step:] += view[:, :step]
    return out


def moebius_subsets(values: np.ndarray) -> np.ndarray:
    """Inverse of `zeta_subsets`: recovers values[B] from subset sums."""
    out = np.array(values, dtype=np.float64, copy=True)
    n = _nbits(out.size)
    for b in range(n):
        step = 1 << b
        view = out.reshape(-1, 2 * step)
        view[:, step:] -= view[:, :step]
    return out


def _nbits(size: int) -> int:
    n = size.bit_length() - 1
    if 1 << n != size:
        raise ValueError(f"table length {size} is not a power of two")
    return n
