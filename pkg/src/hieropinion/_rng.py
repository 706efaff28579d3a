"""xoshiro256** generator usable from compiled kernels.

State is a length-4 ``uint64`` array owned by the caller, so independent runs share
nothing. Seeding expands a single integer with splitmix64.
"""
import numpy as np
from numba import njit, uint64

_GOLDEN = 0x9E3779B97F4A7C15


def make_state(seed: int) -> np.ndarray:
    mask = (1 << 64) - 1
    x = int(seed) & mask
    out = []
    for _ in range(4):
        x = (x + _GOLDEN) & mask
        z = x
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & mask
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & mask
        out.append(z ^ (z >> 31))
    return np.array(out, dtype=np.uint64)


@njit(cache=True, inline="always")
def _rotl(x, k):
    return (x << uint64(k)) | (x >> uint64(64 - k))


@njit(cache=True)
def next_u64(s):
    result = _rotl(s[1] * uint64(5), 7) * uint64(9)
    t = s[1] << uint64(17)
    s[2] ^= s[0]
    s[3] ^= s[1]
    s[1] ^= s[2]
    s[0] ^= s[3]
    s[2] ^= t
    s[3] = _rotl(s[3], 45)
    return result


@njit(cache=True)
def uniform(s):
    """Double in [0, 1) from the top 53 bits."""
    return np.float64(next_u64(s) >> uint64(11)) * (1.0 / 9007199254740992.0)


@njit(cache=True)
def below(s, n):
    """Integer in [0, n) for n < 2**32 (multiply-shift on the top 32 bits)."""
    return np.int64(((next_u64(s) >> uint64(32)) * uint64(n)) >> uint64(32))
