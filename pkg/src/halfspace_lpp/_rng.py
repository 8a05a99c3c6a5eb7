"""Counter-based random number generation.

Every random quantity in the simulators is a pure function of
``(seed, domain, k1, k2, k3)`` through a splitmix64-style mixing chain, so
replicas can be evaluated in any order, on any backend, with bit-identical
results.  The numpy path below and the numba path in :mod:`._kernels` apply
exactly the same integer arithmetic.

Uniforms are mapped to (0, 1] so that ``-log(u)`` and ``log(u)`` are always
finite, matching inverse-CDF sampling of exponential and geometric laws.
"""

import numpy as np

_GOLD = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB

# Domain tags keep unrelated samplers on disjoint streams even under a
# shared seed (the schur-check compares two samplers at the same seed).
DOMAIN_LPP_EXP = 0x1A2B3C4D5E6F7081
DOMAIN_LPP_GEO = 0x2B3C4D5E6F708192
DOMAIN_LPP_ROW = 0x3C4D5E6F708192A3
DOMAIN_SCHUR = 0x4D5E6F708192A3B4
DOMAIN_STREAM = 0x5E6F708192A3B4C5

_U64 = np.uint64
_MASK = np.uint64(0xFFFFFFFFFFFFFFFF)


def _mix(x):
    """splitmix64 finalizer (vectorized over uint64 arrays)."""
    x = (x + _U64(_GOLD)) & _MASK
    x ^= x >> _U64(30)
    x = (x * _U64(_MIX1)) & _MASK
    x ^= x >> _U64(27)
    x = (x * _U64(_MIX2)) & _MASK
    x ^= x >> _U64(31)
    return x


def hash_u64(seed, domain, k1, k2, k3):
    """Mix five integers into one uint64. Arguments broadcast like ufuncs."""
    seed = np.asarray(seed, dtype=np.uint64)
    h = _mix(seed ^ _U64(domain & 0xFFFFFFFFFFFFFFFF))
    h = _mix(h ^ np.asarray(k1, dtype=np.uint64))
    h = _mix(h ^ np.asarray(k2, dtype=np.uint64))
    h = _mix(h ^ np.asarray(k3, dtype=np.uint64))
    return h


def uniform_open_closed(seed, domain, k1, k2, k3):
    """Deterministic uniform on (0, 1] keyed by the integer arguments."""
    h = hash_u64(seed, domain, k1, k2, k3)
    return ((h >> _U64(11)).astype(np.float64) + 1.0) * 2.0 ** -53


class SeedStream:
    """Sequential view of the counter-based stream.

    Used by the single-draw partition transition operators, where the number
    of uniforms per call varies with the partition length.
    """

    def __init__(self, seed: int, stream: int = 0):
        self.seed = int(seed)
        self.stream = int(stream)
        self._counter = 0

    def next_u01(self) -> float:
        u = uniform_open_closed(self.seed, DOMAIN_STREAM, self.stream, self._counter, 0)
        self._counter += 1
        return float(u)

    def split(self, stream: int) -> "SeedStream":
        return SeedStream(self.seed, stream)
