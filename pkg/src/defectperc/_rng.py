"""Splittable deterministic random streams (splitmix64).

Every stochastic routine in this package draws from a splitmix64 stream whose
initial state is a 64-bit mix of (seed, stream index).  Streams are therefore
independent of execution order and worker count: realization i of a run with
seed s sees the same numbers whether it runs first, last, or on another
thread.  The same arithmetic exists twice, as numba-jitted kernels (used by
the hot loops) and as a pure-Python mirror (used by the readable reference
implementations and the tests); the two are checked for exact equality.
"""

from __future__ import annotations

import numpy as np
from numba import njit

RNG_FAMILY = "splitmix64"

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
# 2^-53, for 53-bit uniforms in [0, 1)
_INV53 = 1.0 / 9007199254740992.0

_U_GOLDEN = np.uint64(_GOLDEN)
_U_MIX1 = np.uint64(_MIX1)
_U_MIX2 = np.uint64(_MIX2)
_U30 = np.uint64(30)
_U27 = np.uint64(27)
_U31 = np.uint64(31)
_U11 = np.uint64(11)
_U1 = np.uint64(1)


@njit(cache=True, nogil=True)
def mix64(z):
    """Murmur3-style 64-bit finalizer (the splitmix64 output mix)."""
    z = (z ^ (z >> _U30)) * _U_MIX1
    z = (z ^ (z >> _U27)) * _U_MIX2
    return z ^ (z >> _U31)


@njit(cache=True, nogil=True)
def stream_state(seed, index):
    """Initial splitmix64 state for stream `index` of run `seed` (uint64s)."""
    return mix64(seed + _U_GOLDEN) ^ mix64((index + _U1) * _U_GOLDEN)


@njit(cache=True, nogil=True)
def next_u64(state):
    """Advance: returns (new_state, 64 random bits)."""
    state = state + _U_GOLDEN
    return state, mix64(state)


@njit(cache=True, nogil=True)
def next_uniform(state):
    """Advance: returns (new_state, uniform float64 in [0, 1))."""
    state, z = next_u64(state)
    return state, (z >> _U11) * _INV53


@njit(cache=True, nogil=True)
def randbelow(state, n):
    """Advance: returns (new_state, uniform integer in [0, n)).

    Plain 64-bit modulo; the bias for the n used here (< 2^20) is below
    2^-44 and irrelevant next to Monte Carlo error.  Deterministic, which is
    what the reproducibility contract actually needs.
    """
    state, z = next_u64(state)
    return state, z % n


# ---------------------------------------------------------------------------
# Pure-Python mirror.
# ---------------------------------------------------------------------------


def _py_mix64(z: int) -> int:
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
    return z ^ (z >> 31)


def py_stream_state(seed: int, index: int) -> int:
    seed &= _MASK64
    index &= _MASK64
    a = _py_mix64((seed + _GOLDEN) & _MASK64)
    b = _py_mix64(((index + 1) * _GOLDEN) & _MASK64)
    return a ^ b


class PyStream:
    """Pure-Python splitmix64 stream, bit-compatible with the kernels."""

    __slots__ = ("state",)

    def __init__(self, seed: int, index: int = 0):
        self.state = py_stream_state(seed, index)

    def u64(self) -> int:
        self.state = (self.state + _GOLDEN) & _MASK64
        return _py_mix64(self.state)

    def uniform(self) -> float:
        return (self.u64() >> 11) * _INV53

    def randbelow(self, n: int) -> int:
        return self.u64() % n

    def shuffle(self, seq) -> None:
        """Fisher-Yates, consuming draws exactly like the kernel version."""
        for i in range(len(seq) - 1, 0, -1):
            j = self.randbelow(i + 1)
            seq[i], seq[j] = seq[j], seq[i]


@njit(cache=True, nogil=True)
def _probe(seed, index, n, out):
    # test hook: fill `out` with the first n uniforms of stream (seed, index)
    state = stream_state(seed, index)
    for i in range(n):
        state, u = next_uniform(state)
        out[i] = u


def kernel_uniforms(seed: int, index: int, n: int) -> np.ndarray:
    """First `n` uniforms of stream (seed, index), drawn via the jitted path."""
    out = np.empty(n, np.float64)
    _probe(np.uint64(seed), np.uint64(index), n, out)
    return out
