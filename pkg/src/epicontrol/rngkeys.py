"""Counter-keyed deterministic random draws.

The simulation needs per-event randomness that is a pure function of
(seed, purpose, day, hour, individual, slot) so that replays are exact and
common-random-number couplings stay aligned when one individual's action
changes.  A splitmix64 finalizer over folded keys gives stateless uniforms
that vectorize over both individuals and slots.
"""

from __future__ import annotations

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_U64 = np.uint64
_MASK64 = (1 << 64) - 1
_INV_2_53 = 1.0 / float(1 << 53)


def _as_u64(value) -> np.ndarray:
    if isinstance(value, int):
        return np.asarray(value & _MASK64, dtype=np.uint64)
    arr = np.asarray(value)
    if arr.dtype == np.uint64:
        return arr
    return arr.astype(np.int64).astype(np.uint64)  # wraps negatives like C


def mix64(z) -> np.ndarray:
    """splitmix64 finalizer; accepts uint64 scalars or arrays."""
    z = _as_u64(z)
    with np.errstate(over="ignore"):
        z = (z ^ (z >> _U64(30))) * _MIX1
        z = (z ^ (z >> _U64(27))) * _MIX2
        return z ^ (z >> _U64(31))


def fold(key, component) -> np.ndarray:
    """Fold one integer component into a key (scalar or array, broadcasting)."""
    key = _as_u64(key)
    comp = _as_u64(component)
    with np.errstate(over="ignore"):
        return mix64(key + _GOLDEN * comp)


def make_key(*components) -> np.uint64:
    """Build a scalar base key by folding integer components in order."""
    key = np.asarray(0x243F6A8885A308D3, dtype=np.uint64)
    for c in components:
        key = fold(key, c)
    return np.uint64(key)


def uniforms(key, counter) -> np.ndarray:
    """Uniform [0, 1) draws keyed by (key, counter); broadcasts over arrays."""
    bits = fold(key, counter)
    return (bits >> _U64(11)).astype(np.float64) * _INV_2_53
