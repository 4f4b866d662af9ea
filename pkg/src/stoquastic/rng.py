"""Counter-based random numbers: every draw is a pure hash of its coordinates.

numpy's bit generators are sequential per stream, which rules out advancing
thousands of independent walk streams in one vectorised step.  Here a draw is
``mix64(key, slot, attempt, step)``, so results never depend on batching or
execution order.
"""
from __future__ import annotations

import hashlib

import numpy as np

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def _mix_int(z: int) -> int:
    z &= _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def derive_key(seed: int, *labels) -> int:
    """64-bit stream key from a root seed and a path of labels (str or int)."""
    key = _mix_int(int(seed) & _MASK)
    for label in labels:
        if isinstance(label, str):
            word = int.from_bytes(hashlib.blake2b(label.encode(), digest_size=8).digest(), "little")
        else:
            word = int(label) & _MASK
        key = _mix_int(key ^ _mix_int(word + _GOLDEN))
    return key


def mix64(z: np.ndarray) -> np.ndarray:
    """SplitMix64 finaliser on a uint64 array (wrapping arithmetic)."""
    z = z.astype(np.uint64, copy=True)
    z ^= z >> np.uint64(30)
    z *= np.uint64(0xBF58476D1CE4E5B9)
    z ^= z >> np.uint64(27)
    z *= np.uint64(0x94D049BB133111EB)
    z ^= z >> np.uint64(31)
    return z


def hash_words(key: int, *counters) -> np.ndarray:
    """Hash broadcast integer counter arrays into uint64 words under ``key``."""
    with np.errstate(over="ignore"):
        h = np.full(np.broadcast(*counters).shape if counters else (), key, dtype=np.uint64)
        for c in counters:
            c = np.asarray(c).astype(np.uint64)
            h = mix64(h ^ mix64(c + np.uint64(_GOLDEN)))
    return h


def uniforms(key: int, *counters) -> np.ndarray:
    """Doubles in [0, 1) with 53 random bits each."""
    return (hash_words(key, *counters) >> np.uint64(11)).astype(np.float64) * (1.0 / (1 << 53))


def bits(key: int, nbits: int, *counters) -> np.ndarray:
    """Uniform integers in ``[0, 2^nbits)`` for ``nbits <= 62``."""
    if not 0 <= nbits <= 62:
        raise ValueError("nbits must lie in [0, 62]")
    words = hash_words(key, *counters) >> np.uint64(64 - nbits) if nbits else np.zeros(np.broadcast(*counters).shape, np.uint64)
    return words.astype(np.int64)
