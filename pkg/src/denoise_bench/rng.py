"""Counter-based pseudo-random streams for reproducible corruption.

Every random decision in the corruption pipeline is a pure function of a
64-bit stream seed and a counter, so outputs never depend on traversal
order, worker count, or scheduling. The construction is fixed here so that
independent ports can reproduce streams bit-for-bit:

* ``mix64`` is the SplitMix64 output function (Steele, Lea, Flood 2014)::

      z ^= z >> 30;  z *= 0xBF58476D1CE4E5B9
      z ^= z >> 27;  z *= 0x94D049BB133111EB
      z ^= z >> 31                                (all arithmetic mod 2**64)

* The stream value of ``seed`` at counter ``i`` (i >= 0) is
  ``mix64((seed + (i + 1) * 0x9E3779B97F4A7C15) mod 2**64)``, i.e. the
  (i+1)-th output of a SplitMix64 generator whose state starts at ``seed``.
* ``derive_seed(seed, label)`` = ``mix64(seed XOR fnv1a64(label))`` where
  ``fnv1a64`` hashes the label's UTF-8 bytes (offset basis
  0xCBF29CE484222325, prime 0x100000001B3). Labels are plain strings such
  as ``"awgn"``, ``"sp"``, or an image id.
* A unit double at counter ``i`` is ``((value >> 11) + 1) * 2.0**-53``,
  which lies in (0, 1] and therefore is safe under ``log``.
* A standard normal at index ``i`` is Box-Muller over counters ``2i`` and
  ``2i + 1``: ``sqrt(-2 ln u1) * cos(2 pi u2)``.
* ``shuffle_prefix(n, k, seed)`` runs a forward Fisher-Yates shuffle of
  ``range(n)`` for ``k`` steps: step ``i`` draws counter ``i`` and swaps
  positions ``i`` and ``i + (value mod (n - i))``. The first ``k`` entries
  equal the first ``k`` entries of the full shuffle.
"""

from __future__ import annotations

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)

_FNV_BASIS = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3

_U64_MASK = (1 << 64) - 1


def fnv1a64(label: str) -> int:
    """FNV-1a 64-bit hash of a label's UTF-8 bytes."""
    h = _FNV_BASIS
    for byte in label.encode("utf-8"):
        h = ((h ^ byte) * _FNV_PRIME) & _U64_MASK
    return h


def _mix64(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


def derive_seed(seed: int, label: str) -> int:
    """Derive a labeled sub-stream seed; same (seed, label) -> same stream."""
    # 1-element array: numpy's 0-d/scalar path warns on uint64 wraparound.
    z = np.array([(seed & _U64_MASK) ^ fnv1a64(label)], dtype=np.uint64)
    return int(_mix64(z)[0])


def stream_u64(seed: int, counters: np.ndarray) -> np.ndarray:
    """Stream values (uint64) at the given counter positions."""
    c = np.asarray(counters, dtype=np.uint64)
    state = np.uint64(seed & _U64_MASK) + (c + np.uint64(1)) * _GOLDEN
    return _mix64(state)


def stream_unit(seed: int, counters: np.ndarray) -> np.ndarray:
    """Unit doubles in (0, 1] at the given counter positions."""
    bits = stream_u64(seed, counters)
    return ((bits >> np.uint64(11)) + np.uint64(1)).astype(np.float64) * 2.0**-53


def standard_normals(seed: int, count: int) -> np.ndarray:
    """`count` standard normals; entry i uses counters 2i and 2i+1."""
    idx = np.arange(count, dtype=np.uint64)
    u1 = stream_unit(seed, idx * np.uint64(2))
    u2 = stream_unit(seed, idx * np.uint64(2) + np.uint64(1))
    return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)


def shuffle_prefix(n: int, k: int, seed: int) -> np.ndarray:
    """First `k` positions of the seeded Fisher-Yates shuffle of range(n)."""
    if not 0 <= k <= n:
        raise ValueError(f"prefix length {k} outside [0, {n}]")
    perm = np.arange(n, dtype=np.int64)
    if k == 0:
        return perm[:0]
    draws = stream_u64(seed, np.arange(k, dtype=np.uint64)).tolist()
    for i in range(k):
        j = i + draws[i] % (n - i)
        perm[i], perm[j] = perm[j], perm[i]
    return perm[:k]
