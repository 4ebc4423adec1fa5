"""Counter-based normals: Philox4x32-10 plus Box-Muller, vectorised in numpy.

A normal is a pure function of (seed, stream, step), so paths can be split
over any number of workers, in any order, without changing a single bit.
One Philox call yields four 32-bit words = two uniforms = one
Box-Muller pair, which covers steps ``2j`` and ``2j + 1`` of a stream.
"""

from __future__ import annotations

import numpy as np

_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = np.uint64(0x9E3779B9)
_W1 = np.uint64(0xBB67AE85)
_MASK = np.uint64(0xFFFFFFFF)
_S32 = np.uint64(32)
ROUNDS = 10


def philox4x32(counter, key, rounds: int = ROUNDS) -> np.ndarray:
    """Philox4x32 block function.

    ``counter`` has shape (..., 4), ``key`` shape (..., 2), 32-bit words in
    uint64 containers; returns uint64 array of shape (..., 4).
    """
    ctr = np.asarray(counter, dtype=np.uint64) & _MASK
    k = np.asarray(key, dtype=np.uint64) & _MASK
    c0, c1, c2, c3 = (ctr[..., i] for i in range(4))
    k0, k1 = k[..., 0], k[..., 1]
    for r in range(rounds):
        if r:
            k0 = (k0 + _W0) & _MASK
            k1 = (k1 + _W1) & _MASK
        p0 = _M0 * c0
        p1 = _M1 * c2
        hi0, lo0 = p0 >> _S32, p0 & _MASK
        hi1, lo1 = p1 >> _S32, p1 & _MASK
        c0, c1, c2, c3 = hi1 ^ c1 ^ k0, lo1, hi0 ^ c3 ^ k1, lo0
    return np.stack(np.broadcast_arrays(c0, c1, c2, c3), axis=-1)


def _uniform52(hi, lo) -> np.ndarray:
    """Uniform in the open interval (0, 1) from two 32-bit words.

    52 bits plus half a step: (k + 1/2) 2^-52 is exact in float64, so neither
    0 nor 1 can come out (with 53 bits the top value rounds up to 1.0).
    """
    bits = ((hi << _S32) | lo) >> np.uint64(12)
    return (bits.astype(np.float64) + 0.5) * 2.0**-52


def seed_key(seed: int) -> tuple[int, int]:
    s = int(seed) & 0xFFFFFFFFFFFFFFFF
    return s & 0xFFFFFFFF, s >> 32


def _pairs(seed: int, streams: np.ndarray, blocks: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Box-Muller pair (even step, odd step) for each (stream, block)."""
    streams, blocks = np.broadcast_arrays(streams, blocks)
    ctr = np.stack([blocks & _MASK, blocks >> _S32, streams & _MASK, streams >> _S32], axis=-1)
    k0, k1 = seed_key(seed)
    out = philox4x32(ctr, np.array([k0, k1], dtype=np.uint64))
    u1 = _uniform52(out[..., 0], out[..., 1])
    u2 = _uniform52(out[..., 2], out[..., 3])
    r = np.sqrt(-2.0 * np.log(u1))
    angle = 2.0 * np.pi * u2
    return r * np.cos(angle), r * np.sin(angle)


def normals(seed: int, streams, steps) -> np.ndarray:
    """Standard normals for every (stream, step) pair, broadcast together.

    ``streams`` and ``steps`` are nonnegative integer arrays (< 2**64 and
    < 2**33 respectively); the result has their broadcast shape.
    """
    streams, steps = np.broadcast_arrays(np.asarray(streams, dtype=np.uint64), np.asarray(steps, dtype=np.uint64))
    even, odd = _pairs(seed, streams, steps >> np.uint64(1))
    return np.where((steps & np.uint64(1)).astype(bool), odd, even)


def normal_block(seed: int, streams, n_steps: int, first_step: int = 0) -> np.ndarray:
    """Normals of shape (len(streams), n_steps) for consecutive steps of each stream.

    Same numbers as :func:`normals`, computed one Philox call per pair.
    """
    streams = np.asarray(streams, dtype=np.uint64)
    if n_steps <= 0:
        return np.empty((streams.size, 0))
    b0 = first_step // 2
    b1 = (first_step + n_steps - 1) // 2 + 1
    blocks = np.arange(b0, b1, dtype=np.uint64)
    even, odd = _pairs(seed, streams[:, None], blocks[None, :])
    both = np.empty((streams.size, 2 * blocks.size))
    both[:, 0::2] = even
    both[:, 1::2] = odd
    off = first_step - 2 * b0
    return both[:, off:off + n_steps]
