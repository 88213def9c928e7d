"""Counter-based random streams.

Every random number is a pure function of ``(seed, stream index, block counter)``
through the Philox4x32-10 bijection, so walk ``k`` sees the same draws whether
it runs alone, inside a batch of a million walks, or on another worker.
A stream may carry one index or an array of indices; in the latter case every
draw returns one row per index and all rows advance their counter together.
"""

from __future__ import annotations

import numpy as np

_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = np.uint64(0x9E3779B9)
_W1 = np.uint64(0xBB67AE85)
_MASK32 = np.uint64(0xFFFFFFFF)
_SHIFT32 = np.uint64(32)
_ROUNDS = 10

# 53-bit mantissa, offset by half an ulp so draws lie in the open interval (0, 1).
_TWO_M53 = 2.0**-53


def philox4x32(counter: np.ndarray, key: np.ndarray) -> np.ndarray:
    """Apply Philox4x32-10 to ``counter`` (shape ``(..., 4)``) under ``key`` (shape ``(..., 2)``).

    Words are held in ``uint64`` arrays but only the low 32 bits are meaningful.
    Returns an array of the same shape as ``counter``.
    """
    c = np.asarray(counter, dtype=np.uint64) & _MASK32
    k = np.asarray(key, dtype=np.uint64) & _MASK32
    c0, c1, c2, c3 = (c[..., i].copy() for i in range(4))
    k0 = np.broadcast_to(k[..., 0], c0.shape).copy()
    k1 = np.broadcast_to(k[..., 1], c0.shape).copy()
    for r in range(_ROUNDS):
        if r:
            k0 = (k0 + _W0) & _MASK32
            k1 = (k1 + _W1) & _MASK32
        p0 = _M0 * c0
        p1 = _M1 * c2
        hi0, lo0 = p0 >> _SHIFT32, p0 & _MASK32
        hi1, lo1 = p1 >> _SHIFT32, p1 & _MASK32
        c0, c1, c2, c3 = hi1 ^ c1 ^ k0, lo1, hi0 ^ c3 ^ k1, lo0
    return np.stack([c0, c1, c2, c3], axis=-1)


def _split64(value) -> tuple[np.ndarray, np.ndarray]:
    v = np.asarray(value, dtype=np.uint64)
    return v & _MASK32, v >> _SHIFT32


class RngStream:
    """Reproducible stream(s) keyed by a 64-bit master seed and 64-bit stream index.

    ``index`` may be an int or a 1-D integer array; with an array, every draw
    has a leading axis of that length. The stream owns a block counter that
    advances by one per Philox block (two doubles) consumed.
    """

    def __init__(self, seed: int, index, counter: int = 0):
        if not 0 <= int(seed) < 2**64:
            raise ValueError(f"seed must fit in 64 bits, got {seed}")
        self.seed = int(seed)
        idx = np.asarray(index, dtype=np.uint64)
        if idx.ndim > 1:
            raise ValueError("stream index must be a scalar or a 1-D array")
        self.index = idx
        self.counter = int(counter)
        lo, hi = _split64(self.seed)
        self._key = np.array([lo, hi], dtype=np.uint64)

    @property
    def batched(self) -> bool:
        return self.index.ndim == 1

    def __len__(self) -> int:
        return int(self.index.shape[0]) if self.batched else 1

    def subset(self, mask) -> "RngStream":
        """Streams for the selected rows, sharing the current counter."""
        return RngStream(self.seed, self.index[mask], self.counter)

    def _blocks(self, nblocks: int) -> np.ndarray:
        # counter words: (block lo, block hi, index lo, index hi)
        blocks = np.arange(self.counter, self.counter + nblocks, dtype=np.uint64)
        self.counter += nblocks
        b_lo, b_hi = _split64(blocks)
        i_lo, i_hi = _split64(self.index)
        shape = self.index.shape + (nblocks,)
        ctr = np.empty(shape + (4,), dtype=np.uint64)
        ctr[..., 0] = b_lo
        ctr[..., 1] = b_hi
        ctr[..., 2] = i_lo[..., None]
        ctr[..., 3] = i_hi[..., None]
        return philox4x32(ctr, self._key)

    def uniforms(self, k: int) -> np.ndarray:
        """``k`` doubles in (0, 1) per row; consumes ``ceil(k/2)`` blocks."""
        words = self._blocks((k + 1) // 2)
        hi = (words[..., 0::2] << _SHIFT32) | words[..., 1::2]
        u = ((hi >> np.uint64(11)).astype(np.float64) + 0.5) * _TWO_M53
        return u.reshape(self.index.shape + (-1,))[..., :k]

    def normals(self, k: int) -> np.ndarray:
        """``k`` standard Gaussians per row by Box-Muller; consumes ``ceil(k/2)`` blocks."""
        m = (k + 1) // 2
        u = self.uniforms(2 * m)
        rad = np.sqrt(-2.0 * np.log(u[..., 0::2]))
        ang = 2.0 * np.pi * u[..., 1::2]
        z = np.empty(self.index.shape + (2 * m,))
        z[..., 0::2] = rad * np.cos(ang)
        z[..., 1::2] = rad * np.sin(ang)
        return z[..., :k]

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, index={self.index!r}, counter={self.counter})"
