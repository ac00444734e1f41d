"""SplitMix64 random stream and positional seed derivation.

SplitMix64 is counter based: the k-th output only depends on ``seed + k * GAMMA``.
That lets us draw whole blocks with vectorized uint64 arithmetic while staying
bit-identical to the scalar reference recurrence.
"""

from __future__ import annotations

import numpy as np

from ._kernels import splitmix_uniforms

MASK64 = (1 << 64) - 1
GAMMA = 0x9E3779B97F4A7C15
MIX1 = 0xBF58476D1CE4E5B9
MIX2 = 0x94D049BB133111EB
REP_MUL = 0xD6E8FEB86659FD93

_TWO_PI = 2.0 * np.pi
_INV_2_53 = 1.0 / (1 << 53)


def mix64(z: int) -> int:
    """SplitMix64 output finalizer on a Python int."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * MIX1) & MASK64
    z = ((z ^ (z >> 27)) * MIX2) & MASK64
    return z ^ (z >> 31)


def _mix64_array(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * np.uint64(MIX1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(MIX2)
    return z ^ (z >> np.uint64(31))


def cell_seed(base_seed: int, i_n: int, i_p: int, i_rho: int, rep: int) -> int:
    """Seed for one sweep cell, derived from its grid position only."""
    if min(i_n, i_p, i_rho, rep) < 0:
        raise ValueError("cell indices must be non-negative")
    z = base_seed & MASK64
    z ^= (i_n * GAMMA) & MASK64
    z ^= (i_p * MIX1) & MASK64
    z ^= (i_rho * MIX2) & MASK64
    z ^= (rep * REP_MUL) & MASK64
    return mix64(z)


class Rng:
    """Single-owner SplitMix64 stream.

    ``uniforms`` and ``normals`` consume the stream exactly as repeated calls
    to ``next_u64`` would, so block draws and scalar draws interleave safely.
    """

    __slots__ = ("state",)

    def __init__(self, seed: int):
        self.state = int(seed) & MASK64

    def __repr__(self) -> str:
        return f"Rng(state=0x{self.state:016x})"

    def next_u64(self) -> int:
        self.state = (self.state + GAMMA) & MASK64
        return mix64(self.state)

    def uniform(self) -> float:
        return (self.next_u64() >> 11) * _INV_2_53

    def u64_block(self, k: int) -> np.ndarray:
        """Next ``k`` raw outputs as a uint64 array."""
        out = self.peek_u64(k)
        self.advance(k)
        return out

    def peek_u64(self, k: int) -> np.ndarray:
        """The next ``k`` raw outputs without advancing the stream."""
        if k < 0:
            raise ValueError("k must be non-negative")
        steps = np.arange(1, k + 1, dtype=np.uint64)
        with np.errstate(over="ignore"):
            states = np.uint64(self.state) + steps * np.uint64(GAMMA)
            return _mix64_array(states)

    def advance(self, k: int) -> None:
        self.state = (self.state + k * GAMMA) & MASK64

    def peek_uniforms(self, k: int) -> np.ndarray:
        if k < 0:
            raise ValueError("k must be non-negative")
        return splitmix_uniforms(np.uint64(self.state), k)

    def uniforms(self, k: int) -> np.ndarray:
        """``k`` draws in [0, 1) from the top 53 bits of each output."""
        out = self.peek_uniforms(k)
        self.advance(k)
        return out

    def normals(self, k: int) -> np.ndarray:
        """``k`` standard normals by Box-Muller, two uniforms per pair.

        An odd trailing deviate is discarded, so ``2 * ceil(k / 2)`` uniforms
        are consumed.
        """
        pairs = (k + 1) // 2
        u = self.uniforms(2 * pairs).reshape(pairs, 2)
        return box_muller(u[:, 0], u[:, 1]).reshape(-1)[:k]

    def spawn(self, count: int) -> list[Rng]:
        """Child streams keyed off one draw; child ``i`` depends only on ``i``."""
        key = self.next_u64()
        return [Rng(cell_seed(key, i, 0, 0, 0)) for i in range(count)]


def box_muller(u1: np.ndarray, u2: np.ndarray) -> np.ndarray:
    """Pairs of independent standard normals, shape ``(..., 2)``.

    ``1 - u1`` lies in (0, 1], which keeps the logarithm finite.
    """
    radius = np.sqrt(-2.0 * np.log1p(-u1))
    angle = _TWO_PI * u2
    return np.stack([radius * np.cos(angle), radius * np.sin(angle)], axis=-1)
