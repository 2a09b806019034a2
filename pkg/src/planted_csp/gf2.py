"""Parity systems over GF(2) in the +-1 convention (+1 -> bit 0, -1 -> bit 1)."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np


@dataclass(frozen=True)
class ParitySystem:
    """Equations prod_{i in support} x_i = rhs, variables 0-based."""
    n: int
    equations: tuple  # of (tuple of indices, rhs in {-1, 1})

    def __post_init__(self):
        for support, rhs in self.equations:
            if rhs not in (-1, 1):
                raise ValueError("rhs must be +-1")
            if any(not 0 <= i < self.n for i in support):
                raise ValueError("support index out of range")

    @classmethod
    def from_arrays(cls, n: int, supports, rhs) -> "ParitySystem":
        return cls(n, tuple((tuple(int(v) for v in s), int(b)) for s, b in zip(supports, rhs)))


def pack_rows(n: int, supports, rhs) -> tuple[np.ndarray, np.ndarray]:
    """Bit-pack supports into (m, ceil(n/64)) uint64 rows plus a rhs bit vector.

    A variable repeated inside one support cancels, as it should over GF(2).
    """
    words = max(1, (n + 63) // 64)
    m = len(rhs)
    rows = np.zeros((m, words), dtype=np.uint64)
    for r, support in enumerate(supports):
        for v in support:
            rows[r, v >> 6] ^= np.uint64(1) << np.uint64(v & 63)
    bits = (np.asarray(rhs, dtype=np.int64).reshape(-1) == -1).astype(np.uint8)
    return rows, bits


def pack_uniform(n: int, edges: np.ndarray, rhs) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised pack_rows for an (m, k) array of distinct-index supports."""
    words = max(1, (n + 63) // 64)
    edges = np.asarray(edges, dtype=np.int64)
    m = len(edges)
    rows = np.zeros((m, words), dtype=np.uint64)
    for col in range(edges.shape[1] if edges.ndim == 2 else 0):
        v = edges[:, col]
        np.bitwise_xor.at(rows, (np.arange(m), v >> 6), np.left_shift(np.uint64(1), (v & 63).astype(np.uint64)))
    bits = (np.asarray(rhs, dtype=np.int64).reshape(-1) == -1).astype(np.uint8)
    return rows, bits


def _eliminate(n: int, rows: np.ndarray, bits: np.ndarray):
    """Reduced row echelon form.

    Columns are pivoted from the highest variable index down, each on the
    lowest-index unused row, so lower-index variables are the free ones.
    """
    rows = rows.copy()
    bits = bits.copy()
    m = len(rows)
    used = np.zeros(m, dtype=bool)
    pivots = []  # (column, row)
    for col in range(n - 1, -1, -1):
        if m == 0:
            break
        w, b = col >> 6, np.uint64(col & 63)
        has = ((rows[:, w] >> b) & np.uint64(1)).astype(bool)
        cand = np.flatnonzero(has & ~used)
        if len(cand) == 0:
            continue
        r = cand[0]
        used[r] = True
        others = np.flatnonzero(has)
        others = others[others != r]
        if len(others):
            rows[others] ^= rows[r]
            bits[others] ^= bits[r]
        pivots.append((col, r))
    return rows, bits, used, pivots


class Inconsistent:
    """The system has no solution.

    ``witness`` lists original equation indices whose product reads 1 = -1;
    it is computed on first access.
    """

    def __init__(self, system: ParitySystem | None = None, packed=None):
        self._system = system
        self._packed = packed

    def __repr__(self):
        return "Inconsistent()"

    def __bool__(self):
        return False

    @cached_property
    def witness(self) -> list[int]:
        if self._system is not None:
            n = self._system.n
            rows, bits = pack_rows(n, [s for s, _ in self._system.equations], [b for _, b in self._system.equations])
        else:
            n, rows, bits = self._packed
        return _witness(n, rows, bits)


def _witness(n: int, rows: np.ndarray, bits: np.ndarray) -> list[int]:
    # incremental insertion, tracking which originals each basis row combines
    basis: dict[int, tuple[int, int, int]] = {}
    for idx in range(len(rows)):
        coeff = 0
        for w in range(rows.shape[1]):
            coeff |= int(rows[idx, w]) << (64 * w)
        rhs, combo = int(bits[idx]), 1 << idx
        while coeff:
            low = (coeff & -coeff).bit_length() - 1
            if low not in basis:
                basis[low] = (coeff, rhs, combo)
                break
            c2, r2, k2 = basis[low]
            coeff ^= c2
            rhs ^= r2
            combo ^= k2
        if coeff == 0 and rhs == 1:
            return [i for i in range(idx + 1) if combo >> i & 1]
    raise AssertionError("witness requested for a consistent system")


def solve_packed(n: int, rows: np.ndarray, bits: np.ndarray):
    """Solve a packed system; returns a +-1 int8 vector or Inconsistent."""
    red, rbits, used, pivots = _eliminate(n, rows, bits)
    if np.any(rbits[~used] == 1):
        # non-pivot rows are all-zero after full reduction
        return Inconsistent(packed=(n, rows, bits))
    x_bits = np.zeros(n, dtype=np.uint8)  # free variables -> bit 0 -> +1
    for col, r in pivots:
        x_bits[col] = rbits[r]
    return (1 - 2 * x_bits.astype(np.int8)).astype(np.int8)


def solve_parity(system: ParitySystem):
    """Return x in {-1,1}^n satisfying every equation, or an Inconsistent value."""
    rows, bits = pack_rows(system.n, [s for s, _ in system.equations], [b for _, b in system.equations])
    out = solve_packed(system.n, rows, bits)
    if isinstance(out, Inconsistent):
        return Inconsistent(system=system)
    return out


def rank_and_kernel_dim(system: ParitySystem) -> tuple[int, int]:
    rows, bits = pack_rows(system.n, [s for s, _ in system.equations], [b for _, b in system.equations])
    _, _, _, pivots = _eliminate(system.n, rows, bits)
    return len(pivots), system.n - len(pivots)


def satisfies(system: ParitySystem, x) -> bool:
    x = np.asarray(x)
    return all(int(np.prod(x[list(s)])) == b for s, b in system.equations)
