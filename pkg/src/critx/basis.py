"""Occupation-number bases for fixed particle-number fermion sectors.

A basis state of one spin species on L sites is an L-bit word with bit j
representing site j (bit set = occupied).  Words are kept in ascending
numeric order, which coincides with colexicographic order of the occupied
site sets, so combinadic ranking gives the position of a word without any
table scan.

Fermionic signs follow the Jordan-Wigner convention with modes ordered by
site index: hopping a particle between sites a and b picks up
(-1)^(number of occupied sites strictly between a and b), and a hop across
the ring boundary additionally carries the boundary phase (+1 periodic,
-1 antiperiodic).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from math import comb

import numpy as np

MAX_SITES = 63  # occupation words live in a single uint64


class BoundaryCondition(Enum):
    PERIODIC = "periodic"
    ANTIPERIODIC = "antiperiodic"

    @property
    def phase(self) -> int:
        """Sign picked up by a hop that wraps around the ring."""
        return 1 if self is BoundaryCondition.PERIODIC else -1


def select_bc(n_total: int) -> BoundaryCondition:
    """Boundary condition that keeps the ground state non-degenerate.

    Sectors with N = 4l+2 electrons use periodic, N = 4l antiperiodic
    boundary conditions; this closes the free-fermion shells so no level
    crossing occurs.  Odd N has no prescribed rule and is rejected.
    """
    if n_total % 2 != 0:
        raise ValueError(f"no boundary-condition rule for odd electron count {n_total}")
    return BoundaryCondition.PERIODIC if n_total % 4 == 2 else BoundaryCondition.ANTIPERIODIC


@dataclass(frozen=True)
class SpinSectorBasis:
    """All L-bit words with exactly n set bits, in ascending order."""

    L: int
    n: int
    words: np.ndarray = field(repr=False)

    @property
    def dim(self) -> int:
        return len(self.words)

    def unrank(self, index: int) -> int:
        if not 0 <= index < self.dim:
            raise ValueError(f"index {index} outside sector of dimension {self.dim}")
        return int(self.words[index])


def enumerate_sector(L: int, n: int) -> SpinSectorBasis:
    """Build the basis of the n-particle sector on L sites."""
    if not 0 <= n <= L <= MAX_SITES:
        raise ValueError(f"need 0 <= n <= L <= {MAX_SITES}, got L={L}, n={n}")
    if n == 0:
        return SpinSectorBasis(L, 0, np.zeros(1, dtype=np.uint64))
    words = np.empty(comb(L, n), dtype=np.uint64)
    w = (1 << n) - 1
    top = 1 << L
    i = 0
    while w < top:
        words[i] = w
        i += 1
        # Gosper's hack: next larger word with the same popcount
        c = w & -w
        r = w + c
        w = (((r ^ w) >> 2) // c) | r
    return SpinSectorBasis(L, n, words)


def rank(basis: SpinSectorBasis, word: int) -> int:
    """Position of `word` in the sector basis (combinadic, no scan)."""
    word = int(word)
    if word.bit_count() != basis.n:
        raise ValueError(
            f"word {word:#b} has {word.bit_count()} particles, sector holds {basis.n}"
        )
    r = 0
    i = 0
    w = word
    while w:
        p = (w & -w).bit_length() - 1
        i += 1
        r += comb(p, i)
        w &= w - 1
    return r


def hop_sign(word: int, src: int, dst: int) -> tuple[int, int] | None:
    """Apply c^dagger_dst c_src to a single word of one spin species.

    Returns (new word, Jordan-Wigner sign) or None when blocked (empty
    source or occupied target).  Pure string sign; no boundary phase.
    """
    if src == dst:
        raise ValueError("src and dst must differ")
    if not (word >> src) & 1 or (word >> dst) & 1:
        return None
    lo, hi = (src, dst) if src < dst else (dst, src)
    between = word & (((1 << hi) - 1) ^ ((1 << (lo + 1)) - 1))
    sign = -1 if between.bit_count() & 1 else 1
    return word ^ (1 << src) ^ (1 << dst), sign


def apply_hop(
    word: int, src: int, dst: int, L: int, bc: BoundaryCondition
) -> tuple[int, int] | None:
    """Nearest-neighbour hop on the L-site ring, with boundary phase.

    The hop between sites 0 and L-1 crosses the boundary: its string runs
    over the complementary arc (sites 1..L-2) and it picks up the phase of
    `bc` on top.  Non-neighbour pairs are a domain error.
    """
    if L < 3:
        raise ValueError("ring hops need L >= 3")
    if not (0 <= src < L and 0 <= dst < L):
        raise ValueError(f"sites {src}, {dst} outside 0..{L - 1}")
    wrap = {src, dst} == {0, L - 1}
    if abs(src - dst) != 1 and not wrap:
        raise ValueError(f"sites {src} and {dst} are not ring neighbours for L={L}")
    hop = hop_sign(word, src, dst)
    if hop is None:
        return None
    new_word, sign = hop
    if wrap:
        sign *= bc.phase
    return new_word, sign


@dataclass(frozen=True)
class ProductBasis:
    """Tensor basis of an up and a down sector; composite index is
    i = i_up * dim_dn + i_dn."""

    up: SpinSectorBasis
    dn: SpinSectorBasis

    @property
    def dim(self) -> int:
        return self.up.dim * self.dn.dim

    def split(self, index: int) -> tuple[int, int]:
        return divmod(index, self.dn.dim)

    def fuse(self, i_up: int, i_dn: int) -> int:
        return i_up * self.dn.dim + i_dn
