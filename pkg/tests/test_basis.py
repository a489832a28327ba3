import numpy as np
import pytest

from critx.basis import (
    BoundaryCondition,
    ProductBasis,
    SpinSectorBasis,
    apply_hop,
    enumerate_sector,
    hop_sign,
    rank,
    select_bc,
)
from conftest import fermion_annihilator


def test_enumerate_4_2():
    b = enumerate_sector(4, 2)
    assert [int(w) for w in b.words] == [0b0011, 0b0101, 0b0110, 0b1001, 0b1010, 0b1100]


def test_enumerate_sizes():
    assert enumerate_sector(15, 5).dim == 3003
    b0 = enumerate_sector(7, 0)
    assert b0.dim == 1 and int(b0.words[0]) == 0
    assert enumerate_sector(5, 5).dim == 1


def test_enumerate_domain_errors():
    with pytest.raises(ValueError):
        enumerate_sector(4, 5)
    with pytest.raises(ValueError):
        enumerate_sector(64, 2)
    with pytest.raises(ValueError):
        enumerate_sector(4, -1)


@pytest.mark.parametrize("L,n", [(4, 2), (6, 3), (8, 1), (10, 5), (15, 5)])
def test_rank_unrank_bijection(L, n):
    b = enumerate_sector(L, n)
    assert b.dim <= 10**4
    for i in range(b.dim):
        w = b.unrank(i)
        assert rank(b, w) == i
        assert w.bit_count() == n
    assert np.all(np.diff(b.words.astype(np.int64)) > 0)


def test_rank_extremes():
    b = enumerate_sector(15, 5)
    assert rank(b, b.unrank(0)) == 0
    assert rank(b, int(b.words[-1])) == 3002


def test_rank_wrong_popcount():
    b = enumerate_sector(4, 2)
    with pytest.raises(ValueError):
        rank(b, 0b0111)


def test_hop_examples():
    assert apply_hop(0b0011, 1, 2, 4, BoundaryCondition.PERIODIC) == (0b0101, 1)
    # one occupied site (site 1) on the string between 0 and 2
    assert hop_sign(0b1011, 0, 2) == (0b1110, -1)


def test_hop_blocked_and_errors():
    bc = BoundaryCondition.PERIODIC
    assert apply_hop(0b0011, 2, 3, 4, bc) is None  # empty source
    assert apply_hop(0b0011, 0, 1, 4, bc) is None  # occupied target
    with pytest.raises(ValueError):
        apply_hop(0b0011, 0, 2, 5, bc)  # not neighbours on a 5-ring
    with pytest.raises(ValueError):
        hop_sign(0b0011, 1, 1)
    with pytest.raises(ValueError):
        apply_hop(0b1, 0, 1, 2, bc)  # no ring for L < 3


def test_wrap_hop_against_dense_oracle():
    # compare the wrap hop c+_0 c_3 on a 4-ring with the kron-built
    # operator (Jordan-Wigner strings in explicit 2x2 matrices)
    c = [fermion_annihilator(m, 4) for m in range(4)]
    hop = c[0].T @ c[3]
    for bc in BoundaryCondition:
        for w in (0b1000, 0b1001, 0b1100, 0b1110):
            res = apply_hop(w, 3, 0, 4, bc)
            expect = bc.phase * hop[w ^ 0b1001, w]
            if res is None:
                assert expect == 0
            else:
                new_word, sign = res
                assert new_word == w ^ 0b1001
                assert sign == pytest.approx(expect)


def test_hop_involution_and_popcount():
    b = enumerate_sector(6, 3)
    for bc in BoundaryCondition:
        for w0 in b.words:
            w0 = int(w0)
            for j in range(6):
                res = apply_hop(w0, j, (j + 1) % 6, 6, bc)
                if res is None:
                    continue
                w1, s1 = res
                assert w1.bit_count() == 3
                back = apply_hop(w1, (j + 1) % 6, j, 6, bc)
                assert back == (w0, s1)  # hermiticity seed: same sign back


def test_select_bc():
    assert select_bc(6) is BoundaryCondition.PERIODIC
    assert select_bc(8) is BoundaryCondition.ANTIPERIODIC
    assert select_bc(10) is BoundaryCondition.PERIODIC
    with pytest.raises(ValueError):
        select_bc(7)


def test_product_basis_indexing():
    up = enumerate_sector(4, 2)
    dn = enumerate_sector(4, 1)
    pb = ProductBasis(up, dn)
    assert pb.dim == 24
    seen = set()
    for iu in range(up.dim):
        for idn in range(dn.dim):
            i = pb.fuse(iu, idn)
            assert pb.split(i) == (iu, idn)
            seen.add(i)
    assert seen == set(range(pb.dim))
