"""Shared dense-operator oracles, built by explicit matrix algebra.

These construct Hamiltonians from 2x2 site matrices with Jordan-Wigner
strings (fermions) or Pauli matrices (spins), independently of the
package's bit kernels, and serve as the ground truth for small systems.
"""

import numpy as np
import pytest

from critx.basis import BoundaryCondition

ID2 = np.eye(2)
Z = np.diag([1.0, -1.0])  # (-1)^n phase: |0> empty -> +1, |1> occupied -> -1
ANNIHILATE = np.array([[0.0, 1.0], [0.0, 0.0]])  # <0|s|1> = 1
SX = np.array([[0.0, 1.0], [1.0, 0.0]])
SZ = np.diag([1.0, -1.0])  # bit clear = spin up


def op_chain(factors: list[np.ndarray]) -> np.ndarray:
    """Kron product with factors[j] acting on bit j (bit 0 least significant)."""
    full = factors[0]
    for f in factors[1:]:
        full = np.kron(f, full)
    return full


def fermion_annihilator(mode: int, n_modes: int) -> np.ndarray:
    """c_mode with Jordan-Wigner string over lower modes."""
    factors = [Z] * mode + [ANNIHILATE] + [ID2] * (n_modes - mode - 1)
    return op_chain(factors)


def dense_ahm(L: int, t: float, U: float, bc: BoundaryCondition) -> np.ndarray:
    """Full-Fock-space AHM matrix; up modes 0..L-1, down modes L..2L-1."""
    n_modes = 2 * L
    c = [fermion_annihilator(m, n_modes) for m in range(n_modes)]
    dim = 1 << n_modes
    H = np.zeros((dim, dim))
    for species, amp in ((0, 1.0), (L, t)):
        for j in range(L):
            jp = (j + 1) % L
            phase = bc.phase if jp == 0 else 1.0
            hop = c[species + j].T @ c[species + jp]
            H -= amp * phase * (hop + hop.T)
    for j in range(L):
        n_up = c[j].T @ c[j]
        n_dn = c[L + j].T @ c[L + j]
        H += U * (n_up @ n_dn)
    return H


def dense_ahm_sector(structure, t: float, U: float) -> np.ndarray:
    """AHM matrix on one sector, sliced out of the full-space oracle."""
    L = structure.L
    up_words = structure.basis.up.words
    dn_words = structure.basis.dn.words
    idx = np.array(
        [int(wu) | (int(wd) << L) for wu in up_words for wd in dn_words], dtype=np.int64
    )
    H = dense_ahm(L, t, U, structure.bc)
    # particle-number conservation: no coupling out of the sector
    mask = np.zeros(H.shape[0], dtype=bool)
    mask[idx] = True
    off = H[idx][:, ~mask]
    assert np.abs(off).max() < 1e-14
    return H[np.ix_(idx, idx)]


def dense_tfim(L: int, lam: float, h: float) -> np.ndarray:
    dim = 1 << L
    H = np.zeros((dim, dim))
    sz = [op_chain([ID2] * j + [SZ] + [ID2] * (L - j - 1)) for j in range(L)]
    sx = [op_chain([ID2] * j + [SX] + [ID2] * (L - j - 1)) for j in range(L)]
    for j in range(L):
        H += sz[j] @ sz[(j + 1) % L]
        H += lam * sx[j]
        H += h * sz[j]
    return H


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
