"""Matrix-free Hamiltonian application for the two lattice models.

Asymmetric Hubbard chain (two fermion species on a ring):

    H = - sum_{j,delta=+-1} [ c^+_{j,up} c_{j+delta,up}
                              + t * c^+_{j,dn} c_{j+delta,dn} ]
        + U * sum_j n_{j,up} n_{j,dn}

with the up hopping fixed to 1 and t the down/up hopping ratio.  The
product structure of the sector basis is exploited: a state vector over
the composite index reshapes to a (dim_up, dim_dn) matrix V, and

    H v  =  K_up V  +  t (K_dn V^T)^T  +  U (D * V)

where K_sigma is the small one-species hopping matrix (unit amplitude,
boundary phase included) and D counts doubly occupied sites per basis
pair.  Nothing of the size dim_up*dim_dn is ever stored except vectors
and D itself.

Transverse-field Ising ring:

    H = sum_j [ s^z_j s^z_{j+1} + lam * s^x_j + h * s^z_j ]

on the full 2^L sigma^z product basis, bit j = site j, cleared bit =
spin up (s^z = +1).

All amplitudes are real; both Hamiltonians are real symmetric here.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
import scipy.sparse as sp

from .basis import BoundaryCondition, ProductBasis, SpinSectorBasis, apply_hop, enumerate_sector, rank


class DrivingTag(Enum):
    AHM_DOWN_HOP = "ahm_down_hop"  # dH/dt = -sum c+_dn c_dn over ring bonds
    TFIM_X_SUM = "tfim_x_sum"      # sum_j s^x_j
    TFIM_Z_SUM = "tfim_z_sum"      # sum_j s^z_j


@dataclass(frozen=True)
class ModelParams:
    """One Hamiltonian instance.  kind is "ahm" or "tfim"."""

    kind: str
    L: int
    # AHM couplings and sector
    t: float | None = None
    U: float | None = None
    n_up: int | None = None
    n_dn: int | None = None
    bc: BoundaryCondition | None = None
    # TFIM couplings
    lam: float | None = None
    h: float = 0.0

    def __post_init__(self):
        if self.kind == "ahm":
            if self.L < 3:
                raise ValueError("AHM ring needs L >= 3")
            if self.n_up is None or self.n_dn is None or self.bc is None:
                raise ValueError("AHM needs n_up, n_dn and a boundary condition")
            if not (0 <= self.n_up <= self.L and 0 <= self.n_dn <= self.L):
                raise ValueError("particle numbers outside 0..L")
            if self.t is None or self.t < 0 or self.U is None:
                raise ValueError("AHM needs t >= 0 and U")
        elif self.kind == "tfim":
            if self.L < 3:
                raise ValueError("TFIM ring needs L >= 3")
            if self.lam is None or self.lam < 0:
                raise ValueError("TFIM needs lam >= 0")
        else:
            raise ValueError(f"unknown model kind {self.kind!r}")


def _hop_matrix(sector: SpinSectorBasis, bc: BoundaryCondition) -> sp.csr_matrix:
    """-sum_{j,delta} c^+_j c_{j+delta} for one species, unit amplitude."""
    L = sector.L
    rows, cols, vals = [], [], []
    for i in range(sector.dim):
        w = sector.unrank(i)
        for j in range(L):
            for src, dst in ((j, (j + 1) % L), ((j + 1) % L, j)):
                hop = apply_hop(w, src, dst, L, bc)
                if hop is None:
                    continue
                new_word, sign = hop
                rows.append(rank(sector, new_word))
                cols.append(i)
                vals.append(-float(sign))
    return sp.csr_matrix((vals, (rows, cols)), shape=(sector.dim, sector.dim))


class AhmSector:
    """Precomputed coupling-independent structure of one AHM sector."""

    def __init__(self, L: int, n_up: int, n_dn: int, bc: BoundaryCondition):
        self.L = L
        self.bc = bc
        up = enumerate_sector(L, n_up)
        dn = enumerate_sector(L, n_dn) if n_dn != n_up else up
        self.basis = ProductBasis(up, dn)
        self.kin_up = _hop_matrix(up, bc)
        self.kin_dn = self.kin_up if dn is up else _hop_matrix(dn, bc)
        # doublon count per (up word, dn word) pair
        self.doublons = np.bitwise_count(
            up.words[:, None] & dn.words[None, :]
        ).astype(np.float64)

    @property
    def dim(self) -> int:
        return self.basis.dim

    def apply_h(self, t: float, U: float, psi: np.ndarray) -> np.ndarray:
        v = self._as_matrix(psi)
        out = self.kin_up @ v
        dn = self.kin_dn @ np.ascontiguousarray(v.T)  # kin_dn symmetric
        if t != 1.0:
            dn *= t
        out += dn.T
        tmp = np.multiply(self.doublons, v)
        if U != 1.0:
            tmp *= U
        out += tmp
        return out.reshape(-1)

    def apply_down_hop(self, psi: np.ndarray) -> np.ndarray:
        v = self._as_matrix(psi)
        return np.ascontiguousarray((self.kin_dn @ np.ascontiguousarray(v.T)).T).reshape(-1)

    def _as_matrix(self, psi: np.ndarray) -> np.ndarray:
        if psi.shape != (self.dim,):
            raise ValueError(f"vector length {psi.shape} does not match sector dimension {self.dim}")
        return psi.reshape(self.basis.up.dim, self.basis.dn.dim)


class TfimChain:
    """Precomputed structure of the 2^L transverse-field Ising basis."""

    def __init__(self, L: int):
        self.L = L
        self.dim = 1 << L
        states = np.arange(self.dim, dtype=np.int64)
        z = 1 - 2 * ((states[None, :] >> np.arange(L)[:, None]) & 1)  # (L, dim)
        self.z_sum = z.sum(axis=0).astype(np.float64)
        self.zz_sum = (z * np.roll(z, -1, axis=0)).sum(axis=0).astype(np.float64)
        self.flips = states[None, :] ^ (np.int64(1) << np.arange(L, dtype=np.int64)[:, None])

    def apply_h(self, lam: float, h: float, psi: np.ndarray) -> np.ndarray:
        if psi.shape != (self.dim,):
            raise ValueError(f"vector length {psi.shape} does not match dimension {self.dim}")
        out = (self.zz_sum + h * self.z_sum) * psi
        for j in range(self.L):
            out += lam * psi[self.flips[j]]
        return out

    def apply_x_sum(self, psi: np.ndarray) -> np.ndarray:
        out = np.zeros_like(psi)
        for j in range(self.L):
            out += psi[self.flips[j]]
        return out

    def apply_z_sum(self, psi: np.ndarray) -> np.ndarray:
        return self.z_sum * psi


def build_structure(params: ModelParams) -> AhmSector | TfimChain:
    """Coupling-independent workspace for a model; reuse across grid points."""
    if params.kind == "ahm":
        return AhmSector(params.L, params.n_up, params.n_dn, params.bc)
    return TfimChain(params.L)


def apply_hamiltonian(params: ModelParams, structure, psi: np.ndarray) -> np.ndarray:
    """H |psi> for the given couplings; structure from build_structure."""
    if params.kind == "ahm":
        return structure.apply_h(params.t, params.U, psi)
    return structure.apply_h(params.lam, params.h, psi)


def apply_driving(tag: DrivingTag, structure, psi: np.ndarray) -> np.ndarray:
    """Driving operator H_I |psi>; H(x + eps) = H(x) + eps * H_I exactly."""
    if tag is DrivingTag.AHM_DOWN_HOP:
        if not isinstance(structure, AhmSector):
            raise ValueError("ahm_down_hop driving needs an AHM sector")
        return structure.apply_down_hop(psi)
    if not isinstance(structure, TfimChain):
        raise ValueError(f"{tag.value} driving needs a TFIM chain")
    if tag is DrivingTag.TFIM_X_SUM:
        return structure.apply_x_sum(psi)
    return structure.apply_z_sum(psi)


def driving_tag_for(params: ModelParams) -> DrivingTag:
    """Tag of the sweep driving term (t for AHM, lambda for TFIM)."""
    return DrivingTag.AHM_DOWN_HOP if params.kind == "ahm" else DrivingTag.TFIM_X_SUM
