"""Ground-state Lanczos, dense spectra, and a deflated CG solver.

The Lanczos iteration keeps the full Krylov basis and reorthogonalizes
every new vector against it (two Gram-Schmidt passes), restarting from
the current Ritz vector when the basis hits its memory cap.  Start
vectors are drawn from a seeded generator so identical inputs reproduce
identical results.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.linalg as sla

from .errors import SolverError

Apply = Callable[[np.ndarray], np.ndarray]

DENSE_DIM_MAX = 4096
NEAR_DEGENERATE_REL_GAP = 1e-8


@dataclass
class EigResult:
    e0: float
    psi0: np.ndarray = field(repr=False)
    residual: float
    gap_estimate: float
    iterations: int
    seed: int | None = None
    degenerate: bool = False
    ortho_defect: float | None = None  # audit: max |V V^T - I| when requested
    # low Ritz vectors at convergence; feed back as v0 to warm-start the
    # next solve of a nearby Hamiltonian (rows = vectors)
    continuation: np.ndarray | None = field(default=None, repr=False)


def start_vector(dim: int, seed: int) -> np.ndarray:
    v = np.random.default_rng(seed).standard_normal(dim)
    return v / np.linalg.norm(v)


def ground_state(
    apply_h: Apply,
    dim: int,
    tol: float = 1e-10,
    max_iter: int = 8000,
    seed: int = 0,
    v0: np.ndarray | None = None,
    max_basis: int = 160,
    keep_ritz: int = 8,
    basis_memory_gb: float = 2.0,
    audit_orthogonality: bool = False,
) -> EigResult:
    """Lowest eigenpair of a real symmetric operator given as a callback.

    Lanczos with full reorthogonalization against the whole stored basis;
    the exact projected matrix V^T H V is kept (its entries fall out of
    the reorthogonalization pass), so thick restarts - the lowest
    keep_ritz Ritz vectors are retained when the basis hits its cap - and
    warm starts are exact.  This preserves convergence through the tiny
    spin gaps of the strong-coupling sectors.  v0 may be a single start
    vector or a block (rows = vectors, e.g. EigResult.continuation from a
    neighbouring Hamiltonian).  The basis cap shrinks automatically to
    stay under basis_memory_gb.

    Converged when the explicit residual ||H psi - e0 psi|| <= tol;
    raises SolverError (carrying the best residual) when max_iter
    operator applications are exhausted first.
    """
    if dim < 1 or tol <= 0:
        raise ValueError("need dim >= 1 and tol > 0")
    if dim == 1:
        one = np.ones(1)
        e0 = float(apply_h(one)[0])
        return EigResult(e0, one, 0.0, np.inf, 1, seed, continuation=one[None, :])

    mem_cap = max(24, int(basis_memory_gb * 1e9 / (8 * dim)))
    m = max(4, min(max_basis, mem_cap, dim + 2))
    keep = max(1, min(keep_ritz, m - 2))

    # Basis bookkeeping: V[:nbasis] is orthonormal; columns 0..p-1 of the
    # projected matrix T are exact (their H-image is fully resolved), and
    # every processed column's residual is appended to the basis, so no
    # Krylov information is ever dropped - this is what makes block warm
    # starts sound.
    V = np.empty((m, dim))
    T = np.zeros((m, m))
    preset = _orthonormal_block(v0, dim, seed, limit=m // 2)
    q = len(preset)
    V[:q] = preset
    p = 0          # processed columns
    nbasis = q
    applies = 0
    best_res = np.inf
    ortho_defect: float | None = 0.0 if audit_orthogonality else None

    def ritz_block(evals, evecs, count):
        block = evecs[:, :count].T @ V[:p]
        block /= np.linalg.norm(block, axis=1, keepdims=True)
        return block

    steps = 0
    while True:
        steps += 1
        if p >= q and p != nbasis - 1 and steps % 4:
            # mostly depth-first: continue the Krylov chain from the
            # newest direction for speed, but every fourth step take the
            # oldest pending column so block-start residuals drain into
            # the Ritz space instead of idling as reorthogonality guards
            j = nbasis - 1
            V[[p, j]] = V[[j, p]]
            T[[p, j]] = T[[j, p]]
            T[:, [p, j]] = T[:, [j, p]]
        w = apply_h(V[p])
        applies += 1
        nrm_in = float(np.linalg.norm(w))
        c = V[:nbasis] @ w
        T[:nbasis, p] = c
        T[p, :nbasis] = c
        w -= V[:nbasis].T @ c
        b = float(np.linalg.norm(w))
        if b < 0.25 * nrm_in:  # second pass only on severe cancellation
            w -= V[:nbasis].T @ (V[:nbasis] @ w)
            b = float(np.linalg.norm(w))
        if b > 1e-14 and nbasis < m:
            T[p, nbasis] = T[nbasis, p] = b
            V[nbasis] = w / b
            nbasis += 1
        p += 1

        evals, evecs = np.linalg.eigh(T[:p, :p])
        e0 = float(evals[0])
        gap = float(evals[1] - evals[0]) if p > 1 else np.inf
        # exact coupling of the Ritz vector to the unprocessed tail
        res_est = float(np.linalg.norm(T[p:nbasis, :p] @ evecs[:, 0])) if nbasis > p else 0.0

        if res_est <= 0.2 * tol or nbasis == p or nbasis >= m or applies >= max_iter:
            if audit_orthogonality:
                g = V[:nbasis] @ V[:nbasis].T
                ortho_defect = max(ortho_defect, float(np.abs(g - np.eye(nbasis)).max()))
            psi = ritz_block(evals, evecs, 1)[0]
            hpsi = apply_h(psi)
            applies += 1
            e0 = float(psi @ hpsi)
            res = float(np.linalg.norm(hpsi - e0 * psi))
            best_res = min(best_res, res)
            if res <= tol:
                degenerate = gap < NEAR_DEGENERATE_REL_GAP * abs(e0)
                if degenerate:
                    warnings.warn(
                        f"near-degenerate ground state: gap estimate {gap:.3e} "
                        f"below {NEAR_DEGENERATE_REL_GAP:.0e} * |E0|",
                        stacklevel=2,
                    )
                cont = ritz_block(evals, evecs, min(keep, p))
                return EigResult(e0, psi, res, gap, applies, seed, degenerate, ortho_defect, cont)
            if applies >= max_iter:
                break
            if nbasis == p:
                # basis is H-invariant but short of tol: inject a
                # deterministic fresh direction
                bump = start_vector(dim, seed + 7919 + applies)
                bump -= V[:nbasis].T @ (V[:nbasis] @ bump)
                nb = float(np.linalg.norm(bump))
                if nb < 1e-12 or nbasis >= m:
                    break
                V[nbasis] = bump / nb
                nbasis += 1
                continue
            # thick restart: keep the lowest Ritz vectors plus the whole
            # unprocessed tail (their couplings are known exactly)
            nkeep = max(1, min(keep, p - 1))
            ntail = nbasis - p
            block = ritz_block(evals, evecs, nkeep)
            coup = evecs[:, :nkeep].T @ T[:p, p:nbasis]  # (nkeep, ntail)
            tail = V[p:nbasis].copy()
            V[:nkeep] = block
            V[nkeep : nkeep + ntail] = tail
            T[:, :] = 0.0
            T[:nkeep, :nkeep] = np.diag(evals[:nkeep])
            T[:nkeep, nkeep : nkeep + ntail] = coup
            T[nkeep : nkeep + ntail, :nkeep] = coup.T
            p = nkeep
            q = nkeep
            nbasis = nkeep + ntail
            continue

    raise SolverError(
        f"ground state not converged after {applies} operator applications "
        f"(best residual {best_res:.3e}, tol {tol:.1e})",
        residual=best_res,
    )


def _orthonormal_block(v0, dim: int, seed: int, limit: int) -> np.ndarray:
    """Start basis from a vector, a block of rows, or a seeded random draw."""
    if v0 is None:
        return start_vector(dim, seed)[None, :]
    block = np.atleast_2d(np.asarray(v0, dtype=float))
    if block.shape[1] != dim:
        raise ValueError(f"start vector length {block.shape[1]} does not match dim {dim}")
    kept: list[np.ndarray] = []
    for row in block[:limit]:
        u = row.copy()
        for prev in kept:
            u -= prev * (prev @ u)
        n = float(np.linalg.norm(u))
        if n > 1e-8 * float(np.linalg.norm(row)) and n > 0:
            kept.append(u / n)
    if not kept:
        kept = [start_vector(dim, seed)]
    return np.array(kept)


def dense_spectrum(apply_h: Apply, dim: int, d_max: int = DENSE_DIM_MAX) -> tuple[np.ndarray, np.ndarray]:
    """All eigenpairs (energies ascending, eigenvectors as columns).

    Builds the dense matrix column by column from the callback; refuses
    above d_max, where ground_state is the intended tool.
    """
    if dim > d_max:
        raise ValueError(
            f"dense_spectrum refused: dim {dim} > {d_max}; use ground_state for large sectors"
        )
    H = np.empty((dim, dim))
    e = np.zeros(dim)
    for j in range(dim):
        e[j] = 1.0
        H[:, j] = apply_h(e)
        e[j] = 0.0
    evals, evecs = np.linalg.eigh(0.5 * (H + H.T))
    return evals, evecs


@dataclass
class SolveResult:
    x: np.ndarray = field(repr=False)
    residual: float  # relative to ||projected rhs||
    iterations: int


def deflated_solve(
    apply_h: Apply,
    e0: float,
    psi0: np.ndarray,
    rhs: np.ndarray,
    tol: float = 1e-10,
    max_iter: int = 200_000,
) -> SolveResult:
    """Solve (H - e0) x = Q rhs with Q = 1 - |psi0><psi0|, x orthogonal to psi0.

    Conjugate gradients on the positive-semidefinite operator restricted
    to the complement of psi0.  Stagnation (near-degenerate ground state)
    raises SolverError suggesting the dense path.
    """
    if rhs.shape != psi0.shape:
        raise ValueError("rhs and psi0 dimensions differ")

    def project(u: np.ndarray) -> np.ndarray:
        return u - psi0 * (psi0 @ u)

    b = project(rhs)
    b_norm = float(np.linalg.norm(b))
    if b_norm == 0.0:
        return SolveResult(np.zeros_like(rhs), 0.0, 0)

    x = np.zeros_like(b)
    r = b.copy()
    p = r.copy()
    rs = float(r @ r)
    best = np.sqrt(rs) / b_norm
    since_improvement = 0
    for it in range(1, max_iter + 1):
        ap = project(apply_h(p) - e0 * p)
        pap = float(p @ ap)
        if pap <= 0:
            raise SolverError(
                "deflated operator lost positivity (degenerate or wrong e0); "
                "use the dense spectral path",
                residual=best,
            )
        alpha = rs / pap
        x += alpha * p
        r -= alpha * ap
        rs_new = float(r @ r)
        rel = np.sqrt(rs_new) / b_norm
        if rel <= tol:
            x = project(x)
            return SolveResult(x, rel, it)
        if rel < 0.5 * best:
            best, since_improvement = rel, 0
        else:
            since_improvement += 1
            if since_improvement > 5000:
                raise SolverError(
                    f"deflated CG stagnated at relative residual {rel:.3e}; "
                    "ground state may be near-degenerate, use the dense path",
                    residual=rel,
                )
        p = r + (rs_new / rs) * p
        rs = rs_new
    raise SolverError(
        f"deflated CG did not reach tol {tol:.1e} in {max_iter} iterations",
        residual=np.sqrt(rs) / b_norm,
    )
