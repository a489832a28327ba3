"""Fidelity susceptibility by three mutually validating routes.

overlap route     chi = -2 ln|<psi(x-d/2)|psi(x+d/2)>| / d^2, Richardson-
                  extrapolated over the step pair {delta, delta/2}; the
                  centered stencil makes the raw estimator second order
                  in delta.
spectral sum      chi = sum_{n>0} |<n|H_I|0>|^2 / (E_n - E_0)^2 from a
                  full spectrum (small instances).
linear response   chi = ||x||^2 with (H - E0) x = Q H_I |0>, x deflated
                  against the ground state (intermediate sizes).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .eigen import EigResult, deflated_solve
from .errors import DegeneracyError, RefusalError, SolverError

# callable returning the ground state at a driving-parameter value
GroundSolver = Callable[[float], EigResult]


@dataclass
class FsPoint:
    x: float
    chi: float
    method: str  # finite_difference | spectral_sum | linear_response
    delta_used: float | None = None
    residuals: dict = field(default_factory=dict)


def overlap(a: np.ndarray, b: np.ndarray) -> float:
    """|<a|b>| for two normalized states over the same basis."""
    if a.shape != b.shape:
        raise ValueError(f"state dimensions differ: {a.shape} vs {b.shape}")
    return abs(float(a @ b))


def _chi_from_overlap(f: float, delta: float) -> float:
    if f == 0.0:
        raise SolverError("zero ground-state overlap: level crossing inside the step")
    # f is 1 - O(delta^2); log1p keeps the deficit accurate
    return -2.0 * np.log1p(min(f, 1.0) - 1.0) / delta**2


def fs_finite_difference(solve: GroundSolver, x: float, delta: float = 1e-3) -> FsPoint:
    """Overlap-route FS at x, centered steps, Richardson pair {delta, delta/2}."""
    states = {}
    max_resid = 0.0
    for s in (-0.5, 0.5, -0.25, 0.25):
        r = solve(x + s * delta)
        if r.degenerate:
            raise DegeneracyError(
                f"ground state near-degenerate at {x + s * delta:.6g}; FS undefined"
            )
        states[s] = r.psi0
        max_resid = max(max_resid, r.residual)
    chi_full = _chi_from_overlap(overlap(states[-0.5], states[0.5]), delta)
    chi_half = _chi_from_overlap(overlap(states[-0.25], states[0.25]), delta / 2)
    chi = (4.0 * chi_half - chi_full) / 3.0
    return FsPoint(
        x,
        max(chi, 0.0),
        "finite_difference",
        delta_used=delta,
        residuals={
            "chi_delta": chi_full,
            "chi_half_delta": chi_half,
            "richardson_raw": chi,
            "max_eig_residual": max_resid,
        },
    )


def fs_spectral_sum(
    energies: np.ndarray,
    vectors: np.ndarray,
    apply_driving: Callable[[np.ndarray], np.ndarray],
    x: float = np.nan,
) -> FsPoint:
    """FS from a complete spectrum (vectors as columns, energies ascending)."""
    e0 = energies[0]
    if len(energies) > 1 and energies[1] - e0 < 1e-10 * max(abs(e0), 1.0):
        raise DegeneracyError("degenerate ground level; spectral-sum FS undefined")
    w = apply_driving(vectors[:, 0])
    amps = vectors[:, 1:].T @ w
    chi = float(np.sum((amps / (energies[1:] - e0)) ** 2))
    return FsPoint(x, chi, "spectral_sum")


def fs_linear_response(
    apply_h: Callable[[np.ndarray], np.ndarray],
    ground: EigResult,
    apply_driving: Callable[[np.ndarray], np.ndarray],
    tol: float = 1e-10,
    x: float = np.nan,
) -> FsPoint:
    """FS as the squared norm of the deflated resolvent applied to H_I|0>."""
    if ground.degenerate:
        raise DegeneracyError("ground state near-degenerate; FS undefined")
    rhs = apply_driving(ground.psi0)
    sol = deflated_solve(apply_h, ground.e0, ground.psi0, rhs, tol=tol)
    chi = float(sol.x @ sol.x)
    return FsPoint(
        x,
        chi,
        "linear_response",
        residuals={
            "cg_relative_residual": sol.residual,
            "cg_iterations": sol.iterations,
            "eig_residual": ground.residual,
        },
    )


def fs_h_driven(chain, lam: float, tol: float = 1e-10, seed: int = 0) -> FsPoint:
    """Ising FS with respect to the longitudinal field at h = 0.

    Only the paramagnetic side lam > 1 is allowed: below it the response
    is dominated by the exponentially small parity splitting, a finite-
    size artifact rather than the field exponent.
    """
    from .eigen import ground_state
    from .models import DrivingTag, apply_driving

    if lam <= 1.0:
        raise RefusalError(
            f"h-driven FS needs lam > 1 (got {lam}); the gap closes exponentially below"
        )
    apply_h = lambda v: chain.apply_h(lam, 0.0, v)
    g = ground_state(apply_h, chain.dim, tol=tol, seed=seed)
    point = fs_linear_response(
        apply_h, g, lambda v: apply_driving(DrivingTag.TFIM_Z_SUM, chain, v), tol=tol, x=lam
    )
    return point
