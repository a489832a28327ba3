"""Finite-size scaling analysis of fidelity-susceptibility curves.

Peak location by local parabola, log-log power-law fits, data collapse
with a pooled local-regression master curve, the half-filling quadratic
form chi ~ a + b L + c L^(-1/2) (t - t_max)^2, and critical-point
extrapolations (t_max drift ~ L^-2 for the symmetry-breaking transition,
steepest-descent drift ~ 1/L for the infinite-order one).

All fits report residuals and simple standard errors; comparisons
downstream should quote value +- stderr, never a bare number.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import RefusalError


@dataclass(frozen=True)
class FsCurve:
    """One FS-vs-driving-parameter curve at fixed model and size.

    params holds every Hamiltonian field except the driving value; meta
    carries provenance (seed, delta, tolerances, grid policy).
    """

    params: dict
    grid: np.ndarray
    chi: np.ndarray
    method: str
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        g = np.asarray(self.grid, dtype=float)
        c = np.asarray(self.chi, dtype=float)
        if g.ndim != 1 or g.shape != c.shape:
            raise ValueError("grid and chi must be 1-D arrays of equal length")
        if len(g) > 1 and not np.all(np.diff(g) > 0):
            raise ValueError("grid must be strictly ascending")
        if np.any(c < 0):
            raise ValueError("negative chi value in curve")
        object.__setattr__(self, "grid", g)
        object.__setattr__(self, "chi", c)

    @property
    def L(self) -> int:
        return int(self.params["L"])


@dataclass
class PeakEstimate:
    t_max: float
    chi_max: float
    curvature: float  # second derivative at the peak, < 0
    window: tuple[int, int]  # grid index range used


@dataclass
class PowerFit:
    exponent: float
    prefactor: float
    r_squared: float
    exponent_stderr: float
    n_points: int


@dataclass
class CollapseFit:
    mu: float
    nu: float
    alpha: float  # mu / nu
    A: float
    B: float
    residual: float  # collapse cost at the optimum
    peaks: dict[int, PeakEstimate]
    nu_stderr: float
    mu_fit: PowerFit
    extras: dict = field(default_factory=dict)


@dataclass
class KtFormFit:
    a: float
    b: float
    c: float
    stderr: tuple[float, float, float]
    half_width: float
    n_points: int
    rms_residual: float


@dataclass
class TcEstimate:
    tc: float
    law: str  # landau_L2 | kt_one_over_L
    residual: float
    markers: list[tuple[int, float]]  # (L, per-size feature location)
    tc_stderr: float


def _parabola_vertex(ts: np.ndarray, ys: np.ndarray) -> tuple[float, float, float]:
    """(t_vertex, y_vertex, curvature) of the parabola through three points."""
    a, b, c = np.polyfit(ts, ys, 2)
    if a >= 0:
        raise RefusalError("no local maximum: parabola through top samples opens upward")
    tv = -b / (2 * a)
    return float(tv), float(np.polyval([a, b, c], tv)), float(2 * a)


def find_peak(curve: FsCurve, refine: Callable[[float], float] | None = None, max_refine: int = 3) -> PeakEstimate:
    """Peak of a curve from the maximum sample and its two neighbours.

    With a refine callback, chi is re-evaluated at the parabola vertex up
    to max_refine times and the parabola refitted through the top three
    points.  A maximum on the grid boundary is refused.
    """
    if len(curve.grid) < 5:
        raise RefusalError("need at least 5 points to locate a peak")
    i = int(np.argmax(curve.chi))
    if i == 0 or i == len(curve.grid) - 1:
        raise RefusalError(
            f"maximum at the grid boundary (t = {curve.grid[i]:.6g}); extend the grid"
        )
    pts = list(zip(curve.grid[i - 1 : i + 2], curve.chi[i - 1 : i + 2]))
    tv, yv, curv = _parabola_vertex(*map(np.array, zip(*pts)))
    if refine is not None:
        for _ in range(max_refine):
            if any(abs(tv - t) < 1e-12 for t, _ in pts):
                break
            pts.append((tv, refine(tv)))
            pts.sort()
            j = max(range(len(pts)), key=lambda q: pts[q][1])
            j = min(max(j, 1), len(pts) - 2)
            tri = pts[j - 1 : j + 2]
            tv, yv, curv = _parabola_vertex(*map(np.array, zip(*tri)))
    return PeakEstimate(tv, yv, curv, (i - 1, i + 1))


def fit_power(points: Sequence[tuple[float, float]]) -> PowerFit:
    """Least squares of ln y on ln x: y = prefactor * x^exponent."""
    if len(points) < 3:
        raise ValueError("power-law fit needs at least 3 points")
    x = np.array([p[0] for p in points], dtype=float)
    y = np.array([p[1] for p in points], dtype=float)
    if np.any(x <= 0) or np.any(y <= 0):
        raise ValueError("power-law fit needs strictly positive values")
    lx, ly = np.log(x), np.log(y)
    n = len(lx)
    A = np.column_stack([lx, np.ones(n)])
    (slope, intercept), res, *_ = np.linalg.lstsq(A, ly, rcond=None)
    fitted = A @ [slope, intercept]
    ss_res = float(np.sum((ly - fitted) ** 2))
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0 else 1.0 - ss_res / ss_tot
    if n > 2:
        sigma2 = ss_res / (n - 2)
        sxx = float(np.sum((lx - lx.mean()) ** 2))
        stderr = float(np.sqrt(sigma2 / sxx)) if sxx > 0 else np.inf
    else:
        stderr = np.inf
    return PowerFit(float(slope), float(np.exp(intercept)), r2, stderr, n)


def rescale(curve: FsCurve, peak: PeakEstimate, nu: float) -> tuple[np.ndarray, np.ndarray]:
    """(L^nu (t - t_max), (chi_max - chi) / chi) over the curve's grid."""
    if np.any(curve.chi == 0):
        raise ValueError("cannot rescale a curve with zero chi values")
    x = curve.L**nu * (curve.grid - peak.t_max)
    y = (peak.chi_max - curve.chi) / curve.chi
    return x, y


def _local_quadratic(x: np.ndarray, y: np.ndarray, frac: float) -> np.ndarray:
    """LOESS-style fit: weighted local quadratic evaluated at each x."""
    n = len(x)
    q = min(max(7, int(np.ceil(frac * n))), n)
    out = np.empty(n)
    for i in range(n):
        d = np.abs(x - x[i])
        idx = np.argpartition(d, q - 1)[:q]
        dx = x[idx] - x[i]
        w = (1 - (np.abs(dx) / (d[idx].max() + 1e-300)) ** 3) ** 3
        W = np.sqrt(np.maximum(w, 0))
        A = np.column_stack([np.ones(q), dx, dx**2]) * W[:, None]
        coef, *_ = np.linalg.lstsq(A, y[idx] * W, rcond=None)
        out[i] = coef[0]
    return out


def _collapse_points(curves, peaks, nu, window):
    xs, ys, ws = [], [], []
    for c in curves:
        p = peaks[c.L]
        mask = (np.abs(c.grid - p.t_max) <= window) & (c.chi > 0)
        x, y = rescale(c, p, nu)
        xs.append(x[mask])
        ys.append(y[mask])
    return np.concatenate(xs), np.concatenate(ys)


def _collapse_cost(curves, peaks, nu, window, frac) -> float:
    x, y = _collapse_points(curves, peaks, nu, window)
    if len(x) < 10:
        raise RefusalError("too few points inside the collapse window")
    master = _local_quadratic(x, y, frac)
    return float(np.mean((y - master) ** 2))


def _golden_section(f: Callable[[float], float], lo: float, hi: float, tol: float) -> tuple[float, float]:
    g = (np.sqrt(5) - 1) / 2
    a, b = lo, hi
    c, d = b - g * (b - a), a + g * (b - a)
    fc, fd = f(c), f(d)
    while abs(b - a) > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - g * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + g * (b - a)
            fd = f(d)
    xm = (a + b) / 2
    return xm, f(xm)


def collapse_fit(
    curves: Sequence[FsCurve],
    nu_bracket: tuple[float, float],
    window: float = 0.05,
    loess_frac: float = 0.25,
    nu_tol: float = 1e-4,
) -> CollapseFit:
    """Exponents from a per-size curve family.

    nu minimizes the pooled scatter around a local-quadratic master curve
    of the rescaled data; mu comes from the peak-height power law; alpha
    is their ratio; A and B are the constants of the scaling form
    chi = A / (L^-mu + B (t - t_max)^alpha) fitted at the optimum.
    """
    if len(curves) < 3:
        raise RefusalError("data collapse needs at least 3 system sizes")
    sizes = [c.L for c in curves]
    if len(set(sizes)) != len(sizes):
        raise RefusalError("duplicate system sizes in collapse input")
    peaks = {c.L: find_peak(c) for c in curves}

    cost = lambda nu: _collapse_cost(curves, peaks, nu, window, loess_frac)
    lo, hi = nu_bracket
    nu, cost_min = _golden_section(cost, lo, hi, nu_tol)
    span = hi - lo
    if min(nu - lo, hi - nu) < 0.01 * span:
        raise RefusalError(
            f"collapse cost not bracketed in [{lo}, {hi}]: "
            f"cost(lo)={cost(lo):.4e}, cost(hi)={cost(hi):.4e}; widen the bracket"
        )

    mu_fit = fit_power([(c.L, peaks[c.L].chi_max) for c in curves])
    mu = mu_fit.exponent
    alpha = mu / nu
    A = mu_fit.prefactor

    x, y = _collapse_points(curves, peaks, nu, window)
    xa = np.abs(x) ** alpha
    B = float((xa @ y) / (xa @ xa)) if np.any(xa) else 0.0

    # stderr of nu from the curvature of the cost near its minimum
    d = max(0.02 * span, 2 * nu_tol)
    cpp = (cost(nu + d) + cost(nu - d) - 2 * cost_min) / d**2
    npts = len(x)
    nu_stderr = float(np.sqrt(2 * cost_min / (npts * cpp))) if cpp > 0 else np.inf

    extras = {"window": window, "loess_frac": loess_frac, "nu_bracket": list(nu_bracket)}
    if len(curves) > 3:
        drop = sorted(curves, key=lambda c: c.L)[1:]
        sub = fit_power([(c.L, peaks[c.L].chi_max) for c in drop])
        extras["mu_excluding_smallest"] = sub.exponent
        extras["mu_excluding_smallest_stderr"] = sub.exponent_stderr
    return CollapseFit(mu, nu, alpha, A, B, cost_min, peaks, nu_stderr, mu_fit, extras)


def fit_kt_form(curves: Sequence[FsCurve], half_width: float = 0.05) -> KtFormFit:
    """Joint fit of chi ~ a + b L + c L^(-1/2) (t - t_max)^2 near the peaks."""
    rows, ys = [], []
    for c in curves:
        p = find_peak(c)
        mask = np.abs(c.grid - p.t_max) <= half_width
        dt = c.grid[mask] - p.t_max
        rows.append(np.column_stack([np.ones(mask.sum()), np.full(mask.sum(), float(c.L)), c.L**-0.5 * dt**2]))
        ys.append(c.chi[mask])
    X = np.vstack(rows)
    y = np.concatenate(ys)
    if len(y) < 6 or len(curves) < 2:
        raise RefusalError(
            f"too few points for the quadratic form ({len(y)} in half-width {half_width}); widen the window"
        )
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ coef
    dof = max(len(y) - 3, 1)
    sigma2 = float(resid @ resid) / dof
    cov = sigma2 * np.linalg.inv(X.T @ X)
    err = tuple(float(s) for s in np.sqrt(np.diag(cov)))
    return KtFormFit(
        float(coef[0]), float(coef[1]), float(coef[2]), err, half_width, len(y),
        float(np.sqrt(np.mean(resid**2))),
    )


def _tc_power_fit(points: Sequence[tuple[int, float]], power: float, law: str) -> TcEstimate:
    if len(points) < 3:
        raise RefusalError("critical-point extrapolation needs at least 3 sizes")
    L = np.array([p[0] for p in points], dtype=float)
    t = np.array([p[1] for p in points], dtype=float)
    X = np.column_stack([np.ones(len(L)), L**power])
    coef, *_ = np.linalg.lstsq(X, t, rcond=None)
    resid = t - X @ coef
    rms = float(np.sqrt(np.mean(resid**2)))
    dof = max(len(t) - 2, 1)
    cov = (float(resid @ resid) / dof) * np.linalg.inv(X.T @ X)
    return TcEstimate(
        float(coef[0]), law, rms, [(int(l), float(x)) for l, x in points],
        float(np.sqrt(cov[0, 0])),
    )


def extrapolate_tc_landau(points: Sequence[tuple[int, float]], power: float = -2.0) -> TcEstimate:
    """t_c from t_max(L) = t_c + const * L^power (default the L^-2 drift)."""
    return _tc_power_fit(points, power, "landau_L2" if power == -2.0 else f"landau_L{power:g}")


def steepest_descent_point(curve: FsCurve) -> float:
    """Location of the minimum of d chi / d t, parabola-refined."""
    if len(curve.grid) < 5:
        raise RefusalError("need at least 5 points for a derivative minimum")
    d = np.gradient(curve.chi, curve.grid)
    i = int(np.argmin(d))
    if i == 0 or i == len(d) - 1:
        raise RefusalError(
            f"derivative minimum at the grid boundary (t = {curve.grid[i]:.6g}); extend the grid"
        )
    a, b, _ = np.polyfit(curve.grid[i - 1 : i + 2], d[i - 1 : i + 2], 2)
    if a <= 0:
        return float(curve.grid[i])
    return float(-b / (2 * a))


def extrapolate_tc_kt(curves: Sequence[FsCurve]) -> TcEstimate:
    """t_c from the 1/L drift of the steepest-descent point of each curve."""
    pts = [(c.L, steepest_descent_point(c)) for c in curves]
    est = _tc_power_fit(pts, -1.0, "kt_one_over_L")
    t_lo = min(float(c.grid[0]) for c in curves)
    t_hi = max(float(c.grid[-1]) for c in curves)
    if not t_lo <= est.tc <= t_hi:
        raise RefusalError(
            f"extrapolated t_c = {est.tc:.4g} outside the swept range [{t_lo:.4g}, {t_hi:.4g}]"
        )
    return est
