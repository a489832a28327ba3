"""Sweep configuration, resumable execution, and curve persistence.

A sweep evaluates FS curves over a driving-parameter grid for every
(L, coupling) combination.  Two-tier grids are the default: a coarse
scan locates the peak, then a fine window around it (and optionally
around the steepest descent) is filled in.  Fine-tier points share
ground states: with lattice spacing h, the point at x needs states at
x +- 2h and x +- h, all lattice sites, so one solve per lattice site
serves four neighbouring points.  Ground states are warm-started along
the grid, which is why points are evaluated in ascending order.

Completed points live in a cache directory (one JSON per point, atomic
write-then-rename, key = hash of the physics-relevant fields) and are
skipped on resume.  Curve files are CSV with a '#'-prefixed key=value
header; all floats are serialized with full round-trip precision so a
read reproduces the curve bit-exactly.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
import time
from dataclasses import asdict, dataclass, field, replace
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from .basis import BoundaryCondition, select_bc
from .eigen import ground_state
from .errors import ConfigError, SolverError
from .fidelity import FsPoint, fs_finite_difference, fs_linear_response, fs_spectral_sum
from .models import ModelParams, build_structure, driving_tag_for, apply_driving
from .scaling import FsCurve

CACHE_ENV = "CRITX_CACHE"
DEFAULT_CACHE = "critx-cache"
SCHEMA = 1


@dataclass
class SweepConfig:
    model: str = "ahm"
    L: list[int] = field(default_factory=lambda: [6])
    # sector rule: filling (exact fraction string) with balanced species,
    # or explicit n_up/n_dn (single L only)
    filling: str | None = None
    n_up: int | None = None
    n_dn: int | None = None
    bc: str = "auto"
    U: list[float] = field(default_factory=lambda: [10.0])
    h: float = 0.0  # TFIM longitudinal field, fixed during a lambda sweep
    grid_start: float = 0.1
    grid_stop: float = 0.9
    grid_num: int = 41
    grid_points: list[float] | None = None  # explicit grid overrides start/stop/num
    refine: bool = True
    refine_spacing: float = 0.002
    refine_radius: float = 0.05
    refine_targets: list[str] = field(default_factory=lambda: ["peak"])
    method: str = "finite_difference"
    delta: float = 1e-3
    tol: float = 1e-10
    max_basis: int = 128
    seed: int = 0
    workers: int = 1
    outdir: str = "curves"
    cache_dir: str | None = None

    def validate(self) -> None:
        if self.model not in ("ahm", "tfim"):
            raise ConfigError(f"unknown model {self.model!r}")
        if self.method not in ("finite_difference", "linear_response", "spectral_sum"):
            raise ConfigError(f"unknown FS method {self.method!r}")
        if not self.L:
            raise ConfigError("no system sizes given")
        if self.model == "ahm":
            for L in self.L:
                self.sector_for(L)
        bad = set(self.refine_targets) - {"peak", "drop"}
        if bad:
            raise ConfigError(f"unknown refine targets {sorted(bad)}")
        if self.delta <= 0 or self.tol <= 0:
            raise ConfigError("delta and tol must be positive")

    def sector_for(self, L: int) -> tuple[int, int, BoundaryCondition]:
        """(n_up, n_dn, bc) for one system size."""
        if self.n_up is not None or self.n_dn is not None:
            if self.n_up is None or self.n_dn is None or len(self.L) != 1:
                raise ConfigError("explicit n_up/n_dn need both fields and a single L")
            n_up, n_dn = self.n_up, self.n_dn
        elif self.filling is not None:
            frac = Fraction(self.filling)
            n_total = frac * L
            if n_total.denominator != 1:
                raise ConfigError(f"filling {self.filling} does not give integer N at L={L}")
            n_total = int(n_total)
            if n_total % 2:
                raise ConfigError(f"filling {self.filling} gives odd N={n_total} at L={L}")
            n_up = n_dn = n_total // 2
        else:
            raise ConfigError("AHM sweep needs a filling or explicit n_up/n_dn")
        if self.bc == "auto":
            bc = select_bc(n_up + n_dn)
        else:
            try:
                bc = BoundaryCondition(self.bc)
            except ValueError:
                raise ConfigError(f"unknown boundary condition {self.bc!r}") from None
        return n_up, n_dn, bc

    def coarse_grid(self) -> np.ndarray:
        if self.grid_points is not None:
            g = np.asarray(sorted(self.grid_points), dtype=float)
            if len(g) == 0:
                raise ConfigError("empty explicit grid")
            return g
        if self.grid_num < 2 or self.grid_stop <= self.grid_start:
            raise ConfigError("need grid_stop > grid_start and grid_num >= 2")
        return np.linspace(self.grid_start, self.grid_stop, self.grid_num)

    def resolved_cache_dir(self) -> Path:
        return Path(self.cache_dir or os.environ.get(CACHE_ENV) or DEFAULT_CACHE)


def load_config(path: str | None, overrides: dict) -> SweepConfig:
    """Config file (JSON) plus flag overrides; flags win."""
    data: dict = {}
    if path is not None:
        data = json.loads(Path(path).read_text())
    data.update({k: v for k, v in overrides.items() if v is not None})
    known = {f.name for f in SweepConfig.__dataclass_fields__.values()}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown config fields: {sorted(unknown)}")
    cfg = SweepConfig(**data)
    cfg.validate()
    return cfg


# ---------------------------------------------------------------------------
# point cache

def point_key(fields: dict) -> str:
    blob = json.dumps(fields, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def cache_path(cache_dir: Path, key: str) -> Path:
    return cache_dir / f"{key}.json"


def cache_load(cache_dir: Path, key: str) -> dict | None:
    p = cache_path(cache_dir, key)
    if not p.exists():
        return None
    try:
        return json.loads(p.read_text())
    except (json.JSONDecodeError, OSError):
        return None


def cache_store(cache_dir: Path, key: str, record: dict) -> None:
    cache_dir.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=cache_dir, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            json.dump(record, fh, sort_keys=True)
        os.replace(tmp, cache_path(cache_dir, key))
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def cache_entries(cache_dir: Path) -> list[dict]:
    if not cache_dir.is_dir():
        return []
    out = []
    for p in sorted(cache_dir.glob("*.json")):
        try:
            rec = json.loads(p.read_text())
            rec["_file"] = str(p)
            out.append(rec)
        except (json.JSONDecodeError, OSError):
            continue
    return out


# ---------------------------------------------------------------------------
# curve files

def _fmt(x) -> str:
    return repr(float(x))


def write_curve(path: Path, header: dict, points: list[FsPoint]) -> None:
    lines = ["# critx-curve v1"]
    for k, v in header.items():
        if isinstance(v, float):
            v = _fmt(v)
        elif not isinstance(v, str):
            v = json.dumps(v, sort_keys=True)
        lines.append(f"# {k}={v}")
    lines.append("t,chi,method,delta_used,residual")
    for pt in points:
        resid = pt.residuals.get("max_eig_residual", pt.residuals.get("cg_relative_residual", 0.0))
        lines.append(
            f"{_fmt(pt.x)},{_fmt(pt.chi)},{pt.method},{_fmt(pt.delta_used or 0.0)},{_fmt(resid)}"
        )
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text("\n".join(lines) + "\n")
    os.replace(tmp, path)


def read_curve(path: Path | str) -> FsCurve:
    path = Path(path)
    header: dict = {}
    rows: list[tuple] = []
    with path.open() as fh:
        lines = fh.read().splitlines()
    body = False
    for line in lines:
        if line.startswith("#"):
            text = line[1:].strip()
            if "=" in text:
                k, v = text.split("=", 1)
                header[k.strip()] = v.strip()
            continue
        if not body:
            body = True  # column header line
            continue
        if not line.strip():
            continue
        t, chi, method, delta_used, residual = line.split(",")
        rows.append((float(t), float(chi), method, float(delta_used), float(residual)))
    if not rows:
        raise ConfigError(f"curve file {path} has no data rows")
    rows.sort(key=lambda r: r[0])
    grid = np.array([r[0] for r in rows])
    chi = np.array([r[1] for r in rows])
    params = {"kind": header.get("model", "?"), "L": int(header["L"])}
    for k in ("n_up", "n_dn"):
        if k in header:
            params[k] = int(header[k])
    for k in ("U", "h"):
        if k in header:
            params[k] = float(header[k])
    if "bc" in header:
        params["bc"] = header["bc"]
    meta = dict(header)
    meta["path"] = str(path)
    meta["delta_used"] = [r[3] for r in rows]
    meta["residual"] = [r[4] for r in rows]
    meta["row_method"] = [r[2] for r in rows]
    return FsCurve(params, grid, chi, header.get("method", rows[0][2]), meta)


def file_sha256(path: Path | str) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


# ---------------------------------------------------------------------------
# evaluation

class _CurveJob:
    """Evaluation of one (L, coupling) curve with chained warm starts."""

    def __init__(self, cfg: SweepConfig, L: int, coupling: float):
        self.cfg = cfg
        self.L = L
        self.coupling = coupling  # U for AHM, ignored (lambda swept) for TFIM
        if cfg.model == "ahm":
            n_up, n_dn, bc = cfg.sector_for(L)
            self.params = ModelParams(
                "ahm", L, t=1.0, U=coupling, n_up=n_up, n_dn=n_dn, bc=bc
            )
        else:
            self.params = ModelParams("tfim", L, lam=1.0, h=cfg.h)
        self.structure = None
        self._states: dict = {}
        self._last_psi = None
        self.solves = 0

    def _ensure_structure(self):
        if self.structure is None:
            self.structure = build_structure(self.params)

    def apply_at(self, x: float):
        if self.cfg.model == "ahm":
            return lambda v: self.structure.apply_h(x, self.coupling, v)
        return lambda v: self.structure.apply_h(x, self.cfg.h, v)

    def solve(self, x: float):
        key = round(x, 12)
        hit = self._states.get(key)
        if hit is not None:
            return hit
        self._ensure_structure()
        r = ground_state(
            self.apply_at(x),
            self.structure.dim,
            tol=self.cfg.tol,
            seed=self.cfg.seed,
            v0=self._last_psi,
            max_basis=self.cfg.max_basis,
        )
        self._last_psi = r.psi0
        self._states[key] = r
        self.solves += 1
        if len(self._states) > 8:  # keep the memo窗口 small
            for old in sorted(self._states)[: len(self._states) - 8]:
                del self._states[old]
        return r

    def key_fields(self, x: float, delta: float) -> dict:
        f = {
            "schema": SCHEMA,
            "model": self.cfg.model,
            "L": self.L,
            "x": repr(float(x)),
            "method": self.cfg.method,
            "tol": repr(self.cfg.tol),
            "seed": self.cfg.seed,
        }
        if self.cfg.model == "ahm":
            f.update(
                n_up=self.params.n_up,
                n_dn=self.params.n_dn,
                bc=self.params.bc.value,
                U=repr(float(self.coupling)),
            )
        else:
            f["h"] = repr(float(self.cfg.h))
        if self.cfg.method == "finite_difference":
            f["delta"] = repr(float(delta))
        return f

    def evaluate(self, x: float, delta: float) -> FsPoint:
        method = self.cfg.method
        if method == "finite_difference":
            return fs_finite_difference(self.solve, x, delta=delta)
        self._ensure_structure()
        tag = driving_tag_for(self.params)
        drive = lambda v: apply_driving(tag, self.structure, v)
        if method == "linear_response":
            g = self.solve(x)
            return fs_linear_response(self.apply_at(x), g, drive, tol=self.cfg.tol, x=x)
        from .eigen import dense_spectrum

        if self.structure.dim > 4096:
            raise SolverError(
                f"spectral_sum needs dim <= 4096, got {self.structure.dim} at L={self.L}"
            )
        energies, vectors = dense_spectrum(self.apply_at(x), self.structure.dim)
        pt = fs_spectral_sum(energies, vectors, drive, x=x)
        return pt


def _fine_points(center: float, cfg: SweepConfig, lo: float, hi: float) -> list[tuple[float, float]]:
    """(x, delta) pairs on a shared-state lattice around a feature."""
    h = cfg.refine_spacing
    r = cfg.refine_radius
    k_lo = int(np.floor((max(lo, center - r) - center) / h))
    k_hi = int(np.ceil((min(hi, center + r) - center) / h))
    pts = []
    for k in range(k_lo + 2, k_hi - 1):
        pts.append((center + k * h, 4 * h))
    return pts


def run_curve(cfg: SweepConfig, L: int, coupling: float, progress=None) -> tuple[list[FsPoint], list[dict]]:
    """All FS points of one curve, cache-aware.  Returns (points, failures)."""
    job = _CurveJob(cfg, L, coupling)
    cache_dir = cfg.resolved_cache_dir()
    coarse = cfg.coarse_grid()
    failures: list[dict] = []
    points: dict[float, FsPoint] = {}

    def eval_batch(batch: list[tuple[float, float]]):
        for x, delta in sorted(batch):
            x = float(x)
            if x in points:
                continue
            fields = job.key_fields(x, delta)
            key = point_key(fields)
            rec = cache_load(cache_dir, key)
            if rec is not None:
                points[x] = FsPoint(
                    rec["x"], rec["chi"], rec["method"], rec.get("delta_used"), rec.get("residuals", {})
                )
                continue
            try:
                pt = job.evaluate(x, delta)
            except SolverError as err:
                failures.append({"x": x, "error": str(err)})
                continue
            points[x] = pt
            cache_store(
                cache_dir,
                key,
                {
                    "fields": fields,
                    "x": pt.x,
                    "chi": pt.chi,
                    "method": pt.method,
                    "delta_used": pt.delta_used,
                    "residuals": pt.residuals,
                },
            )
            if progress:
                progress(L, coupling, x, pt.chi)

    eval_batch([(x, cfg.delta) for x in coarse])

    if cfg.refine and len(points) >= 5:
        xs = np.array(sorted(points))
        chis = np.array([points[x].chi for x in xs])
        lo, hi = float(coarse[0]), float(coarse[-1])
        centers = []
        i_max = int(np.argmax(chis))
        if 0 < i_max < len(xs) - 1 and "peak" in cfg.refine_targets:
            centers.append(float(xs[i_max]))
        if "drop" in cfg.refine_targets:
            grad = np.gradient(chis, xs)
            i_drop = int(np.argmin(grad))
            if 0 < i_drop < len(xs) - 1:
                centers.append(float(xs[i_drop]))
        batch = []
        for c in centers:
            batch.extend(_fine_points(c, cfg, lo, hi))
        eval_batch(batch)

    ordered = [points[x] for x in sorted(points)]
    return ordered, failures


def curve_header(cfg: SweepConfig, job_params: ModelParams, coupling: float, failures) -> dict:
    h: dict = {"model": cfg.model, "L": job_params.L}
    if cfg.model == "ahm":
        h.update(
            n_up=job_params.n_up,
            n_dn=job_params.n_dn,
            bc=job_params.bc.value,
            U=float(coupling),
            driving="t",
        )
    else:
        h.update(h=float(cfg.h), driving="lambda")
    h.update(
        method=cfg.method,
        delta=float(cfg.delta),
        tol=float(cfg.tol),
        seed=cfg.seed,
        grid_policy={
            "start": cfg.grid_start,
            "stop": cfg.grid_stop,
            "num": cfg.grid_num,
            "points": cfg.grid_points,
            "refine": cfg.refine,
            "refine_spacing": cfg.refine_spacing,
            "refine_radius": cfg.refine_radius,
            "refine_targets": cfg.refine_targets,
        },
        code_version=__version__,
    )
    prov_fields = {k: v for k, v in h.items()}
    h["provenance"] = point_key(prov_fields)
    h["created"] = time.strftime("%Y-%m-%dT%H:%M:%S")
    if failures:
        h["failed_points"] = failures
    return h


def curve_filename(cfg: SweepConfig, L: int, coupling: float) -> str:
    if cfg.model == "ahm":
        u = f"{coupling:g}".replace(".", "p")
        return f"ahm_L{L}_U{u}.csv"
    return f"tfim_L{L}.csv"


def run_sweep(cfg: SweepConfig, progress=None) -> tuple[list[Path], list[dict]]:
    """Run every (L, coupling) combination; returns (files, failures)."""
    cfg.validate()
    combos = [(L, U) for L in cfg.L for U in (cfg.U if cfg.model == "ahm" else [0.0])]
    outdir = Path(cfg.outdir)
    files: list[Path] = []
    all_failures: list[dict] = []

    def one(combo):
        L, coupling = combo
        pts, failures = run_curve(cfg, L, coupling, progress=progress)
        job = _CurveJob(cfg, L, coupling)
        header = curve_header(cfg, job.params, coupling, failures)
        path = outdir / curve_filename(cfg, L, coupling)
        write_curve(path, header, pts)
        return path, failures

    if cfg.workers > 1 and len(combos) > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            for path, failures in pool.map(one, combos):
                files.append(path)
                all_failures.extend(failures)
    else:
        for combo in combos:
            path, failures = one(combo)
            files.append(path)
            all_failures.extend(failures)
    return files, all_failures
