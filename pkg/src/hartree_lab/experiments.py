"""Experiment orchestration: configs, initial data, ensembles, persistence.

Every sample ``i`` draws its randomness from ``derive_seed(master_seed, i)``
and writes only its own files, so results do not depend on the worker count.
The summary is assembled in index order by a single writer.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import functionals as fn
from .dynamics import (BlowUpError, HartreeKernel, PerturbedState, SolverConfig, evolve, evolve_perturbed,
                       split_high_low)
from .inequalities import EnsembleSpec, reports_to_csv, run_check
from .randomization import RandomizationParams, build_cube_system, randomize, sample_coefficients
from .seeding import derive_seed
from .snapshot import atomic_write, store_field
from .spectral import Field, free_propagate, is_dyadic, make_grid, norm

KINDS = ("single", "ensemble", "nzero-sweep", "tail-study", "inequality-suite", "morawetz-audit")
WORKERS_ENV = "HARTREE_WORKERS"

DIAG_COLUMNS = ["t", "mass", "kinetic", "potential", "E_w", "M_w", "M(t)", *fn.TERM_NAMES,
                "mass_integrand", "energy_integrand", "scattering_increment"]


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    kind: str = "single"
    # grid and solver
    d: int = 5
    n: int = 16
    L: float = 10.0
    dt: float = 1e-3
    T: float = 0.2
    record_every: int = 50
    diag_every: int = 5
    gamma: float = 4.0
    mu: int = 1
    kernel_mode: str = "sampled-kernel"
    # randomization and split
    s: float = -1.0
    a: int = 10
    N0: float = 2.0
    randomize: bool = True
    # initial-data recipe: modulated Gaussian scaled to a target H^s norm
    profile_width: float = 0.3  # narrow: rough data with most of its H^s mass above N0 = 2
    profile_momentum: list = field(default_factory=list)
    profile_chirp: float = 0.0
    amplitude: float = 1.0
    # ensemble
    master_seed: int = 0
    K: int = 1
    N0_values: list = field(default_factory=lambda: [2.0, 4.0, 8.0])
    A: float | None = None
    M_levels: list = field(default_factory=lambda: [1.0, 2.0, 4.0, 8.0])
    # tails
    tail_samples: int = 500
    lambda_grid: list | None = None
    norm_samples: int = 21
    # inequality suite
    checks: list = field(default_factory=lambda: ["bernstein", "orthogonality", "box_lq_lp",
                                                  "gagliardo_nirenberg", "hardy", "hls"])
    check_count: int = 100
    check_d: int = 3
    check_n: int = 16
    check_L: float = 10.0
    # outputs
    save_snapshots: bool = False
    morawetz: bool = False

    def __post_init__(self):
        self.validate()

    # -- validation ----------------------------------------------------------
    def validate(self):
        if self.kind not in KINDS:
            raise ConfigError(f"kind: unknown experiment kind {self.kind!r}; expected one of {KINDS}")
        try:
            make_grid(self.d, self.n, self.L)
        except ValueError as exc:
            raise ConfigError(f"grid (d, n, L): {exc}") from exc
        if self.mu != 1:
            raise ConfigError("mu: only the defocusing sign +1 is supported")
        if self.K < 1:
            raise ConfigError("K: ensemble size must be >= 1")
        if not is_dyadic(self.N0):
            raise ConfigError(f"N0: must be dyadic, got {self.N0}")
        for N in self.N0_values:
            if not is_dyadic(N):
                raise ConfigError(f"N0_values: {N} is not dyadic")
        try:
            RandomizationParams(self.s, self.a)
        except ValueError as exc:
            raise ConfigError(f"a: {exc}") from exc
        try:
            self.solver()
        except ValueError as exc:
            raise ConfigError(f"solver (dt, T, gamma, strides): {exc}") from exc
        if self.profile_momentum and len(self.profile_momentum) != self.d:
            raise ConfigError("profile_momentum: needs one entry per dimension")
        if self.profile_width <= 0 or self.amplitude < 0:
            raise ConfigError("profile_width must be positive and amplitude nonnegative")
        if self.norm_samples < 2:
            raise ConfigError("norm_samples: need at least two time samples")
        if self.kind == "tail-study" and self.tail_samples < 100:
            raise ConfigError("tail_samples: tail fits need at least 100 samples")
        if list(self.M_levels) != sorted(self.M_levels):
            raise ConfigError("M_levels: must be sorted")

    # -- (de)serialization -----------------------------------------------------
    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {unknown}")
        return cls(**data)

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        return cls.from_dict(json.loads(text))

    @classmethod
    def load(cls, path: str | os.PathLike) -> "ExperimentConfig":
        return cls.from_json(Path(path).read_text())

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def replace(self, **kw) -> "ExperimentConfig":
        return dataclasses.replace(self, **kw)

    # -- derived objects ---------------------------------------------------------
    @property
    def grid(self):
        return make_grid(self.d, self.n, self.L)

    def kernel(self) -> HartreeKernel:
        return HartreeKernel(self.grid, self.gamma, self.kernel_mode)

    def solver(self) -> SolverConfig:
        return SolverConfig(dt=self.dt, T=self.T, kernel=self.kernel(), record_every=self.record_every,
                            diag_every=self.diag_every, mu=self.mu)


# -- initial data --------------------------------------------------------------------


def base_profile(cfg: ExperimentConfig) -> Field:
    """Modulated Gaussian normalized to ``||u0||_{H^s} = amplitude``."""
    g = cfg.grid
    sigma = cfg.profile_width
    p = list(cfg.profile_momentum) or [0.0] * g.d

    def profile(*x):
        r2 = sum(c**2 for c in x)
        phase = sum(k * c for k, c in zip(p, x)) + cfg.profile_chirp * x[0] ** 2
        return np.exp(-r2 / (2 * sigma**2) + 1j * phase)

    f = Field.from_function(g, profile)
    h = norm(f, "Hs", cfg.s)
    return Field(g, f.values * (cfg.amplitude / h)) if h > 0 else f


def initial_data(cfg: ExperimentConfig, seed: int, cube_system=None) -> tuple[Field, Field]:
    """``(u0, u0_omega)``: the base profile and its randomization."""
    u0 = base_profile(cfg)
    if not cfg.randomize:
        return u0, u0
    cs = cube_system or build_cube_system(cfg.grid, RandomizationParams(cfg.s, cfg.a))
    return u0, randomize(u0, cs, sample_coefficients(seed, cs.count))


# -- statistics ------------------------------------------------------------------------


@dataclass
class TailReport:
    lambdas: list
    survival: list
    slope: float
    intercept: float
    r2: float
    used: list

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def default_lambda_grid(samples: np.ndarray, points: int = 12) -> np.ndarray:
    """Evenly spaced levels from the sample median to its 99th percentile."""
    lo, hi = np.quantile(samples, [0.5, 0.99])
    return np.linspace(lo, hi, points)


def tail_statistics(samples, lambda_grid=None, min_samples: int = 100) -> TailReport:
    """Weighted least squares of ``log P(X > lambda)`` against ``lambda^2``.

    Weights ``n P / (1 - P)`` are the inverse binomial variance of the log
    survival; levels with empirical survival 0 or 1 are left out of the fit.
    """
    x = np.asarray(samples, dtype=float)
    if x.size < min_samples:
        raise ValueError(f"tail fits need at least {min_samples} samples, got {x.size}")
    lam = default_lambda_grid(x) if lambda_grid is None else np.asarray(lambda_grid, dtype=float)
    surv = np.array([(x > v).mean() for v in lam])
    used = (surv > 0) & (surv < 1)
    slope = intercept = r2 = float("nan")
    if used.sum() >= 2:
        X = lam[used] ** 2
        Y = np.log(surv[used])
        W = x.size * surv[used] / (1 - surv[used])
        (slope, intercept) = np.polyfit(X, Y, 1, w=np.sqrt(W))
        fit = slope * X + intercept
        ybar = np.sum(W * Y) / W.sum()
        ss_tot = np.sum(W * (Y - ybar) ** 2)
        r2 = float(1 - np.sum(W * (Y - fit) ** 2) / ss_tot) if ss_tot > 0 else float("nan")
    return TailReport(lam.tolist(), surv.tolist(), float(slope), float(intercept), r2, used.tolist())


def rayleigh_samples(seed: int, count: int = 500) -> np.ndarray:
    """Moduli of complex Gaussians with ``E|g|^2 = 1``; survival ``exp(-lambda^2)``."""
    return np.abs(sample_coefficients(seed, count).values)


OMEGA_KEYS = ("hs_u0_omega", "y_norm_v", "w0_weighted", "l2_u0_omega", "l10_u0_omega", "hs_u0")


def omega_member(stats: dict, M: float) -> bool:
    ref = stats["hs_u0"]
    first = stats["hs_u0_omega"] + stats["y_norm_v"] < M * ref
    second = stats["w0_weighted"] + stats["l2_u0_omega"] + stats["l10_u0_omega"] < M * ref
    return bool(first and second)


def omega_event_count(records, M_levels) -> dict:
    """Fraction of samples inside the good event at each level ``M``."""
    stats = []
    for r in records:
        s = r.scalars if isinstance(r, RunRecord) else r
        missing = [k for k in OMEGA_KEYS if k not in s]
        if missing:
            raise ValueError(f"record lacks statistics {missing}")
        stats.append(s)
    if not stats:
        raise ValueError("no records")
    return {float(M): sum(omega_member(s, M) for s in stats) / len(stats) for M in M_levels}


def omega_statistics(cfg: ExperimentConfig, u0: Field, u0w: Field, N0: float) -> dict:
    """The norms entering the good event, with the Y-norm over the simulated window."""
    v0, w0 = split_high_low(u0w, N0)
    times = np.linspace(0.0, cfg.T, cfg.norm_samples) if cfg.T > 0 else np.array([0.0, 1e-12])
    y_v = fn.spacetime_norm(fn.free_trajectory(v0, times), fn.SpaceTimeNormSpec.y_norm(cfg.s, cfg.a))
    return {
        "hs_u0": norm(u0, "Hs", cfg.s),
        "hs_u0_omega": norm(u0w, "Hs", cfg.s),
        "y_norm_v": y_v,
        "w0_weighted": N0**cfg.s * norm(w0, "Lp", 2.0) + N0 ** (cfg.s - 1) * norm(w0, "Hs_dot", 1.0),
        "l2_u0_omega": norm(u0w, "Lp", 2.0),
        "l10_u0_omega": norm(u0w, "Lp", 10.0),
    }


# -- records ---------------------------------------------------------------------------


@dataclass
class RunRecord:
    index: int
    seed: int
    N0: float
    diagnostics_csv: str | None
    snapshots: list
    scalars: dict

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def _fmt(v) -> str:
    if v is None:
        return ""
    return repr(float(v))


def diagnostics_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(DIAG_COLUMNS)
    for r in rows:
        w.writerow([_fmt(r.get(c)) for c in DIAG_COLUMNS])
    return buf.getvalue()


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n"


# -- one perturbed sample --------------------------------------------------------------


def _run_sample(cfg: ExperimentConfig, index: int, N0: float, out_dir: str | None, tag: str = "") -> RunRecord:
    seed = derive_seed(cfg.master_seed, index)
    k = cfg.kernel()
    scfg = cfg.solver()
    u0, u0w = initial_data(cfg, seed)
    base_probe = fn.perturbed_probe(k, morawetz=cfg.morawetz)
    prev = {}

    def probe(st: PerturbedState) -> dict:
        row = base_probe(st)
        u = st.u
        kin, pot, _ = fn.energy(u, k)
        row.update({"t": st.t, "mass": fn.mass(u), "kinetic": kin, "potential": pot})
        prof = free_propagate(u.to_frequency(), -st.t)
        row["scattering_increment"] = None
        if "p" in prev:
            row["scattering_increment"] = norm(Field(u.grid, prof.data - prev["p"].data, "frequency"), "Hs", 1.0)
        prev["p"] = prof
        return row

    try:
        traj = evolve_perturbed(u0w, N0, scfg, probe=probe, keep_snapshots=cfg.save_snapshots)
    except BlowUpError as exc:
        raise BlowUpError(f"sample {index}: {exc}", exc.step, exc.t) from exc
    rows = [{key: vals[i] for key, vals in traj.diagnostics.items()} for i in range(len(traj.times))]
    drift = fn.almost_conservation_bounds(traj)
    M_w, E_w = drift.M_w, drift.E_w
    scalars = {
        "max_mass_drift_rel": float(np.max(np.abs(np.array([r["mass"] for r in rows]) / rows[0]["mass"] - 1))),
        "max_M_w_drift": float(np.max(np.abs(M_w - M_w[0]))),
        "max_E_w_drift": float(np.max(np.abs(E_w - E_w[0]))),
        "sup_M_w": float(M_w.max()),
        "max_mass_ratio": float(np.nanmax(drift.mass_ratio)) if np.any(np.isfinite(drift.mass_ratio)) else None,
        "max_energy_ratio": float(np.nanmax(drift.energy_ratio)) if np.any(np.isfinite(drift.energy_ratio)) else None,
    }
    if cfg.A is not None:
        scalars["mass_bound_2A_N0^-2s"] = 2 * cfg.A * N0 ** (-2 * cfg.s)
        scalars["mass_bound_holds"] = bool(M_w.max() <= scalars["mass_bound_2A_N0^-2s"])
    scalars.update(omega_statistics(cfg, u0, u0w, N0))
    csv_rel = None
    snaps = []
    if out_dir is not None:
        base = Path(out_dir)
        csv_rel = f"samples/{tag}sample_{index:04d}.csv"
        atomic_write(base / csv_rel, diagnostics_csv(rows))
        for j, (t, st) in enumerate(zip(traj.snapshot_times, traj.snapshots)):
            rel = f"snapshots/{tag}sample_{index:04d}_{j:04d}.hrt5"
            store_field(base / rel, st.u, t)
            snaps.append(rel)
    return RunRecord(index, seed, float(N0), csv_rel, snaps, scalars)


def _sample_job(args):
    cfg_dict, index, N0, out_dir, tag = args
    return _run_sample(ExperimentConfig.from_dict(cfg_dict), index, N0, out_dir, tag)


def worker_count(default: int = 1) -> int:
    raw = os.environ.get(WORKERS_ENV)
    if not raw:
        return default
    try:
        n = int(raw)
    except ValueError as exc:
        raise ConfigError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from exc
    return max(1, n)


def _map_ordered(fn_, jobs: list, workers: int) -> list:
    if workers <= 1 or len(jobs) <= 1:
        return [fn_(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn_, jobs))  # map preserves submission order


# -- experiment kinds ------------------------------------------------------------------


def _aggregate(records: list[RunRecord], keys) -> dict:
    out = {}
    for key in keys:
        vals = [r.scalars[key] for r in records if r.scalars.get(key) is not None]
        if vals:
            out[key] = {"mean": float(np.mean(vals)), "max": float(np.max(vals)), "min": float(np.min(vals))}
    return out


def _ensemble(cfg: ExperimentConfig, out_dir, workers: int) -> dict:
    K = 1 if cfg.kind == "single" else cfg.K
    jobs = [(cfg.to_dict(), i, cfg.N0, out_dir, "") for i in range(K)]
    records = _map_ordered(_sample_job, jobs, workers)
    agg = _aggregate(records, ["max_M_w_drift", "max_E_w_drift", "max_mass_drift_rel", "y_norm_v",
                               "max_mass_ratio"])
    agg["omega_fractions"] = {str(k): v for k, v in omega_event_count(records, cfg.M_levels).items()}
    return {"samples": [r.to_dict() for r in records], "aggregate": agg}


def _nzero_sweep(cfg: ExperimentConfig, out_dir, workers: int) -> dict:
    jobs = [(cfg.to_dict(), i, float(N0), out_dir, f"N0_{int(N0)}_")
            for N0 in cfg.N0_values for i in range(cfg.K)]
    records = _map_ordered(_sample_job, jobs, workers)
    per = {}
    for N0 in cfg.N0_values:
        rs = [r for r in records if r.N0 == float(N0)]
        per[str(float(N0))] = {
            "mean_max_M_w_drift": float(np.mean([r.scalars["max_M_w_drift"] for r in rs])),
            "mean_max_E_w_drift": float(np.mean([r.scalars["max_E_w_drift"] for r in rs])),
            "max_mass_ratio": float(np.nanmax([r.scalars["max_mass_ratio"] or np.nan for r in rs])),
        }
    return {"samples": [r.to_dict() for r in records], "aggregate": {"by_N0": per}}


def y_norm_sample(cfg: ExperimentConfig, index: int, cube_system=None) -> float:
    seed = derive_seed(cfg.master_seed, index)
    _, u0w = initial_data(cfg, seed, cube_system)
    times = np.linspace(0.0, cfg.T, cfg.norm_samples)
    return fn.spacetime_norm(fn.free_trajectory(u0w, times), fn.SpaceTimeNormSpec.y_norm(cfg.s, cfg.a))


def _tail_job(args):
    cfg_dict, lo, hi = args
    cfg = ExperimentConfig.from_dict(cfg_dict)
    cs = build_cube_system(cfg.grid, RandomizationParams(cfg.s, cfg.a))
    return [y_norm_sample(cfg, i, cs) for i in range(lo, hi)]


def _tail_study(cfg: ExperimentConfig, out_dir, workers: int) -> dict:
    n = cfg.tail_samples
    chunk = max(1, math.ceil(n / max(workers, 1)))
    jobs = [(cfg.to_dict(), lo, min(n, lo + chunk)) for lo in range(0, n, chunk)]
    samples = [x for part in _map_ordered(_tail_job, jobs, workers) for x in part]
    ref = norm(base_profile(cfg), "Hs", cfg.s)
    scaled = np.asarray(samples) / ref
    report = tail_statistics(scaled, cfg.lambda_grid)
    calib = tail_statistics(rayleigh_samples(derive_seed(cfg.master_seed, 2**32), 500),
                            np.linspace(0.2, 2.0, 10))
    if out_dir is not None:
        atomic_write(Path(out_dir) / "tail_samples.csv",
                     "index,y_norm\n" + "".join(f"{i},{v!r}\n" for i, v in enumerate(samples)))
    return {"samples_file": "tail_samples.csv" if out_dir is not None else None,
            "aggregate": {"y_norm": report.to_dict(), "rayleigh": calib.to_dict(),
                          "hs_u0": ref, "mean_y_norm": float(np.mean(samples))}}


def _inequality_suite(cfg: ExperimentConfig, out_dir, workers: int) -> dict:
    reports = []
    for name in cfg.checks:
        cls = "localized" if name == "hardy" else "band-limited"
        d = cfg.check_d
        if name in ("lieb_loss", "gn_slice") and d < 4:
            d = 5
        if name == "lieb_loss":
            cls = "localized"
        spec = EnsembleSpec(d, cfg.check_n, cfg.check_L, cls, cfg.check_count,
                            derive_seed(cfg.master_seed, len(reports)))
        reports.append(run_check(name, spec))
    if out_dir is not None:
        for r in reports:
            atomic_write(Path(out_dir) / f"checks/{r.name}.json", r.to_json(indent=2, sort_keys=True) + "\n")
        atomic_write(Path(out_dir) / "checks/summary.csv", reports_to_csv(reports))
    return {"aggregate": {"checks": [r.row() for r in reports]}}


def morawetz_audit(cfg: ExperimentConfig, zero_high: bool = False) -> dict:
    """Identity residuals and sign facts along a perturbed run.

    With ``zero_high`` the split threshold is raised above every lattice
    frequency, so the high part and hence the error terms vanish exactly.
    """
    k = cfg.kernel()
    scfg = cfg.solver()
    seed = derive_seed(cfg.master_seed, 0)
    _, u0 = initial_data(cfg, seed)
    N0 = cfg.N0
    if zero_high:
        top = float(u0.grid.abs_xi.max())
        N0 = 2.0 ** math.ceil(math.log2(2 * top) + 1e-12)
    out: list = []

    def probe(st):
        out.append(fn.morawetz_terms(st, k))
        return {}

    evolve_perturbed(u0, N0, scfg, probe=probe, keep_snapshots=False)
    fn.attach_fd_derivative(out)
    rows = []
    for i, b in enumerate(out):
        interior = 0 < i < len(out) - 1
        rows.append({
            "t": b.t, "M(t)": b.action, **b.terms, "exact_nonlinear": b.exact_nonlinear,
            "dM_dt_fd": b.dM_dt_fd, "scale": b.scale, "interior": interior,
            "residual_stated": abs(b.dM_dt_fd - b.total) / b.scale,
            "residual_corrected": abs(b.dM_dt_fd - b.corrected_total) / b.scale,
            "sign_Md1": b.terms["C-Md1"] / b.scale,
            "sign_Ma1_plus_Mc1": (b.terms["C-Ma1"] + b.terms["C-Mc1"]) / b.scale,
            "error_terms_max": max(abs(b.terms[t]) for t in ("C-Me1", "C-Mf1", "C-Mg1")),
        })
    inner = [r for r in rows if r["interior"]]
    return {
        "rows": rows,
        "max_residual_stated": max(r["residual_stated"] for r in inner),
        "max_residual_corrected": max(r["residual_corrected"] for r in inner),
        "min_sign_Md1": min(r["sign_Md1"] for r in rows),
        "min_sign_Ma1_plus_Mc1": min(r["sign_Ma1_plus_Mc1"] for r in rows),
        "max_error_terms": max(r["error_terms_max"] for r in rows),
    }


AUDIT_DEFAULTS = dict(kind="morawetz-audit", d=5, n=12, L=14.0, dt=1e-3, T=0.2, diag_every=5,
                      record_every=200, randomize=False, s=0.0, a=6, N0=2.0, profile_width=1.5,
                      profile_momentum=[0.5, 0.3, 0.0, 0.0, 0.0], profile_chirp=0.1,
                      amplitude=3.5)


def audit_config(**kw) -> ExperimentConfig:
    """Default audit: a resolved, localized, chirped Gaussian of L^2 norm ``amplitude``."""
    opts = dict(AUDIT_DEFAULTS)
    opts.update(kw)
    return ExperimentConfig(**opts)


def _audit(cfg: ExperimentConfig, out_dir, workers: int) -> dict:
    main = morawetz_audit(cfg)
    free = morawetz_audit(cfg, zero_high=True)
    if out_dir is not None:
        cols = list(main["rows"][0])
        for name, res in (("morawetz_audit.csv", main), ("morawetz_audit_v0.csv", free)):
            buf = io.StringIO()
            w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
            w.writeheader()
            w.writerows(res["rows"])
            atomic_write(Path(out_dir) / name, buf.getvalue())
    summary = {k: v for k, v in main.items() if k != "rows"}
    summary["v_zero"] = {k: v for k, v in free.items() if k != "rows"}
    return {"aggregate": summary}


@dataclass(frozen=True)
class ScatteringRun:
    """Small-data full-flow run from a centred Gaussian scaled to ``||u0||_{H^1} = h1_norm``."""

    d: int = 3
    n: int = 64
    L: float = 80.0
    gamma: float = 2.0
    sigma: float = 2.0
    h1_norm: float = 0.05
    dt: float = 0.05
    T: float = 20.0
    record_every: int = 20

    @classmethod
    def load(cls, path) -> "ScatteringRun":
        return cls(**json.loads(Path(path).read_text()))


def scattering_increments(run: ScatteringRun, linear: bool = False) -> tuple[np.ndarray, np.ndarray]:
    """``(times, increments)`` of the interaction-picture profile; ``linear`` uses the free flow."""
    g = make_grid(run.d, run.n, run.L)
    u0 = Field.from_function(g, lambda *x: np.exp(-sum(c**2 for c in x) / (2 * run.sigma**2)))
    u0 = Field(g, u0.values * (run.h1_norm / norm(u0, "Hs", 1.0)))
    if linear:
        nsteps = int(math.ceil(run.T / run.dt - 1e-9))
        times = np.arange(0, nsteps + 1, run.record_every) * (run.T / nsteps)
        traj = fn.free_trajectory(u0, times)
    else:
        scfg = SolverConfig(dt=run.dt, T=run.T, kernel=HartreeKernel(g, run.gamma),
                            record_every=run.record_every, diag_every=10**9)
        traj = evolve(u0, scfg, probe=lambda f: {})
    return np.asarray(traj.snapshot_times[1:]), fn.scattering_diagnostic(traj)


RUNNERS = {
    "single": _ensemble,
    "ensemble": _ensemble,
    "nzero-sweep": _nzero_sweep,
    "tail-study": _tail_study,
    "inequality-suite": _inequality_suite,
    "morawetz-audit": _audit,
}


def run_experiment(cfg: ExperimentConfig, out_dir: str | os.PathLike | None = None,
                   workers: int | None = None) -> dict:
    """Run ``cfg`` and write ``summary.json`` (plus per-sample files) into ``out_dir``."""
    cfg.validate()
    workers = worker_count() if workers is None else workers
    out = str(out_dir) if out_dir is not None else None
    if out is not None:
        Path(out).mkdir(parents=True, exist_ok=True)
        atomic_write(Path(out) / "config.json", _dump(cfg.to_dict()))
    body = RUNNERS[cfg.kind](cfg, out, workers)
    summary = {"config": cfg.to_dict(), "kind": cfg.kind, **body}
    if out is not None:
        atomic_write(Path(out) / "summary.json", _dump(summary))
    return summary


def report(run_dirs: list[str | os.PathLike]) -> tuple[str, dict]:
    """Merge ``summary.json`` files into one CSV of per-sample scalars and a JSON index."""
    rows = []
    index = {}
    for d in run_dirs:
        path = Path(d) / "summary.json"
        summary = json.loads(path.read_text())
        index[str(d)] = {"kind": summary["kind"], "aggregate": summary.get("aggregate")}
        for s in summary.get("samples", []):
            rows.append({"run": str(d), "index": s["index"], "seed": s["seed"], "N0": s["N0"], **s["scalars"]})
    cols = ["run", "index", "seed", "N0"]
    for r in rows:
        for key in r:
            if key not in cols:
                cols.append(key)
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    return buf.getvalue(), index
