"""Numerical battery for the harmonic-analysis estimates used by the theory.

On a torus the constants differ from the Euclidean ones, so an inequality
check records ``LHS / RHS`` per sample, reports the empirical maximum, and
passes when every ratio is finite and the maximum grows by less than
``STABILITY_GROWTH`` when the same band-limited fields are resampled from
``n`` to ``2n`` points. Equivalence checks report constancy statistics.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from . import kernels
from .functionals import interaction_quantity
from .randomization import RandomizationParams, build_cube_system, randomize, sample_coefficients
from .seeding import derive_seed
from .spectral import Field, Grid, bessel, lp_norm, lp_symbol, make_grid, norm, resample, riesz

STABILITY_GROWTH = 0.20
FIELD_CLASSES = ("band-limited", "localized", "randomized")
CSV_COLUMNS = ["check", "dimension", "ensemble", "max_ratio", "stability_factor", "pass"]


@dataclass(frozen=True)
class EnsembleSpec:
    d: int
    n: int
    L: float
    field_class: str = "band-limited"
    count: int = 100
    seed: int = 0
    band: float | None = None  # sharp frequency cutoff; default a quarter of Nyquist
    s: float = 0.0
    a: int = 6

    def __post_init__(self):
        if self.field_class not in FIELD_CLASSES:
            raise ValueError(f"unknown field class {self.field_class!r}; expected one of {FIELD_CLASSES}")
        if self.count < 0:
            raise ValueError("count must be >= 0")

    @property
    def grid(self) -> Grid:
        return make_grid(self.d, self.n, self.L)

    def cutoff(self) -> float:
        return self.band if self.band is not None else self.grid.nyquist / 4


def _band_limited(grid: Grid, rng: np.random.Generator, cutoff: float) -> Field:
    c = rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)
    c = c * (grid.abs_xi <= cutoff)
    return Field(grid, c, "frequency").to_physical()


def _localized(grid: Grid, rng: np.random.Generator) -> Field:
    """Sum of one to three modulated Gaussians well inside the box."""
    x = grid.coords()
    out = np.zeros(grid.shape, dtype=complex)
    for _ in range(int(rng.integers(1, 4))):
        center = rng.uniform(-grid.L / 10, grid.L / 10, grid.d)
        width = rng.uniform(0.08, 0.12) * grid.L
        freq = rng.uniform(-1.0, 1.0, grid.d)
        r2 = sum((c - x0) ** 2 for c, x0 in zip(x, center))
        phase = sum(k * c for k, c in zip(freq, x))
        amp = rng.uniform(0.5, 1.0) * np.exp(2j * np.pi * rng.uniform())
        out = out + amp * np.exp(-r2 / (2 * width**2) + 1j * phase)
    return Field(grid, out)


def make_ensemble(spec: EnsembleSpec) -> list[Field]:
    """Deterministic list of unit-L^2 fields; sample ``i`` uses seed ``derive_seed(seed, i)``."""
    grid = spec.grid
    cs = None
    if spec.field_class == "randomized":
        cs = build_cube_system(grid, RandomizationParams(spec.s, spec.a))
        sigma = grid.L / 12
        base = Field.from_function(grid, lambda *x: np.exp(-sum(c**2 for c in x) / (2 * sigma**2)))
    out = []
    for i in range(spec.count):
        seed = derive_seed(spec.seed, i)
        rng = np.random.default_rng(seed)
        if spec.field_class == "band-limited":
            f = _band_limited(grid, rng, spec.cutoff())
        elif spec.field_class == "localized":
            f = _localized(grid, rng)
        else:
            f = randomize(base, cs, sample_coefficients(seed, cs.count))
        m = norm(f, "Lp", 2.0)
        out.append(Field(grid, f.values / m) if m > 0 else f)
    return out


@dataclass
class CheckReport:
    name: str
    d: int
    field_class: str
    ratios: list
    max_ratio: float
    passed: bool
    rule: str
    stability: dict | None = None
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), default=float, **kw)

    def row(self) -> dict:
        st = self.stability or {}
        return {
            "check": self.name,
            "dimension": self.d,
            "ensemble": self.field_class,
            "max_ratio": self.max_ratio,
            "stability_factor": st.get("factor", float("nan")),
            "pass": self.passed,
        }


def reports_to_csv(reports: list[CheckReport]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CSV_COLUMNS)
    w.writeheader()
    for r in reports:
        w.writerow(r.row())
    return buf.getvalue()


# -- ratio functions: each maps a field to a scalar ratio (or a dict with "ratio") --


def _mult(f: Field, sym) -> np.ndarray:
    return f.grid.ifft(f.grid.fft(f.values) * sym.on(f.grid))


def _bernstein(s: float, N: float):
    def ratio(f: Field) -> float:
        pn = Field(f.grid, f.grid.ifft(f.grid.fft(f.values) * lp_symbol(f.grid, "=", N)))
        den = N**s * norm(pn, "Lp", 2.0)
        return norm(Field(f.grid, _mult(pn, riesz(s))), "Lp", 2.0) / den
    return ratio


def _visan(f: Field) -> float:
    d = f.grid.d
    lhs = lp_norm(f.grid, _mult(f, riesz(-(d - 3) / 4)), 4.0) ** 2
    rho = Field(f.grid, np.abs(f.values) ** 2 + 0j)
    return lhs / lp_norm(f.grid, _mult(rho, riesz(-(d - 3) / 2)), 2.0)


def _gn(s1: float, s2: float, p1: float, p2: float, p3: float, theta: float):
    def ratio(f: Field) -> float:
        lhs = lp_norm(f.grid, _mult(f, riesz(s1)), p1)
        rhs = lp_norm(f.grid, _mult(f, riesz(s2)), p2) ** theta * lp_norm(f.grid, f.values, p3) ** (1 - theta)
        return lhs / rhs
    return ratio


def _gn_slice(f: Field) -> float:
    """``||f||_3^3 / (||f||_{H^1} || |grad|^{-1/2} f ||_4^2)``."""
    lhs = lp_norm(f.grid, f.values, 3.0) ** 3
    rhs = norm(f, "Hs", 1.0) * lp_norm(f.grid, _mult(f, riesz(-0.5)), 4.0) ** 2
    return lhs / rhs


def _hardy(s: float):
    def ratio(f: Field) -> float:
        g = f.grid
        weight = np.fft.fftshift(kernels.sampled_power(g, 2 * s))
        lhs = math.sqrt(g.integrate(weight * np.abs(f.values) ** 2))
        return lhs / norm(f, "Hs_dot", s)
    return ratio


def _hls(gamma: float, p: float, q: float):
    def ratio(f: Field) -> float:
        g = f.grid
        mult = kernels.bank_for(g).power(gamma)
        return lp_norm(g, kernels.convolve(g, mult, f.values), q) / lp_norm(g, f.values, p)
    return ratio


# -- the checks -----------------------------------------------------------------------


def _inequality(name: str, spec: EnsembleSpec, ratio: Callable[[Field], float], rule: str,
                refine: bool, extra: dict | None = None,
                bounds: tuple[float, float] | None = None) -> CheckReport:
    fields = make_ensemble(spec)
    r = np.array([ratio(f) for f in fields])
    finite = bool(np.all(np.isfinite(r)))
    max_r = float(r.max()) if r.size else 0.0
    passed = finite
    if bounds is not None and r.size:
        lo, hi = bounds
        passed = passed and bool(np.all((r >= lo * (1 - 1e-12)) & (r <= hi * (1 + 1e-12))))
    stability = None
    if refine and r.size:
        fine = [resample(f, 2 * spec.n) for f in fields]
        rf = np.array([ratio(f) for f in fine])
        max_f = float(rf.max())
        factor = max_f / max_r if max_r > 0 else float("nan")
        stability = {"n": spec.n, "n_fine": 2 * spec.n, "max": max_r, "max_fine": max_f, "factor": factor}
        passed = passed and bool(np.all(np.isfinite(rf))) and factor < 1 + STABILITY_GROWTH
        if bounds is not None:
            lo, hi = bounds
            passed = passed and bool(np.all((rf >= lo * (1 - 1e-12)) & (rf <= hi * (1 + 1e-12))))
    return CheckReport(name, spec.d, spec.field_class, r.tolist(), max_r, passed, rule, stability, extra or {})


def check_bernstein(spec: EnsembleSpec, s: float = 1.0, N: float | None = None, refine: bool = True) -> CheckReport:
    if N is None:
        N = 2.0 ** math.floor(math.log2(spec.cutoff() / 2))
    lo, hi = 2.0 ** (-abs(s)), 2.0 ** (abs(s) + 1)
    return _inequality("bernstein", spec, _bernstein(s, N), f"ratio in [{lo:g}, {hi:g}], stable",
                       refine, {"s": s, "N": N}, bounds=(lo, hi))


def check_orthogonality(spec: EnsembleSpec, tol: float = 1e-10) -> CheckReport:
    grid = spec.grid
    cs = build_cube_system(grid, RandomizationParams(spec.s, spec.a))
    ratios = []
    for f in make_ensemble(spec):
        c2 = np.abs(f.coefficients) ** 2
        pieces = np.bincount(cs.labels.ravel(), weights=c2.ravel(), minlength=cs.count)
        # each piece is ||box_j f||^2 by Plancherel
        ratios.append(float(pieces.sum() * grid.dxi**grid.d) / norm(f, "Lp", 2.0) ** 2)
    r = np.array(ratios)
    passed = bool(np.all(np.abs(r - 1) < tol))
    return CheckReport("orthogonality", spec.d, spec.field_class, r.tolist(),
                       float(r.max()) if r.size else 0.0, passed, f"|ratio - 1| < {tol:g}",
                       extra={"cube_count": cs.count})


def _box_ratios(f: Field, cs, a: int) -> tuple[float, dict]:
    """Cardinality-normalized sup/L^2 ratio over all cells, plus the literal
    per-annulus ratio ``||box f||_inf / ||<grad>^{-a d/2} box f||_2``."""
    g = f.grid
    d = g.d
    c = f.coefficients
    lab = cs.labels
    card = cs.cardinality()
    l2sq = np.bincount(lab.ravel(), weights=(np.abs(c) ** 2).ravel(), minlength=cs.count) * g.dxi**d
    wl2sq = np.bincount(lab.ravel(), weights=((1 + g.xi2) ** (-a * d / 2) * np.abs(c) ** 2).ravel(),
                        minlength=cs.count) * g.dxi**d
    sup = np.zeros(cs.count)
    single = card == 1
    sup[single] = (2 * np.pi) ** (-d / 2) * g.dxi**d * np.sqrt(l2sq[single] / g.dxi**d)
    for j in np.flatnonzero(~single):
        sup[j] = np.abs(g.ifft(c * (lab == j)) / g.fft_scale).max()
    ok = l2sq > 1e-30 * max(l2sq.max(), 1e-300)
    stable = sup[ok] / np.sqrt(card[ok] * g.dxi**d * l2sq[ok])
    literal = {}
    for info in [{"N": 0, "first": 0, "cells": 1}] + list(cs.annuli):
        sl = slice(info["first"], info["first"] + info["cells"])
        m = ok[sl]
        if m.any():
            literal[info["N"]] = float((sup[sl][m] / np.sqrt(wl2sq[sl][m])).max())
    return float(stable.max()), literal


def check_box_lq_lp(spec: EnsembleSpec, refine: bool = True) -> CheckReport:
    """Per-cell sup versus L^2 for the narrowed cubes.

    The pass rule uses the cardinality-normalized ratio, bounded by
    ``(2 pi)^{-d/2}`` for any lattice cell; the literal weighted ratio grows
    like ``<N>^{a d/2}`` on sub-lattice cells and is only recorded.
    """
    bound = (2 * np.pi) ** (-spec.d / 2)
    fields = make_ensemble(spec)
    params = RandomizationParams(spec.s, spec.a)
    cs = build_cube_system(spec.grid, params)
    res = [_box_ratios(f, cs, spec.a) for f in fields]
    r = np.array([x[0] for x in res])
    literal = {}
    for _, lit in res:
        for N, v in lit.items():
            literal[N] = max(literal.get(N, 0.0), v)
    max_r = float(r.max()) if r.size else 0.0
    passed = bool(np.all(np.isfinite(r)) and np.all(r <= bound * (1 + 1e-10)))
    stability = None
    if refine and r.size:
        fine = [resample(f, 2 * spec.n) for f in fields]
        cs2 = build_cube_system(fine[0].grid, params)
        rf = np.array([_box_ratios(f, cs2, spec.a)[0] for f in fine])
        factor = float(rf.max()) / max_r
        stability = {"n": spec.n, "n_fine": 2 * spec.n, "max": max_r, "max_fine": float(rf.max()),
                     "factor": factor}
        passed = passed and factor < 1 + STABILITY_GROWTH and bool(np.all(rf <= bound * (1 + 1e-10)))
    return CheckReport("box_lq_lp", spec.d, spec.field_class, r.tolist(), max_r, passed,
                       f"normalized ratio <= (2 pi)^(-d/2) = {bound:.6g}, stable", stability,
                       {"literal_by_annulus": {str(k): v for k, v in sorted(literal.items())}, "a": spec.a})


def check_lieb_loss(spec: EnsembleSpec, tol: float = 0.05) -> CheckReport:
    if spec.d < 4:
        raise ValueError("the |x|^-3 interaction equivalence needs d >= 4")
    r = []
    for f in make_ensemble(spec):
        kf, sf = interaction_quantity(f)
        r.append(kf / sf)
    r = np.array(r)
    cv = float(r.std() / r.mean()) if r.size else 0.0
    return CheckReport("lieb_loss", spec.d, spec.field_class, r.tolist(), float(r.max()), cv < tol,
                       f"std/mean < {tol:g}", extra={"mean": float(r.mean()), "cv": cv})


def check_visan(spec: EnsembleSpec, refine: bool = True) -> CheckReport:
    return _inequality("visan", spec, _visan, "finite, stable", refine)


def check_gagliardo_nirenberg(spec: EnsembleSpec, s1: float = 0.5, s2: float = 1.0, p2: float = 2.0,
                              p3: float = 4.0, refine: bool = True) -> CheckReport:
    if not 0 < s1 < s2:
        raise ValueError("Gagliardo-Nirenberg needs 0 < s1 < s2")
    theta = s1 / s2
    p1 = 1.0 / (theta / p2 + (1 - theta) / p3)
    if not (1 < p1 and 1 < p2 and 1 < p3):
        raise ValueError("Gagliardo-Nirenberg needs 1 < p1, p2, p3")
    return _inequality("gagliardo_nirenberg", spec, _gn(s1, s2, p1, p2, p3, theta), "finite, stable",
                       refine, {"s1": s1, "s2": s2, "p1": p1, "p2": p2, "p3": p3, "theta": theta})


def check_gn_slice(spec: EnsembleSpec, refine: bool = True) -> CheckReport:
    return _inequality("gn_slice", spec, _gn_slice, "finite, stable", refine)


def check_hardy(spec: EnsembleSpec, s: float = 1.0, refine: bool = True) -> CheckReport:
    if not 0 < s < spec.d / 2:
        raise ValueError(f"Hardy's inequality needs 0<s<\\frac{{d}}{{2}}; got s={s}, d={spec.d}")
    return _inequality("hardy", spec, _hardy(s), "finite, stable", refine, {"s": s})


def hls_target_exponent(d: int, gamma: float, p: float) -> float:
    """``q`` with ``1/q = 1/p + gamma/d - 1``."""
    inv = 1.0 / p + gamma / d - 1.0
    if not 0 < gamma < d:
        raise ValueError(f"HLS needs 0 < gamma < d; got gamma={gamma}, d={d}")
    if not (1 < p and 0 < inv < 1.0 / p):
        raise ValueError(f"HLS needs 1 < p < q < infinity with 1/q = 1/p + gamma/d - 1; got p={p}")
    return 1.0 / inv


def check_hls(spec: EnsembleSpec, gamma: float | None = None, p: float = 2.0, q: float | None = None,
              refine: bool = True) -> CheckReport:
    if gamma is None:
        gamma = spec.d - 1.0
    q_exact = hls_target_exponent(spec.d, gamma, p)
    if q is not None and not math.isclose(q, q_exact, rel_tol=1e-12):
        raise ValueError(f"HLS exponent pairing 1/q = 1/p + gamma/d - 1 requires q={q_exact:g}, got {q}")
    return _inequality("hls", spec, _hls(gamma, p, q_exact), "finite, stable", refine,
                       {"gamma": gamma, "p": p, "q": q_exact})


CHECKS: dict = {
    "bernstein": check_bernstein,
    "orthogonality": check_orthogonality,
    "box_lq_lp": check_box_lq_lp,
    "lieb_loss": check_lieb_loss,
    "visan": check_visan,
    "gagliardo_nirenberg": check_gagliardo_nirenberg,
    "gn_slice": check_gn_slice,
    "hardy": check_hardy,
    "hls": check_hls,
}


def run_check(name: str, spec: EnsembleSpec, **options) -> CheckReport:
    if name not in CHECKS:
        raise KeyError(f"unknown check {name!r}; available: {sorted(CHECKS)}")
    return CHECKS[name](spec, **options)
