"""Scalar functionals: mass, energy, perturbed mass/energy, the interaction
Morawetz action and its derivative decomposition, space-time norms.

Every double integral ``iint G(x - y) A(y) B(x) dx dy`` is evaluated as
``<G * A, B>`` with one FFT convolution per kernel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import kernels
from .dynamics import HartreeKernel, PerturbedState, Trajectory, nonlinearity
from .spectral import Field, Grid, GridError, bessel, free_propagate, gradient, lp_norm, norm

TERM_NAMES = ("C-Ma1", "C-Mb1", "C-Mc1", "C-Md1", "C-Me1", "C-Mf1", "C-Mg1")


def mass(u: Field) -> float:
    return u.grid.integrate(np.abs(u.values) ** 2)


def kinetic(u: Field) -> float:
    g = u.grid
    return 0.5 * float(np.sum(g.xi2 * np.abs(u.coefficients) ** 2) * g.dxi**g.d)


def potential(u: Field, k: HartreeKernel) -> float:
    rho = np.abs(u.values) ** 2
    return 0.25 * u.grid.integrate(k.potential_of_density(rho) * rho)


def energy(u: Field, k: HartreeKernel) -> tuple[float, float, float]:
    """``(kinetic, potential, total)`` with kinetic ``1/2 ||grad u||^2`` and
    potential ``1/4 <V * |u|^2, |u|^2>``."""
    kin = kinetic(u)
    pot = potential(u, k)
    return kin, pot, kin + pot


def perturbed_mass_energy(st: PerturbedState, k: HartreeKernel) -> tuple[float, float]:
    """``M_w = ||w||^2``; ``E_w`` pairs the kinetic energy of ``w`` with the
    potential energy of the full ``u = v + w``."""
    return mass(st.w), kinetic(st.w) + potential(st.u, k)


def momentum_bracket(f: Field, g: Field) -> list[np.ndarray]:
    """``Re(f grad conj(g) - g grad conj(f))``, one real array per axis."""
    if f.grid != g.grid:
        raise GridError("fields live on different grids")
    grid = f.grid
    a, b = f.values, g.values
    ga = gradient(grid, np.conj(b))
    gb = gradient(grid, np.conj(a))
    return [np.real(a * x - b * y) for x, y in zip(ga, gb)]


# -- interaction quantities --------------------------------------------------------


def interaction_kernel_form(u: Field) -> float:
    """``iint |u(x)|^2 |u(y)|^2 / |x - y|^3``."""
    g = u.grid
    rho = np.abs(u.values) ** 2
    K3 = kernels.bank_for(g).power(3.0)
    return g.integrate(kernels.convolve(g, K3, rho) * rho)


def interaction_surrogate_raw(u: Field) -> float:
    """``|| |grad|^{-(d-3)/2} |u|^2 ||_{L^2}^2`` with the zero mode dropped."""
    g = u.grid
    rho_hat = g.fft(np.abs(u.values) ** 2) * g.fft_scale
    w = np.zeros(g.shape)
    nz = g.xi2 > 0
    w[nz] = g.xi2[nz] ** (-(g.d - 3) / 2)
    return float(np.sum(w * np.abs(rho_hat) ** 2) * g.dxi**g.d)


_CALIBRATION: dict = {}


def calibration_constant(grid: Grid) -> float:
    """Kernel-to-surrogate ratio on a centered unit Gaussian; fitted once per grid."""
    if grid not in _CALIBRATION:
        sigma = grid.L / 12
        u = Field.from_function(grid, lambda *x: np.exp(-sum(c**2 for c in x) / (2 * sigma**2)))
        _CALIBRATION[grid] = interaction_kernel_form(u) / interaction_surrogate_raw(u)
    return _CALIBRATION[grid]


def interaction_quantity(u: Field) -> tuple[float, float]:
    """``(kernel_form, surrogate_form)``; the surrogate is scaled by the grid's
    calibration constant (continuum value ``8 pi^2`` at ``d = 5``)."""
    if u.grid.d < 4:
        raise ValueError("the |x|^-3 interaction equivalence needs d >= 4")
    return interaction_kernel_form(u), calibration_constant(u.grid) * interaction_surrogate_raw(u)


# -- Morawetz machinery -----------------------------------------------------------


def _densities(w: np.ndarray, grid: Grid):
    rho = np.abs(w) ** 2
    dw = gradient(grid, w)
    p = [np.imag(dk * np.conj(w)) for dk in dw]
    return rho, dw, p


def morawetz_action(w: Field) -> float:
    """``2 Im iint |w(y)|^2 grad m(x-y) . grad w(x) conj(w(x))`` with ``m = |x|``."""
    g = w.grid
    bank = kernels.bank_for(g)
    rho, _, p = _densities(w.values, g)
    total = 0.0
    for k in range(g.d):
        total += g.integrate(kernels.convolve(g, bank.grad(k), rho).real * p[k])
    return 2.0 * total


@dataclass
class MorawetzBreakdown:
    t: float
    action: float
    terms: dict
    dM_dt_fd: float | None = None
    scale: float = 0.0
    exact_nonlinear: float | None = None

    @property
    def total(self) -> float:
        return float(sum(self.terms.values()))

    @property
    def corrected_total(self) -> float:
        """Sum with (C-Md1) replaced by the exact Hartree contribution."""
        return self.total - self.terms["C-Md1"] + self.exact_nonlinear


def morawetz_terms(st: PerturbedState | Field, k: HartreeKernel) -> MorawetzBreakdown:
    """The seven-term decomposition of ``dM/dt`` for ``w`` solving the forced equation.

    Also returns ``exact_nonlinear``: the Hartree contribution
    ``-2 iint |w(y)|^2 grad m(x-y) . |w(x)|^2 grad(V * |w|^2)(x)`` before the
    integration by parts that produces (C-Md1).
    """
    if isinstance(st, Field):
        w_f, e_arr, t = st, None, 0.0
    else:
        w_f, e_arr, t = st.w, (None if st.e is None else st.e.values), st.t
    g = w_f.grid
    if g.d < 4:
        raise ValueError("the Morawetz decomposition needs d >= 4")
    bank = kernels.bank_for(g)
    w = w_f.values
    rho, dw, p = _densities(w, g)
    d = g.d

    def conv(mult, a):
        return kernels.convolve(g, mult, a).real

    ma = mc = 0.0
    for j in range(d):
        for kk in range(j, d):
            mult = bank.hessian(j, kk)
            sym = 1.0 if j == kk else 2.0
            ma += sym * g.integrate(conv(mult, p[j]) * p[kk])
            mc += sym * g.integrate(conv(mult, rho) * np.real(np.conj(dw[j]) * dw[kk]))
    lap_rho = conv(bank.laplacian(), rho)
    N_w = k.potential_of_density(rho)
    terms = {
        "C-Ma1": -4.0 * ma,
        "C-Mb1": g.integrate(conv(bank.bilaplacian_neg(), rho) * rho),
        "C-Mc1": 4.0 * mc,
        "C-Md1": g.integrate(lap_rho * N_w * rho),
    }
    grad_rho = [conv(bank.grad(j), rho) for j in range(d)]
    if e_arr is None:
        terms.update({"C-Me1": 0.0, "C-Mf1": 0.0, "C-Mg1": 0.0})
    else:
        im_ew = np.imag(e_arr * np.conj(w))
        terms["C-Me1"] = 4.0 * sum(g.integrate(conv(bank.grad(j), im_ew) * p[j]) for j in range(d))
        terms["C-Mf1"] = 4.0 * sum(g.integrate(grad_rho[j] * np.real(e_arr * np.conj(dw[j])))
                                   for j in range(d))
        terms["C-Mg1"] = 2.0 * g.integrate(lap_rho * np.real(e_arr * np.conj(w)))
    # Hartree part of 2 int m_j {F, w}_p^j, with {N w, w}_p = -|w|^2 grad N.
    grad_N = gradient(g, N_w)
    exact = -2.0 * sum(g.integrate(grad_rho[j] * rho * grad_N[j].real) for j in range(d))
    action = 2.0 * sum(g.integrate(grad_rho[j] * p[j]) for j in range(d))
    scale = max(abs(v) for v in terms.values()) or 1.0
    return MorawetzBreakdown(t=t, action=action, terms=terms, scale=scale, exact_nonlinear=exact)


def finite_difference(times: Sequence[float], values: Sequence[float]) -> np.ndarray:
    """Centered differences inside, one-sided at the ends."""
    t = np.asarray(times, dtype=float)
    y = np.asarray(values, dtype=float)
    if t.size < 2:
        raise ValueError("need at least two samples to differentiate")
    return np.gradient(y, t, edge_order=1)


def attach_fd_derivative(breakdowns: list[MorawetzBreakdown]) -> list[MorawetzBreakdown]:
    fd = finite_difference([b.t for b in breakdowns], [b.action for b in breakdowns])
    for b, val in zip(breakdowns, fd):
        b.dM_dt_fd = float(val)
    return breakdowns


# -- space-time norms --------------------------------------------------------------


@dataclass(frozen=True)
class SpaceTimeNormSpec:
    """Summands ``(q, r, sigma)`` of ``sum ||<grad>^sigma f||_{L^q_t L^r_x}``."""

    terms: tuple

    def __post_init__(self):
        for q, r, _ in self.terms:
            if q < 1 or r < 1:
                raise ValueError("space-time exponents must be >= 1")

    @classmethod
    def x_norm(cls) -> "SpaceTimeNormSpec":
        return cls(((2.0, 10 / 3, 1.0), (4.0, 4.0, 0.0), (4.0, 5.0, 0.0), (3.0, 6.0, 0.0)))

    @classmethod
    def y_norm(cls, s: float, a: float) -> "SpaceTimeNormSpec":
        return cls(((2.0, 5.0, s + a / 2), (4.0, 5.0, 0.0), (4.0, 4.0, 0.0), (6.0, 3.0, 0.0)))


def _trapezoid(y: np.ndarray, t: np.ndarray) -> float:
    return float(np.sum(0.5 * (y[1:] + y[:-1]) * np.diff(t)))


def spacetime_norm(traj: Trajectory, spec: SpaceTimeNormSpec) -> float:
    times = np.asarray(traj.snapshot_times, dtype=float)
    if times.size < 2:
        raise ValueError("space-time norms need at least two snapshots")
    fields = [s.u if isinstance(s, PerturbedState) else s for s in traj.snapshots]
    total = 0.0
    for q, r, sigma in spec.terms:
        vals = []
        for f in fields:
            a = f.values if sigma == 0 else f.grid.ifft(f.grid.fft(f.values) * bessel(sigma).on(f.grid))
            vals.append(lp_norm(f.grid, a, r) ** q)
        total += _trapezoid(np.asarray(vals), times) ** (1.0 / q)
    return total


def free_trajectory(f: Field, times: Sequence[float]) -> Trajectory:
    traj = Trajectory()
    for t in times:
        traj.store(float(t), free_propagate(f, float(t)).to_physical())
    return traj


def scattering_diagnostic(traj: Trajectory) -> np.ndarray:
    """H^1 Cauchy increments of ``exp(-i t Laplacian) u(t)`` between snapshots."""
    if len(traj.snapshots) < 2:
        raise ValueError("need at least two snapshots")
    profiles = []
    for t, s in zip(traj.snapshot_times, traj.snapshots):
        f = s.u if isinstance(s, PerturbedState) else s
        profiles.append(free_propagate(f.to_frequency(), -t))
    out = []
    for a, b in zip(profiles[:-1], profiles[1:]):
        out.append(norm(Field(a.grid, b.data - a.data, a.rep), "Hs", 1.0))
    return np.asarray(out)


# -- almost conservation -------------------------------------------------------------


def mass_drift_integrand(st: PerturbedState) -> float:
    """``2 |int e conj(w)|``."""
    if st.e is None:
        raise ValueError("perturbed state carries no error term")
    g = st.w.grid
    return 2.0 * abs(np.sum(st.e.values * np.conj(st.w.values)) * g.cell_volume)


def energy_drift_integrand(st: PerturbedState, k: HartreeKernel) -> float:
    """``|int (V * |u|^2) u Laplacian conj(v)|``."""
    g = st.w.grid
    u = st.u.values
    lap_v = g.ifft(-g.xi2 * st.v.coefficients / g.fft_scale)
    return abs(np.sum(nonlinearity(u, k) * np.conj(lap_v)) * g.cell_volume)


def perturbed_probe(k: HartreeKernel, morawetz: bool = False):
    """Scalar recorder for :func:`evolve_perturbed`."""

    def probe(st: PerturbedState) -> dict:
        M_w, E_w = perturbed_mass_energy(st, k)
        out = {
            "M_w": M_w,
            "E_w": E_w,
            "mass_integrand": mass_drift_integrand(st),
            "energy_integrand": energy_drift_integrand(st, k),
        }
        if morawetz:
            b = morawetz_terms(st, k)
            out["M(t)"] = b.action
            out.update(b.terms)
            out["nonlinear_exact"] = b.exact_nonlinear
        return out

    return probe


@dataclass
class DriftRecord:
    times: np.ndarray
    M_w: np.ndarray
    E_w: np.ndarray
    dM_dt_fd: np.ndarray
    dE_dt_fd: np.ndarray
    mass_integrand: np.ndarray
    energy_integrand: np.ndarray
    mass_ratio: np.ndarray = field(default=None)
    energy_ratio: np.ndarray = field(default=None)

    def __post_init__(self):
        with np.errstate(divide="ignore", invalid="ignore"):
            self.mass_ratio = np.abs(self.dM_dt_fd) / self.mass_integrand
            self.energy_ratio = np.abs(self.dE_dt_fd) / self.energy_integrand


def almost_conservation_bounds(traj: Trajectory, k: HartreeKernel | None = None) -> DriftRecord:
    """Finite-difference drifts of ``M_w``, ``E_w`` next to the direct bounds.

    Works from the scalar diagnostics recorded by :func:`perturbed_probe`; if
    those are absent the stored snapshots are evaluated (needs ``k``).
    """
    diag = traj.diagnostics
    if "mass_integrand" not in diag:
        if k is None or not traj.snapshots or traj.snapshots[0].e is None:
            raise ValueError("trajectory carries no error-term records")
        probe = perturbed_probe(k)
        rows = [probe(st) for st in traj.snapshots]
        times = np.asarray(traj.snapshot_times)
        diag = {key: [r[key] for r in rows] for key in rows[0]}
    else:
        times = np.asarray(traj.times)
    M_w = np.asarray(diag["M_w"])
    E_w = np.asarray(diag["E_w"])
    return DriftRecord(
        times=times,
        M_w=M_w,
        E_w=E_w,
        dM_dt_fd=finite_difference(times, M_w),
        dE_dt_fd=finite_difference(times, E_w),
        mass_integrand=np.asarray(diag["mass_integrand"]),
        energy_integrand=np.asarray(diag["energy_integrand"]),
    )
