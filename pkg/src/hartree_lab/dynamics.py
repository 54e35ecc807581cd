"""Split-step integration of the defocusing Hartree flow

    i u_t + Laplacian u = (|x|^-gamma * |u|^2) u

and of the high/low perturbed decomposition ``u = v + w`` with ``v`` the
free evolution of the high-frequency data.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Optional

import numpy as np
import scipy.fft as sfft

from . import kernels
from .spectral import Field, Grid, GridError, free_propagate, lp_symbol, norm

SAMPLED = "sampled-kernel"
CONTINUUM = "continuum-symbol"


class BlowUpError(RuntimeError):
    """The blow-up guard tripped: non-finite values or runaway amplitude."""

    def __init__(self, msg: str, step: int | None = None, t: float | None = None):
        super().__init__(msg)
        self.step = step
        self.t = t


@dataclass(frozen=True, eq=False)
class HartreeKernel:
    grid: Grid
    gamma: float = 4.0
    mode: str = SAMPLED
    origin_rule: str = "zeta"

    def __post_init__(self):
        if not 0 < self.gamma < self.grid.d:
            raise ValueError(f"need 0 < gamma < d, got gamma={self.gamma}, d={self.grid.d}")
        if self.mode not in (SAMPLED, CONTINUUM):
            raise ValueError(f"unknown kernel mode {self.mode!r}")
        if self.origin_rule not in kernels.ORIGIN_RULES:
            raise ValueError(f"unknown origin rule {self.origin_rule!r}")

    @cached_property
    def sampled(self) -> np.ndarray:
        return kernels.sampled_power(self.grid, self.gamma, self.origin_rule)

    @property
    def zero_mode(self) -> float:
        return float(self.sampled.sum() * self.grid.cell_volume)

    @cached_property
    def khat(self) -> np.ndarray:
        """Discrete convolution multiplier on the full FFT lattice (real, even)."""
        g = self.grid
        if self.mode == SAMPLED:
            m = kernels.conv_multiplier(g, self.sampled)
            return np.real(m).copy()
        c = kernels.continuum_power_constant(g.d, self.gamma)
        m = np.zeros(g.shape)
        nz = g.xi2 > 0
        m[nz] = c * g.xi2[nz] ** ((self.gamma - g.d) / 2)
        m[(0,) * g.d] = self.zero_mode
        return m

    @cached_property
    def khat_r(self) -> np.ndarray:
        return np.ascontiguousarray(self.khat[..., : self.grid.n // 2 + 1])

    def potential_of_density(self, rho: np.ndarray) -> np.ndarray:
        """``V * rho`` for a real density ``rho``."""
        axes = range(self.grid.d)
        return sfft.irfftn(sfft.rfftn(rho, axes=axes) * self.khat_r, s=self.grid.shape, axes=axes)


def hartree_potential(u: Field, k: HartreeKernel, check: bool = True) -> Field:
    """``V * |u|^2`` through the FFT; returns a real-valued field."""
    if u.grid != k.grid:
        raise GridError("field and kernel live on different grids")
    rho = np.abs(u.values) ** 2
    if check:
        full = k.grid.ifft(k.grid.fft(rho) * k.khat)
        scale = max(np.abs(full).max(), 1e-300)
        if np.abs(full.imag).max() > 1e-12 * scale:
            raise ArithmeticError("Hartree potential has a non-negligible imaginary part")
        pot = full.real
    else:
        pot = k.potential_of_density(rho)
    return Field(u.grid, pot.astype(complex))


def nonlinearity(u: np.ndarray, k: HartreeKernel) -> np.ndarray:
    """``F(u) = (V * |u|^2) u`` on raw samples."""
    return k.potential_of_density(np.abs(u) ** 2) * u


@dataclass(frozen=True)
class SolverConfig:
    dt: float
    T: float
    kernel: HartreeKernel
    record_every: int = 1
    diag_every: int = 1
    mu: int = 1
    scheme: str = "strang"
    blowup_factor: float = 1e6

    def __post_init__(self):
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not (self.T >= 0 and math.isfinite(self.T)):
            raise ValueError(f"T must be nonnegative, got {self.T}")
        if self.mu != 1:
            raise ValueError("only the defocusing sign mu = +1 is supported")
        if self.scheme != "strang":
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.record_every < 1 or self.diag_every < 1:
            raise ValueError("strides must be >= 1")

    @property
    def nsteps(self) -> int:
        return int(math.ceil(self.T / self.dt - 1e-9)) if self.T > 0 else 0

    @property
    def step(self) -> float:
        """Actual step: ``T / nsteps`` so the last step lands on ``T``."""
        return self.T / self.nsteps if self.nsteps else self.dt


@dataclass(eq=False)
class PerturbedState:
    v: Field
    w: Field
    N0: float
    t: float
    e: Optional[Field] = None

    @property
    def u(self) -> Field:
        return self.v + self.w


@dataclass(eq=False)
class Trajectory:
    times: list = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)
    snapshot_times: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)

    def record(self, t: float, scalars: dict):
        if self.times and t <= self.times[-1]:
            raise ValueError("diagnostic times must increase strictly")
        self.times.append(t)
        for key, val in scalars.items():
            self.diagnostics.setdefault(key, []).append(val)

    def store(self, t: float, snap):
        if self.snapshot_times and t <= self.snapshot_times[-1]:
            raise ValueError("snapshot times must increase strictly")
        self.snapshot_times.append(t)
        self.snapshots.append(snap)

    def series(self, key: str) -> np.ndarray:
        return np.asarray(self.diagnostics[key])


# -- stepping --------------------------------------------------------------------


def _nonlinear_phase(u: np.ndarray, k: HartreeKernel, dt: float) -> np.ndarray:
    return u * np.exp(-1j * dt * k.potential_of_density(np.abs(u) ** 2))


def strang_step(u: Field, dt: float, k: HartreeKernel) -> Field:
    """Half kinetic, exact nonlinear phase rotation, half kinetic.

    The nonlinear substep is exact since ``|u|`` is pointwise constant
    under ``i u_t = (V * |u|^2) u``. Negative ``dt`` steps backwards.
    """
    if dt == 0 or not math.isfinite(dt):
        raise ValueError("dt must be finite and nonzero")
    g = u.grid
    half = np.exp(-0.5j * dt * g.xi2)
    a = g.ifft(g.fft(u.values) * half)
    a = _nonlinear_phase(a, k, dt)
    a = g.ifft(g.fft(a) * half)
    if not np.all(np.isfinite(a)):
        raise BlowUpError("non-finite values after Strang step")
    return Field(g, a)


def _march(u0: np.ndarray, cfg: SolverConfig, on_record: Callable[[int, float, np.ndarray], None]):
    """Strang marching with merged kinetic half steps between records.

    ``on_record(step, t, u)`` is called at step 0, every diagnostic or
    snapshot stride, and at the final step.
    """
    k = cfg.kernel
    g = k.grid
    n = cfg.nsteps
    dt = cfg.step
    half = np.exp(-0.5j * dt * g.xi2)
    full = half * half
    u = np.array(u0, dtype=complex)
    amp0 = max(np.abs(u).max(), 1e-300)
    limit = cfg.blowup_factor * amp0

    def wanted(i):
        return i == n or i % cfg.diag_every == 0 or i % cfg.record_every == 0

    on_record(0, 0.0, u)
    synced = True
    for i in range(1, n + 1):
        if synced:
            u = g.ifft(g.fft(u) * half)
        u = _nonlinear_phase(u, k, dt)
        if wanted(i):
            u = g.ifft(g.fft(u) * half)
            synced = True
        else:
            u = g.ifft(g.fft(u) * full)
            synced = False
        amp = np.abs(u).max()
        if not math.isfinite(amp) or amp > limit:
            raise BlowUpError(f"blow-up guard tripped at step {i} (max|u| = {amp:.3e})", i, i * dt)
        if synced:
            on_record(i, i * dt, u)


def full_flow_diagnostics(u: Field, k: HartreeKernel) -> dict:
    from .functionals import energy, mass

    kin, pot, tot = energy(u, k)
    return {"mass": mass(u), "kinetic": kin, "potential": pot, "energy": tot}


def evolve(u0: Field, cfg: SolverConfig, probe: Callable[[Field], dict] | None = None,
           keep_snapshots: bool = True) -> Trajectory:
    """Integrate the full flow; diagnostics every ``diag_every`` steps."""
    if u0.grid != cfg.kernel.grid:
        raise GridError("initial data and kernel live on different grids")
    g = u0.grid
    probe = probe or (lambda f: full_flow_diagnostics(f, cfg.kernel))
    traj = Trajectory()
    n = cfg.nsteps

    def on_record(i, t, u):
        f = Field(g, u.copy())
        if i % cfg.diag_every == 0 or i == n:
            traj.record(t, probe(f))
        if keep_snapshots and (i % cfg.record_every == 0 or i == n):
            traj.store(t, f)

    _march(u0.values, cfg, on_record)
    return traj


def split_high_low(f: Field, N0: float) -> tuple[Field, Field]:
    """``(P_{>=N0} f, P_{<N0} f)`` in physical representation.

    The split is done on frequency coefficients, so a piece whose symbol
    vanishes on the support of ``f`` is exactly zero.
    """
    g = f.grid
    c = f.coefficients
    low = lp_symbol(g, "<", N0)
    w0 = Field(g, c * low, "frequency").to_physical()
    v0 = Field(g, c * (1.0 - low), "frequency").to_physical()
    return v0, w0


def perturbed_state(u: Field, v0: Field, N0: float, t: float, k: HartreeKernel) -> PerturbedState:
    v = free_propagate(v0, t).to_physical()
    w = Field(u.grid, u.values - v.values)
    e = Field(u.grid, nonlinearity(u.values, k) - nonlinearity(w.values, k))
    return PerturbedState(v, w, N0, t, e)


def evolve_perturbed(u0: Field, N0: float, cfg: SolverConfig,
                     probe: Callable[[PerturbedState], dict] | None = None,
                     keep_snapshots: bool = True) -> Trajectory:
    """Evolve ``u`` and report ``(v, w, e)`` along the way.

    ``v`` is recomputed as ``exp(i t Laplacian) v0`` at every record, so it
    is exactly linear; ``w = u - v`` and ``e = F(u) - F(w)``.
    """
    if u0.grid != cfg.kernel.grid:
        raise GridError("initial data and kernel live on different grids")
    g = u0.grid
    k = cfg.kernel
    v0, _ = split_high_low(u0, N0)
    traj = Trajectory()
    n = cfg.nsteps
    if probe is None:
        from .functionals import perturbed_mass_energy

        def probe(st):
            M_w, E_w = perturbed_mass_energy(st, k)
            return {"M_w": M_w, "E_w": E_w}

    def on_record(i, t, u):
        st = perturbed_state(Field(g, u.copy()), v0, N0, t, k)
        if i % cfg.diag_every == 0 or i == n:
            traj.record(t, probe(st))
        if keep_snapshots and (i % cfg.record_every == 0 or i == n):
            traj.store(t, st)

    _march(u0.values, cfg, on_record)
    return traj


def stability_probe(w0: Field, w0_tilde: Field, v0: Field, cfg: SolverConfig) -> Trajectory:
    """``||w(t) - w~(t)||_{H^1}`` where ``w`` feels the forcing from ``v`` and ``w~`` does not.

    ``w = u - exp(i t Laplacian) v0`` with ``u`` the full solution from
    ``v0 + w0``; ``w~`` solves the unforced equation from ``w0_tilde``.
    """
    k = cfg.kernel
    g = k.grid
    u_traj = evolve(w0 + v0, cfg, probe=lambda f: {}, keep_snapshots=True)
    wt_traj = evolve(w0_tilde, cfg, probe=lambda f: {}, keep_snapshots=True)
    out = Trajectory()
    for t, u, wt in zip(u_traj.snapshot_times, u_traj.snapshots, wt_traj.snapshots):
        w = u - free_propagate(v0, t).to_physical()
        out.record(t, {"deviation_H1": norm(w - wt, "Hs", 1.0)})
        out.store(t, (w, wt))
    return out
