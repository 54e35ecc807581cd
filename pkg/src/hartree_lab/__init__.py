"""Pseudospectral laboratory for the defocusing energy-critical Hartree equation
``i u_t + Laplacian u = (|x|^-4 * |u|^2) u`` on a periodic box in up to five dimensions."""

from .dynamics import (BlowUpError, HartreeKernel, PerturbedState, SolverConfig, Trajectory, evolve,
                       evolve_perturbed, hartree_potential, split_high_low, stability_probe, strang_step)
from .functionals import (MorawetzBreakdown, SpaceTimeNormSpec, almost_conservation_bounds, energy,
                          interaction_quantity, mass, momentum_bracket, morawetz_action, morawetz_terms,
                          perturbed_mass_energy, scattering_diagnostic, spacetime_norm)
from .randomization import (CubeSystem, RandomCoefficients, RandomizationParams, box_project,
                            build_cube_system, randomize, sample_coefficients)
from .seeding import derive_seed
from .spectral import (Field, Grid, MultiplierSymbol, apply_multiplier, bessel, free_propagate, lp_project,
                       make_grid, norm, riesz, scale_field)

__version__ = "0.1.0"
