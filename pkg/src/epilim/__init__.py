"""Simulation and numerical-limit toolkit for non-Markovian epidemic models."""

from .agent_sim import (
    CompartmentPath,
    EventLog,
    ModelSpec,
    TabulatedRate,
    integrated_intensity,
    simulate,
    simulate_ensemble,
)
from .fluid import (
    FluidSolution,
    solve_deterministic_delay,
    solve_fluid,
    solve_linear_volterra,
    solve_linear_volterra_2d,
    solve_markovian_ode,
)
from .equilibria import (
    EquilibriumPoint,
    sis_equilibrium,
    sirs_equilibrium,
    verify_equilibrium_identities,
)
from .harness import (
    EnsembleStats,
    FluctuationPath,
    convergence_rate,
    diffusion_scale,
    empirical_cov,
    fit_rate,
    fluid_scale,
    reconstruct_drivers,
)
from .fclt import (
    DRIVER_IDS,
    DriverCovariance,
    FcltPath,
    driver_covariance,
    sample_drivers,
    sis_sde_path,
    solve_fclt_path,
)
from .distributions import (
    Deterministic,
    DurationDist,
    Exponential,
    Gamma,
    JointDurationDist,
    KernelTable,
    LogNormal,
    PiecewiseEmpirical,
    Uniform,
    Weibull,
    dist_from_record,
    dist_to_record,
    equilibrium_dist,
    tabulate_kernels,
    uniform_grid,
)

__version__ = "0.1.0"

__all__ = [
    "CompartmentPath",
    "DRIVER_IDS",
    "Deterministic",
    "DriverCovariance",
    "DurationDist",
    "EnsembleStats",
    "EquilibriumPoint",
    "EventLog",
    "Exponential",
    "FcltPath",
    "FluctuationPath",
    "FluidSolution",
    "Gamma",
    "JointDurationDist",
    "KernelTable",
    "LogNormal",
    "ModelSpec",
    "PiecewiseEmpirical",
    "TabulatedRate",
    "Uniform",
    "Weibull",
    "convergence_rate",
    "diffusion_scale",
    "dist_from_record",
    "dist_to_record",
    "driver_covariance",
    "empirical_cov",
    "equilibrium_dist",
    "fit_rate",
    "fluid_scale",
    "integrated_intensity",
    "reconstruct_drivers",
    "sample_drivers",
    "simulate",
    "simulate_ensemble",
    "sis_equilibrium",
    "sis_sde_path",
    "sirs_equilibrium",
    "solve_deterministic_delay",
    "solve_fclt_path",
    "solve_fluid",
    "solve_linear_volterra",
    "solve_linear_volterra_2d",
    "solve_markovian_ode",
    "tabulate_kernels",
    "uniform_grid",
    "verify_equilibrium_identities",
    "__version__",
]
