"""Pseudo-spectral lab for noise-driven Navier-Stokes flow with Brinkman-Forchheimer damping on the torus."""
from .integrator import SolverConfig, TrajectoryRecord, simulate, simulate_ensemble
from .noise import Additive, LinearDiagonal, QSpectrum, ScalarStationary
from .operators import PhysicsParams, eta_constant
from .spectral_space import SpectralField, SpectralSpace

__version__ = "0.1.0"

__all__ = [
    "Additive", "LinearDiagonal", "PhysicsParams", "QSpectrum", "ScalarStationary",
    "SolverConfig", "SpectralField", "SpectralSpace", "TrajectoryRecord", "eta_constant",
    "simulate", "simulate_ensemble",
]
