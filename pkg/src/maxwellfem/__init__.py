"""Nedelec finite elements for 2D time-harmonic Maxwell problems with a
frequency-explicit residual error estimator and adaptive refinement."""

from .adapt import AdaptConfig, AllZeroEstimates, Experiment, IterationRecord, adapt_loop, doerfler_mark
from .coeffs import InvalidPml, MaterialField, PatchBounds, homogeneous, patch_bounds, pml_materials
from .estimator import ErrorReport, LocalEstimate, energy_error, estimate, eta_curl, eta_div, oscillation, project_source
from .fespace import DiscreteField, NedelecSpace, UnsupportedDegree, interpolate, ref_basis
from .mesh import Mesh, NonConforming, bisect, build_faces, read_mesh, structured_mesh, vertex_patch, write_mesh
from .problems import (
    AnalyticSolution,
    AtResonance,
    Source,
    cavity_solution,
    gba_cavity_diagnostic,
    pml_planewave_solution,
    quintic_cutoff,
)
from .runner import ExperimentConfig, run_experiment
from .system import ResidualTooLarge, SingularMatrix, assemble, solve

__version__ = "0.1.0"
