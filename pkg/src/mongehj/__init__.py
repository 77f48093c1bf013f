"""Hamilton-Jacobi equations on metric graphs: a min-plus solver plus
executable checks that its output is a Monge solution."""
from .graph import MetricGraph, Mesh, Point, SpaceTimePoint, sample_mesh
from .hamiltonian import HamiltonianSpec, audit_assumptions, lagrangian_view, legendre_L
from .problem import Problem
from .solver import SolveConfig, SpaceTimeField, TimeGrid, solve_eikonal, solve_general
from .monge import monge_residual

__all__ = [
    "MetricGraph", "Mesh", "Point", "SpaceTimePoint", "sample_mesh",
    "HamiltonianSpec", "audit_assumptions", "lagrangian_view", "legendre_L",
    "Problem", "SolveConfig", "SpaceTimeField", "TimeGrid", "solve_eikonal", "solve_general",
    "monge_residual",
]
__version__ = "0.1.0"
