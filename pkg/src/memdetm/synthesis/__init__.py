"""LMI synthesis of memory event-triggered controllers and certificate checks."""
from .backend import AffineLmi, CvxoptBackend, ScsBackend, get_backend
from .lmi import assemble_vertex_lmi, theta_matrix, vertex_thetas, xi_at
from .problem import SynthesisProblem, SynthesisResult, VariableLayout
from .solve import SIGMA_GRID, build_program, recover_gains, solve, solve_with_sigma_grid
from .verify import VerifyReport, certify_gains, check_averaging_bound, averaging_slack, verify

__all__ = [
    "AffineLmi", "CvxoptBackend", "ScsBackend", "get_backend", "assemble_vertex_lmi",
    "theta_matrix", "vertex_thetas", "xi_at", "SynthesisProblem", "SynthesisResult",
    "VariableLayout", "SIGMA_GRID", "build_program", "recover_gains", "solve",
    "solve_with_sigma_grid", "VerifyReport", "certify_gains", "check_averaging_bound", "averaging_slack",
    "verify",
]
