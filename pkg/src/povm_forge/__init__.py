"""Minimal optimal POVMs for N identically prepared qubits."""
from .bounds import (Certificate, CertificatePreconditionError, CountingBound, certificate_generic,
                     certificate_quadratic, certificate_quadratic_linear, certificate_quartic,
                     certificate_quartic_linear, certify, n_min)
from .catalog import CatalogEntry, catalog_get
from .geometry import (Direction, QuadratureRule, assoc_legendre, gauss_legendre_nodes, rotate,
                       sphere_rule)
from .povm import Outcome, Povm, canonicalize, equivalent_up_to_rotation, validate
from .simulate import SimulationConfig, SimulationResult, outcome_distribution
from .solver import SolverConfig, SolverResult, feasibility_scan, objective, solve
from .verification import (ResidualReport, coherent_state, mean_fidelity, shannon_gain, verify)

__all__ = [
    "CatalogEntry", "Certificate", "CertificatePreconditionError", "CountingBound", "Direction",
    "Outcome", "Povm", "QuadratureRule", "ResidualReport", "SimulationConfig", "SimulationResult",
    "SolverConfig", "SolverResult", "assoc_legendre", "canonicalize", "catalog_get",
    "certificate_generic", "certificate_quadratic", "certificate_quadratic_linear",
    "certificate_quartic", "certificate_quartic_linear", "certify", "coherent_state",
    "equivalent_up_to_rotation", "feasibility_scan", "gauss_legendre_nodes", "mean_fidelity",
    "n_min", "objective", "outcome_distribution", "rotate", "shannon_gain", "solve",
    "sphere_rule", "validate", "verify",
]
