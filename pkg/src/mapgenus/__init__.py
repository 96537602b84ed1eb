"""Genus expansions of perturbed GUE multi-matrix models, computed by map
enumeration, by the loop (Schwinger-Dyson) equations and by finite-N sampling."""
from .errors import BudgetExceeded, CapExceeded
from .series import TruncatedSeries
from .ncpoly import (GaussianRational, Polynomial, Potential, TensorPolynomial, apply_Xi, cyclic_derivative,
                     degree_division, format_word, involution, multiply, nc_derivative, neumann_inverse_apply,
                     norm_M, parse_word, xi0, xi1, xi2)
from .mapenum import (CountTable, GluingDiagram, Star, SurfaceData, closed_series, count_closed, count_rooted,
                      enumerate_gluings, genus_of_gluing, gue_joint_moment, gue_moment_exact,
                      joint_moment_series, rooted_series)
from .sdsolver import (MomentTable, SDSolver, evaluate_series, free_energy, limit_equation_residual,
                       moment_expansion, solve_genus, solve_planar)

__all__ = [
    "BudgetExceeded", "CapExceeded", "TruncatedSeries",
    "GaussianRational", "Polynomial", "Potential", "TensorPolynomial", "apply_Xi", "cyclic_derivative",
    "degree_division", "involution", "multiply", "nc_derivative", "neumann_inverse_apply", "norm_M",
    "format_word", "parse_word", "xi0", "xi1", "xi2",
    "CountTable", "GluingDiagram", "Star", "SurfaceData", "closed_series", "count_closed", "count_rooted",
    "enumerate_gluings", "genus_of_gluing", "gue_joint_moment", "gue_moment_exact", "joint_moment_series",
    "rooted_series",
    "MomentTable", "SDSolver", "evaluate_series", "free_energy", "limit_equation_residual",
    "moment_expansion", "solve_genus", "solve_planar",
]
