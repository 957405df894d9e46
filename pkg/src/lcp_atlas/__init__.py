"""Geometric analysis of linear complementarity problems and systems."""

from .core import CONTINUUM, LcpInstance, SolutionSet, check_solution, solve_enumerate, solve_lemke
from .analysis import degree, is_P, is_R0
from .stability import is_lcp_stable, stability_margin, stability_report
from .equivalence import classify_2d, normal_form_2d, ppt
from .lcs import CircuitParams, LcsModel, circuit_model, equilibria, simulate, sweep_1d

__version__ = "0.1.0"

__all__ = [
    "CONTINUUM", "LcpInstance", "SolutionSet", "check_solution", "solve_enumerate", "solve_lemke",
    "degree", "is_P", "is_R0",
    "is_lcp_stable", "stability_margin", "stability_report",
    "classify_2d", "normal_form_2d", "ppt",
    "CircuitParams", "LcsModel", "circuit_model", "equilibria", "simulate", "sweep_1d",
]
