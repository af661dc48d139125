"""Weighted pseudorandom generators and derandomization for read-once branching programs."""
from .robp import Robp, RobpClass, classify, evaluate, exact_expectation
from .wpr import Reduction, Wprg, compose, estimate, wprg_from_reduction

__all__ = ["Robp", "RobpClass", "classify", "evaluate", "exact_expectation", "Reduction", "Wprg",
           "compose", "estimate", "wprg_from_reduction"]
__version__ = "0.1.0"
