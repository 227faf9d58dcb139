"""Pfaffian formulas for coalescing and annihilating Brownian motions, with
Monte Carlo and random-matrix cross-checks."""

__version__ = "0.1.0"

from .errors import PfaffianLabError
from .formulas import (
    Model,
    Pattern,
    PatternSpec,
    TestFunction,
    j_matrix,
    kernel_k,
    pattern_probability,
    product_moment,
    rho,
)
from .pfaffian import SkewMatrix, pf_enumerate, pf_expand, pf_stable, pfaffian

__all__ = [
    "Model", "Pattern", "PatternSpec", "PfaffianLabError", "SkewMatrix", "TestFunction",
    "j_matrix", "kernel_k", "pattern_probability", "pf_enumerate", "pf_expand", "pf_stable",
    "pfaffian", "product_moment", "rho", "__version__",
]
