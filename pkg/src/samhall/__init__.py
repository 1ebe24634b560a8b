"""Hallucinated minimizers of sharpness-aware minimization.

Analytic landscapes with exact SAM objectives and gradients, a GD/SAM/switch
trajectory driver, detection and classification of hallucinated minimizers,
the superlevel-set existence construction, implicit-function continuation of
the hallucinated set, and a desk-scale tanh classifier exercising the same
machinery. Hot loops run in the compiled extension when available and fall
back to pure numpy otherwise (see :mod:`samhall.kernels`).
"""

from .kernels import HAVE_COMPILED, backend_name

__version__ = "0.1.0"
__all__ = ["HAVE_COMPILED", "backend_name", "__version__"]
