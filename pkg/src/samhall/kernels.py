"""Loop backend selection.

The compiled extension ``_fastloops`` carries the fused trajectory loops and
batch kernels; ``_pyloops`` is the pure numpy fallback. Selection happens at
import time: the extension is used when importable unless ``SAMHALL_PURE=1``
is set in the environment. Without the extension the trajectory driver falls
back to its generic per-step path (``run_builtin``/``run_mlp`` are None).
"""

from __future__ import annotations

import os

_ext = None
if os.environ.get("SAMHALL_PURE", "") != "1":
    try:
        from . import _fastloops as _ext
    except ImportError:
        _ext = None

from . import _pyloops as _py

HAVE_COMPILED = _ext is not None

_active = _ext if _ext is not None else _py

# trajectory status codes shared with the fused loops
STATUS_CONVERGED_SHIFTED = 0
STATUS_CONVERGED_RAW = 1
STATUS_BUDGET = 2
STATUS_GRAD_FLOOR = 3
STATUS_DIVERGED = 4

STATUS_NAMES = {
    STATUS_CONVERGED_SHIFTED: "converged_shifted_grad",
    STATUS_CONVERGED_RAW: "converged_raw_grad",
    STATUS_BUDGET: "budget_exhausted",
    STATUS_GRAD_FLOOR: "grad_floor_hit",
}


def backend_name() -> str:
    return _active.BACKEND


def set_backend(name: str) -> None:
    """Force a backend ("compiled" or "python"); tests and benchmarks only."""
    global _active
    if name == "compiled":
        if _ext is None:
            raise RuntimeError("compiled backend is not available")
        _active = _ext
    elif name == "python":
        _active = _py
    else:
        raise ValueError(f"unknown backend {name!r}")


def batch_value_grad(kind, params, pts):
    return _active.batch_value_grad(kind, params, pts)


def mlp_value_grad(theta, x, labels, n_in, n_hidden, n_classes, want_grad=True):
    return _active.mlp_value_grad(theta, x, labels, n_in, n_hidden, n_classes, want_grad)


def run_builtin_loop():
    """Fused builtin trajectory loop, or None when running on the fallback."""
    return _active.run_builtin


def run_mlp_loop():
    return _active.run_mlp
