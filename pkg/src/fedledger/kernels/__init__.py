"""Backend dispatch for the hot numeric kernels.

Two interchangeable implementations exist: a numba-jitted one and a pure
numpy one.  Selection happens once at import via the FEDLEDGER_BACKEND
environment variable:

    FEDLEDGER_BACKEND=numba   force the jitted kernels (ImportError if absent)
    FEDLEDGER_BACKEND=numpy   force the pure-numpy kernels
    unset / auto              numba when importable, else numpy

``get_backend(name)`` returns a specific implementation module regardless of
the active default; the benchmark and the equivalence tests use it to run
both sides.
"""

import os

from . import _numpy

P = _numpy.P

_KERNEL_NAMES = (
    "mod_add",
    "mod_mul",
    "horner_eval",
    "weighted_sum_mod",
    "sq_dists",
    "two_nearest",
    "threshold_dist",
    "min_mse",
)


def get_backend(name: str):
    """Return the kernel module for ``name`` ("numba" or "numpy")."""
    if name == "numpy":
        return _numpy
    if name == "numba":
        from . import _numba
        return _numba
    raise ValueError(f"unknown kernel backend {name!r}")


def available_backends() -> list[str]:
    out = ["numpy"]
    try:
        get_backend("numba")
        out.insert(0, "numba")
    except ImportError:
        pass
    return out


def _select():
    choice = os.environ.get("FEDLEDGER_BACKEND", "auto").strip().lower()
    if choice in ("numba", "numpy"):
        return choice, get_backend(choice)
    if choice in ("", "auto"):
        try:
            return "numba", get_backend("numba")
        except ImportError:
            return "numpy", _numpy
    raise ValueError(
        f"FEDLEDGER_BACKEND={choice!r} (expected 'numba', 'numpy' or 'auto')"
    )


BACKEND, _impl = _select()

mod_add = _impl.mod_add
mod_mul = _impl.mod_mul
horner_eval = _impl.horner_eval
weighted_sum_mod = _impl.weighted_sum_mod
sq_dists = _impl.sq_dists
two_nearest = _impl.two_nearest
threshold_dist = _impl.threshold_dist
min_mse = _impl.min_mse

__all__ = ["P", "BACKEND", "get_backend", "available_backends", *_KERNEL_NAMES]
