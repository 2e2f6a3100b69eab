"""Rollout kernel backend selection.

The compiled Cython kernel is preferred; a numpy implementation with the
exact same contract is the fallback.  ``PRIMLATTICE_KERNEL=numpy`` or
``=cython`` in the environment forces a specific backend (the benchmark and
the cross-checking tests rely on this).
"""

import os

_requested = os.environ.get("PRIMLATTICE_KERNEL", "").strip().lower()

if _requested == "numpy":
    from . import _reference as _impl
    BACKEND = "numpy"
elif _requested in ("", "cython"):
    try:
        from . import _core as _impl
        BACKEND = "cython"
    except ImportError:
        if _requested == "cython":
            raise
        from . import _reference as _impl
        BACKEND = "numpy"
else:
    raise RuntimeError(f"unknown PRIMLATTICE_KERNEL value {_requested!r}")

CAR_LIKE = _impl.CAR_LIKE
TWO_TRAILER = _impl.TWO_TRAILER
PC_COMPONENTS = _impl.PC_COMPONENTS
N_STATES = _impl.N_STATES
propagate_intervals = _impl.propagate_intervals
rollout = _impl.rollout

KIND_CODES = {"car_like": CAR_LIKE, "two_trailer": TWO_TRAILER}


def kind_code(kind) -> int:
    """Map a VehicleKind (or its value string) to the kernel's kind code."""
    return KIND_CODES[getattr(kind, "value", kind)]
