"""Kernel backend selection.

The compiled extension is preferred when importable; the pure-NumPy
port is the fallback.  STOSQP_BACKEND=auto|compiled|pure overrides the
choice at import time (forcing "compiled" raises if the extension is
missing, so CI can assert the build actually happened).
"""

import os

_choice = os.environ.get("STOSQP_BACKEND", "auto").strip().lower()
if _choice not in ("auto", "compiled", "pure"):
    raise ImportError(
        "STOSQP_BACKEND must be one of auto/compiled/pure, got %r" % _choice
    )

if _choice == "pure":
    from stosqp import _kernels_py as _impl

    BACKEND = "pure"
else:
    try:
        from stosqp import _kernels as _impl  # type: ignore[no-redef]

        BACKEND = "compiled"
    except ImportError:
        if _choice == "compiled":
            raise
        from stosqp import _kernels_py as _impl  # type: ignore[no-redef]

        BACKEND = "pure"

ldl_factor = _impl.ldl_factor
ldl_solve = _impl.ldl_solve


def get_backend():
    """Name of the kernel backend in use: "compiled" or "pure"."""
    return BACKEND
