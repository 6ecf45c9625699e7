"""Hot-loop kernels with two interchangeable backends.

The SMO pair-update loop and the CART split scan dominate training time.
Both exist twice with identical semantics and floating-point operation
order: a Cython extension (built by setup.py) and a numpy fallback.  The
compiled backend is picked at import when present; set ``LPSKIT_PURE=1``
to force the fallback (used by the parity tests and the benchmark).
"""

import os

if os.environ.get("LPSKIT_PURE") == "1":
    from . import _pykernels as _impl

    BACKEND = "pure"
else:
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]

        BACKEND = "compiled"
    except ImportError:
        from . import _pykernels as _impl  # type: ignore[no-redef]

        BACKEND = "pure"

smo_solve = _impl.smo_solve
best_split = _impl.best_split

__all__ = ["BACKEND", "smo_solve", "best_split"]
