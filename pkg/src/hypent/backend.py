"""Kernel backend selection.

The hot numeric kernels exist twice: a compiled Cython module
(``hypent._kernels_c``) and a numpy reference (``hypent._kernels_py``).
The compiled one is preferred when importable; ``HYPENT_BACKEND`` forces
a choice (``compiled`` raises if the extension is missing, ``python``
skips it).
"""

import os

from . import _kernels_py

_requested = os.environ.get("HYPENT_BACKEND", "").strip().lower()

if _requested in ("python", "py"):
    kernels = _kernels_py
    BACKEND = "python"
elif _requested in ("", "compiled", "c", "cython"):
    try:
        from . import _kernels_c as kernels  # type: ignore[no-redef]

        BACKEND = "compiled"
    except ImportError:
        if _requested:
            raise
        kernels = _kernels_py
        BACKEND = "python"
else:
    raise RuntimeError(
        f"HYPENT_BACKEND={_requested!r} not recognized (use 'compiled' or 'python')"
    )


def backend_name():
    """Name of the kernel backend selected at import time."""
    return BACKEND
