"""Select the path-kernel implementation at import time.

The compiled extension is used when it imports; setting
``SOLAR_PLANNER_BACKEND=python`` forces the numpy fallback.
"""

from __future__ import annotations

import os

from . import _kernels_py

_kernels = None
if os.environ.get("SOLAR_PLANNER_BACKEND", "").lower() != "python":
    try:
        from . import _kernels  # type: ignore[no-redef]
    except ImportError:
        _kernels = None

kernels = _kernels if _kernels is not None else _kernels_py
BACKEND = "compiled" if _kernels is not None else "python"


def get_kernels(name: str | None = None):
    """Kernel module by name: ``"compiled"``, ``"python"`` or the import-time default."""
    if name is None:
        return kernels
    if name == "python":
        return _kernels_py
    if name == "compiled":
        if _kernels is None:
            raise ImportError("compiled kernels are not available")
        return _kernels
    raise ValueError(f"unknown backend {name!r}")
