"""Backend selection for the sweep kernels.

The compiled extension is used when it imports; otherwise, or when the
environment variable ``PLAPMVF_PURE_PYTHON`` is set to a non-empty value
other than ``0``, the NumPy implementation is used.  ``BACKEND`` names the
active choice.
"""

from __future__ import annotations

import os

from . import _kernels_py

_force_python = os.environ.get("PLAPMVF_PURE_PYTHON", "") not in ("", "0")

if _force_python:
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]
        BACKEND = "compiled"
    except ImportError:  # pragma: no cover - depends on the build
        _impl = _kernels_py
        BACKEND = "python"

jacobi_sweep = _impl.jacobi_sweep
gauss_seidel_sweep = _impl.gauss_seidel_sweep
operator_values = _impl.operator_values

# Exponents with closed-form J_p paths; everything else goes through exp/log.
_FAST = {2.0: 1, 3.0: 2, 4.0: 3, 1.5: 4}


def jp_mode(p: float) -> int:
    return _FAST.get(float(p), 0)


def backend_module(name: str):
    """Return a specific backend module (``"compiled"`` or ``"python"``)."""
    if name == "python":
        return _kernels_py
    if name == "compiled":
        from . import _kernels  # type: ignore[attr-defined]
        return _kernels
    raise ValueError(f"unknown backend {name!r}")
