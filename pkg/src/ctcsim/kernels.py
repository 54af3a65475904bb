"""Kernel backend selection.

The compiled ``_kernels`` extension is used when importable; otherwise the
pure-Python ``_kernels_py`` module. Setting ``CTCSIM_PURE_PYTHON=1`` forces
the fallback.
"""
import os

if os.environ.get("CTCSIM_PURE_PYTHON"):
    from ctcsim import _kernels_py as _impl
    BACKEND = "python"
else:
    try:
        from ctcsim import _kernels as _impl
        BACKEND = "compiled"
    except ImportError:
        from ctcsim import _kernels_py as _impl
        BACKEND = "python"

orbit = _impl.orbit
jacobi_eigh = _impl.jacobi_eigh

__all__ = ["BACKEND", "orbit", "jacobi_eigh"]
