"""Integrator backend selection.

Prefers the compiled extension, falls back to the pure-Python twin.  Set
TMDC_KERNEL_BACKEND=python|cython to force a choice (the two are
bit-identical by construction; a test enforces it).
"""

from __future__ import annotations

import os

from . import _kernels_py


def _load(name: str):
    if name == "python":
        return _kernels_py
    if name == "cython":
        from . import _kernels  # raises ImportError if the build was skipped

        return _kernels
    raise ValueError(f"unknown kernel backend {name!r} (use 'python' or 'cython')")


_forced = os.environ.get("TMDC_KERNEL_BACKEND")
if _forced:
    _impl = _load(_forced)
else:
    try:
        _impl = _load("cython")
    except ImportError:
        _impl = _kernels_py

BACKEND = _impl.BACKEND_NAME
integrate = _impl.integrate


def available_backends() -> list[str]:
    out = ["python"]
    try:
        _load("cython")
        out.append("cython")
    except ImportError:
        pass
    return out


def get_backend(name: str):
    """Return a specific backend's integrate function (for tests/benchmarks)."""
    return _load(name).integrate


def use(name: str) -> str:
    """Switch the process-wide backend; raises ValueError if unavailable."""
    global _impl, BACKEND, integrate
    try:
        impl = _load(name)
    except ImportError as e:
        raise ValueError(f"backend {name!r} is not available: {e}") from None
    _impl = impl
    BACKEND = impl.BACKEND_NAME
    integrate = impl.integrate
    return BACKEND
