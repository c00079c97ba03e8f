"""Hot row-set scans, compiled when available.

The compiled extension is used unless it failed to build or the
``SUBMX_BACKEND`` environment variable is set to ``numpy``.
"""
from __future__ import annotations

import os
from types import ModuleType

from . import _fallback

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None

_BACKENDS: dict[str, ModuleType | None] = {"cython": _ckernels, "numpy": _fallback}


def get_backend(name: str) -> ModuleType:
    if name not in _BACKENDS:
        raise ValueError(f"unknown backend {name!r}; choose from {sorted(_BACKENDS)}")
    mod = _BACKENDS[name]
    if mod is None:
        raise ImportError("compiled kernels are not built; reinstall with Cython available")
    return mod


def available_backends() -> list[str]:
    return [name for name, mod in _BACKENDS.items() if mod is not None]


def _select() -> str:
    wanted = os.environ.get("SUBMX_BACKEND", "auto").lower()
    if wanted == "auto":
        return "cython" if _ckernels is not None else "numpy"
    get_backend(wanted)
    return wanted


BACKEND = _select()
_active = get_backend(BACKEND)
census_scan = _active.census_scan
global_max_scan = _active.global_max_scan

__all__ = ["BACKEND", "available_backends", "census_scan", "get_backend", "global_max_scan"]
