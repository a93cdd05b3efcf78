"""Backend selection for the hot simulation loops.

The compiled extension ``_kernel`` is used when importable; otherwise the
pure-Python ``_pykernel`` (assembled from the public controller blocks).
Set ``NONCOLLOCATED_BACKEND=python`` to force the fallback.
"""

from __future__ import annotations

import os

from . import _pykernel

try:
    from . import _kernel
except ImportError:  # extension not built
    _kernel = None

_BACKENDS = {"python": _pykernel}
if _kernel is not None:
    _BACKENDS["cython"] = _kernel


def available() -> list[str]:
    return list(_BACKENDS)


def default_backend() -> str:
    forced = os.environ.get("NONCOLLOCATED_BACKEND")
    if forced:
        if forced not in _BACKENDS:
            raise RuntimeError(f"backend {forced!r} unavailable; have {available()}")
        return forced
    return "cython" if "cython" in _BACKENDS else "python"


def get_backend(name: str | None = None):
    name = name or default_backend()
    try:
        return _BACKENDS[name]
    except KeyError:
        raise ValueError(f"unknown or unavailable backend {name!r}; have {available()}") from None


BACKEND = default_backend()
