"""Hot pixel kernels with a numba backend and a pure-numpy fallback.

The backend is chosen once at import from the MATT_NUMBA environment
variable: unset/1 selects the numba-jitted kernels when numba imports,
0/off/false forces the pure-numpy path. `set_backend()` switches at
runtime (used by the benchmark and the backend-equivalence tests).
"""

from __future__ import annotations

import os

from . import numpy_backend

_KERNEL_NAMES = (
    "rle_encode",
    "rle_decode",
    "label_components",
    "trace_contour",
    "simplify_polyline",
    "sep_convolve",
    "sobel_magnitude",
)

_backends: dict[str, object] = {"numpy": numpy_backend}
_active = "numpy"


def _numba_requested() -> bool:
    return os.environ.get("MATT_NUMBA", "1").strip().lower() not in ("0", "off", "false")


def _load_numba_backend():
    if "numba" not in _backends:
        from . import numba_backend

        _backends["numba"] = numba_backend
    return _backends["numba"]


def available_backends() -> tuple[str, ...]:
    try:
        _load_numba_backend()
    except ImportError:
        return ("numpy",)
    return ("numpy", "numba")


def set_backend(name: str) -> None:
    global _active
    if name == "numba":
        _load_numba_backend()
    elif name != "numpy":
        raise ValueError(f"unknown kernel backend: {name!r}")
    _active = name
    module = _backends[name]
    for fn in _KERNEL_NAMES:
        globals()[fn] = getattr(module, fn)


def active_backend() -> str:
    return _active


if _numba_requested():
    try:
        set_backend("numba")
    except ImportError:
        set_backend("numpy")
else:
    set_backend("numpy")
