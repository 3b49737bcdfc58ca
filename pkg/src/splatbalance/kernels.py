"""Kernel backend selection.

The compiled ``_core`` extension is used when it imports; otherwise the numpy
fallback in ``_pycore``. Set ``SPLATBALANCE_BACKEND=python`` to force the fallback.
"""

import os

from . import _pycore

BACKEND = "python"
_impl = _pycore
if os.environ.get("SPLATBALANCE_BACKEND", "").lower() != "python":
    try:
        from . import _core as _impl  # noqa: F811
        BACKEND = "cython"
    except ImportError:
        _impl = _pycore

rasterize = _impl.rasterize
neighbor_counts = _impl.neighbor_counts
segment_counts = _impl.segment_counts


def available_backends() -> dict:
    out = {"python": _pycore}
    try:
        from . import _core
        out["cython"] = _core
    except ImportError:
        pass
    return out
