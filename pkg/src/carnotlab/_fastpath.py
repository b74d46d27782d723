"""Backend selection for the hot kernels.

The compiled Cython extension `carnotlab._core` is preferred when present;
the numpy reference `carnotlab._ref` is the fallback.  Force a choice with
CARNOTLAB_BACKEND={auto, compiled, numpy}.  The active backend name is echoed
into every resolved run config, since outputs are byte-reproducible per
backend (Philox bits are identical across backends; the quadrature sums may
differ in the last ulp).
"""

from __future__ import annotations

import os

from . import _ref

_requested = os.environ.get("CARNOTLAB_BACKEND", "auto").strip().lower()

if _requested not in ("auto", "compiled", "numpy"):
    raise RuntimeError(
        f"CARNOTLAB_BACKEND={_requested!r}: expected auto, compiled, or numpy")

_impl = None
if _requested in ("auto", "compiled"):
    try:
        from . import _core as _impl  # type: ignore[no-redef]
    except ImportError:
        if _requested == "compiled":
            raise RuntimeError(
                "CARNOTLAB_BACKEND=compiled but carnotlab._core is not built; "
                "run `pip install -e . --no-build-isolation` with Cython available")
        _impl = None
if _impl is None:
    _impl = _ref

BACKEND = _impl.BACKEND_NAME

philox4x32 = _impl.philox4x32
htype_m1_batch = _impl.htype_m1_batch


def available_backends():
    names = ["numpy"]
    try:
        from . import _core  # noqa: F401
        names.insert(0, "compiled")
    except ImportError:
        pass
    return names
