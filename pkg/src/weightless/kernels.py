"""Backend selection for the hot kernels.

The compiled extension ``_native`` is used when it imports; otherwise the
numpy reference in ``_pykernels`` is used. Set ``WEIGHTLESS_PURE_PYTHON=1``
to force the fallback.
"""

import os

from . import _pykernels as python_backend

native_backend = None
if os.environ.get("WEIGHTLESS_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _native as native_backend
    except ImportError:  # extension not built
        native_backend = None

_impl = native_backend if native_backend is not None else python_backend
BACKEND = "native" if native_backend is not None else "python"

causal_moving_average = _impl.causal_moving_average
median_filter = _impl.median_filter
planar_substeps = _impl.planar_substeps
