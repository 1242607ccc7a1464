"""Numeric kernel dispatch.

The compiled backend is the default; set LMDKIT_DISABLE_NUMBA=1 to force
the pure-numpy fallback. Both backends implement the same contracts and
return the same values, so everything above this layer is backend-blind.
"""

import os

_flag = os.environ.get("LMDKIT_DISABLE_NUMBA", "").strip().lower()
_disabled = _flag in {"1", "true", "yes", "on"}

if _disabled:
    from . import numpy_backend as _impl

    BACKEND = "numpy"
else:
    try:
        from . import numba_backend as _impl

        BACKEND = "numba"
    except ImportError:
        from . import numpy_backend as _impl

        BACKEND = "numpy"

traverse_beams = _impl.traverse_beams
shell_sector_bins = _impl.shell_sector_bins
lof_scores = _impl.lof_scores
histogram_intersection = _impl.histogram_intersection
db_self_hamming = _impl.db_self_hamming
nn_d_scores = _impl.nn_d_scores
grow_rooms = _impl.grow_rooms
orientation_entropies = _impl.orientation_entropies
raytrace_rects = _impl.raytrace_rects

__all__ = [
    "BACKEND",
    "traverse_beams",
    "shell_sector_bins",
    "lof_scores",
    "histogram_intersection",
    "db_self_hamming",
    "nn_d_scores",
    "grow_rooms",
    "orientation_entropies",
    "raytrace_rects",
]
