"""Kernel dispatch: compiled extension when importable, numpy otherwise.

Set ``MORSEFLOW_PURE_PYTHON=1`` before import to force the fallback.
"""
import logging
import os

import numpy as np

from . import _kernels_py

logger = logging.getLogger(__name__)

BACKEND = "python"
_impl = _kernels_py

if os.environ.get("MORSEFLOW_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _compiled
    except ImportError:  # extension not built
        logger.debug("compiled kernels unavailable, using numpy fallback")
    else:
        _impl = _compiled
        BACKEND = "compiled"


def element_matrices(e1, e2, a_tri, area_scale):
    return _impl.element_matrices(
        np.ascontiguousarray(e1, dtype=np.float64),
        np.ascontiguousarray(e2, dtype=np.float64),
        np.ascontiguousarray(a_tri, dtype=np.float64),
        np.ascontiguousarray(area_scale, dtype=np.float64),
    )


def lower_link_runs(rank, link_ptr, link_idx, link_closed):
    return _impl.lower_link_runs(
        np.ascontiguousarray(rank, dtype=np.int64),
        np.ascontiguousarray(link_ptr, dtype=np.int64),
        np.ascontiguousarray(link_idx, dtype=np.int64),
        np.ascontiguousarray(link_closed, dtype=np.uint8),
    )


def segment_sum(values, starts):
    return _impl.segment_sum(
        np.ascontiguousarray(values, dtype=np.float64),
        np.ascontiguousarray(starts, dtype=np.int64),
    )
