"""Kernel backend selection.

The compiled extension is used when it imports; otherwise, or when
``SCENEPARSE_PURE_PYTHON=1`` is set, the pure-Python twins are used.
``BACKEND`` names the active one.
"""
import logging
import os

from sceneparse import _kernels_py

logger = logging.getLogger(__name__)

_BACKENDS = {"python": _kernels_py}

try:
    from sceneparse import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None
else:
    _BACKENDS["cython"] = _compiled

if _compiled is not None and os.environ.get("SCENEPARSE_PURE_PYTHON", "") not in ("1", "true"):
    BACKEND = "cython"
else:
    BACKEND = "python"
    if _compiled is None:
        logger.debug("compiled kernels unavailable, using pure-Python fallback")

_impl = _BACKENDS[BACKEND]

segment_graph = _impl.segment_graph
greedy_match = _impl.greedy_match
maxflow = _impl.maxflow


def available_backends():
    return sorted(_BACKENDS)


def get_backend(name):
    """Return the kernel module for ``name`` (``"cython"`` or ``"python"``)."""
    try:
        return _BACKENDS[name]
    except KeyError:
        raise ValueError(f"kernel backend {name!r} is not available") from None
