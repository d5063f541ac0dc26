"""Kernel backend selection.

The compiled extension is used when it imports; set
``TROPSLAG_PURE_PYTHON=1`` to force the numpy fallback.
"""

import os

BACKEND = "python"
if os.environ.get("TROPSLAG_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from ._ckernels import batch_roots, laurent_eval, segment_distances

        BACKEND = "cython"
    except ImportError:  # pragma: no cover - depends on the build
        pass

if BACKEND == "python":
    from ._fallback import batch_roots, laurent_eval, segment_distances

__all__ = ["BACKEND", "batch_roots", "laurent_eval", "segment_distances"]
