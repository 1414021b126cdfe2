"""Backend selection for the hot loops.

The compiled extension is used when it imports; setting ``GEFSPLIT_BACKEND=python``
forces the numpy fallback.
"""

import os

from . import _fallback

BACKEND = "python"
fstar_eval = _fallback.fstar_eval
aberth = _fallback.aberth

if os.environ.get("GEFSPLIT_BACKEND", "").lower() != "python":
    try:
        from . import _core
    except ImportError:  # extension not built
        _core = None
    if _core is not None:
        BACKEND = "compiled"
        fstar_eval = _core.fstar_eval
        aberth = _core.aberth


def backends():
    """Mapping of available backend names to their kernel modules."""
    out = {"python": _fallback}
    try:
        from . import _core as compiled

        out["compiled"] = compiled
    except ImportError:
        pass
    return out
