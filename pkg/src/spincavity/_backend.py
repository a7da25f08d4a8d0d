"""Select the compiled kernels when available, else the NumPy fallback.

Set ``SPINCAVITY_PURE=1`` in the environment to force the fallback.
"""
import os

from . import _fallback

kernels = _fallback
name = "python"

if os.environ.get("SPINCAVITY_PURE", "") not in ("1", "true", "yes"):
    try:
        from . import _core
    except ImportError:  # pragma: no cover - depends on the build
        pass
    else:
        kernels = _core
        name = "compiled"

__all__ = ["kernels", "name"]
