"""Kernel backend selection.

The compiled backend is used when its extension module imported cleanly;
otherwise the pure-Python reference backend takes over.  Set
RENEWBOUND_BACKEND=pure (or =compiled) to force the choice.  Both backends
expose the same functions and produce bit-identical output streams.
"""

import os

from . import _pure
from .errors import CapExceededError, DensityFloorError, KernelError

try:
    from . import _core
except ImportError:
    _core = None

_FORCED = os.environ.get("RENEWBOUND_BACKEND", "").strip().lower()
if _FORCED == "pure":
    active = _pure
elif _FORCED == "compiled":
    if _core is None:
        raise ImportError(
            "RENEWBOUND_BACKEND=compiled but the compiled kernel is unavailable"
        )
    active = _core
else:
    active = _core if _core is not None else _pure

backend_name = active.name

__all__ = [
    "active",
    "backend_name",
    "CapExceededError",
    "DensityFloorError",
    "KernelError",
    "_pure",
    "_core",
]
