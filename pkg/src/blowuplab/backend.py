"""Kernel selection: compiled extension when importable, numpy fallback otherwise.

Set ``BLOWUPLAB_PURE_PYTHON=1`` to force the fallback.
"""

from __future__ import annotations

import os

from . import _fallback

NAME = "python"
kernels = _fallback

if os.environ.get("BLOWUPLAB_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _compiled
    except ImportError:
        pass
    else:
        kernels = _compiled
        NAME = "compiled"


def get(name: str | None = None):
    """Return a kernel module by name ('compiled', 'python') or the active one."""
    if name is None:
        return kernels
    if name == "python":
        return _fallback
    if name == "compiled":
        from . import _kernels

        return _kernels
    raise ValueError(f"unknown backend {name!r}")
