"""Pick the kernel implementation at import time.

Set ``GHAWKES_PURE_PYTHON=1`` to force the fallback even when the compiled
extension is importable.
"""

import os

from . import _pycore

try:
    from . import _core as _compiled
except ImportError:  # extension not built
    _compiled = None

if _compiled is not None and not os.environ.get("GHAWKES_PURE_PYTHON"):
    core = _compiled
    BACKEND = "cython"
else:
    core = _pycore
    BACKEND = "python"

STATUS_NAMES = {
    _pycore.OK: "ok",
    _pycore.NEED_UNIFORMS: "need-uniforms",
    _pycore.NEED_CAPACITY: "need-capacity",
    _pycore.DOMINATION: "domination-violation",
    _pycore.BAD_INTENSITY: "bad-intensity",
    _pycore.TOO_MANY_EVENTS: "too-many-events",
}


def get_core(name: str | None = None):
    """Kernel module by name (``'cython'`` or ``'python'``); default is the active one."""
    if name is None:
        return core
    if name == "python":
        return _pycore
    if name == "cython":
        if _compiled is None:
            raise ImportError("compiled extension ghawkes._core is not built")
        return _compiled
    raise ValueError(f"unknown backend {name!r}")


def available_backends() -> list:
    return ["python"] + (["cython"] if _compiled is not None else [])
