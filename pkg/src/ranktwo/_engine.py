"""Backend selection: compiled kernels when the extension built, else Python.

``get_engine("auto")`` prefers the compiled module; "python" and "compiled"
force a backend (the latter raising if the extension is unavailable, so
acceptance runs fail loudly instead of silently taking hours).
"""

from __future__ import annotations

from . import _engine_py

try:
    from . import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None

HAVE_COMPILED = _compiled is not None


def get_engine(name: str = "auto"):
    if name == "auto":
        return _compiled if HAVE_COMPILED else _engine_py
    if name == "python":
        return _engine_py
    if name == "compiled":
        if not HAVE_COMPILED:
            raise RuntimeError(
                "compiled kernels requested but ranktwo._kernels is not built; "
                "reinstall with `pip install -e . --no-build-isolation`"
            )
        return _compiled
    raise ValueError(f"unknown engine {name!r} (use auto/compiled/python)")
