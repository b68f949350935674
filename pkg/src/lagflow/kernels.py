"""Kernel backend selection.

The compiled extension ``lagflow._core`` is used when it imports; otherwise
the numpy/pure-Python implementations in ``lagflow._pykernels`` take over.
"""

from . import _pykernels

try:
    from . import _core
except ImportError:  # extension not built
    _core = None

BACKENDS = {"python": _pykernels}
if _core is not None:
    BACKENDS["compiled"] = _core

DEFAULT = "compiled" if _core is not None else "python"


def get(name=None):
    """Return the kernel module called ``name`` (default: best available)."""
    name = name or DEFAULT
    try:
        return BACKENDS[name]
    except KeyError:
        raise ValueError(f"kernel backend {name!r} unavailable; have {sorted(BACKENDS)}") from None
