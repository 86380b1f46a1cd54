"""Select the kernel backend at import time.

The compiled ``_ckernels`` module is used when it was built; otherwise, or
when the environment variable ``LDPC_LAB_PURE_PYTHON`` is set to a
non-empty value, the numpy fallback is used.
"""
import os

from . import _pykernels

if os.environ.get("LDPC_LAB_PURE_PYTHON"):
    backend = _pykernels
else:
    try:
        from . import _ckernels as backend
    except ImportError:
        backend = _pykernels

DECODES, STUCK, UNDECIDED = _pykernels.DECODES, _pykernels.STUCK, _pykernels.UNDECIDED


def available():
    """Names of the backends importable in this environment."""
    names = ["python"]
    try:
        from . import _ckernels  # noqa: F401
    except ImportError:
        pass
    else:
        names.insert(0, "cython")
    return names


def get(name=None):
    if name is None:
        return backend
    if name == "python":
        return _pykernels
    if name == "cython":
        from . import _ckernels

        return _ckernels
    raise ValueError(f"unknown backend {name!r}")
