"""Kernel backend selection.

The compiled core is used when importable. Setting ``MILE_BACKEND=python``
forces the numpy fallback; ``MILE_BACKEND=cython`` makes a missing
extension an import error instead of a silent fallback.
"""

import importlib
import logging
import os

log = logging.getLogger(__name__)

_MODULES = {"cython": "mile._ckernels", "python": "mile._pykernels"}


def load(name):
    """Import the kernel module for backend ``name``."""
    return importlib.import_module(_MODULES[name])


def available():
    """Names of the backends importable in this environment."""
    out = []
    for name in _MODULES:
        try:
            load(name)
        except ImportError:
            continue
        out.append(name)
    return out


def _select():
    forced = os.environ.get("MILE_BACKEND", "").strip().lower()
    if forced == "python":
        return "python", load("python")
    try:
        return "cython", load("cython")
    except ImportError:
        if forced == "cython":
            raise
        log.info("compiled kernels unavailable; using numpy fallback")
        return "python", load("python")


NAME, kernels = _select()
