"""Kernel backend selection.

The compiled ``_core`` extension is used when importable; otherwise the numpy
implementation in ``_pycore``. Set ``VQFIELD_BACKEND`` to ``python`` or
``compiled`` to force one.
"""

import importlib
import os

BACKENDS = {"compiled": "vqfield._core", "python": "vqfield._pycore"}


def load(name: str):
    """Import the kernel module for ``name`` ('compiled' or 'python')."""
    return importlib.import_module(BACKENDS[name])


def available() -> list[str]:
    names = []
    for name in BACKENDS:
        try:
            load(name)
        except ImportError:
            continue
        names.append(name)
    return names


def _select():
    requested = os.environ.get("VQFIELD_BACKEND", "auto").lower()
    if requested not in ("auto", *BACKENDS):
        raise ImportError(f"unknown VQFIELD_BACKEND {requested!r}")
    if requested == "python":
        return "python", load("python")
    try:
        return "compiled", load("compiled")
    except ImportError:
        if requested == "compiled":
            raise
        return "python", load("python")


NAME, kernels = _select()
