"""Likelihood kernels with a compiled fast path.

The compiled extension (designrl.kernels._native, built from Cython) is
preferred when importable; otherwise the numpy reference in pyref is used.
Set DESIGNRL_KERNELS=python or =native to force a backend; native raises
if the extension is unavailable.
"""

import os

from . import pyref

_choice = os.environ.get("DESIGNRL_KERNELS", "auto")
if _choice not in ("auto", "native", "python"):
    raise RuntimeError(f"DESIGNRL_KERNELS must be auto|native|python, got {_choice!r}")

_impl = None
if _choice in ("auto", "native"):
    try:
        from . import _native as _impl
    except ImportError:
        if _choice == "native":
            raise
if _impl is None:
    _impl = pyref

BACKEND = _impl.BACKEND_NAME

loc_loglik_batch = _impl.loc_loglik_batch
ces_loglik_batch = _impl.ces_loglik_batch
ces_utility = pyref.ces_utility
ces_obs_params = pyref.ces_obs_params
