"""Kernel dispatch: compiled extension when importable, numpy otherwise.

Set ``COBEAM_PURE_PYTHON=1`` to force the numpy fallback.
"""

import os

import numpy as np

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if os.environ.get("COBEAM_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _compiled
    except ImportError:  # extension not built
        pass
    else:
        _impl = _compiled
        BACKEND = "compiled"


def gains_from_beams(h, w):
    return _impl.gains_from_beams(np.ascontiguousarray(h, dtype=complex),
                                  np.ascontiguousarray(w, dtype=complex))


def gains_from_covs(h, W):
    return _impl.gains_from_covs(np.ascontiguousarray(h, dtype=complex),
                                 np.ascontiguousarray(W, dtype=complex))


def signal_interference(G, noise):
    return _impl.signal_interference(np.ascontiguousarray(G, dtype=float),
                                     np.ascontiguousarray(noise, dtype=float))


def sbf_user_powers(mu, lam, coef, interf, scale, rcond):
    return _impl.sbf_user_powers(float(mu), np.ascontiguousarray(lam, dtype=float),
                                 np.ascontiguousarray(coef, dtype=float),
                                 np.ascontiguousarray(interf, dtype=float),
                                 np.ascontiguousarray(scale, dtype=float), float(rcond))
