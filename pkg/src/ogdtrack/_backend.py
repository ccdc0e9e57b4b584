"""Rollout backend selection.

The compiled kernel is preferred when it imported cleanly; otherwise the
pure-Python loop is used. Both produce the same trajectories (the compiled
kernel is validated against the reference loop in the test suite)."""

import numpy as np

from . import _pyloop
from .errors import NumericalFailureError

try:
    from . import _fastloop

    HAVE_COMPILED = True
except ImportError:  # extension not built; pure-Python fallback
    _fastloop = None
    HAVE_COMPILED = False

BACKENDS = ("auto", "compiled", "python")


def default_backend() -> str:
    return "compiled" if HAVE_COMPILED else "python"


def resolve_backend(name: str = "auto") -> str:
    if name not in BACKENDS:
        raise ValueError(f"unknown backend {name!r}, expected one of {BACKENDS}")
    if name == "auto":
        return default_backend()
    if name == "compiled" and not HAVE_COMPILED:
        raise RuntimeError("compiled backend requested but the extension is not built")
    return name


def rollout_quadratic(sys, ctrb, gamma_v, gamma_x, q, r, x0, v0, theta, eta,
                      backend: str = "auto"):
    """Dispatch a quadratic-cost closed-loop run to the selected backend."""
    which = resolve_backend(backend)
    if which == "compiled":
        out = _fastloop.rollout_quadratic(
            np.ascontiguousarray(sys.A),
            np.ascontiguousarray(sys.B),
            np.ascontiguousarray(ctrb.A_mu),
            np.ascontiguousarray(ctrb.S_c),
            np.ascontiguousarray(ctrb.P),
            ctrb.mu,
            float(gamma_v),
            float(gamma_x),
            float(q),
            float(r),
            np.ascontiguousarray(x0, dtype=float).reshape(sys.n),
            np.ascontiguousarray(v0, dtype=float).reshape(sys.m),
            np.ascontiguousarray(theta, dtype=float),
            np.ascontiguousarray(eta, dtype=float),
        )
        if not all(np.all(np.isfinite(a)) for a in out):
            raise NumericalFailureError("closed-loop rollout produced non-finite values")
        return out
    return _pyloop.rollout_quadratic(
        sys, ctrb, gamma_v, gamma_x, q, r, x0, v0, theta, eta
    )
