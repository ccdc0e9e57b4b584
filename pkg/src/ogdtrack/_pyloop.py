"""Pure-Python rollout backend.

Drives the reference OGDController step by step with quadratic tracking
costs. This is the fallback when the compiled kernel is unavailable, and the
semantic reference the kernel is tested against.
"""

import numpy as np

from .cost_model import QuadraticTrackingCost
from .ogd_controller import OGDController


def rollout_quadratic(sys, ctrb, gamma_v, gamma_x, q, r, x0, v0, theta, eta):
    """Closed-loop run under quadratic tracking costs.

    theta is (T, n) and eta is (T, m), rows indexed by t-1. Returns per-step
    arrays (x, u, v, g, x_hat), each with T rows.
    """
    theta = np.asarray(theta, dtype=float)
    eta = np.asarray(eta, dtype=float)
    T = theta.shape[0]
    n, m, mu = sys.n, sys.m, ctrb.mu

    ctl = OGDController(sys, ctrb, gamma_v, gamma_x, v0)
    costs = [QuadraticTrackingCost(theta[t0], eta[t0], q=q, r=r) for t0 in range(T)]

    x = np.empty((T, n))
    u = np.empty((T, m))
    v = np.empty((T, m))
    g = np.empty((T, mu * m))
    x_hat = np.empty((T, n))

    x_prev = np.asarray(x0, dtype=float).reshape(n)
    for t0 in range(T):
        u_t = ctl.step(x_prev, costs[t0 - 1] if t0 >= 1 else None)
        x_prev = sys.A @ x_prev + sys.B @ u_t
        x[t0] = x_prev
        u[t0] = u_t
        v[t0] = ctl.v
        g[t0] = ctl.g_buffer[0]
        x_hat[t0] = ctl.x_hat_last
    return x, u, v, g, x_hat
