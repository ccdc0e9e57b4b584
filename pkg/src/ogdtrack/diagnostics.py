"""Structural diagnostics: operator identities and along-run consistency.

These checks are implied by the construction of the controller and the
controllability operators; a failure means an implementation bug. They back
the `verify` CLI subcommand and the property tests.
"""

import numpy as np

from .lin_system import ControllabilityData, LinearSystem
from .ogd_controller import predict_state_recursive
from .reports import CheckReport, DiagnosticReport

IDENTITY_TOL = 1e-10
RUN_TOL = 1e-9


def _maxabs(M) -> float:
    M = np.asarray(M)
    return float(np.max(np.abs(M))) if M.size else 0.0


def matrix_identity_report(sys: LinearSystem, ctrb: ControllabilityData,
                           tol: float = IDENTITY_TOL) -> CheckReport:
    """Entrywise identities tying S_c, W, e, and P together."""
    report = CheckReport()
    mu, m, n = ctrb.mu, sys.m, sys.n

    report.add("right_inverse", _maxabs(ctrb.S_c @ ctrb.P - np.eye(n)), tol,
               _maxabs(ctrb.S_c @ ctrb.P - np.eye(n)) <= tol, "S_c P = I")
    W_mu = np.linalg.matrix_power(ctrb.W, mu)
    report.add("shift_nilpotent", _maxabs(W_mu), tol, _maxabs(W_mu) <= tol, "W^mu = 0")

    lhs = ctrb.S_c @ ctrb.W + ctrb.A_mu @ sys.B @ ctrb.e
    resid = _maxabs(lhs - sys.A @ ctrb.S_c)
    report.add("shift_commutation", resid, tol, resid <= tol, "S_c W + A^mu B e = A S_c")

    for k in range(mu):
        acc = np.zeros((n, mu * m))
        Ai = np.eye(n)
        for i in range(k + 1):
            acc += Ai @ sys.B @ ctrb.e @ np.linalg.matrix_power(ctrb.W, k - i)
            Ai = sys.A @ Ai
        rhs = ctrb.S_c @ np.linalg.matrix_power(ctrb.W.T, mu - 1 - k)
        resid = _maxabs(acc - rhs)
        report.add(f"partial_sum_identity_k{k}", resid, tol, resid <= tol,
                   "sum_i A^i B e W^(k-i) = S_c (W^T)^(mu-1-k)")

    z = np.arange(1.0, mu * m + 1.0)
    resid = _maxabs(ctrb.e @ z - z[-m:])
    report.add("extractor_last_block", resid, tol, resid <= tol,
               "e z is the last m entries of z")
    return report


def correction_feasibility(run, ctrb: ControllabilityData, seq,
                           gamma_x: float, tol: float = RUN_TOL) -> DiagnosticReport:
    """S_c g_t = -gamma_x * grad f^x_{t-1}(x_hat) at every recorded step."""
    T = run.x.shape[0]
    worst = 0.0
    for t0 in range(T):
        if t0 == 0:
            grad = np.zeros(run.x.shape[1])  # L_0 is centered at the first prediction
        else:
            grad = seq[t0 - 1].grad_x(run.x_hat[t0])
        worst = max(worst, _maxabs(ctrb.S_c @ run.g[t0] + gamma_x * grad))
    detail = CheckReport()
    detail.add("correction_feasibility", worst, tol, worst <= tol)
    return DiagnosticReport("correction_feasibility", worst <= tol, worst, detail)


def recursion_equivalence(run, sys: LinearSystem, ctrb: ControllabilityData,
                          tol: float = RUN_TOL) -> DiagnosticReport:
    """Recorded predictions satisfy the one-step prediction recursion."""
    T = run.x.shape[0]
    worst = 0.0
    for s in range(1, T):  # prediction made at step s+1 vs step s (0-indexed s)
        rec = predict_state_recursive(
            sys, ctrb, run.x_hat[s - 1], run.v[s], run.v[s - 1], run.g[s - 1]
        )
        worst = max(worst, _maxabs(rec - run.x_hat[s]))
    detail = CheckReport()
    detail.add("prediction_recursion", worst, tol, worst <= tol)
    return DiagnosticReport("prediction_recursion", worst <= tol, worst, detail)


def stacked_closed_loop_identity(run, sys: LinearSystem, ctrb: ControllabilityData,
                                 tol: float = RUN_TOL) -> DiagnosticReport:
    """Closed-loop states match the stacked-dynamics expansion.

    For each start step t, the state mu-1 steps later decomposes into the
    free response, the stacked input iterates (newest block first), the
    current correction, and shift-weighted later/earlier corrections.
    """
    T = run.x.shape[0]
    mu, m, n = ctrb.mu, sys.m, sys.n
    W_pows = [np.linalg.matrix_power(ctrb.W, i) for i in range(mu)]
    x_all = np.vstack([run.x0, run.x])  # x_all[t] is x_t

    def g_at(t):  # g_t with zero padding before t = 1
        return run.g[t - 1] if t >= 1 else np.zeros(mu * m)

    worst = 0.0
    for t in range(1, T - mu + 2):
        V = np.concatenate([run.v[t + i - 1] for i in range(mu - 1, -1, -1)])
        z = ctrb.S_c @ (V + g_at(t))
        acc = ctrb.A_mu @ x_all[t - 1] + z
        for i in range(1, mu):
            acc += ctrb.S_c @ (W_pows[i].T @ g_at(t + i))
            acc += ctrb.S_c @ (W_pows[i] @ g_at(t - i))
        worst = max(worst, _maxabs(acc - x_all[t + mu - 1]))
    detail = CheckReport()
    detail.add("stacked_closed_loop", worst, tol, worst <= tol)
    return DiagnosticReport("stacked_closed_loop", worst <= tol, worst, detail)


def gradient_contraction_samples(num: int = 100, seed: int = 0, dim: int = 4,
                                 slack: float = 1e-12) -> DiagnosticReport:
    """One gradient step on a random strongly-convex smooth quadratic
    contracts the distance to the minimizer by at least 1 - alpha*gamma."""
    rng = np.random.default_rng(seed)
    worst = -np.inf
    ok = True
    for _ in range(num):
        alpha = rng.uniform(0.1, 2.0)
        l = alpha + rng.uniform(0.0, 3.0)
        evals = rng.uniform(alpha, l, size=dim)
        evals[0], evals[-1] = alpha, l  # hit the moduli exactly
        Q = np.linalg.qr(rng.standard_normal((dim, dim)))[0]
        H = Q @ np.diag(evals) @ Q.T
        theta = rng.standard_normal(dim)
        gamma = rng.uniform(0.1, 1.0) * 2.0 / (l + alpha)
        x0 = theta + rng.standard_normal(dim)
        x1 = x0 - gamma * (H @ (x0 - theta))
        lhs = np.linalg.norm(x1 - theta)
        rhs = (1.0 - alpha * gamma) * np.linalg.norm(x0 - theta) + slack
        worst = max(worst, lhs - rhs)
        ok = ok and lhs <= rhs
    detail = CheckReport()
    detail.add("gradient_contraction", worst, 0.0, ok,
               "||x1 - theta|| <= (1 - alpha gamma) ||x0 - theta||")
    return DiagnosticReport("gradient_contraction", ok, worst, detail)
