"""Hindsight benchmarks: the dynamics-feasible optimal trajectory and regret.

For quadratic costs the benchmark problem is solved exactly. The default
route eliminates the states through the dynamics and solves one symmetric
positive-definite system in the stacked inputs. That route forms powers A^t;
for unstable plants over long horizons those powers overflow once squared,
so a sparse KKT solve with states kept as variables takes over (it never
forms a matrix power). General convex costs run gradient descent on the
reduced problem.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .cost_model import CostSequence
from .errors import NoConvergenceError, NumericalFailureError
from .lin_system import LinearSystem, _as_vector

# Route guards on max |A^t| entry. Past REDUCED_GUARD the reduced Hessian's
# conditioning (~ |A^t|^2 / r) costs too many digits for the exact solve, so
# auto falls back to the KKT route; past OVERFLOW_GUARD even forming the
# powers is meaningless in doubles.
REDUCED_GUARD = 1e4
OVERFLOW_GUARD = 1e150


@dataclass(frozen=True)
class OptimalTrajectory:
    """Solution of min sum_t L_t(x_t, u_t) s.t. x_t = A x_{t-1} + B u_t."""

    x_star: np.ndarray  # (T, n)
    u_star: np.ndarray  # (T, m)
    total_cost: float
    method: str
    feasibility_residual: float
    stationarity_residual: float


def _rollout(sys: LinearSystem, x0: np.ndarray, U: np.ndarray) -> np.ndarray:
    X = np.empty((U.shape[0], sys.n))
    x = x0
    for t0 in range(U.shape[0]):
        x = sys.A @ x + sys.B @ U[t0]
        X[t0] = x
    return X


def _total_cost(seq: CostSequence, X: np.ndarray, U: np.ndarray) -> float:
    return float(sum(seq[t0].eval(X[t0], U[t0]) for t0 in range(len(seq))))


def _powers(sys: LinearSystem, T: int, guard: float):
    """A^0 .. A^T, or None past the point entries exceed the guard."""
    pows = [np.eye(sys.n)]
    ok = True
    for _ in range(T):
        if ok:
            nxt = sys.A @ pows[-1]
            if np.max(np.abs(nxt)) > guard:
                ok = False
                nxt = None
        else:
            nxt = None
        pows.append(nxt)
    return pows, ok


def _input_map(sys: LinearSystem, pows, T: int) -> np.ndarray:
    """Block lower-triangular map G with x = G U + (free response)."""
    n, m = sys.n, sys.m
    G = np.zeros((T * n, T * m))
    for t in range(1, T + 1):
        for j in range(1, t + 1):
            G[(t - 1) * n : t * n, (j - 1) * m : j * m] = pows[t - j] @ sys.B
    return G


def _reduced_quadratic(sys, seq, x0, pows):
    T = len(seq)
    n, m = sys.n, sys.m
    q, r = seq.moduli.l_x, seq.moduli.l_u
    thetas, etas = seq.minimizers()
    G = _input_map(sys, pows, T)
    c = np.concatenate([pows[t] @ x0 - thetas[t - 1] for t in range(1, T + 1)])
    eta_flat = etas.reshape(T * m)
    H = q * (G.T @ G) + r * np.eye(T * m)
    rhs = -q * (G.T @ c) + r * eta_flat
    U = np.linalg.solve(H, rhs).reshape(T, m)
    X = _rollout(sys, x0, U)
    grad = q * (G.T @ (G @ U.reshape(-1) + c)) + r * (U.reshape(-1) - eta_flat)
    feas = _feasibility_residual(sys, x0, X, U)
    return OptimalTrajectory(
        x_star=X,
        u_star=U,
        total_cost=_total_cost(seq, X, U),
        method="reduced",
        feasibility_residual=feas,
        stationarity_residual=float(np.linalg.norm(grad)),
    )


def _kkt_quadratic(sys, seq, x0):
    """Equality-constrained QP with states as variables, one sparse solve.

    Stationarity is reported as the Lagrangian residual: the reduced gradient
    is equivalent at the optimum but cannot be evaluated stably when A^t
    overflows, which is exactly when this route is selected.
    """
    T = len(seq)
    n, m = sys.n, sys.m
    q, r = seq.moduli.l_x, seq.moduli.l_u
    thetas, etas = seq.minimizers()
    nz = T * (n + m)

    H = sp.diags([q] * (T * n) + [r] * (T * m), format="csr")
    h = np.concatenate([q * thetas.reshape(-1), r * etas.reshape(-1)])

    rows, cols, vals = [], [], []
    for t in range(1, T + 1):
        r0 = (t - 1) * n
        for k in range(n):
            rows.append(r0 + k)
            cols.append((t - 1) * n + k)
            vals.append(1.0)
        if t >= 2:
            for k in range(n):
                for l in range(n):
                    rows.append(r0 + k)
                    cols.append((t - 2) * n + l)
                    vals.append(-sys.A[k, l])
        for k in range(n):
            for j in range(m):
                rows.append(r0 + k)
                cols.append(T * n + (t - 1) * m + j)
                vals.append(-sys.B[k, j])
    C = sp.csr_matrix((vals, (rows, cols)), shape=(T * n, nz))
    d = np.zeros(T * n)
    d[:n] = sys.A @ x0

    KKT = sp.bmat([[H, C.T], [C, None]], format="csc")
    sol = spla.spsolve(KKT, np.concatenate([h, d]))
    z, lam = sol[:nz], sol[nz:]
    X = z[: T * n].reshape(T, n)
    U = z[T * n :].reshape(T, m)
    feas = _feasibility_residual(sys, x0, X, U)
    stat = float(np.linalg.norm(H @ z - h + C.T @ lam))
    return OptimalTrajectory(
        x_star=X,
        u_star=U,
        total_cost=_total_cost(seq, X, U),
        method="kkt",
        feasibility_residual=feas,
        stationarity_residual=stat,
    )


def _reduced_gradient(sys, seq, x0, U):
    """Gradient of the reduced cost via the adjoint recursion (no A^t formed)."""
    T = len(seq)
    X = _rollout(sys, x0, U)
    grad = np.empty_like(U)
    p = np.zeros(sys.n)
    for t0 in range(T - 1, -1, -1):
        p = seq[t0].grad_x(X[t0]) + (sys.A.T @ p if t0 < T - 1 else 0.0)
        grad[t0] = seq[t0].grad_u(U[t0]) + sys.B.T @ p
    return grad, X


def _iterative_general(sys, seq, x0, pows, grad_tol, max_iter):
    T = len(seq)
    mod = seq.moduli
    G = _input_map(sys, pows, T)
    if not np.all(np.isfinite(G)):
        raise NumericalFailureError("dynamics map overflowed; horizon too long for this plant")
    sv = np.linalg.svd(G, compute_uv=False)
    L = mod.l_x * sv[0] ** 2 + mod.l_u
    sigma = mod.alpha_u + mod.alpha_x * sv[-1] ** 2
    step = 2.0 / (L + sigma)

    _, etas = seq.minimizers()
    U = etas.copy()
    gnorm = np.inf
    for _ in range(max_iter):
        grad, X = _reduced_gradient(sys, seq, x0, U)
        gnorm = float(np.linalg.norm(grad))
        if gnorm <= grad_tol:
            break
        U = U - step * grad
    else:
        raise NoConvergenceError(
            f"reduced gradient descent did not reach {grad_tol} in {max_iter} iterations",
            residual=gnorm,
        )
    X = _rollout(sys, x0, U)
    grad, _ = _reduced_gradient(sys, seq, x0, U)
    return OptimalTrajectory(
        x_star=X,
        u_star=U,
        total_cost=_total_cost(seq, X, U),
        method="iterative",
        feasibility_residual=_feasibility_residual(sys, x0, X, U),
        stationarity_residual=float(np.linalg.norm(grad)),
    )


def _feasibility_residual(sys, x0, X, U) -> float:
    prev = np.vstack([x0, X[:-1]])
    resid = X - prev @ sys.A.T - U @ sys.B.T
    return float(np.max(np.abs(resid))) if resid.size else 0.0


def optimal_trajectory(
    sys: LinearSystem,
    seq: CostSequence,
    x0,
    method: str = "auto",
    grad_tol: float = 1e-9,
    max_iter: int = 10**6,
) -> OptimalTrajectory:
    """Best dynamics-feasible trajectory in hindsight for the whole horizon.

    method: "auto" picks the exact reduced solve for quadratic costs (or the
    sparse KKT solve when matrix powers would overflow) and gradient descent
    otherwise; "reduced", "kkt", and "iterative" force a route.
    """
    x0 = _as_vector(x0, sys.n, "x0")
    T = len(seq)
    quadratic = seq.is_quadratic()

    if method == "auto":
        if quadratic:
            pows, ok = _powers(sys, T, REDUCED_GUARD)
            return _reduced_quadratic(sys, seq, x0, pows) if ok else _kkt_quadratic(sys, seq, x0)
        method = "iterative"

    if method == "reduced":
        if not quadratic:
            raise ValueError("reduced exact solve applies to quadratic costs only")
        pows, ok = _powers(sys, T, OVERFLOW_GUARD)
        if not ok:
            raise NumericalFailureError(
                "matrix powers overflow on this horizon; use method='kkt'"
            )
        return _reduced_quadratic(sys, seq, x0, pows)
    if method == "kkt":
        if not quadratic:
            raise ValueError("KKT solve applies to quadratic costs only")
        return _kkt_quadratic(sys, seq, x0)
    if method == "iterative":
        pows, ok = _powers(sys, T, OVERFLOW_GUARD)
        if not ok:
            raise NumericalFailureError(
                "matrix powers overflow on this horizon; iterative route unavailable"
            )
        return _iterative_general(sys, seq, x0, pows, grad_tol, max_iter)
    raise ValueError(f"unknown method {method!r}")


def regret(run_costs, benchmark: OptimalTrajectory) -> float:
    """Total stage cost of a run minus the benchmark's total cost.

    No cost is attributed to the initial condition; run_costs[t-1] must be
    L_t(x_t, u_t) for the same cost sequence the benchmark solved.
    """
    run_costs = np.asarray(run_costs, dtype=float)
    if run_costs.shape[0] != benchmark.x_star.shape[0]:
        raise ValueError(
            f"horizon mismatch: run has {run_costs.shape[0]} stages, "
            f"benchmark has {benchmark.x_star.shape[0]}"
        )
    return float(run_costs.sum() - benchmark.total_cost)


def comparator_regret(run_costs, seq: CostSequence) -> float:
    """Regret against the pointwise minimizers (theta_t, eta_t).

    Those need not satisfy the dynamics, so this upper-bounds the gap to any
    feasible trajectory; for tracking costs with zero minimum it equals the
    total cost.
    """
    run_costs = np.asarray(run_costs, dtype=float)
    if run_costs.shape[0] != len(seq):
        raise ValueError("horizon mismatch between run costs and cost sequence")
    floor = sum(seq[t0].eval(seq[t0].minimizer_x, seq[t0].minimizer_u) for t0 in range(len(seq)))
    return float(run_costs.sum() - floor)
