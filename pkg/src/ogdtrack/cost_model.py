"""Time-varying separable tracking costs L_t(x, u) = f^x_t(x) + f^u_t(u).

Every cost exposes its minimizers (theta_t, eta_t) and its strong-convexity /
smoothness moduli explicitly; the controller only ever consumes gradients,
but the certificate engine and the path metrics need the rest.

Cost interface (duck-typed, see SeparableCost): eval_x, eval_u, grad_x,
grad_u, minimizer_x, minimizer_u, alpha_x, l_x, alpha_u, l_u.
"""

import csv
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .errors import SteadyStateUnderdeterminedError
from .lin_system import LinearSystem, _as_vector


class Moduli(NamedTuple):
    alpha_x: float
    l_x: float
    alpha_u: float
    l_u: float


class SeparableCost:
    """Base contract for one stage cost. Subclasses fill in everything."""

    alpha_x: float
    l_x: float
    alpha_u: float
    l_u: float

    @property
    def minimizer_x(self) -> np.ndarray:
        raise NotImplementedError

    @property
    def minimizer_u(self) -> np.ndarray:
        raise NotImplementedError

    def eval_x(self, x) -> float:
        raise NotImplementedError

    def eval_u(self, u) -> float:
        raise NotImplementedError

    def grad_x(self, x) -> np.ndarray:
        raise NotImplementedError

    def grad_u(self, u) -> np.ndarray:
        raise NotImplementedError

    def eval(self, x, u) -> float:
        return self.eval_x(x) + self.eval_u(u)

    @property
    def moduli(self) -> Moduli:
        return Moduli(self.alpha_x, self.l_x, self.alpha_u, self.l_u)


@dataclass(frozen=True)
class QuadraticTrackingCost(SeparableCost):
    """(q/2)||x - theta||^2 + (r/2)||u - eta||^2.

    alpha_x = l_x = q and alpha_u = l_u = r, so the gradient step of the
    controller contracts at exactly 1 - q*gamma per step.
    """

    theta: np.ndarray
    eta: np.ndarray
    q: float = 1.0
    r: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "theta", np.asarray(self.theta, dtype=float).reshape(-1))
        object.__setattr__(self, "eta", np.asarray(self.eta, dtype=float).reshape(-1))
        if self.q <= 0 or self.r <= 0:
            raise ValueError("weights q and r must be positive")

    alpha_x = property(lambda self: self.q)
    l_x = property(lambda self: self.q)
    alpha_u = property(lambda self: self.r)
    l_u = property(lambda self: self.r)

    @property
    def minimizer_x(self) -> np.ndarray:
        return self.theta

    @property
    def minimizer_u(self) -> np.ndarray:
        return self.eta

    def eval_x(self, x) -> float:
        d = np.asarray(x, dtype=float).reshape(-1) - self.theta
        return 0.5 * self.q * float(d @ d)

    def eval_u(self, u) -> float:
        d = np.asarray(u, dtype=float).reshape(-1) - self.eta
        return 0.5 * self.r * float(d @ d)

    def grad_x(self, x) -> np.ndarray:
        return self.q * (np.asarray(x, dtype=float).reshape(-1) - self.theta)

    def grad_u(self, u) -> np.ndarray:
        return self.r * (np.asarray(u, dtype=float).reshape(-1) - self.eta)


class CostSequence:
    """Costs indexed t = 1..T with uniform moduli across t."""

    def __init__(self, costs: Sequence[SeparableCost]):
        costs = list(costs)
        if not costs:
            raise ValueError("cost sequence must be nonempty")
        m0 = costs[0].moduli
        for k, c in enumerate(costs[1:], start=2):
            if c.moduli != m0:
                raise ValueError(
                    f"cost at t={k} has moduli {c.moduli}, expected uniform {m0}"
                )
        if not (0 < m0.alpha_x <= m0.l_x and 0 < m0.alpha_u <= m0.l_u):
            raise ValueError(f"moduli must satisfy 0 < alpha <= l, got {m0}")
        self.costs = costs

    def __len__(self) -> int:
        return len(self.costs)

    def __getitem__(self, t0: int) -> SeparableCost:
        return self.costs[t0]

    @property
    def T(self) -> int:
        return len(self.costs)

    @property
    def moduli(self) -> Moduli:
        return self.costs[0].moduli

    def minimizers(self):
        """Stack minimizers into (T, n) and (T, m) arrays."""
        thetas = np.array([c.minimizer_x for c in self.costs])
        etas = np.array([c.minimizer_u for c in self.costs])
        return thetas, etas

    def is_quadratic(self) -> bool:
        return all(isinstance(c, QuadraticTrackingCost) for c in self.costs)


@dataclass(frozen=True)
class PathMetrics:
    """Movement of the cost minimizers over the horizon.

    path_length sums norms of consecutive differences, Theta_T and H_T sum
    their squares (state and input setpoints separately).
    """

    path_length: float
    Theta_T: float
    H_T: float


def check_steady_state(sys: LinearSystem, theta, eta, tol: float = 1e-9) -> bool:
    """True iff (theta, eta) is an equilibrium: ||(I - A) theta - B eta|| <= tol."""
    theta = _as_vector(theta, sys.n, "theta")
    eta = _as_vector(eta, sys.m, "eta")
    resid = (np.eye(sys.n) - sys.A) @ theta - sys.B @ eta
    return float(np.linalg.norm(resid)) <= tol


def setpoint_from_input(sys: LinearSystem, eta) -> np.ndarray:
    """Solve (I - A) theta = B eta for the state setpoint matching eta."""
    eta = _as_vector(eta, sys.m, "eta")
    ImA = np.eye(sys.n) - sys.A
    sv = np.linalg.svd(ImA, compute_uv=False)
    if sv[-1] <= 1e-12 * sv[0]:
        raise SteadyStateUnderdeterminedError(
            "I - A is singular: no unique steady state for the given input"
        )
    return np.linalg.solve(ImA, sys.B @ eta)


def generate_random_setpoints(
    sys: LinearSystem,
    T: int,
    change_prob: float,
    eta_range=(-5.0, 5.0),
    seed=None,
    q: float = 1.0,
    r: float = 1.0,
) -> CostSequence:
    """Random piecewise-constant setpoint process with quadratic costs.

    eta_1 is uniform on [lo, hi) componentwise; for t >= 2 an independent
    Bernoulli(change_prob) trial decides whether a fresh eta_t is drawn
    (a "change" resamples even if the new value coincides). theta_t is the
    steady state matching eta_t. Deterministic for a fixed seed; draw order
    is one Bernoulli per step, then m uniforms on a change.
    """
    if T < 1:
        raise ValueError("horizon T must be >= 1")
    if not (0.0 <= change_prob <= 1.0):
        raise ValueError("change_prob must be in [0, 1]")
    lo, hi = float(eta_range[0]), float(eta_range[1])
    if hi < lo:
        raise ValueError("eta_range must satisfy lo <= hi")
    rng = np.random.default_rng(seed)

    eta = rng.uniform(lo, hi, size=sys.m)
    theta = setpoint_from_input(sys, eta)
    costs = [QuadraticTrackingCost(theta, eta, q=q, r=r)]
    for _ in range(2, T + 1):
        if rng.random() < change_prob:
            eta = rng.uniform(lo, hi, size=sys.m)
            theta = setpoint_from_input(sys, eta)
        costs.append(QuadraticTrackingCost(theta, eta, q=q, r=r))
    return CostSequence(costs)


def path_metrics(seq: CostSequence, theta0, eta0) -> PathMetrics:
    """Path length and squared-path sums, starting the t=1 terms at (theta0, eta0)."""
    thetas, etas = seq.minimizers()
    theta0 = _as_vector(theta0, thetas.shape[1], "theta0")
    eta0 = _as_vector(eta0, etas.shape[1], "eta0")
    dth = np.diff(np.vstack([theta0, thetas]), axis=0)
    det = np.diff(np.vstack([eta0, etas]), axis=0)
    th_norms = np.linalg.norm(dth, axis=1)
    et_norms = np.linalg.norm(det, axis=1)
    return PathMetrics(
        path_length=float(th_norms.sum() + et_norms.sum()),
        Theta_T=float((th_norms**2).sum()),
        H_T=float((et_norms**2).sum()),
    )


def save_schedule(seq: CostSequence, path) -> None:
    """Write the setpoint schedule as CSV: t, theta_1..n, eta_1..m."""
    thetas, etas = seq.minimizers()
    n, m = thetas.shape[1], etas.shape[1]
    header = ["t"] + [f"theta_{i + 1}" for i in range(n)] + [f"eta_{j + 1}" for j in range(m)]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for t0 in range(len(seq)):
            row = [str(t0 + 1)]
            row += [f"{v:.17g}" for v in thetas[t0]]
            row += [f"{v:.17g}" for v in etas[t0]]
            writer.writerow(row)


def load_schedule(path, q: float = 1.0, r: float = 1.0) -> CostSequence:
    """Reload a schedule written by save_schedule, for exact replay."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        n = sum(1 for h in header if h.startswith("theta_"))
        m = sum(1 for h in header if h.startswith("eta_"))
        if n == 0 or m == 0 or header[0] != "t":
            raise ValueError(f"unrecognized schedule header: {header}")
        costs = []
        for row in reader:
            vals = [float(v) for v in row[1:]]
            costs.append(QuadraticTrackingCost(vals[:n], vals[n : n + m], q=q, r=r))
    return CostSequence(costs)
