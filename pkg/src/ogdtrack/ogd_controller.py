"""Online gradient descent controller for linear plants.

Per step, the controller runs one gradient step on the previous input cost,
predicts the state mu steps ahead under the current input guess, runs one
gradient step on the previous state cost at that prediction, and converts
the desired state correction into the minimum-norm stacked input sequence
realizing it. The correction is spread over the next mu inputs through the
shift/extract operators of the controllability structure.

Step t = 1 is a no-op by convention (u_1 = v_0): the first cost is only
revealed after acting, so the fictitious L_0 is centered at the first
prediction and at v_0, which zeroes both gradients exactly.
"""

import math
import warnings

import numpy as np

from .errors import CertificateUnavailableError, NumericalFailureError
from .lin_system import ControllabilityData, LinearSystem, _as_vector
from .reports import CheckReport

SQRT2 = math.sqrt(2.0)


def validate_step_sizes(
    gamma_v: float,
    gamma_x: float,
    alpha_u: float,
    l_u: float,
    alpha_x: float,
    l_x: float,
    A_norm: float,
) -> CheckReport:
    """Check every step-size condition of the regret guarantee.

    Reported items:
      * alpha_u > (2 - sqrt 2) / (2 + sqrt 2) * l_u,
      * gamma_v in ((2 - sqrt 2) / (2 alpha_u), 2 / (l_u + alpha_u)],
      * gamma_x in ((2||A|| - 1) / (2||A|| alpha_x), 2 / (l_x + alpha_x)],
      * the derived positivity 1 - 2 kappa_v^2 > 0 and 1 - 4||A||^2 kappa_x^2 > 0.

    Failing items do not raise; strict callers refuse to certify instead.
    """
    if min(alpha_u, l_u, alpha_x, l_x) <= 0:
        raise ValueError("moduli must be positive")
    report = CheckReport()

    gap = (2.0 - SQRT2) / (2.0 + SQRT2) * l_u
    report.add("alpha_u_above_moduli_gap", alpha_u, gap, alpha_u > gap,
               "alpha_u > (2-sqrt2)/(2+sqrt2) l_u")

    gv_lo = (2.0 - SQRT2) / (2.0 * alpha_u)
    gv_hi = 2.0 / (l_u + alpha_u)
    report.add("gamma_v_above_lower", gamma_v, gv_lo, gamma_v > gv_lo)
    report.add("gamma_v_at_most_upper", gamma_v, gv_hi, gamma_v <= gv_hi)

    gx_lo = -math.inf if A_norm == 0 else (2.0 * A_norm - 1.0) / (2.0 * A_norm * alpha_x)
    gx_hi = 2.0 / (l_x + alpha_x)
    report.add("gamma_x_above_lower", gamma_x, gx_lo, gamma_x > gx_lo)
    report.add("gamma_x_at_most_upper", gamma_x, gx_hi, gamma_x <= gx_hi)

    kappa_v = 1.0 - alpha_u * gamma_v
    kappa_x = 1.0 - alpha_x * gamma_x
    report.add("input_contraction_margin", 1.0 - 2.0 * kappa_v**2, 0.0,
               1.0 - 2.0 * kappa_v**2 > 0.0, "1 - 2 kappa_v^2 > 0")
    report.add("state_contraction_margin", 1.0 - 4.0 * A_norm**2 * kappa_x**2, 0.0,
               1.0 - 4.0 * A_norm**2 * kappa_x**2 > 0.0, "1 - 4 ||A||^2 kappa_x^2 > 0")
    return report


def _require_finite(vec: np.ndarray, what: str) -> np.ndarray:
    if not np.all(np.isfinite(vec)):
        raise NumericalFailureError(f"{what} is non-finite")
    return vec


class OGDController:
    """Single-run controller state plus the per-step update rules.

    One instance per simulation run; instances share nothing mutable, so
    distinct runs may execute concurrently.
    """

    def __init__(
        self,
        sys: LinearSystem,
        ctrb: ControllabilityData,
        gamma_v: float,
        gamma_x: float,
        v0,
        moduli=None,
        validate: str = "off",
    ):
        if gamma_v <= 0 or gamma_x <= 0:
            raise ValueError("step sizes must be positive")
        if validate not in ("off", "warn", "strict"):
            raise ValueError(f"unknown validate mode {validate!r}")
        if validate != "off":
            if moduli is None:
                raise ValueError("step-size validation needs the cost moduli")
            report = validate_step_sizes(
                gamma_v, gamma_x, moduli.alpha_u, moduli.l_u,
                moduli.alpha_x, moduli.l_x, ctrb.A_norm,
            )
            if not report.passed:
                failed = ", ".join(item.name for item in report.failures())
                if validate == "strict":
                    raise CertificateUnavailableError(
                        f"step-size conditions fail: {failed}", report=report
                    )
                warnings.warn(f"step-size conditions fail: {failed}", stacklevel=2)

        self.sys = sys
        self.ctrb = ctrb
        self.gamma_v = float(gamma_v)
        self.gamma_x = float(gamma_x)
        self.v = _as_vector(v0, sys.m, "v0").copy()
        self.v0 = self.v.copy()
        mu, m = ctrb.mu, sys.m
        # newest first: g_buffer[i] is g_{t-i} once step t has completed state_ogd
        self.g_buffer = [np.zeros(mu * m) for _ in range(mu)]
        self.t = 1
        self.x_hat_last = None
        self.theta0 = None  # fixed to the first prediction at t = 1
        self._W_pows = [np.linalg.matrix_power(ctrb.W, i) for i in range(mu)]
        self._eW = [ctrb.e @ Wi for Wi in self._W_pows]

    @property
    def eta0(self) -> np.ndarray:
        return self.v0

    def input_ogd(self, grad_u_prev) -> np.ndarray:
        """v_t = v_{t-1} - gamma_v * grad f^u_{t-1}(v_{t-1})."""
        grad = _require_finite(_as_vector(grad_u_prev, self.sys.m, "grad_u_prev"),
                               "input gradient")
        self.v = self.v - self.gamma_v * grad
        return self.v.copy()

    def predict_state(self, x_prev) -> np.ndarray:
        """mu-step-ahead state under constant input v_t plus pending corrections.

        Uses the pre-update buffer entries g_{t-1}, ..., g_{t-mu+1}.
        """
        x_prev = _as_vector(x_prev, self.sys.n, "x_prev")
        mu = self.ctrb.mu
        z = np.tile(self.v, mu)
        for i in range(1, mu):
            z = z + self._W_pows[i] @ self.g_buffer[i - 1]
        return self.ctrb.A_mu @ x_prev + self.ctrb.S_c @ z

    def state_ogd(self, grad_x_at_pred) -> np.ndarray:
        """Minimum-norm g_t with S_c g_t = -gamma_x * grad; pushes the buffer."""
        grad = _require_finite(_as_vector(grad_x_at_pred, self.sys.n, "grad_x_at_pred"),
                               "state gradient")
        g = -self.gamma_x * (self.ctrb.P @ grad)
        self.g_buffer.insert(0, g)
        self.g_buffer.pop()
        return g.copy()

    def assemble_input(self) -> np.ndarray:
        """u_t = v_t + sum_i e W^i g_{t-i}, over the post-update buffer."""
        u = self.v.copy()
        for i, g in enumerate(self.g_buffer):
            u += self._eW[i] @ g
        return u

    def step(self, x_prev, cost_prev=None) -> np.ndarray:
        """Run one full controller step and return u_t.

        cost_prev is the cost revealed after the previous input (L_{t-1});
        it is ignored at t = 1, where the no-op convention applies.
        """
        if self.t == 1:
            x_hat = self.predict_state(x_prev)
            self.theta0 = x_hat.copy()
            self.state_ogd(np.zeros(self.sys.n))  # g_1 = 0: L_0 is centered at x_hat
            u = self.assemble_input()
        else:
            if cost_prev is None:
                raise ValueError("cost_prev is required for t >= 2")
            self.input_ogd(cost_prev.grad_u(self.v))
            x_hat = self.predict_state(x_prev)
            self.state_ogd(cost_prev.grad_x(x_hat))
            u = self.assemble_input()
        self.x_hat_last = x_hat
        self.t += 1
        return u


def predict_state_recursive(
    sys: LinearSystem,
    ctrb: ControllabilityData,
    x_hat_prev,
    v_new,
    v_prev,
    g_old,
) -> np.ndarray:
    """One-step prediction recursion (diagnostic).

    Advances the prediction made at the previous step to the current one:
    A x_hat_prev + B v_new + A S_c g_old + S_c E01 E01^T (V_new - V_prev),
    where V stacks the input iterate mu times and g_old is the correction
    computed alongside x_hat_prev. Equals the direct mu-step prediction.
    """
    x_hat_prev = _as_vector(x_hat_prev, sys.n, "x_hat_prev")
    v_new = _as_vector(v_new, sys.m, "v_new")
    v_prev = _as_vector(v_prev, sys.m, "v_prev")
    g_old = _as_vector(g_old, ctrb.mu * sys.m, "g_old")
    dV = np.tile(v_new, ctrb.mu) - np.tile(v_prev, ctrb.mu)
    return (
        sys.A @ x_hat_prev
        + sys.B @ v_new
        + sys.A @ (ctrb.S_c @ g_old)
        + ctrb.S_c @ (ctrb.E01 @ (ctrb.E01.T @ dV))
    )
