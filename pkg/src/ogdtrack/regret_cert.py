"""Regret-bound constants, bound verification, and inequality diagnostics.

Every constant of the guarantee is computed in closed form from the system,
the controllability operators, the cost moduli, and the step sizes. The
initial-transient constant is the only run-dependent piece; attaching a run
record fills it in and evaluates the full bound

    comparator regret <= C_mu + Lambda_theta * Theta_T + Lambda_eta * H_T,

where Theta_T and H_T sum squared setpoint movements starting from the
convention theta_0 = first prediction, eta_0 = v_0. The diagnostics replay
the inequality chains the bound rests on along a recorded run; a violation
indicates an implementation bug.
"""

import dataclasses
import json
from dataclasses import dataclass

import numpy as np

from .cost_model import Moduli
from .errors import CertificateUnavailableError
from .lin_system import ControllabilityData, LinearSystem, spectral_norm
from .ogd_controller import validate_step_sizes
from .reports import BoundReport, CheckReport, DiagnosticReport

REL_SLACK = 1e-9
ZERO_TOL = 1e-12


@dataclass(frozen=True)
class RegretCertificate:
    """All constants of the regret guarantee, plus run data once attached."""

    mu: int
    A_norm: float
    B_norm: float
    gamma_v: float
    gamma_x: float
    moduli: Moduli
    kappa_v: float
    kappa_x: float
    C1: float
    C2: float
    C3: float
    C4: float
    C_theta: float
    C_eta: float
    Lambda_theta: float
    Lambda_eta: float
    C_mu: float = None
    Theta_T: float = None
    H_T: float = None
    bound: float = None

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["moduli"] = dict(zip(("alpha_x", "l_x", "alpha_u", "l_u"), self.moduli))
        return d

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)


def compute_constants(
    sys: LinearSystem,
    ctrb: ControllabilityData,
    moduli: Moduli,
    gamma_v: float,
    gamma_x: float,
) -> RegretCertificate:
    """Evaluate every closed-form constant of the bound.

    Raises CertificateUnavailableError when the step-size conditions fail
    (the constants' denominators are then not guaranteed positive).
    """
    moduli = Moduli(*moduli)
    report = validate_step_sizes(
        gamma_v, gamma_x, moduli.alpha_u, moduli.l_u, moduli.alpha_x, moduli.l_x, ctrb.A_norm
    )
    if not report.passed:
        failed = ", ".join(item.name for item in report.failures())
        raise CertificateUnavailableError(
            f"cannot certify: step-size conditions fail ({failed})", report=report
        )

    mu = ctrb.mu
    A_norm = ctrb.A_norm
    B_norm = spectral_norm(sys.B)
    alpha_x, l_x, alpha_u, l_u = moduli
    kappa_v = 1.0 - alpha_u * gamma_v
    kappa_x = 1.0 - alpha_x * gamma_x
    den_v = 1.0 - 2.0 * kappa_v**2
    den_x = 1.0 - 4.0 * A_norm**2 * kappa_x**2

    W_pows = [np.linalg.matrix_power(ctrb.W, i) for i in range(mu)]
    C1 = sum(spectral_norm(ctrb.e @ Wi @ ctrb.P) ** 2 for Wi in W_pows)
    C3 = sum(spectral_norm(ctrb.S_c @ Wi.T @ ctrb.P) ** 2 for Wi in W_pows)
    C2 = 2.0 * spectral_norm(ctrb.S_c @ ctrb.E10) ** 2 * gamma_v**2 * l_u**2 * (mu - 1) ** 3 / den_v
    C4 = mu * gamma_x**2 * l_x * (2.0 * l_x * C3 + l_u * C1)
    C_theta = 4.0 * A_norm**2 * l_x / den_x
    C_eta = (
        8.0
        * l_x
        * (B_norm**2 * kappa_v**2 + spectral_norm(ctrb.S_c @ ctrb.E01) ** 2 * gamma_v**2 * l_u**2 * (mu - 1))
        / (den_v * den_x)
    )
    Lambda_theta = 2.0 * C_theta + C4 * C_theta + 2.0 * l_x * mu**2
    Lambda_eta = 2.0 * C_eta + 2.0 * l_x * C2 + C4 * C_eta + 2.0 * l_u / den_v

    return RegretCertificate(
        mu=mu,
        A_norm=A_norm,
        B_norm=B_norm,
        gamma_v=float(gamma_v),
        gamma_x=float(gamma_x),
        moduli=moduli,
        kappa_v=kappa_v,
        kappa_x=kappa_x,
        C1=float(C1),
        C2=float(C2),
        C3=float(C3),
        C4=float(C4),
        C_theta=float(C_theta),
        C_eta=float(C_eta),
        Lambda_theta=float(Lambda_theta),
        Lambda_eta=float(Lambda_eta),
    )


def attach_run(cert: RegretCertificate, run) -> RegretCertificate:
    """Fill in the run-dependent pieces: C_mu, the path sums, and the bound.

    C_mu charges the first mu-1 states against their setpoints (empty sum
    for mu = 1); it depends only on the early transient, not on the horizon.
    """
    if run.x.shape[0] < cert.mu:
        raise ValueError(f"run shorter than the controllability index {cert.mu}")
    l_x = cert.moduli.l_x
    early = run.x[: cert.mu - 1] - run.theta[: cert.mu - 1]
    C_mu = 0.5 * l_x * float(np.sum(early**2))
    Theta_T = run.path.Theta_T
    H_T = run.path.H_T
    bound = C_mu + cert.Lambda_theta * Theta_T + cert.Lambda_eta * H_T
    return dataclasses.replace(cert, C_mu=C_mu, Theta_T=Theta_T, H_T=H_T, bound=bound)


def verify_bound(cert: RegretCertificate, regret_value: float, comparator_value: float) -> BoundReport:
    """Check the bound against the comparator regret (which dominates regret)."""
    if cert.bound is None:
        raise ValueError("certificate has no run attached; call attach_run first")
    passed = comparator_value <= cert.bound * (1.0 + REL_SLACK) + REL_SLACK
    return BoundReport(
        passed=bool(passed),
        bound=cert.bound,
        comparator_regret=float(comparator_value),
        regret=float(regret_value),
        slack=cert.bound - float(comparator_value),
    )


def _partial_sum_ratios(name, lhs_terms, rhs_terms, detail: CheckReport,
                        rel_tol=REL_SLACK, zero_tol=ZERO_TOL):
    """Check cumulative-sum domination LHS_tau <= RHS_tau for every tau.

    Denominators below zero_tol are treated as zero (rounding-level sums of
    squares); there the LHS must be rounding-level as well.
    """
    lhs = np.cumsum(lhs_terms)
    rhs = np.cumsum(rhs_terms)
    max_ratio = 0.0
    ok = True
    for L, R in zip(lhs, rhs):
        if R > zero_tol:
            max_ratio = max(max_ratio, L / R)
        elif L > zero_tol:
            ok = False
    ok = ok and max_ratio <= 1.0 + rel_tol
    detail.add(name, float(lhs[-1]) if len(lhs) else 0.0,
               float(rhs[-1]) if len(rhs) else 0.0, ok,
               f"max partial-sum ratio {max_ratio:.6g}")
    return max_ratio, ok


def lemma_bound_check(run, cert: RegretCertificate, seq=None) -> DiagnosticReport:
    """Prediction-error bound: cumulative squared prediction-to-setpoint gaps
    are dominated by the weighted squared path sums, at every horizon prefix.
    """
    l_x = cert.moduli.l_x
    theta_prev = np.vstack([run.theta0, run.theta[:-1]])
    lhs_terms = np.sum((run.x_hat - theta_prev) ** 2, axis=1)

    dtheta = np.diff(np.vstack([run.theta0, run.theta]), axis=0)
    deta = np.diff(np.vstack([run.eta0, run.eta]), axis=0)
    sq_theta = np.sum(dtheta**2, axis=1)
    sq_eta = np.sum(deta**2, axis=1)
    # RHS at horizon tau sums movements up to tau - 1 only
    rhs_terms = np.concatenate(
        [[0.0], (cert.C_theta / l_x) * sq_theta[:-1] + (cert.C_eta / l_x) * sq_eta[:-1]]
    )
    detail = CheckReport()
    max_ratio, ok = _partial_sum_ratios("prediction_error_bound", lhs_terms, rhs_terms, detail)
    return DiagnosticReport("lemma_prediction_bound", ok, max_ratio, detail)


def proof_inequality_diagnostics(run, cert: RegretCertificate, seq=None, seed=0) -> DiagnosticReport:
    """Replay the input-iterate inequality chains and a Jensen spot check."""
    kv = cert.kappa_v
    den_v = 1.0 - 2.0 * kv**2
    gv, l_u = cert.gamma_v, cert.moduli.l_u
    detail = CheckReport()

    deta = np.diff(np.vstack([run.eta0, run.eta]), axis=0)
    sq_eta = np.sum(deta**2, axis=1)

    ratios = []
    # sum ||v_{t+1} - eta_t||^2 <= 2 kv^2/(1-2kv^2) * sum ||eta_t - eta_{t-1}||^2
    lhs = np.sum((run.v[1:] - run.eta[:-1]) ** 2, axis=1)
    r1, _ = _partial_sum_ratios("next_iterate_to_setpoint", lhs,
                                (2.0 * kv**2 / den_v) * sq_eta[:-1], detail)
    ratios.append(r1)
    # sum ||v_t - eta_t||^2 <= 2/(1-2kv^2) * sum ||eta_t - eta_{t-1}||^2
    lhs = np.sum((run.v - run.eta) ** 2, axis=1)
    r2, _ = _partial_sum_ratios("iterate_to_setpoint", lhs, (2.0 / den_v) * sq_eta, detail)
    ratios.append(r2)
    # sum ||v_{t+1} - v_t||^2 <= 2 gv^2 l_u^2/(1-2kv^2) * sum ||eta_t - eta_{t-1}||^2
    lhs = np.sum(np.diff(run.v, axis=0) ** 2, axis=1)
    r3, _ = _partial_sum_ratios("iterate_increments", lhs,
                                (2.0 * gv**2 * l_u**2 / den_v) * sq_eta[:-1], detail)
    ratios.append(r3)

    rng = np.random.default_rng(seed)
    a = rng.standard_normal((64, 4))
    b = rng.standard_normal((64, 4))
    jensen_lhs = np.sum((a + b) ** 2, axis=1)
    jensen_rhs = 2.0 * np.sum(a**2, axis=1) + 2.0 * np.sum(b**2, axis=1)
    jensen_ok = bool(np.all(jensen_lhs <= jensen_rhs * (1.0 + REL_SLACK)))
    detail.add("jensen_pairwise", float(jensen_lhs.max()), float(jensen_rhs.max()), jensen_ok)

    passed = detail.passed
    return DiagnosticReport("input_iterate_chains", passed, max(ratios), detail)
