"""Closed-loop simulation runs, the built-in experiments, and persistence.

A run applies the controller to the plant for t = 1..T: the input u_t is
computed from the previous state and the previously revealed cost, the plant
transitions, and only then is L_t revealed and charged. Aggregates (regret,
comparator regret, path metrics, certificate) are attached to the record.

Reproducibility: all randomness flows through numpy's PCG64 generator. Sweep
run j derives its stream from SeedSequence(root_seed, spawn_key=(j,)), so
runs are independent of execution order and may run in parallel.
"""

import dataclasses
import json
import os
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import _backend
from .cost_model import (
    CostSequence,
    PathMetrics,
    check_steady_state,
    generate_random_setpoints,
    load_schedule,
    path_metrics,
)
from .errors import CertificateUnavailableError
from .lin_system import LinearSystem, build_controllability, _as_vector
from .offline_oracle import comparator_regret, optimal_trajectory, regret
from .ogd_controller import OGDController, validate_step_sizes
from .regret_cert import attach_run, compute_constants, verify_bound

# Unstable third-order single-input plant with controllability index 3,
# used by the built-in experiments.
DEMO_A = np.array([
    [1.05, 0.7, 1.75],
    [0.35, 0.7, 1.05],
    [1.4, 0.105, 1.855],
])
DEMO_B = np.array([[1.0], [0.0], [1.0]])
DEMO_GAMMA_V = 0.98
DEMO_GAMMA_X = 0.995
DEMO_CHANGE_PROB = 0.1
DEMO_ETA_RANGE = (-5.0, 5.0)


def demo_system() -> LinearSystem:
    return LinearSystem(DEMO_A, DEMO_B)


def _fmt(x: float) -> str:
    return f"{float(x):.17g}"


@dataclass(frozen=True)
class SetpointSpec:
    """How the per-run setpoint schedule is produced."""

    mode: str = "random"  # "random" | "schedule"
    change_prob: float = DEMO_CHANGE_PROB
    eta_range: tuple = DEMO_ETA_RANGE
    schedule_file: str = None

    def __post_init__(self):
        if self.mode not in ("random", "schedule"):
            raise ValueError(f"setpoint mode must be 'random' or 'schedule', got {self.mode!r}")
        if self.mode == "schedule" and self.schedule_file is None:
            raise ValueError("schedule mode needs a schedule_file")


@dataclass(frozen=True)
class RunConfig:
    """Everything one closed-loop run depends on."""

    system: LinearSystem
    horizon: int
    gamma_v: float = DEMO_GAMMA_V
    gamma_x: float = DEMO_GAMMA_X
    q: float = 1.0
    r: float = 1.0
    x0: np.ndarray = None
    v0: np.ndarray = None
    setpoints: SetpointSpec = field(default_factory=SetpointSpec)
    seed: int = None
    strict: bool = False
    record_predictions: bool = True
    compute_regret: bool = True
    backend: str = "auto"

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        n, m = self.system.n, self.system.m
        x0 = np.zeros(n) if self.x0 is None else _as_vector(self.x0, n, "x0")
        v0 = np.zeros(m) if self.v0 is None else _as_vector(self.v0, m, "v0")
        object.__setattr__(self, "x0", x0)
        object.__setattr__(self, "v0", v0)
        if self.setpoints.mode == "random" and self.seed is None:
            raise ValueError("random setpoints need a seed for reproducibility")

    @classmethod
    def from_dict(cls, spec: dict) -> "RunConfig":
        """Parse the documented config JSON schema."""
        system = LinearSystem.from_dict(spec["system"])
        cost = spec.get("cost", {})
        sp = spec.get("setpoints", {})
        setpoints = SetpointSpec(
            mode=sp.get("mode", "random"),
            change_prob=float(sp.get("change_prob", DEMO_CHANGE_PROB)),
            eta_range=tuple(sp.get("eta_range", DEMO_ETA_RANGE)),
            schedule_file=sp.get("schedule_file"),
        )
        return cls(
            system=system,
            horizon=int(spec["horizon"]),
            gamma_v=float(spec.get("gamma_v", DEMO_GAMMA_V)),
            gamma_x=float(spec.get("gamma_x", DEMO_GAMMA_X)),
            q=float(cost.get("q", 1.0)),
            r=float(cost.get("r", 1.0)),
            x0=spec.get("x0"),
            v0=spec.get("v0"),
            setpoints=setpoints,
            seed=spec.get("seed"),
        )

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


@dataclass
class RunRecord:
    """Full closed-loop trajectory with aggregates.

    Row t-1 of each per-step array holds the time-t value. theta0/eta0 are
    the path-metric anchors: the first prediction and the initial input
    iterate.
    """

    x: np.ndarray
    u: np.ndarray
    v: np.ndarray
    g: np.ndarray
    x_hat: np.ndarray
    theta: np.ndarray
    eta: np.ndarray
    cost_x: np.ndarray
    cost_u: np.ndarray
    x0: np.ndarray
    theta0: np.ndarray
    eta0: np.ndarray
    mu: int
    total_cost: float
    comparator_regret: float
    path: PathMetrics
    regret: float = None
    certificate: object = None
    bound_report: object = None
    backend: str = "python"

    @property
    def T(self) -> int:
        return self.x.shape[0]

    @property
    def stage_costs(self) -> np.ndarray:
        return self.cost_x + self.cost_u


def _build_sequence(config: RunConfig) -> CostSequence:
    sp = config.setpoints
    if sp.mode == "schedule":
        seq = load_schedule(sp.schedule_file, q=config.q, r=config.r)
    else:
        seq = generate_random_setpoints(
            config.system, config.horizon, sp.change_prob, sp.eta_range,
            seed=config.seed, q=config.q, r=config.r,
        )
    if len(seq) != config.horizon:
        raise ValueError(
            f"schedule length {len(seq)} does not match horizon {config.horizon}"
        )
    return seq


def run_closed_loop(config: RunConfig, seq: CostSequence = None) -> RunRecord:
    """Simulate one full run and attach every aggregate.

    A prebuilt cost sequence overrides the config's setpoint spec (the
    moduli must still be uniform). In strict mode a failing step-size check
    refuses to run; otherwise it warns and the certificate is skipped.
    """
    sys = config.system
    ctrb = build_controllability(sys)
    if seq is None:
        seq = _build_sequence(config)
    if len(seq) != config.horizon:
        raise ValueError("cost sequence length does not match config horizon")
    moduli = seq.moduli

    step_report = validate_step_sizes(
        config.gamma_v, config.gamma_x, moduli.alpha_u, moduli.l_u,
        moduli.alpha_x, moduli.l_x, ctrb.A_norm,
    )
    if not step_report.passed:
        failed = ", ".join(item.name for item in step_report.failures())
        if config.strict:
            raise CertificateUnavailableError(
                f"strict mode: step-size conditions fail ({failed})", report=step_report
            )
        warnings.warn(f"step-size conditions fail ({failed}); certificate skipped",
                      stacklevel=2)

    thetas, etas = seq.minimizers()
    if seq.is_quadratic():
        # for quadratics the moduli ARE the weights; the sequence wins over
        # config.q/r when a prebuilt sequence was passed in
        q_run, r_run = moduli.l_x, moduli.l_u
        x, u, v, g, x_hat = _backend.rollout_quadratic(
            sys, ctrb, config.gamma_v, config.gamma_x, q_run, r_run,
            config.x0, config.v0, thetas, etas, backend=config.backend,
        )
        used_backend = _backend.resolve_backend(config.backend)
        dx = x - thetas
        du = u - etas
        cost_x = 0.5 * moduli.l_x * np.sum(dx * dx, axis=1)
        cost_u = 0.5 * moduli.l_u * np.sum(du * du, axis=1)
    else:
        T = config.horizon
        ctl = OGDController(sys, ctrb, config.gamma_v, config.gamma_x, config.v0)
        x = np.empty((T, sys.n))
        u = np.empty((T, sys.m))
        v = np.empty((T, sys.m))
        g = np.empty((T, ctrb.mu * sys.m))
        x_hat = np.empty((T, sys.n))
        cost_x = np.empty(T)
        cost_u = np.empty(T)
        x_prev = config.x0
        for t0 in range(T):
            u_t = ctl.step(x_prev, seq[t0 - 1] if t0 >= 1 else None)
            x_prev = sys.A @ x_prev + sys.B @ u_t
            x[t0], u[t0], v[t0] = x_prev, u_t, ctl.v
            g[t0], x_hat[t0] = ctl.g_buffer[0], ctl.x_hat_last
            cost_x[t0] = seq[t0].eval_x(x[t0])
            cost_u[t0] = seq[t0].eval_u(u[t0])
        used_backend = "python"

    theta0 = x_hat[0].copy()
    eta0 = config.v0.copy()
    path = path_metrics(seq, theta0, eta0)
    stage = cost_x + cost_u
    total = float(stage.sum())
    comp = comparator_regret(stage, seq)

    record = RunRecord(
        x=x, u=u, v=v, g=g,
        x_hat=x_hat if config.record_predictions else None,
        theta=thetas, eta=etas, cost_x=cost_x, cost_u=cost_u,
        x0=config.x0.copy(), theta0=theta0, eta0=eta0, mu=ctrb.mu,
        total_cost=total, comparator_regret=comp, path=path,
        backend=used_backend,
    )
    if config.compute_regret:
        bench = optimal_trajectory(sys, seq, config.x0)
        record.regret = regret(stage, bench)
    if step_report.passed and config.horizon >= ctrb.mu:
        cert = compute_constants(sys, ctrb, moduli, config.gamma_v, config.gamma_x)
        # C_mu and the lemma anchors need the prediction row even when the
        # caller asked not to keep predictions
        snapshot = record if record.x_hat is not None else dataclasses.replace(record, x_hat=x_hat)
        cert = attach_run(cert, snapshot)
        record.certificate = cert
        record.bound_report = verify_bound(
            cert, record.regret if record.regret is not None else float("nan"), comp
        )
    return record


def experiment_tracking(seed: int, out_dir=None, horizon: int = 30,
                        backend: str = "auto") -> RunRecord:
    """Random-setpoint tracking run on the demo plant (T = 30 by default).

    Writes trajectory.csv and certificate.json under out_dir when given.
    """
    config = RunConfig(
        system=demo_system(),
        horizon=horizon,
        seed=seed,
        backend=backend,
    )
    record = run_closed_loop(config)
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        export(record, os.path.join(out_dir, "trajectory.csv"), "csv")
        export(record, os.path.join(out_dir, "certificate.json"), "json")
    return record


@dataclass
class SweepRecord:
    """Per-run aggregates of a change-probability sweep, ordered by run index."""

    rows: list
    root_seed: int
    horizon: int

    COLUMNS = ("run", "change_prob", "path_length", "Theta_T", "H_T",
               "total_cost", "regret", "comparator_regret", "bound", "bound_ok")

    def column(self, name: str) -> np.ndarray:
        return np.array([row[name] for row in self.rows])


def _sweep_seed(root_seed: int, run_index: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(entropy=root_seed, spawn_key=(run_index,))


def sweep_run(root_seed: int, run_index: int, num_runs: int, horizon: int,
              backend: str = "auto") -> dict:
    """One sweep member: change probability 0.25 * j / num_runs for run j."""
    change_prob = 0.25 * run_index / num_runs
    config = RunConfig(
        system=demo_system(),
        horizon=horizon,
        seed=_sweep_seed(root_seed, run_index),
        setpoints=SetpointSpec(mode="random", change_prob=change_prob),
        backend=backend,
    )
    record = run_closed_loop(config)
    return {
        "run": run_index,
        "change_prob": change_prob,
        "path_length": record.path.path_length,
        "Theta_T": record.path.Theta_T,
        "H_T": record.path.H_T,
        "total_cost": record.total_cost,
        "regret": record.regret,
        "comparator_regret": record.comparator_regret,
        "bound": record.certificate.bound,
        "bound_ok": record.bound_report.passed,
    }


def experiment_pathlength(num_runs: int = 1000, horizon: int = 500, seed: int = 0,
                          out_dir=None, run_order=None, backend: str = "auto") -> SweepRecord:
    """Change-probability sweep: run j uses probability 0.25 * j / num_runs.

    run_order permutes execution only; rows are always reduced in run-index
    order, so any execution order yields the identical record.
    """
    if num_runs < 2:
        raise ValueError("sweep needs at least 2 runs")
    order = list(range(1, num_runs + 1)) if run_order is None else list(run_order)
    if sorted(order) != list(range(1, num_runs + 1)):
        raise ValueError("run_order must be a permutation of 1..num_runs")
    rows = {}
    for j in order:
        rows[j] = sweep_run(seed, j, num_runs, horizon, backend=backend)
    sweep = SweepRecord(rows=[rows[j] for j in range(1, num_runs + 1)],
                        root_seed=seed, horizon=horizon)
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        export(sweep, os.path.join(out_dir, "sweep.csv"), "csv")
    return sweep


def trajectory_csv(record: RunRecord) -> str:
    """Trajectory CSV: t,x_1..x_n,u_1..u_m,theta_1..theta_n,eta_1..eta_m,cost_x,cost_u."""
    n = record.x.shape[1]
    m = record.u.shape[1]
    header = (
        ["t"]
        + [f"x_{i + 1}" for i in range(n)]
        + [f"u_{j + 1}" for j in range(m)]
        + [f"theta_{i + 1}" for i in range(n)]
        + [f"eta_{j + 1}" for j in range(m)]
        + ["cost_x", "cost_u"]
    )
    lines = [",".join(header)]
    for t0 in range(record.T):
        vals = (
            [str(t0 + 1)]
            + [_fmt(v) for v in record.x[t0]]
            + [_fmt(v) for v in record.u[t0]]
            + [_fmt(v) for v in record.theta[t0]]
            + [_fmt(v) for v in record.eta[t0]]
            + [_fmt(record.cost_x[t0]), _fmt(record.cost_u[t0])]
        )
        lines.append(",".join(vals))
    return "\n".join(lines) + "\n"


def sweep_csv(sweep: SweepRecord) -> str:
    lines = [",".join(SweepRecord.COLUMNS)]
    for row in sweep.rows:
        vals = [str(row["run"])]
        for name in SweepRecord.COLUMNS[1:-1]:
            vals.append(_fmt(row[name]))
        vals.append("true" if row["bound_ok"] else "false")
        lines.append(",".join(vals))
    return "\n".join(lines) + "\n"


def summary_dict(record: RunRecord) -> dict:
    """JSON-ready aggregates: totals, regrets, path metrics, certificate."""
    d = {
        "horizon": record.T,
        "mu": record.mu,
        "backend": record.backend,
        "total_cost": record.total_cost,
        "regret": record.regret,
        "comparator_regret": record.comparator_regret,
        "path_length": record.path.path_length,
        "Theta_T": record.path.Theta_T,
        "H_T": record.path.H_T,
        "theta0": list(record.theta0),
        "eta0": list(record.eta0),
        "certificate": record.certificate.to_dict() if record.certificate else None,
    }
    if record.bound_report is not None:
        d["bound"] = record.bound_report.bound
        d["bound_ok"] = record.bound_report.passed
        d["bound_slack"] = record.bound_report.slack
    return d


def export(record, path, format: str = "csv") -> None:
    """Write a run or sweep record; floats carry 17 significant digits."""
    try:
        if format == "csv":
            text = trajectory_csv(record) if isinstance(record, RunRecord) else sweep_csv(record)
            with open(path, "w", newline="") as fh:
                fh.write(text)
        elif format == "json":
            if not isinstance(record, RunRecord):
                raise ValueError("json export applies to run records")
            with open(path, "w") as fh:
                json.dump(summary_dict(record), fh, indent=2)
                fh.write("\n")
        else:
            raise ValueError(f"unknown export format {format!r}")
    except OSError as exc:
        raise OSError(f"failed writing {path}: {exc}") from exc


def export_benchmark(opt, seq: CostSequence, path) -> None:
    """Write a hindsight-optimal trajectory in the run-trajectory CSV schema."""
    thetas, etas = seq.minimizers()
    cost_x = np.array([seq[t0].eval_x(opt.x_star[t0]) for t0 in range(len(seq))])
    cost_u = np.array([seq[t0].eval_u(opt.u_star[t0]) for t0 in range(len(seq))])
    record = RunRecord(
        x=opt.x_star, u=opt.u_star, v=opt.u_star, g=None, x_hat=None,
        theta=thetas, eta=etas, cost_x=cost_x, cost_u=cost_u,
        x0=None, theta0=thetas[0], eta0=etas[0], mu=0,
        total_cost=opt.total_cost, comparator_regret=0.0, path=None,
    )
    with open(path, "w", newline="") as fh:
        fh.write(trajectory_csv(record))


def load_trajectory(path) -> dict:
    """Read a trajectory CSV back into arrays keyed like the record fields."""
    with open(path, newline="") as fh:
        header = fh.readline().strip().split(",")
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    cols = {name: data[:, k] for k, name in enumerate(header)}
    n = sum(1 for h in header if h.startswith("x_"))
    m = sum(1 for h in header if h.startswith("u_"))
    return {
        "t": cols["t"].astype(int),
        "x": np.column_stack([cols[f"x_{i + 1}"] for i in range(n)]),
        "u": np.column_stack([cols[f"u_{j + 1}"] for j in range(m)]),
        "theta": np.column_stack([cols[f"theta_{i + 1}"] for i in range(n)]),
        "eta": np.column_stack([cols[f"eta_{j + 1}"] for j in range(m)]),
        "cost_x": cols["cost_x"],
        "cost_u": cols["cost_u"],
    }


def load_summary(path) -> dict:
    with open(path) as fh:
        return json.load(fh)


def assumption_report(config: RunConfig) -> dict:
    """Controllability, steady-state, and step-size checks for a config."""
    from .lin_system import check_assumption3

    sys = config.system
    ctrb = build_controllability(sys)
    a3 = check_assumption3(ctrb, config.q, config.q)
    steps = validate_step_sizes(
        config.gamma_v, config.gamma_x, config.r, config.r, config.q, config.q, ctrb.A_norm
    )
    steady = None
    if config.setpoints.mode == "schedule":
        seq = _build_sequence(config)
        thetas, etas = seq.minimizers()
        steady = all(
            check_steady_state(sys, thetas[t0], etas[t0], tol=1e-9)
            for t0 in range(len(seq))
        )
    return {
        "mu": ctrb.mu,
        "A_norm": ctrb.A_norm,
        "norm_condition": a3,
        "step_sizes": steps,
        "schedule_steady_state": steady,
    }
