"""Discrete-time linear plant and its controllability structure.

The plant is ``x_t = A x_{t-1} + B u_t`` (the input carries the index of the
state it produces). Controllability analysis yields the stacked-input
operators the controller needs: the controllability matrix ``S_c``, its right
inverse ``P``, the block down-shift ``W``, the last-block extractor ``e``, and
the block selectors ``E01`` / ``E10``.

Block convention inside stacked vectors of length mu*m: the FIRST m-block
multiplies B (the most recent input) and the LAST m-block multiplies
A^(mu-1) B (the oldest input).
"""

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import NotControllableError
from .reports import CheckReport

DEFAULT_RANK_TOL = 1e-9


def _as_matrix(M, name: str) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    if M.ndim != 2:
        raise ValueError(f"{name} must be a 2-d matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ValueError(f"{name} has non-finite entries")
    return M


def _as_vector(v, dim: int, name: str) -> np.ndarray:
    v = np.asarray(v, dtype=float).reshape(-1)
    if v.shape != (dim,):
        raise ValueError(f"{name} must have length {dim}, got {v.shape}")
    return v


@dataclass(frozen=True)
class LinearSystem:
    """The (A, B) pair with consistent dimensions."""

    A: np.ndarray
    B: np.ndarray

    def __post_init__(self):
        A = _as_matrix(self.A, "A")
        B = _as_matrix(self.B, "B")
        if A.shape[0] != A.shape[1]:
            raise ValueError(f"A must be square, got shape {A.shape}")
        if B.shape[0] != A.shape[0]:
            raise ValueError(f"B must have {A.shape[0]} rows, got shape {B.shape}")
        if A.shape[0] < 1 or B.shape[1] < 1:
            raise ValueError("state and input dimensions must be >= 1")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    @classmethod
    def from_dict(cls, spec: dict) -> "LinearSystem":
        """Build from ``{"A": [[...]], "B": [[...]]}`` (row-major nested lists)."""
        if "A" not in spec or "B" not in spec:
            raise ValueError("system spec needs 'A' and 'B' keys")
        B = np.asarray(spec["B"], dtype=float)
        if B.ndim == 1:
            B = B.reshape(-1, 1)
        return cls(np.asarray(spec["A"], dtype=float), B)


def load_system(path) -> LinearSystem:
    """Read a system from a JSON file with keys A and B."""
    with open(path) as fh:
        return LinearSystem.from_dict(json.load(fh))


def step(sys: LinearSystem, x_prev, u) -> np.ndarray:
    """One plant transition: A x_prev + B u."""
    x_prev = _as_vector(x_prev, sys.n, "x_prev")
    u = _as_vector(u, sys.m, "u")
    return sys.A @ x_prev + sys.B @ u


def spectral_norm(M) -> float:
    """Largest singular value of M (the Euclidean induced norm)."""
    M = _as_matrix(M, "M")
    if M.size == 0:
        return 0.0
    return float(np.linalg.norm(M, 2))


def _rank(M: np.ndarray, rank_tol: float) -> int:
    sv = np.linalg.svd(M, compute_uv=False)
    if sv.size == 0:
        return 0
    return int(np.sum(sv > rank_tol * sv[0]))


@dataclass(frozen=True)
class ControllabilityData:
    """Controllability index and the stacked-input operators built from it.

    Attributes:
        mu: controllability index, smallest k with rank [B ... A^(k-1)B] = n.
        S_c: n x (mu*m) controllability matrix (B  AB  ...  A^(mu-1)B).
        P: (mu*m) x n right inverse S_c^T (S_c S_c^T)^(-1).
        W: (mu*m) square block down-shift by one m-block.
        e: m x (mu*m) extractor of the last m-block.
        E01: selects the last (mu-1) blocks, (mu*m) x ((mu-1)m).
        E10: selects the first (mu-1) blocks, (mu*m) x ((mu-1)m).
        A_mu: A^mu, cached for the mu-step prediction.
        A_norm: spectral norm of A.
    """

    mu: int
    S_c: np.ndarray
    P: np.ndarray
    W: np.ndarray
    e: np.ndarray
    E01: np.ndarray
    E10: np.ndarray
    A_mu: np.ndarray
    A_norm: float


def build_controllability(sys: LinearSystem, rank_tol: float = DEFAULT_RANK_TOL) -> ControllabilityData:
    """Compute the controllability index mu and all derived operators.

    Rank is judged from singular values: sigma_i > rank_tol * sigma_max counts
    toward rank. Raises NotControllableError if even the n-block matrix is
    rank deficient.
    """
    n, m = sys.n, sys.m
    blocks = [sys.B]
    for _ in range(n - 1):
        blocks.append(sys.A @ blocks[-1])

    mu = None
    for k in range(1, n + 1):
        if _rank(np.hstack(blocks[:k]), rank_tol) == n:
            mu = k
            break
    if mu is None:
        raise NotControllableError(
            f"rank of (B AB ... A^{n - 1}B) is below n={n}; (A, B) is not controllable"
        )

    S_c = np.hstack(blocks[:mu])
    # right inverse S_c^T (S_c S_c^T)^(-1) via the SVD of S_c: solving against
    # the Gram matrix would square the conditioning and can miss the 1e-10
    # right-inverse contract on poorly conditioned controllable pairs
    U, sv, Vt = np.linalg.svd(S_c, full_matrices=False)
    P = (Vt.T / sv) @ U.T

    W = np.zeros((mu * m, mu * m))
    if mu > 1:
        W[m:, : (mu - 1) * m] = np.eye((mu - 1) * m)
    e = np.zeros((m, mu * m))
    e[:, (mu - 1) * m :] = np.eye(m)
    E01 = np.zeros((mu * m, (mu - 1) * m))
    if mu > 1:
        E01[m:, :] = np.eye((mu - 1) * m)
    E10 = np.zeros((mu * m, (mu - 1) * m))
    if mu > 1:
        E10[: (mu - 1) * m, :] = np.eye((mu - 1) * m)

    return ControllabilityData(
        mu=mu,
        S_c=S_c,
        P=P,
        W=W,
        e=e,
        E01=E01,
        E10=E10,
        A_mu=np.linalg.matrix_power(sys.A, mu),
        A_norm=spectral_norm(sys.A),
    )


def check_assumption3(ctrb: ControllabilityData, alpha_x: float, l_x: float) -> CheckReport:
    """Check the norm condition ||A|| < (l_x + alpha_x) / (2 (l_x - alpha_x)).

    With alpha_x == l_x the bound is +inf, so any controllable system passes.
    """
    if not (0 < alpha_x <= l_x):
        raise ValueError("need 0 < alpha_x <= l_x")
    bound = math.inf if l_x == alpha_x else (l_x + alpha_x) / (2.0 * (l_x - alpha_x))
    report = CheckReport()
    report.add(
        "norm_of_A_below_moduli_bound",
        ctrb.A_norm,
        bound,
        ctrb.A_norm < bound,
        "||A|| < (l_x+alpha_x)/(2(l_x-alpha_x))",
    )
    return report
