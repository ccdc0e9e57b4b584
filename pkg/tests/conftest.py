import numpy as np
import pytest

from ogdtrack.lin_system import LinearSystem, build_controllability
from ogdtrack.sim_harness import demo_system


@pytest.fixture(scope="session")
def demo_sys():
    return demo_system()


@pytest.fixture(scope="session")
def demo_ctrb(demo_sys):
    return build_controllability(demo_sys)


def random_controllable(rng, n_max=5, m_max=2, scale=0.8, max_cond=1e5):
    """Draw a random controllable (A, B).

    Rejects rank-deficient draws and near-uncontrollable ones whose S_c
    conditioning would put the 1e-10 operator identities out of reach of
    double precision.
    """
    while True:
        n = int(rng.integers(1, n_max + 1))
        m = int(rng.integers(1, min(m_max, n) + 1))
        A = rng.uniform(-1.0, 1.0, (n, n)) * scale
        B = rng.uniform(-1.0, 1.0, (n, m))
        sys = LinearSystem(A, B)
        try:
            ctrb = build_controllability(sys)
        except ValueError:
            continue
        sv = np.linalg.svd(ctrb.S_c, compute_uv=False)
        if sv[0] / sv[-1] > max_cond:
            continue
        return sys, ctrb
