import numpy as np
import pytest

from bhquench.lattice import Lattice
from bhquench.state import Layout, OnSiteDistribution, PairCorrelations, SystemState, full_to_ti, ti_to_full


def random_full_state(lattice: Lattice, n_max: int, rng, scale: float = 0.05, t: float = 0.0) -> SystemState:
    """Arbitrary state with normalized p rows and Hermitian-consistent pair blocks."""
    n = lattice.n_sites
    p = rng.random((n, n_max + 1))
    p /= p.sum(axis=1, keepdims=True)
    f = scale * (rng.normal(size=(n, n, n_max, n_max)) + 1j * rng.normal(size=(n, n, n_max, n_max)))
    f = 0.5 * (f + np.conj(np.swapaxes(np.swapaxes(f, 0, 1), 2, 3)))
    f[np.arange(n), np.arange(n)] = 0.0
    return SystemState(t, OnSiteDistribution(p), PairCorrelations(f, Layout.FULL, lattice.sizes))


def random_homogeneous_state(lattice: Lattice, n_max: int, rng, scale: float = 0.05) -> SystemState:
    """Translation-invariant random state in FULL layout."""
    ti = full_to_ti(random_full_state(lattice, n_max, rng, scale), lattice)
    # symmetrize the TI blocks: f(s) = mirror(f(-s))
    f = ti.f
    neg = np.flip(np.roll(f, -1, axis=tuple(range(lattice.dimension))), axis=tuple(range(lattice.dimension)))
    f = 0.5 * (f + np.conj(np.swapaxes(neg, -1, -2)))
    f[(0,) * lattice.dimension] = 0.0
    return ti_to_full(SystemState(0.0, ti.onsite, PairCorrelations(f, Layout.TI, lattice.sizes)), lattice)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# --- shared long runs (computed once per session) ------------------------------


@pytest.fixture(scope="session")
def chain50_run():
    """1D L=50, J/U=0.1, dt=0.01/U to tU=250, sampled every 0.1/U."""
    import logging
    import time

    from bhquench.config import validate
    from bhquench.runner import run_simulation

    logging.getLogger("bhquench").setLevel(logging.ERROR)
    cfg = validate(dict(mode="simulate", sizes=[50], t_final=250.0, sample_stride=10))
    start = time.perf_counter()
    sim = run_simulation(cfg)
    return cfg, sim, time.perf_counter() - start


@pytest.fixture(scope="session")
def square30_run():
    """2D 30x30, J/U=0.1, dt=0.01/U to tU=80, sampled every 0.05/U."""
    from bhquench.config import validate
    from bhquench.runner import run_simulation

    cfg = validate(dict(mode="simulate", sizes=[30, 30], t_final=80.0, sample_stride=5))
    return cfg, run_simulation(cfg)
