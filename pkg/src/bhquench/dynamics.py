"""Closed equations of motion for on-site probabilities and pair correlations.

With three-point correlations dropped (and the O(1/Z^2) commutator of the bond
Hamiltonian with the pair correlation omitted), the state (p, f) obeys

    dp_mu1(n)/dt = -(2J/Z) sum_mu2 T Im[ sqrt(n) psi^{n,n-1} - sqrt(n+1) psi^{n+1,n} ]

    i df^{n1 n2}/dt = U (n2 - n1) f^{n1 n2}
        - (J/Z) T_12 sqrt(n1+1) sqrt(n2+1) [p1(n1+1) p2(n2) - p1(n1) p2(n2+1)]
        - (J/Z) sum_{mu3 ~ mu1} sqrt(n1+1) [p1(n1+1) - p1(n1)] conj(psi_{mu2 mu3}^{n2+1,n2})
        - (J/Z) sum_{mu3 ~ mu2} sqrt(n2+1) [p2(n2) - p2(n2+1)] psi_{mu1 mu3}^{n1+1,n1}

with mu3 != mu1, mu2. Because diagonal pair blocks are held at zero, psi
vanishes on them and those exclusions happen automatically.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .lattice import Lattice
from .state import Layout, SystemState, psi_tensor, sqrt_ladder

log = logging.getLogger(__name__)

MAX_DT_U = 0.05


class IntegrationError(FloatingPointError):
    pass


@dataclass(frozen=True)
class HamiltonianParams:
    """Post-quench couplings; J jumps from 0 to ``J`` at t = 0."""

    J: float = 0.1
    U: float = 1.0

    def __post_init__(self):
        if not self.U > 0:
            raise ValueError("U must be positive")
        if self.J < 0:
            raise ValueError("J must be non-negative")


@dataclass(frozen=True)
class IntegratorConfig:
    dt: float = 0.01
    t_final: float = 1.0
    sample_stride: int = 10
    enforce_step_bound: bool = True

    def validate(self, U: float = 1.0) -> None:
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.t_final < 0:
            raise ValueError("t_final must be non-negative")
        if self.sample_stride < 1:
            raise ValueError("sample_stride must be >= 1")
        if self.enforce_step_bound and self.dt * U > MAX_DT_U + 1e-12:
            raise ValueError(f"dt*U = {self.dt * U:g} exceeds the stability bound {MAX_DT_U}")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_final / self.dt))


# --- right-hand sides on raw arrays ------------------------------------------


def _onsite_from_psi_sum(s: np.ndarray, J: float, Z: int) -> np.ndarray:
    """dp/dt from S[..., m] = sum over neighbors of psi^{m+1,m}."""
    g = s * sqrt_ladder(s.shape[-1])
    x = np.zeros(s.shape[:-1] + (s.shape[-1] + 1,), dtype=complex)
    x[..., 1:] += g
    x[..., :-1] -= g
    return -(2.0 * J / Z) * x.imag


def _pair_weights(p: np.ndarray):
    sq = sqrt_ladder(p.shape[-1] - 1)
    up, down = p[..., 1:], p[..., :-1]
    # sqrt(n1+1) [p(n1+1) - p(n1)] and sqrt(n2+1) [p(n2) - p(n2+1)]
    return sq, sq * (up - down), sq * (down - up)


def _oscillation(n_max: int, U: float) -> np.ndarray:
    n = np.arange(n_max)
    return U * (n[None, :] - n[:, None])


def rhs_full_arrays(p, f, lattice: Lattice, params: HamiltonianParams):
    J, U, Z = params.J, params.U, lattice.coordination
    n_max = f.shape[-1]
    psi = psi_tensor(f)
    nbr = lattice.neighbor_table
    adj = lattice.adjacency

    s = np.einsum("ab,abm->am", adj, psi)
    dp = _onsite_from_psi_sum(s, J, Z)

    sq, w1, w2 = _pair_weights(p)
    up, down = p[:, 1:], p[:, :-1]
    src = (
        adj[:, :, None, None]
        * (sq[:, None] * sq[None, :])
        * (up[:, None, :, None] * down[None, :, None, :] - down[:, None, :, None] * up[None, :, None, :])
    )
    # A[mu1, mu2, n2] = sum_{mu3 ~ mu1} conj psi[mu2, mu3, n2]
    a = np.zeros_like(psi)
    b = np.zeros_like(psi)
    for j in range(Z):
        a += np.conj(psi[:, nbr[:, j], :]).transpose(1, 0, 2)
        b += psi[:, nbr[:, j], :]
    prop = w1[:, None, :, None] * a[:, :, None, :] + w2[None, :, None, :] * b[:, :, :, None]
    df = -1j * (_oscillation(n_max, U) * f - (J / Z) * (src + prop))
    idx = np.arange(lattice.n_sites)
    df[idx, idx] = 0.0
    return dp, df


def rhs_full_upper_arrays(p, f, lattice: Lattice, params: HamiltonianParams):
    """FULL right-hand side evaluated on pairs mu1 < mu2 only, lower half by mirroring."""
    J, U, Z = params.J, params.U, lattice.coordination
    n_max = f.shape[-1]
    n = lattice.n_sites
    i1, i2 = np.triu_indices(n, k=1)
    psi = psi_tensor(f)
    nbr = lattice.neighbor_table
    adj = lattice.adjacency

    s = np.einsum("ab,abm->am", adj, psi)
    dp = _onsite_from_psi_sum(s, J, Z)

    sq, w1, w2 = _pair_weights(p)
    up, down = p[:, 1:], p[:, :-1]
    src = (
        adj[i1, i2][:, None, None]
        * np.outer(sq, sq)
        * (up[i1][:, :, None] * down[i2][:, None, :] - down[i1][:, :, None] * up[i2][:, None, :])
    )
    a = np.conj(psi[i2[:, None], nbr[i1]]).sum(axis=1)
    b = psi[i1[:, None], nbr[i2]].sum(axis=1)
    prop = w1[i1][:, :, None] * a[:, None, :] + w2[i2][:, None, :] * b[:, :, None]
    upper = -1j * (_oscillation(n_max, U) * f[i1, i2] - (J / Z) * (src + prop))
    df = np.zeros_like(f)
    df[i1, i2] = upper
    df[i2, i1] = np.conj(np.swapaxes(upper, -1, -2))
    return dp, df


def rhs_ti_arrays(p, f, lattice: Lattice, params: HamiltonianParams):
    """Translation-invariant right-hand side; f is indexed by displacement mod L."""
    J, U, Z = params.J, params.U, lattice.coordination
    n_max = f.shape[-1]
    dim = lattice.dimension
    axes = tuple(range(dim))
    psi = psi_tensor(f)
    psi_neg = np.roll(np.flip(psi, axis=axes), 1, axis=axes)  # psi_neg[s] = psi[-s]

    s_sum = np.zeros(n_max, dtype=complex)
    a = np.zeros_like(psi)
    b = np.zeros_like(psi)
    for e in lattice.displacements:
        e = tuple(int(c) for c in e)
        s_sum += psi[tuple(np.mod(e, lattice.sizes))]
        a += np.conj(np.roll(psi_neg, e, axis=axes))  # conj psi(e - s)
        b += np.roll(psi, tuple(-c for c in e), axis=axes)  # psi(s + e)
    dp = _onsite_from_psi_sum(s_sum[None, :], J, Z)

    p1 = p[0]
    sq, w1, w2 = _pair_weights(p1)
    up, down = p1[1:], p1[:-1]
    src_block = np.outer(sq, sq) * (np.outer(up, down) - np.outer(down, up))
    src = lattice.neighbor_mask[..., None, None] * src_block
    prop = w1[:, None] * a[..., None, :] + w2[None, :] * b[..., :, None]
    df = -1j * (_oscillation(n_max, U) * f - (J / Z) * (src + prop))
    df[(0,) * dim] = 0.0
    return dp, df


def _rhs_arrays(p, f, lattice, params, layout: Layout, mirror: bool = False):
    if layout is Layout.TI:
        return rhs_ti_arrays(p, f, lattice, params)
    if mirror:
        return rhs_full_upper_arrays(p, f, lattice, params)
    return rhs_full_arrays(p, f, lattice, params)


# --- public operations -------------------------------------------------------


def rhs_onsite(state: SystemState, lattice: Lattice, params: HamiltonianParams) -> np.ndarray:
    return _rhs_arrays(state.p, state.f, lattice, params, state.layout)[0]


def rhs_pair(state: SystemState, lattice: Lattice, params: HamiltonianParams) -> np.ndarray:
    return _rhs_arrays(state.p, state.f, lattice, params, state.layout)[1]


def step_rk4(
    state: SystemState, lattice: Lattice, params: HamiltonianParams, dt: float, mirror: bool = False
) -> SystemState:
    """One classical fourth-order Runge-Kutta step of size ``dt``."""
    p0, f0 = state.p, state.f

    def rhs(p, f):
        return _rhs_arrays(p, f, lattice, params, state.layout, mirror)

    k1p, k1f = rhs(p0, f0)
    k2p, k2f = rhs(p0 + 0.5 * dt * k1p, f0 + 0.5 * dt * k1f)
    k3p, k3f = rhs(p0 + 0.5 * dt * k2p, f0 + 0.5 * dt * k2f)
    k4p, k4f = rhs(p0 + dt * k3p, f0 + dt * k3f)
    p = p0 + (dt / 6.0) * (k1p + 2 * k2p + 2 * k3p + k4p)
    f = f0 + (dt / 6.0) * (k1f + 2 * k2f + 2 * k3f + k4f)
    t = state.t + dt
    if not (np.all(np.isfinite(p)) and np.all(np.isfinite(f))):
        with np.errstate(invalid="ignore"):
            fmax = np.nanmax(np.abs(f)) if f.size else 0.0
        raise IntegrationError(f"non-finite state at t={t:.6g} (max |f| = {fmax:.3e})")
    return state.with_arrays(t, p, f)


@dataclass
class EvolutionSummary:
    final_state: SystemState
    n_steps: int
    n_samples: int
    max_trace_deviation: float = 0.0
    max_number_drift: float = 0.0
    max_energy_drift: float = 0.0
    positivity_warnings: list[tuple[float, float]] = field(default_factory=list)


def evolve(
    state0: SystemState,
    lattice: Lattice,
    params: HamiltonianParams,
    integrator: IntegratorConfig,
    sampler: Callable[[SystemState], None] | None = None,
    mirror: bool = False,
) -> EvolutionSummary:
    """Integrate from ``state0`` to ``t_final``, calling ``sampler`` every ``sample_stride`` steps.

    The sampler sees t = 0 and the final state (if the final step is off-stride
    it is sampled too). Conservation drifts are tracked at every sample;
    ``max_energy_drift`` is relative to the larger of |E(0)| and the largest
    interaction energy seen, since E(0) vanishes at unit filling.
    """
    from .observables import energy, interaction_energy, total_number

    integrator.validate(params.U)
    if state0.n_max == 2:
        warnings.warn(
            "n_max=2 truncates the 2->3 occupation channel; use n_max>=3 for converged results",
            stacklevel=2,
        )
    n_steps = integrator.n_steps
    stride = integrator.sample_stride
    e0 = energy(state0, lattice, params)
    n0 = total_number(state0, lattice)
    e_scale = max(abs(e0), 1e-300)
    summary = EvolutionSummary(state0, n_steps, 0)
    energies = []
    negative = False

    def monitor(state):
        trace_dev = float(np.max(np.abs(state.p.sum(axis=1) - 1.0)))
        summary.max_trace_deviation = max(summary.max_trace_deviation, trace_dev)
        num = total_number(state, lattice)
        summary.max_number_drift = max(summary.max_number_drift, abs(num - n0) / max(abs(n0), 1e-300))
        energies.append(energy(state, lattice, params))
        nonlocal e_scale
        e_scale = max(e_scale, abs(interaction_energy(state, lattice, params)))
        pmin = float(state.p.min())
        nonlocal negative
        if pmin < 0.0:
            summary.positivity_warnings.append((state.t, pmin))
            if not negative:
                log.warning("negative occupation probability %.3e at t=%.6g", pmin, state.t)
        negative = pmin < 0.0
        summary.n_samples += 1
        if sampler is not None:
            sampler(state)

    state = state0
    monitor(state)
    for step in range(1, n_steps + 1):
        state = step_rk4(state, lattice, params, integrator.dt, mirror)
        if step % stride == 0 or step == n_steps:
            monitor(state)
    summary.final_state = state
    summary.max_energy_drift = float(np.max(np.abs(np.array(energies) - e0)) / e_scale)
    return summary
