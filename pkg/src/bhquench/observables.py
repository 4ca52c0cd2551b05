"""Observables and diagnostics for truncated states and their trajectories."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import HamiltonianParams
from .lattice import Lattice
from .state import Layout, SystemState, sqrt_ladder


class FrontNotDetected(ValueError):
    pass


class RevivalNotDetected(ValueError):
    pass


def _obdm_weights(n_max: int) -> np.ndarray:
    sq = sqrt_ladder(n_max)
    return np.outer(sq, sq)


def _raw_obdm(state: SystemState, mu1: int, mu2: int) -> complex:
    return complex(np.sum(_obdm_weights(state.n_max) * state.pairs.block(mu1, mu2)))


def obdm(state: SystemState, mu1: int, mu2: int) -> complex:
    """<b^dag_mu1 b_mu2> = sum_{n,m} sqrt(n+1) sqrt(m+1) f^{n m}_{mu1 mu2} for mu1 != mu2.

    Averaged with the mirrored pair so that Hermiticity holds bit for bit.
    """
    if mu1 == mu2:
        raise ValueError("on-site value is the density; use density(state, mu)")
    return 0.5 * (_raw_obdm(state, mu1, mu2) + np.conj(_raw_obdm(state, mu2, mu1)))


def obdm_map(state: SystemState) -> np.ndarray:
    """One-body density matrix for all stored pairs, exactly Hermitian.

    FULL: (N, N) array with zero diagonal. TI: array over the displacement grid.
    """
    raw = np.einsum("...nm,nm->...", state.f, _obdm_weights(state.n_max))
    if state.layout is Layout.FULL:
        return 0.5 * (raw + raw.conj().T)
    axes = tuple(range(raw.ndim))
    neg = np.roll(np.flip(raw, axis=axes), 1, axis=axes)
    return 0.5 * (raw + neg.conj())


def density(state: SystemState, mu: int) -> float:
    p = state.site_probabilities(mu)
    return float(np.arange(p.size) @ p)


def total_number(state: SystemState, lattice: Lattice) -> float:
    n = np.arange(state.n_max + 1)
    per_row = state.p @ n
    if state.layout is Layout.TI:
        return float(lattice.n_sites * per_row[0])
    return float(per_row.sum())


def number_variance_onsite(state: SystemState, lattice: Lattice) -> float:
    """Sum over sites of <n^2> - <n>^2. A diagnostic only; not conserved."""
    n = np.arange(state.n_max + 1)
    var = state.p @ n**2 - (state.p @ n) ** 2
    if state.layout is Layout.TI:
        return float(lattice.n_sites * var[0])
    return float(var.sum())


def interaction_energy(state: SystemState, lattice: Lattice, params: HamiltonianParams) -> float:
    n = np.arange(state.n_max + 1)
    per_row = state.p @ (0.5 * params.U * n * (n - 1))
    if state.layout is Layout.TI:
        return float(lattice.n_sites * per_row[0])
    return float(per_row.sum())


def hopping_energy(state: SystemState, lattice: Lattice, params: HamiltonianParams) -> float:
    g = obdm_map(state)
    pref = -params.J / lattice.coordination
    if state.layout is Layout.TI:
        return float(pref * lattice.n_sites * np.sum(g[lattice.neighbor_mask]).real)
    return float(pref * np.sum(lattice.adjacency * g).real)


def energy(state: SystemState, lattice: Lattice, params: HamiltonianParams) -> float:
    return hopping_energy(state, lattice, params) + interaction_energy(state, lattice, params)


@dataclass(frozen=True)
class ConservationRow:
    t: float
    trace_deviation: float
    number: float
    energy: float
    min_p: float
    interaction_energy: float = 0.0


def conservation_row(state: SystemState, lattice: Lattice, params: HamiltonianParams) -> ConservationRow:
    return ConservationRow(
        t=state.t,
        trace_deviation=float(np.max(np.abs(state.p.sum(axis=1) - 1.0))),
        number=total_number(state, lattice),
        energy=energy(state, lattice, params),
        min_p=float(state.p.min()),
        interaction_energy=interaction_energy(state, lattice, params),
    )


@dataclass
class ConservationReport:
    rows: list[ConservationRow]

    def max_trace_deviation(self) -> float:
        return max(r.trace_deviation for r in self.rows)

    def number_drift(self) -> float:
        n0 = self.rows[0].number
        return max(abs(r.number - n0) for r in self.rows) / abs(n0)

    def energy_drift(self, scale: float | None = None) -> float:
        """Max |E(t) - E(0)| divided by ``scale``.

        The default scale is the larger of |E(0)| and the largest interaction
        energy seen, which stays finite when E(0) vanishes at unit filling.
        """
        e = np.array([r.energy for r in self.rows])
        if scale is None:
            scale = max(abs(e[0]), max(abs(r.interaction_energy) for r in self.rows))
        return float(np.max(np.abs(e - e[0])) / scale)


# --- light-cone fronts -------------------------------------------------------


@dataclass(frozen=True)
class FrontFit:
    separations: np.ndarray
    arrival_times: np.ndarray
    velocity: float
    intercept: float
    residual: float


def front_arrival(times, separations, amplitudes, threshold: float = 1e-3, s_max=None, s_min=None) -> FrontFit:
    """Fit the arrival of |amplitude| >= threshold with a straight line s = v t + b.

    ``amplitudes`` has shape (n_times, n_separations). Only separations in
    [s_min, s_max] that cross the threshold are fitted.
    """
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    times = np.asarray(times, dtype=float)
    seps = np.asarray(separations, dtype=float)
    amp = np.abs(np.asarray(amplitudes))
    keep = np.ones(seps.shape, dtype=bool)
    if s_max is not None:
        keep &= seps <= s_max
    if s_min is not None:
        keep &= seps >= s_min
    crossed = amp >= threshold
    hit = crossed.any(axis=0) & keep
    if hit.sum() < 3:
        raise FrontNotDetected(
            f"only {int(hit.sum())} separations reach threshold {threshold:g}; need at least 3"
        )
    first = np.argmax(crossed, axis=0)
    s_fit = seps[hit]
    t_fit = times[first[hit]]
    if np.ptp(t_fit) == 0:
        raise FrontNotDetected("all separations arrive at the same sample; refine the time grid")
    v, b = np.polyfit(t_fit, s_fit, 1)
    resid = float(np.sqrt(np.mean((s_fit - (v * t_fit + b)) ** 2)))
    if v <= 0:
        raise FrontNotDetected(f"fitted front velocity {v:g} is not positive")
    return FrontFit(s_fit, t_fit, float(v), float(b), resid)


# --- revivals ----------------------------------------------------------------


def rolling_amplitude(times, series, window: float = 10.0) -> np.ndarray:
    """Peak-to-peak amplitude over the trailing window (t - W, t]; NaN before t = W."""
    times = np.asarray(times, dtype=float)
    series = np.asarray(series, dtype=float)
    out = np.full(series.shape, np.nan)
    start = 0
    for i, t in enumerate(times):
        while times[start] <= t - window:
            start += 1
        if t - times[0] >= window - 1e-12:
            seg = series[start : i + 1]
            out[i] = seg.max() - seg.min()
    return out


def revival_onset(times, series, window: float = 10.0, factor: float = 2.0) -> float:
    """Time at which oscillations return after the quiescent plateau.

    The plateau level is the minimum rolling amplitude; the onset is the first
    later time where the amplitude exceeds ``factor`` times that level.
    """
    times = np.asarray(times, dtype=float)
    amp = rolling_amplitude(times, series, window)
    valid = np.nonzero(~np.isnan(amp))[0]
    if valid.size == 0:
        raise RevivalNotDetected("series shorter than one window")
    i_min = valid[np.argmin(amp[valid])]
    level = amp[i_min]
    later = valid[valid > i_min]
    above = later[amp[later] > factor * level]
    if above.size == 0 or level == amp[valid].max():
        raise RevivalNotDetected("no revival detected")
    return float(times[above[0]])
