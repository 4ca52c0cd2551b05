"""First-order solutions in the inverse coordination number for the Mott quench."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lattice import Lattice


class MottValidityError(ValueError):
    """The particle-hole dispersion turned imaginary: J/U is outside the Mott regime."""


def _radicand(T_k, J, U):
    return U**2 - 6.0 * J * U * T_k + J**2 * T_k**2


def dispersion(T_k, J: float, U: float):
    """Particle-hole frequency omega_k = sqrt(U^2 - 6 J U T_k + J^2 T_k^2)."""
    r = _radicand(np.asarray(T_k, dtype=float), J, U)
    if np.any(r <= 0):
        raise MottValidityError(f"non-positive radicand (min {np.min(r):.3g}) at J={J}, U={U}")
    w = np.sqrt(r)
    return float(w) if np.ndim(w) == 0 else w


def dispersion_gradient(k: np.ndarray, J: float, U: float) -> np.ndarray:
    """grad_k omega for hypercubic T_k = mean(cos k_d); ``k`` has shape (..., D)."""
    k = np.asarray(k, dtype=float)
    dim = k.shape[-1]
    t = np.mean(np.cos(k), axis=-1)
    w = dispersion(t, J, U)
    coef = (3.0 * J * U - J**2 * t) / (dim * np.asarray(w))
    return coef[..., None] * np.sin(k)


@dataclass(frozen=True)
class DispersionTable:
    modes: np.ndarray
    T_k: np.ndarray
    omega: np.ndarray
    group_velocity: np.ndarray


def dispersion_table(lattice: Lattice, J: float, U: float) -> DispersionTable:
    modes = lattice.bz_modes()
    t = lattice.fourier_adjacency_grid(modes)
    return DispersionTable(modes, t, dispersion(t, J, U), dispersion_gradient(modes, J, U))


def _mode_weights(lattice, J, U, t, modes):
    if modes is None:
        modes = lattice.bz_modes()
    tk = lattice.fourier_adjacency_grid(modes)
    w = np.atleast_1d(dispersion(tk, J, U))
    tt = np.atleast_1d(np.asarray(t, dtype=float))
    weight = (1.0 - np.cos(np.outer(tt, w))) / w**2
    return modes, tk, weight


def p0_first_order(lattice: Lattice, J: float, U: float, t, modes=None):
    """p(0) = p(2) = (4 J^2 / N) sum_k T_k^2 (1 - cos omega_k t) / omega_k^2."""
    modes, tk, weight = _mode_weights(lattice, J, U, t, modes)
    out = 4.0 * J**2 / len(tk) * (weight @ tk**2)
    return float(out[0]) if np.ndim(t) == 0 else out


def obdm_first_order_complex(lattice: Lattice, J: float, U: float, separation, t, modes=None):
    modes, tk, weight = _mode_weights(lattice, J, U, t, modes)
    s = np.atleast_2d(np.asarray(separation, dtype=float))
    phase = np.exp(1j * modes @ s.T)  # (n_modes, n_sep)
    out = 4.0 * J * U / len(tk) * ((weight * tk) @ phase)  # (n_t, n_sep)
    if np.ndim(t) == 0:
        out = out[0]
    if np.ndim(separation) <= 1 and np.asarray(separation).size == lattice.dimension:
        out = out[..., 0]
    return out


def obdm_first_order(lattice: Lattice, J: float, U: float, separation, t, modes=None):
    """<b^dag_x b_{x+s}> = (4 J U / N) sum_k T_k (1 - cos omega_k t)/omega_k^2 e^{i k s} (real part).

    ``separation`` is one displacement of length D or an array of them (n_sep, D);
    ``t`` is a scalar or 1-d array. The k-sum is real on inversion-symmetric lattices.
    """
    out = np.real(obdm_first_order_complex(lattice, J, U, separation, t, modes))
    return float(out) if np.ndim(out) == 0 else out


def _direction(dimension: int, direction) -> np.ndarray:
    if isinstance(direction, str):
        if direction == "axis":
            v = np.zeros(dimension)
            v[0] = 1.0
        elif direction == "diagonal":
            v = np.ones(dimension)
        else:
            raise ValueError(f"unknown direction {direction!r}")
    else:
        v = np.asarray(direction, dtype=float)
    return v / np.linalg.norm(v)


def group_velocity_max(
    lattice: Lattice | int, J: float, U: float, direction="axis", tol: float | None = None
) -> float:
    """Largest projection of grad_k omega onto ``direction`` (lattice spacings per unit time).

    A coarse grid over the zone is refined by repeatedly zooming onto the best
    point until the maximum changes by less than ``tol`` (default 1e-4 J).
    """
    dim = lattice if isinstance(lattice, int) else lattice.dimension
    u = _direction(dim, direction)
    if tol is None:
        tol = 1e-4 * max(J, 1e-300)
    if J == 0:
        return 0.0
    # validity on the whole zone: T_k ranges over [-1, 1]
    dispersion(np.array([-1.0, 1.0]), J, U)

    def best_on(center, half_width, points):
        axes = [np.linspace(c - half_width, c + half_width, points) for c in center]
        grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, dim)
        proj = dispersion_gradient(grid, J, U) @ u
        i = int(np.argmax(proj))
        return grid[i], float(proj[i])

    points = {1: 2001, 2: 201, 3: 41}.get(dim, 11)
    center, value = best_on(np.zeros(dim), np.pi, points)
    half = np.pi
    for _ in range(200):
        half *= 4.0 / (points - 1)
        center, new = best_on(center, half, points)
        if abs(new - value) < tol and half < 1e-6:
            return new
        value = max(value, new)
    return value
