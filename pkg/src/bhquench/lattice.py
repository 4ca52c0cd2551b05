"""Periodic hypercubic lattices: adjacency, neighbor tables and Brillouin-zone modes."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

_GRID_TOL = 1e-9


@dataclass(frozen=True)
class LatticeSpec:
    """Linear sizes of a periodic hypercubic lattice, one entry per axis."""

    sizes: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "sizes", tuple(int(s) for s in self.sizes))

    @property
    def dimension(self) -> int:
        return len(self.sizes)

    @property
    def n_sites(self) -> int:
        return int(np.prod(self.sizes)) if self.sizes else 0


@dataclass(frozen=True)
class Lattice:
    """Periodic hypercubic lattice with row-major site indexing.

    Sites are numbered with the last axis running fastest, i.e. the flat index
    of ``(x_1, ..., x_D)`` is ``np.ravel_multi_index(x, sizes)``.
    """

    spec: LatticeSpec
    displacements: np.ndarray = field(repr=False)
    neighbor_table: np.ndarray = field(repr=False)

    @property
    def sizes(self) -> tuple[int, ...]:
        return self.spec.sizes

    @property
    def dimension(self) -> int:
        return self.spec.dimension

    @property
    def n_sites(self) -> int:
        return self.spec.n_sites

    @property
    def coordination(self) -> int:
        return 2 * self.dimension

    def coords(self, site: int) -> tuple[int, ...]:
        self._check_site(site)
        return tuple(int(c) for c in np.unravel_index(site, self.sizes))

    def index(self, coords) -> int:
        coords = np.mod(np.asarray(coords, dtype=int), self.sizes)
        return int(np.ravel_multi_index(tuple(coords), self.sizes))

    @cached_property
    def all_coords(self) -> np.ndarray:
        """(N, D) integer coordinates of every site."""
        return np.stack(np.unravel_index(np.arange(self.n_sites), self.sizes), axis=1)

    def neighbors(self, site: int) -> list[int]:
        self._check_site(site)
        return [int(s) for s in self.neighbor_table[site]]

    @cached_property
    def adjacency(self) -> np.ndarray:
        """Dense 0/1 adjacency matrix T."""
        t = np.zeros((self.n_sites, self.n_sites))
        rows = np.repeat(np.arange(self.n_sites), self.coordination)
        t[rows, self.neighbor_table.ravel()] = 1.0
        return t

    @cached_property
    def neighbor_mask(self) -> np.ndarray:
        """Boolean array over the displacement grid marking neighbor displacements."""
        mask = np.zeros(self.sizes, dtype=bool)
        for e in self.displacements:
            mask[tuple(np.mod(e, self.sizes))] = True
        return mask

    def canonical_displacement(self, disp) -> tuple[int, ...]:
        """Reduce a displacement to the symmetric range (-L/2, L/2] per axis."""
        out = []
        for d, size in zip(np.asarray(disp, dtype=int), self.sizes):
            r = int(d) % size
            if r > size // 2:
                r -= size
            out.append(r)
        return tuple(out)

    def displacement(self, site1: int, site2: int) -> tuple[int, ...]:
        """Canonical displacement x_2 - x_1."""
        return self.canonical_displacement(
            np.asarray(self.coords(site2)) - np.asarray(self.coords(site1))
        )

    def bz_modes(self) -> np.ndarray:
        """All N grid wavevectors, shape (N, D), components 2*pi*m/L with m in [0, L)."""
        axes = [2 * np.pi * np.arange(size) / size for size in self.sizes]
        grid = np.meshgrid(*axes, indexing="ij")
        return np.stack([g.ravel() for g in grid], axis=1)

    def fourier_adjacency(self, k) -> float:
        """T_k = (1/D) sum_d cos k_d for k on the lattice's reciprocal grid."""
        k = np.atleast_1d(np.asarray(k, dtype=float))
        if k.shape != (self.dimension,):
            raise ValueError(f"wavevector must have {self.dimension} components, got {k.shape}")
        m = k * np.asarray(self.sizes) / (2 * np.pi)
        if np.any(np.abs(m - np.round(m)) > _GRID_TOL):
            raise ValueError(f"wavevector {k} is not on the 2*pi/L grid of sizes {self.sizes}")
        return float(np.mean(np.cos(k)))

    def fourier_adjacency_grid(self, modes: np.ndarray | None = None) -> np.ndarray:
        """Vectorised T_k over a set of modes (defaults to ``bz_modes``), no grid check."""
        if modes is None:
            modes = self.bz_modes()
        return np.mean(np.cos(modes), axis=-1)

    def _check_site(self, site: int) -> None:
        if not 0 <= site < self.n_sites:
            raise IndexError(f"site {site} out of range for lattice with {self.n_sites} sites")


def build_hypercubic(spec: LatticeSpec) -> Lattice:
    if spec.dimension < 1:
        raise ValueError("lattice dimension must be at least 1")
    if any(size < 3 for size in spec.sizes):
        raise ValueError(
            f"every periodic axis needs at least 3 sites (got {spec.sizes}); "
            "L=2 would double-count the wrap-around bond"
        )
    dim = spec.dimension
    displacements = np.zeros((2 * dim, dim), dtype=int)
    for d in range(dim):
        displacements[2 * d, d] = 1
        displacements[2 * d + 1, d] = -1

    n = spec.n_sites
    coords = np.stack(np.unravel_index(np.arange(n), spec.sizes), axis=1)
    table = np.empty((n, 2 * dim), dtype=np.int64)
    for j, e in enumerate(displacements):
        shifted = np.mod(coords + e, spec.sizes)
        table[:, j] = np.ravel_multi_index(tuple(shifted.T), spec.sizes)
    displacements.setflags(write=False)
    table.setflags(write=False)
    return Lattice(spec=spec, displacements=displacements, neighbor_table=table)


def chain(length: int) -> Lattice:
    return build_hypercubic(LatticeSpec((length,)))


def square(lx: int, ly: int | None = None) -> Lattice:
    return build_hypercubic(LatticeSpec((lx, lx if ly is None else ly)))
