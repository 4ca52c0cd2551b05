"""Truncated many-body state: diagonal on-site distributions plus pair correlations.

The pair tensor stores, for an ordered pair of sites (mu1, mu2),

    f[mu1, mu2, n1, n2] = < |n1+1><n1|_mu1  |n2><n2+1|_mu2 >_corr ,

the only sector generated by the truncated equations of motion. Two layouts
are supported: FULL keeps every ordered pair, TI (translation invariant) keeps
one block per displacement vector s = x_mu2 - x_mu1, stored at grid index
``s mod L``. Diagonal blocks (mu1 == mu2, or s == 0) are kept identically zero.
"""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .lattice import Lattice, LatticeSpec


class Layout(str, enum.Enum):
    FULL = "FULL"
    TI = "TI"


@dataclass(frozen=True)
class OnSiteDistribution:
    """Occupation probabilities p[site, n], n = 0..n_max. TI layout stores one row."""

    p: np.ndarray

    @property
    def n_max(self) -> int:
        return self.p.shape[-1] - 1


@dataclass(frozen=True)
class PairCorrelations:
    f: np.ndarray
    layout: Layout
    sizes: tuple[int, ...]

    @property
    def n_max(self) -> int:
        return self.f.shape[-1]

    def block(self, mu1: int, mu2: int) -> np.ndarray:
        """The (n1, n2) block of the ordered pair (mu1, mu2)."""
        n_sites = int(np.prod(self.sizes))
        if not (0 <= mu1 < n_sites and 0 <= mu2 < n_sites):
            raise IndexError(f"site pair ({mu1}, {mu2}) out of range")
        if self.layout is Layout.FULL:
            return self.f[mu1, mu2]
        x1 = np.array(np.unravel_index(mu1, self.sizes))
        x2 = np.array(np.unravel_index(mu2, self.sizes))
        return self.f[tuple(np.mod(x2 - x1, self.sizes))]


@dataclass(frozen=True)
class SystemState:
    t: float
    onsite: OnSiteDistribution
    pairs: PairCorrelations

    def __post_init__(self):
        if self.onsite.n_max != self.pairs.n_max:
            raise ValueError("on-site and pair data disagree on n_max")

    @property
    def p(self) -> np.ndarray:
        return self.onsite.p

    @property
    def f(self) -> np.ndarray:
        return self.pairs.f

    @property
    def layout(self) -> Layout:
        return self.pairs.layout

    @property
    def n_max(self) -> int:
        return self.onsite.n_max

    def site_probabilities(self, mu: int) -> np.ndarray:
        return self.p[0] if self.layout is Layout.TI else self.p[mu]

    def with_arrays(self, t: float, p: np.ndarray, f: np.ndarray) -> "SystemState":
        return SystemState(t, OnSiteDistribution(p), replace(self.pairs, f=f))


def initial_mott(
    lattice: Lattice, n_max: int = 3, filling: int = 1, layout: Layout | str = Layout.TI
) -> SystemState:
    """Product Fock state with ``filling`` bosons per site and no correlations."""
    layout = Layout(layout)
    if filling < 1:
        raise ValueError("filling must be a positive integer")
    if n_max < 2:
        raise ValueError("n_max must be at least 2")
    if filling >= n_max:
        raise ValueError(f"filling={filling} needs n_max > filling for particle-hole headroom (n_max={n_max})")
    rows = 1 if layout is Layout.TI else lattice.n_sites
    p = np.zeros((rows, n_max + 1))
    p[:, filling] = 1.0
    if layout is Layout.TI:
        f = np.zeros(lattice.sizes + (n_max, n_max), dtype=complex)
    else:
        f = np.zeros((lattice.n_sites, lattice.n_sites, n_max, n_max), dtype=complex)
    return SystemState(0.0, OnSiteDistribution(p), PairCorrelations(f, layout, lattice.sizes))


def sqrt_ladder(n_max: int) -> np.ndarray:
    """sqrt(m + 1) for m = 0..n_max-1."""
    return np.sqrt(np.arange(1, n_max + 1, dtype=float))


def psi_tensor(f: np.ndarray) -> np.ndarray:
    """psi^{n+1,n} = sum_m sqrt(m+1) f^{n m}, contracted over the last axis of every block."""
    return f @ sqrt_ladder(f.shape[-1])


def psi_contract(pairs: PairCorrelations, mu1: int, mu2: int, n: int) -> complex:
    """psi_{mu1 mu2}^{n+1, n} = <|n+1><n|_mu1 b_mu2>_corr."""
    if not 0 <= n < pairs.n_max:
        raise IndexError(f"occupation {n} outside 0..{pairs.n_max - 1}")
    return complex(pairs.block(mu1, mu2)[n] @ sqrt_ladder(pairs.n_max))


def mirror_block(block: np.ndarray) -> np.ndarray:
    """Block of the reversed pair: f_{mu2 mu1}^{n2 n1} = conj(f_{mu1 mu2}^{n1 n2})."""
    return np.conj(np.swapaxes(block, -1, -2))


def mirror_pair(pairs: PairCorrelations, mu1: int, mu2: int) -> np.ndarray:
    return mirror_block(pairs.block(mu1, mu2))


def full_to_ti(state: SystemState, lattice: Lattice, origin: int = 0) -> SystemState:
    """Read a homogeneous FULL state as TI data, taking blocks relative to ``origin``."""
    if state.layout is not Layout.FULL:
        raise ValueError("state is not in FULL layout")
    f = np.zeros(lattice.sizes + (state.n_max, state.n_max), dtype=complex)
    x0 = np.asarray(lattice.coords(origin))
    for mu in range(lattice.n_sites):
        f[tuple(np.mod(lattice.all_coords[mu] - x0, lattice.sizes))] = state.f[origin, mu]
    return SystemState(
        state.t,
        OnSiteDistribution(state.p[origin : origin + 1].copy()),
        PairCorrelations(f, Layout.TI, lattice.sizes),
    )


def ti_to_full(state: SystemState, lattice: Lattice) -> SystemState:
    if state.layout is not Layout.TI:
        raise ValueError("state is not in TI layout")
    coords = lattice.all_coords
    disp = np.mod(coords[None, :, :] - coords[:, None, :], lattice.sizes)
    f = state.f[tuple(np.moveaxis(disp, -1, 0))]
    p = np.repeat(state.p, lattice.n_sites, axis=0)
    return SystemState(state.t, OnSiteDistribution(p), PairCorrelations(f, Layout.FULL, lattice.sizes))


# --- binary snapshots ---------------------------------------------------------

SNAPSHOT_MAGIC = b"BHQS"
SNAPSHOT_VERSION = 1


def save_snapshot(state: SystemState, path) -> None:
    """Little-endian binary dump: header, then p, then f (complex as re/im pairs).

    Header: magic ``BHQS``, uint32 version, uint32 D, D x uint32 L_d,
    uint32 n_max, uint32 layout (0 FULL, 1 TI), float64 t. Arrays follow in
    C order with float64 entries.
    """
    sizes = state.pairs.sizes
    header = SNAPSHOT_MAGIC + struct.pack(
        f"<II{len(sizes)}III d",
        SNAPSHOT_VERSION,
        len(sizes),
        *sizes,
        state.n_max,
        0 if state.layout is Layout.FULL else 1,
        state.t,
    )
    with open(Path(path), "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(state.p, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(state.f, dtype="<c16").tobytes())


def load_snapshot(path) -> SystemState:
    data = Path(path).read_bytes()
    if data[:4] != SNAPSHOT_MAGIC:
        raise ValueError("not a state snapshot (bad magic)")
    version, dim = struct.unpack_from("<II", data, 4)
    if version != SNAPSHOT_VERSION:
        raise ValueError(f"unsupported snapshot version {version}")
    off = 12
    sizes = struct.unpack_from(f"<{dim}I", data, off)
    off += 4 * dim
    n_max, layout_code = struct.unpack_from("<II", data, off)
    off += 8
    (t,) = struct.unpack_from("<d", data, off)
    off += 8
    layout = Layout.FULL if layout_code == 0 else Layout.TI
    n_sites = LatticeSpec(sizes).n_sites
    rows = n_sites if layout is Layout.FULL else 1
    p = np.frombuffer(data, dtype="<f8", count=rows * (n_max + 1), offset=off).reshape(rows, n_max + 1)
    off += p.nbytes
    fshape = (n_sites, n_sites) if layout is Layout.FULL else tuple(sizes)
    f = np.frombuffer(data, dtype="<c16", count=int(np.prod(fshape)) * n_max * n_max, offset=off)
    f = f.reshape(fshape + (n_max, n_max))
    return SystemState(
        t, OnSiteDistribution(p.astype(float)), PairCorrelations(f.astype(complex), layout, tuple(sizes))
    )
