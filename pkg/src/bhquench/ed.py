"""Exact reference dynamics for small periodic lattices.

The many-body space is the fixed-particle-number Fock space, optionally with an
on-site occupation cutoff. Time evolution uses a Lanczos approximation of
``exp(-i H dt) psi`` for large spaces and a full eigendecomposition for small
ones; infinite-time averages come from the diagonal ensemble.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import comb

import numpy as np
import scipy.sparse as sp
from scipy.linalg import eigh_tridiagonal

from .lattice import Lattice

DEFAULT_MAX_DIM = 2_000_000
DEFAULT_DENSE_BUDGET = 6000


class BasisTooLarge(MemoryError):
    pass


class KrylovError(RuntimeError):
    pass


def basis_dimension(n_sites: int, n_particles: int, cutoff: int | None = None) -> int:
    """Number of occupation vectors of ``n_sites`` summing to ``n_particles`` with entries <= cutoff."""
    c = n_particles if cutoff is None else min(cutoff, n_particles)
    # inclusion-exclusion over sites exceeding the cutoff
    total = 0
    for j in range(n_sites + 1):
        rest = n_particles - j * (c + 1)
        if rest < 0:
            break
        total += (-1) ** j * comb(n_sites, j) * comb(rest + n_sites - 1, n_sites - 1)
    return total


@dataclass(frozen=True)
class FockBasis:
    """Occupation-number basis in descending lexicographic order."""

    n_sites: int
    n_particles: int
    cutoff: int
    occupations: np.ndarray = field(repr=False)
    _keys_ascending: np.ndarray = field(repr=False)

    @property
    def dim(self) -> int:
        return self.occupations.shape[0]

    def _encode(self, occ: np.ndarray) -> np.ndarray:
        weights = (self.n_particles + 1) ** np.arange(self.n_sites - 1, -1, -1, dtype=np.int64)
        return np.asarray(occ, dtype=np.int64) @ weights

    def lookup(self, occ: np.ndarray) -> np.ndarray:
        """Indices of occupation vectors (rows of ``occ``); -1 where absent."""
        occ = np.atleast_2d(occ)
        keys = self._encode(occ)
        pos = np.searchsorted(self._keys_ascending, keys)
        pos_clip = np.minimum(pos, self.dim - 1)
        found = (self._keys_ascending[pos_clip] == keys) & np.all(occ >= 0, axis=1)
        found &= np.all(occ <= self.cutoff, axis=1)
        return np.where(found, self.dim - 1 - pos_clip, -1)

    def index(self, occ) -> int:
        idx = int(self.lookup(np.asarray(occ)[None, :])[0])
        if idx < 0:
            raise KeyError(f"occupation {tuple(occ)} not in basis")
        return idx

    def state(self, occ) -> np.ndarray:
        psi = np.zeros(self.dim, dtype=complex)
        psi[self.index(occ)] = 1.0
        return psi


def _compositions(n_sites: int, n_particles: int, cutoff: int) -> np.ndarray:
    prefix = np.zeros((1, 0), dtype=np.int16)
    remaining = np.array([n_particles], dtype=np.int64)
    for site in range(n_sites - 1):
        sites_left = n_sites - 1 - site
        hi = np.minimum(cutoff, remaining)
        lo = np.maximum(0, remaining - cutoff * sites_left)
        counts = hi - lo + 1
        parent = np.repeat(np.arange(len(remaining)), counts)
        offset = np.arange(counts.sum()) - np.repeat(np.cumsum(counts) - counts, counts)
        value = hi[parent] - offset
        prefix = np.concatenate([prefix[parent], value[:, None].astype(np.int16)], axis=1)
        remaining = remaining[parent] - value
    return np.concatenate([prefix, remaining[:, None].astype(np.int16)], axis=1)


def build_basis(
    n_sites: int, n_particles: int, cutoff: int | None = None, max_dim: int = DEFAULT_MAX_DIM
) -> FockBasis:
    if n_sites < 2 or n_particles < 1:
        raise ValueError("need at least 2 sites and 1 particle")
    c = n_particles if cutoff is None else int(cutoff)
    if c < 1:
        raise ValueError("on-site cutoff must be >= 1")
    c = min(c, n_particles)
    if n_sites * c < n_particles:
        raise ValueError(f"{n_particles} particles do not fit on {n_sites} sites with cutoff {c}")
    dim = basis_dimension(n_sites, n_particles, c)
    if dim > max_dim:
        est_mb = dim * n_sites * (2 + 8) / 2**20
        raise BasisTooLarge(
            f"basis dimension {dim} exceeds budget {max_dim} (~{est_mb:.0f} MB for the table alone)"
        )
    occ = _compositions(n_sites, n_particles, c)
    occ.setflags(write=False)
    weights = (n_particles + 1) ** np.arange(n_sites - 1, -1, -1, dtype=np.int64)
    keys = occ.astype(np.int64) @ weights
    return FockBasis(n_sites, n_particles, c, occ, keys[::-1].copy())


def build_hamiltonian(basis: FockBasis, lattice: Lattice, J: float, U: float) -> sp.csr_matrix:
    """Bose-Hubbard Hamiltonian with hopping -(J/Z) T b^dag b in the given basis."""
    if lattice.n_sites != basis.n_sites:
        raise ValueError("lattice and basis disagree on the number of sites")
    occ = basis.occupations.astype(np.int64)
    diag = 0.5 * U * np.sum(occ * (occ - 1), axis=1)
    rows, cols, vals = [np.arange(basis.dim)], [np.arange(basis.dim)], [diag]
    hop = J / lattice.coordination
    if hop != 0.0:
        for target_site in range(lattice.n_sites):
            for source_site in lattice.neighbor_table[target_site]:
                ok = (occ[:, source_site] > 0) & (occ[:, target_site] < basis.cutoff)
                src = np.nonzero(ok)[0]
                new = occ[src].copy()
                new[:, source_site] -= 1
                new[:, target_site] += 1
                tgt = basis.lookup(new)
                amp = -hop * np.sqrt(occ[src, source_site] * (occ[src, target_site] + 1.0))
                rows.append(tgt)
                cols.append(src)
                vals.append(amp)
    h = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(basis.dim, basis.dim),
    )
    return h.tocsr()


def mott_state(basis: FockBasis, filling: int = 1) -> np.ndarray:
    return basis.state(np.full(basis.n_sites, filling))


# --- propagation -----------------------------------------------------------


def _apply(h, v: np.ndarray) -> np.ndarray:
    # real sparse matrices act faster on an (n, 2) real view than on complex vectors
    if sp.issparse(h) and not np.iscomplexobj(h.data) and v.flags.c_contiguous:
        return (h @ v.view(float).reshape(-1, 2)).view(complex).ravel()
    return h @ v


def _lanczos(h, v: np.ndarray, m: int, reorthogonalize: bool = False):
    """Hermitian Lanczos recurrence. Returns (V, alpha, beta, beta_last)."""
    n = v.shape[0]
    m = min(m, n)
    basis = np.empty((m, n), dtype=complex)
    alpha = np.empty(m)
    beta = np.empty(m)
    basis[0] = v / np.linalg.norm(v)
    for j in range(m):
        w = _apply(h, basis[j])
        alpha[j] = np.vdot(basis[j], w).real
        w -= alpha[j] * basis[j]
        if j > 0:
            w -= beta[j - 1] * basis[j - 1]
        if reorthogonalize:
            w -= basis[: j + 1].T @ (basis[: j + 1].conj() @ w)
        beta[j] = np.linalg.norm(w)
        if beta[j] < 1e-12 * max(1.0, abs(alpha[j])):
            return basis[: j + 1], alpha[: j + 1], beta[:j], 0.0
        if j + 1 < m:
            basis[j + 1] = w / beta[j]
    return basis, alpha, beta[:-1], beta[-1]


def evolve_krylov(
    h,
    psi: np.ndarray,
    dt: float,
    krylov_dim: int = 30,
    tol: float = 1e-12,
    max_substep: float | None = None,
) -> np.ndarray:
    """Approximate ``exp(-i H dt) psi`` by Lanczos sub-steps.

    Each Lanczos space is reused for the longest sub-step whose a-posteriori
    error estimate ``|beta_m [exp(-i T tau)]_{m,0}|`` stays below ``tol``.
    ``max_substep`` additionally caps every sub-step (e.g. ``5 / ||H||``).
    """
    psi = np.asarray(psi, dtype=complex)
    norm = np.linalg.norm(psi)
    if norm == 0.0:
        return psi.copy()
    remaining = float(dt)
    out = psi.copy()
    while remaining > 0.0:
        basis, alpha, beta, beta_last = _lanczos(h, out, krylov_dim)
        if len(alpha) == 1:
            evals, evecs = alpha, np.ones((1, 1))
        else:
            evals, evecs = eigh_tridiagonal(alpha, beta)
        first = evecs[0]

        def coeffs(tau):
            return evecs @ (np.exp(-1j * evals * tau) * first)

        def error(tau):
            return abs(beta_last * coeffs(tau)[-1]) * norm

        tau = remaining if max_substep is None else min(remaining, max_substep)
        if beta_last != 0.0 and error(tau) > tol:
            lo, hi = 0.0, tau
            for _ in range(60):
                mid = 0.5 * (lo + hi)
                if error(mid) > tol:
                    hi = mid
                else:
                    lo = mid
                if hi - lo < 1e-3 * hi:
                    break
            tau = lo
            if tau <= 1e-14 * max(1.0, dt):
                raise KrylovError("Krylov sub-step collapsed; increase krylov_dim")
        out = np.linalg.norm(out) * (basis.T @ coeffs(tau))
        remaining -= tau
        if remaining < 1e-14 * max(1.0, abs(dt)):
            break
    return out


def operator_norm_bound(h) -> float:
    """Max absolute row sum, an upper bound on the spectral norm."""
    return float(np.max(np.asarray(abs(h).sum(axis=1)).ravel()))


@dataclass(frozen=True)
class DenseSpectrum:
    energies: np.ndarray
    vectors: np.ndarray

    def evolve(self, psi0: np.ndarray, t: float) -> np.ndarray:
        c = self.vectors.conj().T @ psi0
        return self.vectors @ (np.exp(-1j * self.energies * t) * c)


def dense_spectrum(h, budget: int = DEFAULT_DENSE_BUDGET) -> DenseSpectrum:
    dim = h.shape[0]
    if dim > budget:
        raise BasisTooLarge(
            f"dense diagonalisation of dimension {dim} exceeds budget {budget}; "
            "use a Krylov time average instead"
        )
    dense = h.toarray() if sp.issparse(h) else np.asarray(h)
    energies, vectors = np.linalg.eigh(dense)
    return DenseSpectrum(energies, vectors)


def dense_diagonal_ensemble(
    h,
    observable,
    psi0: np.ndarray,
    budget: int = DEFAULT_DENSE_BUDGET,
    degeneracy_tol: float = 1e-9,
    spectrum: DenseSpectrum | None = None,
) -> complex:
    """Infinite-time average of <O>: sum over eigenspaces of <psi0|P_E O P_E|psi0>."""
    if spectrum is None:
        spectrum = dense_spectrum(h, budget)
    energies, vectors = spectrum.energies, spectrum.vectors
    c = vectors.conj().T @ psi0
    o_vecs = observable @ vectors
    # split points between eigenvalue clusters
    breaks = np.nonzero(np.diff(energies) > degeneracy_tol * max(1.0, np.abs(energies).max()))[0] + 1
    total = 0.0 + 0.0j
    for block in np.split(np.arange(len(energies)), breaks):
        proj = vectors[:, block].conj().T @ o_vecs[:, block]
        cb = c[block]
        total += np.vdot(cb, proj @ cb)
    return complex(total)


# --- observables -------------------------------------------------------------


def ladder_operator(basis: FockBasis, string) -> sp.csr_matrix:
    """Matrix of a product of ladder operators within the basis.

    ``string`` lists ``(site, dagger)`` factors left to right as written, so
    ``[(1, False), (2, True), (2, True), (3, False)]`` is ``b_1 (b_2^dag)^2 b_3``.
    The product must conserve the particle number. Images outside the basis
    (beyond the cutoff) are dropped, consistent with a truncated Fock space.
    """
    net = sum(1 if dag else -1 for _, dag in string)
    if net != 0:
        raise ValueError("operator string must conserve particle number")
    occ = basis.occupations.astype(np.int64).copy()
    amp = np.ones(basis.dim)
    for site, dag in reversed(list(string)):
        if dag:
            amp = amp * np.sqrt(occ[:, site] + 1.0)
            occ[:, site] += 1
        else:
            amp = amp * np.sqrt(np.maximum(occ[:, site], 0))
            occ[:, site] -= 1
    keep = amp != 0.0
    tgt = basis.lookup(occ[keep])
    src = np.nonzero(keep)[0]
    ok = tgt >= 0
    return sp.csr_matrix((amp[keep][ok], (tgt[ok], src[ok])), shape=(basis.dim, basis.dim))


def number_operator(basis: FockBasis, site: int) -> sp.csr_matrix:
    return sp.diags(basis.occupations[:, site].astype(float)).tocsr()


def projector(basis: FockBasis, site: int, n: int) -> sp.csr_matrix:
    return sp.diags((basis.occupations[:, site] == n).astype(float)).tocsr()


def expectation(op, psi: np.ndarray) -> complex:
    return complex(np.vdot(psi, op @ psi))


def chain_sites(lattice: Lattice, origin: int = 0, axis: int = 0, length: int = 3) -> list[int]:
    """Sites origin, origin+e, origin+2e, ... along a lattice axis."""
    base = np.asarray(lattice.coords(origin))
    step = np.zeros(lattice.dimension, dtype=int)
    step[axis] = 1
    return [lattice.index(base + k * step) for k in range(length)]


class Observables:
    """Prebuilt operator matrices for the quantities tracked against the truncated solver.

    Sites ``s1, s2, s3, s4`` default to consecutive sites along the first axis.
    """

    def __init__(self, basis: FockBasis, lattice: Lattice, sites=None, n_max_probability: int = 3):
        s1, s2, s3, s4 = sites if sites is not None else chain_sites(lattice, length=4)
        self.basis = basis
        self.sites = (s1, s2, s3, s4)
        self.ops = {f"p{n}": projector(basis, s1, n) for n in range(n_max_probability + 1)}
        self.ops["bdag1_b2"] = ladder_operator(basis, [(s1, True), (s2, False)])
        self.ops["b1_bdag2sq_b3"] = ladder_operator(basis, [(s1, False), (s2, True), (s2, True), (s3, False)])
        self.ops["n1_bdag2_b3"] = number_operator(basis, s1) @ ladder_operator(basis, [(s2, True), (s3, False)])
        self.ops["n1"] = number_operator(basis, s1)
        self.ops["bdag2_b3"] = ladder_operator(basis, [(s2, True), (s3, False)])
        self.ops["bdag2sq_b3_b4"] = ladder_operator(basis, [(s2, True), (s2, True), (s3, False), (s4, False)])

    def measure(self, psi: np.ndarray) -> dict[str, complex]:
        raw = {name: expectation(op, psi) for name, op in self.ops.items()}
        out = {k: v for k, v in raw.items() if k not in ("n1", "bdag2_b3")}
        out["n1_bdag2_b3_corr"] = raw["n1_bdag2_b3"] - raw["n1"] * raw["bdag2_b3"]
        return out


def measure(basis: FockBasis, lattice: Lattice, psi: np.ndarray, which: str, sites=None) -> complex:
    """Single exact expectation value; see :class:`Observables` for the names."""
    return Observables(basis, lattice, sites).measure(psi)[which]


def krylov_series(
    h,
    psi0: np.ndarray,
    times,
    observables: Observables,
    krylov_dim: int = 30,
    tol: float = 1e-12,
    max_substep: float | None = None,
) -> dict[str, np.ndarray]:
    """Measure ``observables`` along ``exp(-i H t) psi0`` at increasing ``times``."""
    times = np.asarray(times, dtype=float)
    if np.any(np.diff(times) < 0) or times[0] < 0:
        raise ValueError("times must be non-negative and increasing")
    psi = np.asarray(psi0, dtype=complex)
    t_now = 0.0
    rows = []
    for t in times:
        if t > t_now:
            psi = evolve_krylov(h, psi, t - t_now, krylov_dim, tol, max_substep)
            t_now = t
        rows.append(observables.measure(psi))
    return {k: np.array([r[k] for r in rows]) for k in rows[0]}


def dense_series(spectrum: DenseSpectrum, psi0: np.ndarray, times, observables: Observables):
    c = spectrum.vectors.conj().T @ psi0
    rows = []
    for t in np.asarray(times, dtype=float):
        psi = spectrum.vectors @ (np.exp(-1j * spectrum.energies * t) * c)
        rows.append(observables.measure(psi))
    return {k: np.array([r[k] for r in rows]) for k in rows[0]}
