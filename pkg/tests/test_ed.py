import itertools
from functools import reduce
from math import comb

import numpy as np
import pytest
import scipy.linalg as sla
import scipy.sparse as sp

from bhquench import ed
from bhquench.lattice import chain, square


def test_two_site_basis_order():
    b = ed.build_basis(2, 2)
    assert b.dim == 3
    assert [tuple(r) for r in b.occupations] == [(2, 0), (1, 1), (0, 2)]


@pytest.mark.parametrize("s,n", [(7, 7), (9, 9), (5, 3), (3, 6)])
def test_basis_dimension_without_cutoff(s, n):
    assert ed.basis_dimension(s, n) == comb(n + s - 1, s - 1)
    if comb(n + s - 1, s - 1) < 50000:
        assert ed.build_basis(s, n).dim == comb(n + s - 1, s - 1)


@pytest.mark.parametrize("s,n,c", [(4, 4, 2), (5, 5, 1), (6, 4, 3), (3, 5, 2)])
def test_basis_with_cutoff_matches_enumeration(s, n, c):
    ref = sorted(
        (v for v in itertools.product(range(c + 1), repeat=s) if sum(v) == n), reverse=True
    )
    b = ed.build_basis(s, n, c)
    assert [tuple(r) for r in b.occupations] == ref
    assert ed.basis_dimension(s, n, c) == len(ref)


def test_lookup_is_total_and_inverse():
    b = ed.build_basis(5, 5, 3)
    assert np.array_equal(b.lookup(b.occupations), np.arange(b.dim))
    assert b.lookup(np.array([[4, 1, 0, 0, 0]]))[0] == -1
    assert b.lookup(np.array([[2, 2, 2, 0, 0]]))[0] == -1
    with pytest.raises(KeyError):
        b.index([5, 0, 0, 0, 0])


def test_basis_budget_refuses():
    with pytest.raises(ed.BasisTooLarge, match="352716"):
        ed.build_basis(11, 11, max_dim=100_000)
    with pytest.raises(ValueError):
        ed.build_basis(1, 3)


def dense_bose_hubbard(lattice, n_particles, J, U):
    """Hamiltonian from Kronecker products in the full truncated space, projected to N."""
    d = n_particles + 1
    b = np.diag(np.sqrt(np.arange(1, d)), k=1)
    eye = np.eye(d)
    S = lattice.n_sites

    def site_op(op, site):
        return reduce(np.kron, [op if i == site else eye for i in range(S)])

    bs = [site_op(b, i) for i in range(S)]
    h = sum(0.5 * U * bs[i].T @ bs[i].T @ bs[i] @ bs[i] for i in range(S))
    for i in range(S):
        for j in lattice.neighbors(i):
            h = h - (J / lattice.coordination) * bs[i].T @ bs[j]
    states = list(itertools.product(range(d), repeat=S))
    keep = [k for k, v in enumerate(states) if sum(v) == n_particles]
    order = sorted(keep, key=lambda k: states[k], reverse=True)
    return h[np.ix_(order, order)]


@pytest.mark.parametrize("lattice", [chain(3), chain(4)], ids=["chain3", "chain4"])
def test_hamiltonian_matches_kronecker_construction(lattice):
    n = lattice.n_sites
    h = ed.build_hamiltonian(ed.build_basis(n, n), lattice, 0.37, 1.1).toarray()
    assert np.allclose(h, dense_bose_hubbard(lattice, n, 0.37, 1.1), atol=1e-14)


def test_hamiltonian_structure():
    lat = chain(3)
    b = ed.build_basis(3, 3)
    h = ed.build_hamiltonian(b, lat, 0.1, 1.0)
    dense = h.toarray()
    assert np.array_equal(dense, dense.T.conj())
    h0 = ed.build_hamiltonian(b, lat, 0.0, 1.0)
    occ = b.occupations
    assert np.array_equal(h0.toarray(), np.diag(0.5 * np.sum(occ * (occ - 1), axis=1)))
    psi = ed.mott_state(b)
    assert ed.expectation(h, psi) == 0


def test_hamiltonian_row_degree_and_hermiticity_large():
    lat = square(3)
    b = ed.build_basis(9, 9)
    h = ed.build_hamiltonian(b, lat, 0.1, 1.0)
    assert np.max(np.diff(h.indptr)) <= lat.coordination * lat.n_sites + 1
    rows = np.random.default_rng(1).choice(b.dim, 200, replace=False)
    assert abs(h[rows] - h.T.conj()[rows]).max() == 0


def test_krylov_leaves_mott_state_at_zero_hopping():
    lat = chain(5)
    b = ed.build_basis(5, 5)
    psi = ed.mott_state(b)
    out = ed.evolve_krylov(ed.build_hamiltonian(b, lat, 0.0, 1.0), psi, 3.7)
    assert abs(abs(np.vdot(psi, out)) - 1) < 1e-14


def test_krylov_three_level_toy_matches_dense_exponential():
    # two modes, two bosons: |2,0>, |1,1>, |0,2>
    J, U = 0.8, 1.0
    a = -J * np.sqrt(2)
    h = np.array([[U, a, 0], [a, 0, a], [0, a, U]])
    psi = np.array([0.0, 1.0, 0.0], dtype=complex)
    for dt in (0.1, 1.0, 13.0):
        exact = sla.expm(-1j * h * dt) @ psi
        assert np.abs(ed.evolve_krylov(sp.csr_matrix(h), psi, dt) - exact).max() < 1e-10


def test_krylov_matches_expm_on_ring():
    from scipy.sparse.linalg import expm_multiply

    lat = chain(7)
    b = ed.build_basis(7, 7)
    h = ed.build_hamiltonian(b, lat, 0.1, 1.0)
    psi = ed.mott_state(b)
    ref = expm_multiply(-1j * 25.0 * h, psi)
    assert np.abs(ed.evolve_krylov(h, psi, 25.0) - ref).max() < 1e-10
    capped = ed.evolve_krylov(h, psi, 25.0, max_substep=5 / ed.operator_norm_bound(h))
    assert np.abs(capped - ref).max() < 1e-10


def test_krylov_norm_after_many_calls():
    lat = chain(6)
    b = ed.build_basis(6, 6)
    h = ed.build_hamiltonian(b, lat, 0.1, 1.0)
    psi = ed.mott_state(b)
    e0 = ed.expectation(h, psi).real
    h_scale = ed.operator_norm_bound(h)
    for _ in range(1000):
        new = ed.evolve_krylov(h, psi, 0.1)
        assert abs(ed.expectation(h, new).real - ed.expectation(h, psi).real) <= 1e-9 * h_scale
        psi = new
    assert abs(np.linalg.norm(psi) - 1) <= 1e-8
    assert abs(ed.expectation(h, psi).real - e0) <= 1e-9 * h_scale


def test_krylov_against_dense_trajectory():
    lat = chain(7)
    b = ed.build_basis(7, 7)
    h = ed.build_hamiltonian(b, lat, 0.1, 1.0)
    psi = ed.mott_state(b)
    obs = ed.Observables(b, lat)
    times = np.linspace(0, 20, 41)
    dense = ed.dense_series(ed.dense_spectrum(h), psi, times, obs)
    kry = ed.krylov_series(h, psi, times, obs)
    assert np.abs(dense["p0"] - kry["p0"]).max() < 1e-8
    assert np.abs(dense["bdag1_b2"] - kry["bdag1_b2"]).max() < 1e-8


def test_ring_is_translation_invariant():
    lat = chain(7)
    b = ed.build_basis(7, 7)
    h = ed.build_hamiltonian(b, lat, 0.1, 1.0)
    psi = ed.evolve_krylov(h, ed.mott_state(b), 6.3)
    for n in range(4):
        vals = [ed.expectation(ed.projector(b, mu, n), psi).real for mu in range(7)]
        assert np.ptp(vals) < 1e-10


def test_dense_budget():
    h = ed.build_hamiltonian(ed.build_basis(9, 9), square(3), 0.1, 1.0)
    with pytest.raises(ed.BasisTooLarge, match="time average"):
        ed.dense_spectrum(h)


def test_diagonal_ensemble_identities():
    lat = chain(4)
    b = ed.build_basis(4, 4)
    h = ed.build_hamiltonian(b, lat, 0.1, 1.0)
    psi = ed.mott_state(b)
    eye = sp.identity(b.dim, format="csr")
    assert ed.dense_diagonal_ensemble(h, eye, psi) == pytest.approx(1.0, abs=1e-12)
    assert ed.dense_diagonal_ensemble(h, h, psi) == pytest.approx(ed.expectation(h, psi), abs=1e-12)


def test_diagonal_ensemble_matches_long_time_average():
    lat = chain(3)
    b = ed.build_basis(3, 3)
    h = ed.build_hamiltonian(b, lat, 0.1, 1.0)
    psi = ed.mott_state(b)
    obs = ed.Observables(b, lat)
    times = np.arange(0, 2000.0 + 1e-9, 0.25)
    series = ed.krylov_series(h, psi, times, obs)
    for name in ("p0", "p2", "bdag1_b2"):
        de = ed.dense_diagonal_ensemble(h, obs.ops[name], psi).real
        avg = np.trapezoid(series[name].real, times) / times[-1]
        assert abs(avg - de) <= 0.02 * abs(de)


def test_degenerate_eigenspaces_use_projected_trace():
    # symmetric two-level degeneracy: off-diagonal observable within the eigenspace
    h = sp.csr_matrix(np.diag([0.0, 1.0, 1.0]))
    obs = sp.csr_matrix(np.array([[0, 0, 0], [0, 0, 1], [0, 1, 0]], dtype=float))
    psi = np.array([0, 1, 1], dtype=complex) / np.sqrt(2)
    assert ed.dense_diagonal_ensemble(h, obs, psi) == pytest.approx(1.0)


def test_mott_state_observables():
    lat = chain(5)
    b = ed.build_basis(5, 5)
    vals = ed.Observables(b, lat).measure(ed.mott_state(b))
    assert vals["p1"] == 1
    for name, v in vals.items():
        if name != "p1":
            assert v == 0, name


def test_ladder_operator_against_kronecker():
    lat = chain(3)
    n = 3
    b = ed.build_basis(3, n)
    d = n + 1
    a = np.diag(np.sqrt(np.arange(1, d)), k=1)
    eye = np.eye(d)
    ops = [reduce(np.kron, [a if i == s else eye for i in range(3)]) for s in range(3)]
    states = list(itertools.product(range(d), repeat=3))
    keep = sorted((k for k, v in enumerate(states) if sum(v) == n), key=lambda k: states[k], reverse=True)
    ref = ops[0] @ ops[1].T @ ops[1].T @ ops[2]
    got = ed.ladder_operator(b, [(0, False), (1, True), (1, True), (2, False)]).toarray()
    assert np.allclose(got, ref[np.ix_(keep, keep)])
    with pytest.raises(ValueError):
        ed.ladder_operator(b, [(0, True)])


def test_three_point_sites_follow_an_axis():
    lat = square(4)
    assert ed.chain_sites(lat, lat.index((1, 2)), axis=0) == [lat.index((1, 2)), lat.index((2, 2)), lat.index((3, 2))]
    assert ed.chain_sites(lat, 0, axis=1, length=4) == [0, 1, 2, 3]


def test_measure_single_value():
    lat = chain(4)
    b = ed.build_basis(4, 4)
    assert ed.measure(b, lat, ed.mott_state(b), "p1") == 1
