import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bhquench.lattice import LatticeSpec, build_hypercubic, chain, square

sizes_strategy = st.lists(st.integers(3, 7), min_size=1, max_size=3)


def test_chain_of_eleven():
    lat = chain(11)
    assert lat.n_sites == 11
    assert lat.coordination == 2
    assert set(lat.neighbors(0)) == {1, 10}


def test_square_sizes():
    assert (square(3).n_sites, square(3).coordination) == (9, 4)
    assert (square(30).n_sites, square(30).coordination) == (900, 4)


@pytest.mark.parametrize("sizes", [(2,), (5, 2), ()])
def test_rejects_degenerate_sizes(sizes):
    with pytest.raises(ValueError):
        build_hypercubic(LatticeSpec(sizes))


def test_neighbor_examples():
    assert set(chain(5).neighbors(2)) == {1, 3}
    assert set(chain(3).neighbors(0)) == {1, 2}
    lat = square(3)
    expected = {lat.index(c) for c in [(1, 0), (2, 0), (0, 1), (0, 2)]}
    assert set(lat.neighbors(lat.index((0, 0)))) == expected


def test_neighbors_rejects_bad_site():
    with pytest.raises(IndexError):
        chain(5).neighbors(5)


def test_row_major_indexing():
    lat = square(3, 4)
    assert lat.index((1, 2)) == 1 * 4 + 2
    assert lat.coords(6) == (1, 2)


@settings(max_examples=25, deadline=None)
@given(sizes_strategy)
def test_adjacency_invariants(sizes):
    lat = build_hypercubic(LatticeSpec(tuple(sizes)))
    a = lat.adjacency
    assert np.array_equal(a, a.T)
    assert np.all(np.diag(a) == 0)
    assert np.all(a.sum(axis=1) == lat.coordination)
    for site in range(0, lat.n_sites, max(1, lat.n_sites // 7)):
        nb = lat.neighbors(site)
        assert len(set(nb)) == lat.coordination
        assert all(site in lat.neighbors(m) for m in nb)


@settings(max_examples=25, deadline=None)
@given(sizes_strategy)
def test_fourier_sums(sizes):
    lat = build_hypercubic(LatticeSpec(tuple(sizes)))
    tk = lat.fourier_adjacency_grid()
    assert len(lat.bz_modes()) == lat.n_sites
    assert abs(tk.mean()) < 1e-12
    assert np.all(np.abs(tk) <= 1 + 1e-12)
    assert abs(np.mean(tk**2) - 1 / (2 * lat.dimension)) < 1e-12


@pytest.mark.parametrize("sizes", [(5,), (4, 3), (3, 3, 4)])
def test_inverse_fourier_recovers_adjacency(sizes):
    lat = build_hypercubic(LatticeSpec(sizes))
    k = lat.bz_modes()
    x = lat.all_coords
    tk = lat.fourier_adjacency_grid(k)
    phase = np.exp(1j * (x[:, None, :] - x[None, :, :]) @ k.T)
    rebuilt = lat.coordination * (phase @ tk) / lat.n_sites
    assert np.allclose(rebuilt.imag, 0, atol=1e-12)
    assert np.array_equal(np.rint(rebuilt.real).astype(int), lat.adjacency)


def test_fourier_adjacency_examples():
    assert chain(11).fourier_adjacency([0.0]) == 1.0
    assert square(4).fourier_adjacency([0.0, 0.0]) == 1.0
    assert chain(4).fourier_adjacency([np.pi]) == pytest.approx(-1.0)
    assert square(8).fourier_adjacency([np.pi / 2, np.pi / 2]) == pytest.approx(0.0, abs=1e-15)
    lat = chain(7)
    k = 2 * np.pi * 3 / 7
    assert lat.fourier_adjacency([k]) == pytest.approx(lat.fourier_adjacency([-k]))


def test_fourier_adjacency_rejects_off_grid():
    with pytest.raises(ValueError):
        chain(5).fourier_adjacency([0.3])
    with pytest.raises(ValueError):
        square(4).fourier_adjacency([0.0])


def test_bz_modes_small():
    assert np.allclose(chain(3).bz_modes().ravel(), [0, 2 * np.pi / 3, 4 * np.pi / 3])
    assert len(square(3).bz_modes()) == 9
    assert abs(chain(11).fourier_adjacency_grid().sum()) < 1e-12


def test_canonical_displacement_range():
    lat = square(4, 5)
    assert lat.canonical_displacement((2, 3)) == (2, -2)
    assert lat.canonical_displacement((-2, 2)) == (2, 2)
    assert lat.displacement(lat.index((0, 0)), lat.index((3, 4))) == (-1, -1)
