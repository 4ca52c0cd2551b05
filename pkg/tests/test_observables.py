import numpy as np
import pytest

from bhquench.analytic import group_velocity_max, obdm_first_order
from bhquench.dynamics import HamiltonianParams
from bhquench.lattice import chain, square
from bhquench.observables import (
    ConservationReport,
    FrontNotDetected,
    RevivalNotDetected,
    conservation_row,
    density,
    energy,
    front_arrival,
    number_variance_onsite,
    obdm,
    obdm_map,
    revival_onset,
    rolling_amplitude,
    total_number,
)
from bhquench.state import Layout, OnSiteDistribution, PairCorrelations, SystemState, full_to_ti, initial_mott

from conftest import random_full_state, random_homogeneous_state


def ket_bra(n_max, a, b):
    m = np.zeros((n_max + 1, n_max + 1))
    m[a, b] = 1.0
    return m


def dense_pair_correlation(block):
    """rho_corr on two sites whose only ±1-sector moments are the given f block."""
    n_max = block.shape[0]
    dim = n_max + 1
    rho = np.zeros((dim * dim, dim * dim), dtype=complex)
    for n1 in range(n_max):
        for n2 in range(n_max):
            term = block[n1, n2] * np.kron(ket_bra(n_max, n1, n1 + 1), ket_bra(n_max, n2 + 1, n2))
            rho += term + term.conj().T
    return rho


def annihilation(n_max):
    return np.diag(np.sqrt(np.arange(1, n_max + 1)), k=1)


def test_obdm_zero_at_quench():
    s = initial_mott(chain(5), 3, 1, "FULL")
    assert obdm(s, 0, 1) == 0
    assert not obdm_map(initial_mott(square(3), 3)).any()


def test_obdm_single_entry():
    lat = chain(3)
    f = np.zeros((3, 3, 2, 2), dtype=complex)
    f[0, 1, 0, 0] = 0.2 + 0.1j
    f[1, 0, 0, 0] = 0.2 - 0.1j
    s = SystemState(0.0, OnSiteDistribution(np.full((3, 3), 1 / 3)), PairCorrelations(f, Layout.FULL, lat.sizes))
    assert obdm(s, 0, 1) == pytest.approx(0.2 + 0.1j)


def test_obdm_matches_dense_reconstruction(rng):
    lat = chain(5)
    s = random_full_state(lat, 3, rng)
    b = annihilation(3)
    op = np.kron(b.conj().T, b)
    for mu1, mu2 in [(0, 1), (1, 3), (4, 2)]:
        rho = dense_pair_correlation(s.pairs.block(mu1, mu2))
        assert obdm(s, mu1, mu2) == pytest.approx(np.trace(rho @ op), abs=1e-15)
        # psi^{n+1,n} = tr(rho |n+1><n| (x) b)
        for n in range(3):
            ref = np.trace(rho @ np.kron(ket_bra(3, n + 1, n), b))
            psi = s.pairs.block(mu1, mu2)[n] @ np.sqrt(np.arange(1, 4))
            assert psi == pytest.approx(ref, abs=1e-15)


def test_obdm_hermitian(rng):
    lat = square(3, 4)
    s = random_full_state(lat, 3, rng)
    g = obdm_map(s)
    assert np.array_equal(g, g.conj().T)
    assert obdm(s, 2, 7) == np.conj(obdm(s, 7, 2))
    ti = obdm_map(full_to_ti(random_homogeneous_state(lat, 3, rng), lat))
    neg = np.roll(np.flip(ti, axis=(0, 1)), 1, axis=(0, 1))
    assert np.array_equal(ti, neg.conj())


def test_obdm_rejects_onsite():
    with pytest.raises(ValueError):
        obdm(initial_mott(chain(5), 3, 1, "FULL"), 2, 2)


def test_ti_obdm_map_matches_full(rng):
    lat = square(3, 4)
    full = random_homogeneous_state(lat, 3, rng)
    ti = full_to_ti(full, lat)
    assert np.allclose(obdm_map(ti).ravel(), obdm_map(full)[0], atol=1e-16)


def test_energy_of_mott_states():
    lat = chain(8)
    params = HamiltonianParams(0.1, 1.0)
    assert energy(initial_mott(lat, 3, 1), lat, params) == 0.0
    assert energy(initial_mott(lat, 4, 2), lat, params) == pytest.approx(lat.n_sites * 1.0)
    assert energy(initial_mott(lat, 4, 2, "FULL"), lat, HamiltonianParams(0.1, 2.0)) == pytest.approx(16.0)


def test_energy_layouts_agree(rng):
    lat = square(3, 4)
    full = random_homogeneous_state(lat, 3, rng)
    params = HamiltonianParams(0.3, 1.0)
    assert energy(full_to_ti(full, lat), lat, params) == pytest.approx(energy(full, lat, params), rel=1e-13)


def test_number_and_variance_at_quench():
    lat = chain(50)
    s = initial_mott(lat, 3)
    assert total_number(s, lat) == 50
    assert number_variance_onsite(s, lat) == 0
    assert density(s, 7) == 1.0


def test_conservation_report_energy_scale():
    lat = chain(5)
    params = HamiltonianParams(0.1, 1.0)
    s0 = initial_mott(lat, 3)
    p1 = np.array([[0.01, 0.98, 0.01, 0.0]])
    rows = [conservation_row(s0, lat, params), conservation_row(s0.with_arrays(1.0, p1, s0.f), lat, params)]
    report = ConservationReport(rows)
    assert report.max_trace_deviation() == pytest.approx(0.0, abs=1e-15)
    assert report.number_drift() == pytest.approx(0.0, abs=1e-15)
    # E jumps by 0.05 while the interaction energy scale is 0.05
    assert report.energy_drift() == pytest.approx(1.0)
    assert report.energy_drift(scale=10.0) == pytest.approx(0.005)


# --- fronts ------------------------------------------------------------------


def synthetic_front(v, b, seps, times):
    arrival = (seps - b) / v
    return np.where(times[:, None] >= arrival[None, :], 0.1, 0.0)


def test_front_recovers_synthetic_velocity():
    times = np.arange(0, 40, 0.01)
    seps = np.arange(1, 26)
    fit = front_arrival(times, seps, synthetic_front(0.3, 0.5, seps, times), 1e-3, s_max=23)
    assert fit.velocity == pytest.approx(0.3, rel=1e-3)
    assert fit.intercept == pytest.approx(0.5, abs=1e-2)
    assert fit.separations.max() <= 23


def test_front_threshold_above_signal():
    times = np.linspace(0, 10, 101)
    seps = np.arange(1, 6)
    with pytest.raises(FrontNotDetected):
        front_arrival(times, seps, synthetic_front(1.0, 0.0, seps, times), 0.5)


def test_front_needs_three_separations():
    times = np.linspace(0, 10, 101)
    seps = np.arange(1, 6)
    with pytest.raises(FrontNotDetected):
        front_arrival(times, seps, synthetic_front(1.0, 0.0, seps, times), 1e-3, s_max=2)
    with pytest.raises(ValueError):
        front_arrival(times, seps, synthetic_front(1.0, 0.0, seps, times), 0.0)


def test_analytic_front_on_a_long_ring():
    lat = chain(400)
    J, U = 0.1, 1.0
    times = np.arange(0, 330, 0.1)
    seps = np.arange(60, 199)
    amp = np.array([obdm_first_order(lat, J, U, s, times) for s in seps]).T
    fit = front_arrival(times, seps, amp, 1e-3)
    assert fit.velocity == pytest.approx(group_velocity_max(lat, J, U), rel=0.1)


@pytest.mark.xfail(strict=True, reason="small-ring precursor tail biases the 1e-3 crossing by ~25%; see ledger")
def test_analytic_front_on_fifty_sites_at_fixed_threshold():
    lat = chain(50)
    J, U = 0.1, 1.0
    times = np.arange(0, 60, 0.1)
    seps = np.arange(1, 26)
    amp = np.array([obdm_first_order(lat, J, U, s, times) for s in seps]).T
    fit = front_arrival(times, seps, amp, 1e-3, s_max=23)
    assert fit.velocity == pytest.approx(group_velocity_max(lat, J, U), rel=0.1)


# --- revivals ----------------------------------------------------------------


def test_constant_series_has_no_revival():
    t = np.arange(0, 200, 0.1)
    with pytest.raises(RevivalNotDetected):
        revival_onset(t, np.full_like(t, 0.02))


@pytest.mark.parametrize("t0", [60.0, 120.0, 150.0])
def test_synthetic_revival_onset(t0):
    t = np.arange(0, 250, 0.1)
    early = 0.01 * np.exp(-t / 8) * np.cos(0.64 * t)
    late = 0.005 * np.clip((t - t0) / 5, 0, 1) * np.cos(0.64 * t)
    onset = revival_onset(t, 0.02 + early + late, window=10)
    assert t0 - 1e-9 <= onset <= t0 + 10


def test_rolling_amplitude_window():
    t = np.arange(0, 30, 1.0)
    x = np.where(t == 15, 1.0, 0.0)
    amp = rolling_amplitude(t, x, window=10)
    assert np.all(np.isnan(amp[:10]))
    assert amp[14] == 0 and amp[15] == 1 and amp[24] == 1 and amp[25] == 0


def test_short_series_rejected():
    with pytest.raises(RevivalNotDetected):
        revival_onset(np.arange(0, 5, 0.1), np.zeros(50), window=10)
