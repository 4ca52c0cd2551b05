"""Run orchestration for each mode and the CSV/JSON artifacts they produce.

Times are written in units of 1/U, energies and velocities in units of U.
"""

from __future__ import annotations

import csv
import json
import platform
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from . import analytic, ed
from .config import RunConfig
from .dynamics import HamiltonianParams, IntegratorConfig, evolve
from .lattice import Lattice, LatticeSpec, build_hypercubic
from .observables import (
    ConservationReport,
    FrontFit,
    RevivalNotDetected,
    conservation_row,
    front_arrival,
    obdm_map,
    revival_onset,
)
from .state import Layout, initial_mott

CSV_HEADERS = {
    "onsite": ["t", "site", "n", "p"],
    "conservation": ["t", "trace_dev", "N", "E", "min_p"],
    "ed": ["t", "observable", "re", "im"],
    "compare": ["t", "observable", "value_a", "value_b", "abs_diff", "rel_diff"],
    "front": [
        "direction", "threshold", "n_points", "velocity_index", "velocity_euclidean",
        "intercept", "residual", "group_velocity", "ratio",
    ],
    "front_arrivals": ["direction", "threshold", "separation_index", "separation_euclidean", "arrival_time"],
}


def separation_columns(dimension: int) -> list[str]:
    return [f"s{d + 1}" for d in range(dimension)]


def obdm_header(dimension: int) -> list[str]:
    return ["t", *separation_columns(dimension), "re", "im"]


def analytic_header(dimension: int) -> list[str]:
    return ["t", "observable", *separation_columns(dimension), "value"]


def format_value(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.16e}"
    return str(v)


def write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([format_value(v) for v in row])


# --- series comparison -------------------------------------------------------


@dataclass(frozen=True)
class SeriesComparison:
    max_abs: float
    max_rel: float
    rms: float
    interpolated: bool
    n_points: int


def compare_series(times_a, values_a, times_b, values_b, floor: float = 1e-4) -> SeriesComparison:
    """Compare series b (reference) against a on a's time grid.

    If the grids differ, b is linearly interpolated onto the part of a's grid
    inside b's range and the result is flagged. Relative differences use
    |b| floored at ``floor``.
    """
    ta, a = np.asarray(times_a, float), np.asarray(values_a, float)
    tb, b = np.asarray(times_b, float), np.asarray(values_b, float)
    if ta.shape != a.shape or tb.shape != b.shape:
        raise ValueError("times and values must have matching shapes")
    same = ta.shape == tb.shape and np.allclose(ta, tb, rtol=0, atol=1e-12)
    if not same:
        lo, hi = max(ta.min(), tb.min()), min(ta.max(), tb.max())
        if lo > hi:
            raise ValueError("time ranges do not overlap")
        keep = (ta >= lo) & (ta <= hi)
        ta, a = ta[keep], a[keep]
        b = np.interp(ta, tb, b)
    diff = np.abs(a - b)
    rel = diff / np.maximum(np.abs(b), floor)
    return SeriesComparison(
        float(diff.max()), float(rel.max()), float(np.sqrt(np.mean(diff**2))), not same, int(ta.size)
    )


# --- pipelines ---------------------------------------------------------------


def lattice_for(config: RunConfig) -> Lattice:
    return build_hypercubic(LatticeSpec(tuple(config.sizes)))


def sample_times(config: RunConfig) -> np.ndarray:
    """The grid at which simulate samples: every stride, plus the final time."""
    integ = IntegratorConfig(config.dt, config.t_final, config.sample_stride)
    steps = np.arange(0, integ.n_steps + 1, config.sample_stride)
    if steps[-1] != integ.n_steps:
        steps = np.append(steps, integ.n_steps)
    return steps * config.dt


def cut_indices(lattice: Lattice, direction: str) -> tuple[np.ndarray, list[tuple[int, ...]]]:
    """Separations along the first axis or the main diagonal, 1..L/2 steps."""
    L = min(lattice.sizes) if direction == "diagonal" else lattice.sizes[0]
    steps = np.arange(1, L // 2 + 1)
    out = []
    for d in steps:
        if direction == "axis":
            out.append((int(d),) + (0,) * (lattice.dimension - 1))
        else:
            out.append((int(d),) * lattice.dimension)
    return steps, out


@dataclass
class SimulationResult:
    lattice: Lattice
    times: np.ndarray
    p: np.ndarray  # (samples, rows, n_max + 1); rows = 1 in TI layout
    obdm: np.ndarray  # (samples, *sizes), relative to site 0, grid index s mod L
    report: ConservationReport
    positivity_warnings: list
    layout: Layout

    @property
    def p0(self) -> np.ndarray:
        return self.p[:, 0, 0]

    def obdm_at(self, separation) -> np.ndarray:
        idx = tuple(np.mod(separation, self.lattice.sizes))
        return self.obdm[(slice(None),) + idx]


def run_simulation(config: RunConfig) -> SimulationResult:
    lattice = lattice_for(config)
    params = HamiltonianParams(config.J, config.U)
    integ = IntegratorConfig(config.dt, config.t_final, config.sample_stride)
    state0 = initial_mott(lattice, config.n_max, config.filling, config.layout)
    times, ps, maps, rows = [], [], [], []

    def sampler(state):
        times.append(state.t)
        ps.append(state.p.copy())
        g = obdm_map(state)
        maps.append(g if state.layout is Layout.TI else g[0].reshape(lattice.sizes))
        rows.append(conservation_row(state, lattice, params))

    summary = evolve(state0, lattice, params, integ, sampler)
    return SimulationResult(
        lattice,
        np.array(times),
        np.array(ps),
        np.array(maps),
        ConservationReport(rows),
        summary.positivity_warnings,
        Layout(config.layout),
    )


@dataclass
class AnalyticResult:
    lattice: Lattice
    times: np.ndarray
    p0: np.ndarray
    separations: list[tuple[int, ...]]
    obdm: np.ndarray  # (samples, len(separations))


def run_analytic(config: RunConfig, separations=None) -> AnalyticResult:
    lattice = lattice_for(config)
    times = sample_times(config)
    p0 = analytic.p0_first_order(lattice, config.J, config.U, times)
    if separations is None:
        separations = _obdm_separations(lattice, config)
    obdm = np.array(
        [analytic.obdm_first_order(lattice, config.J, config.U, s, times) for s in separations]
    ).T
    return AnalyticResult(lattice, times, p0, list(separations), obdm.reshape(times.size, len(separations)))


@dataclass
class EDResult:
    lattice: Lattice
    times: np.ndarray
    series: dict[str, np.ndarray]
    method: str
    dimension: int
    diagonal_ensemble: dict[str, complex] = field(default_factory=dict)

    def time_average(self, name: str) -> complex:
        """Trapezoidal time average of the complex series over the sampled window."""
        t, v = self.times, self.series[name]
        if t[-1] == t[0]:
            return complex(v[0])
        return complex(np.trapezoid(v, t) / (t[-1] - t[0]))

    def mean_abs(self, name: str) -> float:
        t, v = self.times, np.abs(self.series[name])
        if t[-1] == t[0]:
            return float(v[0])
        return float(np.trapezoid(v, t) / (t[-1] - t[0]))


def run_ed(config: RunConfig, times=None, diagonal_ensemble: bool = True) -> EDResult:
    lattice = lattice_for(config)
    n_particles = config.filling * lattice.n_sites
    basis = ed.build_basis(lattice.n_sites, n_particles, config.ed_cutoff)
    h = ed.build_hamiltonian(basis, lattice, config.J, config.U)
    psi0 = ed.mott_state(basis, config.filling)
    obs = ed.Observables(basis, lattice, n_max_probability=min(3, basis.cutoff))
    times = sample_times(config) if times is None else np.asarray(times, float)
    method = config.ed_method
    if method == "auto":
        method = "dense" if basis.dim <= config.dense_budget else "krylov"
    averages = {}
    if method == "dense":
        spectrum = ed.dense_spectrum(h, config.dense_budget)
        series = ed.dense_series(spectrum, psi0, times, obs)
        if diagonal_ensemble:
            for name, op in obs.ops.items():
                averages[name] = ed.dense_diagonal_ensemble(h, op, psi0, spectrum=spectrum)
    else:
        series = ed.krylov_series(h, psi0, times, obs, config.krylov_dim, config.krylov_tol)
    return EDResult(lattice, times, series, method, basis.dim, averages)


@dataclass
class Comparison:
    simulation: SimulationResult
    exact: EDResult
    observables: dict[str, tuple[np.ndarray, np.ndarray]]
    metrics: dict[str, SeriesComparison]


def run_compare(config: RunConfig) -> Comparison:
    sim = run_simulation(config)
    exact = run_ed(config, sim.times, diagonal_ensemble=False)
    nn = (1,) + (0,) * (sim.lattice.dimension - 1)
    pairs = {
        f"p{n}": (sim.p[:, 0, n], exact.series[f"p{n}"].real)
        for n in range(min(3, sim.p.shape[-1] - 1) + 1)
        if f"p{n}" in exact.series
    }
    pairs["obdm_nn"] = (sim.obdm_at(nn).real, exact.series["bdag1_b2"].real)
    metrics = {
        name: compare_series(sim.times, a, exact.times, b, config.compare_floor)
        for name, (a, b) in pairs.items()
    }
    return Comparison(sim, exact, pairs, metrics)


@dataclass
class FrontResult:
    direction: str
    threshold: float
    fit: FrontFit
    step_length: float
    group_velocity: float

    @property
    def velocity(self) -> float:
        """Euclidean front speed."""
        return self.fit.velocity * self.step_length

    @property
    def ratio(self) -> float:
        return self.velocity / self.group_velocity


def front_directions(lattice: Lattice) -> tuple[str, ...]:
    return ("axis",) if lattice.dimension == 1 else ("axis", "diagonal")


def fit_fronts(
    lattice: Lattice,
    times,
    amplitude_of,
    J: float,
    U: float,
    thresholds,
    s_min: int = 3,
) -> list[FrontResult]:
    """Front fits for each direction and threshold.

    ``amplitude_of(direction, separations)`` returns |obdm| with shape
    (n_times, n_separations). Separations closer than 2 steps to the
    periodic echo at L/2 are excluded.
    """
    out = []
    for direction in front_directions(lattice):
        steps, seps = cut_indices(lattice, direction)
        amp = np.abs(amplitude_of(direction, seps))
        L = min(lattice.sizes) if direction == "diagonal" else lattice.sizes[0]
        step_length = float(np.sqrt(lattice.dimension)) if direction == "diagonal" else 1.0
        v_group = analytic.group_velocity_max(lattice, J, U, direction)
        for th in thresholds:
            fit = front_arrival(times, steps, amp, th, s_max=L / 2 - 2, s_min=s_min)
            out.append(FrontResult(direction, float(th), fit, step_length, v_group))
    return out


def run_front(config: RunConfig, thresholds=None):
    """Front velocities from the simulated (or analytic) one-body density matrix."""
    lattice = lattice_for(config)
    if thresholds is None:
        th = config.threshold
        thresholds = (th / 2, th, 2 * th)
    if config.front_source == "analytic":
        times = sample_times(config)

        def amplitude_of(direction, seps):
            return np.array([analytic.obdm_first_order(lattice, config.J, config.U, s, times) for s in seps]).T

        source = None
    else:
        source = run_simulation(config)
        times = source.times

        def amplitude_of(direction, seps):
            return np.stack([source.obdm_at(s) for s in seps], axis=1)

    fits = fit_fronts(lattice, times, amplitude_of, config.J, config.U, thresholds, config.front_s_min)
    return fits, source


# --- artifact writers --------------------------------------------------------


def _obdm_separations(lattice: Lattice, config: RunConfig) -> list[tuple[int, ...]]:
    mode = config.obdm_output
    if mode == "auto":
        mode = "all" if lattice.dimension == 1 else "cuts"
    if mode == "all":
        grid = np.stack(np.meshgrid(*[np.arange(L) for L in lattice.sizes], indexing="ij"), -1)
        seps = [lattice.canonical_displacement(g) for g in grid.reshape(-1, lattice.dimension)]
        return sorted(s for s in seps if any(s))
    seps = []
    for direction in front_directions(lattice):
        seps.extend(cut_indices(lattice, direction)[1])
    return seps


def _write_simulation(out: Path, config: RunConfig, sim: SimulationResult) -> list[str]:
    U = config.U
    lat = sim.lattice
    sites = ["TI"] if sim.layout is Layout.TI else list(range(lat.n_sites))

    def onsite_rows():
        for k, t in enumerate(sim.times):
            for i, site in enumerate(sites):
                for n in range(sim.p.shape[-1]):
                    yield (t * U, site, n, sim.p[k, i, n])

    seps = _obdm_separations(lat, config)

    def obdm_rows():
        for k, t in enumerate(sim.times):
            for s in seps:
                z = sim.obdm[(k,) + tuple(np.mod(s, lat.sizes))]
                yield (t * U, *s, z.real, z.imag)

    rows = ((r.t * U, r.trace_deviation, r.number, r.energy / U, r.min_p) for r in sim.report.rows)
    write_csv(out / "onsite.csv", CSV_HEADERS["onsite"], onsite_rows())
    write_csv(out / "obdm.csv", obdm_header(lat.dimension), obdm_rows())
    write_csv(out / "conservation.csv", CSV_HEADERS["conservation"], rows)
    return ["onsite.csv", "obdm.csv", "conservation.csv"]


def _simulation_results(config: RunConfig, sim: SimulationResult) -> dict:
    res = {
        "max_trace_deviation": sim.report.max_trace_deviation(),
        "number_drift": sim.report.number_drift(),
        "energy_drift": sim.report.energy_drift(),
        "positivity_warnings": len(sim.positivity_warnings),
    }
    try:
        res["revival_onset"] = revival_onset(
            sim.times * config.U, sim.p0, config.revival_window, config.revival_factor
        )
    except RevivalNotDetected:
        res["revival_onset"] = None
    return res


def _write_analytic(out: Path, config: RunConfig, res: AnalyticResult) -> list[str]:
    D = res.lattice.dimension

    def rows():
        for k, t in enumerate(res.times):
            yield (t * config.U, "p0", *([0] * D), res.p0[k])
            for j, s in enumerate(res.separations):
                yield (t * config.U, "obdm", *s, res.obdm[k, j])

    write_csv(out / "analytic.csv", analytic_header(D), rows())
    return ["analytic.csv"]


def _write_ed(out: Path, config: RunConfig, res: EDResult) -> list[str]:
    names = list(res.series)

    def rows():
        for k, t in enumerate(res.times):
            for name in names:
                z = complex(res.series[name][k])
                yield (t * config.U, name, z.real, z.imag)

    write_csv(out / "ed.csv", CSV_HEADERS["ed"], rows())
    return ["ed.csv"]


def _ed_results(res: EDResult) -> dict:
    out = {"method": res.method, "dimension": res.dimension, "time_average": {}, "mean_abs": {}}
    for name in res.series:
        z = res.time_average(name)
        out["time_average"][name] = [z.real, z.imag]
        out["mean_abs"][name] = res.mean_abs(name)
    if res.diagonal_ensemble:
        out["diagonal_ensemble"] = {k: [v.real, v.imag] for k, v in res.diagonal_ensemble.items()}
    return out


def _write_compare(out: Path, config: RunConfig, cmp: Comparison) -> list[str]:
    floor = config.compare_floor

    def rows():
        for k, t in enumerate(cmp.simulation.times):
            for name, (a, b) in cmp.observables.items():
                d = abs(a[k] - b[k])
                yield (t * config.U, name, a[k], b[k], d, d / max(abs(b[k]), floor))

    write_csv(out / "compare.csv", CSV_HEADERS["compare"], rows())
    return ["compare.csv"]


def _write_front(out: Path, config: RunConfig, fits: list[FrontResult]) -> list[str]:
    U = config.U
    rows = [
        (
            r.direction, r.threshold, r.fit.separations.size, r.fit.velocity * 1.0 / U, r.velocity / U,
            r.fit.intercept, r.fit.residual, r.group_velocity / U, r.ratio,
        )
        for r in fits
    ]
    arrivals = [
        (r.direction, r.threshold, int(s), s * r.step_length, t * U)
        for r in fits
        for s, t in zip(r.fit.separations, r.fit.arrival_times)
    ]
    write_csv(out / "front.csv", CSV_HEADERS["front"], rows)
    write_csv(out / "front_arrivals.csv", CSV_HEADERS["front_arrivals"], arrivals)
    return ["front.csv", "front_arrivals.csv"]


def execute(config: RunConfig, output_dir: Path | str | None = None) -> dict:
    """Run ``config.mode`` and write its artifacts plus ``run_manifest.json``."""
    out = Path(output_dir if output_dir is not None else config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    results: dict = {}
    mode = config.mode
    if mode == "simulate":
        sim = run_simulation(config)
        files = _write_simulation(out, config, sim)
        results = _simulation_results(config, sim)
    elif mode == "analytic":
        files = _write_analytic(out, config, run_analytic(config))
    elif mode == "ed":
        res = run_ed(config)
        files = _write_ed(out, config, res)
        results = _ed_results(res)
    elif mode == "compare":
        cmp = run_compare(config)
        files = _write_compare(out, config, cmp)
        results = {
            name: {"max_abs": m.max_abs, "max_rel": m.max_rel, "rms": m.rms, "interpolated": m.interpolated}
            for name, m in cmp.metrics.items()
        }
    elif mode == "front":
        fits, sim = run_front(config)
        files = _write_front(out, config, fits)
        if sim is not None:
            files += _write_simulation(out, config, sim)
            results = _simulation_results(config, sim)
        results["fronts"] = [
            {"direction": r.direction, "threshold": r.threshold, "velocity": r.velocity / config.U,
             "group_velocity": r.group_velocity / config.U, "ratio": r.ratio}
            for r in fits
        ]
    else:
        raise ValueError(f"unknown mode {mode!r}")
    manifest = {
        "config": config.to_dict(),
        "code_version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "started": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
        "wall_time_s": time.perf_counter() - start,
        "outputs": files,
        "results": results,
    }
    with open(out / "run_manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")
    return manifest
