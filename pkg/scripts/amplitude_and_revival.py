"""p(0) window averages in 1D and 2D, and the revival onset on the 50-site ring."""

import numpy as np

from bhquench.analytic import p0_first_order
from bhquench.config import validate
from bhquench.observables import revival_onset
from bhquench.runner import run_simulation


def window_mean(sim, lo=20.0, hi=80.0):
    keep = (sim.times >= lo) & (sim.times <= hi)
    return np.trapezoid(sim.p0[keep], sim.times[keep]) / (hi - lo)


def main():
    ring_cfg = validate(dict(mode="simulate", sizes=[50], t_final=250.0, sample_stride=10))
    ring = run_simulation(ring_cfg)
    torus = run_simulation(validate(dict(mode="simulate", sizes=[30, 30], t_final=80.0, sample_stride=10)))
    m1, m2 = window_mean(ring), window_mean(torus)
    print(f"mean p(0), tU in [20, 80]: 1D {m1:.5f}, 2D {m2:.5f}, ratio {m2 / m1:.3f}")
    a1 = p0_first_order(ring.lattice, ring_cfg.J, ring_cfg.U, ring.times)
    print(f"1D max |p0 - first order| over tU <= 250: {np.abs(ring.p0 - a1).max():.2e}")
    onset = revival_onset(ring.times, ring.p0, ring_cfg.revival_window, ring_cfg.revival_factor)
    print(f"revival onset on the ring: tU = {onset:.1f}")
    print(f"max |p0 - p2| / max p0 on the ring: {np.abs(ring.p0 - ring.p[:, 0, 2]).max() / ring.p0.max():.3f}")


if __name__ == "__main__":
    main()
