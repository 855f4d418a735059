"""A Gaussian beam through the limiting white-noise model.

For a layered medium the noise multiplies the whole transverse field by one
random phase-and-decay factor per step, so single realizations keep the
beam shape while the ENSEMBLE mean loses amplitude: scattering converts
coherent energy into incoherent energy at the rate

    Lambda = k^2 beta^2 l_c / (8 (1 + 1/(4 k^2 l_c^2))).

The run below measures that decay from 400 Monte-Carlo paths and compares
with the formula; it also shows the pathwise norm law (the L2 norm of every
realization relative to free propagation is deterministic).
"""

from pathlib import Path

import numpy as np

from layerbeam import (decay_constant_theory, gaussian_beam, make_grid,
                       make_params, spde_coefficients)
from layerbeam.analysis import ensemble_spde, fit_decay
from layerbeam.grid import l2_norm, to_spectral
from layerbeam.spde import coherent_field, free_propagate
from layerbeam.svgchart import line_chart

OUT = Path(__file__).parent / "out"
OUT.mkdir(exist_ok=True)

p = make_params(k=1.0, l_c=1.0, eps=0.05, beta=0.5, delta=0.0)
coeff = spde_coefficients(p)
lam = decay_constant_theory(p)
print(f"limiting drift c = {coeff.c_drift:.6f}, noise amplitude g = {coeff.g_noise}")
print(f"coherent decay constant Lambda = {lam}")

grid = make_grid(64, 8.0)
u0 = gaussian_beam(grid, 1.0)
zs = [4.0 * i for i in range(1, 9)]
stats = ensemble_spde(u0, coeff, zs, n_paths=400, master_seed=3)
free = [free_propagate(u0, z, coeff) for z in zs]

probe = (32, 32)
report = fit_decay(list(zip(zs, stats)), probe, free, lam)
print(f"fitted decay rate {report.lambda_fit:.5f} "
      f"({100 * report.rel_error:.1f}% from theory, {report.n_snapshots} snapshots)")

ratio = [abs(st.mean_field.data[probe] / fr.data[probe]) for st, fr in zip(stats, free)]
theory = [np.exp(-lam * z) for z in zs]
line_chart(OUT / "coherent_decay.svg",
           [("|E[u]|/|S u0| at beam center", zs, ratio),
            ("exp(-Lambda z)", zs, theory)],
           title="coherent-field decay", xlabel="z", ylabel="ratio", log_y=True)
print(f"wrote {OUT/'coherent_decay.svg'}")

# pathwise norm law: ||u|| / ||S(z)u0|| is the same number on every path
rate = coeff.c_drift.real + coeff.g_noise**2 / 2
z_end = zs[-1]
print(f"pathwise norm ratio (deterministic): exp({rate:.3e} * z); at z={z_end}: "
      f"{np.exp(rate * z_end):.6f}")
