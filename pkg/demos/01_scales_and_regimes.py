"""From physical propagation scenarios to dimensionless model parameters.

Two scenarios with very different medium correlation lengths end up in
different regimes of the wavelength-to-correlation-length ratio mu: a
microwave link through tropospheric turbulence (correlation length of
meters, mu near one) and an optical link through the same air (mu tiny,
the classical high-frequency setting).  The regime report is advisory; it
never blocks a run.
"""

from layerbeam import PhysicalScales, derive_params, regime_report

SCENARIOS = {
    # 3 cm microwave, 5 km path, 2 m beam, correlation length ~ 4 m
    "microwave / troposphere": PhysicalScales(
        L=5_000.0, L_x=2.0, ell=0.02, k0=2 * 3.141592653589793 / 0.03,
        ell_c=4.0, sigma=1e-3),
    # 1.5 um laser over the same path: wavelength << correlation length
    "laser / troposphere": PhysicalScales(
        L=5_000.0, L_x=0.2, ell=1e-5, k0=2 * 3.141592653589793 / 1.5e-6,
        ell_c=4.0, sigma=1e-5),
}

for name, scales in SCENARIOS.items():
    p = derive_params(scales, delta=0.05)
    r = regime_report(p)
    print(f"--- {name}")
    print(f"    k = {p.k:.4g}, l_c = {p.l_c:.4g}, eps = {p.eps:.3g}, "
          f"beta = {p.beta:.3g}, N_F = {p.N_F:.3g}")
    print(f"    {r.summary()}")
    print(f"    wavelength/correlation ratio mu = {p.mu:.3g} "
          f"-> use the {'same-order' if not r.high_frequency else 'high-frequency'} "
          "form of the limiting drift")
