import math

import numpy as np
import pytest

from layerbeam.analysis import (DecayReport, EnsembleStats, FitError,
                                convergence_study, decay_constant_theory,
                                ensemble_full, ensemble_spde, fit_decay,
                                mu_expansion_check)
from layerbeam.grid import PHYSICAL, SpectralField, gaussian_beam, make_grid, plane_wave
from layerbeam.scales import make_params
from layerbeam.spde import coherent_field, free_propagate, spde_coefficients


def params(k=1.0, l_c=1.0, beta=1.0, delta=0.0, eps=0.1):
    return make_params(k=k, l_c=l_c, eps=eps, beta=beta, delta=delta)


def test_decay_constant_values():
    # independent evaluation of the closed form at unit parameters
    assert decay_constant_theory(params()) == pytest.approx(0.1, rel=1e-15)
    assert decay_constant_theory(params(beta=0.0)) == 0.0
    assert decay_constant_theory(params(k=1.0, beta=0.5)) == pytest.approx(0.025, rel=1e-15)
    # high-frequency limit: Lambda -> k^2 beta^2 l_c / 8 from below
    p = params(k=100.0, l_c=100.0, beta=0.7)
    hf = p.k**2 * p.beta**2 * p.l_c / 8
    lam = decay_constant_theory(p)
    assert lam < hf
    assert lam == pytest.approx(hf, rel=1e-7)


def test_decay_constant_equals_minus_re_c():
    rng = np.random.default_rng(1)
    for _ in range(30):
        p = params(k=rng.uniform(0.5, 5), l_c=rng.uniform(0.2, 5),
                   beta=rng.uniform(0, 2))
        assert decay_constant_theory(p) == pytest.approx(
            -spde_coefficients(p).c_drift.real, rel=1e-14, abs=1e-300)


def _stats_from_field(field, first_index=0):
    st = EnsembleStats.zeros(field.grid, field.space, first_index=first_index)
    st.add(field)
    return st


def test_fit_decay_exact_exponential():
    p = params(beta=0.6)
    co = spde_coefficients(p)
    u0 = gaussian_beam(make_grid(32, 8.0), 1.0)
    lam = decay_constant_theory(p)
    zs = [2.0, 4.0, 6.0, 8.0, 10.0]
    snaps = [(z, _stats_from_field(coherent_field(u0, z, co))) for z in zs]
    free = [free_propagate(u0, z, co) for z in zs]
    report = fit_decay(snaps, (16, 16), free, lam)
    assert report.lambda_fit == pytest.approx(lam, rel=1e-12)
    assert report.stderr <= 1e-12
    assert report.z_window == (2.0, 10.0)


def test_fit_decay_errors():
    p = params(beta=0.6)
    co = spde_coefficients(p)
    u0 = gaussian_beam(make_grid(16, 8.0), 1.0)
    zs = [1.0, 2.0, 3.0]
    snaps = [(z, _stats_from_field(coherent_field(u0, z, co))) for z in zs]
    free = [free_propagate(u0, z, co) for z in zs]
    with pytest.raises(FitError, match="at least 5"):
        fit_decay(snaps, (8, 8), free, 0.1)

    # a noisy snapshot whose mean sits below the floor is rejected by name
    zs5 = [1.0, 2.0, 3.0, 4.0, 5.0]
    snaps5 = []
    for z in zs5:
        st = EnsembleStats.zeros(u0.grid, PHYSICAL)
        if z == 4.0:
            st.add(SpectralField(u0.grid, u0.data, PHYSICAL))
            st.add(SpectralField(u0.grid, -u0.data, PHYSICAL))  # mean ~ 0
        else:
            st.add(coherent_field(u0, z, co))
        snaps5.append((z, st))
    free5 = [free_propagate(u0, z, co) for z in zs5]
    with pytest.raises(FitError, match="z=4"):
        fit_decay(snaps5, (8, 8), free5, 0.1)


def test_fit_decay_beta_zero_rate_is_zero():
    p = params(beta=0.0)
    co = spde_coefficients(p)
    u0 = gaussian_beam(make_grid(16, 8.0), 1.0)
    zs = [1.0, 2.0, 3.0, 4.0, 5.0]
    stats = ensemble_spde(u0, co, zs, 20, master_seed=4)
    free = [free_propagate(u0, z, co) for z in zs]
    report = fit_decay(list(zip(zs, stats)), (8, 8), free, 0.0)
    assert abs(report.lambda_fit) <= max(report.stderr, 1e-12)


def test_ensemble_stats_accumulation_against_numpy():
    g = make_grid(8, 2.0)
    rng = np.random.default_rng(7)
    fields = [rng.standard_normal((8, 8)) + 1j * rng.standard_normal((8, 8))
              for _ in range(9)]
    st = EnsembleStats.zeros(g, PHYSICAL)
    for d in fields:
        st.add(SpectralField(g, d, PHYSICAL))
    stack = np.array(fields)
    np.testing.assert_allclose(st.mean_field.data, stack.mean(axis=0), rtol=1e-14)
    np.testing.assert_allclose(st.second_moment, (np.abs(stack) ** 2).mean(axis=0),
                               rtol=1e-14)
    se = st.se_mean()
    assert se.shape == (8, 8) and np.all(se >= 0)


def test_ensemble_stats_ordered_merge():
    g = make_grid(8, 2.0)
    rng = np.random.default_rng(8)
    fields = [SpectralField(g, rng.standard_normal((8, 8)) + 0j, PHYSICAL)
              for _ in range(6)]
    seq = EnsembleStats.zeros(g, PHYSICAL)
    for f in fields:
        seq.add(f)
    a = EnsembleStats.zeros(g, PHYSICAL, first_index=0)
    for f in fields[:4]:
        a.add(f)
    b = EnsembleStats.zeros(g, PHYSICAL, first_index=4)
    for f in fields[4:]:
        b.add(f)
    merged = a.merge(b)
    assert merged.count == 6
    # chunked merge agrees with the sequential fold to rounding (float
    # addition is not associative, so bitwise holds only for the canonical
    # singleton fold below)
    np.testing.assert_allclose(merged.sum_field, seq.sum_field, atol=1e-13)
    # merging singleton accumulators in order is the canonical fold: bitwise
    fold = EnsembleStats.zeros(g, PHYSICAL, first_index=0)
    for i, f in enumerate(fields):
        leaf = EnsembleStats.zeros(g, PHYSICAL, first_index=i)
        leaf.add(f)
        fold = fold.merge(leaf)
    assert np.array_equal(fold.sum_field, seq.sum_field)
    assert np.array_equal(fold.sum_sq, seq.sum_sq)
    # out-of-order merges are refused
    with pytest.raises(ValueError, match="out of order"):
        b.merge(a)


def test_ensemble_reduction_independent_of_workers():
    p = params(beta=1.0, delta=0.0)
    co = spde_coefficients(p)
    u0 = gaussian_beam(make_grid(16, 8.0), 1.0)
    zs = [0.5, 1.0]
    one = ensemble_spde(u0, co, zs, 37, master_seed=11, workers=1, batch_size=8)
    four = ensemble_spde(u0, co, zs, 37, master_seed=11, workers=4, batch_size=8)
    for sa, sb in zip(one, four):
        assert np.array_equal(sa.sum_field, sb.sum_field)
        assert np.array_equal(sa.sum_sq, sb.sum_sq)


def test_clt_bar_shrinkage():
    # quadrupling the path count halves the estimated standard error
    p = params(beta=1.0)
    co = spde_coefficients(p)
    u0 = gaussian_beam(make_grid(16, 8.0), 1.0)
    s1 = ensemble_spde(u0, co, [1.0], 200, master_seed=3)[0]
    s4 = ensemble_spde(u0, co, [1.0], 800, master_seed=3)[0]
    c = 8
    ratio = s1.se_mean()[c, c] / s4.se_mean()[c, c]
    assert ratio == pytest.approx(2.0, rel=0.15)


def test_mu_expansion_report():
    p = params(beta=0.9)
    r0 = mu_expansion_check(p, mu=0.0)
    assert r0.remainder == 0.0
    for mu in (0.2, 0.1, 0.05):
        r = mu_expansion_check(p, mu=mu)
        assert 3.5 <= r.ratio <= 4.5
    r1 = mu_expansion_check(p, mu=1.0)
    assert r1.second_term_fraction == pytest.approx(0.5, abs=1e-15)
    # small-mu remainder approaches the leading geometric-series term -P0 (i mu/2)^2
    pre = p.k**2 * p.beta**2 * p.l_c / 8
    r = mu_expansion_check(p, mu=1e-4)
    lead = -pre * (0.5j * 1e-4) ** 2
    assert abs(r.remainder - lead) <= 1e-4 * abs(lead)


def test_convergence_study_small_instance():
    p = params(beta=1.0, delta=0.1, eps=0.2)
    u0 = plane_wave(make_grid(16, 8.0))
    table = convergence_study(u0, p, [0.3, 0.15], z_end=0.1, n_paths=24,
                              master_seed=21)
    assert len(table.rows) == 2
    for row in table.rows:
        assert row.err_beta0 <= 1e-12          # models coincide without noise
        assert row.err_mean >= 0 and row.err_second_moment >= 0
    assert table.pathwise_monotone             # strong error is robustly monotone
    # shared step size across columns, set by the smallest eps
    assert table.rows[0].dz == table.rows[1].dz
    with pytest.raises(ValueError, match="decreasing"):
        convergence_study(u0, p, [0.1, 0.2], 0.1, 4, 1)
    with pytest.raises(ValueError, match="delta"):
        convergence_study(u0, p.with_(delta=0.0), [0.2, 0.1], 0.1, 4, 1)


def test_ensemble_full_matches_solver_mean():
    # one-path ensemble equals the plain solver run
    from layerbeam.fullmodel import solve_full
    from layerbeam.grid import as_spectral

    p = params(beta=1.0, delta=0.2, eps=0.3)
    u0 = gaussian_beam(make_grid(16, 8.0), 1.0)
    zs, stats = ensemble_full(u0, p, 0.1, [0.1], 1, 5)
    snaps = solve_full(u0, p, 0.1, seed=5, snapshot_zs=[0.1])
    mean_spec = stats[0].mean_field
    from layerbeam.grid import to_spectral
    np.testing.assert_allclose(to_spectral(mean_spec).data, snaps[-1].u_hat.data,
                               rtol=1e-12, atol=1e-14)
