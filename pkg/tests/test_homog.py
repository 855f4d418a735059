import math

import numpy as np
import pytest
from scipy.linalg import expm
from scipy.signal import lfilter

from layerbeam.homog import (NonHurwitzError, build_gamma, gamma_eigenvalues_theory,
                             limit_noncommutativity_demo,
                             stationary_covariance_closed_form,
                             stationary_covariance_numeric, verify_appendix_a)
from layerbeam.scales import make_params
from layerbeam.spde import spde_coefficients


def params(k=1.0, l_c=1.0, beta=1.0, delta=0.1):
    return make_params(k=k, l_c=l_c, eps=0.1, beta=beta, delta=delta)


def test_gamma_entries_example():
    # k=1, delta=1/2: 4dk^2/(4d^2k^2+1) = 1 and 2k/(4d^2k^2+1) = 1
    gs = build_gamma(params(delta=0.5), 0.3, -0.4)
    assert gs.gamma[0, 0] == pytest.approx(1.0, rel=1e-15)
    assert gs.gamma[0, 1] == pytest.approx(-1.0, rel=1e-15)
    assert gs.gamma[1, 0] == pytest.approx(1.0, rel=1e-15)
    assert gs.gamma[2, 0] == 0.0 and gs.gamma[2, 1] == 0.0
    assert gs.gamma[2, 2] == pytest.approx(1.0, rel=1e-15)


def test_gamma_damping_vanishes_with_delta():
    gs = build_gamma(params(delta=1e-9), 1.0, 0.0)
    assert abs(gs.gamma[0, 0]) < 1e-8 and abs(gs.gamma[1, 1]) < 1e-8


def test_gamma_beta_zero_third_column():
    gs = build_gamma(params(beta=0.0, l_c=2.5), 1.0, -1.0)
    np.testing.assert_allclose(gs.gamma[:, 2], [0.0, 0.0, 1.0 / 2.5], rtol=1e-15)


def test_gamma_refuses_delta_zero():
    with pytest.raises(ValueError, match="stationary density"):
        build_gamma(params(delta=0.0), 1.0, 0.0)
    with pytest.raises(ValueError):
        stationary_covariance_closed_form(params(delta=0.0), 1.0, 0.0)


def test_eigenvalue_formulas():
    rng = np.random.default_rng(3)
    for _ in range(50):
        p = params(k=rng.uniform(0.5, 5), l_c=rng.uniform(0.2, 5),
                   beta=rng.uniform(0, 2), delta=10 ** rng.uniform(-3, 0))
        gs = build_gamma(p, *rng.uniform(-2, 2, 2))
        theory = np.array(gamma_eigenvalues_theory(p))
        numeric = np.linalg.eigvals(gs.gamma)
        theory = theory[np.lexsort((theory.imag, theory.real))]
        numeric = numeric[np.lexsort((numeric.imag, numeric.real))]
        assert np.abs(theory - numeric).max() <= 1e-12


def test_closed_form_worked_example():
    # k=1, beta=1, l_c=1, delta=0.1, u=(1,0): vRvR = 1/(16*0.1*(1+4*1.21))
    cov = stationary_covariance_closed_form(params(delta=0.1), 1.0, 0.0)
    assert cov.vRvR == pytest.approx(1.0 / 9.344, rel=1e-12)
    assert cov.vRvR == pytest.approx(0.1070205, rel=1e-6)
    assert cov.etaeta == 0.5


def test_numeric_solve_examples():
    p = params(delta=0.1)
    num = stationary_covariance_numeric(build_gamma(p, 1.0, 0.0))
    assert num.etaeta == pytest.approx(0.5, abs=1e-12)
    assert num.vRvR == pytest.approx(1.0 / 9.344, rel=1e-10)
    # beta = 0 decouples: Sigma = diag(0, 0, 1/2)
    num0 = stationary_covariance_numeric(build_gamma(params(beta=0.0), 1.0, 1.0))
    assert abs(num0.vRvR) <= 1e-15 and abs(num0.vIvI) <= 1e-15
    assert abs(num0.vRvI) <= 1e-15 and abs(num0.vReta) <= 1e-15
    assert num0.etaeta == pytest.approx(0.5, abs=1e-14)


def test_cross_term_zero_at_origin():
    cov = stationary_covariance_closed_form(params(), 0.0, 0.0)
    assert cov.vReta == 0.0 and cov.vIeta == 0.0
    assert cov.vRvR == 0.0 and cov.vIvI == 0.0


def test_phase_rotation_symmetry():
    # multiplying u_hat by i maps (uR, uI) -> (-uI, uR) and (vR, vI) ->
    # (-vI, vR); the closed forms must transform accordingly
    rng = np.random.default_rng(8)
    for _ in range(30):
        p = params(k=rng.uniform(0.5, 5), l_c=rng.uniform(0.2, 5),
                   beta=rng.uniform(0.1, 2), delta=10 ** rng.uniform(-3, 0))
        uR, uI = rng.uniform(-2, 2, 2)
        a = stationary_covariance_closed_form(p, uR, uI)
        b = stationary_covariance_closed_form(p, -uI, uR)
        assert b.vRvR == pytest.approx(a.vIvI, rel=1e-12)
        assert b.vIvI == pytest.approx(a.vRvR, rel=1e-12)
        assert b.vRvI == pytest.approx(-a.vRvI, rel=1e-12)
        assert b.vReta == pytest.approx(-a.vIeta, rel=1e-12)
        assert b.vIeta == pytest.approx(a.vReta, rel=1e-12)


def test_non_hurwitz_error_names_eigenvalue():
    gs = build_gamma(params(delta=0.1), 1.0, 0.0)
    bad = gs.gamma.copy()
    bad[0, 0] = -bad[0, 0]
    bad[1, 1] = -bad[1, 1]
    from layerbeam.homog import GammaSystem
    gs_bad = GammaSystem(gamma=bad, d_vec=gs.d_vec, u_point=gs.u_point,
                         k=gs.k, beta=gs.beta, l_c=gs.l_c, delta=gs.delta)
    with pytest.raises(NonHurwitzError, match="eigenvalue"):
        stationary_covariance_numeric(gs_bad)


def test_lyapunov_residual_and_psd():
    rng = np.random.default_rng(5)
    for _ in range(100):
        p = params(k=rng.uniform(0.5, 5), l_c=rng.uniform(0.2, 5),
                   beta=rng.uniform(0, 2), delta=10 ** rng.uniform(-3, 0))
        gs = build_gamma(p, *rng.uniform(-2, 2, 2))
        S = stationary_covariance_numeric(gs).matrix()
        Q = np.outer(gs.d_vec, gs.d_vec)
        residual = np.abs(gs.gamma @ S + S @ gs.gamma.T - Q).max()
        assert residual <= 1e-12 * np.abs(Q).max()
        assert np.linalg.eigvalsh(S).min() >= -1e-12


def test_verify_appendix_a_passes():
    report = verify_appendix_a(n_tuples=100, seed=20260809)
    assert report.passed
    assert report.max_rel_err <= 1e-10
    assert report.eig_max_abs_err <= 1e-12
    assert len(report.checks) == 100


def test_mutated_closed_form_fails_localized():
    # a sign flip in one closed-form entry must be caught and localized
    p = params(delta=0.3)
    uR, uI = 0.8, -0.5
    num = stationary_covariance_numeric(build_gamma(p, uR, uI))
    closed = stationary_covariance_closed_form(p, uR, uI)
    scale = np.abs(closed.matrix()).max()
    corrupted = {nm: getattr(closed, nm) for nm in closed.entry_names()}
    corrupted["vReta"] = -corrupted["vReta"]
    errors = {nm: abs(getattr(num, nm) - corrupted[nm]) / scale
              for nm in closed.entry_names()}
    assert max(errors, key=errors.get) == "vReta"
    assert errors["vReta"] > 1e-3
    assert all(v <= 1e-10 for nm, v in errors.items() if nm != "vReta")


def test_scaled_variance_limit():
    # delta * vRvR has a finite nonzero limit as delta -> 0
    p = params()
    vals = [d * stationary_covariance_closed_form(p.with_(delta=d), 1.0, 0.5).vRvR
            for d in (1e-2, 1e-4, 1e-6, 1e-8)]
    limit = 1.0 * (1.0**2 + 0.5**2) / (16.0 * (1.0 + 4.0))  # ilc(uR^2+uI^2)/(16(ilc^2+4k^2))
    assert vals[-1] == pytest.approx(limit, rel=1e-6)
    diffs = [abs(a - b) for a, b in zip(vals[1:], vals[:-1])]
    assert all(x < y for x, y in zip(diffs[1:], diffs[:-1]))
    assert vals[-1] > 0


def test_noncommutativity_demo():
    p = params()
    rep = limit_noncommutativity_demo(p)
    assert rep.scaled_diffs_decreasing
    assert rep.linear_in_delta
    assert math.isfinite(rep.fitted_K) and rep.fitted_K > 0
    assert rep.c_limit == spde_coefficients(p.with_(delta=0.0)).c_drift
    # the gap |c(delta) - c(0)| shrinks with delta
    assert all(a > b for a, b in zip(rep.c_gaps, rep.c_gaps[1:]))


def test_stationary_covariance_monte_carlo():
    # exact-in-law simulation of dV = -gamma V dz + D dW via eigenmodes and
    # recursive filtering; long-run time averages must match Sigma within 3 SE
    p = params(k=1.2, l_c=0.8, beta=1.0, delta=0.25)
    uR, uI = 0.9, -0.6
    gs = build_gamma(p, uR, uI)
    target = stationary_covariance_numeric(gs).matrix()

    h = 0.2
    n = 400_000
    lam, V = np.linalg.eig(gs.gamma)
    Vinv = np.linalg.inv(V)
    # exact one-step covariance integral in eigencoordinates
    Qe = Vinv @ np.outer(gs.d_vec, gs.d_vec) @ Vinv.conj().T
    pair = lam[:, None] + lam[None, :].conj()
    Qd_e = Qe * (1.0 - np.exp(-pair * h)) / pair
    # stationary covariance in eigencoordinates for the initial draw
    Se = Qe / pair

    rng = np.random.default_rng(424242)
    # real-valued noise increments mapped into eigencoordinates
    Ld = np.linalg.cholesky(V @ Qd_e @ V.conj().T + 1e-30 * np.eye(3)).real
    w = rng.standard_normal((n, 3)) @ Ld.T
    we = w @ Vinv.T
    a = np.exp(-lam * h)
    y0 = Vinv @ np.linalg.cholesky(V @ Se @ V.conj().T + 1e-30 * np.eye(3)).real \
        @ rng.standard_normal(3)
    y = np.empty((n, 3), dtype=complex)
    for i in range(3):
        zi = np.array([a[i] * y0[i]])
        y[:, i] = lfilter([1.0], [1.0, -a[i]], we[:, i], zi=zi)[0]
    Vpath = (y @ V.T).real

    burn = n // 10
    X = Vpath[burn:]
    est = X.T @ X / len(X)
    # batch-means standard errors (autocorrelation-aware)
    nb = 50
    batches = np.array_split(X, nb)
    for (i, j) in [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)]:
        bm = np.array([ (b[:, i] * b[:, j]).mean() for b in batches ])
        se = bm.std(ddof=1) / math.sqrt(nb)
        assert abs(est[i, j] - target[i, j]) <= 3.5 * se, (i, j)
