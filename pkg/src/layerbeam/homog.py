"""Stationary law of the fast subsystem and its closed-form certification.

At order 1/eps^2 the fast variables V = (vR, vI, eta) — the real and
imaginary parts of v_hat at a frozen mode amplitude (uR, uI), plus the
medium process — obey the linear SDE

    dV = -gamma V dz + D dW,    D = (0, 0, 1/sqrt(l_c))^T,

with, writing q = 4 delta^2 k^2 + 1,

    gamma = [[ 4dk^2/q, -2k/q,  (k^2 b/q) uR + (2dk^3 b/q) uI ],
             [ 2k/q,  4dk^2/q, -(2dk^3 b/q) uR + (k^2 b/q) uI ],
             [ 0,     0,       1/l_c                          ]]
    (d = delta, b = beta).

Its eigenvalues are 4dk^2/q +- i 2k/q and 1/l_c, all with positive real
part precisely because delta > 0; the stationary density is then the
mean-zero Gaussian whose covariance S solves the continuous Lyapunov
equation

    gamma S + S gamma^T = D D^T.

This module builds gamma, solves the Lyapunov equation by a dense linear
solve on the 6 independent entries of S (deliberately NOT by transcribing
the closed forms, so the two routes stay independent), transcribes the six
closed-form covariance entries, and certifies that the two agree.  It also
exhibits why the limits do not commute: vR and vI variances scale like
1/delta while the limiting drift coefficient c(delta) converges smoothly to
c(0).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .scales import ModelParams
from .spde import spde_coefficients

__all__ = [
    "NonHurwitzError",
    "GammaSystem",
    "StationaryCovariance",
    "build_gamma",
    "gamma_eigenvalues_theory",
    "stationary_covariance_numeric",
    "stationary_covariance_closed_form",
    "verify_appendix_a",
    "limit_noncommutativity_demo",
    "CovarianceCheck",
    "VerificationReport",
    "NoncommutingReport",
]


class NonHurwitzError(ValueError):
    """gamma has an eigenvalue with nonpositive real part: no stationary law."""


def _require_delta(delta: float):
    if delta <= 0.0:
        raise ValueError(
            "delta > 0 required: at delta = 0 the fast subsystem has no "
            "integrable stationary density (the vR and vI variances carry a "
            "1/delta factor and diverge)")


@dataclass(frozen=True)
class GammaSystem:
    """Drift matrix gamma, diffusion vector D and the frozen (uR, uI)."""

    gamma: np.ndarray = field(repr=False)
    d_vec: np.ndarray = field(repr=False)
    u_point: tuple
    k: float
    beta: float
    l_c: float
    delta: float


def build_gamma(p: ModelParams, uR: float, uI: float) -> GammaSystem:
    """Assemble (gamma, D) for the frozen mode amplitude (uR, uI)."""
    _require_delta(p.delta)
    k, beta, l_c, delta = p.k, p.beta, p.l_c, p.delta
    q = 4.0 * delta**2 * k**2 + 1.0
    a = 4.0 * delta * k**2 / q
    b = 2.0 * k / q
    c1 = k**2 * beta / q
    c2 = 2.0 * delta * k**3 * beta / q
    gamma = np.array([
        [a, -b, c1 * uR + c2 * uI],
        [b, a, -c2 * uR + c1 * uI],
        [0.0, 0.0, 1.0 / l_c],
    ])
    d_vec = np.array([0.0, 0.0, 1.0 / np.sqrt(l_c)])
    return GammaSystem(gamma=gamma, d_vec=d_vec, u_point=(uR, uI),
                       k=k, beta=beta, l_c=l_c, delta=delta)


def gamma_eigenvalues_theory(p: ModelParams):
    """(lambda_1, lambda_2, lambda_3) = 4dk^2/q +- i 2k/q, 1/l_c."""
    q = 4.0 * p.delta**2 * p.k**2 + 1.0
    re = 4.0 * p.delta * p.k**2 / q
    im = 2.0 * p.k / q
    return complex(re, im), complex(re, -im), complex(1.0 / p.l_c, 0.0)


@dataclass(frozen=True)
class StationaryCovariance:
    """The six independent covariance entries of the stationary Gaussian."""

    vRvR: float
    vRvI: float
    vIvI: float
    vReta: float
    vIeta: float
    etaeta: float

    def matrix(self) -> np.ndarray:
        return np.array([
            [self.vRvR, self.vRvI, self.vReta],
            [self.vRvI, self.vIvI, self.vIeta],
            [self.vReta, self.vIeta, self.etaeta],
        ])

    @staticmethod
    def entry_names():
        return ("vRvR", "vRvI", "vIvI", "vReta", "vIeta", "etaeta")


# index pairs of the 6 independent entries of a symmetric 3x3 matrix
_PAIRS = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)]


def _lyapunov_matrix(gamma: np.ndarray) -> np.ndarray:
    """6x6 matrix of the linear system gamma S + S gamma^T = Q on vech(S)."""
    pos = {}
    for r, (i, j) in enumerate(_PAIRS):
        pos[(i, j)] = r
        pos[(j, i)] = r
    A = np.zeros((6, 6))
    for r, (i, j) in enumerate(_PAIRS):
        for l in range(3):
            A[r, pos[(l, j)]] += gamma[i, l]
            A[r, pos[(i, l)]] += gamma[j, l]
    return A


def stationary_covariance_numeric(gs: GammaSystem) -> StationaryCovariance:
    """Solve gamma S + S gamma^T = D D^T for the stationary covariance.

    Dense solve on the 6 independent entries plus one iterative-refinement
    pass (the 1/delta growth of S at small delta otherwise eats into the
    certified 1e-10 agreement).  Raises :class:`NonHurwitzError`, naming the
    offending eigenvalue, when gamma is not Hurwitz-stable (as -gamma).
    """
    eigs = np.linalg.eigvals(gs.gamma)
    bad = eigs[eigs.real <= 0.0]
    if bad.size:
        raise NonHurwitzError(
            f"gamma eigenvalue {bad[0]:.6g} has nonpositive real part; "
            "the fast subsystem has no stationary density")
    A = _lyapunov_matrix(gs.gamma)
    Q = np.outer(gs.d_vec, gs.d_vec)
    b = np.array([Q[i, j] for (i, j) in _PAIRS])
    x = np.linalg.solve(A, b)
    x = x + np.linalg.solve(A, b - A @ x)
    return StationaryCovariance(vRvR=x[0], vRvI=x[1], vIvI=x[3],
                                vReta=x[2], vIeta=x[4], etaeta=x[5])


def stationary_covariance_closed_form(p: ModelParams, uR: float,
                                      uI: float) -> StationaryCovariance:
    """The six closed-form covariance entries at frozen (uR, uI)."""
    _require_delta(p.delta)
    k, beta, l_c, delta = p.k, p.beta, p.l_c, p.delta
    ilc = 1.0 / l_c
    den = ilc**2 + 4.0 * k**2 * (1.0 + delta * ilc) ** 2
    vRvR = k**2 * beta**2 * (
        ilc * uR**2 + 4.0 * delta * ilc * k * uR * uI
        + (ilc + 8.0 * delta * k**2 * (1.0 + delta * ilc)) * uI**2
    ) / (16.0 * delta * den)
    vRvI = k**3 * beta**2 * (
        ilc * uI**2 - 4.0 * k * uR * uI * (1.0 + delta * ilc) - ilc * uR**2
    ) / (8.0 * den)
    vIvI = k**2 * beta**2 * (
        ilc * uI**2 - 4.0 * delta * ilc * k * uR * uI
        + (ilc + 8.0 * delta * k**2 * (1.0 + delta * ilc)) * uR**2
    ) / (16.0 * delta * den)
    vReta = -k**2 * beta * (2.0 * k * uI * (1.0 + delta * ilc) + ilc * uR) / (2.0 * den)
    vIeta = k**2 * beta * (2.0 * k * uR * (1.0 + delta * ilc) - ilc * uI) / (2.0 * den)
    return StationaryCovariance(vRvR=vRvR, vRvI=vRvI, vIvI=vIvI,
                                vReta=vReta, vIeta=vIeta, etaeta=0.5)


@dataclass
class CovarianceCheck:
    """Numeric-vs-closed-form comparison at one parameter tuple."""

    k: float
    beta: float
    l_c: float
    delta: float
    uR: float
    uI: float
    entry_errors: dict
    max_rel_err: float
    eig_abs_err: float
    lyapunov_residual: float


@dataclass
class VerificationReport:
    """Aggregate of :func:`verify_appendix_a` over a parameter grid."""

    checks: list
    max_rel_err: float
    worst_entry: str
    eig_max_abs_err: float
    lyapunov_max_residual: float
    tolerance: float
    eig_tolerance: float

    @property
    def passed(self) -> bool:
        return (self.max_rel_err <= self.tolerance
                and self.eig_max_abs_err <= self.eig_tolerance)


def verify_appendix_a(n_tuples: int = 100, seed: int = 20260809,
                      tolerance: float = 1e-10, eig_tolerance: float = 1e-12,
                      k_range=(0.5, 5.0), beta_range=(0.0, 2.0),
                      l_c_range=(0.2, 5.0), delta_range=(1e-3, 1.0),
                      u_range=(-2.0, 2.0)) -> VerificationReport:
    """Certify the closed-form covariances against the Lyapunov solve.

    Draws ``n_tuples`` random parameter tuples (delta log-uniform over its
    range) and compares every covariance entry; entry errors are measured
    relative to the per-tuple scale max|entry| (>= etaeta = 1/2, so exact
    zeros at beta = 0 cannot manufacture 0/0).  Also checks the eigenvalue
    formulas against a dense eigensolve and records Lyapunov residuals.
    """
    from .scales import make_params

    rng = np.random.default_rng(seed)
    checks = []
    names = StationaryCovariance.entry_names()
    worst = (0.0, "none")
    eig_worst = 0.0
    res_worst = 0.0
    for _ in range(n_tuples):
        k = rng.uniform(*k_range)
        beta = rng.uniform(*beta_range)
        l_c = rng.uniform(*l_c_range)
        delta = 10.0 ** rng.uniform(np.log10(delta_range[0]), np.log10(delta_range[1]))
        uR, uI = rng.uniform(*u_range, size=2)
        p = make_params(k=k, l_c=l_c, eps=0.1, beta=beta, delta=delta)
        gs = build_gamma(p, uR, uI)
        num = stationary_covariance_numeric(gs)
        closed = stationary_covariance_closed_form(p, uR, uI)

        scale = float(np.abs(closed.matrix()).max())
        errors = {nm: abs(getattr(num, nm) - getattr(closed, nm)) / scale
                  for nm in names}
        max_rel = max(errors.values())
        if max_rel > worst[0]:
            worst = (max_rel, max(errors, key=errors.get))

        theory = np.array(gamma_eigenvalues_theory(p))
        numeric = np.linalg.eigvals(gs.gamma)
        theory = theory[np.lexsort((theory.imag, theory.real))]
        numeric = numeric[np.lexsort((numeric.imag, numeric.real))]
        eig_err = float(np.abs(theory - numeric).max())
        eig_worst = max(eig_worst, eig_err)

        S = num.matrix()
        Q = np.outer(gs.d_vec, gs.d_vec)
        residual = np.abs(gs.gamma @ S + S @ gs.gamma.T - Q).max() / np.abs(Q).max()
        res_worst = max(res_worst, residual)

        checks.append(CovarianceCheck(k=k, beta=beta, l_c=l_c, delta=delta,
                                      uR=uR, uI=uI, entry_errors=errors,
                                      max_rel_err=max_rel, eig_abs_err=eig_err,
                                      lyapunov_residual=residual))
    return VerificationReport(checks=checks, max_rel_err=worst[0],
                              worst_entry=worst[1], eig_max_abs_err=eig_worst,
                              lyapunov_max_residual=res_worst,
                              tolerance=tolerance, eig_tolerance=eig_tolerance)


@dataclass
class NoncommutingReport:
    """delta sweep showing S ~ 1/delta blow-up vs c(delta) -> c(0) regularity."""

    deltas: list
    delta_vRvR: list          # delta * vRvR(delta): converges to a finite limit
    c_values: list            # c(delta)
    c_limit: complex          # c(0)
    c_gaps: list              # |c(delta) - c(0)|
    fitted_K: float           # max |c(delta)-c(0)|/delta over the sweep
    u_point: tuple

    @property
    def scaled_diffs_decreasing(self) -> bool:
        d = [abs(a - b) for a, b in zip(self.delta_vRvR[1:], self.delta_vRvR[:-1])]
        return all(x < y for x, y in zip(d[1:], d[:-1]))

    @property
    def linear_in_delta(self) -> bool:
        return all(gap <= self.fitted_K * d * (1 + 1e-12)
                   for gap, d in zip(self.c_gaps, self.deltas))


def limit_noncommutativity_demo(p: ModelParams, deltas=(1e-1, 1e-2, 1e-3, 1e-4),
                                u_point=(1.0, 0.0)) -> NoncommutingReport:
    """Tabulate delta*vRvR(delta) and c(delta) along a delta sweep.

    The rescaled variance delta*vRvR converges to a finite limit (so vRvR
    itself blows up like 1/delta and no stationary law survives delta -> 0),
    while the limiting drift coefficient converges linearly, with
    |c(delta) - c(0)| <= K*delta for the reported fitted K.
    """
    uR, uI = u_point
    deltas = sorted(deltas, reverse=True)
    scaled = []
    c_vals = []
    for d in deltas:
        pd = p.with_(delta=d)
        cov = stationary_covariance_closed_form(pd, uR, uI)
        scaled.append(d * cov.vRvR)
        c_vals.append(spde_coefficients(pd).c_drift)
    c0 = spde_coefficients(p.with_(delta=0.0)).c_drift
    gaps = [abs(c - c0) for c in c_vals]
    fitted_K = max(gap / d for gap, d in zip(gaps, deltas))
    return NoncommutingReport(deltas=list(deltas), delta_vRvR=scaled,
                              c_values=c_vals, c_limit=c0, c_gaps=gaps,
                              fitted_K=fitted_K, u_point=(uR, uI))
