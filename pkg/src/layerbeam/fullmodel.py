"""Pre-limit envelope solver: the regularized second-order model per mode.

With v = eps * du/dz, each transverse Fourier mode kappa of the regularized
envelope equation obeys the stiff linear SDE system

    d u_hat =  (1/eps) v_hat dz
    d v_hat = -(1/eps^2) * damping * v_hat dz
              -(1/eps)   * diffraction * u_hat dz
              +(1/eps^2) * coupling * u_hat * eta dz

    damping     = 2k/(2*delta*k - i)
    diffraction = (k/(2*pi*N_F)) * i/(2*delta*k - i) * |kappa|^2
    coupling    = k^2*beta*i/(2*delta*k - i)

driven by ONE shared OU path eta (the medium is layered: every mode sees the
same eta).  The mixed physical constant L*ell/L_x^2 has been eliminated via
the Fresnel relation, L*ell/(2*L_x^2*k) = 1/(4*pi*N_F), so only ModelParams
enters.  delta > 0 is required throughout: at delta = 0 the fast subsystem
has no integrable stationary density (its stationary variances behave like
1/delta), and the damping that stabilizes the scheme disappears.

Integration scheme
------------------
Strang splitting per step: the kappa-dependent diffraction term is nilpotent
(it only feeds u_hat into v_hat), so its half-step is the exact kick
v_hat += -diffraction*(dz/2)/eps * u_hat, wrapped around the exact 2x2
matrix exponential of the kappa-INDEPENDENT stiff block with eta frozen at
the step midpoint.  The 1/eps^2 stiffness therefore never limits stability
(exponentials are exact); the step bound

    dz <= c_stab * eps^2 * min(l_c, |2*delta*k - i|/(2k))

is an accuracy constraint that resolves the OU correlation length and the
damping time with >= 1/c_stab substeps.  Global order 2 in dz.

Because the dynamics depend on kappa only through |kappa|^2, propagators are
evolved once per distinct |kappa|^2 value and scattered back to the mode
grid at snapshot times; ensembles batch this evolution over paths.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .grid import SPECTRAL, SpectralField, as_spectral
from .noise import OUPath, sample_ou_path
from .scales import ModelParams

__all__ = [
    "StabilityError",
    "ModeCoefficients",
    "mode_coefficients",
    "stability_limit",
    "FullState",
    "initial_state",
    "step_full",
    "solve_full",
]

DEFAULT_C_STAB = 0.1


class StabilityError(ValueError):
    """Raised before integrating when a step exceeds the accuracy bound."""


@dataclass(frozen=True)
class ModeCoefficients:
    """Complex drift coefficients of the per-mode system (see module doc)."""

    damping: complex
    diffraction: object   # scalar or ndarray, follows the kappa2 argument
    coupling: complex


def _require_delta(p: ModelParams):
    if p.delta <= 0.0:
        raise ValueError(
            "the pre-limit model requires delta > 0: without the damping "
            "delta the fast (v_hat, eta) subsystem has no integrable "
            "stationary density (variances diverge like 1/delta)")


def mode_coefficients(p: ModelParams, kappa2=0.0) -> ModeCoefficients:
    """Drift coefficients for mode(s) with squared wavenumber ``kappa2``."""
    _require_delta(p)
    denom = 2.0 * p.delta * p.k - 1j
    return ModeCoefficients(
        damping=2.0 * p.k / denom,
        diffraction=(p.k / (2.0 * np.pi * p.N_F)) * 1j / denom * kappa2,
        coupling=p.k**2 * p.beta * 1j / denom,
    )


def stability_limit(p: ModelParams, c_stab: float = DEFAULT_C_STAB) -> float:
    """Largest allowed dz: c_stab * eps^2 * min(l_c, |2*delta*k-i|/(2k))."""
    _require_delta(p)
    fast_scale = min(p.l_c, abs(2.0 * p.delta * p.k - 1j) / (2.0 * p.k))
    return c_stab * p.eps**2 * fast_scale


def _check_step(p: ModelParams, dz: float, c_stab: float):
    limit = stability_limit(p, c_stab)
    if dz > limit * (1.0 + 1e-12):
        raise StabilityError(
            f"dz = {dz:.6g} exceeds the step bound {limit:.6g} "
            f"(= {c_stab} * eps^2 * min(l_c, |2*delta*k-i|/(2k)))")


def _expm2(m11, m12, m21, m22):
    """Entries of expm([[m11, m12], [m21, m22]]), vectorized.

    exp(M) = e^s (cosh(q) I + sinh(q)/q (M - s I)) with s = tr/2 and
    q^2 = s^2 - det; sinh(q)/q is continued through q = 0 by its series.
    """
    m11 = np.asarray(m11, dtype=complex)
    m12 = np.asarray(m12, dtype=complex)
    m21 = np.asarray(m21, dtype=complex)
    m22 = np.asarray(m22, dtype=complex)
    s = 0.5 * (m11 + m22)
    det = m11 * m22 - m12 * m21
    q = np.sqrt(s * s - det)
    small = np.abs(q) < 1e-8
    q_safe = np.where(small, 1.0, q)
    shc = np.where(small, 1.0 + q * q / 6.0, np.sinh(q_safe) / q_safe)
    ch = np.cosh(q)
    es = np.exp(s)
    return (es * (ch + shc * (m11 - s)),
            es * (shc * m12),
            es * (shc * m21),
            es * (ch + shc * (m22 - s)))


def _stiff_block_exp(p: ModelParams, eta_mid, dz: float):
    """exp(dz * [[0, 1/eps], [coupling*eta/eps^2, -damping/eps^2]]).

    ``eta_mid`` may be a scalar or an array; entries broadcast accordingly.
    """
    co = mode_coefficients(p)
    e2 = p.eps * p.eps
    return _expm2(0.0, dz / p.eps,
                  co.coupling * np.asarray(eta_mid) * dz / e2,
                  -co.damping * dz / e2)


def _kick_coef(p: ModelParams, kappa2_bins, dz: float):
    """Half-step diffraction kick coefficient q: v_hat += q * u_hat."""
    co = mode_coefficients(p, kappa2_bins)
    return -co.diffraction * (0.5 * dz / p.eps)


@lru_cache(maxsize=8)
def _kappa2_bins(grid):
    """Distinct |kappa|^2 values and the mode -> bin index map."""
    uniq, inverse = np.unique(grid.kappa2_int, return_inverse=True)
    return grid.dkappa**2 * uniq, inverse.reshape(grid.kappa2_int.shape)


def evolve_mode_propagators(p: ModelParams, kappa2_bins, eta_mid, dz: float,
                            checkpoint_steps):
    """Evolve per-bin 2x2 propagators through a batch of OU paths.

    Parameters
    ----------
    kappa2_bins : (B,) array of distinct |kappa|^2 values.
    eta_mid : (P, S) array; eta frozen at the midpoint of each of S steps,
        one row per path.
    checkpoint_steps : increasing step counts (each in 1..S) at which to
        record the propagator.

    Returns
    -------
    list of (P, B) complex 4-tuples (p11, p12, p21, p22), one per
    checkpoint, mapping (u_hat, v_hat) at z=0 to the checkpoint z.
    """
    eta_mid = np.atleast_2d(np.asarray(eta_mid, dtype=float))
    P, S = eta_mid.shape
    checkpoints = list(checkpoint_steps)
    if checkpoints != sorted(set(checkpoints)) or (checkpoints and (
            checkpoints[0] < 1 or checkpoints[-1] > S)):
        raise ValueError("checkpoint_steps must be increasing and within 1..S")

    q = np.asarray(_kick_coef(p, np.asarray(kappa2_bins, dtype=float), dz))
    B = q.shape[0]
    shape = (P, B)
    # running product, seeded with the leading half kick (I + K/2)
    p11 = np.ones(shape, dtype=complex)
    p12 = np.zeros(shape, dtype=complex)
    p21 = np.broadcast_to(q, shape).copy()
    p22 = np.ones(shape, dtype=complex)

    out = []
    targets = set(checkpoints)
    for s in range(1, S + 1):
        e11, e12, e21, e22 = _stiff_block_exp(p, eta_mid[:, s - 1], dz)
        e11, e12 = e11[:, None], e12[:, None]
        e21, e22 = e21[:, None], e22[:, None]
        n11 = e11 * p11 + e12 * p21
        n12 = e11 * p12 + e12 * p22
        n21 = e21 * p11 + e22 * p21
        n22 = e21 * p12 + e22 * p22
        p11, p12, p21, p22 = n11, n12, n21, n22
        if s in targets:
            # close with the trailing half kick without disturbing the run
            out.append((p11.copy(), p12.copy(),
                        p21 + q * p11, p22 + q * p12))
        if s < S:
            # merged inter-step kick (I + K/2)(I + K/2) = I + K
            p21 = p21 + (2.0 * q) * p11
            p22 = p22 + (2.0 * q) * p12
    return out


@dataclass
class FullState:
    """State of the pre-limit solver: spectral (u_hat, v_hat) plus (z, eta)."""

    u_hat: SpectralField
    v_hat: SpectralField
    z: float
    eta: float

    def __post_init__(self):
        if self.u_hat.space != SPECTRAL or self.v_hat.space != SPECTRAL:
            raise ValueError("FullState fields must be spectral-space")
        if self.u_hat.grid != self.v_hat.grid:
            raise ValueError("u_hat and v_hat must share one grid")


def initial_state(u0: SpectralField, p: ModelParams, v_hat0=None,
                  eta0: float = 0.0) -> FullState:
    """Entry state at z = 0 with v_hat = 0 (slowly varying envelope) by default."""
    _require_delta(p)
    u_hat = as_spectral(u0)
    if v_hat0 is None:
        v_hat = SpectralField(u_hat.grid, np.zeros_like(u_hat.data), SPECTRAL)
    else:
        v_hat = as_spectral(v_hat0)
        if v_hat.grid != u_hat.grid:
            raise ValueError("v_hat0 must live on the same grid as u0")
    return FullState(u_hat=u_hat, v_hat=v_hat, z=0.0, eta=eta0)


def step_full(state: FullState, ou: OUPath, p: ModelParams, dz: float,
              c_stab: float = DEFAULT_C_STAB) -> FullState:
    """Advance one step; the OU segment must cover [z, z+dz] at spacing dz/2.

    Uses ou.values[1] as the frozen midpoint eta and ou.values[2] as the
    end-of-step eta.  All modes see the same eta (layered medium).
    """
    _check_step(p, dz, c_stab)
    if ou.n_steps < 2:
        raise ValueError("OU segment must contain at least 2 substeps (dz/2 spacing)")
    if not np.isclose(ou.z_step, 0.5 * dz, rtol=1e-9, atol=0.0):
        raise ValueError(
            f"OU segment spacing {ou.z_step!r} must equal dz/2 = {0.5 * dz!r}")
    grid = state.u_hat.grid
    q = _kick_coef(p, grid.kappa2, dz)
    e11, e12, e21, e22 = _stiff_block_exp(p, float(ou.values[1]), dz)
    u = state.u_hat.data
    v = state.v_hat.data + q * u
    u, v = e11 * u + e12 * v, e21 * u + e22 * v
    v = v + q * u
    return FullState(
        u_hat=SpectralField(grid, u, SPECTRAL),
        v_hat=SpectralField(grid, v, SPECTRAL),
        z=state.z + dz,
        eta=float(ou.values[2]),
    )


def solve_full(u0: SpectralField, p: ModelParams, z_end: float, seed: int,
               snapshot_zs, dz: float | None = None,
               c_stab: float = DEFAULT_C_STAB, v_hat0=None,
               path_index: int = 0) -> list:
    """Integrate one realization from 0 to z_end; deterministic per seed.

    Snapshot positions are snapped to the integration grid; each returned
    :class:`FullState` records its actual z.  ``dz`` defaults to the largest
    step allowed by :func:`stability_limit`, shrunk to divide z_end evenly.
    """
    _require_delta(p)
    if z_end <= 0.0:
        raise ValueError(f"z_end must be positive, got {z_end!r}")
    if dz is None:
        dz = stability_limit(p, c_stab)
    _check_step(p, dz, c_stab)
    n_steps = max(1, int(np.ceil(z_end / dz - 1e-9)))
    dz = z_end / n_steps

    all_steps = sorted({min(max(int(round(z / dz)), 0), n_steps)
                        for z in snapshot_zs})
    if not all_steps:
        all_steps = [n_steps]
    snap_steps = [s for s in all_steps if s > 0]

    path = sample_ou_path(p, 2 * n_steps, 0.5 * dz, seed, path_index)
    eta_mid = path.values[1::2]

    state0 = initial_state(u0, p, v_hat0=v_hat0, eta0=float(path.values[0]))
    grid = state0.u_hat.grid
    bins, inverse = _kappa2_bins(grid)
    props = evolve_mode_propagators(p, bins, eta_mid[None, :], dz, snap_steps)

    u0d, v0d = state0.u_hat.data, state0.v_hat.data
    snapshots = [state0] if 0 in all_steps else []
    for step, (p11, p12, p21, p22) in zip(snap_steps, props):
        e11, e12 = p11[0][inverse], p12[0][inverse]
        e21, e22 = p21[0][inverse], p22[0][inverse]
        snapshots.append(FullState(
            u_hat=SpectralField(grid, e11 * u0d + e12 * v0d, SPECTRAL),
            v_hat=SpectralField(grid, e21 * u0d + e22 * v0d, SPECTRAL),
            z=step * dz,
            eta=float(path.values[2 * step]),
        ))
    return snapshots
