"""Limiting Ito model of white-noise paraxial propagation.

In spectral space the limiting equation is, per mode kappa,

    d u_hat = -i*diffr*|kappa|^2 * u_hat dz + c * u_hat dz + i*g * u_hat dW

with the stochastic integral in the ITO sense, where

    c(delta) = -k^2 beta^2 l_c / (8*(1 + (delta - i/(2k))/l_c)),
    g        = k beta sqrt(l_c) / 2,
    diffr    = 1/(4 pi N_F).

delta = 0 is allowed here (only the pre-limit model needs delta > 0); then
c = -k^2 beta^2 l_c / (8*(1 - i/(2 k l_c))).

Because the noise multiplies u by a scalar independent of x, the split step

    u_hat <- exp(-i*diffr*|kappa|^2*dz) * M * u_hat,
    M = exp((c + g^2/2)*dz + i*g*dW)

is EXACT pathwise for any dz (the two factors commute).  The (c + g^2/2)
exponent is the Ito exponential of the drift: a Stratonovich reading would
drop the +g^2/2 and get every second moment wrong.  Consequences used
throughout the tests:

* pathwise, ||u(z)|| / ||S(z)u0|| = exp((Re c + g^2/2) z), deterministically;
  with delta = 0 the rate equals (k^2 beta^2 l_c/8) * (mu^2/4)/(1 + mu^2/4),
  which vanishes in the high-frequency limit mu -> 0 (norm conservation);
* the mean field E[u](z) = exp(c z) * S(z) u0 decays at rate -Re c.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import SPECTRAL, SpectralField, as_physical, as_spectral, _require_space
from .scales import ModelParams

__all__ = [
    "SpdeCoefficients",
    "spde_coefficients",
    "spde_step",
    "free_propagate",
    "closed_form_solution",
    "coherent_field",
]


@dataclass(frozen=True)
class SpdeCoefficients:
    """Coefficients (c, g, diffraction) of the limiting model."""

    c_drift: complex
    g_noise: float
    diffr: float


def spde_coefficients(p: ModelParams) -> SpdeCoefficients:
    """Evaluate c(delta), g and the diffraction coefficient from ModelParams."""
    c = -p.k**2 * p.beta**2 * p.l_c / (8.0 * (1.0 + (p.delta - 0.5j / p.k) / p.l_c))
    g = p.k * p.beta * np.sqrt(p.l_c) / 2.0
    return SpdeCoefficients(c_drift=complex(c), g_noise=float(g),
                            diffr=1.0 / (4.0 * np.pi * p.N_F))


def _free_phase(field: SpectralField, coeff: SpdeCoefficients, dz: float) -> np.ndarray:
    return np.exp(-1j * coeff.diffr * dz * field.grid.kappa2)


def spde_step(f: SpectralField, dW: float, dz: float,
              coeff: SpdeCoefficients) -> SpectralField:
    """One exact split step of the limiting model (spectral space).

    Applies the per-mode free phase and the global scalar multiplier
    M = exp((c + g^2/2) dz + i g dW); exact in law and pathwise since the
    two operators commute.
    """
    _require_space(f, SPECTRAL, "spde_step")
    m = np.exp((coeff.c_drift + 0.5 * coeff.g_noise**2) * dz + 1j * coeff.g_noise * dW)
    return SpectralField(f.grid, f.data * (m * _free_phase(f, coeff, dz)), SPECTRAL)


def free_propagate(u0: SpectralField, z: float, coeff: SpdeCoefficients) -> SpectralField:
    """Deterministic free propagation S(z)u0; returns u0's representation."""
    spec = as_spectral(u0)
    out = SpectralField(spec.grid, spec.data * _free_phase(spec, coeff, z), SPECTRAL)
    return out if u0.space == SPECTRAL else as_physical(out)


def closed_form_solution(u0: SpectralField, w_increments, z: float,
                         coeff: SpdeCoefficients) -> SpectralField:
    """Pathwise solution u(z) = exp((c + g^2/2) z + i g W(z)) * S(z) u0.

    ``w_increments`` are the Wiener increments covering [0, z]; only their
    sum W(z) enters.  Oracle for any composition of :func:`spde_step`.
    """
    w_total = float(np.sum(w_increments))
    m = np.exp((coeff.c_drift + 0.5 * coeff.g_noise**2) * z + 1j * coeff.g_noise * w_total)
    out = free_propagate(u0, z, coeff)
    return SpectralField(out.grid, out.data * m, out.space)


def coherent_field(u0: SpectralField, z: float, coeff: SpdeCoefficients) -> SpectralField:
    """Mean field E[u](z) = exp(c z) * S(z) u0.

    Taking expectations kills the pathwise Ito correction:
    E[exp(i g W(z))] = exp(-g^2 z / 2) cancels the +g^2/2 in the exponent,
    leaving the bare drift c, whose real part is the decay rate -Lambda.
    """
    if z < 0.0:
        raise ValueError(f"z must be nonnegative, got {z!r}")
    out = free_propagate(u0, z, coeff)
    return SpectralField(out.grid, out.data * np.exp(coeff.c_drift * z), out.space)
