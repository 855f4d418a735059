"""Dimensionless scaling of layered-medium beam propagation scenarios.

A physical scenario is described by a propagation distance ``L``, a
transverse reference scale ``L_x`` (typically the beam width), a microscale
``ell`` that characterizes the size of the wavelength and of the medium
correlation length, the free-space wavenumber ``k0``, the medium correlation
length ``ell_c``, and the fluctuation strength ``sigma``.  Everything
downstream consumes only the dimensionless bundle :class:`ModelParams`:

====== ==========================================
k      k0 * ell
l_c    ell_c / ell
eps    sqrt(ell / L)           (scale separation)
beta   sigma / eps             (noise strength)
delta  regularization damping, carried along
N_F    L_x**2 * k / (2*pi*L*ell)   (Fresnel number)
mu     1 / (k * l_c)           (wavelength / correlation-length ratio)
====== ==========================================

``mu`` classifies the propagation regime: ``mu << 1`` is the classical
high-frequency regime, ``mu ~ 1`` the regime where the wavelength is
comparable to the correlation length of the medium fluctuations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

__all__ = [
    "PhysicalScales",
    "ModelParams",
    "RegimeReport",
    "derive_params",
    "make_params",
    "regime_report",
]


@dataclass(frozen=True)
class PhysicalScales:
    """Physical scenario in one consistent length unit.

    Attributes
    ----------
    L : float
        Longitudinal propagation distance.
    L_x : float
        Transverse reference scale (usually the beam width).
    ell : float
        Microscale characterizing wavelength and correlation length.
    k0 : float
        Free-space wavenumber; the carrier wavelength is ``2*pi/k0``.
    ell_c : float
        Correlation length of the refractive-index fluctuations.
    sigma : float
        Dimensionless fluctuation strength (>= 0).
    """

    L: float
    L_x: float
    ell: float
    k0: float
    ell_c: float
    sigma: float

    def __post_init__(self):
        for name in ("L", "L_x", "ell", "k0", "ell_c"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be strictly positive, got {getattr(self, name)!r}")
        if self.sigma < 0.0:
            raise ValueError(f"sigma must be nonnegative, got {self.sigma!r}")

    @property
    def wavelength(self) -> float:
        """Carrier wavelength, derived as 2*pi/k0 (never stored)."""
        return 2.0 * math.pi / self.k0


@dataclass(frozen=True)
class ModelParams:
    """Dimensionless parameter bundle consumed by every solver.

    ``mu`` always equals ``1/(k*l_c)``; use :func:`derive_params` or
    :func:`make_params` instead of constructing directly.
    """

    k: float
    l_c: float
    eps: float
    beta: float
    delta: float
    N_F: float
    mu: float

    def __post_init__(self):
        if not (self.k > 0.0 and self.l_c > 0.0 and self.eps > 0.0 and self.N_F > 0.0):
            raise ValueError("k, l_c, eps and N_F must be strictly positive")
        if self.beta < 0.0:
            raise ValueError(f"beta must be nonnegative, got {self.beta!r}")
        if self.delta < 0.0:
            raise ValueError(f"delta must be nonnegative, got {self.delta!r}")
        if not math.isclose(self.mu * self.k * self.l_c, 1.0, rel_tol=1e-12):
            raise ValueError("mu must equal 1/(k*l_c)")

    def with_(self, **changes) -> "ModelParams":
        """Copy with selected fields replaced (mu kept consistent)."""
        fields = dict(
            k=self.k, l_c=self.l_c, eps=self.eps, beta=self.beta,
            delta=self.delta, N_F=self.N_F,
        )
        fields.update(changes)
        return make_params(**fields)


def make_params(k, l_c, eps, beta, delta, N_F=1.0) -> ModelParams:
    """Build ModelParams directly from dimensionless values."""
    if not (k > 0.0 and l_c > 0.0):
        raise ValueError("k and l_c must be strictly positive")
    return ModelParams(k=k, l_c=l_c, eps=eps, beta=beta, delta=delta,
                       N_F=N_F, mu=1.0 / (k * l_c))


def derive_params(s: PhysicalScales, delta: float) -> ModelParams:
    """Convert a physical scenario to dimensionless model parameters.

    eps = sqrt(ell/L), beta = sigma/eps, k = k0*ell, l_c = ell_c/ell,
    N_F = L_x**2*k/(2*pi*L*ell) and mu = 1/(k*l_c).
    """
    if delta < 0.0:
        raise ValueError(f"delta must be nonnegative, got {delta!r}")
    eps = math.sqrt(s.ell / s.L)
    k = s.k0 * s.ell
    l_c = s.ell_c / s.ell
    return ModelParams(
        k=k,
        l_c=l_c,
        eps=eps,
        beta=s.sigma / eps,
        delta=delta,
        N_F=s.L_x**2 * k / (2.0 * math.pi * s.L * s.ell),
        mu=1.0 / (k * l_c),
    )


@dataclass(frozen=True)
class RegimeReport:
    """Advisory classification of a parameter set. Never blocks a run."""

    eps: float
    N_F: float
    mu: float
    paraxial_ok: bool
    fresnel_ok: bool
    high_frequency: bool
    eps_threshold: float
    fresnel_range: tuple
    mu_threshold: float

    @property
    def regime(self) -> str:
        return "high-frequency" if self.high_frequency else "same-order"

    def summary(self) -> str:
        flags = [
            f"eps={self.eps:.4g} ({'paraxial-ok' if self.paraxial_ok else 'paraxial WARNING'})",
            f"N_F={self.N_F:.4g} ({'Fresnel-ok' if self.fresnel_ok else 'Fresnel WARNING'})",
            f"mu={self.mu:.4g} ({self.regime} regime)",
        ]
        return "; ".join(flags)


def regime_report(p: ModelParams, eps_threshold=0.1, fresnel_range=(0.1, 10.0),
                  mu_threshold=0.1) -> RegimeReport:
    """Check the scale-separation assumptions behind the model.

    Flags whether eps is small enough for the paraxial scaling, whether the
    Fresnel number is order one, and whether mu puts the scenario in the
    high-frequency (mu small) or same-order (mu ~ 1) regime.  Thresholds are
    configurable; the defaults mark eps <= 0.1 and N_F in [0.1, 10] as fine.
    """
    lo, hi = fresnel_range
    return RegimeReport(
        eps=p.eps,
        N_F=p.N_F,
        mu=p.mu,
        paraxial_ok=p.eps <= eps_threshold,
        fresnel_ok=lo <= p.N_F <= hi,
        high_frequency=p.mu <= mu_threshold,
        eps_threshold=eps_threshold,
        fresnel_range=(lo, hi),
        mu_threshold=mu_threshold,
    )
