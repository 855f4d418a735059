"""Stationary Ornstein-Uhlenbeck medium fluctuations and their driving noise.

The layered-medium fluctuation eta(z) is the stationary solution of

    d eta = -eta/(eps^2*l_c) dz + 1/(eps*sqrt(l_c)) dW,

a Gaussian process with autocovariance (1/2)*exp(-|dz|/(eps^2*l_c)), i.e.
stationary variance 1/2 and correlation length eps^2*l_c.  Paths are sampled
with the exact transition law (no step-size bias):

    eta_{n+1} = a*eta_n + s*xi_n,   a = exp(-dz/(eps^2*l_c)),
                                    s = sqrt((1 - a^2)/2),

with eta_0 ~ N(0, 1/2) and xi_n iid standard normal.

The same Wiener process W that drives eta also drives the limiting
white-noise model, so each path additionally carries the increments
dW_n = W((n+1)dz) - W(n dz), reconstructed from the SAME innovations via the
exact joint Gaussian law of (eta_{n+1}, dW_n) conditional on eta_n:

    Cov(dW_n, s*xi_n) = (1 - a)/sqrt(theta),   theta = 1/(eps^2*l_c),
    Var(dW_n)         = dz,

which leaves an independent residual normal per step.  This keeps the
pre-limit model and the limiting model drivable by one noise source, the key
ingredient of coupled convergence studies.

Randomness comes from counter-based Philox streams keyed by
(master_seed, path_index), so ensembles are reproducible independently of
how paths are distributed over workers.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter

from .scales import ModelParams

__all__ = [
    "OUPath",
    "path_stream",
    "sample_ou_path",
    "sample_ou_ensemble",
    "ou_autocovariance_theory",
    "sample_wiener_path",
    "write_oup1",
    "read_oup1",
]

_OUP1_MAGIC = b"OUP1"
_OUP1_VERSION = 1


def path_stream(master_seed: int, path_index: int = 0) -> np.random.Generator:
    """Counter-based RNG stream for one path of one ensemble.

    Distinct (master_seed, path_index) pairs give statistically independent
    streams; the mapping is pure, so any worker can regenerate any path.
    """
    key = np.array([master_seed, path_index], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


@dataclass
class OUPath:
    """One discrete OU path with its consistent driving Wiener increments.

    ``values[n]`` is eta at z = n*z_step (length n_steps+1) and
    ``w_increments[n]`` is W((n+1)*z_step) - W(n*z_step) (length n_steps).
    """

    z_step: float
    values: np.ndarray
    w_increments: np.ndarray
    seed: tuple | None = None

    @property
    def n_steps(self) -> int:
        return len(self.w_increments)

    @property
    def z_grid(self) -> np.ndarray:
        return np.arange(len(self.values)) * self.z_step

    def segment(self, start: int, n_steps: int) -> "OUPath":
        """View of steps [start, start+n_steps) as a path of its own."""
        if start < 0 or start + n_steps > self.n_steps:
            raise ValueError("segment outside path range")
        return OUPath(self.z_step, self.values[start:start + n_steps + 1],
                      self.w_increments[start:start + n_steps], self.seed)


def _transition(p: ModelParams, z_step: float):
    """(a, s, mean_coef, resid_std) of the exact one-step law."""
    theta = 1.0 / (p.eps**2 * p.l_c)
    a = np.exp(-theta * z_step)
    s = np.sqrt(0.5 * (1.0 - a * a))
    # Cov(dW, innovation) = (1-a)/sqrt(theta); regression of dW on xi
    mean_coef = (1.0 - a) / (np.sqrt(theta) * s)
    resid_var = max(z_step - mean_coef * mean_coef, 0.0)
    return a, s, mean_coef, np.sqrt(resid_var)


def sample_ou_ensemble(p: ModelParams, n_steps: int, z_step: float,
                       master_seed: int, path_indices) -> tuple:
    """Sample eta paths and Wiener increments for many paths at once.

    Returns ``(eta, dw)`` with shapes (P, n_steps+1) and (P, n_steps).
    Each row is drawn from its own (master_seed, path_index) stream and is
    bitwise identical to the corresponding single-path call.
    """
    if z_step <= 0.0:
        raise ValueError(f"z_step must be positive, got {z_step!r}")
    path_indices = list(path_indices)
    P = len(path_indices)
    a, s, mean_coef, resid_std = _transition(p, z_step)

    eta0 = np.empty(P)
    xi = np.empty((P, n_steps))
    zeta = np.empty((P, n_steps))
    for row, idx in enumerate(path_indices):
        gen = path_stream(master_seed, idx)
        eta0[row] = np.sqrt(0.5) * gen.standard_normal()
        draws = gen.standard_normal((n_steps, 2))
        xi[row] = draws[:, 0]
        zeta[row] = draws[:, 1]

    eta = np.empty((P, n_steps + 1))
    eta[:, 0] = eta0
    if n_steps:
        # eta_n = a*eta_{n-1} + s*xi_n as an order-1 recursive filter
        zi = (a * eta0)[:, None]
        eta[:, 1:] = lfilter([s], [1.0, -a], xi, axis=1, zi=zi)[0]
    dw = mean_coef * xi + resid_std * zeta
    return eta, dw


def sample_ou_path(p: ModelParams, n_steps: int, z_step: float, seed: int,
                   path_index: int = 0) -> OUPath:
    """Sample one stationary OU path together with its Wiener increments.

    Exact in law for any z_step; n_steps = 0 yields just the stationary
    initial draw and no increments.
    """
    eta, dw = sample_ou_ensemble(p, n_steps, z_step, seed, [path_index])
    return OUPath(z_step, eta[0], dw[0], seed=(seed, path_index))


def ou_autocovariance_theory(lag: float, p: ModelParams) -> float:
    """Theoretical autocovariance (1/2)*exp(-lag/(eps^2*l_c)) at lag >= 0."""
    if lag < 0.0:
        raise ValueError(f"lag must be nonnegative, got {lag!r}")
    return 0.5 * float(np.exp(-lag / (p.eps**2 * p.l_c)))


def sample_wiener_path(n_steps: int, z_step: float, seed: int,
                       path_index: int = 0) -> np.ndarray:
    """Standalone iid N(0, z_step) increments for driving the limiting model."""
    if z_step <= 0.0:
        raise ValueError(f"z_step must be positive, got {z_step!r}")
    gen = path_stream(seed, path_index)
    return gen.standard_normal(n_steps) * np.sqrt(z_step)


def write_oup1(path: OUPath, file) -> None:
    """Dump a path in the OUP1 binary format.

    Header: magic "OUP1", uint32 version, uint64 n_steps, float64 z_step
    (all little-endian), then n_steps+1 values and n_steps increments as
    little-endian float64.
    """
    close = False
    if isinstance(file, (str, bytes)) or hasattr(file, "__fspath__"):
        file = open(file, "wb")
        close = True
    try:
        file.write(_OUP1_MAGIC)
        file.write(struct.pack("<IQd", _OUP1_VERSION, path.n_steps, path.z_step))
        file.write(np.asarray(path.values, dtype="<f8").tobytes())
        file.write(np.asarray(path.w_increments, dtype="<f8").tobytes())
    finally:
        if close:
            file.close()


def read_oup1(file) -> OUPath:
    """Read a path written by :func:`write_oup1` (seed is not persisted)."""
    close = False
    if isinstance(file, (str, bytes)) or hasattr(file, "__fspath__"):
        file = open(file, "rb")
        close = True
    try:
        magic = file.read(4)
        if magic != _OUP1_MAGIC:
            raise ValueError(f"not an OUP1 file (magic {magic!r})")
        version, n_steps, z_step = struct.unpack("<IQd", file.read(20))
        if version != _OUP1_VERSION:
            raise ValueError(f"unsupported OUP1 version {version}")
        values = np.frombuffer(file.read(8 * (n_steps + 1)), dtype="<f8").copy()
        incs = np.frombuffer(file.read(8 * n_steps), dtype="<f8").copy()
        if len(values) != n_steps + 1 or len(incs) != n_steps:
            raise ValueError("truncated OUP1 file")
        return OUPath(z_step, values, incs, seed=None)
    finally:
        if close:
            file.close()
