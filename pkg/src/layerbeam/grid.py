"""Uniform 2-D transverse grid, Fourier convention, and initial beams.

The transform convention is fixed globally: the forward transform carries a
POSITIVE exponent,

    u_hat(kappa) = integral  u(x) * exp(+i kappa.x) dx,

discretized on a centered grid of n points per axis spanning [-extent,
extent) with mode spacing pi/extent.  The inverse carries the matching
1/(2*pi)^2 measure, so a forward/inverse round trip is the identity and the
discrete Parseval identity

    sum |u|^2 dx^2 = sum |u_hat|^2 dkappa^2 / (2*pi)^2

holds exactly.  Under this convention the transverse Laplacian maps to
-|kappa|^2, so free propagation applies the per-mode phase
exp(-i*|kappa|^2*dz/(4*pi*N_F)).

Boundary conditions are periodic (everything downstream is diagonal in
kappa).  Keep the extent at >= 6 beam widths to suppress wrap-around; the
beam constructors warn when that guidance is violated.
"""

from __future__ import annotations

import struct
import warnings
from dataclasses import dataclass, field

import numpy as np

from .scales import ModelParams

__all__ = [
    "PHYSICAL",
    "SPECTRAL",
    "TransverseGrid",
    "SpectralField",
    "make_grid",
    "to_spectral",
    "to_physical",
    "gaussian_beam",
    "plane_wave",
    "envelope_to_field",
    "l2_norm",
    "write_fld1",
    "read_fld1",
]

PHYSICAL = "physical"
SPECTRAL = "spectral"

_FLD1_MAGIC = b"FLD1"


@dataclass(frozen=True, eq=False)
class TransverseGrid:
    """Centered n x n grid over [-extent, extent)^2 with its mode layout.

    ``kappa2_int`` holds the integer index sums (i-n/2)^2 + (j-n/2)^2 so
    that |kappa|^2 = dkappa^2 * kappa2_int is exact and modes sharing the
    same |kappa|^2 compare equal bitwise.
    """

    n: int
    extent: float
    x_coords: np.ndarray = field(repr=False)
    kappa_coords: np.ndarray = field(repr=False)
    kappa2_int: np.ndarray = field(repr=False)

    @property
    def dx(self) -> float:
        return 2.0 * self.extent / self.n

    @property
    def dkappa(self) -> float:
        return np.pi / self.extent

    @property
    def kappa2(self) -> np.ndarray:
        """|kappa|^2 on the full mode grid."""
        return self.dkappa**2 * self.kappa2_int

    def __eq__(self, other):
        return (isinstance(other, TransverseGrid)
                and self.n == other.n and self.extent == other.extent)

    def __hash__(self):
        return hash((self.n, self.extent))


def make_grid(n: int, extent: float) -> TransverseGrid:
    """Build a grid with n points per axis (power of two, >= 8)."""
    if n < 8 or (n & (n - 1)) != 0:
        raise ValueError(f"n must be a power of two >= 8, got {n}")
    if extent <= 0.0:
        raise ValueError(f"extent must be positive, got {extent!r}")
    idx = np.arange(n) - n // 2
    x = idx * (2.0 * extent / n)
    kappa = idx * (np.pi / extent)
    k2_int = (idx[:, None] ** 2 + idx[None, :] ** 2).astype(np.int64)
    return TransverseGrid(n=n, extent=extent, x_coords=x,
                          kappa_coords=kappa, kappa2_int=k2_int)


@dataclass
class SpectralField:
    """Complex transverse field tagged with its current representation."""

    grid: TransverseGrid
    data: np.ndarray
    space: str = PHYSICAL

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=complex)
        if self.data.shape != (self.grid.n, self.grid.n):
            raise ValueError(f"data shape {self.data.shape} does not match grid n={self.grid.n}")
        if self.space not in (PHYSICAL, SPECTRAL):
            raise ValueError(f"space must be {PHYSICAL!r} or {SPECTRAL!r}, got {self.space!r}")

    def copy(self) -> "SpectralField":
        return SpectralField(self.grid, self.data.copy(), self.space)


def _require_space(f: SpectralField, space: str, op: str):
    if f.space != space:
        raise ValueError(f"{op} expects a {space}-space field, got {f.space}-space")


def to_spectral(f: SpectralField) -> SpectralField:
    """Forward transform (positive exponent, integral normalization)."""
    _require_space(f, PHYSICAL, "to_spectral")
    g = f.grid
    data = np.fft.fftshift(np.fft.ifft2(np.fft.ifftshift(f.data))) * (g.n**2 * g.dx**2)
    return SpectralField(g, data, SPECTRAL)


def to_physical(f: SpectralField) -> SpectralField:
    """Inverse transform; exact round trip with :func:`to_spectral`."""
    _require_space(f, SPECTRAL, "to_physical")
    g = f.grid
    data = np.fft.fftshift(np.fft.fft2(np.fft.ifftshift(f.data))) / (g.n**2 * g.dx**2)
    return SpectralField(g, data, PHYSICAL)


def as_spectral(f: SpectralField) -> SpectralField:
    return f if f.space == SPECTRAL else to_spectral(f)


def as_physical(f: SpectralField) -> SpectralField:
    return f if f.space == PHYSICAL else to_physical(f)


def gaussian_beam(g: TransverseGrid, width: float, amplitude: float = 1.0) -> SpectralField:
    """Gaussian input beam u(x) = amplitude * exp(-|x|^2/width^2)."""
    if width <= 0.0:
        raise ValueError(f"width must be positive, got {width!r}")
    if g.extent < 6.0 * width:
        warnings.warn(
            f"grid extent {g.extent} < 6 beam widths ({6 * width}); "
            "periodic wrap-around may contaminate the field", stacklevel=2)
    r2 = g.x_coords[:, None] ** 2 + g.x_coords[None, :] ** 2
    return SpectralField(g, amplitude * np.exp(-r2 / width**2), PHYSICAL)


def plane_wave(g: TransverseGrid, amplitude: float = 1.0) -> SpectralField:
    """Constant (plane-wave) input field; spectrum concentrated at kappa=0."""
    return SpectralField(g, np.full((g.n, g.n), amplitude, dtype=complex), PHYSICAL)


def envelope_to_field(u: SpectralField, z: float, p: ModelParams) -> SpectralField:
    """Restore the carrier plane wave: multiply the envelope by exp(i*k*z/eps^2).

    In dimensionless variables the physical field at depth z is the envelope
    times the unimodular carrier phase exp(i*k0*r3) = exp(i*k*z/eps^2).
    """
    _require_space(u, PHYSICAL, "envelope_to_field")
    phase = np.exp(1j * p.k * z / p.eps**2)
    return SpectralField(u.grid, u.data * phase, PHYSICAL)


def l2_norm(f: SpectralField) -> float:
    """Continuum L2 norm; identical in both spaces by Parseval."""
    g = f.grid
    total = float(np.sum(np.abs(f.data) ** 2))
    if f.space == PHYSICAL:
        return np.sqrt(total) * g.dx
    return np.sqrt(total) * g.dkappa / (2.0 * np.pi)


def write_fld1(f: SpectralField, file, z: float = 0.0) -> None:
    """Dump a field snapshot in the FLD1 binary format.

    Header: magic "FLD1", uint32 n, float64 extent, uint8 space tag
    (0 physical, 1 spectral), float64 z; then the n x n complex amplitudes
    row-major as little-endian (re, im) float64 pairs.
    """
    close = False
    if isinstance(file, (str, bytes)) or hasattr(file, "__fspath__"):
        file = open(file, "wb")
        close = True
    try:
        file.write(_FLD1_MAGIC)
        tag = 0 if f.space == PHYSICAL else 1
        file.write(struct.pack("<IdBd", f.grid.n, f.grid.extent, tag, z))
        file.write(np.ascontiguousarray(f.data, dtype="<c16").tobytes())
    finally:
        if close:
            file.close()


def read_fld1(file) -> tuple:
    """Read a snapshot written by :func:`write_fld1`; returns (field, z)."""
    close = False
    if isinstance(file, (str, bytes)) or hasattr(file, "__fspath__"):
        file = open(file, "rb")
        close = True
    try:
        magic = file.read(4)
        if magic != _FLD1_MAGIC:
            raise ValueError(f"not an FLD1 file (magic {magic!r})")
        n, extent, tag, z = struct.unpack("<IdBd", file.read(21))
        data = np.frombuffer(file.read(16 * n * n), dtype="<c16")
        if data.size != n * n:
            raise ValueError("truncated FLD1 file")
        f = SpectralField(make_grid(n, extent), data.reshape(n, n).copy(),
                          PHYSICAL if tag == 0 else SPECTRAL)
        return f, z
    finally:
        if close:
            file.close()
