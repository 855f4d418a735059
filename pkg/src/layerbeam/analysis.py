"""Ensemble statistics, coherent-field decay, and full-vs-limit studies.

Ensembles are reproducible by construction: every path draws from a
counter-based stream keyed (master_seed, path_index), paths are processed
in fixed-size batches whose boundaries do not depend on the worker count,
and batch partials are merged in path-index order by a single reducer.  Any
ensemble artifact is therefore bitwise identical across runs and across
worker counts.

The coherent (mean) field of the limiting model decays at the rate

    Lambda = k^2 beta^2 l_c / (8 (1 + 1/(4 k^2 l_c^2))),

the real part of the limiting drift; :func:`fit_decay` recovers it from
ensemble snapshots after compensating free propagation (diffraction also
reduces on-axis amplitude and would otherwise bias the fit).

The convergence study drives the pre-limit model and the limiting model
from ONE noise source per path (the OU innovations and the reconstructed
Wiener increments), so it can report, per eps, both the plain ensemble-mean
error against the coherent field and the coupled (control-variate) version:
the pathwise limiting multiplier has known mean e^{cz}, so subtracting it
per path leaves an unbiased estimator of E[u] whose Monte-Carlo noise
shrinks with eps along with the coupling error itself.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import fullmodel
from .grid import PHYSICAL, SPECTRAL, SpectralField, as_spectral, l2_norm, to_physical
from .noise import path_stream, sample_ou_ensemble
from .scales import ModelParams
from .spde import SpdeCoefficients, coherent_field, free_propagate, spde_coefficients, spde_step

__all__ = [
    "FitError",
    "EnsembleStats",
    "DecayReport",
    "MuExpansionReport",
    "ConvergenceRow",
    "ConvergenceTable",
    "decay_constant_theory",
    "fit_decay",
    "mu_expansion_check",
    "ensemble_spde",
    "ensemble_full",
    "convergence_study",
]

DEFAULT_BATCH = 64


class FitError(RuntimeError):
    """Raised when a decay fit has too little or too noisy data."""


@dataclass
class EnsembleStats:
    """Running mean / second-moment accumulator over Monte-Carlo paths.

    Carries (first_index, count) so that merges can be restricted to
    index-contiguous, in-order partials; all reducers in this package fold
    partials in path-index order, which pins the floating-point summation
    order and hence makes ensemble outputs bitwise reproducible.
    """

    grid: object
    space: str
    sum_field: np.ndarray = field(repr=False)
    sum_sq: np.ndarray = field(repr=False)
    count: int = 0
    first_index: int = 0

    @classmethod
    def zeros(cls, grid, space: str, first_index: int = 0) -> "EnsembleStats":
        n = grid.n
        return cls(grid=grid, space=space,
                   sum_field=np.zeros((n, n), dtype=complex),
                   sum_sq=np.zeros((n, n)), count=0, first_index=first_index)

    def add(self, f: SpectralField) -> None:
        """Accumulate the next path's field (in path-index order)."""
        if f.space != self.space or f.grid != self.grid:
            raise ValueError("field does not match accumulator grid/space")
        self.sum_field += f.data
        self.sum_sq += np.abs(f.data) ** 2
        self.count += 1

    def merge(self, other: "EnsembleStats") -> "EnsembleStats":
        """Concatenate with the accumulator covering the next index range."""
        if other.first_index != self.first_index + self.count:
            raise ValueError(
                f"merge out of order: have paths [{self.first_index}, "
                f"{self.first_index + self.count}), got [{other.first_index}, ...)")
        if other.space != self.space or other.grid != self.grid:
            raise ValueError("accumulators live on different grids/spaces")
        return EnsembleStats(grid=self.grid, space=self.space,
                             sum_field=self.sum_field + other.sum_field,
                             sum_sq=self.sum_sq + other.sum_sq,
                             count=self.count + other.count,
                             first_index=self.first_index)

    @property
    def mean_field(self) -> SpectralField:
        return SpectralField(self.grid, self.sum_field / self.count, self.space)

    @property
    def second_moment(self) -> np.ndarray:
        """E[|u|^2] estimate, elementwise."""
        return self.sum_sq / self.count

    def se_mean(self) -> np.ndarray:
        """Standard error of the complex mean, elementwise."""
        var = np.maximum(self.second_moment - np.abs(self.mean_field.data) ** 2, 0.0)
        return np.sqrt(var / self.count)


def _batches(n_paths: int, batch_size: int):
    return [(s, min(s + batch_size, n_paths)) for s in range(0, n_paths, batch_size)]


def _run_batched(worker, n_paths, batch_size, workers):
    """Run worker(start, stop) over fixed batches; return results in order."""
    spans = _batches(n_paths, batch_size)
    if workers <= 1:
        return [worker(*span) for span in spans]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(worker, *span) for span in spans]
        return [f.result() for f in futures]


def _merge_all(partials_per_snapshot):
    """Fold per-batch partials (outer list: batches) in batch order."""
    merged = None
    for parts in partials_per_snapshot:
        if merged is None:
            merged = parts
        else:
            merged = [m.merge(p) for m, p in zip(merged, parts)]
    return merged


# ---------------------------------------------------------------------------
# decay constant and decay fit


def decay_constant_theory(p: ModelParams) -> float:
    """Coherent-field decay rate Lambda (delta = 0 form)."""
    return p.k**2 * p.beta**2 * p.l_c / (8.0 * (1.0 + 1.0 / (4.0 * p.k**2 * p.l_c**2)))


@dataclass
class DecayReport:
    """Result of a least-squares coherent-decay fit."""

    lambda_fit: float
    lambda_theory: float
    stderr: float
    z_window: tuple
    n_snapshots: int
    probe: tuple

    @property
    def rel_error(self) -> float:
        if self.lambda_theory == 0.0:
            return abs(self.lambda_fit)
        return abs(self.lambda_fit - self.lambda_theory) / abs(self.lambda_theory)


def fit_decay(snapshots, probe, free_fields, lambda_theory: float,
              min_snapshots: int = 5, noise_floor_sigmas: float = 3.0) -> DecayReport:
    """Fit the exponential decay rate of |E[u]| at one probe point.

    Parameters
    ----------
    snapshots : sequence of (z, EnsembleStats) in increasing z, physical space.
    probe : (i, j) grid index of the probe point x0.
    free_fields : matching free propagations S(z)u0 (physical space), used to
        compensate diffraction before taking logs.
    lambda_theory : reference rate recorded in the report.

    The least-squares slope of log|E[u(z, x0)]| - log|S(z)u0(x0)| versus z
    gives -lambda_fit.  A snapshot whose mean lies below
    ``noise_floor_sigmas`` standard errors is rejected (the fit would chase
    noise); the error names the first offending snapshot.
    """
    if len(snapshots) < min_snapshots:
        raise FitError(f"need at least {min_snapshots} snapshots, got {len(snapshots)}")
    if len(free_fields) != len(snapshots):
        raise FitError("free_fields must match snapshots one-to-one")
    zs = []
    ys = []
    for (z, stats), free in zip(snapshots, free_fields):
        if stats.space != PHYSICAL or free.space != PHYSICAL:
            raise FitError("fit_decay expects physical-space snapshots")
        m = stats.mean_field.data[probe]
        se = stats.se_mean()[probe]
        if not np.abs(m) > noise_floor_sigmas * se:
            raise FitError(
                f"snapshot z={z:g} is below the noise floor: |E[u]|={np.abs(m):.3e} "
                f"<= {noise_floor_sigmas:g}*SE={noise_floor_sigmas * se:.3e}")
        f = free.data[probe]
        if f == 0:
            raise FitError(f"free propagation vanishes at probe for z={z:g}")
        zs.append(z)
        ys.append(np.log(np.abs(m / f)))
    zs = np.asarray(zs)
    ys = np.asarray(ys)
    A = np.column_stack([zs, np.ones_like(zs)])
    (slope, _intercept), res, *_ = np.linalg.lstsq(A, ys, rcond=None)
    n = len(zs)
    rss = float(res[0]) if res.size else float(np.sum((ys - A @ [slope, _intercept]) ** 2))
    denom = float(np.sum((zs - zs.mean()) ** 2))
    stderr = np.sqrt(rss / max(n - 2, 1) / denom)
    return DecayReport(lambda_fit=-slope, lambda_theory=lambda_theory,
                       stderr=stderr, z_window=(float(zs[0]), float(zs[-1])),
                       n_snapshots=n, probe=tuple(probe))


# ---------------------------------------------------------------------------
# high-frequency expansion of the limiting drift


@dataclass
class MuExpansionReport:
    """Two-term expansion of the limiting drift in mu = 1/(k*l_c)."""

    mu: float
    full_coefficient: complex
    two_term: complex
    remainder: complex
    remainder_half: complex        # remainder at mu/2
    ratio: float                   # |R(mu)| / |R(mu/2)|; ~4 for small mu
    second_term_fraction: float    # |T2|/|T1| = mu/2

    @property
    def ratio_in_band(self) -> bool:
        return 3.5 <= self.ratio <= 4.5


def _drift_of_mu(prefactor: float, mu: float) -> complex:
    return -prefactor / (1.0 - 0.5j * mu)


def mu_expansion_check(p: ModelParams, mu: float | None = None) -> MuExpansionReport:
    """Compare the full delta=0 drift against its two-term mu-expansion.

    Full: -(k^2 b^2 l_c/8) / (1 - i mu/2);  two terms: -(k^2 b^2 l_c/8)
    - i mu (k^2 b^2 l_c/16).  The remainder is O(mu^2), verified by the
    ratio |R(mu)|/|R(mu/2)| ~ 4; at mu = 1 the second term is half the
    first in magnitude (the expansion is order-one when the wavelength is
    comparable to the correlation length).
    """
    if mu is None:
        mu = p.mu
    pre = p.k**2 * p.beta**2 * p.l_c / 8.0
    full = _drift_of_mu(pre, mu)
    t1 = -pre
    t2 = -0.5j * mu * pre
    two_term = t1 + t2
    remainder = full - two_term
    remainder_half = _drift_of_mu(pre, 0.5 * mu) - (t1 - 0.25j * mu * pre)
    if mu == 0.0:
        ratio = 4.0   # limit value of the geometric-series ratio
    else:
        ratio = abs(remainder) / abs(remainder_half)
    frac = abs(t2) / abs(t1) if pre else 0.0
    return MuExpansionReport(mu=mu, full_coefficient=full, two_term=two_term,
                             remainder=remainder, remainder_half=remainder_half,
                             ratio=ratio, second_term_fraction=frac)


# ---------------------------------------------------------------------------
# ensemble drivers


def ensemble_spde(u0: SpectralField, coeff: SpdeCoefficients, snapshot_zs,
                  n_paths: int, master_seed: int, workers: int = 1,
                  batch_size: int = DEFAULT_BATCH):
    """Monte-Carlo ensemble of the limiting model at the snapshot z values.

    Each path jumps snapshot-to-snapshot with the exact split step (the
    scheme is exact for any dz), drawing one Wiener increment per interval
    from its own stream.  Returns one accumulator per snapshot, in the
    representation of ``u0``.
    """
    zs = [float(z) for z in snapshot_zs]
    if any(b <= a for a, b in zip(zs, zs[1:])) or (zs and zs[0] <= 0.0):
        raise ValueError("snapshot_zs must be strictly increasing and positive")
    dzs = np.diff(np.concatenate([[0.0], zs]))
    u0_spec = as_spectral(u0)
    want_physical = u0.space == PHYSICAL

    def worker(start, stop):
        partials = [EnsembleStats.zeros(u0.grid, u0.space, first_index=start)
                    for _ in zs]
        for idx in range(start, stop):
            gen = path_stream(master_seed, idx)
            dws = gen.standard_normal(len(zs)) * np.sqrt(dzs)
            f = u0_spec
            for s, (dw, dz) in enumerate(zip(dws, dzs)):
                f = spde_step(f, dw, dz, coeff)
                partials[s].add(to_physical(f) if want_physical else f)
        return partials

    return _merge_all(_run_batched(worker, n_paths, batch_size, workers))


def _full_batch_fields(u0_spec, v0_data, p, dz, snap_steps, master_seed, indices,
                       want_coupled=False, coeff=None, z_end=None):
    """One batch of pre-limit paths: per-path spectral fields at snapshots.

    Returns (fields, m_lim) where fields[s] is a (P, n, n) array and m_lim
    the per-path limiting multiplier at z_end (None unless requested).
    """
    n_steps = snap_steps[-1]
    eta, dw = sample_ou_ensemble(p, 2 * n_steps, 0.5 * dz, master_seed, indices)
    eta_mid = eta[:, 1::2]
    grid = u0_spec.grid
    bins, inverse = fullmodel._kappa2_bins(grid)
    props = fullmodel.evolve_mode_propagators(p, bins, eta_mid, dz, snap_steps)
    u0d = u0_spec.data
    fields = []
    for (p11, p12, p21, p22) in props:
        batch = p11[:, inverse] * u0d
        if v0_data is not None:
            batch = batch + p12[:, inverse] * v0_data
        fields.append(batch)
    m_lim = None
    if want_coupled:
        w_end = dw.sum(axis=1)
        m_lim = np.exp((coeff.c_drift + 0.5 * coeff.g_noise**2) * z_end
                       + 1j * coeff.g_noise * w_end)
    return fields, m_lim


def ensemble_full(u0: SpectralField, p: ModelParams, z_end: float, snapshot_zs,
                  n_paths: int, master_seed: int, dz: float | None = None,
                  c_stab: float = fullmodel.DEFAULT_C_STAB, workers: int = 1,
                  batch_size: int = DEFAULT_BATCH, v_hat0=None):
    """Monte-Carlo ensemble of the pre-limit model; one accumulator per snapshot."""
    if dz is None:
        dz = fullmodel.stability_limit(p, c_stab)
    fullmodel._check_step(p, dz, c_stab)
    n_steps = max(1, int(np.ceil(z_end / dz - 1e-9)))
    dz = z_end / n_steps
    snap_steps = sorted({min(max(int(round(z / dz)), 1), n_steps) for z in snapshot_zs})
    u0_spec = as_spectral(u0)
    v0_data = as_spectral(v_hat0).data if v_hat0 is not None else None
    want_physical = u0.space == PHYSICAL

    def worker(start, stop):
        fields, _ = _full_batch_fields(u0_spec, v0_data, p, dz, snap_steps,
                                       master_seed, range(start, stop))
        partials = []
        for s in range(len(snap_steps)):
            acc = EnsembleStats.zeros(u0.grid, u0.space, first_index=start)
            for row in range(stop - start):
                f = SpectralField(u0.grid, fields[s][row], SPECTRAL)
                acc.add(to_physical(f) if want_physical else f)
            partials.append(acc)
        return partials

    stats = _merge_all(_run_batched(worker, n_paths, batch_size, workers))
    actual_zs = [s * dz for s in snap_steps]
    return actual_zs, stats


# ---------------------------------------------------------------------------
# convergence of the pre-limit model to the limiting model


@dataclass
class ConvergenceRow:
    """Errors of one eps column against the delta>0 limiting model."""

    eps: float
    dz: float
    n_steps: int
    err_mean: float            # plain ensemble mean vs coherent field (rel L2)
    err_mean_coupled: float    # control-variate estimator of E[u] vs coherent field
    err_probe: float           # plain mean at the beam-center probe (rel)
    err_second_moment: float   # E|u|^2 vs limiting second moment (rel L2)
    err_pathwise: float        # mean per-path rel L2 distance to the coupled limit
    err_beta0: float           # beta=0 control column (rel L2)


@dataclass
class ConvergenceTable:
    rows: list
    z_end: float
    n_paths: int
    master_seed: int
    shared_noise: bool
    delta: float

    @property
    def coupled_monotone(self) -> bool:
        e = [r.err_mean_coupled for r in self.rows]
        return all(a > b for a, b in zip(e, e[1:]))

    @property
    def pathwise_monotone(self) -> bool:
        e = [r.err_pathwise for r in self.rows]
        return all(a > b for a, b in zip(e, e[1:]))


def convergence_study(u0: SpectralField, p_template: ModelParams, eps_list,
                      z_end: float, n_paths: int, master_seed: int,
                      workers: int = 1, batch_size: int = DEFAULT_BATCH,
                      c_stab: float = fullmodel.DEFAULT_C_STAB,
                      shared_noise: bool = True,
                      dz: float | None = None) -> ConvergenceTable:
    """Compare pre-limit ensembles against the delta>0 limiting model.

    All eps columns share one step size (set by the smallest eps) and, when
    ``shared_noise`` is true, per-path seeds, so the Gaussian innovation
    streams align across eps and the Monte-Carlo fluctuations of the columns
    are strongly correlated rather than independent.  The beta = 0 control
    column needs no ensemble (the model is deterministic without noise) and
    is computed from a single path.
    """
    eps_list = [float(e) for e in eps_list]
    if any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise ValueError("eps_list must be strictly decreasing")
    if p_template.delta <= 0.0:
        raise ValueError("convergence_study compares at fixed delta > 0")

    p_min = p_template.with_(eps=min(eps_list))
    if dz is None:
        dz = fullmodel.stability_limit(p_min, c_stab)
    n_steps = max(1, int(np.ceil(z_end / dz - 1e-9)))
    dz = z_end / n_steps

    u0_spec = as_spectral(u0)
    grid = u0_spec.grid
    probe = (grid.n // 2, grid.n // 2)

    rows = []
    for i_eps, eps in enumerate(eps_list):
        p = p_template.with_(eps=eps)
        coeff = spde_coefficients(p)
        U = coherent_field(u0_spec, z_end, coeff)          # spectral
        normU = l2_norm(U)
        U_phys = to_physical(U)
        S_u0 = free_propagate(u0_spec, z_end, coeff).data
        secmom_limit = (np.exp(2.0 * (coeff.c_drift.real + 0.5 * coeff.g_noise**2) * z_end)
                        * np.abs(S_u0) ** 2)
        seed_base = 0 if shared_noise else (i_eps + 1) * n_paths

        def worker(start, stop, p=p, coeff=coeff, S_u0=S_u0, seed_base=seed_base):
            fields, m_lim = _full_batch_fields(
                u0_spec, None, p, dz, [n_steps], master_seed,
                [seed_base + i for i in range(start, stop)],
                want_coupled=True, coeff=coeff, z_end=z_end)
            full = EnsembleStats.zeros(grid, SPECTRAL, first_index=start)
            diff = EnsembleStats.zeros(grid, SPECTRAL, first_index=start)
            path_l2 = 0.0
            for row in range(stop - start):
                f = fields[0][row]
                d = f - m_lim[row] * S_u0
                full.add(SpectralField(grid, f, SPECTRAL))
                diff.add(SpectralField(grid, d, SPECTRAL))
                path_l2 += l2_norm(SpectralField(grid, d, SPECTRAL))
            return full, diff, path_l2

        parts = _run_batched(worker, n_paths, batch_size, workers)
        full = diff = None
        path_l2 = 0.0
        for bf, bd, bl in parts:
            full = bf if full is None else full.merge(bf)
            diff = bd if diff is None else diff.merge(bd)
            path_l2 += bl

        mean_full = full.mean_field
        err_mean = l2_norm(SpectralField(grid, mean_full.data - U.data, SPECTRAL)) / normU
        err_coupled = l2_norm(diff.mean_field) / normU
        mean_phys = to_physical(mean_full)
        err_probe = abs(mean_phys.data[probe] - U_phys.data[probe]) / abs(U_phys.data[probe])
        err_secmom = (np.sqrt(np.sum((full.second_moment - secmom_limit) ** 2))
                      / np.sqrt(np.sum(secmom_limit ** 2)))
        err_pathwise = path_l2 / n_paths / normU

        # beta = 0 control: deterministic, a single path represents the ensemble
        p0 = p.with_(beta=0.0)
        coeff0 = spde_coefficients(p0)
        U0 = coherent_field(u0_spec, z_end, coeff0)
        fields0, _ = _full_batch_fields(u0_spec, None, p0, dz, [n_steps],
                                        master_seed, [seed_base])
        err_beta0 = (l2_norm(SpectralField(grid, fields0[0][0] - U0.data, SPECTRAL))
                     / l2_norm(U0))

        rows.append(ConvergenceRow(eps=eps, dz=dz, n_steps=n_steps,
                                   err_mean=err_mean, err_mean_coupled=err_coupled,
                                   err_probe=err_probe, err_second_moment=err_secmom,
                                   err_pathwise=err_pathwise, err_beta0=err_beta0))
    return ConvergenceTable(rows=rows, z_end=z_end, n_paths=n_paths,
                            master_seed=master_seed, shared_noise=shared_noise,
                            delta=p_template.delta)
