"""Command-line entry point: configuration, experiments, persistence, plots.

Configuration is a line-oriented ``key = value`` file with three sections
(all keys optional; defaults are listed in the README):

    [scales]  L, L_x, ell, k0, ell_c, sigma, delta
    [grid]    n, extent, beam (gaussian|plane), width, amplitude
    [run]     z_end, snapshots, dz, n_paths, master_seed, workers

Every subcommand writes a JSON manifest with the full parameter set, seeds,
tolerances and a machine-readable check list; the exit code is 0 iff every
embedded check passed (2 for usage/configuration errors).
"""

from __future__ import annotations

import argparse
import configparser
import csv
import io
import json
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__, analysis, homog, svgchart
from .fullmodel import stability_limit
from .grid import as_spectral, gaussian_beam, make_grid, plane_wave, to_physical, write_fld1
from .noise import ou_autocovariance_theory, sample_ou_path, sample_wiener_path
from .scales import PhysicalScales, derive_params
from .spde import closed_form_solution, coherent_field, free_propagate, spde_coefficients, spde_step

_DEFAULTS = {
    "scales": {
        "L": "400", "L_x": "50.26548245743669", "ell": "1", "k0": "1",
        "ell_c": "1", "sigma": "0.025", "delta": "0.1",
    },
    "grid": {
        "n": "64", "extent": "8", "beam": "gaussian", "width": "1",
        "amplitude": "1",
    },
    "run": {
        "z_end": "1.0", "snapshots": "4", "dz": "", "n_paths": "100",
        "master_seed": "", "workers": "1",
    },
}


@dataclass
class RunConfig:
    """Typed view of the config file; round-trips through to_ini/from_ini."""

    L: float = 400.0
    L_x: float = 50.26548245743669
    ell: float = 1.0
    k0: float = 1.0
    ell_c: float = 1.0
    sigma: float = 0.025
    delta: float = 0.1
    n: int = 64
    extent: float = 8.0
    beam: str = "gaussian"
    width: float = 1.0
    amplitude: float = 1.0
    z_end: float = 1.0
    snapshots: str = "4"
    dz: float | None = None
    n_paths: int = 100
    master_seed: int | None = None
    workers: int = 1

    @classmethod
    def from_ini(cls, text: str) -> "RunConfig":
        cp = configparser.ConfigParser()
        cp.read_dict(_DEFAULTS)
        cp.read_string(text)
        sc, gr, rn = cp["scales"], cp["grid"], cp["run"]
        return cls(
            L=sc.getfloat("L"), L_x=sc.getfloat("L_x"), ell=sc.getfloat("ell"),
            k0=sc.getfloat("k0"), ell_c=sc.getfloat("ell_c"),
            sigma=sc.getfloat("sigma"), delta=sc.getfloat("delta"),
            n=gr.getint("n"), extent=gr.getfloat("extent"), beam=gr.get("beam"),
            width=gr.getfloat("width"), amplitude=gr.getfloat("amplitude"),
            z_end=rn.getfloat("z_end"), snapshots=rn.get("snapshots"),
            dz=rn.getfloat("dz") if rn.get("dz") else None,
            n_paths=rn.getint("n_paths"),
            master_seed=rn.getint("master_seed") if rn.get("master_seed") else None,
            workers=rn.getint("workers"),
        )

    def to_ini(self) -> str:
        cp = configparser.ConfigParser()
        cp["scales"] = {k: repr(getattr(self, k)) for k in
                        ("L", "L_x", "ell", "k0", "ell_c", "sigma", "delta")}
        cp["grid"] = {"n": str(self.n), "extent": repr(self.extent),
                      "beam": self.beam, "width": repr(self.width),
                      "amplitude": repr(self.amplitude)}
        cp["run"] = {"z_end": repr(self.z_end), "snapshots": self.snapshots,
                     "dz": "" if self.dz is None else repr(self.dz),
                     "n_paths": str(self.n_paths),
                     "master_seed": "" if self.master_seed is None else str(self.master_seed),
                     "workers": str(self.workers)}
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()

    def params(self, delta=None):
        s = PhysicalScales(L=self.L, L_x=self.L_x, ell=self.ell, k0=self.k0,
                           ell_c=self.ell_c, sigma=self.sigma)
        return derive_params(s, self.delta if delta is None else delta)

    def make_beam(self):
        g = make_grid(self.n, self.extent)
        if self.beam == "plane":
            return plane_wave(g, self.amplitude)
        if self.beam == "gaussian":
            return gaussian_beam(g, self.width, self.amplitude)
        raise ValueError(f"unknown beam kind {self.beam!r} (use gaussian|plane)")

    def snapshot_zs(self) -> list:
        raw = self.snapshots.strip()
        if "," in raw or "." in raw:
            zs = [float(tok) for tok in raw.split(",") if tok.strip()]
        else:
            count = int(raw)
            zs = [self.z_end * (i + 1) / count for i in range(count)]
        if not zs or any(b <= a for a, b in zip(zs, zs[1:])):
            raise ValueError(f"snapshots must be strictly increasing, got {raw!r}")
        return zs


def _load_config(path) -> RunConfig:
    if path is None:
        return RunConfig()
    return RunConfig.from_ini(Path(path).read_text())


def _require_seed(cfg: RunConfig, args) -> int:
    seed = args.seed if args.seed is not None else cfg.master_seed
    if seed is None:
        raise ValueError("ensemble runs need a master seed: set run.master_seed "
                         "in the config or pass --seed")
    return seed


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


class _Checks:
    def __init__(self):
        self.items = []

    def add(self, name, passed, detail=""):
        self.items.append({"name": name, "passed": bool(passed), "detail": str(detail)})
        return passed

    @property
    def all_passed(self):
        return all(c["passed"] for c in self.items)

    @property
    def failures(self):
        return [c for c in self.items if not c["passed"]]


def _finish(outdir: Path, command, cfg: RunConfig, p, checks: _Checks,
            extra=None, seed=None, workers=1) -> int:
    manifest = {
        "command": command,
        "version": __version__,
        "params": {k: getattr(p, k) for k in
                   ("k", "l_c", "eps", "beta", "delta", "N_F", "mu")} if p else None,
        "config": cfg.to_ini() if cfg else None,
        "master_seed": seed,
        "workers": workers,
        "checks": checks.items,
        "passed": checks.all_passed,
    }
    if extra:
        manifest.update(extra)
    (outdir / "manifest.json").write_text(json.dumps(manifest, indent=2, default=repr))
    for c in checks.items:
        status = "PASS" if c["passed"] else "FAIL"
        print(f"[{status}] {c['name']}: {c['detail']}")
    if not checks.all_passed:
        print(f"{len(checks.failures)} check(s) failed; see manifest.json", file=sys.stderr)
        return 1
    return 0


# ---------------------------------------------------------------------------
# subcommands


def cmd_validate_noise(args) -> int:
    cfg = _load_config(args.config)
    p = cfg.params(delta=args.delta)
    seed = _require_seed(cfg, args)
    outdir = Path(args.out); outdir.mkdir(parents=True, exist_ok=True)

    corr = p.eps**2 * p.l_c
    z_step = corr / 10.0
    n_steps = args.ou_steps
    path = sample_ou_path(p, n_steps, z_step, seed)
    eta = path.values
    max_lag = 50   # five correlation lengths at ten samples per length

    # Bartlett standard errors from the theoretical autocovariance
    jmax = 200
    cth = np.array([ou_autocovariance_theory(abs(j) * z_step, p)
                    for j in range(-jmax - max_lag, jmax + max_lag + 1)])
    c0 = lambda j: cth[j + jmax + max_lag]

    rows = []
    worst = 0.0
    ok = True
    for m in range(max_lag + 1):
        n_eff = len(eta) - m
        sample = float(eta[:n_eff] @ eta[m:m + n_eff]) / n_eff
        theory = ou_autocovariance_theory(m * z_step, p)
        var = sum(c0(j) ** 2 + c0(j + m) * c0(j - m) for j in range(-jmax, jmax + 1)) / n_eff
        band = 3.0 * np.sqrt(var)
        dev = abs(sample - theory)
        worst = max(worst, dev / band if band else 0.0)
        ok &= dev <= band
        rows.append([m * z_step, sample, theory, band])
    _write_csv(outdir / "autocovariance.csv",
               ["lag", "sample", "theory", "band_3se"], rows)
    svgchart.line_chart(outdir / "autocovariance.svg",
                        [("sample", [r[0] for r in rows], [r[1] for r in rows]),
                         ("theory", [r[0] for r in rows], [r[2] for r in rows])],
                        title="OU autocovariance", xlabel="lag", ylabel="cov")

    checks = _Checks()
    checks.add("ou-autocov-3se", ok,
               f"worst |dev|/band = {worst:.3f} over lags 0..{max_lag}")
    checks.add("ou-lag0-value", abs(rows[0][1] - 0.5) <= rows[0][3],
               f"c(0) sample = {rows[0][1]:.6f} vs 1/2")
    return _finish(outdir, "validate-noise", cfg, p, checks,
                   extra={"n_steps": n_steps, "z_step": z_step,
                          "correlation_length": corr},
                   seed=seed, workers=args.workers)


def cmd_verify_covariance(args) -> int:
    cfg = _load_config(args.config)
    try:
        p = cfg.params(delta=args.delta)
        if p.delta <= 0.0:
            homog._require_delta(p.delta)   # raise the standard refusal
    except ValueError as exc:
        print(f"refused: {exc}", file=sys.stderr)
        return 2
    outdir = Path(args.out); outdir.mkdir(parents=True, exist_ok=True)

    report = homog.verify_appendix_a(n_tuples=args.tuples,
                                     seed=args.seed if args.seed is not None else 20260809)
    demo = homog.limit_noncommutativity_demo(p)

    (outdir / "covariance_report.json").write_text(json.dumps({
        "n_tuples": len(report.checks),
        "max_rel_err": report.max_rel_err,
        "worst_entry": report.worst_entry,
        "eig_max_abs_err": report.eig_max_abs_err,
        "lyapunov_max_residual": report.lyapunov_max_residual,
        "tolerance": report.tolerance,
        "eig_tolerance": report.eig_tolerance,
        "passed": report.passed,
        "noncommuting": {
            "deltas": demo.deltas,
            "delta_vRvR": demo.delta_vRvR,
            "c_values": [repr(c) for c in demo.c_values],
            "c_limit": repr(demo.c_limit),
            "fitted_K": demo.fitted_K,
        },
    }, indent=2))
    _write_csv(outdir / "noncommuting.csv",
               ["delta", "delta_vRvR", "re_c", "im_c", "c_gap"],
               [[d, s, c.real, c.imag, g] for d, s, c, g in
                zip(demo.deltas, demo.delta_vRvR, demo.c_values, demo.c_gaps)])

    checks = _Checks()
    checks.add("appendix-a-closed-forms", report.passed,
               f"max rel err {report.max_rel_err:.3e} (tol {report.tolerance}), "
               f"worst entry {report.worst_entry}; eig err {report.eig_max_abs_err:.3e}")
    checks.add("scaled-variance-converges", demo.scaled_diffs_decreasing,
               f"delta*vRvR -> {demo.delta_vRvR[-1]:.6g}")
    checks.add("drift-linear-in-delta", demo.linear_in_delta,
               f"|c(delta)-c(0)| <= K*delta with K = {demo.fitted_K:.6g}")
    return _finish(outdir, "verify-covariance", cfg, p, checks,
                   seed=args.seed, workers=args.workers)


def _dump_means(outdir, tag, zs, stats):
    outputs = []
    for z, st in zip(zs, stats):
        name = f"{tag}_z{z:g}.fld"
        write_fld1(st.mean_field, outdir / name, z=z)
        outputs.append(name)
    return outputs


def cmd_run_spde(args) -> int:
    cfg = _load_config(args.config)
    p = cfg.params(delta=args.delta)
    seed = _require_seed(cfg, args)
    outdir = Path(args.out); outdir.mkdir(parents=True, exist_ok=True)

    u0 = cfg.make_beam()
    coeff = spde_coefficients(p)
    zs = cfg.snapshot_zs()
    stats = analysis.ensemble_spde(u0, coeff, zs, cfg.n_paths, seed,
                                   workers=args.workers)
    outputs = _dump_means(outdir, "mean", zs, stats)

    probe = (cfg.n // 2, cfg.n // 2)
    rows = []
    for z, st in zip(zs, stats):
        mean = st.mean_field
        if mean.space != "physical":
            mean = to_physical(mean)
        free = to_physical(free_propagate(u0, z, coeff)) if u0.space != "physical" \
            else free_propagate(u0, z, coeff)
        rows.append([z, abs(mean.data[probe]), abs(free.data[probe]),
                     abs(coherent_field(u0, z, coeff).data[probe])])
    _write_csv(outdir / "probe.csv",
               ["z", "abs_mean_probe", "abs_free_probe", "abs_coherent_probe"], rows)
    svgchart.line_chart(outdir / "probe.svg",
                        [("|E[u]|", [r[0] for r in rows], [r[1] for r in rows]),
                         ("coherent theory", [r[0] for r in rows], [r[3] for r in rows])],
                        title="on-axis coherent amplitude", xlabel="z",
                        ylabel="|E[u](x0)|", log_y=True)

    checks = _Checks()
    if args.oracle_check:
        n_steps = 1000
        dz = cfg.z_end / n_steps
        w = sample_wiener_path(n_steps, dz, seed, path_index=2**32)
        f = as_spectral(u0)
        for dw in w:
            f = spde_step(f, dw, dz, coeff)
        oracle = closed_form_solution(as_spectral(u0), w, cfg.z_end, coeff)
        err = float(np.abs(f.data - oracle.data).max() / np.abs(oracle.data).max())
        checks.add("spde-oracle-equivalence", err <= 1e-10,
                   f"split-step vs closed form over {n_steps} steps: "
                   f"max rel err {err:.3e} (tol 1e-10)")
    checks.add("ensemble-complete", all(st.count == cfg.n_paths for st in stats),
               f"{cfg.n_paths} paths x {len(zs)} snapshots")
    return _finish(outdir, "run-spde", cfg, p, checks,
                   extra={"coefficients": {"c_drift": repr(coeff.c_drift),
                                           "g_noise": coeff.g_noise,
                                           "diffr": coeff.diffr},
                          "snapshots": zs, "outputs": outputs,
                          "scheme": "exact-split-step"},
                   seed=seed, workers=args.workers)


def cmd_run_full(args) -> int:
    cfg = _load_config(args.config)
    p = cfg.params(delta=args.delta)
    seed = _require_seed(cfg, args)
    outdir = Path(args.out); outdir.mkdir(parents=True, exist_ok=True)

    u0 = cfg.make_beam()
    zs = cfg.snapshot_zs()
    actual_zs, stats = analysis.ensemble_full(
        u0, p, cfg.z_end, zs, cfg.n_paths, seed,
        dz=cfg.dz, workers=args.workers)
    outputs = _dump_means(outdir, "mean_full", actual_zs, stats)

    checks = _Checks()
    checks.add("ensemble-complete", all(st.count == cfg.n_paths for st in stats),
               f"{cfg.n_paths} paths x {len(actual_zs)} snapshots")
    return _finish(outdir, "run-full", cfg, p, checks,
                   extra={"snapshots": actual_zs, "outputs": outputs,
                          "dz_bound": stability_limit(p),
                          "scheme": "strang-kick/exact-midpoint-exponential"},
                   seed=seed, workers=args.workers)


def cmd_decay_fit(args) -> int:
    cfg = _load_config(args.config)
    p = cfg.params(delta=args.delta if args.delta is not None else 0.0)
    seed = _require_seed(cfg, args)
    outdir = Path(args.out); outdir.mkdir(parents=True, exist_ok=True)

    u0 = cfg.make_beam()
    coeff = spde_coefficients(p)
    zs = cfg.snapshot_zs()
    stats = analysis.ensemble_spde(u0, coeff, zs, cfg.n_paths, seed,
                                   workers=args.workers)
    free = [free_propagate(u0, z, coeff) for z in zs]
    lam = analysis.decay_constant_theory(p)
    probe = (cfg.n // 2, cfg.n // 2)
    report = analysis.fit_decay(list(zip(zs, stats)), probe, free, lam)

    rows = [[z, abs(st.mean_field.data[probe]), abs(fr.data[probe]),
             np.log(abs(st.mean_field.data[probe] / fr.data[probe]))]
            for z, st, fr in zip(zs, stats, free)]
    _write_csv(outdir / "decay.csv", ["z", "abs_mean", "abs_free", "log_ratio"], rows)
    svgchart.line_chart(outdir / "decay.svg",
                        [("log|E[u]/Su0|", [r[0] for r in rows], [r[3] for r in rows]),
                         ("theory slope", [r[0] for r in rows],
                          [-lam * r[0] for r in rows])],
                        title="coherent-field decay", xlabel="z", ylabel="log ratio")

    checks = _Checks()
    checks.add("decay-rate-within-tol", report.rel_error <= args.tol,
               f"lambda_fit = {report.lambda_fit:.6g} vs Lambda = {lam:.6g} "
               f"({100 * report.rel_error:.2f}%, tol {100 * args.tol:g}%)")
    return _finish(outdir, "decay-fit", cfg, p, checks,
                   extra={"lambda_fit": report.lambda_fit,
                          "lambda_theory": lam,
                          "fit_stderr": report.stderr,
                          "z_window": report.z_window,
                          "tolerance": args.tol},
                   seed=seed, workers=args.workers)


def cmd_converge(args) -> int:
    cfg = _load_config(args.config)
    p = cfg.params(delta=args.delta)
    seed = _require_seed(cfg, args)
    outdir = Path(args.out); outdir.mkdir(parents=True, exist_ok=True)

    eps_list = [float(tok) for tok in args.eps_list.split(",") if tok.strip()]
    u0 = cfg.make_beam()
    table = analysis.convergence_study(u0, p, eps_list, cfg.z_end, cfg.n_paths,
                                       seed, workers=args.workers,
                                       shared_noise=not args.independent_noise)
    rows = [[r.eps, r.dz, r.n_steps, r.err_mean, r.err_mean_coupled, r.err_probe,
             r.err_second_moment, r.err_pathwise, r.err_beta0] for r in table.rows]
    _write_csv(outdir / "convergence.csv",
               ["eps", "dz", "n_steps", "err_mean", "err_mean_coupled",
                "err_probe", "err_second_moment", "err_pathwise", "err_beta0"], rows)
    svgchart.line_chart(outdir / "convergence.svg",
                        [("plain", eps_list, [r.err_mean for r in table.rows]),
                         ("coupled", eps_list, [r.err_mean_coupled for r in table.rows]),
                         ("pathwise", eps_list, [r.err_pathwise for r in table.rows])],
                        title="full model vs limiting model", xlabel="eps",
                        ylabel="relative error", log_y=True)

    checks = _Checks()
    checks.add("coupled-error-monotone", table.coupled_monotone,
               "coupled E[u] errors: " + ", ".join(f"{r.err_mean_coupled:.3e}"
                                                   for r in table.rows))
    checks.add("pathwise-error-monotone", table.pathwise_monotone,
               "pathwise errors: " + ", ".join(f"{r.err_pathwise:.3e}"
                                               for r in table.rows))
    if cfg.beam == "plane":
        worst = max(r.err_beta0 for r in table.rows)
        checks.add("beta0-roundoff", worst <= args.beta0_tol,
                   f"worst beta=0 error {worst:.3e} (tol {args.beta0_tol:g})")
    return _finish(outdir, "converge", cfg, p, checks,
                   extra={"eps_list": eps_list, "shared_noise": table.shared_noise,
                          "beta0_errors": [r.err_beta0 for r in table.rows]},
                   seed=seed, workers=args.workers)


def cmd_expand_mu(args) -> int:
    cfg = _load_config(args.config)
    p = cfg.params(delta=args.delta)
    outdir = Path(args.out); outdir.mkdir(parents=True, exist_ok=True)

    mus = np.concatenate([np.linspace(0.01, 0.2, 20), np.linspace(0.25, 1.0, 16)])
    rows = []
    for mu in mus:
        r = analysis.mu_expansion_check(p, mu=float(mu))
        rows.append([r.mu, abs(r.full_coefficient), abs(r.remainder), r.ratio,
                     r.second_term_fraction])
    _write_csv(outdir / "mu_expansion.csv",
               ["mu", "abs_full", "abs_remainder", "ratio_mu_halfmu",
                "second_term_fraction"], rows)
    svgchart.line_chart(outdir / "mu_expansion.svg",
                        [("|remainder|", [r[0] for r in rows], [r[2] for r in rows])],
                        title="two-term expansion remainder", xlabel="mu",
                        ylabel="|remainder|", log_y=True)

    at02 = analysis.mu_expansion_check(p, mu=0.2)
    at1 = analysis.mu_expansion_check(p, mu=1.0)
    checks = _Checks()
    checks.add("remainder-order-mu2", at02.ratio_in_band,
               f"|R(0.2)|/|R(0.1)| = {at02.ratio:.4f} in [3.5, 4.5]")
    checks.add("order-one-at-mu1", abs(at1.second_term_fraction - 0.5) <= 1e-12,
               f"second/first term magnitude at mu=1: {at1.second_term_fraction}")
    return _finish(outdir, "expand-mu", cfg, p, checks,
                   seed=args.seed, workers=args.workers)


# ---------------------------------------------------------------------------


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="layerbeam",
                                 description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    def common(sp, oracle=False, tuples=False, eps=False, tol=False, ou=False):
        sp.add_argument("--config", default=None, help="config file path")
        sp.add_argument("--seed", type=int, default=None, help="master seed (u64)")
        sp.add_argument("--workers", type=int, default=1, help="worker threads")
        sp.add_argument("--out", default="out", help="output directory")
        sp.add_argument("--delta", type=float, default=None,
                        help="override the regularization delta")
        if oracle:
            sp.add_argument("--oracle-check", action="store_true",
                            help="check split-step against the closed form")
        if tuples:
            sp.add_argument("--tuples", type=int, default=100,
                            help="number of random parameter tuples")
        if eps:
            sp.add_argument("--eps-list", default="0.2,0.1,0.05",
                            help="comma-separated decreasing eps values")
            sp.add_argument("--independent-noise", action="store_true",
                            help="use independent seeds per eps column")
            sp.add_argument("--beta0-tol", type=float, default=1e-12,
                            help="roundoff tolerance for the beta=0 control")
        if tol:
            sp.add_argument("--tol", type=float, default=0.05,
                            help="relative tolerance on the fitted decay rate")
        if ou:
            sp.add_argument("--ou-steps", type=int, default=1_000_000,
                            help="OU path length for the statistics checks")

    common(sub.add_parser("validate-noise", help="OU autocovariance checks"), ou=True)
    common(sub.add_parser("verify-covariance",
                          help="stationary-covariance certification"), tuples=True)
    common(sub.add_parser("run-spde", help="ensemble run of the limiting model"),
           oracle=True)
    common(sub.add_parser("run-full", help="ensemble run of the pre-limit model"))
    common(sub.add_parser("decay-fit", help="fit the coherent-field decay rate"),
           tol=True)
    common(sub.add_parser("converge", help="full-vs-limiting convergence study"),
           eps=True)
    common(sub.add_parser("expand-mu", help="high-frequency expansion check"))
    return ap


_COMMANDS = {
    "validate-noise": cmd_validate_noise,
    "verify-covariance": cmd_verify_covariance,
    "run-spde": cmd_run_spde,
    "run-full": cmd_run_full,
    "decay-fit": cmd_decay_fit,
    "converge": cmd_converge,
    "expand-mu": cmd_expand_mu,
}


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except configparser.Error as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
