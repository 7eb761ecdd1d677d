"""Command-line interface.

Exit codes: 0 success, 2 configuration error, 3 numeric/domain error,
4 acceptance-threshold failure in ``montecarlo --check``.
"""
from __future__ import annotations

import argparse
import sys
from dataclasses import fields

from . import asymptotics, harness, sphere, whittle
from .errors import ConfigError, DomainError, NeedletWhittleError
from .harmonic import EmpiricalSpectrum, empirical_cl, simulate_alm
from .needlet import JRange, MexicanWindow, StandardWindow
from .spectrum import PowerSpectrumModel

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_CHECK = 4


def _cmd_theory(args) -> int:
    consts = asymptotics.constants(args.p, args.B, args.alpha0, kappa=args.kappa)
    print("field,value")
    for f in fields(consts):
        print(f"{f.name},{getattr(consts, f.name):.10g}")
    table = asymptotics.table1_constants()
    print()
    print("alpha0,kind,key,value")
    for i, a0 in enumerate(table.alpha0):
        for k, b in enumerate(table.B):
            print(f"{a0:g},rho0_sq,B={b:.6g},{table.rho0_sq[i][k]}")
        for k, p in enumerate(table.p):
            print(f"{a0:g},sigma_sq,p={p},{table.sigma_sq[i][k]}")
    return EXIT_OK


def _cmd_simulate(args) -> int:
    config = harness.ExperimentConfig.from_file(args.config)
    prefix = args.out_prefix or config.output_prefix
    alm = simulate_alm(config.model, config.l_max, config.master_seed)
    spec = empirical_cl(alm)
    alm.save(f"{prefix}.alm.bin")
    spec.save(f"{prefix}.spectrum.bin")
    spec.to_csv(f"{prefix}.spectrum.csv")
    print(f"wrote {prefix}.alm.bin, {prefix}.spectrum.bin, {prefix}.spectrum.csv")
    return EXIT_OK


def _load_spectrum(path) -> EmpiricalSpectrum:
    if str(path).endswith(".csv"):
        return EmpiricalSpectrum.from_csv(path)
    return EmpiricalSpectrum.load(path)


def _cmd_estimate(args) -> int:
    spec = _load_spectrum(args.spectrum_file)
    if args.window == "mexican":
        window = MexicanWindow(p=args.p, B=args.B)
    else:
        window = StandardWindow(B=args.B)
    search = whittle.SearchSettings(
        alpha_min=args.alpha_min, alpha_max=args.alpha_max, tol=args.tol
    )
    if args.band == "narrow":
        fit = whittle.fit_narrow_band(spec, window, j_l=args.jl, g=args.g, search=search)
    else:
        j_range = None
        if args.j0 is not None and args.jl is not None:
            j_range = JRange(j0=args.j0, jL=args.jl)
        fit = whittle.fit_full_band(spec, window, j_range=j_range, search=search)
    print(fit.report())
    if args.csv_out:
        with open(args.csv_out, "w", newline="") as fh:
            fh.write(whittle.fit_csv_header() + "\n")
            fh.write(whittle.fit_csv_row(fit, seed=spec.seed) + "\n")
        print(f"wrote {args.csv_out}")
    return EXIT_OK


def _cmd_montecarlo(args) -> int:
    config = harness.ExperimentConfig.from_file(args.config)
    summary = harness.run_experiment(config)
    prefix = config.output_prefix
    harness.write_rows_csv(summary, f"{prefix}.rows.csv")
    harness.write_summary_csv(summary, f"{prefix}.summary.csv")
    if not config.noise_free and summary.aggregate.n_rows - summary.aggregate.n_failed > 7:
        harness.write_histogram_csv(summary, f"{prefix}.hist.csv")
        harness.write_qq_csv(summary, f"{prefix}.qq.csv")
    agg = summary.aggregate
    print(f"replications {agg.n_rows} (failed {agg.n_failed})")
    print(f"mean_alpha   {agg.mean_alpha:.6f} +- {agg.se_alpha:.6f}")
    print(f"mean_g       {agg.mean_g:.6f}")
    print(f"var_scaled   {agg.var_scaled:.4f}  (theory {agg.theory_varsigma0_sq:.4f})")
    print(f"scaled_bias  {agg.scaled_bias:+.4f}  (theory {agg.theory_bias:+.4f})")
    print(f"jarque_bera  {agg.jarque_bera:.3f}")
    if args.check:
        failures = 0
        for res in harness.theory_checks(summary):
            status = "PASS" if res.passed else "FAIL"
            print(f"check {res.name}: {status} ({res.detail})")
            failures += not res.passed
        if failures:
            return EXIT_CHECK
    return EXIT_OK


def _cmd_realspace_check(args) -> int:
    model = PowerSpectrumModel(alpha0=args.alpha0, g0=args.g0)
    window = MexicanWindow(p=args.p, B=args.B)
    grid = sphere.build_grid(args.j, args.B)
    l_max = window.effective_lmax(args.j, args.l_max)
    alm = simulate_alm(model, l_max, args.seed)
    beta = sphere.synthesize_beta(alm, grid, args.p, args.B)
    from .needlet import lambda_hat

    lam = lambda_hat(empirical_cl(alm), window, args.j)
    gap = abs(beta.sum_sq() - lam) / lam
    print(f"frame check: sum beta^2 = {beta.sum_sq():.8g}, lambda_hat = {lam:.8g}, "
          f"relative gap = {gap:.4%}")
    summary = sphere.empirical_beta_correlation(
        model, args.j, args.j2 if args.j2 is not None else args.j, args.p, args.B,
        n_seeds=args.n_seeds, master_seed=args.seed,
    )
    print(f"correlation decay: fitted exponent {summary.fitted_exponent:.2f} "
          f"(bound exponent {summary.lemma_exponent:g})")
    print(f"far-field mean |corr| = {summary.far_field_mean():.4f}")
    return EXIT_OK


def _cmd_plugin(args) -> int:
    spec = _load_spectrum(args.spectrum_file)
    result = whittle.plug_in(
        spec,
        p=args.p,
        b_std=args.B_std,
        b_mex=args.B_mex,
        interpolate=not args.no_interpolate,
    )
    print(result.report())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="needlet-whittle",
        description="Spectral-index estimation for isotropic Gaussian fields on the sphere",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_theory = sub.add_parser("theory", help="print asymptotic constants and the variance table")
    p_theory.add_argument("--p", type=int, required=True)
    p_theory.add_argument("--B", type=float, required=True)
    p_theory.add_argument("--alpha0", type=float, required=True)
    p_theory.add_argument("--kappa", type=float, default=0.0)
    p_theory.set_defaults(func=_cmd_theory)

    p_sim = sub.add_parser("simulate", help="simulate coefficients and empirical spectrum")
    p_sim.add_argument("--config", required=True)
    p_sim.add_argument("--out-prefix")
    p_sim.set_defaults(func=_cmd_simulate)

    p_est = sub.add_parser("estimate", help="fit a spectrum file")
    p_est.add_argument("--spectrum-file", required=True)
    p_est.add_argument("--window", choices=("mexican", "standard"), default="mexican")
    p_est.add_argument("--p", type=int, default=2)
    p_est.add_argument("--B", type=float, default=2.0)
    p_est.add_argument("--band", choices=("full", "narrow"), default="full")
    p_est.add_argument("--g", type=float)
    p_est.add_argument("--j0", type=int)
    p_est.add_argument("--jl", type=int)
    p_est.add_argument("--alpha-min", type=float, default=2.001)
    p_est.add_argument("--alpha-max", type=float, default=10.0)
    p_est.add_argument("--tol", type=float, default=1e-6)
    p_est.add_argument("--csv-out")
    p_est.set_defaults(func=_cmd_estimate)

    p_mc = sub.add_parser("montecarlo", help="run a replicated experiment")
    p_mc.add_argument("--config", required=True)
    p_mc.add_argument("--check", action="store_true",
                      help="exit 4 unless the applicable theory checks pass")
    p_mc.set_defaults(func=_cmd_montecarlo)

    p_rs = sub.add_parser("realspace-check",
                          help="frame identity and correlation-decay diagnostics")
    p_rs.add_argument("--j", type=int, required=True)
    p_rs.add_argument("--p", type=int, required=True)
    p_rs.add_argument("--B", type=float, required=True)
    p_rs.add_argument("--seed", type=int, required=True)
    p_rs.add_argument("--j2", type=int)
    p_rs.add_argument("--alpha0", type=float, default=3.0)
    p_rs.add_argument("--g0", type=float, default=1.0)
    p_rs.add_argument("--n-seeds", type=int, default=300)
    p_rs.add_argument("--l-max", type=int, default=4096)
    p_rs.set_defaults(func=_cmd_realspace_check)

    p_pl = sub.add_parser("plugin", help="two-step pilot/refit estimate")
    p_pl.add_argument("--spectrum-file", required=True)
    p_pl.add_argument("--p", type=int, required=True)
    p_pl.add_argument("--B-std", type=float, default=2.0)
    p_pl.add_argument("--B-mex", type=float, default=2.0)
    p_pl.add_argument("--no-interpolate", action="store_true")
    p_pl.set_defaults(func=_cmd_plugin)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DomainError, NeedletWhittleError) as exc:
        print(f"numeric error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
