"""Command-line interface.

    syndatum experiment <builtin | --config FILE> [--scale K] [--seed S]
                        [--out DIR] [--workers W]
    syndatum synth    --config FILE --out FILE [--seed S]
    syndatum fidelity --config FILE [--d D] [--out FILE]
    syndatum utility  --config FILE [--out FILE]
    syndatum bound    --task {reg,cls,lr} --config FILE [--out FILE]
    syndatum compare  --config FILE [--out FILE]

Exit codes: 0 success, 1 fatal configuration error, 2 completed with
per-row errors recorded in the CSV.  SYNDATUM_WORKERS overrides --workers.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import replace

import numpy as np

from .bounds import (
    ClassificationScenario,
    FittedQuad,
    RegressionScenario,
    classification_bound,
    lr_explicit_bound,
    regression_bound,
)
from .datamodel import NoiseModel, SeedSpec, TaskKind, sample_noise, write_csv
from .densities import certify_fidelity_level, chi_square_divergence
from .erm import fit_classification, fit_regression, parse_model_class, population_optimum
from .errors import ConfigError, SyndatumError
from .estimators import fit_estimator
from .harness import (
    BUILTIN_NAMES,
    ScenarioConfig,
    _draw_original,
    _estimator_spec,
    default_workers,
    load_scenarios,
    run_builtin,
    run_scenario,
    summarize,
    write_rows_csv,
)
from .metrics import SQUARED, ZERO_ONE, RiskConfig, compare_models, utility_metric
from .synthesis import FeatureGeneratorSpec, SynthesisConfig, synthesize_from_fitted


def _write_json(payload, out):
    text = json.dumps(payload, indent=2, sort_keys=True)
    if out:
        with open(out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def _first_scenario(path) -> ScenarioConfig:
    return load_scenarios(path)[0]


def _seeded(config: ScenarioConfig, seed) -> ScenarioConfig:
    return config if seed is None else replace(config, master_seed=seed)


def _cmd_experiment(args) -> int:
    # the environment variable takes precedence over the flag
    if os.environ.get("SYNDATUM_WORKERS"):
        workers = default_workers()
    else:
        workers = args.workers if args.workers else 1
    if args.config:
        rows = []
        for config in load_scenarios(args.config):
            rows.extend(run_scenario(_seeded(config, args.seed), workers=workers))
    elif args.builtin:
        seed = args.seed if args.seed is not None else None
        kwargs = {"scale": args.scale, "workers": workers}
        if seed is not None:
            kwargs["master_seed"] = seed
        rows = run_builtin(args.builtin, **kwargs)
    else:
        raise ConfigError("experiment requires a builtin name or --config FILE")
    os.makedirs(args.out, exist_ok=True)
    write_rows_csv(rows, os.path.join(args.out, "rows.csv"))
    _write_json({"groups": summarize(rows)}, os.path.join(args.out, "summary.json"))
    n_err = sum(1 for r in rows if r.error)
    print(f"wrote {len(rows)} rows to {args.out} ({n_err} row errors)")
    return 2 if n_err else 0


def _cmd_synth(args) -> int:
    config = _seeded(_first_scenario(args.config), args.seed)
    seed = SeedSpec(config.master_seed, 0)
    original = _draw_original(config, config.n_grid[0], seed.child(0))
    spec = _estimator_spec(config, config.estimators[0])
    est = fit_estimator(spec, original, seed.child(1))
    syn_cfg = SynthesisConfig(
        generator=FeatureGeneratorSpec.from_density(config.synth_density),
        estimator=spec,
        synthetic_n=config.synthetic_n(config.n_grid[0]),
        noise=config.synth_noise,
    )
    synthetic = synthesize_from_fitted(est, syn_cfg, original, seed.child(2))
    write_csv(synthetic, args.out)
    print(f"wrote synthetic dataset ({synthetic.n} x {synthetic.p}) to {args.out}")
    return 0


def _cmd_fidelity(args) -> int:
    config = _first_scenario(args.config)
    p, q = config.real_density, config.synth_density
    chi2_pq = chi_square_divergence(p, q)
    chi2_qp = chi_square_divergence(q, p)
    cert = certify_fidelity_level(p, q, d=args.d)
    payload = {
        "chi2_real_vs_synth": "inf" if math.isinf(chi2_pq) else chi2_pq,
        "chi2_synth_vs_real": "inf" if math.isinf(chi2_qp) else chi2_qp,
        "certificate": cert.to_json_dict(),
    }
    _write_json(payload, args.out)
    return 0


def _risk_config(config: ScenarioConfig, seed: SeedSpec) -> RiskConfig:
    loss = SQUARED if config.task is TaskKind.REGRESSION else ZERO_ONE
    return RiskConfig(
        density=config.real_density,
        truth=config.truth.resolve(),
        loss=loss,
        noise=config.noise if config.task is TaskKind.REGRESSION else None,
        n_test=config.n_test,
        method=config.risk_method,
        seed=seed,
    )


def _fit_pair(config: ScenarioConfig, est_text: str, class_text: str, n: int, seed: SeedSpec):
    original = _draw_original(config, n, seed.child(0))
    spec = _estimator_spec(config, est_text)
    est = fit_estimator(spec, original, seed.child(1))
    syn_cfg = SynthesisConfig(
        generator=FeatureGeneratorSpec.from_density(config.synth_density),
        estimator=spec,
        synthetic_n=config.synthetic_n(n),
        noise=config.synth_noise,
    )
    synthetic = synthesize_from_fitted(est, syn_cfg, original, seed.child(2))
    mc = parse_model_class(class_text, original.p, config.task)
    if config.task is TaskKind.REGRESSION:
        f_orig, f_synth = fit_regression(mc, original), fit_regression(mc, synthetic)
    else:
        f_orig, f_synth = fit_classification(mc, original), fit_classification(mc, synthetic)
    return original, est, synthetic, mc, f_orig, f_synth


def _cmd_utility(args) -> int:
    config = _seeded(_first_scenario(args.config), args.seed)
    seed = SeedSpec(config.master_seed, 0)
    n = config.n_grid[-1]
    reports = []
    for est_text in config.estimators:
        for class_text in config.model_classes:
            _, _, _, _, f_orig, f_synth = _fit_pair(config, est_text, class_text, n, seed)
            report = utility_metric(f_synth, f_orig, _risk_config(config, seed.child(9)))
            reports.append(
                {
                    "estimator": est_text,
                    "model_class": class_text,
                    "n": n,
                    "report": report.to_json_dict(),
                }
            )
    _write_json(reports, args.out)
    return 0


def _cmd_bound(args) -> int:
    config = _seeded(_first_scenario(args.config), args.seed)
    seed = SeedSpec(config.master_seed, 0)
    n = config.n_grid[0]
    truth = config.truth.resolve()
    if args.task == "lr":
        if config.task is not TaskKind.REGRESSION or config.truth.name != "linear":
            raise ConfigError("bound --task lr requires a regression scenario with truth 'linear'")
        real, synth = config.real_density, config.synth_density
        X = real.sample(n, seed.child(1))
        eps = sample_noise(config.noise, n, seed.child(2))
        Y = X @ np.asarray(config.truth.beta) + eps
        beta_hat = np.linalg.solve(X.T @ X, X.T @ Y)
        ns = config.synthetic_n(n)
        Xs = synth.sample(ns, seed.child(3))
        synth_noise = config.synth_noise or NoiseModel.bounded_uniform(config.noise.variance)
        eps_s = sample_noise(synth_noise, ns, seed.child(4))
        Ys = Xs @ beta_hat + eps_s
        chi2 = chi_square_divergence(real, synth)
        report = lr_explicit_bound(
            X, Xs, eps, eps_s,
            real.coordinate_variances(), synth.coordinate_variances(),
            chi2, Y, Ys, real.support,
        )
        _write_json({"task": "lr", "n": n, "report": report.to_json_dict()}, args.out)
        return 0

    est_text, class_text = config.estimators[0], config.model_classes[0]
    original, est, synthetic, mc, f_orig, f_synth = _fit_pair(
        config, est_text, class_text, n, seed
    )
    f_star = population_optimum(mc, config.real_density, truth, None, 100_000, seed.child(5))
    if args.task == "reg":
        if config.task is not TaskKind.REGRESSION:
            raise ConfigError("bound --task reg requires a regression scenario")
        f_tilde_star = population_optimum(
            mc, config.synth_density, est.mean, None, 100_000, seed.child(6)
        )
        synth_noise = config.synth_noise or NoiseModel.bounded_uniform(
            max(float(np.var(original.responses - est.mean(original.features))), 1e-12)
        )
        scenario = RegressionScenario(
            config.real_density, config.synth_density, truth, config.noise, est, synth_noise
        )
        report = regression_bound(
            scenario, FittedQuad(f_orig, f_synth, f_star, f_tilde_star),
            n_test=config.n_test, seed=seed.child(7),
        )
    else:
        if config.task is not TaskKind.CLASSIFICATION:
            raise ConfigError("bound --task cls requires a classification scenario")
        f_tilde_star = population_optimum(
            mc, config.synth_density, est.prob, None, 100_000, seed.child(6)
        )
        scenario = ClassificationScenario(
            config.real_density, config.synth_density, truth, est
        )
        report = classification_bound(
            scenario, FittedQuad(f_orig, f_synth, f_star, f_tilde_star),
            n_test=config.n_test, seed=seed.child(7),
        )
    u_report = utility_metric(f_synth, f_orig, _risk_config(config, seed.child(8)))
    payload = {
        "task": args.task,
        "n": n,
        "estimator": est_text,
        "model_class": class_text,
        "report": report.to_json_dict(),
        "measured_utility": u_report.utility,
        "measured_utility_std_error": u_report.combined_std_error,
    }
    if math.isinf(report.total):
        payload["report"]["total"] = "inf"
        payload["vacuous"] = True
    if math.isinf(payload["report"].get("chi2", 0.0)):
        payload["report"]["chi2"] = "inf"
    _write_json(payload, args.out)
    return 0


def _cmd_compare(args) -> int:
    config = _seeded(_first_scenario(args.config), args.seed)
    if len(config.model_classes) != 2:
        raise ConfigError("compare requires exactly two entries in model_classes")
    seed = SeedSpec(config.master_seed, 0)
    truth = config.truth.resolve()
    est = fit_estimator(
        _estimator_spec(config, config.estimators[0]),
        _draw_original(config, config.n_grid[0], seed.child(0)),
        seed.child(1),
    )
    p = config.real_density.dim
    c1 = parse_model_class(config.model_classes[0], p, config.task)
    c2 = parse_model_class(config.model_classes[1], p, config.task)
    report = compare_models(
        c1, c2, config.real_density, config.synth_density, truth, est,
        _risk_config(config, seed.child(2)),
    )
    _write_json(report.to_json_dict(), args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="syndatum",
        description="Synthetic-data utility metrics, bounds, and experiment harness",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    exp = sub.add_parser("experiment", help="run a builtin or config-driven experiment")
    exp.add_argument("builtin", nargs="?", help=f"builtin name, one of {BUILTIN_NAMES}")
    exp.add_argument("--config", help="scenario config file (INI sections)")
    exp.add_argument("--scale", type=int, default=1, help="divide sizes/replications by this factor")
    exp.add_argument("--seed", type=int, default=None, help="master seed override")
    exp.add_argument("--out", default="syndatum-out", help="output directory")
    exp.add_argument("--workers", type=int, default=0, help="parallel workers (default 1 or SYNDATUM_WORKERS)")

    synth = sub.add_parser("synth", help="emit a synthetic dataset as CSV")
    synth.add_argument("--config", required=True)
    synth.add_argument("--out", required=True)
    synth.add_argument("--seed", type=int, default=None)

    fid = sub.add_parser("fidelity", help="chi-square divergence and (V,d) certificate")
    fid.add_argument("--config", required=True)
    fid.add_argument("--d", type=float, default=1.0)
    fid.add_argument("--out", default=None)

    util = sub.add_parser("utility", help="utility reports for one scenario draw")
    util.add_argument("--config", required=True)
    util.add_argument("--out", default=None)
    util.add_argument("--seed", type=int, default=None)

    bound = sub.add_parser("bound", help="utility-bound report with every component")
    bound.add_argument("--task", choices=("reg", "cls", "lr"), required=True)
    bound.add_argument("--config", required=True)
    bound.add_argument("--out", default=None)
    bound.add_argument("--seed", type=int, default=None)

    comp = sub.add_parser("compare", help="consistent model-comparison report")
    comp.add_argument("--config", required=True)
    comp.add_argument("--out", default=None)
    comp.add_argument("--seed", type=int, default=None)
    return parser


_COMMANDS = {
    "experiment": _cmd_experiment,
    "synth": _cmd_synth,
    "fidelity": _cmd_fidelity,
    "utility": _cmd_utility,
    "bound": _cmd_bound,
    "compare": _cmd_compare,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except SyndatumError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
