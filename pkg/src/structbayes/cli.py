"""Batch command line interface.

Subcommands read a JSON config, write their artifacts under the output
directory, and always leave a ``manifest.json`` recording the config
hash, the effective seed, the package version and the run status.  Exit
codes: 0 success, 1 configuration error, 2 numeric failure (any NaN or
infinity in an output).

Example::

    structbayes posterior-exact --config cfg.json --out results/ --seed 7
"""

import argparse
import hashlib
import json
import os
import sys

import numpy as np

from . import __version__
from .errors import ConfigError, NumericFailure, StructBayesError
from .experiments import (
    Scenario,
    StudySettings,
    executor_jobs_default,
    generate_noise,
    generate_truth,
    resolve_family,
    restricted_constants,
    run_rate_study,
    shipped_families,
    theory_checks,
)
from .marginal import exact_posterior_table
from .prior import PriorConfig, sample_prior
from .sampler import ChainConfig, run_chain
from .validation import substream

__all__ = ["main"]


def main(argv=None):
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        config = _load_config(args.config)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: ConfigError: cannot read config: {exc}", file=sys.stderr)
        return 1

    out_dir = args.out
    os.makedirs(out_dir, exist_ok=True)
    seed = args.seed if args.seed is not None else config.get("seed", 0)
    manifest = {
        "subcommand": args.subcommand,
        "config_sha256": hashlib.sha256(
            json.dumps(config, sort_keys=True).encode()
        ).hexdigest(),
        "seed": int(seed),
        "version": __version__,
        "status": "ok",
        "outputs": [],
    }
    try:
        outputs = _HANDLERS[args.subcommand](config, args, out_dir, int(seed))
        manifest["outputs"] = outputs
        _scan_outputs_finite(out_dir, outputs)
    except (ConfigError, KeyError, TypeError, ValueError) as exc:
        manifest["status"] = "config_error"
        _write_manifest(out_dir, manifest)
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except NumericFailure as exc:
        manifest["status"] = "numeric_error"
        _write_manifest(out_dir, manifest)
        print(f"error: NumericFailure: {exc}", file=sys.stderr)
        return 2
    except StructBayesError as exc:
        manifest["status"] = "config_error"
        _write_manifest(out_dir, manifest)
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    _write_manifest(out_dir, manifest)
    return 0


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="structbayes",
        description="Posterior inference and experiments for structured linear models",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in (
        "sample-prior",
        "posterior-exact",
        "posterior-mcmc",
        "rate-study",
        "theory-check",
        "restricted-constants",
    ):
        cmd = sub.add_parser(name)
        cmd.add_argument("--config", required=True, help="JSON config path")
        cmd.add_argument("--out", required=True, help="output directory")
        cmd.add_argument("--seed", type=int, default=None, help="seed override")
        cmd.add_argument("--jobs", type=int, default=None, help="worker count")
        cmd.add_argument("--cap", type=int, default=None, help="enumeration cap")
    return parser


def _load_config(path):
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def _write_manifest(out_dir, manifest):
    with open(os.path.join(out_dir, "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _scan_outputs_finite(out_dir, outputs):
    """Hard failure when any numeric cell in an output is NaN or infinite."""
    import csv
    import math

    def walk(obj, name):
        if isinstance(obj, float) and not math.isfinite(obj):
            raise NumericFailure(f"non-finite value written to {name}")
        if isinstance(obj, dict):
            for v in obj.values():
                walk(v, name)
        elif isinstance(obj, list):
            for v in obj:
                walk(v, name)

    for name in outputs:
        path = os.path.join(out_dir, name)
        if not os.path.exists(path):
            continue
        with open(path, "r", encoding="utf-8") as fh:
            if name.endswith(".csv"):
                for row in csv.reader(fh):
                    for cell in row:
                        try:
                            value = float(cell)
                        except ValueError:
                            continue
                        if not math.isfinite(value):
                            raise NumericFailure(
                                f"non-finite value written to {name}"
                            )
            elif name.endswith(".jsonl"):
                for line in fh:
                    if line.strip():
                        walk(json.loads(line), name)
            elif name.endswith(".json"):
                walk(json.load(fh), name)


def _prior_config(config):
    return PriorConfig(
        lam=float(config.get("lam", 1.0)), D=float(config.get("D", 2.0))
    )


def _observed_vector(config, family, seed):
    if "y" in config:
        return np.asarray(config["y"], dtype=float)
    if "scenario" in config:
        scenario = Scenario.from_dict(config["scenario"])
        truth = generate_truth(scenario, substream(seed, 0))
        return generate_noise(
            scenario.noise_kind, truth.theta, substream(seed, 1), family=family
        )
    raise ConfigError("config needs either 'y' or 'scenario'")


def _cmd_sample_prior(config, args, out_dir, seed):
    family = resolve_family(config["family"])
    prior = _prior_config(config)
    n_draws = int(config.get("draws", 10))
    rng = substream(seed, 0)
    path = "prior_draws.jsonl"
    with open(os.path.join(out_dir, path), "w", encoding="utf-8") as fh:
        for _ in range(n_draws):
            draw = sample_prior(family, prior, rng)
            fh.write(json.dumps(draw.to_json(), sort_keys=True))
            fh.write("\n")
    return [path]


def _cmd_posterior_exact(config, args, out_dir, seed):
    family = resolve_family(config["family"])
    prior = _prior_config(config)
    cap = args.cap if args.cap is not None else int(config.get("cap", 100_000))
    y = _observed_vector(config, family, seed)
    table = exact_posterior_table(family, y, prior, cap=cap)
    path = "posterior_table.csv"
    with open(os.path.join(out_dir, path), "w", encoding="utf-8") as fh:
        table.write_csv(fh)
    return [path]


def _cmd_posterior_mcmc(config, args, out_dir, seed):
    family = resolve_family(config["family"])
    chain_cfg = config.get("chain", {})
    chain = ChainConfig(
        steps=int(chain_cfg.get("steps", 10_000)),
        burn_in=int(chain_cfg.get("burn_in", 1_000)),
        thin=int(chain_cfg.get("thin", 10)),
        prior=_prior_config(config),
        seed=seed,
        q_steps=int(chain_cfg.get("q_steps", 150)),
        draw_q=bool(chain_cfg.get("draw_q", True)),
    )
    y = _observed_vector(config, family, seed)
    result = run_chain(family, y, chain)
    draws_path = "draws.jsonl"
    with open(os.path.join(out_dir, draws_path), "w", encoding="utf-8") as fh:
        result.write_jsonl(fh)
    diag_path = "diagnostics.json"
    with open(os.path.join(out_dir, diag_path), "w", encoding="utf-8") as fh:
        json.dump(result.diagnostics, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return [draws_path, diag_path]


def _cmd_rate_study(config, args, out_dir, seed):
    scenarios = [Scenario.from_dict(s) for s in config["grid"]]
    settings_cfg = dict(config.get("settings", {}))
    if args.cap is not None:
        settings_cfg["cap"] = args.cap
    settings = StudySettings(
        estimator=config.get("estimator", "exact"), **settings_cfg
    )
    jobs = args.jobs if args.jobs is not None else executor_jobs_default()
    report = run_rate_study(scenarios, settings=settings, jobs=jobs)
    outputs = []
    with open(os.path.join(out_dir, "replicates.csv"), "w", encoding="utf-8") as fh:
        report.write_replicates_csv(fh)
    outputs.append("replicates.csv")
    with open(os.path.join(out_dir, "summary.csv"), "w", encoding="utf-8") as fh:
        report.write_summary_csv(fh)
    outputs.append("summary.csv")
    with open(os.path.join(out_dir, "plot_data.json"), "w", encoding="utf-8") as fh:
        json.dump(report.plot_data(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    outputs.append("plot_data.json")
    return outputs


def _cmd_theory_check(config, args, out_dir, seed):
    if config.get("families") in (None, "shipped"):
        families = shipped_families(seed)
    else:
        families = [resolve_family(d) for d in config["families"]]
    report = theory_checks(families, seed=seed)
    path = "theory_report.json"
    with open(os.path.join(out_dir, path), "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    if not report["passed"]:
        raise NumericFailure("theory checks reported violations")
    return [path]


def _cmd_restricted_constants(config, args, out_dir, seed):
    from .experiments import _resolve_design_entry

    design = _resolve_design_entry(config["design"])
    kappa1, kappa2 = restricted_constants(
        design,
        s_star=int(config["s_star"]),
        delta=float(config.get("delta", 0.5)),
        cap=args.cap if args.cap is not None else int(config.get("cap", 1_000_000)),
    )
    path = "restricted_constants.json"
    with open(os.path.join(out_dir, path), "w", encoding="utf-8") as fh:
        json.dump({"kappa1": kappa1, "kappa2": kappa2}, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return [path]


_HANDLERS = {
    "sample-prior": _cmd_sample_prior,
    "posterior-exact": _cmd_posterior_exact,
    "posterior-mcmc": _cmd_posterior_mcmc,
    "rate-study": _cmd_rate_study,
    "theory-check": _cmd_theory_check,
    "restricted-constants": _cmd_restricted_constants,
}


if __name__ == "__main__":
    sys.exit(main())
