"""Command-line entry point: simulate | calibrate | run | report.

Each command takes an optional flat key=value config file plus command-line
overrides (overrides win, unknown keys are rejected). Chain runs write one
JSON document per chain; report aggregates them into final selections, a
cross-run selection-count table, a stability score and an optional refit.
"""

from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import dataio
from .blasso import LassoConfig, LassoHyper, run_lasso_chain
from .model import CalibrationError, Dataset, RidgeHyper, calibrate_tau, default_lambda
from .postprocess import (
    GAP_DOMINANCE,
    GAP_WINDOW,
    RefitConfig,
    cw_rel,
    final_selection,
    lasso_select,
    refit_and_predict,
)
from .simdata import SimSpec, base_only, generate_microarray_analog, generate_simulated
from .ssvs import ChainNumericError, SsvsConfig, run_ssvs_chain


class ConfigError(ValueError):
    pass


def _flag(value) -> bool:
    if isinstance(value, bool):
        return value
    if str(value).lower() in ("1", "true", "yes", "on"):
        return True
    if str(value).lower() in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {value!r}")


# command -> key -> (converter, default, help)
SCHEMAS = {
    "simulate": {
        "seed": (int, 0, "generator seed"),
        "variant": (str, "full300", "full300 | base280 | microarray"),
        "out_dir": (str, None, "output directory (required)"),
        "overwrite": (_flag, False, "replace existing files"),
    },
    "calibrate": {
        "data": (str, None, "training CSV (required)"),
        "tau0": (float, 50.0, "base coefficient tau0"),
        "epsilon": (float, 0.0, "lower threshold for lambda"),
    },
    "run": {
        "data": (str, None, "training CSV (required)"),
        "method": (str, "ssvs", "ssvs | lasso"),
        "chains": (int, 1, "number of chains"),
        "seed": (int, 0, "base seed; chain i uses stream id i"),
        "jobs": (int, 1, "parallel chain processes"),
        "out_dir": (str, None, "output directory (required)"),
        "overwrite": (_flag, False, "replace existing files"),
        "burn_in": (int, None, "default 1000 (ssvs) or 5000 (lasso)"),
        "post_burn_in": (int, None, "default 4000 (ssvs) or 15000 (lasso)"),
        "mh_inner_iters": (int, 500, "inner Metropolis iterations per sweep"),
        "flip_count": (int, 1, "bits flipped per proposal"),
        "init_model_size": (int, 5, "initially active variables"),
        "tau0": (float, 50.0, "base coefficient for calibration"),
        "tau": (float, None, "explicit tau, skips calibration"),
        "lam": (float, None, "explicit lambda, default max(1/p, epsilon)"),
        "epsilon": (float, 0.0, "lower threshold for lambda"),
        "expected_model_size": (float, 5.0, "prior mean model size (sets pi)"),
        "pi": (float, None, "explicit constant inclusion probability"),
        "ig_shape": (float, 1.0, "variance prior shape a"),
        "ig_scale": (float, 1.0, "variance prior scale b"),
        "e": (float, 1.0, "delta prior shape (lasso)"),
        "f": (float, 1.0, "delta prior scale (lasso)"),
        "ci_level": (float, 0.95, "credible-interval level (lasso)"),
    },
    "report": {
        "runs_dir": (str, None, "directory of chain_*.json (required)"),
        "out_dir": (str, None, "output directory (default runs_dir)"),
        "mode": (str, "gap", "final selection rule: gap | fixed"),
        "threshold": (float, None, "count threshold for fixed mode"),
        "window": (int, GAP_WINDOW, "gap rule: sorted-count window"),
        "dominance": (float, GAP_DOMINANCE, "gap rule: dominance factor"),
        "lasso_rule": (str, "beta_magnitude",
                       "beta_magnitude | lambda_magnitude | credible_interval"),
        "lasso_threshold": (float, 0.85, "threshold for lasso rules"),
        "refit": (_flag, False, "refit selections and score on validation"),
        "train": (str, None, "training CSV (refit)"),
        "valid": (str, None, "validation CSV (refit)"),
        "refit_burn_in": (int, 500, "refit burn-in sweeps"),
        "refit_post_burn_in": (int, 2000, "refit post-burn-in sweeps"),
        "refit_tau0": (float, 50.0, "refit base coefficient"),
        "refit_seed": (int, 0, "refit chain seed"),
    },
}


def _read_config_file(path: str) -> dict:
    values = {}
    with open(path) as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{line_no}: expected key = value")
            key, _, value = line.partition("=")
            values[key.strip()] = value.strip()
    return values


def _resolve(command: str, args: argparse.Namespace) -> dict:
    schema = SCHEMAS[command]
    resolved = {key: default for key, (_, default, _) in schema.items()}
    if args.config:
        for key, raw in _read_config_file(args.config).items():
            if key not in schema:
                raise ConfigError(f"unknown config key for {command}: {key!r}")
            resolved[key] = schema[key][0](raw)
    for key in schema:
        override = getattr(args, key)
        if override is not None:
            resolved[key] = schema[key][0](override)
    return resolved


def _require(resolved: dict, *keys):
    for key in keys:
        if resolved[key] is None:
            raise ConfigError(f"missing required setting: {key}")


def _prepare_out_dir(resolved: dict, filenames):
    out_dir = resolved["out_dir"]
    os.makedirs(out_dir, exist_ok=True)
    if not resolved.get("overwrite", False):
        for name in filenames:
            path = os.path.join(out_dir, name)
            if os.path.exists(path):
                raise ConfigError(f"{path} exists; pass overwrite to replace it")
    return out_dir


def cmd_simulate(resolved: dict) -> int:
    _require(resolved, "out_dir")
    variant = resolved["variant"]
    if variant not in ("full300", "base280", "microarray"):
        raise ConfigError(f"unknown variant: {variant!r}")
    out_dir = _prepare_out_dir(resolved, ["train.csv", "valid.csv", "truth.json"])
    if variant == "microarray":
        train, valid = generate_microarray_analog(resolved["seed"])
        from .simdata import ANALOG_RELEVANT_VARS, ANALOG_SIGNAL_VARS

        truth = {
            "seed": resolved["seed"],
            "signal_variables": [train.variable_names[j] for j in ANALOG_SIGNAL_VARS],
            "relevant_variables": [train.variable_names[j] for j in ANALOG_RELEVANT_VARS],
            "class_balance_train": float(train.Y.mean()),
            "class_balance_valid": float(valid.Y.mean()),
        }
    else:
        spec = SimSpec(seed=resolved["seed"])
        train, valid, truth = generate_simulated(spec)
        if variant == "base280":
            train, valid = base_only(train), base_only(valid)
            truth["relevant_variables"] = truth["generating_variables"]
    dataio.save_dataset(os.path.join(out_dir, "train.csv"), train)
    dataio.save_dataset(os.path.join(out_dir, "valid.csv"), valid)
    dataio.save_json(os.path.join(out_dir, "truth.json"),
                     {"schema_version": dataio.SCHEMA_VERSION, **truth})
    print(f"wrote {out_dir}/train.csv, valid.csv, truth.json")
    print(f"trace tr(X^T X) = {train.trace_xtx:.6g} (train)")
    print(f"class balance: train {train.Y.mean():.3f}, valid {valid.Y.mean():.3f}")
    return 0


def cmd_calibrate(resolved: dict) -> int:
    _require(resolved, "data")
    data = dataio.load_dataset(resolved["data"])
    lam = default_lambda(data.p, resolved["epsilon"])
    trace = data.trace_xtx
    tau0 = resolved["tau0"]
    if abs(trace - lam * data.p * tau0) < 0.01 * trace:
        print(
            "warning: lambda p tau0 is within 1% of tr(X^T X); "
            "the calibrated tau is unstable, lower tau0",
            file=sys.stderr,
        )
    tau = calibrate_tau(tau0, trace, data.p, lam)
    print(f"p = {data.p}")
    print(f"tr(X^T X) = {trace:.6g}")
    print(f"lambda = {lam:.8g}")
    print(f"tau = {tau:.7g}")
    return 0


def _ssvs_chain_job(payload):
    data, config = payload
    try:
        return run_ssvs_chain(data, config)
    except ChainNumericError as exc:
        raise RuntimeError(f"chain {config.stream_id:02d}: {exc}") from exc


def _lasso_chain_job(payload):
    data, config = payload
    try:
        return run_lasso_chain(data, config)
    except ChainNumericError as exc:
        raise RuntimeError(f"chain {config.stream_id:02d}: {exc}") from exc


def cmd_run(resolved: dict) -> int:
    _require(resolved, "data", "out_dir")
    method = resolved["method"]
    if method not in ("ssvs", "lasso"):
        raise ConfigError(f"unknown method: {method!r}")
    chains = resolved["chains"]
    if chains < 1:
        raise ConfigError("chains must be at least 1")
    data = dataio.load_dataset(resolved["data"])
    burn = resolved["burn_in"]
    post = resolved["post_burn_in"]
    if burn is None:
        burn = 1000 if method == "ssvs" else 5000
    if post is None:
        post = 4000 if method == "ssvs" else 15000

    if method == "ssvs":
        lam = resolved["lam"]
        if lam is None:
            lam = default_lambda(data.p, resolved["epsilon"])
        if resolved["tau"] is not None:
            tau = resolved["tau"]
            tau0 = resolved["tau"]  # no calibration: echo the explicit value
        else:
            tau0 = resolved["tau0"]
            tau = calibrate_tau(tau0, data.trace_xtx, data.p, lam)
        pi_value = resolved["pi"]
        if pi_value is None:
            pi_value = resolved["expected_model_size"] / data.p
        hyper = RidgeHyper(
            tau0=tau0, tau=tau, lam=lam, pi=np.full(data.p, pi_value),
            ig_shape=resolved["ig_shape"], ig_scale=resolved["ig_scale"],
        )
        configs = [
            SsvsConfig(
                hyper=hyper, burn_in=burn, post_burn_in=post,
                mh_inner_iters=resolved["mh_inner_iters"],
                flip_count=resolved["flip_count"],
                init_model_size=resolved["init_model_size"],
                seed=resolved["seed"], stream_id=i,
            )
            for i in range(chains)
        ]
        job = _ssvs_chain_job
    else:
        hyper = LassoHyper(e=resolved["e"], f=resolved["f"],
                           ig_shape=resolved["ig_shape"],
                           ig_scale=resolved["ig_scale"])
        configs = [
            LassoConfig(hyper=hyper, burn_in=burn, post_burn_in=post,
                        ci_level=resolved["ci_level"],
                        seed=resolved["seed"], stream_id=i)
            for i in range(chains)
        ]
        job = _lasso_chain_job

    filenames = [f"chain_{i:02d}.json" for i in range(chains)]
    table_name = "counts.csv" if method == "ssvs" else "beta_mean.csv"
    out_dir = _prepare_out_dir(resolved, filenames + [table_name])

    payloads = [(data, config) for config in configs]
    try:
        if resolved["jobs"] > 1:
            with ProcessPoolExecutor(max_workers=resolved["jobs"]) as pool:
                outputs = list(pool.map(job, payloads))
        else:
            outputs = [job(payload) for payload in payloads]
    except Exception as exc:  # surface which chain died
        print(f"error: chain run failed: {exc}", file=sys.stderr)
        return 1

    for i, output in enumerate(outputs):
        doc = dataio.chain_payload(output)
        doc["variable_names"] = list(data.variable_names)
        dataio.save_json(os.path.join(out_dir, filenames[i]), doc)

    with open(os.path.join(out_dir, table_name), "w") as fh:
        cols = ",".join(f"chain_{i:02d}" for i in range(chains))
        fh.write(f"variable,{cols}\n")
        for j, name in enumerate(data.variable_names):
            if method == "ssvs":
                row = ",".join(str(int(o.selection_counts[j])) for o in outputs)
            else:
                row = ",".join(repr(float(o.beta_mean[j])) for o in outputs)
            fh.write(f"{name},{row}\n")
    print(f"wrote {chains} chain files to {out_dir}")
    return 0


def cmd_report(resolved: dict) -> int:
    _require(resolved, "runs_dir")
    runs_dir = resolved["runs_dir"]
    out_dir = resolved["out_dir"] or runs_dir
    os.makedirs(out_dir, exist_ok=True)
    chain_files = sorted(
        f for f in os.listdir(runs_dir)
        if f.startswith("chain_") and f.endswith(".json")
    )
    if not chain_files:
        raise ConfigError(f"no chain_*.json files in {runs_dir}")
    docs = [dataio.load_json(os.path.join(runs_dir, f)) for f in chain_files]
    methods = {doc["method"] for doc in docs}
    if len(methods) != 1:
        raise ConfigError(f"mixed methods in {runs_dir}: {sorted(methods)}")
    method = methods.pop()
    names = docs[0].get("variable_names")
    p = len(names) if names else len(docs[0].get(
        "selection_counts", docs[0].get("beta_mean")))
    if names is None:
        names = [f"V{j + 1}" for j in range(p)]

    selections = []
    for doc in docs:
        if method == "ssvs":
            counts = np.asarray(doc["selection_counts"], dtype=float)
            result = final_selection(
                counts, mode=resolved["mode"], threshold=resolved["threshold"],
                window=resolved["window"], dominance=resolved["dominance"],
            )
        else:
            from .blasso import LassoOutput

            output = LassoOutput(
                beta_mean=np.asarray(doc["beta_mean"]),
                lambda_mean=np.asarray(doc["lambda_mean"]),
                delta_mean=doc["delta_mean"],
                beta_ci=np.asarray(doc["beta_ci"]),
                ci_level=doc["ci_level"],
                sigma2_trace=np.zeros((0, 0)),
                u_trace=np.zeros((0, 0)),
                seed=doc["seed"],
                stream_id=doc["stream_id"],
                config=doc["config"],
            )
            rule = resolved["lasso_rule"]
            threshold = (
                None if rule == "credible_interval" else resolved["lasso_threshold"]
            )
            result = lasso_select(output, rule, threshold)
        selections.append(result)

    subsets = [sorted(result.selected) for result in selections]
    try:
        stability = cw_rel([set(s) for s in subsets], p)
    except ValueError:
        stability = None
        print("warning: cw_rel needs at least 2 runs; skipped", file=sys.stderr)

    occurrence = np.zeros(p, dtype=int)
    for subset in subsets:
        occurrence[subset] += 1

    table_path = os.path.join(out_dir, "selection_table.csv")
    with open(table_path, "w") as fh:
        fh.write("variable,n_selected_runs\n")
        for j in np.flatnonzero(occurrence):
            fh.write(f"{names[j]},{occurrence[j]}\n")

    report = {
        "schema_version": dataio.SCHEMA_VERSION,
        "method": method,
        "config": {k: v for k, v in resolved.items()},
        "chain_files": chain_files,
        "per_run_selections": [[names[j] for j in subset] for subset in subsets],
        "cw_rel": stability,
        "selection_counts_by_variable": {
            names[j]: int(occurrence[j]) for j in np.flatnonzero(occurrence)
        },
    }

    if resolved["refit"]:
        _require(resolved, "train", "valid")
        train = dataio.load_dataset(resolved["train"])
        valid = dataio.load_dataset(resolved["valid"])
        refit_cfg = RefitConfig(
            burn_in=resolved["refit_burn_in"],
            post_burn_in=resolved["refit_post_burn_in"],
            tau0=resolved["refit_tau0"],
            seed=resolved["refit_seed"],
        )
        rows = []
        for i, subset in enumerate(subsets):
            if not subset:
                rows.append((chain_files[i], [], None, None))
                continue
            sens, spec = refit_and_predict(train, subset, valid, refit_cfg)
            rows.append((chain_files[i], subset, sens, spec))
        refit_path = os.path.join(out_dir, "refit.csv")
        with open(refit_path, "w") as fh:
            fh.write("run,selected,sensitivity,specificity\n")
            for run, subset, sens, spec in rows:
                sel = ";".join(names[j] for j in subset)
                s1 = "" if sens is None else f"{sens:.4f}"
                s2 = "" if spec is None else f"{spec:.4f}"
                fh.write(f"{run},{sel},{s1},{s2}\n")
        report["refit"] = [
            {"run": run, "selected": [names[j] for j in subset],
             "sensitivity": sens, "specificity": spec}
            for run, subset, sens, spec in rows
        ]

    dataio.save_json(os.path.join(out_dir, "report.json"), report)
    if stability is not None:
        print(f"cw_rel = {stability:.4f} over {len(subsets)} runs")
    print(f"wrote {out_dir}/report.json and selection_table.csv")
    return 0


COMMANDS = {
    "simulate": cmd_simulate,
    "calibrate": cmd_calibrate,
    "run": cmd_run,
    "report": cmd_report,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ssvsridge",
        description="SSVS for probit mixed models with a ridge g-prior",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for command, schema in SCHEMAS.items():
        cp = sub.add_parser(command, help=f"{command} (see --help)")
        cp.add_argument("--config", default=None,
                        help="flat key=value config file; flags override it")
        for key, (conv, default, help_text) in schema.items():
            if conv is _flag:
                cp.add_argument(f"--{key}", nargs="?", const="true", default=None,
                                help=f"{help_text} (default {default})")
            else:
                cp.add_argument(f"--{key}", default=None,
                                help=f"{help_text} (default {default})")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](_resolve(args.command, args))
    except (ConfigError, CalibrationError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
