"""Command-line surface: simulate, fit, predict, evaluate, benchmark.

Parameters come from a flat ``key = value`` config file with flag overrides;
every run echoes the effective configuration into its output directory, and
all randomness flows from the single seed through named substreams.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path
from typing import Optional

import numpy as np

from . import evaluation, io, simulate
from .evaluation import METHODS, as_policy, fit_method
from .indirect import IndirectModel, extract_lower_bound
from .types import (
    LOWER,
    TWO_SIDED,
    UPPER,
    Dataset,
    ValidationError,
    fit_threshold,
)
from .weights import compute_weights, fit_propensity

_TRUE_STRINGS = {"1", "true", "yes", "on"}
_FALSE_STRINGS = {"0", "false", "no", "off"}


def parse_config_file(path: str) -> dict[str, str]:
    """Flat ``key = value`` lines; '#' starts a comment; blanks ignored."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValidationError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def _to_bool(value: str) -> bool:
    low = value.lower()
    if low in _TRUE_STRINGS:
        return True
    if low in _FALSE_STRINGS:
        return False
    raise ValidationError(f"expected a boolean, got {value!r}")


class RunConfig:
    """Defaults overlaid with config-file values and ``--set`` overrides."""

    def __init__(self, defaults: dict[str, str], args: argparse.Namespace):
        self.values = dict(defaults)
        if getattr(args, "config", None):
            file_values = parse_config_file(args.config)
            unknown = set(file_values) - set(defaults)
            if unknown:
                raise ValidationError(f"unknown config keys: {sorted(unknown)}")
            self.values.update(file_values)
        for item in getattr(args, "set", None) or []:
            if "=" not in item:
                raise ValidationError(f"--set expects key=value, got {item!r}")
            key, value = item.split("=", 1)
            key = key.strip()
            if key not in defaults:
                raise ValidationError(f"unknown config key {key!r}")
            self.values[key] = value.strip()
        if getattr(args, "seed", None) is not None:
            self.values["seed"] = str(args.seed)
        if getattr(args, "jobs", None) is not None:
            self.values["jobs"] = str(args.jobs)

    def str(self, key: str) -> str:
        return self.values[key]

    def int(self, key: str) -> int:
        return int(self.values[key])

    def float(self, key: str) -> float:
        return float(self.values[key])

    def bool(self, key: str) -> bool:
        return _to_bool(self.values[key])

    def optional_float(self, key: str) -> Optional[float]:
        raw = self.values[key].strip()
        return None if raw in ("", "none", "default") else float(raw)

    def echo(self, out_dir: Path) -> None:
        lines = [f"{k} = {v}" for k, v in sorted(self.values.items())]
        (out_dir / "config_used.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")


def _out_dir(args: argparse.Namespace) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _dose_bounds_from(config: RunConfig) -> Optional[tuple[float, float]]:
    lo = config.optional_float("dose_min")
    hi = config.optional_float("dose_max")
    if lo is None and hi is None:
        return None
    if lo is None or hi is None:
        raise ValidationError("set both dose_min and dose_max, or neither")
    return (lo, hi)


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------

SIMULATE_DEFAULTS = {
    "scenario": "s1",
    "n": "400",
    "test_n": "10000",
    "d": "10",
    "sigma2": "2.25",
    "confounded": "true",
    "dose_spread": "0.5",
    "dose_spread_is_variance": "true",
    "seed": "0",
}


def cmd_simulate(args: argparse.Namespace) -> int:
    config = RunConfig(SIMULATE_DEFAULTS, args)
    out = _out_dir(args)
    spec = simulate.ScenarioSpec(
        scenario=config.str("scenario"),
        n=config.int("n"),
        d=config.int("d"),
        sigma2=config.float("sigma2"),
        confounded=config.bool("confounded"),
        seed=config.int("seed"),
        dose_spread=config.float("dose_spread"),
        dose_spread_is_variance=config.bool("dose_spread_is_variance"),
    )
    from .rng import child_seed

    train = simulate.generate(replace(spec, seed=child_seed(spec.seed, "train", 0)))
    test = simulate.generate(
        replace(spec, n=config.int("test_n"), seed=child_seed(spec.seed, "test", 0))
    )
    io.write_dataset_csv(train, out / "train.csv")
    io.write_dataset_csv(test, out / "test.csv")
    (out / "dgp.json").write_text(simulate.spec_to_json(spec), encoding="utf-8")
    config.echo(out)
    print(f"wrote {out / 'train.csv'} ({train.n} rows), {out / 'test.csv'} ({test.n} rows)")
    return 0


# ---------------------------------------------------------------------------
# fit
# ---------------------------------------------------------------------------

FIT_DEFAULTS = {
    "method": "lo-linear",
    "side": "lower",
    "alpha": "0.5",
    "epsilon": "default",
    "weights": "",
    "dgp": "",
    "weight_cap": "100",
    "weight_normalize": "true",
    "folds": "5",
    "dose_min": "",
    "dose_max": "",
    "seed": "0",
}


def _attach_weights(data: Dataset, config: RunConfig) -> Dataset:
    source = config.str("weights").strip().lower()
    if source == "file":
        if data.weights is None:
            raise ValidationError("weights=file but the CSV has no 'w' column")
        return data
    if source == "fit":
        model = fit_propensity(
            data, cap=config.float("weight_cap"), normalize=config.bool("weight_normalize")
        )
        return data.with_weights(compute_weights(model, data))
    if source == "true":
        dgp_path = config.str("dgp").strip()
        if not dgp_path:
            raise ValidationError("weights=true requires dgp = <sidecar.json> (simulation only)")
        spec = simulate.spec_from_json(Path(dgp_path).read_text(encoding="utf-8"))
        w = simulate.true_inverse_density(spec, data.a, data.x)
        if config.bool("weight_normalize"):
            w = w / w.mean()
        return data.with_weights(w)
    if source == "":
        raise ValidationError(
            "no weight source: set weights = fit | true | file (observational data "
            "needs inverse-density weights before fitting)"
        )
    raise ValidationError(f"unknown weight source {source!r}")


def cmd_fit(args: argparse.Namespace) -> int:
    config = RunConfig(FIT_DEFAULTS, args)
    out = _out_dir(args)
    data = io.read_dataset_csv(args.data, _dose_bounds_from(config))
    data = _attach_weights(data, config)
    threshold = fit_threshold(data.x, data.y)
    side = {"lower": LOWER, "upper": UPPER, "two-sided": TWO_SIDED}[config.str("side")]
    model, cv_rows = fit_method(
        config.str("method"),
        data,
        threshold,
        alpha=config.float("alpha"),
        seed=config.int("seed"),
        side=side,
        epsilon=config.optional_float("epsilon"),
        folds=config.int("folds"),
    )
    io.save_any_model(model, out / "model.json")
    lines = ["index,tie_key,mean_risk"]
    lines += [f"{r.index},{r.tie_key!r},{r.mean_risk!r}" for r in cv_rows]
    (out / "cv_report.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    config.echo(out)
    print(f"wrote {out / 'model.json'} and {out / 'cv_report.csv'}")
    return 0


# ---------------------------------------------------------------------------
# predict
# ---------------------------------------------------------------------------

PREDICT_DEFAULTS = {"dose_min": "", "dose_max": ""}


def _read_covariates(path: str) -> np.ndarray:
    """Covariate matrix from either a bare x1..xd file or a full dataset CSV."""
    import csv as _csv

    with open(path, newline="", encoding="utf-8") as fh:
        reader = _csv.reader(fh)
        header = [h.strip() for h in next(reader)]
        rows = [row for row in reader if row]
    d = 0
    while d < len(header) and header[d] == f"x{d + 1}":
        d += 1
    if d == 0:
        raise ValidationError(f"{path}: expected covariate columns x1..xd")
    values = np.array([[float(v) for v in row[:d]] for row in rows], dtype=float)
    return values


def cmd_predict(args: argparse.Namespace) -> int:
    config = RunConfig(PREDICT_DEFAULTS, args)
    out = _out_dir(args)
    model = io.load_any_model(args.model)
    x = _read_covariates(args.data)
    if isinstance(model, IndirectModel):
        lower = extract_lower_bound(model, x)
        upper = np.full(x.shape[0], model.dose_bounds[1])
    else:
        expected = None
        for exp in (model.lower, model.upper):
            if exp is not None:
                expected = exp.train_x.shape[1]
        if expected is not None and x.shape[1] != expected:
            raise ValidationError(
                f"covariate dimension {x.shape[1]} does not match the model ({expected})"
            )
        lower, upper = model.predict_bounds(x)
    lines = ["lower,upper"]
    lines += [f"{lo!r},{hi!r}" for lo, hi in zip(lower, upper)]
    (out / "bounds.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    config.echo(out)
    print(f"wrote {out / 'bounds.csv'} ({x.shape[0]} rows)")
    return 0


# ---------------------------------------------------------------------------
# evaluate
# ---------------------------------------------------------------------------

EVALUATE_DEFAULTS = {
    "weights": "file",
    "dgp": "",
    "epsilon": "",
    "weight_cap": "100",
    "weight_normalize": "true",
    "dose_min": "",
    "dose_max": "",
    "seed": "0",
}


def cmd_evaluate(args: argparse.Namespace) -> int:
    config = RunConfig(EVALUATE_DEFAULTS, args)
    out = _out_dir(args)
    model = io.load_any_model(args.model)
    data = io.read_dataset_csv(args.data, _dose_bounds_from(config))
    data = _attach_weights(data, config)
    if isinstance(model, IndirectModel):
        threshold = fit_threshold(data.x, data.y)
        policy = as_policy(model, threshold, model.alpha)
    else:
        policy = model
    report = evaluation.empirical_risk(policy, data, eps=config.optional_float("epsilon"))
    payload = {
        "zero_one_risk": report.zero_one_risk,
        "surrogate_risk": report.surrogate_risk,
        "n_test": report.n_test,
        "false_positive_mass": report.false_positive_mass,
        "false_negative_mass": report.false_negative_mass,
        "alpha": report.alpha,
    }
    (out / "risk.json").write_text(json.dumps(payload, indent=2), encoding="utf-8")
    config.echo(out)
    print(f"zero_one_risk = {report.zero_one_risk!r} (n={report.n_test})")
    return 0


# ---------------------------------------------------------------------------
# benchmark
# ---------------------------------------------------------------------------

BENCHMARK_DEFAULTS = {
    "scenarios": "s1",
    "sigma2s": "2.25",
    "ns": "400",
    "ds": "10",
    "methods": "lo-linear,lo-gaussian,indirect-logistic",
    "replications": "20",
    "test_n": "10000",
    "confounded": "true",
    "alpha": "0.5",
    "epsilon": "default",
    "folds": "5",
    "seed": "0",
    "jobs": "1",
}


def cmd_benchmark(args: argparse.Namespace) -> int:
    config = RunConfig(BENCHMARK_DEFAULTS, args)
    out = _out_dir(args)
    methods = [m.strip() for m in config.str("methods").split(",") if m.strip()]
    for m in methods:
        if m not in METHODS:
            raise ValidationError(f"unknown method {m!r}; choose from {METHODS}")
    all_rows = []
    any_failures = 0
    for scenario in [s.strip() for s in config.str("scenarios").split(",") if s.strip()]:
        for sigma2 in [float(v) for v in config.str("sigma2s").split(",") if v.strip()]:
            for n in [int(v) for v in config.str("ns").split(",") if v.strip()]:
                for d in [int(v) for v in config.str("ds").split(",") if v.strip()]:
                    spec = simulate.ScenarioSpec(
                        scenario=scenario,
                        n=n,
                        d=d,
                        sigma2=sigma2,
                        confounded=config.bool("confounded"),
                        seed=config.int("seed"),
                    )
                    rows, _ = evaluation.benchmark(
                        spec,
                        methods=methods,
                        replications=config.int("replications"),
                        test_n=config.int("test_n"),
                        alpha=config.float("alpha"),
                        epsilon=config.optional_float("epsilon"),
                        folds=config.int("folds"),
                        jobs=config.int("jobs"),
                    )
                    all_rows.extend(rows)
                    any_failures += sum(r.n_fail for r in rows)
    (out / "results.csv").write_text(evaluation.rows_to_csv(all_rows), encoding="utf-8")
    (out / "table.txt").write_text(evaluation.rows_to_table(all_rows), encoding="utf-8")
    config.echo(out)
    sys.stdout.write(evaluation.rows_to_table(all_rows))
    if any_failures:
        print(f"note: {any_failures} replication failures recorded in results.csv")
    return 0


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="doseinterval",
        description="Learn and evaluate individualized dose-interval policies.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser, jobs: bool = False) -> None:
        p.add_argument("--config", help="flat key = value configuration file")
        p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one key")
        p.add_argument("--seed", type=int, help="master seed override")
        p.add_argument("--out", required=True, help="output directory")
        if jobs:
            p.add_argument("--jobs", type=int, help="worker parallelism (default 1)")

    p = sub.add_parser("simulate", help="write synthetic train/test data plus a DGP sidecar")
    common(p)
    p.set_defaults(run=cmd_simulate)

    p = sub.add_parser("fit", help="cross-validate and fit one method on a dataset CSV")
    common(p)
    p.add_argument("--data", required=True, help="training dataset CSV")
    p.set_defaults(run=cmd_fit)

    p = sub.add_parser("predict", help="recommend dose bounds for covariate rows")
    common(p)
    p.add_argument("--model", required=True, help="model file from fit")
    p.add_argument("--data", required=True, help="covariate CSV (x1..xd, extra columns ignored)")
    p.set_defaults(run=cmd_predict)

    p = sub.add_parser("evaluate", help="empirical risk of a model file on a test CSV")
    common(p)
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.set_defaults(run=cmd_evaluate)

    p = sub.add_parser("benchmark", help="replicate the simulation comparison")
    common(p, jobs=True)
    p.set_defaults(run=cmd_benchmark)
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.run(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
