"""Command line front end: simulate | train | evaluate | cv.

Every option can be given either as a flag or as a `key = value` line
in a config file passed with --config; explicit flags win over config
keys, config keys win over built-in defaults.  The output directory
resolves in the order: --out-dir flag, out_dir config key, the
FRAILNET_OUTPUT_DIR environment variable, current directory.

Commands are pure functions of their inputs and seeds: rerunning with
the same arguments produces byte-identical files (no timestamps, full
float precision via repr).

Exit codes: 0 success, 2 usage or configuration error, 3 data format
error, 4 numeric or model error, 5 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import model as mdl
from .data import (
    Dataset,
    Scaling,
    Schema,
    apply_scaler,
    fit_scaler,
    load_csv,
    make_cv_plan,
    parse_key_values,
    write_csv,
)
from .errors import (
    CalibrationError,
    DataFormatError,
    DomainError,
    FrailnetError,
    HorizonError,
    NoComparablePairsError,
    NonFiniteError,
    SpecError,
)
from .frailty import FrailtySpec
from .metrics import evaluation_report, format_report, score_grid
from .model import TrainConfig
from .synth import DEFAULT_BETA, SynthConfig, generate, holdout_points

OUTPUT_DIR_ENV = "FRAILNET_OUTPUT_DIR"

EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4
EXIT_IO = 5


# ---------------------------------------------------------------------------
# option parsing: one table per command; flag values and config-file
# values go through the same string converters


def _int(s):
    return int(str(s).strip())


def _float(s):
    return float(str(s).strip())


def _str(s):
    return str(s).strip()


def _floats(s):
    if isinstance(s, (tuple, list)):
        return tuple(float(v) for v in s)
    return tuple(float(part) for part in str(s).split(",") if part.strip())


def _ints(s):
    if isinstance(s, (tuple, list)):
        return tuple(int(v) for v in s)
    return tuple(int(part) for part in str(s).split(",") if part.strip())


def _bool(s):
    if isinstance(s, bool):
        return s
    text = str(s).strip().lower()
    if text in ("1", "true", "yes", "on"):
        return True
    if text in ("0", "false", "no", "off"):
        return False
    raise SpecError(f"expected a boolean, got {s!r}")


_COMMON = [
    ("seed", _int, 0),
    ("out_dir", _str, None),
]

_DATA_INPUT = [
    ("data", _str, None),
    ("schema", _str, None),
    ("time_col", _str, "time"),
    ("event_col", _str, "event"),
    ("standardize", _bool, False),
]

_TRAINING = [
    ("scheme", _str, "pf"),
    ("family", _str, "gamma"),
    ("theta_init", _float, 0.5),
    ("alpha", _float, None),
    ("hidden", _ints, (32,)),
    ("epochs", _int, 100),
    ("batch_size", _int, 128),
    ("learning_rate", _float, 1e-4),
    ("weight_decay", _float, 0.0),
    ("dropout", _float, 0.0),
    ("quad_order", _int, 16),
    ("tau", _float, None),
]

_WINDOW = [
    ("window_lo", _float, None),
    ("window_hi", _float, None),
    ("grid_size", _int, 100),
]

OPTIONS = {
    "simulate": [
        ("n", _int, 1000),
        ("beta", _floats, DEFAULT_BETA),
        ("family", _str, "gamma"),
        ("theta", _float, 1.0),
        ("alpha", _float, None),
        ("target_censoring", _float, 0.40),
        ("holdout", _int, 100),
        *_COMMON,
    ],
    "train": [*_DATA_INPUT, *_TRAINING, *_COMMON],
    "evaluate": [
        ("model", _str, None),
        *_DATA_INPUT,
        *_WINDOW,
        *_COMMON,
    ],
    "cv": [
        *_DATA_INPUT,
        *_TRAINING,
        ("folds", _int, 5),
        ("repeats", _int, 10),
        ("holdout_fraction", _float, 0.20),
        *_WINDOW,
        *_COMMON,
    ],
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="frailnet",
        description="Neural frailty survival modeling: simulate, train, evaluate, cross-validate.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    help_text = {
        "simulate": "generate a synthetic censored dataset plus a ground-truth sidecar",
        "train": "fit a model on a CSV dataset and write model + trace files",
        "evaluate": "score a saved model on a test CSV (IBS, INBLL, C-index)",
        "cv": "repeated k-fold cross-validation with per-fold and summary reports",
    }
    for command, opts in OPTIONS.items():
        sp = sub.add_parser(command, help=help_text[command])
        sp.add_argument("--config", default=None, help="key = value config file")
        for name, conv, _default in opts:
            flag = "--" + name.replace("_", "-")
            if conv is _bool:
                sp.add_argument(flag, dest=name, action=argparse.BooleanOptionalAction, default=None)
            else:
                sp.add_argument(flag, dest=name, default=None, metavar=name.upper())
        sp.set_defaults(func=COMMANDS[command], opts=opts)
    return parser


def merge_options(args) -> dict:
    """Resolve each option from flag, then config file, then default."""
    file_kv = {}
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            file_kv = parse_key_values(fh.read())
    table = {name: (conv, default) for name, conv, default in args.opts}
    unknown = set(file_kv) - set(table)
    if unknown:
        raise SpecError(f"unknown config keys for {args.command}: {sorted(unknown)}")
    merged = {}
    for name, (conv, default) in table.items():
        flag_value = getattr(args, name)
        if flag_value is not None:
            merged[name] = conv(flag_value)
        elif name in file_kv:
            merged[name] = conv(file_kv[name])
        else:
            merged[name] = default
    return merged


def _resolve_out_dir(opt) -> Path:
    target = opt.get("out_dir") or os.environ.get(OUTPUT_DIR_ENV) or "."
    path = Path(target)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _require(opt, key):
    if opt.get(key) is None:
        raise SpecError(f"--{key.replace('_', '-')} (or config key {key}) is required")
    return opt[key]


def _write_json(path, obj) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, sort_keys=True, indent=1)
        fh.write("\n")


# ---------------------------------------------------------------------------
# dataset plumbing shared by train / evaluate / cv


def _headers_schema(path, time_col, event_col) -> Schema:
    """Schema fallback: every non-time, non-event header column is a
    continuous feature."""
    with open(path, newline="", encoding="utf-8") as fh:
        try:
            header = next(csv.reader(fh))
        except StopIteration:
            raise DataFormatError(f"{path}: empty file, header row required") from None
    features = [h.strip() for h in header if h.strip() not in (time_col, event_col)]
    if not features:
        raise DataFormatError(f"{path}: no feature columns besides {time_col}/{event_col}")
    return Schema(time_col=time_col, event_col=event_col, continuous=tuple(features))


def _load_dataset(opt, levels=None) -> Dataset:
    path = _require(opt, "data")
    if opt.get("schema"):
        schema = Schema.from_file(opt["schema"])
    else:
        schema = _headers_schema(path, opt["time_col"], opt["event_col"])
    return load_csv(path, schema, levels=levels)


def _identity_scaling(dataset) -> Scaling:
    return Scaling(means=np.zeros(dataset.dim), stds=np.ones(dataset.dim))


def _train_config(opt, seed, tau) -> TrainConfig:
    return TrainConfig(
        epochs=opt["epochs"],
        batch_size=opt["batch_size"],
        learning_rate=opt["learning_rate"],
        weight_decay=opt["weight_decay"],
        dropout_p=opt["dropout"],
        quad_order=opt["quad_order"],
        seed=seed,
        theta_init=opt["theta_init"],
        hidden=tuple(opt["hidden"]),
        frailty_family=opt["family"],
        frailty_alpha=opt["alpha"],
        tau=tau,
    )


def _surv_at_own_times(model, dataset) -> np.ndarray:
    # survival is held at its horizon value for observations past tau
    out = np.empty(len(dataset))
    for i, (t, z) in enumerate(zip(dataset.times, dataset.covariates)):
        out[i] = mdl.survival(model, min(float(t), model.tau), z)
    return out


def _evaluation(model, dataset, opt):
    t2 = opt["window_hi"]
    if t2 is None:
        t2 = float(np.quantile(dataset.times, 0.9))
    t2 = min(t2, model.tau)
    grid = score_grid(dataset.times, t1=opt["window_lo"], t2=t2, grid_size=opt["grid_size"])
    surv = mdl.survival_matrix(model, dataset.covariates, grid)
    at_event = _surv_at_own_times(model, dataset)
    return evaluation_report(surv, grid, dataset.times, dataset.events, at_event)


# ---------------------------------------------------------------------------
# commands


def cmd_simulate(opt) -> int:
    frailty = FrailtySpec(opt["family"], theta=opt["theta"], alpha=opt["alpha"])
    config = SynthConfig(
        n=opt["n"],
        beta=opt["beta"],
        frailty=frailty,
        target_censoring=opt["target_censoring"],
        seed=opt["seed"],
    )
    dataset, truth = generate(config)
    out = _resolve_out_dir(opt)
    data_path = out / "synthetic.csv"
    header = ["time", "event", *dataset.columns]
    rows = [
        [float(t), int(e), *(float(v) for v in z)]
        for t, e, z in zip(dataset.times, dataset.events, dataset.covariates)
    ]
    write_csv(data_path, header, rows)
    t_hold, z_hold, nu_hold = holdout_points(config, opt["holdout"])
    truth_path = out / "synthetic_truth.csv"
    write_csv(
        truth_path,
        ["t", *dataset.columns, "nu_true"],
        [
            [float(t), *(float(v) for v in z), float(nu)]
            for t, z, nu in zip(t_hold, z_hold, nu_hold)
        ],
    )
    print(f"rows = {len(dataset)}")
    print(f"censoring = {dataset.censoring_rate!r}")
    print(f"censor_shift = {truth.censor_shift!r}")
    print(f"data = {data_path}")
    print(f"truth = {truth_path}")
    return 0


def cmd_train(opt) -> int:
    dataset = _load_dataset(opt)
    scaling = fit_scaler(dataset) if opt["standardize"] else _identity_scaling(dataset)
    scaled = apply_scaler(dataset, scaling)
    config = _train_config(opt, seed=opt["seed"], tau=opt["tau"])
    model, trace = mdl.train(opt["scheme"], scaled, config)
    out = _resolve_out_dir(opt)
    model_path = out / "model.json"
    mdl.save_model(model, model_path, scaling=scaling.to_dict(dataset))
    trace_path = out / "trace.csv"
    write_csv(
        trace_path,
        ["epoch", "objective"],
        [[i, float(v)] for i, v in enumerate(trace)],
    )
    print(f"epochs = {trace.size}")
    print(f"final_objective = {float(trace[-1])!r}")
    print(f"theta = {model.frailty.theta!r}")
    print(f"model = {model_path}")
    print(f"trace = {trace_path}")
    return 0


def cmd_evaluate(opt) -> int:
    model, scaling_info = mdl.load_model(_require(opt, "model"))
    levels = (scaling_info or {}).get("levels") or None
    dataset = _load_dataset(opt, levels=levels)
    if scaling_info is not None:
        if list(dataset.columns) != list(scaling_info["columns"]):
            raise DataFormatError(
                f"test columns {dataset.columns} do not match model columns "
                f"{scaling_info['columns']}"
            )
        dataset = apply_scaler(dataset, Scaling.from_dict(scaling_info))
    report = _evaluation(model, dataset, opt)
    out = _resolve_out_dir(opt)
    _write_json(out / "report.json", report)
    text = format_report(report)
    (out / "report.txt").write_text(text, encoding="utf-8")
    print(text, end="")
    return 0


def cmd_cv(opt) -> int:
    dataset = _load_dataset(opt)
    plan = make_cv_plan(
        len(dataset),
        n_folds=opt["folds"],
        holdout_fraction=opt["holdout_fraction"],
        n_repeats=opt["repeats"],
        seed=opt["seed"],
    )
    tau = opt["tau"] if opt["tau"] is not None else float(np.max(dataset.times))
    # per-fold training seeds come from a spawn key disjoint from the
    # one the split plan uses internally
    fold_seeds = np.random.SeedSequence(opt["seed"], spawn_key=(1,)).spawn(
        opt["repeats"] * opt["folds"]
    )
    rows = []
    for r, repeat in enumerate(plan.splits):
        for f, split in enumerate(repeat):
            train_ds = dataset.subset(split.train)
            test_ds = dataset.subset(split.test)
            scaling = fit_scaler(train_ds) if opt["standardize"] else _identity_scaling(train_ds)
            seed = int(fold_seeds[r * opt["folds"] + f].generate_state(1, np.uint32)[0])
            config = _train_config(opt, seed=seed, tau=tau)
            model, _ = mdl.train(opt["scheme"], apply_scaler(train_ds, scaling), config)
            report = _evaluation(model, apply_scaler(test_ds, scaling), opt)
            rows.append(
                [
                    r,
                    f,
                    float(report["ibs"]["value"]),
                    float(report["inbll"]["value"]),
                    float(report["cindex"]["value"]),
                ]
            )
    out = _resolve_out_dir(opt)
    folds_path = out / "cv_folds.csv"
    write_csv(folds_path, ["repeat", "fold", "ibs", "inbll", "cindex"], rows)
    values = np.asarray([row[2:] for row in rows], dtype=np.float64)
    summary = {"n_rows": len(rows)}
    for j, name in enumerate(("ibs", "inbll", "cindex")):
        summary[name] = {
            "mean": float(np.mean(values[:, j])),
            # sample std across the repeat-by-fold runs
            "std": float(np.std(values[:, j], ddof=1)) if len(rows) > 1 else 0.0,
        }
    _write_json(out / "cv_summary.json", summary)
    lines = []
    for name in ("cindex", "ibs", "inbll"):
        lines.append(f"{name}.mean = {summary[name]['mean']!r}")
        lines.append(f"{name}.std = {summary[name]['std']!r}")
    text = "\n".join(sorted(lines)) + "\n"
    (out / "cv_summary.txt").write_text(text, encoding="utf-8")
    print(f"rows = {len(rows)}")
    print(text, end="")
    return 0


COMMANDS = {
    "simulate": cmd_simulate,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "cv": cmd_cv,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        opt = merge_options(args)
        return args.func(opt)
    except DataFormatError as err:
        print(f"error: data: {err}", file=sys.stderr)
        return EXIT_DATA
    except (
        NonFiniteError,
        CalibrationError,
        DomainError,
        HorizonError,
        NoComparablePairsError,
    ) as err:
        print(f"error: numeric: {err}", file=sys.stderr)
        return EXIT_NUMERIC
    except SpecError as err:
        print(f"error: usage: {err}", file=sys.stderr)
        return EXIT_USAGE
    except FrailnetError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as err:
        print(f"error: io: {err}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
