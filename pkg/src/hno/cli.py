"""``hno`` command-line tool: data generation, training, evaluation, demos.

Exit codes are a stable contract:

====  =====================================================
0     success
2     configuration or usage error
3     numerical failure at run time (divergence, solver)
4     verification failure (gradient check did not pass)
====  =====================================================

Configuration files are UTF-8 text with one ``key = value`` per line and
``#`` comments. Unknown keys are rejected so that a typo cannot silently fall
back to a default.
"""
from __future__ import annotations

import argparse
import csv
import inspect
import logging
import sys
import time
from dataclasses import fields
from pathlib import Path

import numpy as np

from . import analytic, datagen, operator, training

log = logging.getLogger("hno")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_VERIFY = 4

GENERATORS = {
    "burgers1d": datagen.make_burgers_dataset,
    "darcy2d": datagen.make_darcy_dataset,
    "lorenz63": datagen.make_lorenz_dataset,
}


class ConfigError(Exception):
    """Bad configuration or usage; maps to exit code 2."""


class NumericalFailure(Exception):
    """Run-time numerical failure; maps to exit code 3."""


# ---------------------------------------------------------------------------
# config files


def read_config(path) -> dict[str, str]:
    """Parse a ``key = value`` file into raw strings; duplicate keys are errors."""
    out: dict[str, str] = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except UnicodeDecodeError:
        raise ConfigError(f"config {path} is not valid UTF-8") from None
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"{path}:{lineno}: empty key")
        if key in out:
            raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def _parse_bool(text: str) -> bool:
    low = text.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_ints(text: str) -> tuple[int, ...]:
    return tuple(int(p) for p in text.replace("x", ",").split(",") if p.strip())


def _parse_value(key: str, text: str, kind):
    try:
        if kind is bool:
            return _parse_bool(text)
        if kind is int:
            return int(text)
        if kind is float:
            return float(text)
        if kind == "ints":
            vals = _parse_ints(text)
            if not vals:
                raise ValueError("empty list")
            return vals
        return text
    except ValueError as exc:
        raise ConfigError(f"config key {key!r}: cannot parse {text!r} ({exc})") from None


def typed_config(raw: dict[str, str], schema: dict[str, object], required=()) -> dict:
    """Check ``raw`` against ``schema`` (key -> type) and convert the values."""
    unknown = sorted(set(raw) - set(schema))
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
    missing = [k for k in required if k not in raw]
    if missing:
        raise ConfigError(f"missing required config key(s): {', '.join(missing)}")
    return {k: _parse_value(k, v, schema[k]) for k, v in raw.items()}


def _load(args, schema, required=()) -> dict:
    raw = read_config(args.config) if args.config else {}
    if args.seed is not None:
        raw["seed"] = str(args.seed)
    return typed_config(raw, schema, required)


def _generator_schema(problem: str) -> dict:
    schema = {}
    for name, p in inspect.signature(GENERATORS[problem]).parameters.items():
        schema[name] = type(p.default) if p.default is not inspect.Parameter.empty else float
    return schema


_TRAIN_FIELDS = {f.name: f.type for f in fields(training.TrainConfig)}
_TRAIN_TYPES = {"int": int, "float": float, "bool": bool, "str": str}


def _train_schema() -> dict:
    schema = {}
    for name, ann in _TRAIN_FIELDS.items():
        schema[name] = "ints" if name == "modes" else _TRAIN_TYPES[str(ann).split(" ")[0]]
    schema.update(dataset=str, problem=str, checkpoint=str, report=str)
    return schema


def train_config_from(cfg: dict) -> tuple[training.TrainConfig, str | None]:
    """Build a TrainConfig from parsed config values and the problem tag used."""
    kwargs = {k: v for k, v in cfg.items() if k in _TRAIN_FIELDS}
    if "modes" in kwargs and len(kwargs["modes"]) == 1:
        kwargs["modes"] = kwargs["modes"][0]
    problem = cfg.get("problem")
    try:
        if problem is not None:
            return training.desk_config(problem, **kwargs), problem
        return training.TrainConfig(**kwargs), None
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from None


GRADCHECK_SCHEMA = {
    "seed": int,
    "grid": "ints",
    "in_channels": int,
    "out_channels": int,
    "width": int,
    "n_layers": int,
    "modes": "ints",
    "proj_width": int,
    "activation": str,
    "layer_kind": str,
    "hilbert_axis": int,
    "coord_features": bool,
    "batch_size": int,
    "tolerance": float,
    "n_coords": int,
    "step": float,
}

GRADCHECK_DEFAULTS = dict(
    grid=(32,), in_channels=1, out_channels=1, width=6, n_layers=2, modes=(6,), proj_width=12,
    activation="gelu", layer_kind="hno", hilbert_axis=0, coord_features=True,
    batch_size=3, tolerance=1e-4, n_coords=200, step=1e-5,
)


# ---------------------------------------------------------------------------
# commands


def cmd_gen_data(args) -> int:
    cfg = _load(args, _generator_schema(args.problem), required=("seed",))
    if args.out is None:
        raise ConfigError("gen-data needs --out")
    for key in ("dt", "nu", "t_final"):
        if key in cfg and not cfg[key] > 0:
            raise ConfigError(f"config key {key!r} must be positive, got {cfg[key]}")
    if "n_samples" in cfg and cfg["n_samples"] < 1:
        raise ConfigError("config key 'n_samples' must be >= 1")
    t0 = time.perf_counter()
    try:
        pair = GENERATORS[args.problem](**cfg)
    except (datagen.StabilityError, datagen.SolverError, datagen.DivergenceError, FloatingPointError) as exc:
        raise NumericalFailure(f"generation failed: {exc}") from None
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    elapsed = time.perf_counter() - t0
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    datagen.write_dataset(pair, args.out)
    print(
        f"wrote {args.out}: problem={pair.problem} samples={len(pair.inputs)} "
        f"resolution={'x'.join(map(str, pair.resolution))} seed={cfg['seed']} time={elapsed:.2f}s"
    )
    return EXIT_OK


def _read_dataset(path) -> datagen.DatasetPair:
    try:
        return datagen.read_dataset(path)
    except OSError as exc:
        raise ConfigError(f"cannot read dataset {path}: {exc}") from None
    except datagen.DatasetFormatError as exc:
        raise ConfigError(f"bad dataset file {path}: {exc}") from None


def cmd_train(args) -> int:
    cfg = _load(args, _train_schema(), required=("seed", "dataset"))
    pair = _read_dataset(cfg["dataset"])
    if "problem" not in cfg and pair.problem in training.DESK_PRESETS:
        cfg["problem"] = pair.problem
    tcfg, _ = train_config_from(cfg)
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    ckpt = Path(cfg.get("checkpoint", out / f"{tcfg.layer_kind}_checkpoint.hnom"))
    report_path = Path(cfg.get("report", out / f"{tcfg.layer_kind}_report.csv"))
    try:
        params, report = training.train(pair, tcfg, log=log.info)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    report.to_csv(report_path)
    operator.save_checkpoint(params, ckpt)
    _write_rows(
        report_path.with_name(report_path.stem + "_summary.csv"),
        ["key", "value"],
        [
            ["layer_kind", tcfg.layer_kind],
            ["epochs_completed", len(report.train_loss)],
            ["best_epoch", report.best_epoch],
            ["final_val_rel_l2", f"{report.final_val_rel_l2:.17g}"],
            ["diverged", int(report.diverged)],
        ],
    )
    print(f"final validation relative L2 ({tcfg.layer_kind}): {report.final_val_rel_l2:.6e}")
    print(f"wrote {ckpt} and {report_path}")
    if report.diverged:
        print(f"training diverged after {len(report.train_loss)} epoch(s)", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


def _write_rows(path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def cmd_eval(args) -> int:
    try:
        params = operator.load_checkpoint(args.checkpoint)
    except OSError as exc:
        raise ConfigError(f"cannot read checkpoint {args.checkpoint}: {exc}") from None
    except operator.CheckpointFormatError as exc:
        raise ConfigError(f"bad checkpoint {args.checkpoint}: {exc}") from None
    pair = _read_dataset(args.dataset)
    cfg = params.config
    grid = pair.inputs.shape[1:-1]
    if args.resolution_transfer is not None:
        target = _parse_ints(args.resolution_transfer)
        if len(target) == 1:
            target = target * len(grid)
        if tuple(target) != tuple(grid):
            raise ConfigError(
                f"--resolution-transfer {'x'.join(map(str, target))} does not match dataset grid "
                f"{'x'.join(map(str, grid))}"
            )
        try:
            params = operator.at_resolution(params, target)
        except ValueError as exc:
            raise ConfigError(f"cannot transfer to {target}: {exc}") from None
    model_shape = (cfg.in_channels, tuple(params.config.grid), cfg.out_channels)
    data_shape = (pair.inputs.shape[-1], tuple(grid), pair.outputs.shape[-1])
    if model_shape != data_shape:
        raise ConfigError(
            f"checkpoint expects (in_channels, grid, out_channels) = {model_shape}, dataset has {data_shape}"
        )
    inputs, outputs = pair.inputs, pair.outputs
    if args.split is not None:
        if args.config is None:
            raise ConfigError("--split needs --config of the training run (for seed and val_fraction)")
        tcfg, _ = train_config_from(_load(args, _train_schema(), required=("seed",)))
        tr_idx, va_idx = training.split_indices(len(inputs), tcfg.val_fraction, tcfg.seed)
        idx = va_idx if args.split == "val" else tr_idx
        inputs, outputs = inputs[idx], outputs[idx]
    try:
        errs = training.evaluate(params, inputs, outputs)
    except training.DegenerateSampleError as exc:
        raise NumericalFailure(str(exc)) from None
    mean, median, worst = float(np.mean(errs)), float(np.median(errs)), float(np.max(errs))
    print(f"samples={len(errs)} mean={mean:.6e} median={median:.6e} max={worst:.6e}")
    if args.out:
        _write_rows(
            args.out,
            ["metric", "value"],
            [["n_samples", len(errs)], ["mean", f"{mean:.17g}"], ["median", f"{median:.17g}"], ["max", f"{worst:.17g}"]],
        )
    if args.dump_predictions:
        preds = np.concatenate(
            [operator.model_forward(inputs[i : i + 32], params) for i in range(0, len(inputs), 32)]
        )
        meta = dict(pair.metadata, predictions_of=str(args.checkpoint))
        datagen.write_dataset(datagen.DatasetPair(inputs, preds, pair.problem, meta), args.dump_predictions)
    return EXIT_OK


def read_signal_csv(path) -> tuple[np.ndarray, np.ndarray]:
    """Read a one-column (``v``) or two-column (``t, v``) CSV.

    A header is allowed on the first line only. Any other non-numeric row is a
    :class:`ConfigError` naming its line number.
    """
    ts, vs = [], []
    ncols = None
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    with fh:
        for lineno, row in enumerate(csv.reader(fh), 1):
            row = [c.strip() for c in row]
            if not row or all(c == "" for c in row):
                continue
            try:
                vals = [float(c) for c in row]
            except ValueError:
                if lineno == 1 and not ts:
                    continue
                raise ConfigError(f"{path}:{lineno}: non-numeric row {','.join(row)!r}") from None
            if ncols is None:
                ncols = len(vals)
                if ncols not in (1, 2):
                    raise ConfigError(f"{path}:{lineno}: expected 1 or 2 columns, got {ncols}")
            elif len(vals) != ncols:
                raise ConfigError(f"{path}:{lineno}: expected {ncols} columns, got {len(vals)}")
            if not all(np.isfinite(vals)):
                raise ConfigError(f"{path}:{lineno}: non-finite value")
            if ncols == 1:
                ts.append(float(len(vs)))
                vs.append(vals[0])
            else:
                ts.append(vals[0])
                vs.append(vals[1])
    if not vs:
        raise ConfigError(f"{path}: no samples")
    return np.asarray(ts), np.asarray(vs)


def cmd_hilbert_demo(args) -> int:
    t, v = read_signal_csv(args.input)
    sig = analytic.analytic_signal(v)
    env, phase = analytic.instantaneous_envelope_phase(sig)
    rows = (
        [f"{a:.17g}" for a in row]
        for row in zip(t, v, sig.imag_part, env, phase)
    )
    header = ["t", "v", "hilbert_v", "envelope", "phase"]
    if args.out:
        _write_rows(args.out, header, rows)
    else:
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    cfg = dict(GRADCHECK_DEFAULTS)
    cfg.update(_load(args, GRADCHECK_SCHEMA, required=("seed",)))
    try:
        mcfg = operator.ModelConfig(
            in_channels=cfg["in_channels"], out_channels=cfg["out_channels"], grid=cfg["grid"],
            width=cfg["width"], n_layers=cfg["n_layers"], modes=cfg["modes"],
            proj_width=cfg["proj_width"], activation=cfg["activation"], layer_kind=cfg["layer_kind"],
            hilbert_axis=cfg["hilbert_axis"], coord_features=cfg["coord_features"],
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    params, batch = training.gradcheck_problem(mcfg, seed=cfg["seed"], batch_size=cfg["batch_size"])
    rep = training.gradient_check(
        params, batch, cfg["tolerance"], n_coords=cfg["n_coords"], step=cfg["step"], seed=cfg["seed"]
    )
    status = "PASS" if rep.passed else "FAIL"
    print(
        f"gradcheck {status}: max relative deviation {rep.max_rel:.3e} "
        f"(mean {rep.mean_rel:.3e}, {rep.n_coords} coordinates, tolerance {rep.tolerance:.1e})"
    )
    if not rep.passed:
        print(f"worst coordinate: {rep.worst}", file=sys.stderr)
        return EXIT_VERIFY
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing


COMMON_DEFAULTS = {"config": None, "seed": None, "out": None, "verbose": False}


def _common_flags() -> argparse.ArgumentParser:
    # SUPPRESS keeps a subcommand's parser from overwriting a flag that was
    # given before the subcommand name, so the flags work on either side.
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=argparse.SUPPRESS, help="key = value configuration file")
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="overrides the config's seed")
    common.add_argument("--out", default=argparse.SUPPRESS, help="output file or directory")
    common.add_argument(
        "--verbose", "-v", action="store_true", default=argparse.SUPPRESS, help="log progress to stderr"
    )
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common_flags()
    parser = argparse.ArgumentParser(prog="hno", description=__doc__.splitlines()[0], parents=[common])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", parents=[common], help="generate a benchmark dataset")
    p.add_argument("problem", choices=sorted(GENERATORS))
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train", parents=[common], help="train an FNO or HNO model")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", parents=[common], help="evaluate a checkpoint on a dataset")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--split", choices=("train", "val"), help="restrict to a split of the training run")
    p.add_argument("--dump-predictions", metavar="PATH", help="write predictions as a dataset file")
    p.add_argument("--resolution-transfer", metavar="N2", help="evaluate on a grid other than the training one")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("hilbert-demo", parents=[common], help="analytic-signal decomposition of a CSV signal")
    p.add_argument("input", help="CSV with columns v or t,v")
    p.set_defaults(func=cmd_hilbert_demo)

    p = sub.add_parser("gradcheck", parents=[common], help="finite-difference check of the reverse pass")
    p.set_defaults(func=cmd_gradcheck)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors, matching the config exit code
        return int(exc.code or 0)
    for key, value in COMMON_DEFAULTS.items():
        if not hasattr(args, key):
            setattr(args, key, value)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(asctime)s %(levelname)s %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
