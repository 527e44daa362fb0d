"""Command-line entry point.

    dwtrec train --config run.cfg [--dataset FILE] [--out DIR] [--seed S]
    dwtrec eval --checkpoint model.ckpt --dataset FILE [--k 5,10,20]
    dwtrec decompose SIGNAL --wavelet sym6 --levels 3 [--reconstruct]
    dwtrec spectrum --checkpoint model.ckpt
    dwtrec stats --dataset FILE
    dwtrec params --config run.cfg | --dataset FILE

Exit codes: 0 success, 2 usage or configuration problem, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from . import wavelets
from .data import leave_one_out, load_dataset
from .errors import CheckpointError, ConfigError, DivergenceError, DWTRecError
from .metrics import DEFAULT_KS
from .model import ModelConfig, filter_spectrum, param_count
from .training import TrainConfig, evaluate, load_checkpoint, save_checkpoint, train

log = logging.getLogger("dwtrec")

DEFAULT_SEED = 42
CHECKPOINT_NAME = "model.ckpt"
EPOCH_LOG_NAME = "epochs.csv"
TEST_METRICS_NAME = "test_metrics.csv"

_MODEL_KEYS = {f.name: f.type for f in fields(ModelConfig) if f.name != "num_items"}
_TRAIN_KEYS = {f.name: f.type for f in fields(TrainConfig) if f.name != "eval_batch_size"}


@dataclass
class RunConfig:
    model: dict = field(default_factory=dict)
    train: dict = field(default_factory=dict)
    dataset: str | None = None
    out: str | None = None
    num_items: int | None = None

    def model_config(self, num_items: int) -> ModelConfig:
        cfg = ModelConfig(num_items=num_items, **self.model)
        cfg.validate()
        return cfg

    def train_config(self) -> TrainConfig:
        tcfg = TrainConfig(**self.train)
        try:
            tcfg.validate()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        return tcfg


def _parse_bool(text: str) -> bool:
    low = text.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_ks(text: str) -> tuple:
    ks = tuple(int(t) for t in text.replace(",", " ").split())
    if not ks or min(ks) < 1:
        raise ValueError(f"bad K list {text!r}")
    return ks


_PARSERS = {"int": int, "float": float, "str": str, "bool": _parse_bool, "tuple": _parse_ks}


def parse_config(text: str, source: str = "<config>") -> RunConfig:
    """Flat ``key = value`` lines; ``#`` starts a comment. Unknown keys are errors."""
    run = RunConfig()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = (part.strip() for part in line.partition("="))
        if not sep or not key:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        try:
            if key in _MODEL_KEYS:
                run.model[key] = _PARSERS[_MODEL_KEYS[key]](value)
            elif key in _TRAIN_KEYS:
                run.train[key] = _PARSERS[_TRAIN_KEYS[key]](value)
            elif key in ("dataset", "out"):
                setattr(run, key, value)
            elif key == "num_items":
                run.num_items = int(value)
            else:
                raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"{source}:{lineno}: bad value for {key}: {exc}") from exc
    return run


def read_config(path) -> RunConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text, str(path))


def metrics_csv(result, ks) -> str:
    lines = ["metric,K,value"]
    lines += [f"HR,{k},{result.hr[k]!r}" for k in ks]
    lines += [f"NDCG,{k},{result.ndcg[k]!r}" for k in ks]
    return "\n".join(lines) + "\n"


def _emit(text: str, out) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _require(value, what):
    if not value:
        raise ConfigError(f"missing {what}")
    return value


def _dataset(path):
    path = Path(_require(path, "dataset path"))
    if not path.is_file():
        raise ConfigError(f"dataset file not found: {path}")
    return load_dataset(path)


# -- commands -------------------------------------------------------------------

def cmd_train(args) -> int:
    run = read_config(_require(args.config, "--config"))
    if args.dataset:
        run.dataset = args.dataset
    if args.out:
        run.out = args.out
    if args.seed is not None:
        run.train["seed"] = args.seed
    run.train.setdefault("seed", DEFAULT_SEED)
    if args.k:
        run.train["eval_ks"] = _parse_ks(args.k)
    out = Path(_require(run.out, "output directory (--out or 'out =')"))
    ds = _dataset(run.dataset)
    cfg = run.model_config(ds.num_items)
    tcfg = run.train_config()
    out.mkdir(parents=True, exist_ok=True)
    log.info("training on %d users, %d items -> %s", ds.num_users, ds.num_items, out)
    with open(out / EPOCH_LOG_NAME, "w", encoding="utf-8") as fh:
        fh.write("epoch,train_loss,valid_hr10,valid_ndcg10,seconds\n")

        def on_epoch(record):
            fh.write(record.csv_row() + "\n")
            fh.flush()

        result = train(cfg, ds, tcfg, on_epoch=on_epoch)
    save_checkpoint(result.params, cfg, out / CHECKPOINT_NAME)
    (out / TEST_METRICS_NAME).write_text(metrics_csv(result.test, tcfg.eval_ks), encoding="utf-8")
    log.info("best epoch %d; test %s", result.best_epoch,
             ", ".join(f"HR@{k}={result.test.hr[k]:.4f}" for k in tcfg.eval_ks))
    return 0


def cmd_eval(args) -> int:
    ckpt = Path(_require(args.checkpoint, "--checkpoint"))
    if not ckpt.is_file():
        raise ConfigError(f"checkpoint not found: {ckpt}")
    params, cfg = load_checkpoint(ckpt)
    ds = _dataset(args.dataset)
    if ds.num_items != cfg.num_items:
        raise ConfigError(f"checkpoint catalog {cfg.num_items} != dataset catalog {ds.num_items}")
    ks = _parse_ks(args.k) if args.k else DEFAULT_KS
    result = evaluate(params, cfg, leave_one_out(ds), "test", ks)
    _emit(metrics_csv(result, ks), args.out)
    return 0


def read_signal(path) -> np.ndarray:
    values = []
    try:
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    values.append(float(line))
                except ValueError:
                    raise ConfigError(f"{path}:{lineno}: not a number: {line!r}") from None
    except OSError as exc:
        raise ConfigError(f"cannot read signal {path}: {exc}") from exc
    return np.array(values)


def cmd_decompose(args) -> int:
    x = read_signal(args.signal)
    fb = wavelets.load_filter_bank(args.wavelet)
    pyramid = wavelets.mwd(x, fb, args.levels)
    lines = ["level,index,value"]
    lines += [f"A{pyramid.gamma},{i},{v!r}" for i, v in enumerate(pyramid.approx.tolist())]
    for level in range(pyramid.gamma, 0, -1):
        lines += [f"D{level},{i},{v!r}" for i, v in enumerate(pyramid.detail(level).tolist())]
    if args.reconstruct:
        restored = wavelets.reconstruct(pyramid, fb)
        lines += [f"R,{i},{v!r}" for i, v in enumerate(restored.tolist())]
    _emit("\n".join(lines) + "\n", args.out)
    return 0


def cmd_spectrum(args) -> int:
    params, cfg = load_checkpoint(_require(args.checkpoint, "--checkpoint"))
    lines = ["layer,level,position,band_low,band_high,mean_abs_weight"]
    lines += [",".join(repr(v) if isinstance(v, float) else str(v) for v in row)
              for row in filter_spectrum(params, cfg)]
    _emit("\n".join(lines) + "\n", args.out)
    return 0


def cmd_stats(args) -> int:
    s = _dataset(args.dataset).stats()
    _emit(f"users,items,sparsity,avg_length\n{s['users']},{s['items']},"
          f"{s['sparsity']!r},{s['avg_length']!r}\n", args.out)
    return 0


def cmd_params(args) -> int:
    run = read_config(args.config) if args.config else RunConfig()
    if args.wavelet:
        run.model["wavelet"] = args.wavelet
    if args.levels:
        run.model["gamma"] = args.levels
    if args.dataset or run.dataset:
        num_items = _dataset(args.dataset or run.dataset).num_items
    elif run.num_items is not None:
        num_items = run.num_items
    else:
        raise ConfigError("params needs the catalog size: --dataset, 'dataset =' or 'num_items ='")
    counts = param_count(run.model_config(num_items))
    _emit("component,count\n" + "".join(f"{k},{v}\n" for k, v in counts.items()), args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dwtrec", description="Wavelet-filter sequential recommender")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model and write checkpoint, epoch log and test metrics")
    p.add_argument("--config", required=True)
    p.add_argument("--dataset")
    p.add_argument("--out")
    p.add_argument("--seed", type=int)
    p.add_argument("--k", help="comma-separated cutoffs for the test report")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="full-catalog test metrics of a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--k", help="comma-separated cutoffs (default 5,10,20)")
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("decompose", help="multi-level DWT of a one-number-per-line signal")
    p.add_argument("signal")
    p.add_argument("--wavelet", default="sym6", choices=wavelets.SUPPORTED_WAVELETS)
    p.add_argument("--levels", type=int, default=3)
    p.add_argument("--reconstruct", action="store_true", help="also emit the reconstructed signal as level R")
    p.add_argument("--out")
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("spectrum", help="mean |weight| of every learned filter position")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("stats", help="dataset statistics")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("params", help="parameter counts for a configuration")
    p.add_argument("--config")
    p.add_argument("--dataset")
    p.add_argument("--wavelet", choices=wavelets.SUPPORTED_WAVELETS)
    p.add_argument("--levels", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_params)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except DivergenceError as exc:
        print(f"dwtrec: {exc}", file=sys.stderr)
        return 3
    except (DWTRecError, CheckpointError, ConfigError) as exc:
        print(f"dwtrec: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
