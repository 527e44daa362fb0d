"""Adam, the training loop with validation early stopping, and checkpoints."""
from __future__ import annotations

import copy
import logging
import math
import time
from dataclasses import dataclass, field, fields

import numpy as np

from .data import InteractionDataset, batches, eval_inputs, leave_one_out, training_examples
from .errors import CheckpointError, DivergenceError, EmptyDataset, ShapeMismatch
from .metrics import DEFAULT_KS, EvalResult, ranks
from .model import ModelConfig, init_params, loss_and_grads, model_forward, param_shapes

log = logging.getLogger(__name__)

CHECKPOINT_HEADER = "dwtrec-ckpt v1"
EPOCH_LOG_COLUMNS = ("epoch", "train_loss", "valid_hr10", "valid_ndcg10", "seconds")


@dataclass
class TrainConfig:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    batch_size: int = 256
    max_epochs: int = 200
    patience: int = 10
    seed: int = 42
    eval_ks: tuple = DEFAULT_KS
    # every prefix of a train sequence becomes an example, not just the last
    augment: bool = False
    # wall-clock seconds make the epoch log non-reproducible, so they are opt-in
    log_seconds: bool = False
    eval_batch_size: int = 256

    def validate(self) -> None:
        if not self.lr >= 0:
            raise ValueError(f"lr must be non-negative, got {self.lr}")
        if self.patience < 1:
            raise ValueError("patience must be >= 1")
        if self.batch_size < 1 or self.eval_batch_size < 1:
            raise ValueError("batch sizes must be positive")
        if self.max_epochs < 1:
            raise ValueError("max_epochs must be >= 1")


@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)

    @classmethod
    def from_config(cls, tcfg: TrainConfig) -> "AdamState":
        return cls(lr=tcfg.lr, beta1=tcfg.beta1, beta2=tcfg.beta2, eps=tcfg.eps)


def adam_step(params: dict, grads: dict, state: AdamState) -> None:
    """One bias-corrected Adam update, in place on ``params`` and ``state``."""
    for name, g in grads.items():
        if name not in params:
            raise ShapeMismatch(f"gradient for unknown parameter {name!r}")
        if np.shape(g) != params[name].shape:
            raise ShapeMismatch(f"{name}: gradient {np.shape(g)} vs parameter {params[name].shape}")
    state.t += 1
    bc1 = 1.0 - state.beta1**state.t
    bc2 = 1.0 - state.beta2**state.t
    for name, g in grads.items():
        if name not in state.m:
            state.m[name] = np.zeros_like(params[name])
            state.v[name] = np.zeros_like(params[name])
        m, v = state.m[name], state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        params[name] -= state.lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)


def evaluate(params, cfg: ModelConfig, split, which: str, ks=DEFAULT_KS, batch_size: int = 256) -> EvalResult:
    seqs, labels = eval_inputs(split, cfg.N, which)
    out = []
    for start in range(0, len(labels), batch_size):
        scores, _ = model_forward(seqs[start:start + batch_size], params, cfg, training=False)
        out.append(ranks(scores, labels[start:start + batch_size]))
    return EvalResult.from_ranks(np.concatenate(out), ks)


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    valid_hr10: float
    valid_ndcg10: float
    seconds: float | None = None

    def csv_row(self) -> str:
        secs = "" if self.seconds is None else f"{self.seconds:.3f}"
        return f"{self.epoch},{self.train_loss!r},{self.valid_hr10!r},{self.valid_ndcg10!r},{secs}"


@dataclass
class TrainResult:
    params: dict
    cfg: ModelConfig
    history: list
    best_epoch: int
    best_valid: EvalResult
    test: EvalResult

    def epoch_log(self) -> str:
        lines = [",".join(EPOCH_LOG_COLUMNS)] + [r.csv_row() for r in self.history]
        return "\n".join(lines) + "\n"


def train(cfg: ModelConfig, ds: InteractionDataset, tcfg: TrainConfig, on_epoch=None) -> TrainResult:
    """Fit on the leave-one-out train prefixes, select on valid NDCG@10.

    ``on_epoch`` is called with every ``EpochRecord`` as it is produced.
    """
    cfg.validate()
    tcfg.validate()
    if cfg.num_items != ds.num_items:
        raise ValueError(f"model catalog {cfg.num_items} != dataset catalog {ds.num_items}")
    init_seq, shuffle_seq, dropout_seq = np.random.SeedSequence(tcfg.seed).spawn(3)
    params = init_params(cfg, np.random.default_rng(init_seq))
    shuffle_rng = np.random.default_rng(shuffle_seq)
    dropout_rng = np.random.default_rng(dropout_seq)

    split = leave_one_out(ds)
    inputs, labels = training_examples(split, cfg.N, tcfg.augment)
    if len(labels) == 0:
        raise EmptyDataset("no training examples (every train prefix is shorter than 2)")
    ks = tuple(sorted(set(tcfg.eval_ks) | {10}))

    state = AdamState.from_config(tcfg)
    history = []
    best = None
    best_epoch, best_valid, stale = 0, None, 0
    for epoch in range(1, tcfg.max_epochs + 1):
        t0 = time.perf_counter()
        total = 0.0
        for xb, yb in batches(inputs, labels, tcfg.batch_size, shuffle_rng):
            loss, grads = loss_and_grads(xb, yb, params, cfg, dropout_rng, training=True)
            if not math.isfinite(loss):
                raise DivergenceError(epoch, loss)
            total += loss * len(yb)
            adam_step(params, grads, state)
        valid = evaluate(params, cfg, split, "valid", ks, tcfg.eval_batch_size)
        record = EpochRecord(
            epoch, total / len(labels), valid.hr[10], valid.ndcg[10],
            time.perf_counter() - t0 if tcfg.log_seconds else None,
        )
        history.append(record)
        log.info("epoch %d loss %.5f valid HR@10 %.4f NDCG@10 %.4f",
                 epoch, record.train_loss, record.valid_hr10, record.valid_ndcg10)
        if on_epoch is not None:
            on_epoch(record)
        if best is None or valid.ndcg[10] > best_valid.ndcg[10]:
            best = copy.deepcopy(params)
            best_epoch, best_valid, stale = epoch, valid, 0
        else:
            stale += 1
            if stale >= tcfg.patience:
                break
    test = evaluate(best, cfg, split, "test", ks, tcfg.eval_batch_size)
    return TrainResult(best, cfg, history, best_epoch, best_valid, test)


# -- checkpoints ----------------------------------------------------------------

def _format_tensor(name: str, arr: np.ndarray) -> str:
    mat = arr.reshape(1, -1) if arr.ndim == 1 else arr
    lines = [f"{name} {mat.shape[0]} {mat.shape[1]}"]
    lines += [" ".join(map(repr, row)) for row in mat.tolist()]
    return "\n".join(lines)


def save_checkpoint(params: dict, cfg: ModelConfig, path) -> None:
    shapes = param_shapes(cfg)
    parts = [CHECKPOINT_HEADER]
    parts += [f"{k}={v}" for k, v in cfg.to_dict().items()]
    for name in shapes:
        parts.append(_format_tensor(name, params[name]))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(parts) + "\n")


def load_checkpoint(path) -> tuple[dict, ModelConfig]:
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    if not lines or lines[0] != CHECKPOINT_HEADER:
        raise CheckpointError(f"{path}: missing or unsupported header (want {CHECKPOINT_HEADER!r})")
    types = {f.name: f.type for f in fields(ModelConfig)}
    conv = {"int": int, "float": float, "str": str}
    raw = {}
    pos = 1
    while pos < len(lines) and "=" in lines[pos]:
        key, _, value = lines[pos].partition("=")
        if key not in types:
            raise CheckpointError(f"{path}: unknown config key {key!r}")
        raw[key] = conv[types[key]](value)
        pos += 1
    try:
        cfg = ModelConfig(**raw)
        cfg.validate()
    except (TypeError, ValueError) as exc:
        raise CheckpointError(f"{path}: bad config: {exc}") from exc
    params = {}
    for name, shape in param_shapes(cfg).items():
        if pos >= len(lines):
            raise CheckpointError(f"{path}: truncated before tensor {name}")
        head = lines[pos].split()
        rows, cols = (shape[0], shape[1]) if len(shape) == 2 else (1, shape[0])
        if head != [name, str(rows), str(cols)]:
            raise CheckpointError(f"{path}: expected tensor header '{name} {rows} {cols}', got {lines[pos]!r}")
        body = lines[pos + 1:pos + 1 + rows]
        if len(body) != rows:
            raise CheckpointError(f"{path}: truncated inside tensor {name}")
        try:
            values = [[float(t) for t in line.split()] for line in body]
        except ValueError as exc:
            raise CheckpointError(f"{path}: bad value in tensor {name}: {exc}") from exc
        if any(len(r) != cols for r in values):
            raise CheckpointError(f"{path}: tensor {name} has a short row")
        params[name] = np.array(values, dtype=np.float64).reshape(shape)
        pos += 1 + rows
    if any(line.strip() for line in lines[pos:]):
        raise CheckpointError(f"{path}: trailing data after the last tensor")
    return params, cfg
