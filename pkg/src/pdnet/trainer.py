"""Mini-batch SGD training, evaluation, metrics CSV and checkpoints."""
from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import math
import os
import struct
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from pdnet.data.manifest import DatasetManifest
from pdnet.data.pgm import read_pgm
from pdnet.errors import ArmMismatchError, CheckpointError, ManifestError, NonFiniteError
from pdnet.model import (NetworkSpec, WeightStore, build_model, init_weights, network_backward,
                         network_forward)
from pdnet.model.weights import copy_store, decode_store, encode_store
from pdnet.model.zoo import MODELS, WIDTHS

log = logging.getLogger(__name__)

ARMS = {
    "PN": ("PD", "Normal"),
    "PM": ("PD", "MSA"),
    "MN": ("MSA", "Normal"),
    "PMN": ("PD", "MSA", "Normal"),
}


@dataclass(frozen=True)
class TrainConfig:
    arm: str = "PMN"
    model: str = "alexnet-opt-lrn"
    scale: str = "mini"
    epochs: int = 30
    learning_rate: float = 0.01
    momentum: float = 0.9
    weight_decay: float = 5e-4
    batch_size: int = 32
    seed: int = 0

    def __post_init__(self):
        if self.arm not in ARMS:
            raise ValueError(f"arm must be one of {sorted(ARMS)}, got {self.arm!r}")
        if self.model not in MODELS:
            raise ValueError(f"model must be one of {MODELS}, got {self.model!r}")
        if self.scale not in WIDTHS:
            raise ValueError(f"scale must be one of {sorted(WIDTHS)}, got {self.scale!r}")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.learning_rate < 0 or not 0 <= self.momentum < 1 or self.weight_decay < 0:
            raise ValueError("need learning_rate >= 0, 0 <= momentum < 1, weight_decay >= 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must fit in 64 unsigned bits")

    @property
    def classes(self) -> tuple[str, ...]:
        return ARMS[self.arm]

    def build_spec(self) -> NetworkSpec:
        return build_model(self.model, len(self.classes), self.scale)

    def hash(self) -> str:
        """Digest of every field except ``epochs``, so a run can be extended on resume."""
        d = asdict(self)
        d.pop("epochs")
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()


@dataclass(frozen=True)
class MetricsRecord:
    epoch: int
    train_loss: float
    val_loss: float
    val_acc: float


# Data --------------------------------------------------------------------------

def check_arm(manifest: DatasetManifest, arm: str) -> None:
    allowed = ARMS[arm]
    for i, row in enumerate(manifest.rows, start=1):
        if row.label not in allowed:
            raise ArmMismatchError(f"row {i} ({row.path}) has label {row.label}, "
                                   f"which is not part of arm {arm} {allowed}")


def restrict_to_arm(manifest: DatasetManifest, arm: str) -> DatasetManifest:
    return DatasetManifest([r for r in manifest.rows if r.label in ARMS[arm]], manifest.root)


def fit_canvas(img: np.ndarray, size: int) -> np.ndarray:
    """Center-crop or zero-pad ``img`` to ``size x size``."""
    out = np.zeros((size, size), dtype=img.dtype)
    h, w = img.shape
    sy, dy = max(0, (h - size) // 2), max(0, (size - h) // 2)
    sx, dx = max(0, (w - size) // 2), max(0, (size - w) // 2)
    ch, cw = min(h, size), min(w, size)
    out[dy:dy + ch, dx:dx + cw] = img[sy:sy + ch, sx:sx + cw]
    return out


PIXEL_OFFSET = 127.5
PIXEL_SCALE = 255.0


def normalize_pixels(img: np.ndarray) -> np.ndarray:
    """Map 8-bit gray levels to [-0.5, 0.5]."""
    return (img - PIXEL_OFFSET) / PIXEL_SCALE


def load_split(manifest: DatasetManifest, split: str, classes, size: int):
    """Normalized images of one split as ``(N, 1, size, size)`` plus class indices."""
    rows = manifest.split(split)
    if not rows:
        raise ManifestError(f"split {split!r} is empty")
    x = np.empty((len(rows), 1, size, size))
    y = np.empty(len(rows), dtype=np.int64)
    for i, row in enumerate(rows):
        img = read_pgm(manifest.resolve(row))
        if img.shape != (size, size):
            img = fit_canvas(img, size)
        x[i, 0] = normalize_pixels(img)
        y[i] = classes.index(row.label)
    return x, y


# Optimization ------------------------------------------------------------------

def zeros_like_store(store: WeightStore) -> WeightStore:
    return {k: {p: np.zeros_like(a) for p, a in v.items()} for k, v in store.items()}


def sgd_step(params: WeightStore, grads: WeightStore, velocity: WeightStore,
             cfg: TrainConfig) -> tuple[WeightStore, WeightStore]:
    """``v <- momentum*v - lr*(g + weight_decay*w)``; ``w <- w + v``.

    Entries of ``params`` without a gradient (batch-norm running statistics)
    are carried over unchanged.
    """
    new_params = {k: dict(v) for k, v in params.items()}
    new_vel = {k: dict(v) for k, v in velocity.items()}
    for name, pg in grads.items():
        for pname, g in pg.items():
            w = params[name][pname]
            v = velocity[name][pname]
            if g.shape != w.shape or v.shape != w.shape:
                raise ValueError(f"{name}/{pname}: shapes differ (w {w.shape}, g {g.shape}, v {v.shape})")
            v = cfg.momentum * v - cfg.learning_rate * (g + cfg.weight_decay * w)
            new_vel[name][pname] = v
            new_params[name][pname] = w + v
    return new_params, new_vel


def batches(n: int, batch_size: int, order: np.ndarray) -> list[np.ndarray]:
    """Contiguous chunks of ``order``; a trailing single sample joins the previous chunk."""
    chunks = [order[i:i + batch_size] for i in range(0, n, batch_size)]
    if len(chunks) > 1 and len(chunks[-1]) == 1:
        last = chunks.pop()
        chunks[-1] = np.concatenate([chunks[-1], last])
    return chunks


def train_epoch(spec: NetworkSpec, weights: WeightStore, velocity: WeightStore, x: np.ndarray,
                y: np.ndarray, cfg: TrainConfig, epoch: int):
    """One pass over ``(x, y)`` in an order fixed by ``(seed, epoch)``.

    Returns updated weights, velocity and the mean of the batch losses.
    """
    if len(x) == 0:
        raise ManifestError("training split is empty")
    order = np.random.default_rng([cfg.seed, epoch]).permutation(len(x))
    losses = []
    trainable = spec.trainable_shapes()
    for b, idx in enumerate(batches(len(x), cfg.batch_size, order)):
        fp = network_forward(spec, weights, x[idx], y[idx], train=True)
        if not math.isfinite(fp.loss):
            raise NonFiniteError(f"epoch {epoch}, batch {b}: loss is {fp.loss}")
        grads = network_backward(spec, weights, fp)
        train_w = {k: {p: weights[k][p] for p in trainable[k]} for k in trainable}
        stepped, velocity = sgd_step(train_w, grads, velocity, cfg)
        weights = {k: {**weights[k], **stepped.get(k, {}), **fp.buffers.get(k, {})} for k in weights}
        losses.append(fp.loss)
    return weights, velocity, float(np.mean(losses))


def evaluate(spec: NetworkSpec, weights: WeightStore, x: np.ndarray, y: np.ndarray,
             batch_size: int = 64) -> tuple[float, float]:
    """Infer-mode mean cross-entropy and accuracy in percent.

    Predictions are the argmax of the logits, ties going to the lowest class index.
    """
    if len(x) == 0:
        raise ManifestError("evaluation split is empty")
    total, correct = 0.0, 0
    for i in range(0, len(x), batch_size):
        xb, yb = x[i:i + batch_size], y[i:i + batch_size]
        fp = network_forward(spec, weights, xb, yb, train=False)
        total += fp.loss * len(xb)
        correct += int(np.sum(np.argmax(fp.logits, axis=1) == yb))
    return total / len(x), 100.0 * correct / len(x)


# Checkpoints -------------------------------------------------------------------

CKPT_MAGIC = b"PDNC"
CKPT_VERSION = 1


@dataclass
class Checkpoint:
    config: TrainConfig
    epoch: int
    weights: WeightStore
    velocity: WeightStore
    best_weights: WeightStore
    best_epoch: int
    history: list[MetricsRecord] = field(default_factory=list)

    @property
    def rng_state(self) -> dict:
        # every stochastic choice is derived from (seed, epoch)
        return {"seed": self.config.seed, "next_epoch": self.epoch + 1}

    def spec(self) -> NetworkSpec:
        return self.config.build_spec()


def encode_checkpoint(ckpt: Checkpoint) -> bytes:
    meta = {
        "config": asdict(ckpt.config),
        "config_hash": ckpt.config.hash(),
        "epoch": ckpt.epoch,
        "best_epoch": ckpt.best_epoch,
        "rng": ckpt.rng_state,
        "history": [asdict(r) for r in ckpt.history],
    }
    mb = json.dumps(meta, sort_keys=True).encode()
    buf = io.BytesIO()
    buf.write(CKPT_MAGIC + struct.pack("<II", CKPT_VERSION, len(mb)) + mb)
    for store in (ckpt.weights, ckpt.velocity, ckpt.best_weights):
        blob = encode_store(store)
        buf.write(struct.pack("<Q", len(blob)) + blob)
    return buf.getvalue()


def decode_checkpoint(data: bytes) -> Checkpoint:
    if data[:4] != CKPT_MAGIC:
        raise CheckpointError("not a checkpoint file (bad magic)")
    if len(data) < 12:
        raise CheckpointError("checkpoint truncated in header")
    version, mlen = struct.unpack("<II", data[4:12])
    if version != CKPT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}, expected {CKPT_VERSION}")
    pos = 12 + mlen
    if pos > len(data):
        raise CheckpointError("checkpoint truncated in metadata")
    meta = json.loads(data[12:pos])
    stores = []
    for _ in range(3):
        if pos + 8 > len(data):
            raise CheckpointError("checkpoint truncated before a weight block")
        (n,) = struct.unpack("<Q", data[pos:pos + 8])
        pos += 8
        if pos + n > len(data):
            raise CheckpointError("checkpoint truncated inside a weight block")
        stores.append(decode_store(data[pos:pos + n]))
        pos += n
    if pos != len(data):
        raise CheckpointError("unexpected bytes after checkpoint")
    cfg = TrainConfig(**meta["config"])
    if cfg.hash() != meta["config_hash"]:
        raise CheckpointError("checkpoint config hash does not match its config")
    return Checkpoint(cfg, meta["epoch"], stores[0], stores[1], stores[2], meta["best_epoch"],
                      [MetricsRecord(**r) for r in meta["history"]])


def save_checkpoint(ckpt: Checkpoint, path: str | os.PathLike) -> None:
    with open(path, "wb") as fh:
        fh.write(encode_checkpoint(ckpt))


def load_checkpoint(path: str | os.PathLike) -> Checkpoint:
    with open(path, "rb") as fh:
        return decode_checkpoint(fh.read())


# Training driver ---------------------------------------------------------------

def _better(rec: MetricsRecord, best: MetricsRecord | None) -> bool:
    if best is None:
        return True
    if rec.val_acc != best.val_acc:
        return rec.val_acc > best.val_acc
    return rec.val_loss < best.val_loss


def best_record(history: list[MetricsRecord]) -> MetricsRecord | None:
    """Highest val accuracy, then lowest val loss, then earliest epoch."""
    best = None
    for rec in history:
        if _better(rec, best):
            best = rec
    return best


def fit(cfg: TrainConfig, manifest: DatasetManifest, resume: Checkpoint | None = None,
        stop_after: int | None = None) -> Checkpoint:
    """Train ``cfg`` on the manifest's train split, validating every epoch.

    Returns the checkpoint after the last epoch run.  It carries the full
    metrics history and the best-validation weights.  ``stop_after`` ends the
    run early after that epoch; passing the result back as ``resume``
    continues it exactly as if it had not been interrupted.
    """
    check_arm(manifest, cfg.arm)
    spec = cfg.build_spec()
    size = spec.input_shape[-1]
    x_tr, y_tr = load_split(manifest, "train", cfg.classes, size)
    x_va, y_va = load_split(manifest, "val", cfg.classes, size)

    if resume is not None:
        if resume.config.hash() != cfg.hash():
            raise CheckpointError("checkpoint was produced by a different configuration")
        ckpt = Checkpoint(cfg, resume.epoch, copy_store(resume.weights), copy_store(resume.velocity),
                          copy_store(resume.best_weights), resume.best_epoch, list(resume.history))
    else:
        weights = init_weights(spec, cfg.seed)
        velocity = zeros_like_store({k: {p: weights[k][p] for p in v}
                                     for k, v in spec.trainable_shapes().items()})
        ckpt = Checkpoint(cfg, 0, weights, velocity, copy_store(weights), 0, [])

    best = next((r for r in ckpt.history if r.epoch == ckpt.best_epoch), None)
    for epoch in range(ckpt.epoch + 1, cfg.epochs + 1):
        ckpt.weights, ckpt.velocity, train_loss = train_epoch(
            spec, ckpt.weights, ckpt.velocity, x_tr, y_tr, cfg, epoch)
        val_loss, val_acc = evaluate(spec, ckpt.weights, x_va, y_va)
        rec = MetricsRecord(epoch, train_loss, val_loss, val_acc)
        ckpt.history.append(rec)
        ckpt.epoch = epoch
        if _better(rec, best):
            best = rec
            ckpt.best_weights, ckpt.best_epoch = copy_store(ckpt.weights), epoch
        log.info("epoch %d train_loss=%.6g val_loss=%.6g val_acc=%.2f", epoch, train_loss, val_loss, val_acc)
        if stop_after is not None and epoch >= stop_after:
            break
    return ckpt


# Metrics CSV -------------------------------------------------------------------

METRICS_HEADER = ("epoch", "train_loss", "val_loss", "val_acc")


def _g6(v: float) -> str:
    return f"{v:.6g}"


def export_metrics_csv(history: list[MetricsRecord], path: str | os.PathLike) -> None:
    """Per-epoch rows plus a final ``best`` row (see :func:`best_record`).

    Accuracy is written in percent.  With an empty history the ``best`` row
    has empty fields.
    """
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(METRICS_HEADER)
    for r in history:
        w.writerow((r.epoch, _g6(r.train_loss), _g6(r.val_loss), _g6(r.val_acc)))
    best = best_record(history)
    if best is None:
        w.writerow(("best", "", "", ""))
    else:
        w.writerow(("best", _g6(best.train_loss), _g6(best.val_loss), _g6(best.val_acc)))
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


def read_metrics_csv(path: str | os.PathLike) -> tuple[list[MetricsRecord], tuple | None]:
    """Parse a metrics CSV back into records and the ``best`` triple."""
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(rows[0]) != METRICS_HEADER:
        raise ValueError(f"{path}: not a metrics file")
    history, best = [], None
    for rec in rows[1:]:
        if rec[0] == "best":
            best = tuple(float(v) for v in rec[1:]) if rec[1] else None
        else:
            history.append(MetricsRecord(int(rec[0]), float(rec[1]), float(rec[2]), float(rec[3])))
    return history, best


# Overfit probe -----------------------------------------------------------------

@dataclass(frozen=True)
class ProbeResult:
    epochs: int
    train_loss: float
    train_acc: float
    weights: WeightStore = field(repr=False)


def probe_samples(n: int = 32, arm: str = "PMN", size: int = 64, seed: int = 0):
    """``n`` in-memory phantoms cycling through the arm's classes."""
    from pdnet.data.phantom import PhantomParams, generate_phantom, phantom_seed

    classes = ARMS[arm]
    x = np.empty((n, 1, size, size))
    y = np.arange(n) % len(classes)
    for i in range(n):
        label = classes[y[i]]
        img = generate_phantom(PhantomParams(label, phantom_seed(seed, label, i), size))
        x[i, 0] = normalize_pixels(img)
    return x, y


def overfit_probe(cfg: TrainConfig, x: np.ndarray, y: np.ndarray, max_epochs: int = 200,
                  loss_target: float = 0.01) -> ProbeResult:
    """Train on ``(x, y)`` alone until it is fit perfectly or ``max_epochs`` run out.

    Stops after the first epoch whose infer-mode accuracy on the training
    samples is 100% with loss below ``loss_target``.
    """
    spec = cfg.build_spec()
    weights = init_weights(spec, cfg.seed)
    velocity = zeros_like_store({k: {p: weights[k][p] for p in v}
                                 for k, v in spec.trainable_shapes().items()})
    loss, acc = evaluate(spec, weights, x, y)
    epoch = 0
    for epoch in range(1, max_epochs + 1):
        weights, velocity, _ = train_epoch(spec, weights, velocity, x, y, cfg, epoch)
        loss, acc = evaluate(spec, weights, x, y)
        if acc == 100.0 and loss < loss_target:
            break
    return ProbeResult(epoch, loss, acc, weights)
