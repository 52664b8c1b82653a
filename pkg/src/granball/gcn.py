"""Minibatch GCN trainer over ball subgraphs.

Dense numpy kernels with hand-written reverse-mode gradients and Adam.
Layers compute Z = A_hat @ X @ W with ReLU between layers, inverted
dropout on every layer input during training, and raw logits at the
output. Batches stack a sampled group of balls; with
``strict_block_diagonal`` the batch drops edges between different balls,
the literal block-diagonal approximation.
"""

from __future__ import annotations

import struct
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .balls import BallPartition
from .datasets import TRAIN, VAL
from .graph import Graph, _induced_csr

__all__ = [
    "TrainConfig", "ModelParams", "Batch",
    "normalize_adjacency", "make_epoch_schedule", "build_batch",
    "init_params", "forward", "loss_and_grads", "adam_step",
    "train", "evaluate", "micro_f1_from_counts",
    "save_checkpoint", "load_checkpoint",
]


@dataclass
class TrainConfig:
    num_layers: int = 2
    hidden_dim: int = 64
    dropout: float = 0.5
    balls_per_batch: int = 1
    learning_rate: float = 0.01
    weight_decay: float = 0.0
    max_epochs: int = 400
    patience: int = 50
    strict_block_diagonal: bool = False
    loss_mode: str = "node-mean"  # or "block-mean": sum of per-ball means
    float32: bool = False
    seed: int = 0

    def validate(self) -> None:
        if self.num_layers < 1:
            raise ValueError("need at least one layer")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must lie in [0, 1)")
        if self.balls_per_batch < 1:
            raise ValueError("balls_per_batch must be positive")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.loss_mode not in ("node-mean", "block-mean"):
            raise ValueError(f"unknown loss_mode {self.loss_mode!r}")

    @property
    def dtype(self):
        return np.float32 if self.float32 else np.float64


@dataclass
class ModelParams:
    """Per-layer weight matrices plus Adam moments and step counter."""

    weights: list[np.ndarray]
    adam_m: list[np.ndarray] = field(default_factory=list)
    adam_v: list[np.ndarray] = field(default_factory=list)
    step: int = 0

    def __post_init__(self):
        if not self.adam_m:
            self.adam_m = [np.zeros_like(w) for w in self.weights]
        if not self.adam_v:
            self.adam_v = [np.zeros_like(w) for w in self.weights]

    def copy(self) -> "ModelParams":
        return ModelParams(weights=[w.copy() for w in self.weights],
                           adam_m=[m.copy() for m in self.adam_m],
                           adam_v=[v.copy() for v in self.adam_v],
                           step=self.step)


@dataclass
class Batch:
    """Relabeled union of sampled balls with gathered rows."""

    subgraph: Graph
    norm_adj: sp.csr_matrix
    features: np.ndarray
    labels: np.ndarray
    roles: np.ndarray
    global_ids: np.ndarray
    ball_ids_local: np.ndarray


def normalize_adjacency(sub: Graph, dtype=np.float64) -> sp.csr_matrix:
    """Symmetric renormalization with self-loops: D^-1/2 (A + I) D^-1/2."""
    n = sub.num_nodes
    rows = np.concatenate([sub.edge_sources, np.arange(n, dtype=np.int64)])
    cols = np.concatenate([sub.neighbors, np.arange(n, dtype=np.int64)])
    dinv = 1.0 / np.sqrt(sub.degrees() + 1.0)
    data = (dinv[rows] * dinv[cols]).astype(dtype)
    return sp.csr_matrix((data, (rows, cols)), shape=(n, n))


def make_epoch_schedule(p: BallPartition, balls_per_batch: int,
                        rng: np.random.Generator) -> list[np.ndarray]:
    """Random permutation of ball ids chunked into ceil(t/p) groups."""
    if balls_per_batch > p.t:
        raise ValueError(f"balls_per_batch {balls_per_batch} exceeds t={p.t}")
    perm = rng.permutation(p.t)
    return [perm[i:i + balls_per_batch] for i in range(0, p.t, balls_per_batch)]


def build_batch(g: Graph, features: np.ndarray, labels: np.ndarray,
                roles: np.ndarray, p: BallPartition, ball_ids,
                strict_block_diagonal: bool = False,
                dtype=np.float64) -> Batch:
    """Gather the union of the selected balls into a relabeled subgraph.

    Intra-ball edges are always kept; edges between the selected balls
    are kept unless ``strict_block_diagonal``.
    """
    ball_ids = np.asarray(ball_ids, dtype=np.int64)
    if len(ball_ids) == 0:
        raise ValueError("ball_ids must be nonempty")
    if len(np.unique(ball_ids)) != len(ball_ids):
        raise ValueError("ball_ids must be distinct")
    nodes = np.sort(np.concatenate([p.balls[int(i)].nodes for i in ball_ids]))
    loff, lcols = _induced_csr(g, nodes)
    if strict_block_diagonal:
        rows = np.repeat(np.arange(len(nodes), dtype=np.int64), np.diff(loff))
        keep = p.ball_of[nodes[rows]] == p.ball_of[nodes[lcols]]
        rows, lcols = rows[keep], lcols[keep]
        loff = np.zeros(len(nodes) + 1, dtype=np.int64)
        np.cumsum(np.bincount(rows, minlength=len(nodes)), out=loff[1:])
    sub = Graph(offsets=loff, neighbors=lcols)
    return Batch(subgraph=sub,
                 norm_adj=normalize_adjacency(sub, dtype=dtype),
                 features=features[nodes].astype(dtype, copy=False),
                 labels=labels[nodes],
                 roles=roles[nodes],
                 global_ids=nodes,
                 ball_ids_local=p.ball_of[nodes])


def init_params(num_features: int, num_classes: int, cfg: TrainConfig,
                rng: np.random.Generator) -> ModelParams:
    """Symmetric-uniform init with scale sqrt(6 / (fan_in + fan_out))."""
    dims = [num_features] + [cfg.hidden_dim] * (cfg.num_layers - 1) + [num_classes]
    weights = []
    for fi, fo in zip(dims[:-1], dims[1:]):
        limit = np.sqrt(6.0 / (fi + fo))
        weights.append(rng.uniform(-limit, limit, size=(fi, fo)).astype(cfg.dtype))
    return ModelParams(weights=weights)


def forward(params: ModelParams, batch: Batch, training: bool = False,
            dropout: float = 0.0, rng: np.random.Generator | None = None):
    """Run the layer stack; returns (logits, cache for backprop).

    Each layer computes A_hat @ X @ W; hidden layers apply ReLU, the
    last emits raw logits. Inverted dropout scales kept entries by
    1/(1-D) on every layer input when training.
    """
    x = batch.features
    adj = batch.norm_adj
    num_layers = len(params.weights)
    cache = []
    for l, w in enumerate(params.weights):
        if x.shape[1] != w.shape[0]:
            raise ValueError(
                f"layer {l}: input width {x.shape[1]} does not match weight rows {w.shape[0]}")
        if training and dropout > 0.0:
            if rng is None:
                raise ValueError("training with dropout needs an rng")
            mask = rng.random(x.shape) >= dropout
            x_in = np.where(mask, x, 0.0) / (1.0 - dropout)
        else:
            mask = None
            x_in = x
        agg = adj @ x_in
        z = agg @ w
        cache.append((x_in, mask, agg, z))
        x = np.maximum(z, 0.0) if l < num_layers - 1 else z
    return x, cache


def _row_weights(batch: Batch, loss_mode: str) -> np.ndarray | None:
    """Per-row loss weights; None when the batch has no TRAIN node."""
    train_rows = batch.roles == TRAIN
    n_train = int(train_rows.sum())
    if n_train == 0:
        return None
    w = np.zeros(len(batch.roles), dtype=np.float64)
    if loss_mode == "node-mean":
        w[train_rows] = 1.0 / n_train
    else:  # block-mean: each ball's train nodes average to 1, balls sum
        for b in np.unique(batch.ball_ids_local):
            rows = train_rows & (batch.ball_ids_local == b)
            cnt = int(rows.sum())
            if cnt:
                w[rows] = 1.0 / cnt
    return w


def loss_and_grads(params: ModelParams, batch: Batch, cfg: TrainConfig,
                   rng: np.random.Generator | None = None):
    """Weighted softmax cross-entropy and its weight gradients.

    Returns None to signal a skipped batch (no TRAIN node). Gradients
    come from reverse-mode through the forward cache: matrix products,
    ReLU masks, dropout masks, and the fused softmax-cross-entropy.
    """
    w_rows = _row_weights(batch, cfg.loss_mode)
    if w_rows is None:
        return None
    logits, cache = forward(params, batch, training=True,
                            dropout=cfg.dropout, rng=rng)
    num_classes = logits.shape[1]
    shifted = logits - logits.max(axis=1, keepdims=True)
    exps = np.exp(shifted)
    probs = exps / exps.sum(axis=1, keepdims=True)
    logp = shifted - np.log(exps.sum(axis=1, keepdims=True))
    loss = -float(w_rows @ logp[np.arange(len(w_rows)), batch.labels])

    dz = probs.astype(np.float64)
    dz[np.arange(len(w_rows)), batch.labels] -= 1.0
    dz *= w_rows[:, None]
    dz = dz.astype(logits.dtype, copy=False)

    adj = batch.norm_adj
    grads: list[np.ndarray] = [None] * len(params.weights)
    for l in range(len(params.weights) - 1, -1, -1):
        x_in, mask, agg, z = cache[l]
        grads[l] = agg.T @ dz
        if l == 0:
            break
        dagg = dz @ params.weights[l].T
        dx = adj @ dagg  # A_hat is symmetric
        if mask is not None:
            dx = np.where(mask, dx, 0.0) / (1.0 - cfg.dropout)
        dz = dx * (cache[l - 1][3] > 0.0)
    return loss, grads


def adam_step(params: ModelParams, grads: list[np.ndarray], lr: float,
              beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8,
              weight_decay: float = 0.0) -> None:
    """In-place Adam update with bias correction."""
    params.step += 1
    t = params.step
    for w, g, m, v in zip(params.weights, grads, params.adam_m, params.adam_v):
        if not np.all(np.isfinite(g)):
            raise FloatingPointError(
                f"non-finite gradient at step {t} (shape {g.shape})")
        if weight_decay:
            g = g + weight_decay * w
        m *= beta1
        m += (1 - beta1) * g
        v *= beta2
        v += (1 - beta2) * (g * g)
        mhat = m / (1 - beta1 ** t)
        vhat = v / (1 - beta2 ** t)
        w -= lr * mhat / (np.sqrt(vhat) + eps)


def micro_f1_from_counts(tp: int, fp: int, fn: int) -> float:
    """Micro-F1 = 2 P R / (P + R) from micro-aggregated counts."""
    if tp == 0:
        return 0.0
    precision = tp / (tp + fp)
    recall = tp / (tp + fn)
    return 2.0 * precision * recall / (precision + recall)


def evaluate(params: ModelParams, g: Graph, features: np.ndarray,
             labels: np.ndarray, roles: np.ndarray, role: int,
             norm_adj: sp.csr_matrix | None = None) -> float:
    """Full-graph inference Micro-F1 over nodes of the given role."""
    sel = roles == role
    if not np.any(sel):
        raise ValueError(f"no nodes with role {role}")
    if norm_adj is None:
        norm_adj = normalize_adjacency(g, dtype=params.weights[0].dtype)
    x = features.astype(params.weights[0].dtype, copy=False)
    num_layers = len(params.weights)
    for l, w in enumerate(params.weights):
        x = (norm_adj @ x) @ w
        if l < num_layers - 1:
            x = np.maximum(x, 0.0)
    pred = np.argmax(x, axis=1)
    y = labels[sel]
    yhat = pred[sel]
    num_classes = max(int(y.max()), int(yhat.max())) + 1
    tp = fp = fn = 0
    for c in range(num_classes):
        tp += int(((yhat == c) & (y == c)).sum())
        fp += int(((yhat == c) & (y != c)).sum())
        fn += int(((y == c) & (yhat != c)).sum())
    return micro_f1_from_counts(tp, fp, fn)


def train(g: Graph, features: np.ndarray, labels: np.ndarray,
          roles: np.ndarray, p: BallPartition,
          cfg: TrainConfig) -> tuple[ModelParams, list[dict]]:
    """Epoch loop: schedule balls, build batches, step Adam, early-stop.

    Validation Micro-F1 runs on the full graph after every epoch; the
    best-validation parameters are kept and returned. History rows are
    {epoch, train_loss, val_f1, ms}.
    """
    cfg.validate()
    if hasattr(labels, "labels"):
        num_classes = labels.num_classes
        labels = labels.labels
    else:
        num_classes = int(labels.max()) + 1
    rng = np.random.default_rng(cfg.seed)
    params = init_params(features.shape[1], num_classes, cfg, rng)
    if cfg.max_epochs == 0:
        return params, []
    norm_full = normalize_adjacency(g, dtype=cfg.dtype)
    best = params.copy()
    best_f1 = -1.0
    bad_epochs = 0
    history: list[dict] = []
    batch_cache: dict[tuple, Batch] = {}
    for epoch in range(cfg.max_epochs):
        t0 = time.perf_counter()
        groups = make_epoch_schedule(p, cfg.balls_per_batch, rng)
        loss_sum = 0.0
        used = 0
        for grp in groups:
            key = tuple(sorted(int(i) for i in grp))
            batch = batch_cache.get(key)
            if batch is None:
                batch = build_batch(g, features, labels, roles, p, grp,
                                    cfg.strict_block_diagonal, dtype=cfg.dtype)
                batch_cache[key] = batch
            result = loss_and_grads(params, batch, cfg, rng)
            if result is None:
                continue
            loss, grads = result
            adam_step(params, grads, cfg.learning_rate,
                      weight_decay=cfg.weight_decay)
            loss_sum += loss
            used += 1
        val_f1 = evaluate(params, g, features, labels, roles, VAL,
                          norm_adj=norm_full)
        history.append({
            "epoch": epoch,
            "train_loss": loss_sum / max(used, 1),
            "val_f1": val_f1,
            "ms": (time.perf_counter() - t0) * 1000.0,
        })
        if val_f1 > best_f1:
            best_f1 = val_f1
            best = params.copy()
            bad_epochs = 0
        else:
            bad_epochs += 1
            if bad_epochs >= cfg.patience:
                break
    return best, history


_CHECKPOINT_MAGIC = b"GBWT"


def save_checkpoint(path, params: ModelParams) -> None:
    """Binary checkpoint: magic GBWT, u32 layer count, then per layer
    u32 rows, u32 cols, and rows*cols little-endian float64."""
    with Path(path).open("wb") as fh:
        fh.write(_CHECKPOINT_MAGIC)
        fh.write(struct.pack("<I", len(params.weights)))
        for w in params.weights:
            fh.write(struct.pack("<II", w.shape[0], w.shape[1]))
            fh.write(w.astype("<f8").tobytes())


def load_checkpoint(path) -> ModelParams:
    data = Path(path).read_bytes()
    if data[:4] != _CHECKPOINT_MAGIC:
        raise ValueError(f"{path}: not a checkpoint file")
    (num_layers,) = struct.unpack("<I", data[4:8])
    pos = 8
    weights = []
    for _ in range(num_layers):
        rows, cols = struct.unpack("<II", data[pos:pos + 8])
        pos += 8
        w = np.frombuffer(data, dtype="<f8", count=rows * cols, offset=pos)
        pos += 8 * rows * cols
        weights.append(w.reshape(rows, cols).copy())
    if pos != len(data):
        raise ValueError(f"{path}: trailing bytes in checkpoint")
    return ModelParams(weights=weights)
