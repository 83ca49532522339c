"""Synthetic co-occurrence task and a small SGD training harness.

Each sample is a bag of tokens.  A few latent group vectors are planted in
a subset of tokens; the class is decided by *which pair* of groups appears
together.  Pairs are arranged so every class contains every group equally
often, which makes the mean-pooled token vector useless to a linear
classifier: the label is a property of the co-occurrence, not of any single
group.
"""

from __future__ import annotations

import csv
import enum
import json
import logging
from dataclasses import asdict, dataclass, field, fields, is_dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import ConfigError, NumericError
from .message import softhgnn_backward, softhgnn_forward
from .ses import SeSConfig, SeSState, record_and_balance
from .softhg import SoftHGParams, init_params

log = logging.getLogger(__name__)


class ModelKind(str, enum.Enum):
    POOL_BASELINE = "pool_baseline"
    SOFTHGNN = "softhgnn"
    SOFTHGNN_SES = "softhgnn_ses"


# --- data ----------------------------------------------------------------


def pair_classes(n_groups: int) -> list[list[tuple[int, int]]]:
    """Round-robin 1-factorization of the complete graph on ``n_groups``.

    Returns ``n_groups - 1`` perfect matchings; each is one class.
    """
    if n_groups < 2 or n_groups % 2:
        raise ConfigError(f"pair classes need an even number of groups, got {n_groups}")
    ring = list(range(1, n_groups))
    rounds = []
    for r in range(n_groups - 1):
        order = [0] + ring[r:] + ring[:r]
        rounds.append([tuple(sorted((order[i], order[-1 - i]))) for i in range(n_groups // 2)])
    return rounds


@dataclass(frozen=True)
class DataConfig:
    n_samples: int = 1200
    n_tokens: int = 16
    d: int = 16
    n_classes: int = 3
    tokens_per_group: int = 4
    group_noise: float = 0.3
    # 2: label = which pair of groups co-occurs; 1: label = which single group
    order: int = 2
    seed: int = 0


@dataclass
class GroupDataset:
    tokens: np.ndarray  # (n_samples, N, D)
    labels: np.ndarray  # (n_samples,)
    n_classes: int
    groups: np.ndarray  # latent group vectors (n_groups, D)
    config: DataConfig

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def samples(self) -> list[tuple[np.ndarray, int]]:
        return [(t, int(y)) for t, y in zip(self.tokens, self.labels)]

    def subset(self, idx) -> "GroupDataset":
        idx = np.asarray(idx)
        return GroupDataset(self.tokens[idx], self.labels[idx], self.n_classes, self.groups, self.config)

    def split(self, test_fraction: float) -> tuple["GroupDataset", "GroupDataset"]:
        n_test = int(round(len(self) * test_fraction))
        cut = len(self) - n_test
        return self.subset(np.arange(cut)), self.subset(np.arange(cut, len(self)))


def gen_group_dataset(
    seed: int = 0,
    n_samples: int = 1200,
    n: int = 16,
    d: int = 16,
    n_classes: int = 3,
    *,
    tokens_per_group: int = 4,
    group_noise: float = 0.3,
    order: int = 2,
) -> GroupDataset:
    cfg = DataConfig(n_samples, n, d, n_classes, tokens_per_group, group_noise, order, seed)
    return make_dataset(cfg)


def make_dataset(cfg: DataConfig) -> GroupDataset:
    if cfg.n_classes < 2 or cfg.n_samples < 1 or cfg.tokens_per_group < 1:
        raise ConfigError(f"invalid dataset sizes: {cfg}")
    if cfg.n_tokens < 3 * cfg.tokens_per_group:
        raise ConfigError(f"n_tokens={cfg.n_tokens} must be at least 3 * tokens_per_group={cfg.tokens_per_group}")
    if cfg.order == 1:
        n_groups = cfg.n_classes
        combos = [[(c,)] for c in range(cfg.n_classes)]
    elif cfg.order == 2:
        n_groups = cfg.n_classes + 1 + (cfg.n_classes + 1) % 2
        combos = pair_classes(n_groups)[: cfg.n_classes]
    else:
        raise ConfigError(f"order must be 1 or 2, got {cfg.order}")

    rng = np.random.default_rng(cfg.seed)
    groups = rng.normal(size=(n_groups, cfg.d))
    labels = np.arange(cfg.n_samples) % cfg.n_classes
    rng.shuffle(labels)

    tokens = cfg.group_noise * rng.normal(size=(cfg.n_samples, cfg.n_tokens, cfg.d))
    tpg = cfg.tokens_per_group
    for s, y in enumerate(labels):
        combo = combos[y][rng.integers(len(combos[y]))]
        slots = rng.permutation(cfg.n_tokens)
        for j, g in enumerate(combo):
            tokens[s, slots[j * tpg : (j + 1) * tpg]] += groups[g]
    return GroupDataset(tokens, labels, cfg.n_classes, groups, cfg)


def nearest_centroid_accuracy(train: GroupDataset, test: Optional[GroupDataset] = None) -> float:
    """Nearest class centroid on mean-pooled tokens."""
    test = train if test is None else test
    feats = train.tokens.mean(axis=1)
    cents = np.stack([feats[train.labels == c].mean(axis=0) for c in range(train.n_classes)])
    q = test.tokens.mean(axis=1)
    dist = ((q[:, None, :] - cents[None]) ** 2).sum(axis=-1)
    return float(np.mean(np.argmin(dist, axis=1) == test.labels))


# --- model ---------------------------------------------------------------


@dataclass
class Classifier:
    """Optional SoftHGNN block, mean pooling over tokens, affine head."""

    kind: ModelKind
    head_w: np.ndarray  # (D, C)
    head_b: np.ndarray  # (C,)
    block: Optional[SoftHGParams] = None
    ses: Optional[SeSConfig] = None

    def tensors(self) -> dict[str, np.ndarray]:
        out = {"head_w": self.head_w, "head_b": self.head_b}
        if self.block is not None:
            out.update(self.block.tensors())
        return out

    def features(self, x: np.ndarray):
        if self.block is None:
            return x.mean(axis=0), None
        out = softhgnn_forward(x, self.block, self.ses)
        return out.x_out.mean(axis=0), out

    def logits(self, x: np.ndarray) -> np.ndarray:
        return self.features(x)[0] @ self.head_w + self.head_b


def build_model(kind: ModelKind | str, d: int, n_classes: int, cfg: "TrainConfig", rng) -> Classifier:
    kind = ModelKind(kind)
    bound = 1.0 / np.sqrt(d)
    head_w = rng.uniform(-bound, bound, size=(d, n_classes))
    head_b = rng.uniform(-bound, bound, size=n_classes)
    if kind is ModelKind.POOL_BASELINE:
        return Classifier(kind, head_w, head_b)
    ses = cfg.ses if kind is ModelKind.SOFTHGNN_SES else None
    m = ses.m_total if ses else cfg.hyperedges
    block = init_params(d, m, cfg.heads, rng=rng, norm_mode=cfg.norm_mode, activation=cfg.activation)
    return Classifier(kind, head_w, head_b, block, ses)


def evaluate(model: Classifier, data: GroupDataset) -> float:
    if len(data) == 0:
        return 0.0
    logits = np.stack([model.logits(x) for x in data.tokens])
    return accuracy_from_logits(logits, data.labels)


def accuracy_from_logits(logits, labels) -> float:
    """Argmax accuracy; np.argmax breaks ties toward the lower class index."""
    return float(np.mean(np.argmax(np.asarray(logits), axis=1) == np.asarray(labels)))


def _log_softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max()
    return z - np.log(np.exp(z).sum())


def sample_grad(model: Classifier, x: np.ndarray, y: int):
    """Cross-entropy loss and gradients for one sample.

    Returns (loss, grads-by-name, selection or None).
    """
    feat, out = model.features(x)
    logp = _log_softmax(feat @ model.head_w + model.head_b)
    d_logits = np.exp(logp)
    d_logits[y] -= 1.0
    grads = {"head_w": np.outer(feat, d_logits), "head_b": d_logits}
    if out is not None:
        d_feat = model.head_w @ d_logits
        d_out = np.broadcast_to(d_feat / x.shape[0], out.x_out.shape)
        grads.update(softhgnn_backward(out, d_out).params)
    sel = out.cache.sel if out is not None else None
    return float(-logp[y]), grads, sel


# --- training ------------------------------------------------------------


@dataclass
class TrainConfig:
    model: ModelKind = ModelKind.SOFTHGNN
    epochs: int = 10
    lr: float = 0.05
    momentum: float = 0.9
    batch_size: int = 16
    seed: int = 0
    heads: int = 8
    hyperedges: int = 8
    norm_mode: str = "enorm"
    activation: str = "relu"
    ses: SeSConfig = field(default_factory=SeSConfig)
    lb_weight: float = 1.0
    test_fraction: float = 0.25
    data: DataConfig = field(default_factory=DataConfig)

    def __post_init__(self):
        self.model = ModelKind(self.model)
        if isinstance(self.ses, dict):
            self.ses = SeSConfig(**self.ses)
        if isinstance(self.data, dict):
            self.data = DataConfig(**self.data)
        if self.epochs < 0 or self.batch_size < 1 or self.lr < 0 or not 0 <= self.momentum < 1:
            raise ConfigError(f"invalid training hyperparameters: epochs={self.epochs} "
                              f"batch_size={self.batch_size} lr={self.lr} momentum={self.momentum}")
        if not 0 < self.test_fraction < 1:
            raise ConfigError(f"test_fraction must be in (0, 1), got {self.test_fraction}")

    @classmethod
    def from_dict(cls, obj: dict) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(obj) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**obj)

    @classmethod
    def from_json(cls, path) -> "TrainConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_dict(self) -> dict:
        def conv(v):
            if is_dataclass(v):
                return {k: conv(x) for k, x in asdict(v).items()}
            return v.value if isinstance(v, enum.Enum) else v

        return {f.name: conv(getattr(self, f.name)) for f in fields(self)}


@dataclass
class EpochMetrics:
    epoch: int
    split: str
    loss: float
    accuracy: float
    l_lb: float


@dataclass
class TrainResult:
    metrics: list[EpochMetrics]
    model: Classifier
    initial: dict[str, np.ndarray]
    ses_state: Optional[SeSState] = None

    def final(self, split: str = "test") -> EpochMetrics:
        return [m for m in self.metrics if m.split == split][-1]

    def train_losses(self) -> list[float]:
        return [m.loss for m in self.metrics if m.split == "train" and m.epoch > 0]


def _set_tensor(model: Classifier, name: str, value: np.ndarray) -> None:
    if name in ("head_w", "head_b"):
        setattr(model, name, value)
    else:
        setattr(model.block, name, value)


def _eval_loss(model: Classifier, data: GroupDataset) -> tuple[float, float]:
    losses, correct = [], 0
    for x, y in zip(data.tokens, data.labels):
        z = model.logits(x)
        losses.append(-_log_softmax(z)[y])
        correct += int(np.argmax(z) == y)
    return float(np.mean(losses)), correct / len(data)


def train_loop(cfg: TrainConfig, data: GroupDataset) -> TrainResult:
    """Mini-batch SGD with optional momentum on cross-entropy.

    Under SeS the balance loss is added to the reported loss with weight
    ``lb_weight``; it carries no gradient.  Epoch 0 rows are the untrained
    model's metrics.
    """
    rng = np.random.default_rng(cfg.seed)
    train, test = data.split(cfg.test_fraction)
    d = data.tokens.shape[2]
    model = build_model(cfg.model, d, data.n_classes, cfg, rng)
    initial = {k: v.copy() for k, v in model.tensors().items()}
    velocity = {k: np.zeros_like(v) for k, v in initial.items()}
    state = SeSState(cfg.ses) if model.ses is not None else None

    metrics = []
    for split, part in (("train", train), ("test", test)):
        loss, acc = _eval_loss(model, part)
        metrics.append(EpochMetrics(0, split, loss, acc, 0.0))

    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(len(train))
        ep_loss, ep_lb, ep_correct = 0.0, 0.0, 0
        for step, start in enumerate(range(0, len(order), cfg.batch_size)):
            batch = order[start : start + cfg.batch_size]
            acc_grads = {k: np.zeros_like(v) for k, v in velocity.items()}
            for i in batch:
                x, y = train.tokens[i], int(train.labels[i])
                loss, grads, sel = sample_grad(model, x, y)
                if state is not None:
                    lb = record_and_balance(state, sel)
                    ep_lb += lb
                    loss += cfg.lb_weight * lb
                if not np.isfinite(loss):
                    raise NumericError(f"non-finite loss at epoch {epoch} step {step}")
                ep_loss += loss
                for k, g in grads.items():
                    acc_grads[k] += g
            for k, g in acc_grads.items():
                velocity[k] = cfg.momentum * velocity[k] + g / len(batch)
                _set_tensor(model, k, model.tensors()[k] - cfg.lr * velocity[k])
        n_train = len(train)
        _, train_acc = _eval_loss(model, train)
        metrics.append(EpochMetrics(epoch, "train", ep_loss / n_train, train_acc, ep_lb / n_train))
        test_loss, test_acc = _eval_loss(model, test)
        metrics.append(EpochMetrics(epoch, "test", test_loss, test_acc, ep_lb / n_train))
        log.info("epoch %d train_loss %.4f test_acc %.3f", epoch, ep_loss / n_train, test_acc)

    return TrainResult(metrics, model, initial, state)


def write_metrics_csv(path, metrics: list[EpochMetrics]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["epoch", "split", "loss", "accuracy", "l_lb"])
        for m in metrics:
            w.writerow([m.epoch, m.split, f"{m.loss:.10g}", f"{m.accuracy:.10g}", f"{m.l_lb:.10g}"])
