"""Residual fully-connected prior network P(y | x) in plain numpy.

Architecture (9 weight layers)::

    h = relu(W_in x + b_in)
    repeat 4x:  h = h + relu(W2 relu(W1 h + b1) + b2)
    p = softmax(W_out h + b_out)

Forward, backward and the SGD-with-momentum loop are written out by hand in
float64 so gradients can be checked against finite differences.
"""

from __future__ import annotations

import dataclasses
import json
import math
from collections.abc import Callable, Mapping
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .domain import ClassVocabulary, Dataset
from .encode import FEATURE_DIM, LAT_LON_DATE, encode_observations
from .errors import CorruptFile, InvalidConfig, UnsupportedVersion

FORMAT_VERSION = 1


@dataclass(frozen=True)
class GeoNetConfig:
    classes: int
    input_dim: int = FEATURE_DIM
    hidden_width: int = 64
    residual_blocks: int = 4
    seed: int = 0
    learning_rate: float = 0.05
    momentum: float = 0.9
    lr_decay: float = 0.98
    epochs: int = 30
    batch_size: int = 64

    def __post_init__(self):
        def need(cond, msg):
            if not cond:
                raise InvalidConfig(msg)

        for name in ("classes", "input_dim", "hidden_width", "epochs", "batch_size"):
            v = getattr(self, name)
            need(isinstance(v, (int, np.integer)) and v >= 1, f"{name} must be a positive integer, got {v!r}")
        need(self.input_dim == FEATURE_DIM, f"input_dim must be {FEATURE_DIM}")
        need(self.residual_blocks == 4, "residual_blocks is fixed at 4 (9 weight layers)")
        need(isinstance(self.seed, (int, np.integer)) and 0 <= self.seed < 2**64, "seed must fit in 64 bits")
        need(math.isfinite(self.learning_rate) and self.learning_rate >= 0, "learning_rate must be >= 0")
        need(0.0 <= self.momentum < 1.0, "momentum must be in [0, 1)")
        need(0.0 < self.lr_decay <= 1.0, "lr_decay must be in (0, 1]")

    @property
    def layer_count(self) -> int:
        return 1 + 2 * self.residual_blocks

    def to_dict(self):
        return dataclasses.asdict(self)


def parameter_shapes(config: GeoNetConfig) -> dict[str, tuple[int, ...]]:
    """Ordered parameter names and shapes; this order is the checkpoint order."""
    H, C = config.hidden_width, config.classes
    shapes = {"input.weight": (H, config.input_dim), "input.bias": (H,)}
    for b in range(config.residual_blocks):
        for fc in ("fc1", "fc2"):
            shapes[f"block{b}.{fc}.weight"] = (H, H)
            shapes[f"block{b}.{fc}.bias"] = (H,)
    shapes["output.weight"] = (C, H)
    shapes["output.bias"] = (C,)
    return shapes


def parameter_count(hidden_width: int, classes: int) -> int:
    cfg = GeoNetConfig(classes=classes, hidden_width=hidden_width)
    return sum(int(np.prod(s)) for s in parameter_shapes(cfg).values())


def _freeze(arrays: Mapping[str, np.ndarray]) -> dict[str, np.ndarray]:
    out = {}
    for k, v in arrays.items():
        a = np.array(v, dtype=np.float64, copy=True)
        a.flags.writeable = False
        out[k] = a
    return out


@dataclass(frozen=True)
class GeoNet:
    config: GeoNetConfig
    params: Mapping[str, np.ndarray]
    vocabulary: ClassVocabulary
    feature_convention: str = LAT_LON_DATE

    def __post_init__(self):
        if len(self.vocabulary) != self.config.classes:
            raise InvalidConfig(
                f"config has {self.config.classes} classes, vocabulary {len(self.vocabulary)}"
            )
        shapes = parameter_shapes(self.config)
        if list(self.params) != list(shapes):
            raise InvalidConfig("parameter names do not match the architecture")
        for name, shape in shapes.items():
            if np.shape(self.params[name]) != shape:
                raise InvalidConfig(f"{name}: shape {np.shape(self.params[name])} != {shape}")
        object.__setattr__(self, "params", _freeze(self.params))

    def with_params(self, params: Mapping[str, np.ndarray]) -> "GeoNet":
        return dataclasses.replace(self, params=dict(params))

    @property
    def n_parameters(self) -> int:
        return sum(p.size for p in self.params.values())


def init_network(
    config: GeoNetConfig,
    vocabulary: ClassVocabulary,
    feature_convention: str = LAT_LON_DATE,
) -> GeoNet:
    """Weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)), biases zero."""
    rng = np.random.default_rng(config.seed)
    params = {}
    for name, shape in parameter_shapes(config).items():
        if name.endswith(".bias"):
            params[name] = np.zeros(shape)
        else:
            bound = 1.0 / math.sqrt(shape[1])
            params[name] = rng.uniform(-bound, bound, size=shape)
    return GeoNet(config, params, vocabulary, feature_convention)


def _relu(z):
    return np.maximum(z, 0.0)


def log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def _forward_cache(params, X, n_blocks):
    cache = {"x": X}
    z0 = X @ params["input.weight"].T + params["input.bias"]
    h = _relu(z0)
    cache["z0"] = z0
    for b in range(n_blocks):
        pre1 = h @ params[f"block{b}.fc1.weight"].T + params[f"block{b}.fc1.bias"]
        u = _relu(pre1)
        pre2 = u @ params[f"block{b}.fc2.weight"].T + params[f"block{b}.fc2.bias"]
        cache[f"block{b}"] = (h, pre1, u, pre2)
        h = h + _relu(pre2)
    cache["h"] = h
    cache["logits"] = h @ params["output.weight"].T + params["output.bias"]
    return cache


def _backward(params, cache, dlogits, dembed=None, n_blocks=4):
    grads = {}
    h = cache["h"]
    grads["output.weight"] = dlogits.T @ h
    grads["output.bias"] = dlogits.sum(axis=0)
    dh = dlogits @ params["output.weight"]
    if dembed is not None:
        dh = dh + dembed
    for b in reversed(range(n_blocks)):
        h_in, pre1, u, pre2 = cache[f"block{b}"]
        dpre2 = dh * (pre2 > 0)
        grads[f"block{b}.fc2.weight"] = dpre2.T @ u
        grads[f"block{b}.fc2.bias"] = dpre2.sum(axis=0)
        dpre1 = (dpre2 @ params[f"block{b}.fc2.weight"]) * (pre1 > 0)
        grads[f"block{b}.fc1.weight"] = dpre1.T @ h_in
        grads[f"block{b}.fc1.bias"] = dpre1.sum(axis=0)
        dh = dh + dpre1 @ params[f"block{b}.fc1.weight"]
    dz0 = dh * (cache["z0"] > 0)
    grads["input.weight"] = dz0.T @ cache["x"]
    grads["input.bias"] = dz0.sum(axis=0)
    return {name: grads[name] for name in params}


def predict_proba(net: GeoNet, X) -> np.ndarray:
    """Class probabilities for a batch of encoded features, shape (N, C)."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[1] != net.config.input_dim:
        raise ValueError(f"expected {net.config.input_dim} features, got {X.shape[1]}")
    cache = _forward_cache(net.params, X, net.config.residual_blocks)
    return softmax(cache["logits"])


def forward(net: GeoNet, x) -> np.ndarray:
    """Probability vector for one encoded observation."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (net.config.input_dim,):
        raise ValueError(f"expected a vector of length {net.config.input_dim}")
    return predict_proba(net, x[None, :])[0]


def embed(net: GeoNet, X) -> np.ndarray:
    """Penultimate representation (input to the output layer)."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    return _forward_cache(net.params, X, net.config.residual_blocks)["h"]


def _as_targets(y, n_classes):
    y = np.asarray(y)
    if y.ndim == 1:
        T = np.zeros((y.shape[0], n_classes))
        T[np.arange(y.shape[0]), y.astype(np.int64)] = 1.0
        return T
    return y.astype(np.float64)


def loss_and_gradients(net: GeoNet, X, y, weights=None):
    """Weighted cross-entropy and its gradient for every parameter.

    ``y`` holds class indices or soft target rows (MixUp). Weights are
    rescaled to mean 1, so the loss is the weighted mean of -log p[true].
    """
    return _loss_and_gradients(net.params, net.config, X, y, weights)


def _loss_and_gradients(params, config, X, y, weights=None):
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    n = X.shape[0]
    if n == 0:
        raise ValueError("empty batch")
    T = _as_targets(y, config.classes)
    w = np.ones(n) if weights is None else np.asarray(weights, dtype=np.float64)
    if np.any(w < 0) or w.sum() <= 0:
        raise ValueError("weights must be non-negative and not all zero")
    w = w / w.mean()

    cache = _forward_cache(params, X, config.residual_blocks)
    logp = log_softmax(cache["logits"])
    per_sample = -(T * logp).sum(axis=1)
    loss = float((w * per_sample).sum() / n)
    dlogits = (w / n)[:, None] * (np.exp(logp) * T.sum(axis=1, keepdims=True) - T)
    return loss, _backward(params, cache, dlogits, None, config.residual_blocks)


@dataclass
class EpochRecord:
    epoch: int
    steps: int
    learning_rate: float
    loss: float
    train_top1: float
    val_micro: float | None = None
    val_macro: float | None = None


@dataclass
class TrainHistory:
    records: list[EpochRecord] = field(default_factory=list)

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def to_csv(self) -> str:
        lines = ["epoch,steps,learning_rate,loss,train_top1,val_micro_top1,val_macro_top1"]
        for r in self.records:
            vals = [r.epoch, r.steps, repr(r.learning_rate), repr(r.loss), repr(r.train_top1)]
            vals += ["" if v is None else repr(v) for v in (r.val_micro, r.val_macro)]
            lines.append(",".join(str(v) for v in vals))
        return "\n".join(lines) + "\n"


@dataclass
class CRLSettings:
    """Class rectification loss switched on for training."""

    alpha: np.ndarray
    minority: frozenset[int]
    margin: float = 0.2


def _top1_micro_macro(P, y, n_classes):
    pred = np.argmax(P, axis=1)  # first max = lowest index on ties
    hit = pred == y
    micro = float(hit.mean())
    present = [c for c in range(n_classes) if np.any(y == c)]
    macro = float(np.mean([hit[y == c].mean() for c in present]))
    return micro, macro


def fit(
    net: GeoNet,
    X,
    y,
    *,
    sample_weight=None,
    sampler: Callable[[int], np.ndarray] | None = None,
    crl: CRLSettings | None = None,
    mixup_alpha: float = 0.0,
    eval_data: tuple[np.ndarray, np.ndarray] | None = None,
    val_data: tuple[np.ndarray, np.ndarray] | None = None,
) -> tuple[GeoNet, TrainHistory]:
    """Mini-batch SGD with classical momentum on encoded features.

    ``sampler(epoch)`` returns the index stream for that epoch; without it
    each epoch is a seeded permutation of the data. ``eval_data`` (defaults to
    ``(X, y)``) is what the per-epoch loss and train accuracy are measured on.
    """
    from .imbalance.augment import mixup_batch
    from .imbalance.crl import crl_loss_and_grads, hard_mine_triplets

    cfg = net.config
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2 or X.shape[1] != cfg.input_dim or X.shape[0] != y.shape[0] or X.shape[0] == 0:
        raise ValueError("X must be (N, 6) with one label per row")
    w_all = np.ones(len(y)) if sample_weight is None else np.asarray(sample_weight, dtype=np.float64)
    if crl is not None and mixup_alpha > 0:
        raise InvalidConfig("MixUp cannot be combined with the class rectification loss")

    eval_X, eval_y = eval_data if eval_data is not None else (X, y)
    eval_w = None if eval_data is not None else w_all

    params = {k: np.array(v) for k, v in net.params.items()}
    velocity = {k: np.zeros_like(v) for k, v in params.items()}
    rng = np.random.default_rng([cfg.seed, 0x5EED])
    history = TrainHistory()
    steps = 0

    for epoch in range(cfg.epochs):
        lr = cfg.learning_rate * cfg.lr_decay**epoch
        order = sampler(epoch) if sampler is not None else rng.permutation(len(y))
        for start in range(0, len(order), cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            xb, yb, wb = X[idx], y[idx], w_all[idx]
            if wb.sum() <= 0:
                continue
            if crl is not None:
                cache = _forward_cache(params, xb, cfg.residual_blocks)
                triplets = hard_mine_triplets(cache["h"], yb, crl.minority)
                _, dlogits, dembed = crl_loss_and_grads(
                    cache["logits"], cache["h"], yb, triplets, crl.alpha, crl.margin
                )
                grads = _backward(params, cache, dlogits, dembed, cfg.residual_blocks)
            else:
                targets = yb
                if mixup_alpha > 0:
                    lam = rng.beta(mixup_alpha, mixup_alpha)
                    perm = rng.permutation(len(idx))
                    onehot = _as_targets(yb, cfg.classes)
                    xb, targets = mixup_batch((xb, onehot), (xb[perm], onehot[perm]), lam)
                    wb = lam * wb + (1 - lam) * wb[perm]
                _, grads = _loss_and_gradients(params, cfg, xb, targets, wb)
            for k in params:
                velocity[k] *= cfg.momentum
                velocity[k] -= lr * grads[k]
                params[k] += velocity[k]
            steps += 1

        loss, _ = _loss_and_gradients(params, cfg, eval_X, eval_y, eval_w)
        P = softmax(_forward_cache(params, eval_X, cfg.residual_blocks)["logits"])
        record = EpochRecord(epoch + 1, steps, lr, loss, float(np.mean(P.argmax(1) == eval_y)))
        if val_data is not None:
            Pv = softmax(_forward_cache(params, val_data[0], cfg.residual_blocks)["logits"])
            record.val_micro, record.val_macro = _top1_micro_macro(Pv, val_data[1], cfg.classes)
        history.records.append(record)

    return net.with_params(params), history


def train(
    net: GeoNet,
    train_set: Dataset,
    val_set: Dataset | None = None,
    strategy: str = "none",
    *,
    mixup_alpha: float = 0.0,
    **strategy_options,
) -> tuple[GeoNet, TrainHistory]:
    """Train on validated datasets with one of the imbalance strategies.

    See :func:`geoprior.imbalance.strategy.prepare` for strategy names and
    their options.
    """
    from .imbalance.strategy import prepare

    net.vocabulary.require_same(train_set.vocabulary, "training set vs network")
    if val_set is not None:
        net.vocabulary.require_same(val_set.vocabulary, "validation set vs network")
    X = encode_observations(train_set.observations, net.feature_convention)
    y = train_set.labels()
    plan = prepare(strategy, X, y, net.config.classes, seed=net.config.seed, **strategy_options)
    val_data = None
    if val_set is not None:
        val_data = (encode_observations(val_set.observations, net.feature_convention), val_set.labels())
    return fit(
        net,
        plan.X,
        plan.y,
        sample_weight=plan.sample_weight,
        sampler=plan.sampler,
        crl=plan.crl,
        mixup_alpha=mixup_alpha,
        eval_data=(X, y) if plan.X is not X else None,
        val_data=val_data,
    )


def predict_dataset(net: GeoNet, dataset: Dataset) -> np.ndarray:
    net.vocabulary.require_same(dataset.vocabulary, "input vs model")
    return predict_proba(net, encode_observations(dataset.observations, net.feature_convention))


def checkpoint_dict(net: GeoNet) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "config": net.config.to_dict(),
        "vocabulary": list(net.vocabulary.classes),
        "feature_convention": net.feature_convention,
        "architecture": "input-proj + 4x[fc-relu-fc-relu]+skip + linear-softmax",
        "parameters": {
            name: {"shape": list(p.shape), "values": p.ravel(order="C").tolist()}
            for name, p in net.params.items()
        },
    }


def save_checkpoint(net: GeoNet, path) -> None:
    # json writes floats as shortest round-trip reprs, so values reload exactly
    text = json.dumps(checkpoint_dict(net), indent=1, sort_keys=False)
    Path(path).write_text(text + "\n", encoding="utf-8")


def load_checkpoint(path) -> GeoNet:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise CorruptFile(f"{path}: not a readable checkpoint ({exc})") from exc
    if not isinstance(doc, dict) or "format_version" not in doc:
        raise CorruptFile(f"{path}: missing format_version")
    if str(doc["format_version"]) != str(FORMAT_VERSION):
        raise UnsupportedVersion(f"{path}: format_version {doc['format_version']!r}")
    try:
        config = GeoNetConfig(**doc["config"])
        vocabulary = ClassVocabulary(tuple(doc["vocabulary"]))
        params = {}
        for name, shape in parameter_shapes(config).items():
            entry = doc["parameters"][name]
            values = np.array(entry["values"], dtype=np.float64)
            if tuple(entry["shape"]) != shape or values.size != int(np.prod(shape)):
                raise CorruptFile(f"{path}: bad shape for {name}")
            if not np.all(np.isfinite(values)):
                raise CorruptFile(f"{path}: non-finite values in {name}")
            params[name] = values.reshape(shape)
        return GeoNet(config, params, vocabulary, doc["feature_convention"])
    except CorruptFile:
        raise
    except (KeyError, TypeError, ValueError, InvalidConfig) as exc:
        raise CorruptFile(f"{path}: {exc}") from exc

