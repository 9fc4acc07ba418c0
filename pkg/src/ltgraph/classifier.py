"""Node classifiers: two-layer GCN and SGC with hand-derived gradients.

GCN:  logits = A_hat @ relu(A_hat @ X @ W0) @ W1
SGC:  logits = A_hat^hops @ X @ W          (propagation precomputed once)

Both are trained full batch with Adam on the cross-entropy of the
observed (noisy) labels over train nodes only, for a fixed epoch count,
with no dropout, weight decay, or early stopping.  Backpropagation is
written out explicitly; `tests/test_gradients.py` checks every weight
against central finite differences.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .adjacency import NormalizedAdjacency
from .data import GraphBundle, NodeSplit
from .rng import stage_rng

CHECKPOINT_MAGIC = b"GLTW"
_VARIANT_TAGS = {"gcn": 0, "sgc": 1}
_TAG_VARIANTS = {v: k for k, v in _VARIANT_TAGS.items()}


@dataclass
class TrainConfig:
    epochs: int = 200
    learning_rate: float = 1e-3
    hidden: int = 200
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    dtype: str = "float32"  # "float64" for gradient-check mode

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")

    @property
    def np_dtype(self):
        return np.dtype(self.dtype)


@dataclass
class ClassifierParams:
    """Weight matrices of one classifier: [W0, W1] for GCN, [W] for SGC."""

    variant: str
    weights: list[np.ndarray]
    hops: int = 2

    def __post_init__(self):
        if self.variant not in _VARIANT_TAGS:
            raise ValueError(f"unknown variant {self.variant!r}")
        for w in self.weights:
            if not np.all(np.isfinite(w)):
                raise ValueError("non-finite weight matrix")

    def copy(self) -> "ClassifierParams":
        return ClassifierParams(self.variant, [w.copy() for w in self.weights], self.hops)


def init_params(
    variant: str,
    num_features: int,
    num_classes: int,
    config: TrainConfig,
    hops: int = 2,
) -> ClassifierParams:
    """Glorot-uniform initialization from the seeded train stream."""
    rng = stage_rng(config.seed, "train")
    dtype = config.np_dtype

    def glorot(fan_in, fan_out):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        return rng.uniform(-limit, limit, size=(fan_in, fan_out)).astype(dtype)

    if variant == "gcn":
        weights = [glorot(num_features, config.hidden), glorot(config.hidden, num_classes)]
    elif variant == "sgc":
        # zero start, as for any linear softmax model: Glorot noise here can
        # exceed the total distance Adam covers at lr*epochs and drown the fit
        weights = [np.zeros((num_features, num_classes), dtype=dtype)]
    else:
        raise ValueError(f"unknown variant {variant!r}")
    return ClassifierParams(variant, weights, hops)


def gcn_forward(
    adj: NormalizedAdjacency,
    x: np.ndarray,
    params: ClassifierParams,
    cache: dict | None = None,
) -> np.ndarray:
    """logits = A_hat @ relu(A_hat @ X @ W0) @ W1. Pass `cache={}` to record activations."""
    if params.variant != "gcn":
        raise ValueError(f"gcn_forward called with variant {params.variant!r}")
    w0, w1 = params.weights
    if x.shape[1] != w0.shape[0] or w0.shape[1] != w1.shape[0]:
        raise ValueError(
            f"shape mismatch: X{x.shape} @ W0{w0.shape} @ W1{w1.shape}"
        )
    z0 = adj.dot(x.astype(w0.dtype, copy=False))
    a1 = z0 @ w0
    h1 = np.maximum(a1, 0)
    z1 = adj.dot(h1)
    logits = z1 @ w1
    if cache is not None:
        cache.update(z0=z0, a1=a1, h1=h1, z1=z1, logits=logits)
    return logits


def sgc_propagate(adj: NormalizedAdjacency, x: np.ndarray, hops: int, dtype=None) -> np.ndarray:
    """A_hat^hops @ X, the SGC feature propagation (hop 0 is X itself)."""
    out = x.astype(dtype or x.dtype, copy=False)
    for _ in range(hops):
        out = adj.dot(out)
    return out


def sgc_forward(
    adj: NormalizedAdjacency,
    x: np.ndarray,
    params: ClassifierParams,
    cache: dict | None = None,
) -> np.ndarray:
    """logits = A_hat^hops @ X @ W; reuses cache["sx"] when present."""
    if params.variant != "sgc":
        raise ValueError(f"sgc_forward called with variant {params.variant!r}")
    (w,) = params.weights
    if x.shape[1] != w.shape[0]:
        raise ValueError(f"shape mismatch: X{x.shape} @ W{w.shape}")
    if cache is not None and "sx" in cache:
        sx = cache["sx"]
    else:
        sx = sgc_propagate(adj, x, params.hops, dtype=w.dtype)
    logits = sx @ w
    if cache is not None:
        cache.update(sx=sx, logits=logits)
    return logits


def forward(adj, x, params: ClassifierParams, cache: dict | None = None) -> np.ndarray:
    if params.variant == "gcn":
        return gcn_forward(adj, x, params, cache)
    return sgc_forward(adj, x, params, cache)


def softmax_rows(logits: np.ndarray) -> np.ndarray:
    """Row-wise softmax with max subtraction; rows sum to 1."""
    if not np.all(np.isfinite(logits)):
        raise ValueError("non-finite logits")
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def predict_distribution(adj, x, params: ClassifierParams) -> np.ndarray:
    """N x K categorical distribution of the classifier, in float64."""
    return softmax_rows(forward(adj, x, params).astype(np.float64))


def cross_entropy(dist: np.ndarray, labels: np.ndarray) -> float:
    """Mean over rows of -ln dist[n, labels[n]], clamped at 1e-12 before the log."""
    if len(dist) != len(labels):
        raise ValueError(f"{len(dist)} rows vs {len(labels)} labels")
    if labels.size and labels.max() >= dist.shape[1]:
        raise ValueError("label out of range")
    picked = dist[np.arange(len(labels)), labels].astype(np.float64)
    return float(-np.log(np.maximum(picked, 1e-12)).mean())


def backward(
    adj: NormalizedAdjacency,
    x: np.ndarray,
    params: ClassifierParams,
    labels: np.ndarray,
    cache: dict,
    nodes: np.ndarray | None = None,
) -> list[np.ndarray]:
    """Gradients of cross_entropy(softmax(forward), labels over `nodes`).

    `labels` is the full length-N label array; `nodes` selects the rows
    whose loss terms are averaged (default: all).  Requires the cache
    filled by the matching forward call.
    """
    if "logits" not in cache:
        raise ValueError("missing cache: run the forward pass with cache={} first")
    logits = cache["logits"]
    n = logits.shape[0]
    if nodes is None:
        nodes = np.arange(n)
    probs = softmax_rows(logits.astype(np.float64))
    g = np.zeros_like(probs)
    g[nodes] = probs[nodes]
    g[nodes, labels[nodes]] -= 1.0
    g /= len(nodes)
    g = g.astype(logits.dtype)

    if params.variant == "sgc":
        if "sx" not in cache:
            raise ValueError("missing cache: sx")
        return [cache["sx"].T @ g]

    for key in ("z0", "a1", "h1", "z1"):
        if key not in cache:
            raise ValueError(f"missing cache: {key}")
    _, w1 = params.weights
    d_w1 = cache["z1"].T @ g
    d_z1 = g @ w1.T
    d_h1 = adj.dot(d_z1)  # A_hat is symmetric
    d_a1 = d_h1 * (cache["a1"] > 0)
    d_w0 = cache["z0"].T @ d_a1
    return [d_w0, d_w1]


@dataclass
class AdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    t: int = 0

    @classmethod
    def like(cls, params: ClassifierParams) -> "AdamState":
        return cls(
            m=[np.zeros_like(w) for w in params.weights],
            v=[np.zeros_like(w) for w in params.weights],
        )


def adam_step(
    params: ClassifierParams,
    grads: list[np.ndarray],
    state: AdamState,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> None:
    """Standard bias-corrected Adam update, in place."""
    if len(grads) != len(params.weights):
        raise ValueError("gradient/parameter count mismatch")
    state.t += 1
    for w, g, m, v in zip(params.weights, grads, state.m, state.v):
        m *= beta1
        m += (1 - beta1) * g
        v *= beta2
        v += (1 - beta2) * (g * g)
        m_hat = m / (1 - beta1**state.t)
        v_hat = v / (1 - beta2**state.t)
        w -= (lr * m_hat / (np.sqrt(v_hat) + eps)).astype(w.dtype)


@dataclass
class TrainResult:
    params: ClassifierParams
    distribution: np.ndarray  # N x K, all nodes, float64
    losses: list[float] = field(default_factory=list)
    train_accuracy: float = 0.0  # vs noisy labels (the training target)
    val_accuracy: float = 0.0


def train(
    bundle: GraphBundle,
    split: NodeSplit,
    noisy_labels: np.ndarray,
    config: TrainConfig,
    variant: str = "gcn",
    hops: int = 2,
    adj: NormalizedAdjacency | None = None,
) -> TrainResult:
    """Full-batch training on train-node loss; fixed epoch count.

    Returns the trained weights together with the categorical
    distribution over all nodes of the training graph.
    """
    from .adjacency import normalized_adjacency

    noisy_labels = np.asarray(noisy_labels, dtype=np.int64)
    if noisy_labels.shape != (bundle.num_nodes,):
        raise ValueError("noisy_labels must cover every node")
    if adj is None:
        adj = normalized_adjacency(bundle)
    dtype = config.np_dtype
    adj = adj.astype(dtype)  # cast once; adj.dot would otherwise copy per epoch
    x = bundle.features.astype(dtype)
    params = init_params(variant, bundle.num_features, bundle.num_classes, config, hops)
    state = AdamState.like(params)
    train_idx = split.train

    cache: dict = {}
    if variant == "sgc":
        cache["sx"] = sgc_propagate(adj, x, hops, dtype=dtype)

    losses = []
    for _ in range(config.epochs):
        keep_sx = cache.get("sx")
        cache.clear()
        if keep_sx is not None:
            cache["sx"] = keep_sx
        forward(adj, x, params, cache)
        probs = softmax_rows(cache["logits"].astype(np.float64))
        losses.append(cross_entropy(probs[train_idx], noisy_labels[train_idx]))
        grads = backward(adj, x, params, noisy_labels, cache, nodes=train_idx)
        adam_step(params, grads, state, config.learning_rate,
                  config.beta1, config.beta2, config.eps)

    dist = predict_distribution(adj, x, params)
    pred = dist.argmax(axis=1)
    result = TrainResult(params=params, distribution=dist, losses=losses)
    result.train_accuracy = float((pred[split.train] == noisy_labels[split.train]).mean())
    result.val_accuracy = float((pred[split.val] == noisy_labels[split.val]).mean())
    return result


def save_checkpoint(
    params: ClassifierParams,
    path: str | Path,
    config: TrainConfig | None = None,
    metrics: dict | None = None,
) -> None:
    """Write weights as a GLTW file plus a JSON sidecar (config, accuracies)."""
    path = Path(path)
    with path.open("wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<I", 1))
        fh.write(struct.pack("<BBH", _VARIANT_TAGS[params.variant], params.hops,
                             len(params.weights)))
        for w in params.weights:
            fh.write(struct.pack("<II", *w.shape))
        for w in params.weights:
            fh.write(np.ascontiguousarray(w, dtype="<f4").tobytes())
    sidecar = {"variant": params.variant, "hops": params.hops}
    if config is not None:
        sidecar["config"] = {
            "epochs": config.epochs, "learning_rate": config.learning_rate,
            "hidden": config.hidden, "beta1": config.beta1, "beta2": config.beta2,
            "eps": config.eps, "seed": config.seed, "dtype": config.dtype,
        }
    if metrics:
        sidecar.update(metrics)
    path.with_suffix(path.suffix + ".json").write_text(json.dumps(sidecar, indent=1) + "\n")


def load_checkpoint(path: str | Path) -> ClassifierParams:
    path = Path(path)
    blob = path.read_bytes()
    if blob[:4] != CHECKPOINT_MAGIC:
        raise ValueError(f"bad checkpoint magic: {blob[:4]!r}")
    (version,) = struct.unpack("<I", blob[4:8])
    if version != 1:
        raise ValueError(f"unsupported checkpoint version {version}")
    tag, hops, count = struct.unpack("<BBH", blob[8:12])
    offset = 12
    shapes = []
    for _ in range(count):
        shapes.append(struct.unpack("<II", blob[offset:offset + 8]))
        offset += 8
    weights = []
    for rows, cols in shapes:
        size = rows * cols * 4
        weights.append(
            np.frombuffer(blob[offset:offset + size], dtype="<f4").reshape(rows, cols).copy()
        )
        offset += size
    return ClassifierParams(_TAG_VARIANTS[tag], weights, hops)
