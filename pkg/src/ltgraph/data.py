"""Graph bundles: in-memory representation and on-disk directory format.

A bundle directory holds one undirected attributed graph:

    meta.json          {"num_nodes": N, "num_features": d, "num_classes": K}
    edges.txt          one edge per line, two 0-based ints, single space
    features.bin       magic "GLTB", u32le N, u32le d, N*d float32le row-major
    labels.txt         N lines, one class id per line (ground-truth labels)
    noisy_labels.txt   optional, same format (observed annotations)

Edges are stored canonically (u < v), deduplicated, without self-loops;
self-loops only ever enter through the A + I term of the normalization.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

FEATURES_MAGIC = b"GLTB"


class BundleError(Exception):
    """Base class for bundle validation and I/O failures."""


class MissingFileError(BundleError):
    """A required bundle file is absent."""


class IndexOutOfRangeError(BundleError):
    """An edge endpoint or label exceeds the declared range."""


class ShapeMismatchError(BundleError):
    """A file's row/column counts disagree with meta.json."""


class NonFiniteFeatureError(BundleError):
    """The feature matrix contains NaN or infinity."""


def canonical_edges(edges: np.ndarray) -> np.ndarray:
    """Canonicalize an (E, 2) edge array: u < v, self-loops dropped, deduped, sorted."""
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    keep = edges[:, 0] != edges[:, 1]
    edges = edges[keep]
    lo = np.minimum(edges[:, 0], edges[:, 1])
    hi = np.maximum(edges[:, 0], edges[:, 1])
    stacked = np.stack([lo, hi], axis=1)
    return np.unique(stacked, axis=0) if len(stacked) else stacked


@dataclass(frozen=True)
class GraphBundle:
    """An undirected attributed graph with ground-truth and observed labels.

    Attributes
    ----------
    num_nodes, num_features, num_classes : int
        N, d and K.
    edges : (E, 2) int64 array
        Canonical undirected edges (u < v, unique, no self-loops).
    features : (N, d) float32 array
    latent_labels : (N,) int64 array
        Ground-truth classes; used for evaluation only.
    noisy_labels : (N,) int64 array or None
        Observed annotations (present after noise injection).
    """

    num_nodes: int
    num_features: int
    num_classes: int
    edges: np.ndarray
    features: np.ndarray
    latent_labels: np.ndarray
    noisy_labels: np.ndarray | None = None

    def __post_init__(self):
        n, d, k = self.num_nodes, self.num_features, self.num_classes
        if self.edges.size:
            if self.edges.min() < 0 or self.edges.max() >= n:
                raise IndexOutOfRangeError("edge endpoint out of range")
            if np.any(self.edges[:, 0] >= self.edges[:, 1]):
                raise BundleError("edges must be canonical (u < v, no self-loops)")
            if len(np.unique(self.edges, axis=0)) != len(self.edges):
                raise BundleError("duplicate edges")
        if self.features.shape != (n, d):
            raise ShapeMismatchError(
                f"feature matrix is {self.features.shape}, expected {(n, d)}"
            )
        if not np.all(np.isfinite(self.features)):
            raise NonFiniteFeatureError("features contain non-finite values")
        for name, labels in (("labels", self.latent_labels), ("noisy_labels", self.noisy_labels)):
            if labels is None:
                continue
            if labels.shape != (n,):
                raise ShapeMismatchError(f"{name} has {labels.shape[0]} rows, expected {n}")
            if labels.size and (labels.min() < 0 or labels.max() >= k):
                raise IndexOutOfRangeError("label out of range")

    def with_edges(self, edges: np.ndarray) -> "GraphBundle":
        """Return a copy of the bundle with a replacement edge set."""
        return replace(self, edges=canonical_edges(edges))

    def with_noisy_labels(self, noisy: np.ndarray) -> "GraphBundle":
        return replace(self, noisy_labels=np.asarray(noisy, dtype=np.int64))

    def degrees(self) -> np.ndarray:
        """Per-node degree (without self-loops)."""
        deg = np.zeros(self.num_nodes, dtype=np.int64)
        if self.edges.size:
            np.add.at(deg, self.edges[:, 0], 1)
            np.add.at(deg, self.edges[:, 1], 1)
        return deg


def _read_labels(path: Path, n: int, k: int, name: str) -> np.ndarray:
    raw = path.read_text().split()
    if len(raw) != n:
        raise ShapeMismatchError(f"{name} has {len(raw)} entries, expected {n}")
    labels = np.array([int(v) for v in raw], dtype=np.int64)
    if labels.size and (labels.min() < 0 or labels.max() >= k):
        raise IndexOutOfRangeError("label out of range")
    return labels


def read_edges(path: Path) -> np.ndarray:
    """Read an edges.txt file into a canonical edge array (order/dups tolerated)."""
    pairs = []
    for line in path.read_text().splitlines():
        line = line.strip()
        if not line:
            continue
        u, v = line.split(" ")
        pairs.append((int(u), int(v)))
    return canonical_edges(np.array(pairs, dtype=np.int64).reshape(-1, 2))


def write_edges(path: Path, edges: np.ndarray) -> None:
    path.write_text("".join(f"{u} {v}\n" for u, v in np.asarray(edges)))


def read_features(path: Path) -> np.ndarray:
    blob = path.read_bytes()
    if blob[:4] != FEATURES_MAGIC:
        raise BundleError(f"bad magic in {path.name}: {blob[:4]!r}")
    n, d = struct.unpack("<II", blob[4:12])
    data = np.frombuffer(blob[12:], dtype="<f4")
    if data.size != n * d:
        raise ShapeMismatchError(f"{path.name} payload has {data.size} values, expected {n * d}")
    return data.reshape(n, d).astype(np.float32)


def write_features(path: Path, features: np.ndarray) -> None:
    n, d = features.shape
    with path.open("wb") as fh:
        fh.write(FEATURES_MAGIC)
        fh.write(struct.pack("<II", n, d))
        fh.write(np.ascontiguousarray(features, dtype="<f4").tobytes())


def load_bundle(path: str | Path) -> GraphBundle:
    """Load and validate a graph bundle directory.

    Raises
    ------
    MissingFileError, IndexOutOfRangeError, ShapeMismatchError,
    NonFiniteFeatureError
        One named error per validation failure mode.
    """
    path = Path(path)
    required = ["meta.json", "edges.txt", "features.bin", "labels.txt"]
    for name in required:
        if not (path / name).exists():
            raise MissingFileError(f"missing bundle file: {path / name}")
    meta = json.loads((path / "meta.json").read_text())
    n, d, k = meta["num_nodes"], meta["num_features"], meta["num_classes"]

    edges = read_edges(path / "edges.txt")
    if edges.size and (edges.min() < 0 or edges.max() >= n):
        raise IndexOutOfRangeError("edge endpoint out of range")

    features = read_features(path / "features.bin")
    if features.shape != (n, d):
        raise ShapeMismatchError(
            f"features.bin is {features.shape}, meta.json declares {(n, d)}"
        )
    if not np.all(np.isfinite(features)):
        raise NonFiniteFeatureError("features contain non-finite values")

    latent = _read_labels(path / "labels.txt", n, k, "labels.txt")
    noisy = None
    if (path / "noisy_labels.txt").exists():
        noisy = _read_labels(path / "noisy_labels.txt", n, k, "noisy_labels.txt")

    return GraphBundle(n, d, k, edges, features, latent, noisy)


def save_bundle(bundle: GraphBundle, path: str | Path) -> None:
    """Write a bundle directory (inverse of `load_bundle`)."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    meta = {
        "num_nodes": bundle.num_nodes,
        "num_features": bundle.num_features,
        "num_classes": bundle.num_classes,
    }
    (path / "meta.json").write_text(json.dumps(meta) + "\n")
    write_edges(path / "edges.txt", bundle.edges)
    write_features(path / "features.bin", bundle.features)
    (path / "labels.txt").write_text("".join(f"{v}\n" for v in bundle.latent_labels))
    if bundle.noisy_labels is not None:
        (path / "noisy_labels.txt").write_text("".join(f"{v}\n" for v in bundle.noisy_labels))


@dataclass(frozen=True)
class NodeSplit:
    """Disjoint, exhaustive train/val/test node index sets (each sorted)."""

    train: np.ndarray
    val: np.ndarray
    test: np.ndarray

    @property
    def num_nodes(self) -> int:
        return len(self.train) + len(self.val) + len(self.test)

    def victim_pool(self) -> np.ndarray:
        """Validation and test nodes, the only ones perturbation may touch."""
        return np.sort(np.concatenate([self.val, self.test]))


def split_nodes(n: int, seed: int) -> NodeSplit:
    """Split nodes 40/30/30 by seeded uniform permutation and prefix slicing."""
    from .rng import stage_rng

    if n < 10:
        raise ValueError(f"need at least 10 nodes to split, got {n}")
    perm = stage_rng(seed, "split").permutation(n)
    # exact floor(0.4n) / floor(0.7n); float multiplication misrounds e.g. n=10
    a, b = (4 * n) // 10, (7 * n) // 10
    return NodeSplit(
        train=np.sort(perm[:a]),
        val=np.sort(perm[a:b]),
        test=np.sort(perm[b:]),
    )


def save_split(split: NodeSplit, path: str | Path, seed: int | None = None) -> None:
    payload = {
        "seed": seed,
        "train": split.train.tolist(),
        "val": split.val.tolist(),
        "test": split.test.tolist(),
    }
    Path(path).write_text(json.dumps(payload) + "\n")


def load_split(path: str | Path) -> NodeSplit:
    payload = json.loads(Path(path).read_text())
    return NodeSplit(
        train=np.asarray(payload["train"], dtype=np.int64),
        val=np.asarray(payload["val"], dtype=np.int64),
        test=np.asarray(payload["test"], dtype=np.int64),
    )
