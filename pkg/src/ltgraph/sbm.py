"""Stochastic block model generator for synthetic test-bed graphs.

Every intra-block pair is an independent Bernoulli(p_in) edge and every
inter-block pair an independent Bernoulli(p_out) edge, sampled by
geometric gap skipping so generation is O(edges), not O(pairs).
Features are the one-hot block indicator plus zero-mean Gaussian noise;
the latent label of a node is its block.
"""

from __future__ import annotations

import numpy as np

from .data import GraphBundle, canonical_edges
from .rng import stage_rng


def _bernoulli_positions(num_items: int, p: float, rng: np.random.Generator) -> np.ndarray:
    """0-based indices of successes in `num_items` independent Bernoulli(p) trials."""
    if p <= 0.0 or num_items == 0:
        return np.empty(0, dtype=np.int64)
    if p >= 1.0:
        return np.arange(num_items, dtype=np.int64)
    out = []
    next_trial = 0
    while next_trial < num_items:
        batch = max(256, int((num_items - next_trial) * p * 1.2) + 16)
        pos = next_trial + np.cumsum(rng.geometric(p, size=batch)) - 1
        if pos[-1] >= num_items:
            out.append(pos[pos < num_items])
            break
        out.append(pos)
        next_trial = int(pos[-1]) + 1
    return np.concatenate(out) if out else np.empty(0, dtype=np.int64)


def _triangle_pairs(members: np.ndarray, p: float, rng: np.random.Generator) -> np.ndarray:
    """Sample edges among all unordered pairs of `members`."""
    m = len(members)
    total = m * (m - 1) // 2
    pos = _bernoulli_positions(total, p, rng)
    if len(pos) == 0:
        return np.empty((0, 2), dtype=np.int64)
    # row-major upper triangle: row i owns (m - 1 - i) entries
    row_counts = np.arange(m - 1, 0, -1)
    row_starts = np.concatenate([[0], np.cumsum(row_counts)])
    i = np.searchsorted(row_starts, pos, side="right") - 1
    j = i + 1 + (pos - row_starts[i])
    return np.stack([members[i], members[j]], axis=1)


def _cross_pairs(
    left: np.ndarray, right: np.ndarray, p: float, rng: np.random.Generator
) -> np.ndarray:
    """Sample edges among all pairs (l, r) with l in `left`, r in `right`."""
    total = len(left) * len(right)
    pos = _bernoulli_positions(total, p, rng)
    if len(pos) == 0:
        return np.empty((0, 2), dtype=np.int64)
    i, j = pos // len(right), pos % len(right)
    return np.stack([left[i], right[j]], axis=1)


def synth_sbm(
    blocks: int,
    nodes_per_block: int,
    p_in: float,
    p_out: float,
    feature_noise: float,
    seed: int,
) -> GraphBundle:
    """Generate a stochastic block model bundle with K = `blocks` classes.

    Parameters
    ----------
    blocks, nodes_per_block : int
        Number of communities (= classes) and their common size.
    p_in, p_out : float
        Edge probability inside a block / across blocks; requires p_in > p_out.
    feature_noise : float
        Std of the Gaussian noise added to the one-hot block indicator.
    seed : int
        Drives a dedicated Philox stream; identical seeds give identical bundles.
    """
    if not (0.0 <= p_out < p_in <= 1.0):
        raise ValueError(f"need 0 <= p_out < p_in <= 1, got p_in={p_in}, p_out={p_out}")
    if blocks < 2 or nodes_per_block < 1:
        raise ValueError("need at least 2 blocks of at least 1 node")
    if feature_noise < 0:
        raise ValueError("feature_noise must be nonnegative")

    rng = stage_rng(seed, "synth")
    n = blocks * nodes_per_block
    labels = np.repeat(np.arange(blocks, dtype=np.int64), nodes_per_block)
    members = [np.flatnonzero(labels == b) for b in range(blocks)]

    chunks = []
    for a in range(blocks):
        chunks.append(_triangle_pairs(members[a], p_in, rng))
        for b in range(a + 1, blocks):
            chunks.append(_cross_pairs(members[a], members[b], p_out, rng))
    edges = canonical_edges(np.concatenate(chunks)) if chunks else np.empty((0, 2), np.int64)

    features = np.eye(blocks, dtype=np.float32)[labels]
    if feature_noise > 0:
        features = features + feature_noise * rng.standard_normal((n, blocks)).astype(np.float32)

    return GraphBundle(
        num_nodes=n,
        num_features=blocks,
        num_classes=blocks,
        edges=edges,
        features=features.astype(np.float32),
        latent_labels=labels,
    )
