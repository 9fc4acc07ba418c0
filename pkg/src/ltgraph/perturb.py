"""Corruption protocols: uniform label noise and random-edge perturbators.

Label noise replaces the labels of exactly floor(nr * N) uniformly
chosen nodes (all nodes, train and test alike) with a label drawn
uniformly from the other K-1 classes.  Perturbator simulation picks 1%
of the validation/test nodes and connects each to `budget` new victims
drawn from the validation/test pool, never touching a train endpoint.
Both are pure functions of (input, seed).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data import GraphBundle, NodeSplit, canonical_edges, write_edges
from .rng import stage_rng


@dataclass(frozen=True)
class NoiseSpec:
    nr: float
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.nr <= 1.0:
            raise ValueError(f"noise ratio must be in [0, 1], got {self.nr}")


@dataclass(frozen=True)
class PerturbSpec:
    perturbator_fraction: float = 0.01
    budget: int = 100
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.perturbator_fraction <= 1.0:
            raise ValueError("perturbator_fraction must be in (0, 1]")
        if self.budget < 1:
            raise ValueError("budget must be >= 1")


def inject_label_noise(latent: np.ndarray, k: int, spec: NoiseSpec) -> np.ndarray:
    """Return a noisy copy of `latent` with exactly floor(nr*N) uniform flips.

    Every flipped position gets a label different from its original,
    uniform over the remaining K-1 classes.
    """
    latent = np.asarray(latent, dtype=np.int64)
    n = len(latent)
    # floor(nr * N) with a nudge so decimal ratios like 0.3 * 10 don't land on 2.9999...
    num_flips = int(np.floor(spec.nr * n + 1e-9))
    if num_flips > 0 and k < 2:
        raise ValueError("need at least 2 classes to flip labels")
    noisy = latent.copy()
    if num_flips == 0:
        return noisy
    rng = stage_rng(spec.seed, "noise")
    positions = rng.choice(n, size=num_flips, replace=False)
    # uniform over the K-1 other classes: draw in [0, K-1) and skip the original
    draws = rng.integers(0, k - 1, size=num_flips)
    noisy[positions] = np.where(draws >= latent[positions], draws + 1, draws)
    return noisy


def simulate_perturbators(
    bundle: GraphBundle, split: NodeSplit, spec: PerturbSpec
) -> tuple[GraphBundle, dict]:
    """Add random perturbator edges to the validation/test subgraph.

    ceil(fraction * |val u test|) perturbators are drawn uniformly from
    the validation/test pool; each gains exactly `budget` new undirected
    edges to distinct victims from the same pool (excluding itself and
    current neighbors, including edges added earlier in the same run).
    Returns the perturbed bundle and an audit manifest.
    """
    pool = split.victim_pool()
    if len(pool) < spec.budget + 1:
        raise ValueError(
            f"val/test pool of {len(pool)} cannot host budget {spec.budget}"
        )
    rng = stage_rng(spec.seed, "perturb")
    num_perturbators = int(np.ceil(spec.perturbator_fraction * len(pool)))
    perturbators = np.sort(rng.choice(pool, size=num_perturbators, replace=False))

    pool_set = set(pool.tolist())
    neighbors: dict[int, set] = {int(p): set() for p in perturbators}
    for u, v in bundle.edges:
        u, v = int(u), int(v)
        if u in neighbors and v in pool_set:
            neighbors[u].add(v)
        if v in neighbors and u in pool_set:
            neighbors[v].add(u)

    new_edges = []
    for p in perturbators.tolist():
        taken = neighbors[p]
        candidates = np.array([v for v in pool.tolist() if v != p and v not in taken])
        if len(candidates) < spec.budget:
            raise ValueError(
                f"perturbator {p} has only {len(candidates)} candidate victims, "
                f"needs {spec.budget}"
            )
        victims = rng.choice(candidates, size=spec.budget, replace=False)
        for v in victims.tolist():
            new_edges.append((p, v))
            taken.add(v)
            if v in neighbors:  # keep later perturbators' pools consistent
                neighbors[v].add(p)

    combined = np.concatenate([bundle.edges, np.array(new_edges, dtype=np.int64)])
    perturbed = bundle.with_edges(canonical_edges(combined))
    manifest = {
        "perturbator_fraction": spec.perturbator_fraction,
        "budget": spec.budget,
        "seed": spec.seed,
        "perturbators": [int(p) for p in perturbators],
        "added_edges": len(new_edges),
    }
    return perturbed, manifest


def write_noisy_labels(
    bundle_dir: str | Path, noisy: np.ndarray, spec: NoiseSpec, flip_count: int
) -> None:
    """Freeze a noisy labeling next to its bundle, with an audit manifest."""
    bundle_dir = Path(bundle_dir)
    (bundle_dir / "noisy_labels.txt").write_text("".join(f"{v}\n" for v in noisy))
    manifest = {"nr": spec.nr, "seed": spec.seed, "flip_count": flip_count}
    (bundle_dir / "noise_manifest.json").write_text(json.dumps(manifest) + "\n")


def write_perturbed_edges(
    bundle_dir: str | Path, perturbed: GraphBundle, manifest: dict
) -> None:
    bundle_dir = Path(bundle_dir)
    write_edges(bundle_dir / "perturbed_edges.txt", perturbed.edges)
    (bundle_dir / "perturb_manifest.json").write_text(json.dumps(manifest) + "\n")
