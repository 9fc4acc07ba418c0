"""Metrics and the three-scenario experiment harness.

A scenario row scores the test nodes against the latent labels in one of
three states: `before-perturbation` (classifier on the clean graph),
`after-perturbation` (same weights, perturbed graph) and `after-LT`
(labels repaired by transition inference).  Rows stream to an
append-only report.jsonl; confusion matrices go to CSV files next to it.
Timing fields hold wall-clock measurements and can be suppressed
(written as 0.0) when byte-stable output matters more than runtimes.
"""

from __future__ import annotations

import dataclasses
import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .adjacency import normalized_adjacency
from .classifier import TrainConfig, predict_distribution, train
from .data import GraphBundle, split_nodes
from .inference import InferenceConfig, InferenceResult, run_inference
from .perturb import NoiseSpec, PerturbSpec, inject_label_noise, simulate_perturbators
from .transition import DirichletPrior, warmup_transition

SCENARIOS = ("before-perturbation", "after-perturbation", "after-LT")


def accuracy(pred: np.ndarray, latent: np.ndarray) -> float:
    """Fraction of exact matches."""
    pred, latent = np.asarray(pred), np.asarray(latent)
    if pred.shape != latent.shape:
        raise ValueError(f"length mismatch: {pred.shape} vs {latent.shape}")
    return float((pred == latent).mean())


def confusion_matrix(pred: np.ndarray, latent: np.ndarray, k: int) -> np.ndarray:
    """counts[i, j] = number of nodes with latent label i predicted as j."""
    pred, latent = np.asarray(pred, dtype=np.int64), np.asarray(latent, dtype=np.int64)
    if pred.size and (pred.min() < 0 or pred.max() >= k):
        raise ValueError("predicted label out of range")
    if latent.size and (latent.min() < 0 or latent.max() >= k):
        raise ValueError("latent label out of range")
    counts = np.zeros((k, k), dtype=np.int64)
    np.add.at(counts, (latent, pred), 1)
    return counts


def log_heatmap_export(confusion: np.ndarray) -> np.ndarray:
    """log10(count + 1), the scale used for confusion heat maps."""
    return np.log10(np.asarray(confusion, dtype=np.float64) + 1.0)


@dataclass
class ScenarioReport:
    scenario: str
    accuracy: float
    confusion: np.ndarray
    seconds: float
    unit_seconds: float  # seconds per 100 evaluated nodes

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ValueError(f"unknown scenario {self.scenario!r}")
        total = int(self.confusion.sum())
        trace = int(np.trace(self.confusion))
        if total and abs(self.accuracy - trace / total) > 1e-9:
            raise ValueError("accuracy inconsistent with confusion matrix")


@dataclass
class CellOutcome:
    """Everything one (dataset, classifier, nr, seed) experiment produced."""

    rows: list[dict]
    reports: dict[str, ScenarioReport]
    inference: InferenceResult
    fixed_phi_inference: InferenceResult | None = None


def _scenario_report(scenario, pred, latent, k, seconds) -> ScenarioReport:
    return ScenarioReport(
        scenario=scenario,
        accuracy=accuracy(pred, latent),
        confusion=confusion_matrix(pred, latent, k),
        seconds=seconds,
        unit_seconds=seconds / (len(pred) / 100.0),
    )


def run_cell(
    bundle: GraphBundle,
    dataset: str,
    variant: str,
    nr: float,
    seed: int,
    perturb: PerturbSpec | None = None,
    train_config: TrainConfig | None = None,
    infer_config: InferenceConfig | None = None,
    alpha: float = 1.0,
    ablation: bool = False,
    timings: bool = True,
) -> CellOutcome:
    """Run split -> noise -> train -> (perturb) -> predict -> infer -> score once."""
    k = bundle.num_classes
    split = split_nodes(bundle.num_nodes, seed)
    noisy = inject_label_noise(bundle.latent_labels, k, NoiseSpec(nr, seed))
    train_config = dataclasses.replace(train_config or TrainConfig(), seed=seed)
    infer_config = dataclasses.replace(infer_config or InferenceConfig(), seed=seed)
    prior = DirichletPrior.symmetric(k, alpha)
    latent_test = bundle.latent_labels[split.test]

    t0 = time.perf_counter()
    trained = train(bundle, split, noisy, train_config, variant=variant)
    train_seconds = time.perf_counter() - t0
    clean_dist = trained.distribution
    phi_warm = warmup_transition(clean_dist[split.train], noisy[split.train], prior)

    reports: dict[str, ScenarioReport] = {}
    reports["before-perturbation"] = _scenario_report(
        "before-perturbation", clean_dist[split.test].argmax(axis=1),
        latent_test, k, train_seconds,
    )

    if perturb is not None:
        t0 = time.perf_counter()
        perturbed, _ = simulate_perturbators(bundle, split, dataclasses.replace(perturb, seed=seed))
        pert_dist = predict_distribution(
            normalized_adjacency(perturbed), perturbed.features, trained.params
        )
        pert_seconds = time.perf_counter() - t0
        reports["after-perturbation"] = _scenario_report(
            "after-perturbation", pert_dist[split.test].argmax(axis=1),
            latent_test, k, pert_seconds,
        )
        infer_dist = pert_dist
    else:
        infer_dist = clean_dist

    inference = run_inference(
        infer_dist[split.test], noisy[split.test], phi_warm, prior, infer_config,
        latent=latent_test,
    )
    reports["after-LT"] = _scenario_report(
        "after-LT", inference.inferred_labels, latent_test, k, inference.seconds,
    )

    fixed_inference = None
    if ablation:
        fixed_cfg = dataclasses.replace(infer_config, dynamic_phi=False)
        fixed_inference = run_inference(
            infer_dist[split.test], noisy[split.test], phi_warm, prior, fixed_cfg,
            latent=latent_test,
        )

    rows = []
    for name in SCENARIOS:
        if name not in reports:
            continue
        rep = reports[name]
        row = {
            "dataset": dataset,
            "classifier": variant,
            "nr": nr,
            "scenario": name,
            "accuracy": rep.accuracy,
            "seconds": rep.seconds if timings else 0.0,
            "unit_seconds": rep.unit_seconds if timings else 0.0,
            "seed": seed,
        }
        if name == "after-LT":
            row["phi"] = "dynamic" if infer_config.dynamic_phi else "fixed"
        rows.append(row)
    if fixed_inference is not None:
        fixed_seconds = fixed_inference.seconds if timings else 0.0
        rows.append({
            "dataset": dataset,
            "classifier": variant,
            "nr": nr,
            "scenario": "after-LT",
            "accuracy": accuracy(fixed_inference.inferred_labels, latent_test),
            "seconds": fixed_seconds,
            "unit_seconds": fixed_seconds / (len(latent_test) / 100.0),
            "seed": seed,
            "phi": "fixed",
        })
    return CellOutcome(rows, reports, inference, fixed_inference)


class ReportWriter:
    """Append-only JSON-lines report plus per-scenario confusion CSVs."""

    def __init__(self, out_dir: str | Path):
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.path = self.out_dir / "report.jsonl"

    def append(self, row: dict) -> None:
        with self.path.open("a") as fh:
            fh.write(json.dumps(row) + "\n")

    def write_confusion(self, dataset: str, scenario: str, nr: float,
                        confusion: np.ndarray) -> None:
        name = f"{dataset}_{scenario}_{nr}.csv"
        (self.out_dir / name).write_text(
            "".join(",".join(str(v) for v in row) + "\n" for row in confusion)
        )


def max_workers() -> int:
    """Worker-thread cap from LT_THREADS (default 1 = serial)."""
    try:
        return max(1, int(os.environ.get("LT_THREADS", "1")))
    except ValueError:
        return 1


def run_pipeline(
    bundle: GraphBundle,
    dataset: str = "bundle",
    seeds: tuple[int, ...] = (0, 1, 2),
    nrs: tuple[float, ...] = (0.1,),
    variants: tuple[str, ...] = ("gcn",),
    perturb: PerturbSpec | None = None,
    train_config: TrainConfig | None = None,
    infer_config: InferenceConfig | None = None,
    alpha: float = 1.0,
    ablation: bool = False,
    out_dir: str | Path | None = None,
    timings: bool = True,
) -> list[dict]:
    """Grid experiment over (variant, nr, seed); one report row per scenario.

    Cells are independent and may run in LT_THREADS parallel workers;
    rows are always emitted in grid order, so reruns with identical
    seeds produce identical reports (timings aside).
    """
    cells = [(v, nr, s) for v in variants for nr in nrs for s in seeds]

    def _run(cell):
        v, nr, s = cell
        return run_cell(
            bundle, dataset, v, nr, s, perturb=perturb, train_config=train_config,
            infer_config=infer_config, alpha=alpha, ablation=ablation, timings=timings,
        )

    workers = max_workers()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_run, cells))
    else:
        outcomes = [_run(c) for c in cells]

    writer = ReportWriter(out_dir) if out_dir is not None else None
    rows = []
    for (variant, nr, seed), outcome in zip(cells, outcomes):
        rows.extend(outcome.rows)
        if writer is not None:
            for row in outcome.rows:
                writer.append(row)
            for name, rep in outcome.reports.items():
                writer.write_confusion(dataset, name, nr, rep.confusion)
    return rows
