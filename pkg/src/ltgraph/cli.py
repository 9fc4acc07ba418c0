"""Command-line interface.

Subcommands operate on a bundle directory (--bundle) and a workspace
directory (--out) and compose: running synth/split/noise/train/perturb/
infer/eval by hand with the same seeds produces the same artifacts as
one `pipeline` invocation.  Every stage derives its randomness from the
global --seed with a stage-specific id mixed in, so stage order never
changes the numbers a stage draws.

Workspace layout:

    OUT/split.json                  node split
    OUT/checkpoint.gltw(.json)      trained weights + sidecar
    OUT/infer/                      inference on the clean graph
    OUT/infer_perturbed/            inference on the perturbed graph
    OUT/report.jsonl, *.csv         scenario rows and confusion matrices

Errors print a single machine-parsable line `error: <reason>` to stderr
and exit nonzero.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
import time
from pathlib import Path

import numpy as np

from .adjacency import normalized_adjacency
from .classifier import (
    TrainConfig,
    load_checkpoint,
    predict_distribution,
    save_checkpoint,
    train,
)
from .data import (
    BundleError,
    load_bundle,
    load_split,
    read_edges,
    save_bundle,
    save_split,
    split_nodes,
)
from .datasets import PRESETS, make_dataset, train_epochs_for
from .evaluate import ReportWriter, _scenario_report, accuracy
from .inference import InferenceConfig, run_inference, write_inference_outputs
from .perturb import (
    NoiseSpec,
    PerturbSpec,
    inject_label_noise,
    simulate_perturbators,
    write_noisy_labels,
    write_perturbed_edges,
)
from .transition import DirichletPrior, warmup_transition


class CliError(Exception):
    pass


def _missing(kind: str, path: Path) -> CliError:
    return CliError(f"missing artifact: {kind} ({path})")


def _emit(summary: dict, as_json: bool) -> None:
    if as_json:
        print(json.dumps(summary))
    else:
        for key, val in summary.items():
            print(f"{key}: {val}")


def _load_bundle_arg(args) -> tuple:
    if not args.bundle:
        raise CliError("missing artifact: bundle (--bundle not given)")
    path = Path(args.bundle)
    if not path.is_dir():
        raise _missing("bundle", path)
    return load_bundle(path), path


def _require_split(out: Path):
    path = out / "split.json"
    if not path.exists():
        raise _missing("split", path)
    return load_split(path)


def _require_noisy(bundle, bundle_dir: Path) -> np.ndarray:
    if bundle.noisy_labels is None:
        raise _missing("noisy labels", bundle_dir / "noisy_labels.txt")
    return bundle.noisy_labels


def cmd_synth(args) -> dict:
    out = Path(args.out)
    if args.dataset:
        bundle = make_dataset(args.dataset, args.seed)
        preset = dataclasses.asdict(PRESETS[args.dataset])
    else:
        from .sbm import synth_sbm

        bundle = synth_sbm(
            args.blocks, args.nodes_per_block, args.p_in, args.p_out,
            args.feature_noise, args.seed,
        )
        preset = {
            "blocks": args.blocks, "nodes_per_block": args.nodes_per_block,
            "p_in": args.p_in, "p_out": args.p_out, "feature_noise": args.feature_noise,
        }
    save_bundle(bundle, out)
    manifest = {"dataset": args.dataset, "seed": args.seed, **preset}
    (out / "synth_manifest.json").write_text(json.dumps(manifest) + "\n")
    return {
        "bundle": str(out),
        "nodes": bundle.num_nodes,
        "edges": len(bundle.edges),
        "classes": bundle.num_classes,
        "avg_degree": round(2 * len(bundle.edges) / bundle.num_nodes, 3),
    }


def cmd_split(args) -> dict:
    bundle, _ = _load_bundle_arg(args)
    split = split_nodes(bundle.num_nodes, args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_split(split, out / "split.json", seed=args.seed)
    return {
        "split": str(out / "split.json"),
        "train": len(split.train), "val": len(split.val), "test": len(split.test),
    }


def cmd_noise(args) -> dict:
    bundle, bundle_dir = _load_bundle_arg(args)
    spec = NoiseSpec(args.nr, args.seed)
    noisy = inject_label_noise(bundle.latent_labels, bundle.num_classes, spec)
    flips = int((noisy != bundle.latent_labels).sum())
    write_noisy_labels(bundle_dir, noisy, spec, flips)
    return {"noisy_labels": str(bundle_dir / "noisy_labels.txt"),
            "nr": args.nr, "flips": flips}


def cmd_train(args) -> dict:
    bundle, bundle_dir = _load_bundle_arg(args)
    out = Path(args.out)
    split = _require_split(out)
    noisy = _require_noisy(bundle, bundle_dir)
    epochs = args.epochs_train or train_epochs_for(args.dataset or "", default=200)
    config = TrainConfig(epochs=epochs, learning_rate=args.lr, hidden=args.hidden,
                         seed=args.seed)
    t0 = time.perf_counter()
    result = train(bundle, split, noisy, config, variant=args.model, hops=args.hops)
    seconds = time.perf_counter() - t0
    ckpt = out / "checkpoint.gltw"
    save_checkpoint(result.params, ckpt, config, {
        "train_accuracy": result.train_accuracy,
        "val_accuracy": result.val_accuracy,
        "final_loss": result.losses[-1],
        "train_seconds": seconds,
    })
    return {"checkpoint": str(ckpt), "train_accuracy": round(result.train_accuracy, 4),
            "val_accuracy": round(result.val_accuracy, 4),
            "final_loss": round(result.losses[-1], 6)}


def cmd_perturb(args) -> dict:
    bundle, bundle_dir = _load_bundle_arg(args)
    split = _require_split(Path(args.out))
    spec = PerturbSpec(args.fraction, args.budget, args.seed)
    perturbed, manifest = simulate_perturbators(bundle, split, spec)
    write_perturbed_edges(bundle_dir, perturbed, manifest)
    return {"perturbed_edges": str(bundle_dir / "perturbed_edges.txt"),
            "perturbators": len(manifest["perturbators"]),
            "added_edges": manifest["added_edges"]}


def _predictions(bundle, bundle_dir, out, perturbed: bool):
    """Distributions of the frozen checkpoint on the clean and target graphs."""
    ckpt_path = out / "checkpoint.gltw"
    if not ckpt_path.exists():
        raise _missing("checkpoint", ckpt_path)
    params = load_checkpoint(ckpt_path)
    clean_dist = predict_distribution(normalized_adjacency(bundle), bundle.features, params)
    if not perturbed:
        return params, clean_dist, clean_dist
    edges_path = bundle_dir / "perturbed_edges.txt"
    if not edges_path.exists():
        raise _missing("perturbed edges", edges_path)
    pert_bundle = bundle.with_edges(read_edges(edges_path))
    pert_dist = predict_distribution(
        normalized_adjacency(pert_bundle), pert_bundle.features, params
    )
    return params, clean_dist, pert_dist


def cmd_infer(args) -> dict:
    bundle, bundle_dir = _load_bundle_arg(args)
    out = Path(args.out)
    split = _require_split(out)
    noisy = _require_noisy(bundle, bundle_dir)
    _, clean_dist, target_dist = _predictions(bundle, bundle_dir, out, args.perturbed)

    prior = DirichletPrior.symmetric(bundle.num_classes, args.alpha)
    phi_warm = warmup_transition(clean_dist[split.train], noisy[split.train], prior)
    config = InferenceConfig(
        warmup_steps=args.ws, epochs=args.epochs_infer,
        update_mode=args.update_mode, dynamic_phi=not args.fixed_phi, seed=args.seed,
    )
    result = run_inference(
        target_dist[split.test], noisy[split.test], phi_warm, prior, config,
        latent=bundle.latent_labels[split.test],
    )
    infer_dir = out / ("infer_perturbed" if args.perturbed else "infer")
    write_inference_outputs(infer_dir, result, config, prior)
    acc = accuracy(result.inferred_labels, bundle.latent_labels[split.test])
    return {"inferred_labels": str(infer_dir / "inferred_labels.txt"),
            "accuracy": round(acc, 4), "seconds": round(result.seconds, 3)}


def cmd_eval(args) -> dict:
    bundle, bundle_dir = _load_bundle_arg(args)
    out = Path(args.out)
    split = _require_split(out)
    noise_manifest = bundle_dir / "noise_manifest.json"
    if not noise_manifest.exists():
        raise _missing("noise manifest", noise_manifest)
    nr = json.loads(noise_manifest.read_text())["nr"]
    sidecar_path = out / "checkpoint.gltw.json"
    if not sidecar_path.exists():
        raise _missing("checkpoint sidecar", sidecar_path)
    sidecar = json.loads(sidecar_path.read_text())
    dataset = args.dataset or bundle_dir.name
    timings = not args.no_timings
    latent_test = bundle.latent_labels[split.test]
    k = bundle.num_classes

    perturbed = (out / "infer_perturbed").exists()
    t0 = time.perf_counter()
    _, clean_dist, target_dist = _predictions(bundle, bundle_dir, out, perturbed)
    predict_seconds = time.perf_counter() - t0

    reports = {}
    reports["before-perturbation"] = _scenario_report(
        "before-perturbation", clean_dist[split.test].argmax(axis=1), latent_test, k,
        sidecar.get("train_seconds", 0.0),
    )
    if perturbed:
        reports["after-perturbation"] = _scenario_report(
            "after-perturbation", target_dist[split.test].argmax(axis=1), latent_test,
            k, predict_seconds,
        )
    infer_dir = out / ("infer_perturbed" if perturbed else "infer")
    labels_path = infer_dir / "inferred_labels.txt"
    if not labels_path.exists():
        raise _missing("inferred labels", labels_path)
    inferred = np.array([int(v) for v in labels_path.read_text().split()], dtype=np.int64)
    run_manifest = json.loads((infer_dir / "run.json").read_text())
    reports["after-LT"] = _scenario_report(
        "after-LT", inferred, latent_test, k, run_manifest["seconds"],
    )

    writer = ReportWriter(out)
    rows = []
    for name in ("before-perturbation", "after-perturbation", "after-LT"):
        if name not in reports:
            continue
        rep = reports[name]
        row = {
            "dataset": dataset, "classifier": sidecar["variant"], "nr": nr,
            "scenario": name, "accuracy": rep.accuracy,
            "seconds": rep.seconds if timings else 0.0,
            "unit_seconds": rep.unit_seconds if timings else 0.0,
            "seed": args.seed,
        }
        if name == "after-LT":
            row["phi"] = "dynamic" if run_manifest["config"]["dynamic_phi"] else "fixed"
        writer.append(row)
        writer.write_confusion(dataset, name, nr, rep.confusion)
        rows.append(row)
    (out / "eval_manifest.json").write_text(
        json.dumps({"dataset": dataset, "nr": nr, "seed": args.seed,
                    "timings": timings}) + "\n"
    )
    return {"report": str(writer.path), "rows": len(rows),
            "accuracies": {r["scenario"]: round(r["accuracy"], 4) for r in rows}}


def cmd_pipeline(args) -> dict:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.bundle:
        bundle_dir = Path(args.bundle)
    else:
        if not args.dataset:
            raise CliError("missing artifact: bundle (give --bundle or --dataset)")
        bundle_dir = out / "bundle"
        synth_args = argparse.Namespace(
            dataset=args.dataset, seed=args.seed, out=bundle_dir,
            blocks=None, nodes_per_block=None, p_in=None, p_out=None,
            feature_noise=None,
        )
        cmd_synth(synth_args)
    args.bundle = str(bundle_dir)

    cmd_split(args)
    cmd_noise(args)
    cmd_train(args)
    if args.perturb:
        cmd_perturb(args)
    infer_args = argparse.Namespace(**vars(args))
    infer_args.perturbed = args.perturb
    cmd_infer(infer_args)
    summary = cmd_eval(args)
    summary["out"] = str(out)
    return summary


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ltgraph",
        description="Train node classifiers on noisy labels and repair their "
                    "predictions by label-transition inference.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, bundle=True):
        p.add_argument("--seed", type=int, default=0, help="global seed")
        p.add_argument("--out", default=".", help="workspace directory")
        p.add_argument("--json", action="store_true", help="JSON summary on stdout")
        if bundle:
            p.add_argument("--bundle", default=None, help="bundle directory")

    p = sub.add_parser("synth", help="generate a synthetic bundle")
    common(p, bundle=False)
    p.add_argument("--dataset", choices=sorted(PRESETS), default=None)
    p.add_argument("--blocks", type=int, default=None)
    p.add_argument("--nodes-per-block", type=int, default=None)
    p.add_argument("--p-in", type=float, default=None)
    p.add_argument("--p-out", type=float, default=None)
    p.add_argument("--feature-noise", type=float, default=0.0)

    p = sub.add_parser("split", help="write the 40/30/30 node split")
    common(p)

    p = sub.add_parser("noise", help="inject uniform label noise")
    common(p)
    p.add_argument("--nr", type=float, default=0.1, help="noise ratio")

    p = sub.add_parser("train", help="train a classifier on noisy labels")
    common(p)
    p.add_argument("--dataset", default=None,
                   help="preset name (sets the default epoch count)")
    _train_flags(p)

    p = sub.add_parser("perturb", help="simulate random-edge perturbators")
    common(p)
    _perturb_flags(p)

    p = sub.add_parser("infer", help="repair predictions by Gibbs inference")
    common(p)
    _infer_flags(p)
    p.add_argument("--perturbed", action="store_true",
                   help="predict on the perturbed graph")

    p = sub.add_parser("eval", help="score scenarios into report.jsonl")
    common(p)
    p.add_argument("--dataset", default=None, help="dataset name for report rows")
    p.add_argument("--no-timings", action="store_true",
                   help="write 0.0 timing fields (byte-stable reports)")

    p = sub.add_parser("pipeline", help="run every stage end to end")
    common(p)
    p.add_argument("--dataset", choices=sorted(PRESETS), default=None)
    p.add_argument("--nr", type=float, default=0.1)
    p.add_argument("--perturb", action="store_true")
    p.add_argument("--no-timings", action="store_true")
    _train_flags(p)
    _perturb_flags(p)
    _infer_flags(p)
    return parser


def _train_flags(p):
    p.add_argument("--model", choices=("gcn", "sgc"), default="gcn")
    p.add_argument("--epochs-train", type=int, default=None,
                   help="default: preset value or 200")
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--hidden", type=int, default=200)
    p.add_argument("--hops", type=int, default=2)


def _perturb_flags(p):
    p.add_argument("--fraction", type=float, default=0.01)
    p.add_argument("--budget", type=int, default=100)


def _infer_flags(p):
    p.add_argument("--ws", type=int, default=20, help="warm-up sweeps")
    p.add_argument("--epochs-infer", type=int, default=100)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--update-mode", choices=("incremental", "per-epoch"),
                   default="incremental")
    p.add_argument("--fixed-phi", action="store_true",
                   help="ablation: never switch to dynamic counts")


_COMMANDS = {
    "synth": cmd_synth,
    "split": cmd_split,
    "noise": cmd_noise,
    "train": cmd_train,
    "perturb": cmd_perturb,
    "infer": cmd_infer,
    "eval": cmd_eval,
    "pipeline": cmd_pipeline,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        summary = _COMMANDS[args.command](args)
    except (CliError, BundleError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    _emit(summary, args.json)
    return 0


if __name__ == "__main__":
    sys.exit(main())
