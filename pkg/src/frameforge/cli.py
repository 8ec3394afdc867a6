"""Command-line entry point binding the pipeline stages.

Exit codes: 0 success, 2 validation/input error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

import numpy as np

from .clustering import ClusterAssignment, one_step_induce, two_step_induce
from .data import (
    Dataset,
    DatasetError,
    SplitSpec,
    dataset_stats,
    load_dataset,
    make_splits,
)
from .harness import BudgetSpec, GridSpec, run_cv
from .losses import LOSS_KINDS, LossConfig
from .metrics import (
    TABLE_HEADER,
    overlap_split_mean,
    ranking_recall,
    score_assignment,
)
from .training import (
    TrainConfig,
    checkpoint_hash,
    encode,
    load_checkpoint,
    save_checkpoint,
    train,
)
from .vectors import combine, l2_normalize

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_NUMERICAL = 3


class CliError(Exception):
    def __init__(self, message: str, code: int = EXIT_INVALID):
        super().__init__(message)
        self.code = code


def _load_data(path: str) -> Dataset:
    if not Path(path).exists():
        raise CliError(f"dataset file not found: {path}")
    try:
        return load_dataset(path)
    except DatasetError as exc:
        raise CliError(f"invalid dataset {path}: {exc}") from exc


def _load_split(path: str) -> SplitSpec:
    if not Path(path).exists():
        raise CliError(f"split file not found: {path}")
    return SplitSpec.load(path)


def _load_ckpt(path: str):
    if not Path(path).exists():
        raise CliError(f"checkpoint file not found: {path}")
    return load_checkpoint(path)


def _threads(args) -> int:
    if args.threads is not None:
        return args.threads
    env = os.environ.get("FRAMEFORGE_THREADS")
    return int(env) if env else 1


def cmd_split(args) -> int:
    ds = _load_data(args.data)
    try:
        split = make_splits(ds, seed=args.seed)
    except DatasetError as exc:
        raise CliError(str(exc)) from exc
    split.save(args.out)
    print(f"{'fold':>4} {'#verbs':>7} {'#LUs':>6} {'#frames':>8} {'#instances':>11}")
    for fold in (1, 2, 3):
        sub = ds.subset_by_lemmas(split.lemmas_in_fold(fold))
        st = dataset_stats(sub)
        print(
            f"{fold:>4} {st.num_verbs:>7} {st.num_lus:>6} "
            f"{st.num_frames:>8} {st.num_instances:>11}"
        )
    return EXIT_OK


def cmd_train(args) -> int:
    ds = _load_data(args.data)
    if args.split:
        split = _load_split(args.split)
        train_fold, _, _ = SplitSpec.rotation_roles(args.rotation)
        ds = ds.subset_by_lemmas(split.lemmas_in_fold(train_fold))
    cfg = TrainConfig(
        batch_size=args.batch_size,
        learning_rate=args.learning_rate,
        epochs=args.epochs,
        seed=args.seed,
    )
    loss_cfg = LossConfig(kind=args.loss, margin=args.margin)
    result = train(ds, cfg, loss_cfg)
    save_checkpoint(args.out, result)
    print(f"wrote checkpoint {args.out} (loss={args.loss}, seed={args.seed})")
    return EXIT_OK


def cmd_cluster(args) -> int:
    ds = _load_data(args.data)
    ckpt = _load_ckpt(args.checkpoint)
    if ds.dim != ckpt.encoder.weight.shape[1]:
        raise CliError(
            f"dataset dim {ds.dim} does not match checkpoint "
            f"dim {ckpt.encoder.weight.shape[1]}"
        )
    num_plus = None
    if args.mode == "one-step":
        assignment = one_step_induce(ds, ckpt.encoder, args.alpha, args.threshold)
    else:
        plus, assignment = two_step_induce(
            ds, ckpt.encoder, args.alpha, args.threshold,
            k_max_per_lemma=args.k_max, seed=args.seed, threads=_threads(args),
        )
        num_plus = plus.num_clusters
    obj = {
        "labels": {k: int(v) for k, v in sorted(assignment.labels.items())},
        "num_clusters": assignment.num_clusters,
        "num_plus": num_plus,
        "threshold": args.threshold,
        "alpha": args.alpha,
        "mode": args.mode,
        "checkpoint_hash": checkpoint_hash(args.checkpoint),
    }
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, separators=(",", ":"))
        fh.write("\n")
    print(f"wrote {args.out}: #C={assignment.num_clusters}"
          + (f" #pLU={num_plus}" if num_plus is not None else ""))
    return EXIT_OK


def cmd_eval(args) -> int:
    ds = _load_data(args.data)
    if not Path(args.assignment).exists():
        raise CliError(f"assignment file not found: {args.assignment}")
    with open(args.assignment, encoding="utf-8") as fh:
        obj = json.load(fh)
    pred = ClusterAssignment(
        labels={str(k): int(v) for k, v in obj["labels"].items()},
        num_clusters=int(obj["num_clusters"]),
    )
    try:
        report = score_assignment(pred, ds.gold_labels(), num_plus=obj.get("num_plus"))
    except ValueError as exc:
        raise CliError(str(exc)) from exc
    print(TABLE_HEADER)
    print(report.table_row(label=obj.get("mode", "")))
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(report.to_dict(), fh, separators=(",", ":"))
            fh.write("\n")
    return EXIT_OK


def _mixed_embeddings(ds: Dataset, enc, alpha: float) -> dict[str, np.ndarray]:
    out = {}
    for rec in ds.records:
        e_w = encode(enc, rec.v_word)
        e_m = encode(enc, rec.v_mask)
        out[rec.id] = l2_normalize(combine(e_w, e_m, alpha))
    return out


def cmd_rank(args) -> int:
    ds = _load_data(args.data)
    ckpt = _load_ckpt(args.checkpoint)
    emb = _mixed_embeddings(ds, ckpt.encoder, args.alpha)
    tagged: list[tuple[str, float]] = []
    skipped = 0
    for rec in ds.records:
        try:
            r = ranking_recall(rec.id, ds, emb, space=args.space)
        except ValueError:
            skipped += 1
            continue
        tagged.append((rec.gold_frame, r))
    if not tagged:
        raise CliError("no query has a same-frame instance in the chosen space")
    mean = sum(r for _, r in tagged) / len(tagged)
    print(f"space={args.space} queries={len(tagged)} skipped={skipped} "
          f"mean_recall={mean:.4f}")
    if args.train_frames:
        with open(args.train_frames, encoding="utf-8") as fh:
            train_frames = set(json.load(fh))
        ov, non = overlap_split_mean(tagged, train_frames)
        print(f"overlap={'absent' if ov is None else f'{ov:.4f}'} "
              f"non_overlap={'absent' if non is None else f'{non:.4f}'}")
    return EXIT_OK


def cmd_cv(args) -> int:
    ds = _load_data(args.data)
    split = _load_split(args.split) if args.split else make_splits(ds, seed=args.seed)
    grid = GridSpec(k_max_per_lemma=args.k_max)
    cfg = TrainConfig(
        batch_size=args.batch_size,
        learning_rate=args.learning_rate,
        epochs=args.epochs,
        seed=args.seed,
    )
    budget = BudgetSpec("all" if args.budget == "all" else int(args.budget))
    mode = args.mode.replace("-", "_")
    result = run_cv(ds, split, args.loss, mode, grid, cfg, budget, threads=_threads(args))
    out = Path(args.out)
    for fold in result.folds:
        fold_dir = out / args.loss / mode / f"fold{fold.rotation}"
        fold_dir.mkdir(parents=True, exist_ok=True)
        save_checkpoint(fold_dir / "checkpoint.json", fold.checkpoint)
        with open(fold_dir / "dev_grid.csv", "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["alpha", "margin", "threshold", "bcf"])
            for row in fold.grid_rows:
                writer.writerow([row.alpha, row.margin, row.threshold, row.dev_bcf])
        with open(fold_dir / "test_metrics.json", "w", encoding="utf-8") as fh:
            json.dump(fold.test_report.to_dict(), fh, separators=(",", ":"))
            fh.write("\n")
    summary = {
        "loss": args.loss,
        "mode": mode,
        "seed": args.seed,
        "budget": args.budget,
        "average": result.average.to_dict(),
        "folds": [
            {
                "rotation": f.rotation,
                "margin": f.margin,
                "alpha": f.alpha,
                "threshold": f.threshold,
                "dev_bcf": f.dev_bcf,
                "test": f.test_report.to_dict(),
            }
            for f in result.folds
        ],
    }
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "summary.json", "w", encoding="utf-8") as fh:
        json.dump(summary, fh, separators=(",", ":"), sort_keys=True)
        fh.write("\n")
    print(TABLE_HEADER)
    for f in result.folds:
        print(f.test_report.table_row(f"fold{f.rotation}"))
    print(result.average.table_row(f"{args.loss} (avg)"))
    return EXIT_OK


def cmd_export_embeddings(args) -> int:
    ds = _load_data(args.data)
    ckpt = _load_ckpt(args.checkpoint)
    if ds.dim != ckpt.encoder.weight.shape[1]:
        raise CliError(
            f"dataset dim {ds.dim} does not match checkpoint "
            f"dim {ckpt.encoder.weight.shape[1]}"
        )
    emb = _mixed_embeddings(ds, ckpt.encoder, args.alpha)
    with open(args.out, "w", encoding="utf-8") as fh:
        for rec in ds.records:
            vals = "\t".join(repr(float(x)) for x in emb[rec.id])
            fh.write(f"{rec.id}\t{rec.lemma}\t{rec.gold_frame}\t{vals}\n")
    print(f"wrote {len(ds)} rows to {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="frameforge",
        description="Supervised semantic frame induction pipeline",
    )
    parser.add_argument("--threads", type=int, default=None,
                        help="worker cap (default: FRAMEFORGE_THREADS or 1)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("split", help="partition lemmas into three folds")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=42)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("train", help="train an encoder checkpoint")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--loss", choices=LOSS_KINDS, required=True)
    p.add_argument("--margin", type=float, default=0.0)
    p.add_argument("--split", default=None)
    p.add_argument("--rotation", type=int, default=0)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--learning-rate", type=float, default=1e-5)
    p.add_argument("--epochs", type=int, default=5)
    p.add_argument("--seed", type=int, default=42)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("cluster", help="induce frame clusters")
    p.add_argument("--data", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--mode", choices=("one-step", "two-step"), default="one-step")
    p.add_argument("--alpha", type=float, default=0.0)
    p.add_argument("--threshold", type=float, required=True)
    p.add_argument("--k-max", type=int, default=10)
    p.add_argument("--seed", type=int, default=42)
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("eval", help="score an assignment against gold frames")
    p.add_argument("--data", required=True)
    p.add_argument("--assignment", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("rank", help="similarity-ranking recall")
    p.add_argument("--data", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--alpha", type=float, default=0.0)
    p.add_argument("--space", choices=("all", "same", "diff"), default="all")
    p.add_argument("--train-frames", default=None,
                   help="JSON list of training frames for the overlap split")
    p.set_defaults(func=cmd_rank)

    p = sub.add_parser("cv", help="three-fold cross-validation with grid search")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--loss", choices=LOSS_KINDS, required=True)
    p.add_argument("--mode", choices=("one-step", "two-step"), default="one-step")
    p.add_argument("--split", default=None)
    p.add_argument("--budget", choices=("1", "2", "5", "10", "all"), default="all")
    p.add_argument("--k-max", type=int, default=10)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--learning-rate", type=float, default=1e-5)
    p.add_argument("--epochs", type=int, default=5)
    p.add_argument("--seed", type=int, default=42)
    p.set_defaults(func=cmd_cv)

    p = sub.add_parser("export-embeddings", help="dump mixed embeddings as TSV")
    p.add_argument("--data", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--alpha", type=float, default=0.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export_embeddings)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except DatasetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        if "normalize" in str(exc) or "degenerate" in str(exc):
            print(f"numerical error: {exc}", file=sys.stderr)
            return EXIT_NUMERICAL
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
