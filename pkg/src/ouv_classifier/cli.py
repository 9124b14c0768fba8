"""Command-line interface.

Exit codes: 0 success, 1 fatal error, 2 partial success (e.g. a final run
without SD data).
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import NUM_CRITERIA
from .corpus import (ConfigurationError, build_dataset, build_sd_set,
                     parse_syndication, read_dataset, read_sites,
                     write_dataset, write_sites)
from .harness import (ExperimentConfig, Predictor, ReportError,
                      build_featurizer, evaluate_model, featurize, mine,
                      report, run_final, run_grid_search, run_ls_sweep,
                      _train_once)
from .labels import (PriorWeights, SmoothingConfig, cooccurrence,
                     prior_weights)
from .model import save_checkpoint


def _load_config(path: str) -> tuple[ExperimentConfig, dict]:
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    known = set(ExperimentConfig.__dataclass_fields__)
    extra = {k: payload.pop(k) for k in list(payload) if k not in known}
    return ExperimentConfig(**payload), extra


def _load_prior(path: str) -> PriorWeights:
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    return PriorWeights(mu=np.asarray(payload["mu"], dtype=float))


def cmd_ingest(args) -> int:
    sites, errors = parse_syndication(args.csv)
    if errors:
        print(f"{len(errors)} row-level errors:", file=sys.stderr)
        for err in errors:
            print(f"  {err}", file=sys.stderr)
    justified = [s for s in sites if s.justification]
    dataset = build_dataset(justified, seed=args.seed)
    dataset.sd.extend(build_sd_set(sites))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_dataset(dataset, out)
    write_sites(justified, out / "sites.json")
    print(f"train={len(dataset.train)} valid={len(dataset.valid)} "
          f"test={len(dataset.test)} sd={len(dataset.sd)} "
          f"sites={len(justified)}")
    return 0


def cmd_prior(args) -> int:
    sites = read_sites(Path(args.dataset) / "sites.json")
    matrix = cooccurrence(sites)
    mu = prior_weights(matrix)
    out = Path(args.out)
    payload = {"counts": matrix.counts.tolist(), "mu": mu.mu.tolist()}
    with open(out, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=1)
    csv_path = out.with_suffix(".csv")
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        header = [""] + [str(k) for k in range(1, NUM_CRITERIA + 1)]
        writer.writerow(["counts"] + header[1:])
        for k, row in enumerate(matrix.counts.tolist(), start=1):
            writer.writerow([k] + row)
        writer.writerow(["mu"] + header[1:] + ["others"])
        for k, row in enumerate(mu.mu.tolist(), start=1):
            writer.writerow([k] + row)
    print(f"wrote {out} and {csv_path}")
    return 0


def cmd_train(args) -> int:
    config, extra = _load_config(args.config)
    config.baseline = args.baseline or config.baseline
    dataset = read_dataset(config.dataset_dir)
    featurizer = build_featurizer(config, dataset)
    data = featurize(featurizer, dataset)
    smoothing = SmoothingConfig(**extra.get("smoothing",
                                            {"variant": "none", "alpha": 0}))
    mu = _load_prior(config.prior_path) if config.prior_path else None
    setting = extra.get("setting", {})
    seed = extra.get("seed", config.grid_seed)
    out = Path(args.out or Path(config.output_dir) / "model.json")
    out.parent.mkdir(parents=True, exist_ok=True)
    featurizer_path = out.with_name(out.stem + "_featurizer.json")
    featurizer.save(featurizer_path)
    model = _train_once(data, setting, config, smoothing, seed, mu,
                        featurizer_ref=str(featurizer_path))
    save_checkpoint(model, out)
    last = model.history[model.best_epoch - 1]
    print(f"best_epoch={model.best_epoch} val_top1={last['val_top1']:.4f} "
          f"val_topk={last['val_topk']:.4f} checkpoint={out}")
    return 0


def cmd_sweep(args) -> int:
    config, _ = _load_config(args.config)
    dataset = read_dataset(config.dataset_dir)
    featurizer = build_featurizer(config, dataset)
    best = run_grid_search(config, dataset, featurizer=featurizer)
    mu = _load_prior(config.prior_path) if config.prior_path else None
    if mu is None:
        sites = read_sites(Path(config.dataset_dir) / "sites.json")
        mu = prior_weights(cooccurrence(sites))
    result = run_ls_sweep(best, config, dataset, mu, featurizer=featurizer)
    print(f"best setting: {best}")
    print(f"chosen LS: {result.chosen_variant} alpha={result.chosen_alpha}")
    return 0


def cmd_final(args) -> int:
    config, _ = _load_config(args.config)
    dataset = read_dataset(config.dataset_dir)
    out = Path(config.output_dir)
    with open(out / "step1_grid/log.json", encoding="utf-8") as fh:
        grid = json.load(fh)
    best = {k: v for k, v in grid["best"].items()
            if k not in ("val_top1", "val_topk", "best_epoch", "error")}
    with open(out / "step2_sweep/sweep.json", encoding="utf-8") as fh:
        sweep = json.load(fh)
    chosen = SmoothingConfig(variant=sweep["chosen_variant"],
                             alpha=sweep["chosen_alpha"])
    mu = _load_prior(config.prior_path) if config.prior_path else None
    if mu is None:
        sites = read_sites(Path(config.dataset_dir) / "sites.json")
        mu = prior_weights(cooccurrence(sites))
    payload = run_final(best, chosen, config, dataset, mu)
    for label, row in payload["rows"].items():
        print(f"{label}: val_top1={row['val_top1']:.4f} "
              f"val_topk={row['val_topk']:.4f} "
              f"test_top1={row['test_top1']:.4f} "
              f"test_topk={row['test_topk']:.4f}")
    if not payload["sd_evaluated"]:
        print("warning: no SD data; SD metrics omitted", file=sys.stderr)
        return 2
    return 0


def cmd_evaluate(args) -> int:
    predictor = Predictor.load(args.model)
    dataset = read_dataset(args.dataset)
    samples = dataset.split(args.split)
    if not samples:
        print(f"split {args.split!r} is empty", file=sys.stderr)
        return 1
    rep = evaluate_model(predictor.model, predictor.featurizer, samples,
                         k=args.k, multilabel=args.split == "sd")
    print(json.dumps(rep.to_dict(), indent=1))
    return 0


def cmd_mine(args) -> int:
    predictor_a = Predictor.load(args.models[0])
    predictor_b = Predictor.load(args.models[1])
    with open(args.input, encoding="utf-8") as fh:
        texts = [line.strip() for line in fh if line.strip()]
    kept = mine(texts, predictor_a, predictor_b,
                confidence_threshold=args.confidence,
                iou_threshold=args.iou)
    output = json.dumps(kept, indent=1)
    if args.out:
        Path(args.out).write_text(output + "\n", encoding="utf-8")
    else:
        print(output)
    print(f"kept {len(kept)} of {len(texts)} sentences", file=sys.stderr)
    return 0


def cmd_report(args) -> int:
    result = report(args.dir)
    print(result["text"])
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ouvclf",
        description="OUV selection-criteria sentence classifier pipeline")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="build the dataset from a syndication CSV")
    p.add_argument("csv")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=1337)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("prior", help="emit the co-occurrence prior")
    p.add_argument("dataset")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_prior)

    p = sub.add_parser("train", help="train a single model")
    p.add_argument("--baseline", choices=["ngram", "boe"])
    p.add_argument("--config", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("sweep", help="grid search + label-smoothing sweep")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("final", help="final training and evaluation")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_final)

    p = sub.add_parser("evaluate", help="evaluate a checkpoint on a split")
    p.add_argument("--model", required=True)
    p.add_argument("--split", choices=["valid", "test", "sd"], required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--k", type=int, default=3)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("mine", help="filter sentences by two-model agreement")
    p.add_argument("--models", nargs=2, required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--confidence", type=float, default=0.8)
    p.add_argument("--iou", type=float, default=0.5)
    p.add_argument("--out")
    p.set_defaults(func=cmd_mine)

    p = sub.add_parser("report", help="summarize run artifacts")
    p.add_argument("dir")
    p.set_defaults(func=cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ReportError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ConfigurationError, FileNotFoundError, ValueError,
            RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
