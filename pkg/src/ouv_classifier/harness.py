"""Experiment orchestration: grid search, label-smoothing sweep, final
training/evaluation, corpus mining, and report rendering."""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .corpus import Dataset, Sample, preprocess
from .features import (EmbeddingTable, TfidfVocabulary, boe_embed, boe_matrix,
                       fit_tfidf, load_embeddings, tfidf_matrix,
                       tfidf_vectorize, token_frequencies)
from .labels import ALPHA_GRID, PriorWeights, SmoothingConfig
from .metrics import EvalReport, MatchReport, evaluate_matches, evaluate_split
from .model import (TrainConfig, TrainedModel, load_checkpoint, predict_proba,
                    rank_classes, save_checkpoint, train)

DEFAULT_SEEDS = (0, 1, 2, 42, 100, 233, 1024, 1337, 2333, 4399)
GRID_SEED = 1337
VARIANT_ORDER = ("vanilla", "uniform", "prior")


class ReportError(RuntimeError):
    def __init__(self, missing: list[str]):
        super().__init__("missing artifacts: " + ", ".join(missing))
        self.missing = missing


@dataclass
class ExperimentConfig:
    baseline: str = "ngram"
    grid: dict[str, list] = field(default_factory=lambda: {
        "hidden": [50, 100, 150, 200],
        "batch_size": [64, 128, 256],
        "l2": [0.0, 1e-5, 1e-4],
        "dropout": [0.1, 0.2, 0.5],
    })
    learning_rate: float = 2e-4
    seeds: list[int] = field(default_factory=lambda: list(DEFAULT_SEEDS))
    alpha_grid: list[float] = field(default_factory=lambda: list(ALPHA_GRID))
    variants: list[str] = field(default_factory=lambda: list(VARIANT_ORDER))
    grid_seed: int = GRID_SEED
    max_epochs: int = 100
    patience: int = 5
    k: int = 3
    min_df: int = 2
    frequency_threshold: int = 1
    dataset_dir: str = ""
    embeddings_path: str = ""
    prior_path: str = ""
    output_dir: str = "runs"

    @classmethod
    def from_json(cls, path: str | Path) -> "ExperimentConfig":
        with open(path, encoding="utf-8") as fh:
            payload = json.load(fh)
        return cls(**payload)


# ---------------------------------------------------------------------------
# Featurizers

@dataclass
class Featurizer:
    """Uniform front for the n-gram and bag-of-embeddings featurizers."""
    kind: str  # "ngram" | "boe"
    vocab: TfidfVocabulary | None = None
    table: EmbeddingTable | None = None

    @property
    def dimension(self) -> int:
        return self.vocab.size if self.kind == "ngram" else self.table.dimension

    def transform(self, samples: list[Sample]):
        if self.kind == "ngram":
            return tfidf_matrix(self.vocab, samples)
        return boe_matrix(self.table, samples)

    def transform_tokens(self, tokens: list[str]):
        if self.kind == "ngram":
            return tfidf_vectorize(self.vocab, tokens)
        return boe_embed(tokens, self.table)

    def save(self, path: str | Path) -> None:
        if self.kind == "ngram":
            grams = [None] * self.vocab.size
            for gram, idx in self.vocab.gram_to_index.items():
                grams[idx] = gram
            payload = {"type": "ngram", "grams": grams,
                       "idf": [float(v) for v in self.vocab.idf],
                       "min_df": self.vocab.min_df}
        else:
            payload = {"type": "boe", "dimension": self.table.dimension,
                       "vectors": {tok: [float(v) for v in vec]
                                   for tok, vec in
                                   self.table.word_to_vector.items()}}
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, ensure_ascii=False)

    @classmethod
    def load(cls, path: str | Path) -> "Featurizer":
        with open(path, encoding="utf-8") as fh:
            payload = json.load(fh)
        if payload["type"] == "ngram":
            vocab = TfidfVocabulary(
                gram_to_index={g: i for i, g in enumerate(payload["grams"])},
                idf=np.asarray(payload["idf"], dtype=float),
                min_df=int(payload["min_df"]))
            return cls(kind="ngram", vocab=vocab)
        table = EmbeddingTable(
            word_to_vector={tok: np.asarray(vec, dtype=float)
                            for tok, vec in payload["vectors"].items()},
            dimension=int(payload["dimension"]))
        return cls(kind="boe", table=table)


def build_featurizer(config: ExperimentConfig, dataset: Dataset) -> Featurizer:
    if config.baseline == "ngram":
        return Featurizer(kind="ngram",
                          vocab=fit_tfidf(dataset.train, config.min_df))
    if config.baseline == "boe":
        if not config.embeddings_path:
            raise ValueError("BoE baseline requires embeddings_path")
        # cut-off frequency is counted over the full dataset, SD included
        freq = token_frequencies(dataset.train + dataset.valid
                                 + dataset.test + dataset.sd)
        table, _ = load_embeddings(config.embeddings_path,
                                   config.frequency_threshold, freq)
        return Featurizer(kind="boe", table=table)
    raise ValueError(f"unknown baseline {config.baseline!r}")


@dataclass
class FeaturizedData:
    train_x: object
    train_one_hots: np.ndarray
    train_parentals: np.ndarray
    valid_x: object
    valid_labels: np.ndarray


def featurize(featurizer: Featurizer, dataset: Dataset) -> FeaturizedData:
    return FeaturizedData(
        train_x=featurizer.transform(dataset.train),
        train_one_hots=np.stack([s.one_hot for s in dataset.train]),
        train_parentals=np.stack([s.parental for s in dataset.train]),
        valid_x=featurizer.transform(dataset.valid),
        valid_labels=np.array([s.sentence_label - 1 for s in dataset.valid]),
    )


def _train_once(data: FeaturizedData, setting: dict, config: ExperimentConfig,
                smoothing: SmoothingConfig, seed: int,
                mu: PriorWeights | None,
                featurizer_ref: str = "") -> TrainedModel:
    train_config = TrainConfig(
        hidden=int(setting.get("hidden", 200)),
        batch_size=int(setting.get("batch_size", 128)),
        learning_rate=float(setting.get("learning_rate",
                                        config.learning_rate)),
        l2=float(setting.get("l2", 1e-5)),
        dropout=float(setting.get("dropout", 0.5)),
        max_epochs=config.max_epochs,
        patience=config.patience,
        seed=seed,
        k=config.k,
        smoothing=smoothing,
    )
    return train(data.train_x, data.train_one_hots, data.train_parentals,
                 data.valid_x, data.valid_labels, train_config, mu=mu,
                 featurizer_ref=featurizer_ref)


def _best_epoch_scores(model: TrainedModel) -> tuple[float, float]:
    entry = model.history[model.best_epoch - 1]
    return entry["val_top1"], entry["val_topk"]


# ---------------------------------------------------------------------------
# Step 1: grid search

def run_grid_search(config: ExperimentConfig, dataset: Dataset,
                    featurizer: Featurizer | None = None) -> dict:
    """Single-seed grid search; best setting by validation top-k."""
    if not config.grid or not all(config.grid.values()):
        raise ValueError("grid must be non-empty")
    if featurizer is None:
        featurizer = build_featurizer(config, dataset)
    data = featurize(featurizer, dataset)
    keys = sorted(config.grid)
    log = []
    best = None
    for values in itertools.product(*(config.grid[k] for k in keys)):
        setting = dict(zip(keys, values))
        entry = dict(setting)
        try:
            model = _train_once(data, setting, config, SmoothingConfig(),
                                config.grid_seed, mu=None)
        except Exception as exc:  # noqa: BLE001 - sweep must continue
            entry["error"] = str(exc)
            log.append(entry)
            continue
        top1, topk = _best_epoch_scores(model)
        entry.update(val_top1=top1, val_topk=topk,
                     best_epoch=model.best_epoch)
        log.append(entry)
        if best is None or topk > best["val_topk"]:
            best = entry
    if best is None:
        raise RuntimeError("every grid setting failed to train")
    out = Path(config.output_dir) / "step1_grid"
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "log.json", "w", encoding="utf-8") as fh:
        json.dump({"log": log, "best": best, "seed": config.grid_seed},
                  fh, indent=1)
    return {k: v for k, v in best.items()
            if k not in ("val_top1", "val_topk", "best_epoch", "error")}


# ---------------------------------------------------------------------------
# Step 2: label-smoothing sweep

def confidence_lower_bound(values: list[float]) -> float:
    """Lower bound of the normal-approximation 95% CI (sample sd)."""
    n = len(values)
    if n < 2:
        raise ValueError("need at least two values for a confidence interval")
    mean = float(np.mean(values))
    sd = float(np.std(values, ddof=1))
    return mean - 1.96 * sd / math.sqrt(n)


@dataclass
class SweepResult:
    cells: list[dict]
    chosen_variant: str
    chosen_alpha: float

    def to_dict(self) -> dict:
        return {"cells": self.cells, "chosen_variant": self.chosen_variant,
                "chosen_alpha": self.chosen_alpha}


def run_ls_sweep(best_setting: dict, config: ExperimentConfig,
                 dataset: Dataset, mu: PriorWeights,
                 featurizer: Featurizer | None = None) -> SweepResult:
    """Train every (variant, alpha, seed) cell and pick the configuration
    maximizing the summed 95%-CI lower bounds of val top-1 and top-k."""
    if len(config.seeds) < 2:
        raise ValueError("the sweep requires at least two seeds")
    if featurizer is None:
        featurizer = build_featurizer(config, dataset)
    data = featurize(featurizer, dataset)
    cells = []
    for variant in config.variants:
        if variant not in VARIANT_ORDER:
            raise ValueError(f"unknown variant {variant!r}")
        for alpha in config.alpha_grid:
            runs = []
            failures = []
            for seed in config.seeds:
                smoothing = SmoothingConfig(variant=variant, alpha=alpha)
                try:
                    model = _train_once(data, best_setting, config,
                                        smoothing, seed, mu)
                except Exception as exc:  # noqa: BLE001
                    failures.append({"seed": seed, "error": str(exc)})
                    continue
                top1, topk = _best_epoch_scores(model)
                runs.append({"seed": seed, "val_top1": top1,
                             "val_topk": topk,
                             "best_epoch": model.best_epoch})
            cell = {"variant": variant, "alpha": alpha, "runs": runs,
                    "failures": failures}
            if len(runs) >= 2:
                top1s = [r["val_top1"] for r in runs]
                topks = [r["val_topk"] for r in runs]
                cell.update(
                    mean_top1=float(np.mean(top1s)),
                    sd_top1=float(np.std(top1s, ddof=1)),
                    mean_topk=float(np.mean(topks)),
                    sd_topk=float(np.std(topks, ddof=1)),
                    score=confidence_lower_bound(top1s)
                    + confidence_lower_bound(topks),
                )
            cells.append(cell)

    scored = [c for c in cells if "score" in c]
    if not scored:
        raise RuntimeError("no sweep cell completed at least two seeds")
    # ties: smallest alpha first, then vanilla < uniform < prior
    def sort_key(cell):
        return (-cell["score"], cell["alpha"],
                VARIANT_ORDER.index(cell["variant"]))
    winner = min(scored, key=sort_key)
    result = SweepResult(cells=cells, chosen_variant=winner["variant"],
                         chosen_alpha=winner["alpha"])
    out = Path(config.output_dir) / "step2_sweep"
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "sweep.json", "w", encoding="utf-8") as fh:
        json.dump({"setting": best_setting, **result.to_dict()}, fh, indent=1)
    return result


# ---------------------------------------------------------------------------
# Step 3: final training and evaluation

def evaluate_model(model: TrainedModel, featurizer: Featurizer,
                   samples: list[Sample], k: int = 3,
                   multilabel: bool = False) -> EvalReport | MatchReport:
    x = featurizer.transform(samples)
    probs = predict_proba(model, x)
    rankings = rank_classes(probs).tolist()
    if multilabel:
        return evaluate_matches(rankings, [s.parental for s in samples], k=k)
    return evaluate_split(rankings, [s.sentence_label for s in samples], k=k)


def _final_row(model: TrainedModel, featurizer: Featurizer,
               dataset: Dataset, k: int) -> dict:
    valid_report = evaluate_model(model, featurizer, dataset.valid, k=k)
    test_report = evaluate_model(model, featurizer, dataset.test, k=k)
    row = {
        "val_top1": valid_report.top1_accuracy,
        "val_topk": valid_report.topk_accuracy,
        "val_macro_f1": valid_report.macro_f1,
        "test_top1": test_report.top1_accuracy,
        "test_topk": test_report.topk_accuracy,
        "test_macro_f1": test_report.macro_f1,
        "valid_report": valid_report.to_dict(),
        "test_report": test_report.to_dict(),
    }
    if dataset.sd:
        sd_report = evaluate_model(model, featurizer, dataset.sd, k=k,
                                   multilabel=True)
        row["sd_top1_match"] = sd_report.top1_match
        row["sd_topk_match"] = sd_report.topk_match
    return row


def run_final(best_setting: dict, chosen_ls: SmoothingConfig,
              config: ExperimentConfig, dataset: Dataset, mu: PriorWeights,
              featurizer: Featurizer | None = None) -> dict:
    """Train the chosen-LS and no-LS models on the grid seed and evaluate
    on valid/test plus the SD set when present."""
    if featurizer is None:
        featurizer = build_featurizer(config, dataset)
    out = Path(config.output_dir) / "step3_final"
    out.mkdir(parents=True, exist_ok=True)
    featurizer_path = out / "featurizer.json"
    featurizer.save(featurizer_path)
    data = featurize(featurizer, dataset)

    rows = {}
    models = {}
    for label, smoothing in (("no_ls", SmoothingConfig()),
                             ("ls", chosen_ls)):
        model = _train_once(data, best_setting, config, smoothing,
                            config.grid_seed, mu,
                            featurizer_ref=str(featurizer_path))
        row = _final_row(model, featurizer, dataset, config.k)
        row["smoothing"] = {"variant": smoothing.variant,
                            "alpha": smoothing.alpha}
        row["history"] = model.history
        row["best_epoch"] = model.best_epoch
        rows[label] = row
        models[label] = model
        save_checkpoint(model, out / f"model_{label}.json")

    sd_missing = not dataset.sd
    payload = {"baseline": config.baseline, "setting": best_setting,
               "seed": config.grid_seed, "rows": rows,
               "sd_evaluated": not sd_missing}
    with open(out / "final.json", "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=1)
    payload["models"] = models
    return payload


# ---------------------------------------------------------------------------
# Corpus mining (two-model agreement filter)

@dataclass
class Predictor:
    model: TrainedModel
    featurizer: Featurizer

    @classmethod
    def load(cls, checkpoint_path: str | Path) -> "Predictor":
        model = load_checkpoint(checkpoint_path)
        if not model.featurizer_ref:
            raise ValueError(f"{checkpoint_path} has no featurizer reference")
        return cls(model=model, featurizer=Featurizer.load(model.featurizer_ref))

    def top3(self, tokens: list[str]) -> list[tuple[int, float]]:
        x = self.featurizer.transform_tokens(tokens)
        probs = np.asarray(predict_proba(self.model, x)).reshape(-1)
        order = np.argsort(-probs, kind="stable")[:3]
        return [(int(i) + 1, float(probs[i])) for i in order]


def mine(texts: list[str], predictor_a: Predictor, predictor_b: Predictor,
         confidence_threshold: float = 0.8,
         iou_threshold: float = 0.5) -> list[dict]:
    """Keep sentences where both models are confident and agree.

    A sentence passes when each model's top-3 confidence sum exceeds the
    confidence threshold and the IoU of the two top-3 class sets exceeds
    the IoU threshold (both strict).
    """
    kept = []
    for text in texts:
        tokens = preprocess(text)
        if not tokens:
            continue
        top_a = predictor_a.top3(tokens)
        top_b = predictor_b.top3(tokens)
        conf_a = sum(c for _, c in top_a)
        conf_b = sum(c for _, c in top_b)
        set_a = {cls for cls, _ in top_a}
        set_b = {cls for cls, _ in top_b}
        iou = len(set_a & set_b) / len(set_a | set_b)
        if (conf_a > confidence_threshold and conf_b > confidence_threshold
                and iou > iou_threshold):
            kept.append({"sentence": text,
                         "predictions_a": top_a, "predictions_b": top_b,
                         "confidence_a": conf_a, "confidence_b": conf_b,
                         "iou": iou})
    return kept


# ---------------------------------------------------------------------------
# Reporting

_EXPECTED_ARTIFACTS = ("step1_grid/log.json", "step2_sweep/sweep.json",
                       "step3_final/final.json")


def report(artifacts_dir: str | Path) -> dict:
    """Render a human-readable summary plus machine JSON and curve CSV."""
    root = Path(artifacts_dir)
    missing = [rel for rel in _EXPECTED_ARTIFACTS
               if not (root / rel).exists()]
    if missing:
        raise ReportError(missing)
    with open(root / "step1_grid/log.json", encoding="utf-8") as fh:
        grid = json.load(fh)
    with open(root / "step2_sweep/sweep.json", encoding="utf-8") as fh:
        sweep = json.load(fh)
    with open(root / "step3_final/final.json", encoding="utf-8") as fh:
        final = json.load(fh)

    lines = [f"baseline: {final['baseline']}",
             f"grid best setting: {final['setting']} (seed {final['seed']})",
             f"chosen LS: {sweep['chosen_variant']} "
             f"alpha={sweep['chosen_alpha']}",
             "",
             f"{'row':>6} {'val1':>7} {'valk':>7} {'valF1':>7} "
             f"{'test1':>7} {'testk':>7} {'testF1':>7} "
             f"{'SD1':>7} {'SDk':>7}"]
    for label, row in final["rows"].items():
        lines.append(
            f"{label:>6} {row['val_top1']:7.4f} {row['val_topk']:7.4f} "
            f"{row['val_macro_f1']:7.4f} {row['test_top1']:7.4f} "
            f"{row['test_topk']:7.4f} {row['test_macro_f1']:7.4f} "
            f"{row.get('sd_top1_match', float('nan')):7.4f} "
            f"{row.get('sd_topk_match', float('nan')):7.4f}")
    lines.append("")
    lines.append("sweep cells (mean ± 1.96·sd/√n lower bounds):")
    for cell in sweep["cells"]:
        if "score" in cell:
            lines.append(
                f"  {cell['variant']:>8} alpha={cell['alpha']:<5} "
                f"top1={cell['mean_top1']:.4f}±{cell['sd_top1']:.4f} "
                f"topk={cell['mean_topk']:.4f}±{cell['sd_topk']:.4f} "
                f"score={cell['score']:.4f}")
    summary_text = "\n".join(lines)

    curve_rows = ["row,epoch,train_loss,val_top1,val_topk"]
    for label, row in final["rows"].items():
        for entry in row["history"]:
            curve_rows.append(
                f"{label},{entry['epoch']},{entry['train_loss']},"
                f"{entry['val_top1']},{entry['val_topk']}")

    summary = {"grid": grid["best"], "sweep": {
        "chosen_variant": sweep["chosen_variant"],
        "chosen_alpha": sweep["chosen_alpha"]},
        "final": {label: {k: v for k, v in row.items()
                          if k not in ("history", "valid_report",
                                       "test_report")}
                  for label, row in final["rows"].items()}}
    with open(root / "summary.json", "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=1)
    with open(root / "summary.txt", "w", encoding="utf-8") as fh:
        fh.write(summary_text + "\n")
    with open(root / "curves.csv", "w", encoding="utf-8") as fh:
        fh.write("\n".join(curve_rows) + "\n")
    return {"text": summary_text, "summary": summary}
