"""Feature extraction: TF-IDF over 1-2 grams and averaged word embeddings."""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import sparse

from .corpus import Sample


@dataclass
class TfidfVocabulary:
    gram_to_index: dict[str, int]
    idf: np.ndarray
    min_df: int

    @property
    def size(self) -> int:
        return len(self.gram_to_index)

    def save(self, path: str | Path) -> None:
        grams = [None] * self.size
        for gram, idx in self.gram_to_index.items():
            grams[idx] = gram
        payload = {"grams": grams, "idf": [float(v) for v in self.idf],
                   "min_df": self.min_df}
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, ensure_ascii=False)

    @classmethod
    def load(cls, path: str | Path) -> "TfidfVocabulary":
        with open(path, encoding="utf-8") as fh:
            payload = json.load(fh)
        gram_to_index = {g: i for i, g in enumerate(payload["grams"])}
        return cls(gram_to_index=gram_to_index,
                   idf=np.asarray(payload["idf"], dtype=float),
                   min_df=int(payload["min_df"]))


def _grams(tokens: list[str]) -> list[str]:
    unigrams = list(tokens)
    bigrams = [f"{a} {b}" for a, b in zip(tokens, tokens[1:])]
    return unigrams + bigrams


def fit_tfidf(train_samples: list[Sample], min_df: int = 2) -> TfidfVocabulary:
    """Build the 1-2 gram vocabulary and smoothed idf from the train split.

    idf = ln((1 + N) / (1 + df)) + 1; indices follow lexicographic gram
    order for determinism.
    """
    if not train_samples:
        raise ValueError("cannot fit on an empty train split")
    if min_df < 1:
        raise ValueError("min_df must be >= 1")
    df: Counter[str] = Counter()
    for sample in train_samples:
        df.update(set(_grams(sample.tokens)))
    kept = sorted(g for g, count in df.items() if count >= min_df)
    if not kept:
        raise ValueError("vocabulary is empty after min_df filtering")
    n_docs = len(train_samples)
    idf = np.array([math.log((1 + n_docs) / (1 + df[g])) + 1 for g in kept])
    return TfidfVocabulary(gram_to_index={g: i for i, g in enumerate(kept)},
                           idf=idf, min_df=min_df)


def tfidf_vectorize(vocab: TfidfVocabulary,
                    tokens: list[str]) -> sparse.csr_matrix:
    """TF-IDF vector (1 x V sparse row), L2-normalized unless all-zero."""
    counts: Counter[int] = Counter()
    for gram in _grams(tokens):
        idx = vocab.gram_to_index.get(gram)
        if idx is not None:
            counts[idx] += 1
    if not counts:
        return sparse.csr_matrix((1, vocab.size))
    indices = sorted(counts)
    values = np.array([counts[i] * vocab.idf[i] for i in indices])
    values /= np.linalg.norm(values)
    return sparse.csr_matrix((values, ([0] * len(indices), indices)),
                             shape=(1, vocab.size))


def tfidf_matrix(vocab: TfidfVocabulary,
                 samples: list[Sample]) -> sparse.csr_matrix:
    rows = [tfidf_vectorize(vocab, s.tokens) for s in samples]
    return sparse.vstack(rows, format="csr")


@dataclass
class EmbeddingTable:
    word_to_vector: dict[str, np.ndarray]
    dimension: int
    unk_token: str = "<unk>"

    def vector(self, token: str) -> np.ndarray:
        return self.word_to_vector.get(token,
                                       self.word_to_vector[self.unk_token])


def load_embeddings(file_path: str | Path, frequency_threshold: int,
                    train_vocab: dict[str, int]) -> tuple[EmbeddingTable, list[str]]:
    """Load a text-format embedding file, keeping frequent corpus tokens.

    Tokens whose corpus frequency is below the threshold fall back to
    "<unk>", whose vector is the mean of all kept vectors. Returns the
    table plus a report of unreadable lines.
    """
    vectors: dict[str, np.ndarray] = {}
    errors: list[str] = []
    dimension = None
    with open(file_path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            parts = line.rstrip("\n").split(" ")
            if len(parts) < 2:
                errors.append(f"line {line_no}: too few fields")
                continue
            token = parts[0]
            try:
                vec = np.array([float(v) for v in parts[1:]])
            except ValueError:
                errors.append(f"line {line_no}: non-numeric value")
                continue
            if dimension is None:
                dimension = len(vec)
            elif len(vec) != dimension:
                raise ValueError(
                    f"line {line_no}: dimension {len(vec)} != {dimension}")
            if train_vocab.get(token, 0) >= frequency_threshold:
                vectors[token] = vec
    if not vectors:
        raise ValueError("no embeddings survived the frequency filter")
    mean_vec = np.mean(list(vectors.values()), axis=0)
    vectors["<unk>"] = mean_vec
    return EmbeddingTable(word_to_vector=vectors, dimension=dimension), errors


def boe_embed(tokens: list[str], table: EmbeddingTable) -> np.ndarray:
    """Mean of the token vectors; unknown tokens map to <unk>."""
    if not tokens:
        raise ValueError("cannot embed an empty token sequence")
    return np.mean([table.vector(t) for t in tokens], axis=0)


def boe_matrix(table: EmbeddingTable, samples: list[Sample]) -> np.ndarray:
    return np.stack([boe_embed(s.tokens, table) for s in samples])


def token_frequencies(samples: list[Sample]) -> dict[str, int]:
    """Token frequency over the given samples (the full dataset for BoE)."""
    freq: Counter[str] = Counter()
    for sample in samples:
        freq.update(sample.tokens)
    return dict(freq)
