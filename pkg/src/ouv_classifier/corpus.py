"""Dataset construction from the UNESCO syndication export.

Turns the per-site justification paragraphs into sentence-level samples
with one-hot sentence labels and site-level parental labels, and builds
the independent short-description (SD) test set.
"""

from __future__ import annotations

import csv
import json
import re
import unicodedata
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import NUM_CLASSES, NUM_CRITERIA, OTHERS_NOISE

ROMAN = {
    "i": 1, "ii": 2, "iii": 3, "iv": 4, "v": 5,
    "vi": 6, "vii": 7, "viii": 8, "ix": 9, "x": 10,
}

# Official definitions of the ten selection criteria (whc.unesco.org/en/criteria).
# These sentences are appended to the train split, one per criterion.
CRITERION_DEFINITIONS = {
    1: "To represent a masterpiece of human creative genius",
    2: "To exhibit an important interchange of human values, over a span of "
       "time or within a cultural area of the world, on developments in "
       "architecture or technology, monumental arts, town-planning or "
       "landscape design",
    3: "To bear a unique or at least exceptional testimony to a cultural "
       "tradition or to a civilization which is living or which has "
       "disappeared",
    4: "To be an outstanding example of a type of building, architectural or "
       "technological ensemble or landscape which illustrates a significant "
       "stage in human history",
    5: "To be an outstanding example of a traditional human settlement, "
       "land-use, or sea-use which is representative of a culture, or human "
       "interaction with the environment especially when it has become "
       "vulnerable under the impact of irreversible change",
    6: "To be directly or tangibly associated with events or living "
       "traditions, with ideas, or with beliefs, with artistic and literary "
       "works of outstanding universal significance",
    7: "To contain superlative natural phenomena or areas of exceptional "
       "natural beauty and aesthetic importance",
    8: "To be outstanding examples representing major stages of earth's "
       "history, including the record of life, significant on-going "
       "geological processes in the development of landforms, or significant "
       "geomorphic or physiographic features",
    9: "To be outstanding examples representing significant on-going "
       "ecological and biological processes in the evolution and development "
       "of terrestrial, fresh water, coastal and marine ecosystems and "
       "communities of plants and animals",
    10: "To contain the most important and significant natural habitats for "
        "in-situ conservation of biological diversity, including those "
        "containing threatened species of outstanding universal value from "
        "the point of view of science or conservation",
}

MIN_SENT_LEN = 8
MAX_SENT_LEN = 64


class ConfigurationError(Exception):
    """A required input column or split is missing."""


@dataclass
class SiteRecord:
    site_id: int
    name: str
    justification: dict[int, str]  # criterion -> paragraph
    short_description: str
    criteria: frozenset[int]

    def parental_label(self) -> np.ndarray:
        gamma = np.zeros(NUM_CLASSES)
        for k in self.criteria:
            gamma[k - 1] = 1.0
        gamma[NUM_CLASSES - 1] = OTHERS_NOISE
        return gamma


@dataclass
class Sample:
    tokens: list[str]
    sentence_label: int | None  # criterion 1-10; None for SD samples
    one_hot: np.ndarray | None  # length 11; None for SD samples
    parental: np.ndarray  # length 11
    site_id: int
    split: str

    @property
    def length(self) -> int:
        return len(self.tokens)


def make_one_hot(criterion: int) -> np.ndarray:
    if not 1 <= criterion <= NUM_CRITERIA:
        raise ValueError(f"criterion out of range: {criterion}")
    y = np.zeros(NUM_CLASSES)
    y[criterion - 1] = 1.0
    return y


# ---------------------------------------------------------------------------
# Syndication parsing

_COLUMN_ALIASES = {
    "site_id": ("id_no", "id_number", "site_id", "id", "unique_number"),
    "name": ("name_en", "name", "site_name"),
    "justification": ("justification_en", "justification"),
    "short_description": ("short_description_en", "short_description",
                          "short_desc"),
    "criteria": ("criteria_txt", "criteria", "criteria_text"),
}

_CRITERION_HEADER = re.compile(
    r"criterion\s*\(?\s*([ivx]+)\s*\)?\s*[:.]?", re.IGNORECASE)


def _resolve_columns(header: list[str]) -> dict[str, str]:
    lowered = {h.lower().strip(): h for h in header}
    resolved = {}
    for field_name, aliases in _COLUMN_ALIASES.items():
        for alias in aliases:
            if alias in lowered:
                resolved[field_name] = lowered[alias]
                break
    for required in ("site_id", "name", "justification", "short_description"):
        if required not in resolved:
            raise ConfigurationError(
                f"syndication file is missing a column for {required!r}; "
                f"header was {header}")
    return resolved


def _criteria_from_flags(row: dict[str, str]) -> frozenset[int] | None:
    """Read per-criterion flag columns (C1..C6, N7..N10) if present."""
    flags = {}
    for key, value in row.items():
        m = re.fullmatch(r"[cn]\s*(\d{1,2})", key.lower().strip())
        if m:
            flags[int(m.group(1))] = value
    if not flags or set(flags) != set(range(1, NUM_CRITERIA + 1)):
        return None
    chosen = {k for k, v in flags.items()
              if str(v).strip().lower() in ("1", "true", "yes", "x")}
    return frozenset(chosen)


def _criteria_from_text(text: str) -> frozenset[int]:
    found = set()
    for m in re.finditer(r"\(([ivx]+)\)", text.lower()):
        if m.group(1) in ROMAN:
            found.add(ROMAN[m.group(1)])
    return frozenset(found)


def _split_justification(text: str) -> dict[int, str]:
    """Split a combined justification field on 'Criterion (x):' markers."""
    parts: dict[int, str] = {}
    matches = list(_CRITERION_HEADER.finditer(text))
    if not matches:
        return parts
    for i, m in enumerate(matches):
        numeral = m.group(1).lower()
        if numeral not in ROMAN:
            continue
        start = m.end()
        end = matches[i + 1].start() if i + 1 < len(matches) else len(text)
        body = text[start:end].strip()
        if body:
            parts[ROMAN[numeral]] = body
    return parts


def parse_syndication(file_path: str | Path) -> tuple[list[SiteRecord], list[str]]:
    """Parse the syndication CSV into site records.

    Returns the records plus a report of row-level errors. Rows without
    justification text are kept (with an empty justification map) so the
    SD set can still use their short descriptions.
    """
    path = Path(file_path)
    records: list[SiteRecord] = []
    errors: list[str] = []
    with open(path, newline="", encoding="utf-8", errors="strict") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise ConfigurationError(f"{path} has no header row")
        cols = _resolve_columns(list(reader.fieldnames))
        for line_no, row in enumerate(reader, start=2):
            try:
                record = _parse_row(row, cols)
            except (ValueError, KeyError) as exc:
                errors.append(f"line {line_no}: {exc}")
                continue
            if record is not None:
                records.append(record)
    return records, errors


def _parse_row(row: dict[str, str], cols: dict[str, str]) -> SiteRecord | None:
    raw_id = (row.get(cols["site_id"]) or "").strip()
    if not raw_id:
        raise ValueError("empty site id")
    site_id = int(float(raw_id))
    name = (row.get(cols["name"]) or "").strip()
    just_text = (row.get(cols["justification"]) or "").strip()
    short_desc = (row.get(cols["short_description"]) or "").strip()

    criteria = _criteria_from_flags(row)
    if criteria is None:
        crit_col = cols.get("criteria")
        crit_text = (row.get(crit_col) or "") if crit_col else ""
        criteria = _criteria_from_text(crit_text)

    justification = _split_justification(just_text) if just_text else {}
    if justification and not criteria:
        # fall back to the criteria actually present in the justification
        criteria = frozenset(justification)
    # only keep paragraphs for criteria the site is justified under
    justification = {k: v for k, v in justification.items() if k in criteria}
    if justification and not criteria:
        raise ValueError("justification present but no criteria identified")
    if not justification and not short_desc:
        return None
    return SiteRecord(site_id=site_id, name=name, justification=justification,
                      short_description=short_desc, criteria=criteria)


# ---------------------------------------------------------------------------
# Sentence splitting and token preprocessing

# Trailing-period tokens that do not end a sentence.
ABBREVIATIONS = {
    "st.", "mt.", "no.", "nos.", "approx.", "ca.", "c.", "cf.", "e.g.",
    "i.e.", "etc.", "vs.", "dr.", "mr.", "mrs.", "ms.", "prof.", "jr.",
    "sr.", "vol.", "fig.", "km.", "m.", "ft.", "sq.",
}

_TERMINATOR = re.compile(r"[.!?]")


def split_sentences(paragraph: str) -> list[str]:
    """Rule-based sentence splitter.

    Splits after '.', '!' or '?' when followed by whitespace and an
    uppercase letter (or end of text), unless the preceding word is a
    known abbreviation.
    """
    text = paragraph.strip()
    if not text:
        return []
    sentences = []
    start = 0
    for m in _TERMINATOR.finditer(text):
        end = m.end()
        if end < len(text):
            rest = text[end:]
            stripped = rest.lstrip()
            if not stripped:
                pass  # trailing whitespace; end-of-text split below
            elif not (rest[0].isspace() and stripped[0].isupper()):
                continue
        last_word = text[:end].rsplit(None, 1)[-1].lower()
        if last_word in ABBREVIATIONS:
            continue
        candidate = text[start:end].strip()
        if candidate:
            sentences.append(candidate)
        start = end
    tail = text[start:].strip()
    if tail:
        sentences.append(tail)
    return sentences


_PUNCT = ".,;:!?()\"'"


def _pad_punctuation(text: str) -> str:
    # '.' or ',' flanked by digits is a decimal/thousands separator and stays
    out = []
    for i, ch in enumerate(text):
        if ch in _PUNCT:
            prev_digit = i > 0 and text[i - 1].isdigit()
            next_digit = i + 1 < len(text) and text[i + 1].isdigit()
            if ch in ".," and prev_digit and next_digit:
                out.append(ch)  # decimal / thousands separator
            else:
                out.append(f" {ch} ")
        else:
            out.append(ch)
    return "".join(out)


_NUM_TOKEN = re.compile(r"\d+([.,]\d+)?")
_DIGIT_LETTER = re.compile(r"(?<=\d)(?=[^\d\s.,])|(?<=[^\d\s.,])(?=\d)")


def strip_accents(text: str) -> str:
    decomposed = unicodedata.normalize("NFKD", text)
    return "".join(ch for ch in decomposed if not unicodedata.combining(ch))


def preprocess(sentence: str) -> list[str]:
    """Lowercase, fold accents, isolate punctuation, replace numbers.

    Any maximal digit run (optionally with one internal '.' or ',') becomes
    the literal token "<num>". Stop-words are retained.
    """
    text = strip_accents(sentence).lower()
    text = _DIGIT_LETTER.sub(" ", text)  # "16th" -> "16 th"
    text = _pad_punctuation(text)
    tokens = []
    for tok in text.split():
        if _NUM_TOKEN.fullmatch(tok):
            tokens.append("<num>")
        else:
            tokens.append(tok)
    return tokens


# ---------------------------------------------------------------------------
# Dataset assembly

@dataclass
class Dataset:
    train: list[Sample] = field(default_factory=list)
    valid: list[Sample] = field(default_factory=list)
    test: list[Sample] = field(default_factory=list)
    sd: list[Sample] = field(default_factory=list)

    def split(self, name: str) -> list[Sample]:
        if name not in ("train", "valid", "test", "sd"):
            raise ValueError(f"unknown split {name!r}")
        return getattr(self, name)


def build_dataset(sites: list[SiteRecord],
                  definitions: dict[int, str] | None = None,
                  seed: int = 1337) -> Dataset:
    """Build train/valid/test splits from the justification paragraphs.

    Sentences of length 8-64 tokens are kept and partitioned 8:1:1 by a
    seeded shuffle; the ten criterion definition sentences are then
    appended to the train split.
    """
    if definitions is None:
        definitions = CRITERION_DEFINITIONS
    if set(definitions) != set(range(1, NUM_CRITERIA + 1)):
        raise ConfigurationError(
            "definitions must cover exactly criteria 1-10")

    pool: list[Sample] = []
    for site in sites:
        gamma = site.parental_label()
        for criterion, paragraph in sorted(site.justification.items()):
            for sentence in split_sentences(paragraph):
                tokens = preprocess(sentence)
                if not MIN_SENT_LEN <= len(tokens) <= MAX_SENT_LEN:
                    continue
                pool.append(Sample(tokens=tokens, sentence_label=criterion,
                                   one_hot=make_one_hot(criterion),
                                   parental=gamma.copy(),
                                   site_id=site.site_id, split="train"))

    rng = np.random.default_rng(seed)
    order = rng.permutation(len(pool))
    n = len(pool)
    n_valid = n // 10
    n_test = n // 10
    dataset = Dataset()
    for rank, idx in enumerate(order):
        sample = pool[idx]
        if rank < n - n_valid - n_test:
            sample.split = "train"
            dataset.train.append(sample)
        elif rank < n - n_test:
            sample.split = "valid"
            dataset.valid.append(sample)
        else:
            sample.split = "test"
            dataset.test.append(sample)

    for criterion in sorted(definitions):
        tokens = preprocess(definitions[criterion])
        gamma = np.zeros(NUM_CLASSES)
        gamma[criterion - 1] = 1.0
        gamma[NUM_CLASSES - 1] = OTHERS_NOISE
        dataset.train.append(Sample(
            tokens=tokens, sentence_label=criterion,
            one_hot=make_one_hot(criterion), parental=gamma,
            site_id=0, split="train"))

    for name in ("train", "valid", "test"):
        if not dataset.split(name):
            raise ConfigurationError(f"split {name!r} is empty")
    return dataset


def build_sd_set(sites: list[SiteRecord]) -> list[Sample]:
    """Build the independent short-description test set.

    SD samples carry only the parental label; no sentence-length filter
    is applied beyond dropping empty sentences.
    """
    samples = []
    for site in sites:
        if not site.short_description or not site.criteria:
            continue
        gamma = site.parental_label()
        for sentence in split_sentences(site.short_description):
            tokens = preprocess(sentence)
            if not tokens:
                continue
            samples.append(Sample(tokens=tokens, sentence_label=None,
                                  one_hot=None, parental=gamma.copy(),
                                  site_id=site.site_id, split="sd"))
    return samples


# ---------------------------------------------------------------------------
# JSON-lines persistence

def sample_to_json(sample: Sample) -> str:
    record = {
        "tokens": sample.tokens,
        "sentence_label": sample.sentence_label,
        "one_hot": None if sample.one_hot is None
        else [int(v) for v in sample.one_hot],
        "parental": [float(v) for v in sample.parental],
        "site_id": sample.site_id,
        "split": sample.split,
    }
    return json.dumps(record, ensure_ascii=False)


def sample_from_json(line: str) -> Sample:
    record = json.loads(line)
    one_hot = record["one_hot"]
    return Sample(
        tokens=list(record["tokens"]),
        sentence_label=record["sentence_label"],
        one_hot=None if one_hot is None else np.asarray(one_hot, dtype=float),
        parental=np.asarray(record["parental"], dtype=float),
        site_id=record["site_id"],
        split=record["split"],
    )


def write_samples(samples: list[Sample], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for sample in samples:
            fh.write(sample_to_json(sample) + "\n")


def read_samples(path: str | Path) -> list[Sample]:
    with open(path, encoding="utf-8") as fh:
        return [sample_from_json(line) for line in fh if line.strip()]


def write_dataset(dataset: Dataset, out_dir: str | Path) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name in ("train", "valid", "test", "sd"):
        write_samples(dataset.split(name), out / f"{name}.jsonl")


def read_dataset(in_dir: str | Path) -> Dataset:
    src = Path(in_dir)
    dataset = Dataset()
    for name in ("train", "valid", "test", "sd"):
        path = src / f"{name}.jsonl"
        if path.exists():
            getattr(dataset, name).extend(read_samples(path))
    return dataset


def write_sites(sites: list[SiteRecord], path: str | Path) -> None:
    """Persist the site-level criteria sets (input to the prior)."""
    payload = [{"site_id": s.site_id, "name": s.name,
                "criteria": sorted(s.criteria)} for s in sites]
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, ensure_ascii=False, indent=1)


def read_sites(path: str | Path) -> list[SiteRecord]:
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    return [SiteRecord(site_id=p["site_id"], name=p.get("name", ""),
                       justification={}, short_description="",
                       criteria=frozenset(p["criteria"])) for p in payload]
