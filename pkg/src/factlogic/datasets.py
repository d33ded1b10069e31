"""Dataset loading, label mapping, and split management.

Two input formats are supported: a generic line-delimited JSON form
``{"id", "text", "label", "evidence": [...], "publisher_history",
"claims": [...], "split"}`` and tab-separated political-claims files with
configurable column positions. Everything is normalized onto the generic
form internally, so the rest of the pipeline only ever sees one shape.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError
from .templates import NewsSample

# Label-map target meaning "discard this sample entirely".
DROP = "__drop__"

SPLIT_NAMES = ("train", "validation", "test")

# Six-way truthfulness scale, most-true first; this ordering is the label
# set for the multi-class setting.
SIX_WAY_LABELS = ("true", "mostly-true", "half-true", "barely-true", "false", "pants-fire")

# Binary collapse of the six-way scale. The middle rating maps to DROP by
# default; override the entry to keep it on either side.
BINARY_LABEL_MAP = {
    "true": "true",
    "mostly-true": "true",
    "half-true": DROP,
    "barely-true": "false",
    "false": "false",
    "pants-fire": "false",
}

DEFAULT_TSV_COLUMNS = {"id": 0, "label": 1, "text": 2}


@dataclass
class Dataset:
    name: str
    samples: list[NewsSample]
    splits: dict[str, list[str]] = field(default_factory=dict)
    label_set: tuple[str, ...] = ()

    def __post_init__(self):
        ids = {s.id for s in self.samples}
        seen: set[str] = set()
        for split, members in self.splits.items():
            if split not in SPLIT_NAMES:
                raise DataError(f"unknown split name {split!r}")
            for sample_id in members:
                if sample_id not in ids:
                    raise DataError(f"split {split} references unknown sample {sample_id!r}")
                if sample_id in seen:
                    raise DataError(f"sample {sample_id!r} appears in more than one split")
                seen.add(sample_id)
        for sample in self.samples:
            if sample.label not in self.label_set:
                raise DataError(f"sample {sample.id}: label {sample.label!r} not in label set")

    def split_samples(self, split: str) -> list[NewsSample]:
        by_id = {s.id: s for s in self.samples}
        return [by_id[i] for i in self.splits.get(split, [])]

    def label_index(self, label: str) -> int:
        return self.label_set.index(label)


def _apply_label_map(raw_label: str, label_map: dict[str, str] | None, offenders: set[str]) -> str | None:
    if label_map is None:
        return raw_label
    if raw_label not in label_map:
        offenders.add(raw_label)
        return None
    mapped = label_map[raw_label]
    return None if mapped == DROP else mapped


def _derive_label_set(samples: list[NewsSample]) -> tuple[str, ...]:
    present = {s.label for s in samples}
    if present <= set(SIX_WAY_LABELS):
        # Keep the canonical truthfulness ordering when it applies.
        return tuple(l for l in SIX_WAY_LABELS if l in present)
    return tuple(sorted(present))


def _word_count(text: str) -> int:
    return len(text.split())


def load_dataset(
    path: str | Path,
    format: str = "generic-jsonl",
    label_map: dict[str, str] | None = None,
    *,
    name: str | None = None,
    split_ratios: tuple[float, float, float] = (0.7, 0.1, 0.2),
    seed: int = 0,
    max_words: int | None = None,
    tsv_columns: dict[str, int] | None = None,
) -> Dataset:
    """Parse a dataset file, map labels, and ensure train/validation/test splits.

    Samples whose raw label maps to DROP are removed; raw labels the map
    does not cover at all are an error (all offenders listed). Declared
    splits are preserved when every record carries one, otherwise splits
    are synthesized at ``split_ratios`` with ``seed``.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"dataset not found: {path}")
    if format not in ("generic-jsonl", "liar-tsv"):
        raise DataError(f"unknown dataset format {format!r}")

    offenders: set[str] = set()
    samples: list[NewsSample] = []
    declared: dict[str, list[str]] = {s: [] for s in SPLIT_NAMES}
    declared_count = 0

    lines = path.read_text(encoding="utf-8").splitlines()
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        if format == "generic-jsonl":
            try:
                record = json.loads(line)
                sample_id = str(record["id"])
                text = str(record["text"])
                raw_label = str(record["label"])
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise DataError(f"{path}:{lineno}: bad record: {exc}") from exc
            evidence = tuple(record["evidence"]) if record.get("evidence") else None
            publisher_history = record.get("publisher_history") or None
            claims = tuple(record["claims"]) if record.get("claims") else None
            declared_split = record.get("split")
        else:
            columns = tsv_columns or DEFAULT_TSV_COLUMNS
            cells = line.split("\t")
            try:
                sample_id = cells[columns["id"]]
                raw_label = cells[columns["label"]]
                text = cells[columns["text"]]
            except IndexError as exc:
                raise DataError(f"{path}:{lineno}: too few columns: {exc}") from exc
            evidence = publisher_history = claims = None
            if "evidence" in columns and len(cells) > columns["evidence"] and cells[columns["evidence"]]:
                evidence = (cells[columns["evidence"]],)
            if (
                "publisher_history" in columns
                and len(cells) > columns["publisher_history"]
                and cells[columns["publisher_history"]]
            ):
                publisher_history = cells[columns["publisher_history"]]
            declared_split = None

        label = _apply_label_map(raw_label, label_map, offenders)
        if label is None:
            continue
        if max_words is not None and _word_count(text) > max_words:
            continue
        samples.append(
            NewsSample(
                id=sample_id,
                text=text,
                label=label,
                evidence=evidence,
                publisher_history=publisher_history,
                claims=claims,
            )
        )
        if declared_split is not None:
            if declared_split not in SPLIT_NAMES:
                raise DataError(f"{path}:{lineno}: unknown split {declared_split!r}")
            declared[declared_split].append(sample_id)
            declared_count += 1

    if offenders:
        raise DataError(f"labels not covered by the label map: {sorted(offenders)}")
    if not samples:
        raise DataError(f"{path}: no samples survived loading")

    dataset = Dataset(
        name=name or path.stem,
        samples=samples,
        splits={},
        label_set=_derive_label_set(samples),
    )
    if declared_count == len(samples):
        # Split lists are kept sorted by id so load/save round-trips exactly.
        dataset.splits = {split: sorted(members) for split, members in declared.items()}
        _check_splits_non_empty(dataset)
        return dataset
    return split_dataset(dataset, split_ratios, seed)


def _check_splits_non_empty(dataset: Dataset) -> None:
    for split in SPLIT_NAMES:
        if not dataset.splits.get(split):
            raise DataError(f"split {split!r} is empty")


def split_dataset(dataset: Dataset, ratios: tuple[float, float, float], seed: int) -> Dataset:
    """Seeded shuffle and contiguous cut into train/validation/test.

    Cut points are floors of the cumulative ratios (with an epsilon so
    exact products do not fall victim to float dust): 10 samples at
    7:1:2 give 7/1/2, and 9 give 6/1/2.
    """
    if any(r <= 0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
        raise DataError(f"ratios must be positive and sum to 1, got {ratios}")
    n = len(dataset.samples)
    if n < len(SPLIT_NAMES):
        raise DataError(f"cannot split {n} samples into {len(SPLIT_NAMES)} parts")
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    first_cut = int(n * ratios[0] + 1e-9)
    second_cut = int(n * (ratios[0] + ratios[1]) + 1e-9)
    ids = [dataset.samples[i].id for i in order]
    dataset = Dataset(
        name=dataset.name,
        samples=dataset.samples,
        splits={
            "train": sorted(ids[:first_cut]),
            "validation": sorted(ids[first_cut:second_cut]),
            "test": sorted(ids[second_cut:]),
        },
        label_set=dataset.label_set,
    )
    _check_splits_non_empty(dataset)
    return dataset


def sample_to_record(sample: NewsSample, split: str | None = None) -> dict:
    record: dict = {"id": sample.id, "text": sample.text, "label": sample.label}
    if sample.evidence:
        record["evidence"] = list(sample.evidence)
    if sample.publisher_history:
        record["publisher_history"] = sample.publisher_history
    if sample.claims:
        record["claims"] = list(sample.claims)
    if split is not None:
        record["split"] = split
    return record


def save_dataset(dataset: Dataset, path: str | Path) -> None:
    """Serialize to the generic line-delimited form, splits included."""
    split_of = {}
    for split, members in dataset.splits.items():
        for sample_id in members:
            split_of[sample_id] = split
    lines = [
        json.dumps(sample_to_record(s, split_of.get(s.id)), ensure_ascii=False)
        for s in dataset.samples
    ]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
