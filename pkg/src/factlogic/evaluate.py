"""Turning news samples into atom vectors, with persistent answer caching.

Backend queries are the expensive part of the pipeline, so every answered
question is cached keyed by (sample id, template id, digest of the rendered
question). Keying on the rendered question means editing a template
invalidates exactly the affected entries. The cache file is append-only
line-delimited JSON and safe to share between runs.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .backends import Backend, ClosedCounts, OpenLogits, question_hash
from .errors import DataError
from .templates import NewsSample, QuestionTemplate, enumerate_groundings
from .truth import AtomVector, assemble_vector, sample_seed, truth_from_logits, truth_from_samples


@dataclass(frozen=True)
class CacheRecord:
    sample_id: str
    template_id: int
    digest: str
    question: str
    value: float


class AtomCache:
    """Persistent map (sample id, template id, question digest) -> truth value.

    Hits bypass the backend entirely. The rendered question is stored next
    to its digest and compared on lookup, so a digest collision can never
    surface a wrong answer. Writers are serialized; readers are free.
    """

    def __init__(self, path: str | Path | None = None, defer_writes: bool = False):
        self.path = Path(path) if path is not None else None
        self.defer_writes = defer_writes
        self._pending: list[CacheRecord] = []
        self._entries: dict[tuple[str, int, str], list[tuple[str, float]]] = {}
        self._lock = threading.Lock()
        if self.path is not None and self.path.exists():
            self._load(self.path)

    def _load(self, path: Path) -> None:
        for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
                key = (str(record["sample_id"]), int(record["template_id"]), str(record["digest"]))
                question = str(record["question"])
                value = float(record["value"])
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise DataError(f"{path}:{lineno}: corrupt cache line: {exc}") from exc
            self._entries.setdefault(key, []).append((question, value))

    def __len__(self) -> int:
        with self._lock:
            return sum(len(v) for v in self._entries.values())

    def get(self, sample_id: str, template_id: int, question: str) -> float | None:
        key = (sample_id, template_id, question_hash(question))
        for stored_question, value in self._entries.get(key, ()):
            if stored_question == question:
                return value
        return None

    def put(self, sample_id: str, template_id: int, question: str, value: float) -> CacheRecord:
        record = CacheRecord(
            sample_id=sample_id,
            template_id=template_id,
            digest=question_hash(question),
            question=question,
            value=float(value),
        )
        with self._lock:
            key = (record.sample_id, record.template_id, record.digest)
            self._entries.setdefault(key, []).append((record.question, record.value))
            if self.path is not None and not self.defer_writes:
                with self.path.open("a", encoding="utf-8") as handle:
                    handle.write(_record_line(record))
            elif self.defer_writes:
                self._pending.append(record)
        return record

    def flush(self) -> None:
        """Append deferred records sorted by (sample, template).

        The stable sort preserves each sample's grounding order, so the
        file comes out identical whether evaluation ran serially or on a
        thread pool.
        """
        with self._lock:
            if not self._pending:
                return
            self._pending.sort(key=lambda r: (r.sample_id, r.template_id))
            if self.path is not None:
                with self.path.open("a", encoding="utf-8") as handle:
                    for record in self._pending:
                        handle.write(_record_line(record))
            self._pending.clear()


def _record_line(record: CacheRecord) -> str:
    payload = {
        "sample_id": record.sample_id,
        "template_id": record.template_id,
        "digest": record.digest,
        "question": record.question,
        "value": record.value,
    }
    return json.dumps(payload, ensure_ascii=False) + "\n"


def evidence_to_value(evidence: OpenLogits | ClosedCounts) -> float:
    if isinstance(evidence, OpenLogits):
        return truth_from_logits(evidence.v_yes, evidence.v_no)
    return truth_from_samples(evidence.m_yes, evidence.m_no)


def evaluate_sample(
    sample: NewsSample,
    templates: list[QuestionTemplate],
    backend: Backend | None,
    cache: AtomCache | None = None,
    seed: int = 0,
) -> AtomVector:
    """Answer every grounded question of ``sample`` and assemble its vector.

    Answers are taken cache-first; a fully cached sample never needs the
    backend. Subset selection for over-budget predicates is seeded per
    (seed, sample id), so the result does not depend on evaluation order.
    Backend failures propagate with the sample id attached.
    """
    per_predicate: list[list[float]] = []
    for template in templates:
        values: list[float] = []
        for atom in enumerate_groundings(sample, template):
            value = cache.get(sample.id, template.id, atom.question) if cache is not None else None
            if value is None:
                if backend is None:
                    raise DataError(
                        f"sample {sample.id}: question not cached and no backend configured"
                    )
                try:
                    value = evidence_to_value(backend.yes_no(atom.question))
                except Exception as exc:
                    exc.args = (f"sample {sample.id}: {exc}",) + exc.args[1:]
                    raise
                if cache is not None:
                    cache.put(sample.id, template.id, atom.question, value)
            values.append(value)
        per_predicate.append(values)
    predicates = [t.predicate for t in templates]
    return assemble_vector(per_predicate, predicates, sample_seed(seed, sample.id))


class AtomVectorizer(TransformerMixin, BaseEstimator):
    """Transformer from news samples to an atom-vector design matrix.

    Presents the cognition stage with a fit/transform face so it can slot
    into standard pipelines: ``transform`` maps a list of ``NewsSample`` to
    an ``(n_samples, n_atoms)`` float matrix whose columns follow the
    template order, each template owning ``max_groundings`` columns.

    Parameters
    ----------
    templates : list of QuestionTemplate
    backend : backend handle, or None to run strictly from cache
    cache : AtomCache, optional
    seed : int, RNG seed for atom subsampling

    Attributes
    ----------
    predicate_ids_, group_sizes_ : column layout, ordered by template id.
    n_features_out_ : total atom columns.
    """

    def __init__(self, templates: list[QuestionTemplate], backend: Backend | None = None,
                 cache: AtomCache | None = None, seed: int = 0):
        self.templates = templates
        self.backend = backend
        self.cache = cache
        self.seed = seed

    def fit(self, samples=None, y=None) -> "AtomVectorizer":
        ordered = sorted(self.templates, key=lambda t: t.id)
        self.predicate_ids_ = tuple(t.predicate.id for t in ordered)
        self.group_sizes_ = tuple(t.predicate.max_groundings for t in ordered)
        self.n_features_out_ = sum(self.group_sizes_)
        self._ordered = ordered
        return self

    def transform(self, samples: list[NewsSample]) -> np.ndarray:
        if not hasattr(self, "_ordered"):
            self.fit()
        rows = [
            evaluate_sample(sample, self._ordered, self.backend, self.cache, self.seed).values
            for sample in samples
        ]
        return np.vstack(rows) if rows else np.zeros((0, self.n_features_out_))
