"""Growing the question template set with model help, under human review.

Each iteration asks the backend for candidate questions (tagged <s>...</s>),
scores every candidate by mean similarity against the running template set,
and keeps only the least similar one, so the set grows by at most one per
iteration and drifts toward novelty. Nothing is adopted automatically: the
returned candidates are pending until a reviewer supplies slot annotations
or rejects them.

The default similarity is a cosine over lowercased token counts so the loop
runs fully offline; an embedding-backed scorer can be plugged in instead.
"""

from __future__ import annotations

import json
import math
import re
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

from .backends import Backend, QUESTION_GENERATION_PROMPT
from .errors import ReviewError
from .templates import Predicate, QuestionTemplate, load_templates, save_templates

SimilarityFn = Callable[[str, str], float]

_TAGGED = re.compile(r"<s>(.*?)</s>", re.DOTALL)
_TOKEN = re.compile(r"\w+")


def token_cosine_similarity(a: str, b: str) -> float:
    """Cosine similarity of lowercased token-count vectors, in [0, 1]."""
    counts_a = Counter(_TOKEN.findall(a.lower()))
    counts_b = Counter(_TOKEN.findall(b.lower()))
    if not counts_a or not counts_b:
        return 0.0
    dot = sum(counts_a[token] * counts_b[token] for token in counts_a.keys() & counts_b.keys())
    norm = math.sqrt(sum(v * v for v in counts_a.values())) * math.sqrt(
        sum(v * v for v in counts_b.values())
    )
    return dot / norm if norm else 0.0


def parse_tagged_questions(reply: str) -> list[str]:
    """Questions between <s>/</s> tags, stripped, empties dropped."""
    return [text.strip() for text in _TAGGED.findall(reply) if text.strip()]


@dataclass
class CandidateTemplate:
    text: str
    iteration: int
    mean_similarity: float
    status: str = "pending"  # pending | accepted | rejected


def generate_candidates(
    backend: Backend,
    existing: Sequence[str],
    iterations: int,
    similarity: SimilarityFn = token_cosine_similarity,
) -> list[CandidateTemplate]:
    """Run the generation loop and return the new candidates, all pending.

    ``existing`` is the current template texts. Iterations that parse to
    nothing are skipped without aborting the loop.
    """
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    running: list[str] = list(existing)
    added: list[CandidateTemplate] = []
    for iteration in range(1, iterations + 1):
        parsed = parse_tagged_questions(backend.complete(QUESTION_GENERATION_PROMPT))
        if not parsed:
            continue
        scored = []
        for text in parsed:
            mean = (
                sum(similarity(text, other) for other in running) / len(running)
                if running
                else 0.0
            )
            scored.append((mean, text))
        best_mean, best_text = min(scored, key=lambda item: item[0])
        if best_text not in running:
            running.append(best_text)
            added.append(
                CandidateTemplate(text=best_text, iteration=iteration, mean_similarity=best_mean)
            )
    return added


@dataclass(frozen=True)
class ReviewDecision:
    """Reviewer verdict for one candidate.

    Accepting requires the annotated template text (with ``{slot}``
    placeholders), the slot names/sources, and the predicate semantics.
    """

    candidate_text: str
    action: str  # accept | reject
    template_text: str | None = None
    slots: tuple[str, ...] | None = None
    slot_sources: tuple[str, ...] | None = None
    semantics: str | None = None
    max_groundings: int = 1


def load_decisions(path: str | Path) -> list[ReviewDecision]:
    decisions = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        record = json.loads(line)
        decisions.append(
            ReviewDecision(
                candidate_text=record["candidate_text"],
                action=record["action"],
                template_text=record.get("template_text"),
                slots=tuple(record["slots"]) if record.get("slots") else None,
                slot_sources=tuple(record["slot_sources"]) if record.get("slot_sources") else None,
                semantics=record.get("semantics"),
                max_groundings=int(record.get("max_groundings", 1)),
            )
        )
    return decisions


def review(
    candidates: list[CandidateTemplate],
    decisions: list[ReviewDecision],
    template_path: str | Path,
) -> list[QuestionTemplate]:
    """Apply reviewer decisions and append accepted templates to the file.

    Accepted templates get fresh ids above the existing maximum. Existing
    templates are never touched, so atoms cached against them stay valid.
    Returns the newly appended templates.
    """
    template_path = Path(template_path)
    existing = load_templates(template_path)
    existing_texts = {t.text for t in existing}
    by_text = {c.text: c for c in candidates}
    next_id = max((t.id for t in existing), default=0) + 1

    accepted: list[QuestionTemplate] = []
    for decision in decisions:
        candidate = by_text.get(decision.candidate_text)
        if candidate is None or candidate.status != "pending":
            raise ReviewError(f"decision does not match a pending candidate: {decision.candidate_text!r}")
        if decision.action == "reject":
            candidate.status = "rejected"
            continue
        if decision.action != "accept":
            raise ReviewError(f"unknown review action {decision.action!r}")
        if not decision.template_text or not decision.slots or not decision.slot_sources:
            raise ReviewError(
                f"accepting {decision.candidate_text!r} requires template_text, slots, and slot_sources"
            )
        if not decision.semantics:
            raise ReviewError(f"accepting {decision.candidate_text!r} requires predicate semantics")
        if decision.template_text in existing_texts:
            raise ReviewError(f"template text already present: {decision.template_text!r}")
        template = QuestionTemplate(
            id=next_id,
            text=decision.template_text,
            slots=decision.slots,
            slot_sources=decision.slot_sources,
            predicate=Predicate(
                id=next_id,
                arity=len(decision.slots),
                semantics=decision.semantics,
                max_groundings=decision.max_groundings,
            ),
        )
        next_id += 1
        candidate.status = "accepted"
        accepted.append(template)
        existing_texts.add(template.text)

    if accepted:
        save_templates(existing + accepted, template_path)
    return accepted


def candidate_to_record(candidate: CandidateTemplate) -> dict:
    return {
        "text": candidate.text,
        "iteration": candidate.iteration,
        "mean_similarity": candidate.mean_similarity,
        "status": candidate.status,
    }
