"""Question templates, logic predicates, and groundings.

A template is a Yes/No question with named ``{slot}`` placeholders. Each
template corresponds to a logic predicate whose arity equals the slot count;
instantiating the slots with concrete text from a news sample yields a logic
atom and its rendered question. Templates ship as a line-delimited JSON file
(one record per template) and users may append their own.
"""

from __future__ import annotations

import itertools
import json
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .errors import DataError, GroundingError

# Slot values come from one of these sample fields.
SLOT_SOURCES = ("news_text", "claim", "evidence", "publisher_history")

# Bound when a sample has nothing for a slot's source; keeps arities total.
# "Unknown" lives in the truth value, not in the grounding.
NOT_APPLICABLE = "not applicable"

_PLACEHOLDER = re.compile(r"\{(\w+)\}")


@dataclass(frozen=True)
class Predicate:
    """Affirmative reading of a question template, with its atom budget."""

    id: int
    arity: int
    semantics: str
    max_groundings: int = 1

    def __post_init__(self):
        if self.arity < 1:
            raise DataError(f"predicate {self.id}: arity must be >= 1")
        if self.max_groundings < 1:
            raise DataError(f"predicate {self.id}: max_groundings must be >= 1")


@dataclass(frozen=True)
class QuestionTemplate:
    """A parameterized Yes/No question and where its slots bind from."""

    id: int
    text: str
    slots: tuple[str, ...]
    slot_sources: tuple[str, ...]
    predicate: Predicate

    def __post_init__(self):
        if not self.slots:
            raise DataError(f"template {self.id}: needs at least one slot")
        if len(self.slots) != len(self.slot_sources):
            raise DataError(f"template {self.id}: slots and slot_sources differ in length")
        for source in self.slot_sources:
            if source not in SLOT_SOURCES:
                raise DataError(f"template {self.id}: unknown slot source {source!r}")
        found = _PLACEHOLDER.findall(self.text)
        if sorted(found) != sorted(self.slots) or len(set(found)) != len(found):
            raise DataError(
                f"template {self.id}: placeholders {found} must match slots "
                f"{list(self.slots)} exactly once each"
            )
        if self.predicate.arity != len(self.slots):
            raise DataError(f"template {self.id}: predicate arity != slot count")

    @property
    def arity(self) -> int:
        return len(self.slots)


@dataclass(frozen=True)
class NewsSample:
    """One piece of news to verify."""

    id: str
    text: str
    label: str
    evidence: tuple[str, ...] | None = None
    publisher_history: str | None = None
    claims: tuple[str, ...] | None = None

    def __post_init__(self):
        if not self.text:
            raise DataError(f"sample {self.id}: text must be non-empty")


@dataclass(frozen=True)
class LogicAtom:
    """A predicate grounded with concrete slot values, plus its question."""

    predicate_id: int
    grounding: tuple[str, ...]
    question: str


def render_question(template: QuestionTemplate, grounding: tuple[str, ...] | list[str]) -> str:
    """Substitute ``grounding`` values into the template text.

    Replacement happens in a single pass, so grounding values are never
    re-scanned for placeholder markers.
    """
    if len(grounding) != template.arity:
        raise GroundingError(
            f"template {template.id}: expected {template.arity} slot values, "
            f"got {len(grounding)}"
        )
    for slot, value in zip(template.slots, grounding):
        if not value:
            raise GroundingError(f"template {template.id}: empty value for slot {slot!r}")
    mapping = dict(zip(template.slots, grounding))
    return _PLACEHOLDER.sub(lambda m: mapping[m.group(1)], template.text)


def _slot_candidates(sample: NewsSample, source: str) -> list[str]:
    if source == "news_text":
        values: list[str] = [sample.text]
    elif source == "claim":
        values = list(sample.claims or [])
    elif source == "evidence":
        values = list(sample.evidence or [])
    elif source == "publisher_history":
        values = [sample.publisher_history] if sample.publisher_history else []
    else:  # pragma: no cover - guarded at template construction
        raise DataError(f"unknown slot source {source!r}")
    values = [v for v in values if v]
    return values or [NOT_APPLICABLE]


def enumerate_groundings(sample: NewsSample, template: QuestionTemplate) -> list[LogicAtom]:
    """All instantiations of ``template`` for ``sample``, in slot-major order.

    The result is the Cartesian product of each slot's candidate values; a
    slot whose source is absent from the sample contributes the single
    sentinel value, so the count is always the exact product of candidate
    counts. Deterministic: identical inputs give an identical atom list.
    """
    per_slot = [_slot_candidates(sample, source) for source in template.slot_sources]
    atoms = []
    for combo in itertools.product(*per_slot):
        atoms.append(
            LogicAtom(
                predicate_id=template.predicate.id,
                grounding=tuple(combo),
                question=render_question(template, combo),
            )
        )
    return atoms


# --- template file I/O ------------------------------------------------------
#
# One JSON record per line: {"id", "text", "slots", "slot_sources",
# "semantics", "max_groundings"}. UTF-8.

def template_to_record(template: QuestionTemplate) -> dict:
    return {
        "id": template.id,
        "text": template.text,
        "slots": list(template.slots),
        "slot_sources": list(template.slot_sources),
        "semantics": template.predicate.semantics,
        "max_groundings": template.predicate.max_groundings,
    }


def template_from_record(record: dict, max_groundings_override: int | None = None) -> QuestionTemplate:
    try:
        slots = tuple(record["slots"])
        max_groundings = int(record.get("max_groundings", 1))
        if max_groundings_override is not None:
            max_groundings = max_groundings_override
        predicate = Predicate(
            id=int(record["id"]),
            arity=len(slots),
            semantics=str(record["semantics"]),
            max_groundings=max_groundings,
        )
        return QuestionTemplate(
            id=int(record["id"]),
            text=str(record["text"]),
            slots=slots,
            slot_sources=tuple(record["slot_sources"]),
            predicate=predicate,
        )
    except KeyError as exc:
        raise DataError(f"template record missing field {exc}") from exc


def load_templates(
    path: str | Path,
    max_groundings: dict[int, int] | None = None,
) -> list[QuestionTemplate]:
    """Read a line-delimited template file, sorted by template id.

    ``max_groundings`` optionally overrides the per-template atom budget
    by template id.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"template file not found: {path}")
    overrides = max_groundings or {}
    templates: list[QuestionTemplate] = []
    seen: set[int] = set()
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}:{lineno}: invalid template record: {exc}") from exc
        template = template_from_record(record, overrides.get(int(record.get("id", -1))))
        if template.id in seen:
            raise DataError(f"{path}:{lineno}: duplicate template id {template.id}")
        seen.add(template.id)
        templates.append(template)
    return sorted(templates, key=lambda t: t.id)


def save_templates(templates: list[QuestionTemplate], path: str | Path) -> None:
    path = Path(path)
    lines = [json.dumps(template_to_record(t), ensure_ascii=False) for t in templates]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def default_template_path() -> Path:
    """Path of the bundled base template set."""
    return Path(str(resources.files("factlogic").joinpath("data/templates.jsonl")))


def intervention_template_path() -> Path:
    """Path of the bundled extra templates accepted from a generation run."""
    return Path(str(resources.files("factlogic").joinpath("data/templates_intervention.jsonl")))


def load_default_templates(max_groundings: dict[int, int] | None = None) -> list[QuestionTemplate]:
    return load_templates(default_template_path(), max_groundings)
