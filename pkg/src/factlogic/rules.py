"""Reading rules out of trained weights, and trimming the model to match.

A conjunctive weight whose magnitude clears the threshold contributes a
literal (negated when the weight is negative); disjunctive weights do the
same over conjunction outputs. Pruning zeroes weights whose removal costs
less than a validation-accuracy budget, iterating until the extracted rule
set stops changing. Weights are only ever set to exactly zero, never
deleted, so model shapes stay put and every edit is reversible.
"""

from __future__ import annotations

import datetime as _dt
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .metrics import accuracy
from .model import DnfModel, predict_indices


@dataclass(frozen=True)
class Literal:
    """A possibly negated reference: predicate id in conjunctions, conjunction index in label clauses."""

    ref: int
    negated: bool = False


@dataclass
class RuleSet:
    """Signed DNF structure: conjunction bodies plus one clause per label."""

    conjunctions: dict[int, list[Literal]] = field(default_factory=dict)
    label_clauses: dict[str, list[Literal]] = field(default_factory=dict)

    def size(self) -> int:
        """Total literal and clause-term count; pruning iterates on this."""
        return sum(len(v) for v in self.conjunctions.values()) + sum(
            len(v) for v in self.label_clauses.values()
        )

    def is_empty(self) -> bool:
        return self.size() == 0


@dataclass(frozen=True)
class PruneConfig:
    epsilon: float = 0.005  # acceptable validation accuracy drop per removal
    weight_threshold: float = 1e-4  # magnitude below which a weight is no literal

    def __post_init__(self):
        if self.epsilon < 0 or self.weight_threshold <= 0:
            raise ValueError("epsilon must be >= 0 and weight_threshold positive")


def extract_rules(model: DnfModel, weight_threshold: float = 1e-4) -> RuleSet:
    """Read the signed rule structure above ``weight_threshold`` off the weights."""
    ruleset = RuleSet()
    for c in range(model.num_conjunctions):
        literals = [
            Literal(ref=model.predicate_ids[i], negated=bool(w < 0))
            for i, w in enumerate(model.conj_weights[c])
            if abs(w) > weight_threshold
        ]
        if literals:
            ruleset.conjunctions[c] = literals
    for label_idx, label in enumerate(model.labels):
        terms = [
            Literal(ref=c, negated=bool(w < 0))
            for c, w in enumerate(model.disj_weights[label_idx])
            if abs(w) > weight_threshold
        ]
        ruleset.label_clauses[label] = terms
    return ruleset


def _validation_accuracy(model: DnfModel, values: np.ndarray, labels: np.ndarray) -> float:
    return accuracy(labels, predict_indices(model, values))


def _accepts(drop: float, epsilon: float) -> bool:
    # Strictly-smaller-than-epsilon, except that zero-impact removals are
    # always acceptable (so epsilon=0 still strips dead weight).
    return drop < epsilon or drop <= 0.0


def _prune_weight_family(
    weights: np.ndarray,
    model: DnfModel,
    values: np.ndarray,
    labels: np.ndarray,
    epsilon: float,
    base_accuracy: float,
) -> tuple[float, int]:
    """Try zeroing each nonzero weight, smallest magnitude first."""
    steps = 0
    flat = [(abs(weights[idx]), idx) for idx in np.ndindex(weights.shape) if weights[idx] != 0.0]
    flat.sort(key=lambda item: (item[0], item[1]))
    for _, idx in flat:
        old = weights[idx]
        weights[idx] = 0.0
        new_accuracy = _validation_accuracy(model, values, labels)
        if _accepts(base_accuracy - new_accuracy, epsilon):
            base_accuracy = new_accuracy
            steps += 1
        else:
            weights[idx] = old
    return base_accuracy, steps


def prune(
    model: DnfModel,
    val_values: np.ndarray,
    val_labels: np.ndarray,
    config: PruneConfig = PruneConfig(),
) -> tuple[DnfModel, RuleSet, int]:
    """Iteratively thin the model until its extracted rule set is stable.

    Each pass: drop cheap disjunction weights, clear conjunctions no
    disjunction uses, drop cheap conjunction weights, drop disjunction
    terms pointing at empty conjunctions, then sweep disjunctions once
    more. Accuracy is always measured on the validation split; the input
    model is left untouched. Returns (pruned model, rules, removal steps).
    """
    model = model.copy()
    val_values = np.asarray(val_values, dtype=np.float64)
    val_labels = np.asarray(val_labels, dtype=int)
    thr = config.weight_threshold
    total_steps = 0

    previous_size = 0  # extracted-from-nothing sentinel: empty rule set
    current_size = extract_rules(model, thr).size()
    while previous_size != current_size:
        current_size = extract_rules(model, thr).size()
        base = _validation_accuracy(model, val_values, val_labels)

        base, steps = _prune_weight_family(
            model.disj_weights, model, val_values, val_labels, config.epsilon, base
        )
        total_steps += steps

        unused = ~np.any(model.disj_weights != 0.0, axis=0)  # no label reads this conjunction
        for c in np.flatnonzero(unused):
            if np.any(model.conj_weights[c] != 0.0):
                model.conj_weights[c] = 0.0
                total_steps += 1

        base = _validation_accuracy(model, val_values, val_labels)
        base, steps = _prune_weight_family(
            model.conj_weights, model, val_values, val_labels, config.epsilon, base
        )
        total_steps += steps

        empty = ~np.any(np.abs(model.conj_weights) > thr, axis=1)  # no surviving literals
        for c in np.flatnonzero(empty):
            if np.any(model.disj_weights[:, c] != 0.0):
                model.disj_weights[:, c] = 0.0
                total_steps += 1

        base = _validation_accuracy(model, val_values, val_labels)
        base, steps = _prune_weight_family(
            model.disj_weights, model, val_values, val_labels, config.epsilon, base
        )
        total_steps += steps

        previous_size = current_size
        current_size = extract_rules(model, thr).size()

    return model, extract_rules(model, thr), total_steps


def intervene_weight(
    model: DnfModel,
    layer_kind: str,
    layer_index: int,
    target_index: int,
    new_value: float,
    audit_path: str | Path | None = None,
    note: str = "",
) -> float:
    """Edit one weight in place and return its old value.

    ``layer_kind`` is "conj" (target indexes a predicate position) or
    "disj" (target indexes a conjunction). When ``audit_path`` is given the
    edit is appended there as a JSON line with old/new values, a timestamp,
    and the note.
    """
    if layer_kind == "conj":
        weights = model.conj_weights
    elif layer_kind == "disj":
        weights = model.disj_weights
    else:
        raise ValueError(f"layer_kind must be 'conj' or 'disj', got {layer_kind!r}")
    if not (0 <= layer_index < weights.shape[0]) or not (0 <= target_index < weights.shape[1]):
        raise ValueError(
            f"index ({layer_index}, {target_index}) out of range for {weights.shape}"
        )
    old_value = float(weights[layer_index, target_index])
    weights[layer_index, target_index] = float(new_value)
    if audit_path is not None:
        entry = {
            "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(),
            "layer_kind": layer_kind,
            "layer_index": layer_index,
            "target_index": target_index,
            "old_value": old_value,
            "new_value": float(new_value),
            "note": note,
        }
        with Path(audit_path).open("a", encoding="utf-8") as handle:
            handle.write(json.dumps(entry) + "\n")
    return old_value


# --- rendering ---------------------------------------------------------------

_NEGATION_VERBS = (
    (" has been ", " has not been "),
    (" have been ", " have not been "),
    (" is ", " is not "),
    (" are ", " are not "),
    (" contains ", " does not contain "),
    (" has ", " does not have "),
    (" exhibits ", " does not exhibit "),
    (" uses ", " does not use "),
    (" makes ", " does not make "),
    (" relies ", " does not rely "),
)


def negate_semantics(text: str) -> str:
    """Negated natural-language reading of a predicate's semantics."""
    for verb, negated in _NEGATION_VERBS:
        if verb in text:
            return text.replace(verb, negated, 1)
    return f"it is not the case that {text}"


def _literal_symbol(literal: Literal, prefix: str) -> str:
    name = f"{prefix}_{literal.ref}"
    return f"¬{name}" if literal.negated else name


def _literal_gloss(literal: Literal, semantics: dict[int, str]) -> str:
    reading = semantics.get(literal.ref, f"predicate {literal.ref} holds")
    return negate_semantics(reading) if literal.negated else reading


def render_rules(ruleset: RuleSet, semantics: dict[int, str] | None = None) -> str:
    """Deterministic text report: symbolic lines, then a plain-English gloss.

    Conjunctions print in ascending index order, then one clause line per
    label in the rule set's label order.
    """
    if ruleset.is_empty():
        return "No rules survive at this threshold.\n"
    semantics = semantics or {}
    lines = []
    for c in sorted(ruleset.conjunctions):
        body = " ∧ ".join(_literal_symbol(lit, "P") for lit in ruleset.conjunctions[c])
        lines.append(f"conj_{c} = {body}")
    for label, terms in ruleset.label_clauses.items():
        clause = " ∨ ".join(_literal_symbol(term, "conj") for term in terms) if terms else "(empty)"
        lines.append(f"P_{label} = {clause}")

    gloss_lines = []
    for label, terms in ruleset.label_clauses.items():
        if not terms:
            continue
        rendered_terms = []
        for term in terms:
            literals = ruleset.conjunctions.get(term.ref, [])
            if not literals:
                continue
            body = " and ".join(_literal_gloss(lit, semantics) for lit in literals)
            rendered_terms.append(f"it is not the case that ({body})" if term.negated else body)
        if rendered_terms:
            gloss_lines.append(
                f"The input message (news) is {label} when " + " or ".join(rendered_terms) + "."
            )
    report = "\n".join(lines)
    if gloss_lines:
        report += "\n\n" + "\n".join(gloss_lines)
    return report + "\n"
