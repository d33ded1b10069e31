"""The semi-symbolic DNF layer stack.

One semi-symbolic layer computes, over terms ``t_k = w_k * x_k``::

    out = tanh(sum_k t_k + gate_eff * (b - sum_k |t_k|))

where ``b = max_k |t_k|`` (or a small constant under ``bias_mode="const"``)
and ``gate_eff`` is the semantic gate: at +1 the layer behaves as a
conjunction (one false term forces the output negative), at -1 as a
disjunction (one true term forces it positive). Negative weights read their
input negated, so negation costs nothing extra. Conjunctive layers share one
weight across all atoms grounded from the same predicate, which is what
makes the learned rules predicate-level instead of atom-level.

A model stacks C conjunctive layers under one disjunctive layer per label;
softmax over the disjunctive outputs gives the label distribution. The
model is a few hundred parameters, so everything here is plain numpy, and
gradients are exact analytic chain rules (subgradient conventions:
d|x|/dx = 0 at x = 0, and the max routes gradient through its first
attaining term only).
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import DataError, ShapeError

BIAS_MODES = ("max", "const")


def group_index(group_sizes: tuple[int, ...]) -> np.ndarray:
    """Atom position -> predicate position, for contiguous groups."""
    return np.repeat(np.arange(len(group_sizes)), group_sizes)


def group_starts(group_sizes: tuple[int, ...]) -> np.ndarray:
    return np.concatenate([[0], np.cumsum(group_sizes)[:-1]]).astype(int)


@dataclass
class SemiSymbolicLayer:
    """A single gated layer; grouping only applies to conjunctive mode."""

    weights: np.ndarray
    gate: float  # effective gate in [-1, 1]; sign picks the semantics
    mode: str = "conjunctive"  # conjunctive | disjunctive
    group_sizes: tuple[int, ...] | None = None  # conjunctive weight sharing
    bias_mode: str = "max"
    bias_const: float = 1e-4


def layer_forward(layer: SemiSymbolicLayer, inputs: np.ndarray) -> float:
    """Evaluate one semi-symbolic layer on a single input vector."""
    inputs = np.asarray(inputs, dtype=np.float64)
    if np.any(np.abs(inputs) > 1.0 + 1e-12):
        raise ValueError("layer inputs must lie in [-1, 1]")
    weights = np.asarray(layer.weights, dtype=np.float64)
    if layer.group_sizes is not None:
        if weights.shape[0] != len(layer.group_sizes):
            raise ShapeError("one shared weight per group is required")
        if inputs.shape[0] != int(sum(layer.group_sizes)):
            raise ShapeError(
                f"expected {int(sum(layer.group_sizes))} inputs, got {inputs.shape[0]}"
            )
        per_atom = weights[group_index(layer.group_sizes)]
    else:
        if weights.shape[0] != inputs.shape[0]:
            raise ShapeError(f"expected {weights.shape[0]} inputs, got {inputs.shape[0]}")
        per_atom = weights
    terms = per_atom * inputs
    magnitudes = np.abs(terms)
    support = terms.sum()
    total = magnitudes.sum()
    top = layer.bias_const if layer.bias_mode == "const" else (magnitudes.max() if terms.size else 0.0)
    return float(np.tanh(support + layer.gate * (top - total)))


@dataclass
class DnfModel:
    """Conjunctive weight matrix, per-label disjunctive weights, gate state."""

    labels: tuple[str, ...]
    predicate_ids: tuple[int, ...]
    group_sizes: tuple[int, ...]
    conj_weights: np.ndarray  # (C, N) shared per predicate
    disj_weights: np.ndarray  # (|labels|, C)
    gate: float = 0.0  # scheduler value in [0, 1]; conj use +gate, disj -gate
    bias_mode: str = "max"
    bias_const: float = 1e-4
    config_digest: str = ""

    def __post_init__(self):
        if self.bias_mode not in BIAS_MODES:
            raise DataError(f"unknown bias mode {self.bias_mode!r}")
        if len(self.predicate_ids) != len(self.group_sizes):
            raise ShapeError("one group size per predicate is required")
        if self.conj_weights.shape != (self.num_conjunctions, len(self.group_sizes)):
            raise ShapeError("conjunctive weights must be (C, num_predicates)")
        if self.disj_weights.shape != (len(self.labels), self.num_conjunctions):
            raise ShapeError("disjunctive weights must be (num_labels, C)")

    @property
    def num_conjunctions(self) -> int:
        return self.conj_weights.shape[0]

    @property
    def num_atoms(self) -> int:
        return int(sum(self.group_sizes))

    def copy(self) -> "DnfModel":
        return replace(self, conj_weights=self.conj_weights.copy(), disj_weights=self.disj_weights.copy())

    def conj_layer(self, index: int) -> SemiSymbolicLayer:
        return SemiSymbolicLayer(
            weights=self.conj_weights[index],
            gate=+self.gate,
            mode="conjunctive",
            group_sizes=self.group_sizes,
            bias_mode=self.bias_mode,
            bias_const=self.bias_const,
        )

    def disj_layer(self, index: int) -> SemiSymbolicLayer:
        return SemiSymbolicLayer(
            weights=self.disj_weights[index],
            gate=-self.gate,
            mode="disjunctive",
            group_sizes=None,
            bias_mode=self.bias_mode,
            bias_const=self.bias_const,
        )


@dataclass(frozen=True)
class ForwardTrace:
    conj_outputs: np.ndarray  # (C,)
    disj_outputs: np.ndarray  # (|labels|,)
    z: np.ndarray  # probability over labels, sums to 1


def init_model(
    labels: tuple[str, ...] | list[str],
    predicate_ids: tuple[int, ...] | list[int],
    group_sizes: tuple[int, ...] | list[int],
    conjunctions: int,
    seed: int = 0,
    bias_mode: str = "max",
    bias_const: float = 1e-4,
    config_digest: str = "",
) -> DnfModel:
    """Fresh model with small symmetric weights (tanh near-linear regime)."""
    rng = np.random.default_rng(seed)
    num_predicates = len(group_sizes)
    return DnfModel(
        labels=tuple(labels),
        predicate_ids=tuple(int(p) for p in predicate_ids),
        group_sizes=tuple(int(g) for g in group_sizes),
        conj_weights=rng.uniform(-0.1, 0.1, size=(conjunctions, num_predicates)),
        disj_weights=rng.uniform(-0.1, 0.1, size=(len(labels), conjunctions)),
        gate=0.0,
        bias_mode=bias_mode,
        bias_const=bias_const,
        config_digest=config_digest,
    )


def set_gate(model: DnfModel, value: float) -> None:
    """Move the semantic gate; conjunctive layers see +value, disjunctive -value."""
    if not -1.0 <= value <= 1.0:
        raise ValueError(f"gate must lie in [-1, 1], got {value}")
    model.gate = float(value)


def softmax(scores: np.ndarray) -> np.ndarray:
    shifted = scores - scores.max(axis=-1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=-1, keepdims=True)


def _check_batch(model: DnfModel, values: np.ndarray) -> np.ndarray:
    values = np.asarray(values, dtype=np.float64)
    single = values.ndim == 1
    if single:
        values = values[None, :]
    if values.ndim != 2 or values.shape[1] != model.num_atoms:
        raise ShapeError(
            f"atom vectors must have {model.num_atoms} entries, got shape {values.shape}"
        )
    return values


def _layer_pass(per_atom_weights: np.ndarray, inputs: np.ndarray, gate_eff: float,
                bias_mode: str, bias_const: float) -> tuple[np.ndarray, np.ndarray]:
    """Batched gated layer: returns (outputs, terms).

    ``per_atom_weights`` is (L, K); ``inputs`` is (B, K); outputs are (B, L).
    """
    terms = inputs[:, None, :] * per_atom_weights[None, :, :]  # (B, L, K)
    magnitudes = np.abs(terms)
    support = terms.sum(axis=2)
    total = magnitudes.sum(axis=2)
    top = bias_const if bias_mode == "const" else magnitudes.max(axis=2)
    outputs = np.tanh(support + gate_eff * (top - total))
    return outputs, terms


def forward_batch(model: DnfModel, values: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(conj (B,C), disj (B,|labels|), z (B,|labels|)) without input checks."""
    conj_per_atom = model.conj_weights[:, group_index(model.group_sizes)]  # (C, M)
    conj, _ = _layer_pass(conj_per_atom, values, +model.gate, model.bias_mode, model.bias_const)
    disj, _ = _layer_pass(model.disj_weights, conj, -model.gate, model.bias_mode, model.bias_const)
    return conj, disj, softmax(disj)


def forward(model: DnfModel, values: np.ndarray) -> ForwardTrace:
    """Full trace for one atom vector (or the first row of a batch)."""
    batch = _check_batch(model, values)
    if np.any(np.abs(batch) > 1.0 + 1e-12):
        raise ValueError("atom values must lie in [-1, 1]")
    conj, disj, z = forward_batch(model, batch)
    return ForwardTrace(conj_outputs=conj[0], disj_outputs=disj[0], z=z[0])


def predict_indices(model: DnfModel, values: np.ndarray) -> np.ndarray:
    """Argmax label indices; exact ties resolve to the lowest index."""
    batch = _check_batch(model, values)
    _, disj, _ = forward_batch(model, batch)
    # softmax is monotone, so the disjunctive outputs decide directly
    return np.argmax(disj, axis=1)


def predict(model: DnfModel, values: np.ndarray) -> str:
    """Label for a single atom vector."""
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 1:
        raise ShapeError("predict takes a single atom vector; use predict_indices for batches")
    return model.labels[int(predict_indices(model, values)[0])]


def _gate_factors(terms: np.ndarray, gate_eff: float, bias_mode: str) -> np.ndarray:
    """d(pre-activation)/d(term) for every term, honoring the conventions.

    With the max bias the attaining term's factor is exactly 1 (the max and
    the magnitude sum cancel); every other term sees 1 - gate*sign(term).
    With a constant bias no term is attaining.
    """
    signs = np.sign(terms)
    factors = 1.0 - gate_eff * signs
    if bias_mode == "max":
        first_max = np.argmax(np.abs(terms), axis=-1)
        take = np.indices(first_max.shape)
        factors[(*take, first_max)] = 1.0
    return factors


def loss_and_gradients(
    model: DnfModel, values: np.ndarray, label_indices: np.ndarray
) -> tuple[float, np.ndarray, np.ndarray]:
    """Mean cross-entropy over the batch and its exact weight gradients.

    Returns (loss, d_conj_weights (C, N), d_disj_weights (|labels|, C)).
    Shared conjunctive weights accumulate over their whole atom group.
    """
    batch = _check_batch(model, values)
    label_indices = np.asarray(label_indices, dtype=int)
    if label_indices.ndim == 0:
        label_indices = label_indices[None]
    if label_indices.shape[0] != batch.shape[0]:
        raise ShapeError("one label per atom vector is required")
    if np.any(label_indices < 0) or np.any(label_indices >= len(model.labels)):
        raise ValueError("label index out of range")

    n = batch.shape[0]
    atom_groups = group_index(model.group_sizes)
    conj_per_atom = model.conj_weights[:, atom_groups]  # (C, M)
    conj, conj_terms = _layer_pass(conj_per_atom, batch, +model.gate, model.bias_mode, model.bias_const)
    disj, disj_terms = _layer_pass(model.disj_weights, conj, -model.gate, model.bias_mode, model.bias_const)
    z = softmax(disj)

    picked = z[np.arange(n), label_indices]
    loss = float(-np.mean(np.log(picked)))

    # Softmax + cross-entropy collapse to (z - onehot); mean over the batch.
    d_disj_out = z.copy()
    d_disj_out[np.arange(n), label_indices] -= 1.0
    d_disj_out /= n
    d_disj_pre = d_disj_out * (1.0 - disj**2)  # (B, Y)

    disj_factors = _gate_factors(disj_terms, -model.gate, model.bias_mode)  # (B, Y, C)
    d_disj_weights = np.einsum("by,byc,bc->yc", d_disj_pre, disj_factors, conj)
    d_conj_out = np.einsum("by,byc,yc->bc", d_disj_pre, disj_factors, model.disj_weights)

    d_conj_pre = d_conj_out * (1.0 - conj**2)  # (B, C)
    conj_factors = _gate_factors(conj_terms, +model.gate, model.bias_mode)  # (B, C, M)
    per_atom = d_conj_pre[:, :, None] * conj_factors * batch[:, None, :]  # (B, C, M)
    d_conj_weights = np.add.reduceat(per_atom.sum(axis=0), group_starts(model.group_sizes), axis=1)

    return loss, d_conj_weights, d_disj_weights


def gradients(model: DnfModel, values: np.ndarray, label: int | str) -> dict[str, np.ndarray]:
    """Per-weight partial derivatives of the loss for one sample."""
    if isinstance(label, str):
        label = model.labels.index(label)
    _, d_conj, d_disj = loss_and_gradients(model, np.asarray(values)[None, :], np.asarray([label]))
    return {"conj": d_conj, "disj": d_disj}


# --- checkpoint I/O ----------------------------------------------------------
#
# JSON keeps every weight at full precision: Python's float serialization is
# shortest-round-trip, so load(save(model)) is bit-exact.

CHECKPOINT_FORMAT = "factlogic-checkpoint-v1"


def model_to_dict(model: DnfModel) -> dict:
    return {
        "format": CHECKPOINT_FORMAT,
        "labels": list(model.labels),
        "predicate_ids": list(model.predicate_ids),
        "group_sizes": list(model.group_sizes),
        "conjunctions": model.num_conjunctions,
        "bias_mode": model.bias_mode,
        "bias_const": model.bias_const,
        "gate": model.gate,
        "conj_weights": model.conj_weights.tolist(),
        "disj_weights": model.disj_weights.tolist(),
        "config_digest": model.config_digest,
    }


def model_from_dict(payload: dict) -> DnfModel:
    try:
        if payload.get("format") != CHECKPOINT_FORMAT:
            raise DataError(f"unknown checkpoint format {payload.get('format')!r}")
        return DnfModel(
            labels=tuple(payload["labels"]),
            predicate_ids=tuple(int(p) for p in payload["predicate_ids"]),
            group_sizes=tuple(int(g) for g in payload["group_sizes"]),
            conj_weights=np.asarray(payload["conj_weights"], dtype=np.float64),
            disj_weights=np.asarray(payload["disj_weights"], dtype=np.float64),
            gate=float(payload["gate"]),
            bias_mode=str(payload["bias_mode"]),
            bias_const=float(payload["bias_const"]),
            config_digest=str(payload.get("config_digest", "")),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"corrupt checkpoint: {exc}") from exc


def save_model(model: DnfModel, path: str | Path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model), indent=2) + "\n", encoding="utf-8")


def load_model(path: str | Path) -> DnfModel:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"checkpoint not found: {path}")
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataError(f"corrupt checkpoint {path}: {exc}") from exc
    return model_from_dict(payload)


def config_digest(payload: dict) -> str:
    canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()
