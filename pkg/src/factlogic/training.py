"""End-to-end training of the DNF model.

Cross-entropy on the softmax label distribution, Adam with decoupled weight
decay (decay acts directly on the weights so the pull toward sparse symbolic
structure is independent of Adam's adaptive scaling), seeded shuffling, and
a per-epoch gate schedule that eases the layers from plain weighted sums
into boolean semantics. The checkpoint with the best validation accuracy
wins; ties go to the earliest epoch.
"""

from __future__ import annotations

import json
import math
import sys
from dataclasses import asdict, dataclass, field, replace
from itertools import product

import numpy as np

from .errors import DataError, TrainingError
from .metrics import accuracy, macro_f1
from .model import DnfModel, config_digest, init_model, loss_and_gradients, predict_indices, set_gate

# The gate must essentially reach 1 by the end of annealing; this is the
# closure target the decay rate is solved against.
GATE_CLOSURE = 0.995

DEFAULT_C_GRID = (10, 20, 30, 40, 50)
DEFAULT_WEIGHT_DECAY_GRID = (1e-3, 5e-4, 1e-4)


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    epochs: int = 30
    batch_size: int = 64
    conjunctions: int = 10
    weight_decay: float = 1e-4
    anneal_epochs: int = 15
    seed: int = 0
    bias_mode: str = "max"
    bias_const: float = 1e-4

    def __post_init__(self):
        if min(self.learning_rate, self.epochs, self.batch_size, self.conjunctions) <= 0:
            raise ValueError("learning_rate, epochs, batch_size, conjunctions must be positive")
        if self.weight_decay < 0 or self.anneal_epochs <= 0:
            raise ValueError("weight_decay must be >= 0 and anneal_epochs positive")
        if self.anneal_epochs > self.epochs:
            raise ValueError("anneal_epochs must not exceed epochs")

    def digest(self) -> str:
        return config_digest(asdict(self))


@dataclass
class EpochStats:
    epoch: int
    gate: float
    train_loss: float
    val_accuracy: float
    val_macro_f1: float


@dataclass
class TrainReport:
    config: TrainConfig
    epochs: list[EpochStats] = field(default_factory=list)
    selected_epoch: int = 0
    final_val_accuracy: float = 0.0
    final_val_macro_f1: float = 0.0

    def to_dict(self) -> dict:
        return {
            "config": asdict(self.config),
            "epochs": [asdict(e) for e in self.epochs],
            "selected_epoch": self.selected_epoch,
            "final_val_accuracy": self.final_val_accuracy,
            "final_val_macro_f1": self.final_val_macro_f1,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"


def cross_entropy(z: np.ndarray, label: int) -> float:
    """Negative log probability of the true label; batch losses are means."""
    z = np.asarray(z, dtype=np.float64)
    if label < 0 or label >= z.shape[-1]:
        raise ValueError(f"label index {label} out of range for {z.shape[-1]} labels")
    return float(-np.log(z[label]))


def gate_schedule(epoch: int, config: TrainConfig) -> float:
    """Gate value for a 1-based epoch: 1 - r**epoch, clamped to 1 after annealing.

    The decay rate r is solved so the gate reaches at least GATE_CLOSURE by
    the last annealing epoch (a hair of slack absorbs float rounding), and
    the clamp makes every later epoch train at exactly 1.
    """
    if epoch > config.anneal_epochs:
        return 1.0
    rate = ((1.0 - GATE_CLOSURE) * (1.0 - 1e-9)) ** (1.0 / config.anneal_epochs)
    return 1.0 - rate**epoch


class Adam:
    """Adam with decoupled weight decay over a list of parameter arrays."""

    def __init__(self, shapes: list[tuple[int, ...]], learning_rate: float,
                 weight_decay: float = 0.0, beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8):
        self.learning_rate = learning_rate
        self.weight_decay = weight_decay
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self.m = [np.zeros(shape) for shape in shapes]
        self.v = [np.zeros(shape) for shape in shapes]

    def step(self, params: list[np.ndarray], grads: list[np.ndarray]) -> None:
        self.step_count += 1
        t = self.step_count
        for i, (p, g) in enumerate(zip(params, grads)):
            self.m[i] = self.beta1 * self.m[i] + (1 - self.beta1) * g
            self.v[i] = self.beta2 * self.v[i] + (1 - self.beta2) * g**2
            m_hat = self.m[i] / (1 - self.beta1**t)
            v_hat = self.v[i] / (1 - self.beta2**t)
            p -= self.learning_rate * m_hat / (np.sqrt(v_hat) + self.eps)
            if self.weight_decay:
                p -= self.learning_rate * self.weight_decay * p


def evaluate_split(model: DnfModel, values: np.ndarray, labels: np.ndarray) -> tuple[float, float]:
    predictions = predict_indices(model, values)
    return (
        accuracy(labels, predictions),
        macro_f1(labels, predictions, len(model.labels)),
    )


def train(
    train_values: np.ndarray,
    train_labels: np.ndarray,
    val_values: np.ndarray,
    val_labels: np.ndarray,
    label_set: tuple[str, ...],
    predicate_ids: tuple[int, ...],
    group_sizes: tuple[int, ...],
    config: TrainConfig,
    verbose: bool = False,
    log=None,
) -> tuple[DnfModel, TrainReport]:
    """Train a fresh model and return the best-validation checkpoint.

    ``train_labels``/``val_labels`` are integer indices into ``label_set``.
    """
    train_values = np.asarray(train_values, dtype=np.float64)
    val_values = np.asarray(val_values, dtype=np.float64)
    train_labels = np.asarray(train_labels, dtype=int)
    val_labels = np.asarray(val_labels, dtype=int)
    if train_values.shape[0] == 0 or val_values.shape[0] == 0:
        raise DataError("training and validation splits must be non-empty")
    if train_values.shape[1] != val_values.shape[1]:
        raise DataError("train and validation vectors disagree in length")
    if np.any(np.abs(train_values) > 1.0 + 1e-12) or np.any(np.abs(val_values) > 1.0 + 1e-12):
        raise ValueError("atom values must lie in [-1, 1]")

    model = init_model(
        labels=label_set,
        predicate_ids=predicate_ids,
        group_sizes=group_sizes,
        conjunctions=config.conjunctions,
        seed=config.seed,
        bias_mode=config.bias_mode,
        bias_const=config.bias_const,
        config_digest=config.digest(),
    )
    optimizer = Adam(
        shapes=[model.conj_weights.shape, model.disj_weights.shape],
        learning_rate=config.learning_rate,
        weight_decay=config.weight_decay,
    )
    rng = np.random.default_rng(config.seed)
    report = TrainReport(config=config)
    best: tuple[float, int, DnfModel] | None = None  # (val_acc, epoch, snapshot)

    n = train_values.shape[0]
    for epoch in range(1, config.epochs + 1):
        set_gate(model, gate_schedule(epoch, config))
        order = rng.permutation(n)
        batch_losses = []
        for start in range(0, n, config.batch_size):
            rows = order[start : start + config.batch_size]
            loss, d_conj, d_disj = loss_and_gradients(model, train_values[rows], train_labels[rows])
            if not math.isfinite(loss):
                raise TrainingError(
                    f"non-finite loss {loss} at epoch {epoch}, batch {start // config.batch_size}"
                )
            optimizer.step([model.conj_weights, model.disj_weights], [d_conj, d_disj])
            batch_losses.append(loss)
        train_loss = float(np.mean(batch_losses))
        val_acc, val_f1 = evaluate_split(model, val_values, val_labels)
        report.epochs.append(
            EpochStats(
                epoch=epoch,
                gate=model.gate,
                train_loss=train_loss,
                val_accuracy=val_acc,
                val_macro_f1=val_f1,
            )
        )
        if verbose:
            print(
                f"epoch {epoch:02d}/{config.epochs} gate {model.gate:.4f} "
                f"loss {train_loss:.4f} val_acc {val_acc:.4f} val_f1 {val_f1:.4f}",
                file=log if log is not None else sys.stdout,
            )
        if best is None or val_acc > best[0]:
            best = (val_acc, epoch, model.copy())

    assert best is not None
    report.selected_epoch = best[1]
    selected = best[2]
    report.final_val_accuracy, report.final_val_macro_f1 = evaluate_split(
        selected, val_values, val_labels
    )
    return selected, report


@dataclass
class GridCell:
    conjunctions: int
    weight_decay: float
    val_accuracy: float
    val_macro_f1: float
    selected_epoch: int


def grid_search(
    train_values: np.ndarray,
    train_labels: np.ndarray,
    val_values: np.ndarray,
    val_labels: np.ndarray,
    label_set: tuple[str, ...],
    predicate_ids: tuple[int, ...],
    group_sizes: tuple[int, ...],
    base_config: TrainConfig = TrainConfig(),
    c_grid: tuple[int, ...] = DEFAULT_C_GRID,
    weight_decay_grid: tuple[float, ...] = DEFAULT_WEIGHT_DECAY_GRID,
    verbose: bool = False,
) -> tuple[TrainConfig, DnfModel, TrainReport, list[GridCell]]:
    """Full sweep over the hyperparameter grid, selected on validation accuracy.

    Ties prefer fewer conjunctions, then stronger weight decay. Cells are
    independent of each other (fresh seeds/state), so the sweep order never
    changes the outcome; cell reports come back in grid order.
    """
    if not c_grid or not weight_decay_grid:
        raise ValueError("grids must be non-empty")
    cells: list[GridCell] = []
    best_key: tuple[float, float, float] | None = None
    best_result: tuple[TrainConfig, DnfModel, TrainReport] | None = None
    for conjunctions, weight_decay in product(c_grid, weight_decay_grid):
        config = replace(base_config, conjunctions=conjunctions, weight_decay=weight_decay)
        model, report = train(
            train_values, train_labels, val_values, val_labels,
            label_set, predicate_ids, group_sizes, config, verbose=verbose,
        )
        cells.append(
            GridCell(
                conjunctions=conjunctions,
                weight_decay=weight_decay,
                val_accuracy=report.final_val_accuracy,
                val_macro_f1=report.final_val_macro_f1,
                selected_epoch=report.selected_epoch,
            )
        )
        key = (report.final_val_accuracy, -conjunctions, weight_decay)
        if best_key is None or key > best_key:
            best_key = key
            best_result = (config, model, report)
    assert best_result is not None
    return (*best_result, cells)
