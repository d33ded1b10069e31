"""Scikit-learn style classifier facade over the DNF rule learner."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin

from .errors import DataError
from .model import forward_batch, predict_indices
from .training import TrainConfig, train
from .validation import check_consistent_length, check_group_sizes, check_truth_matrix


class DnfRuleClassifier(ClassifierMixin, BaseEstimator):
    """Learns per-label DNF rules over atom truth values.

    Inputs are matrices of truth values in [-1, 1] (one column per logic
    atom); the classifier trains a stack of gated conjunctive layers under
    one disjunctive layer per class and predicts via softmax. After
    fitting, the learned rules can be read off the weights with
    :func:`factlogic.rules.extract_rules`.

    Parameters
    ----------
    conjunctions : int, number of candidate conjunctive clauses.
    learning_rate, epochs, batch_size, weight_decay, anneal_epochs :
        training recipe knobs; see :class:`factlogic.training.TrainConfig`.
    group_sizes : sequence of int or None
        Columns per predicate (atoms grounded from one predicate share a
        conjunctive weight). None treats every column as its own predicate.
    validation_fraction : float
        Share of the training data held out for checkpoint selection when
        no explicit validation split is passed to ``fit``.
    bias_mode : "max" or "const", layer bias flavor.
    random_state : int, seed for initialization, shuffling, and the split.
    verbose : bool, print one progress line per epoch.

    Attributes
    ----------
    classes_ : ndarray of unique labels, in sorted order.
    model_ : the trained :class:`factlogic.model.DnfModel`.
    report_ : the :class:`factlogic.training.TrainReport` of the fit.
    n_features_in_ : number of atom columns seen at fit time.
    """

    def __init__(self, conjunctions=10, learning_rate=1e-3, epochs=30, batch_size=64,
                 weight_decay=1e-4, anneal_epochs=15, group_sizes=None,
                 validation_fraction=0.1, bias_mode="max", bias_const=1e-4,
                 random_state=0, verbose=False):
        self.conjunctions = conjunctions
        self.learning_rate = learning_rate
        self.epochs = epochs
        self.batch_size = batch_size
        self.weight_decay = weight_decay
        self.anneal_epochs = anneal_epochs
        self.group_sizes = group_sizes
        self.validation_fraction = validation_fraction
        self.bias_mode = bias_mode
        self.bias_const = bias_const
        self.random_state = random_state
        self.verbose = verbose

    def _config(self) -> TrainConfig:
        return TrainConfig(
            learning_rate=self.learning_rate,
            epochs=self.epochs,
            batch_size=self.batch_size,
            conjunctions=self.conjunctions,
            weight_decay=self.weight_decay,
            anneal_epochs=self.anneal_epochs,
            seed=self.random_state,
            bias_mode=self.bias_mode,
            bias_const=self.bias_const,
        )

    def fit(self, X, y, X_val=None, y_val=None):
        X = check_truth_matrix(X)
        y = np.asarray(y)
        check_consistent_length(X, y)
        self.classes_, y_idx = np.unique(y, return_inverse=True)
        if len(self.classes_) < 2:
            raise DataError("fit needs at least two distinct classes")
        self.n_features_in_ = X.shape[1]
        groups = check_group_sizes(self.group_sizes, X.shape[1])

        if X_val is None:
            rng = np.random.default_rng(self.random_state)
            order = rng.permutation(X.shape[0])
            held_out = max(1, int(round(self.validation_fraction * X.shape[0])))
            if held_out >= X.shape[0]:
                raise DataError("validation_fraction leaves no training data")
            val_rows, train_rows = order[:held_out], order[held_out:]
            X_train, y_train = X[train_rows], y_idx[train_rows]
            X_val, y_val_idx = X[val_rows], y_idx[val_rows]
        else:
            X_train, y_train = X, y_idx
            X_val = check_truth_matrix(X_val, name="X_val")
            y_val_idx = np.searchsorted(self.classes_, np.asarray(y_val))
            check_consistent_length(X_val, y_val_idx)

        self.model_, self.report_ = train(
            X_train, y_train, X_val, y_val_idx,
            label_set=tuple(str(c) for c in self.classes_),
            predicate_ids=tuple(range(1, len(groups) + 1)),
            group_sizes=groups,
            config=self._config(),
            verbose=self.verbose,
        )
        return self

    def _check_fitted(self):
        if not hasattr(self, "model_"):
            raise DataError("this classifier has not been fitted yet")

    def predict_proba(self, X) -> np.ndarray:
        self._check_fitted()
        X = check_truth_matrix(X)
        _, _, z = forward_batch(self.model_, X)
        return z

    def predict(self, X) -> np.ndarray:
        self._check_fitted()
        X = check_truth_matrix(X)
        return self.classes_[predict_indices(self.model_, X)]
