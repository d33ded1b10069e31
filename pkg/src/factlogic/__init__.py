"""Neural-symbolic news verification.

Expert question templates become logic predicates; a language-model backend
answers the grounded questions as truth values in [-1, 1]; a differentiable
DNF layer stack learns, prunes, and renders human-readable rules that
aggregate those answers into a verdict.
"""

from .backends import (
    BackendConfig,
    ClosedCounts,
    MockBackend,
    OpenLogits,
    extract_claims,
    make_backend,
    mock_backend,
    query_yes_no,
)
from .errors import (
    BackendError,
    ConfigError,
    DataError,
    FactlogicError,
    GroundingError,
    ProtocolError,
    ReviewError,
    ShapeError,
    TrainingError,
)
from .estimator import DnfRuleClassifier
from .evaluate import AtomCache, AtomVectorizer, evaluate_sample
from .model import (
    DnfModel,
    ForwardTrace,
    SemiSymbolicLayer,
    forward,
    gradients,
    init_model,
    layer_forward,
    load_model,
    predict,
    predict_indices,
    save_model,
    set_gate,
)
from .rules import PruneConfig, RuleSet, extract_rules, intervene_weight, prune, render_rules
from .templates import (
    LogicAtom,
    NewsSample,
    Predicate,
    QuestionTemplate,
    enumerate_groundings,
    load_default_templates,
    load_templates,
    render_question,
)
from .training import TrainConfig, TrainReport, cross_entropy, gate_schedule, grid_search, train
from .truth import AtomVector, assemble_vector, truth_from_logits, truth_from_samples

__version__ = "0.1.0"

__all__ = [
    "AtomCache",
    "AtomVector",
    "AtomVectorizer",
    "BackendConfig",
    "BackendError",
    "ClosedCounts",
    "ConfigError",
    "DataError",
    "DnfModel",
    "DnfRuleClassifier",
    "FactlogicError",
    "ForwardTrace",
    "GroundingError",
    "LogicAtom",
    "MockBackend",
    "NewsSample",
    "OpenLogits",
    "Predicate",
    "ProtocolError",
    "PruneConfig",
    "QuestionTemplate",
    "ReviewError",
    "RuleSet",
    "SemiSymbolicLayer",
    "ShapeError",
    "TrainConfig",
    "TrainReport",
    "TrainingError",
    "assemble_vector",
    "cross_entropy",
    "enumerate_groundings",
    "evaluate_sample",
    "extract_claims",
    "extract_rules",
    "forward",
    "gate_schedule",
    "gradients",
    "grid_search",
    "init_model",
    "intervene_weight",
    "layer_forward",
    "load_default_templates",
    "load_model",
    "load_templates",
    "make_backend",
    "mock_backend",
    "predict",
    "predict_indices",
    "prune",
    "query_yes_no",
    "render_question",
    "render_rules",
    "save_model",
    "set_gate",
    "train",
    "truth_from_logits",
    "truth_from_samples",
]
