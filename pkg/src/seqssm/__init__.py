"""Input-adaptive diagonal state-space sequence models.

The recurrence squashes its raw transition weights through a stability-
preserving map before every step, so training can move them anywhere on
the real line without the state blowing up; the squash parameters also set
how gradients scale per weight.  Exact hand-written backprop through time,
a finite-difference oracle, desk-scale synthetic tasks, and a CLI.

Quick start:

    from seqssm import SequenceRegressor
    est = SequenceRegressor(epochs=50).fit(X, y)   # X: list of (T, d) arrays
    pred = est.predict(X)
"""

from .datasets import (DatasetSplits, FhnConfig, SequenceCsvSchema, SequenceSample,
                       adding_problem_generate, fhn_generate, load_sequence_csv)
from .errors import (ArgumentError, CheckpointVersionError, ConfigError, DomainError,
                     GenerationError, IngestionError, NumericError, ShapeError)
from .events import (EventRecord, EventStreamConfig, detokenize, event_stream_synthesize,
                     load_events_csv, tokenize_event)
from .estimators import SequenceClassifier, SequenceRegressor
from .layer import (LayerParams, TransitionConfig, block_forward, event_pool,
                    gate_output, modulate, step, transition)
from .model import (Model, ModelConfig, forward, init_model, load_checkpoint,
                    param_count, save_checkpoint)
from .reparam import (ReparamConfig, gradient_over_weight_ratio, inverse_stability_map,
                      stability_map, stability_map_derivative)
from .trainer import TrainConfig, TrainReport, evaluate, train

__version__ = "0.1.0"

__all__ = [
    "ArgumentError", "CheckpointVersionError", "ConfigError", "DatasetSplits",
    "DomainError", "EventRecord", "EventStreamConfig", "FhnConfig",
    "GenerationError", "IngestionError", "LayerParams", "Model", "ModelConfig",
    "NumericError", "ReparamConfig", "SequenceClassifier", "SequenceCsvSchema",
    "SequenceRegressor", "SequenceSample", "ShapeError", "TrainConfig",
    "TrainReport", "TransitionConfig", "adding_problem_generate", "block_forward",
    "detokenize", "evaluate", "event_pool", "event_stream_synthesize",
    "fhn_generate", "forward", "gate_output", "gradient_over_weight_ratio",
    "init_model", "inverse_stability_map", "load_checkpoint", "load_events_csv",
    "load_sequence_csv", "modulate", "param_count", "save_checkpoint",
    "stability_map", "stability_map_derivative", "step", "tokenize_event",
    "train", "transition",
]
