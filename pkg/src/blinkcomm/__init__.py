"""Eye-blink communication toolkit.

Turns a stream of 80x70 grayscale eye frames into dictionary words: frames
are classified Open/Closed, debounced into blinks, grouped into normalized
patterns, and mapped through a configurable dictionary. Ships a synthetic
data generator, a trainable from-scratch classifier, latency benchmarking
with constrained model selection, and a streaming event gateway.
"""

from .bench import ModelCandidate, evaluate, select_model, sweep
from .classifier import (HeuristicClassifier, HeuristicModel, NetClassifier,
                         TinyNet, TrainConfig, TrainReport, decide,
                         gradient_check, init_from_model, load_model,
                         make_classifier, save_model, train)
from .core import (EyeState, Frame, StateEvent, StreamConfig,
                   frames_for_duration)
from .errors import (DataError, InfeasibleError, ModelFormatError,
                     ModelSchemaError, NumericError, SequencingError,
                     StreamError)
from .patterns import (DEFAULT_DICTIONARIES, Decoder, DecoderState, Dictionary,
                       SessionEnded, SessionStarted, StateEcho, UnknownPattern,
                       WordEmitted, blink_count, decode_stream,
                       event_from_payload, is_normalized, normalize,
                       pattern_for_count, step)
from .pipeline import (ByteStreamSource, DirectorySource, IterSource,
                       LatencyStats, PipelineReport, ScriptSource,
                       measure_latency, run_pipeline)
from .synthetic import GeneratorParams, LabeledDataset, generate_synthetic

__version__ = "0.1.0"

__all__ = [
    "ByteStreamSource", "DEFAULT_DICTIONARIES", "DataError", "Decoder",
    "DecoderState", "Dictionary",
    "DirectorySource", "EyeState", "Frame", "GeneratorParams",
    "HeuristicClassifier", "HeuristicModel", "InfeasibleError", "IterSource",
    "LabeledDataset", "LatencyStats", "ModelCandidate", "ModelFormatError",
    "ModelSchemaError", "NetClassifier", "NumericError", "PipelineReport",
    "ScriptSource", "SequencingError", "SessionEnded", "SessionStarted",
    "StateEcho", "StateEvent", "StreamConfig", "StreamError", "TinyNet",
    "TrainConfig", "TrainReport", "UnknownPattern", "WordEmitted",
    "blink_count", "decide", "decode_stream", "evaluate",
    "event_from_payload", "frames_for_duration", "generate_synthetic",
    "gradient_check", "init_from_model", "is_normalized", "load_model",
    "make_classifier", "measure_latency",
    "normalize", "pattern_for_count", "run_pipeline", "save_model",
    "select_model", "step", "sweep", "train",
]
