from .evaluation import EvalReport, baseline_moving_average, baseline_persistence, evaluate
from .gradcheck import gradient_check
from .network import CnnModel, DivergenceError, TrainingParams, train
from .result import ForecastResult
from .weights import IntegrityError, ShapeError, VersionError, load_model, save_model
from .windows import AlignmentError, Normalizer, WindowSpec, make_windows

__all__ = [
    "AlignmentError",
    "CnnModel",
    "DivergenceError",
    "EvalReport",
    "ForecastResult",
    "IntegrityError",
    "Normalizer",
    "ShapeError",
    "TrainingParams",
    "VersionError",
    "WindowSpec",
    "baseline_moving_average",
    "baseline_persistence",
    "evaluate",
    "gradient_check",
    "load_model",
    "make_windows",
    "save_model",
    "train",
]
