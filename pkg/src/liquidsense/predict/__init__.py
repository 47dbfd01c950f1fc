from .classifier import ClassifierModel, PairwiseFunction, predict_discrete, train_classifier
from .metrics import ContinuousReport, DiscreteReport, evaluate, evaluate_continuous, evaluate_discrete
from .persist import load_model, save_model
from .spline import LevelPrediction, SplineModel, fit_spline, fit_spline_samples, predict_continuous

__all__ = [
    "ClassifierModel",
    "ContinuousReport",
    "DiscreteReport",
    "LevelPrediction",
    "PairwiseFunction",
    "SplineModel",
    "evaluate",
    "evaluate_continuous",
    "evaluate_discrete",
    "fit_spline",
    "fit_spline_samples",
    "load_model",
    "predict_continuous",
    "predict_discrete",
    "save_model",
    "train_classifier",
]
