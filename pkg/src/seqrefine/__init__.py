"""Interval-graph sequential recommendation with similarity-based data refinement."""
from .corpus import InteractionLog, IntervalGraphs, build_graphs, load_log, parse_log
from .evaluator import MetricsReport, rank_and_score
from .model import ModelConfig, Recommender
from .refine import RefineConfig, RefinementReport, refine_all
from .trainer import TrainConfig, train

__version__ = "0.1.0"

__all__ = [
    "InteractionLog", "IntervalGraphs", "build_graphs", "load_log", "parse_log",
    "MetricsReport", "rank_and_score", "ModelConfig", "Recommender",
    "RefineConfig", "RefinementReport", "refine_all", "TrainConfig", "train",
]
