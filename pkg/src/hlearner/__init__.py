"""Hypernetwork-based estimation of individualised effects for composite
treatments and composite outcomes, with synthetic benchmarks, baselines, and
a reproducible experiment harness.

Modules: `nn` (dense network engine), `data` (synthetic generative process
and oracle), `learners` (H-Learner and S/xS baselines), `metrics`
(composite effect error), `harness` (config-driven sweeps), `plotting`
(deterministic charts), `cli` (command-line entry point).
"""

from .data import (
    Dataset,
    Dgp,
    TreatmentSpec,
    enumerate_eval_treatments,
    generate_dataset,
    mean_outcome,
    sample_dgp,
)
from .harness import (
    AggRow,
    ExperimentConfig,
    ResultTable,
    RunRow,
    aggregate,
    emit_csv,
    load_table,
    run_experiment,
)
from .learners import (
    ALL_LEARNERS,
    HLEARNER,
    SLEARNER,
    XSLEARNER,
    BaselineModel,
    EmbedderParams,
    HLearnerModel,
    TrainConfig,
    TrainingDiverged,
    load_model,
    predict,
    predict_all,
    save_model,
    train,
)
from .metrics import ConstantModel, EvalReport, OracleModel, factual_rmse, pehe_composite
from .nn import Activation, NetShape

__version__ = "0.1.0"

__all__ = [
    "Activation",
    "AggRow",
    "ALL_LEARNERS",
    "BaselineModel",
    "ConstantModel",
    "Dataset",
    "Dgp",
    "EmbedderParams",
    "EvalReport",
    "ExperimentConfig",
    "HLEARNER",
    "HLearnerModel",
    "NetShape",
    "OracleModel",
    "ResultTable",
    "RunRow",
    "SLEARNER",
    "TrainConfig",
    "TrainingDiverged",
    "TreatmentSpec",
    "XSLEARNER",
    "aggregate",
    "emit_csv",
    "enumerate_eval_treatments",
    "factual_rmse",
    "generate_dataset",
    "load_model",
    "load_table",
    "mean_outcome",
    "pehe_composite",
    "predict",
    "predict_all",
    "run_experiment",
    "sample_dgp",
    "save_model",
    "train",
]
