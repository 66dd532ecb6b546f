"""Effect-estimation error against the generative oracle.

The headline metric extends squared-error PEHE to composite treatments and
outcomes: for every test covariate vector, every outcome, and every
treatment combination other than a reference (all-zeros by default), compare
the model's predicted effect, prediction(t) - prediction(t_ref), with the
oracle effect, mu(t) - mu(t_ref), and average the squared differences. The
reported value is the mean squared error itself, not its root.

Any object exposing predict_batch(x, t) -> (n, M) and
predict_factual(x, t) -> (n, M) can be evaluated; trained learners are
dispatched through the learner module's functions. `OracleModel` and
`ConstantModel` provide the two canonical references: the oracle scores
exactly zero, and a constant scores the mean square of the true effects.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import learners
from .data import Dgp, mean_outcome_batch

__all__ = [
    "EvalReport",
    "OracleModel",
    "ConstantModel",
    "pehe_composite",
    "factual_rmse",
]


@dataclass
class EvalReport:
    """Evaluation summary for one model on one test set.

    factual_rmse is None when no factual dataset was supplied to fill it;
    the experiment harness always populates it from a held-out dataset.
    """

    pehe_composite: float
    pehe_per_outcome: list[float]
    factual_rmse: float | None
    n_test: int
    n_eval_treatments: int
    reference_treatment: np.ndarray

    def to_dict(self) -> dict:
        return {
            "pehe_composite": self.pehe_composite,
            "pehe_per_outcome": list(self.pehe_per_outcome),
            "factual_rmse": self.factual_rmse,
            "n_test": self.n_test,
            "n_eval_treatments": self.n_eval_treatments,
            "reference_treatment": self.reference_treatment.tolist(),
        }


class OracleModel:
    """Predicts the true noiseless mean outcomes; the zero point of PEHE."""

    def __init__(self, dgp: Dgp):
        self.dgp = dgp
        self.m = dgp.m

    def predict_batch(self, x: np.ndarray, t: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(x)
        return mean_outcome_batch(self.dgp, x, np.broadcast_to(t, (len(x), len(t))))

    def predict_factual(self, x: np.ndarray, t: np.ndarray) -> np.ndarray:
        return mean_outcome_batch(self.dgp, x, t)

    def predict_all(self, x: np.ndarray, t: np.ndarray) -> np.ndarray:
        return self.predict_batch(x, t)[0]


class ConstantModel:
    """Predicts one constant everywhere; its estimated effects are all zero,
    so its PEHE is the mean square of the true effects."""

    def __init__(self, value: float, m: int):
        self.value = float(value)
        self.m = m

    def predict_batch(self, x: np.ndarray, t: np.ndarray) -> np.ndarray:
        return np.full((len(np.atleast_2d(x)), self.m), self.value)

    def predict_factual(self, x: np.ndarray, t: np.ndarray) -> np.ndarray:
        return np.full((len(np.atleast_2d(x)), self.m), self.value)

    def predict_all(self, x: np.ndarray, t: np.ndarray) -> np.ndarray:
        return np.full(self.m, self.value)


def _batch_predictor(model):
    if hasattr(model, "predict_batch"):
        return model.predict_batch
    return lambda x, t: learners.predict_batch(model, x, t)


def _factual_predictor(model):
    if hasattr(model, "predict_factual"):
        return model.predict_factual
    return lambda x, t: learners.predict_factual(model, x, t)


def pehe_composite(
    model,
    dgp: Dgp,
    x_test: np.ndarray,
    eval_treatments: list[np.ndarray],
    t_ref: np.ndarray | None = None,
    all_pairs: bool = False,
) -> EvalReport:
    """Mean squared error of estimated effects over treatments and outcomes.

    Default form contrasts every evaluation treatment against `t_ref`
    (the first entry of eval_treatments when not given):

        (1/(n*M*(T-1))) * sum_i sum_m sum_{t != t_ref}
            ((pred(x_i,t,m) - pred(x_i,t_ref,m)) - (mu_m(x_i,t) - mu_m(x_i,t_ref)))^2

    per-outcome values are the inner averages over (i, t). With
    all_pairs=True the contrast runs over all ordered treatment pairs
    instead, with denominator n*M*T*(T-1). Summation order is fixed, so
    results are bit-stable for a given argument order.
    """
    x_test = np.atleast_2d(np.asarray(x_test, dtype=np.float64))
    n = len(x_test)
    if n < 1:
        raise ValueError("x_test must be nonempty")
    n_treat = len(eval_treatments)
    if n_treat < 2:
        raise ValueError("need at least 2 evaluation treatments")
    if t_ref is None:
        t_ref = eval_treatments[0]
    t_ref = np.asarray(t_ref, dtype=np.float64)
    ref_index = next(
        (i for i, t in enumerate(eval_treatments) if np.array_equal(t, t_ref)), None
    )
    if ref_index is None:
        raise ValueError("t_ref is not one of the evaluation treatments")

    predict = _batch_predictor(model)
    # prediction-minus-truth per treatment; effect error is a difference of
    # these, so any shared constant offset cancels
    errors = []
    for t in eval_treatments:
        mu = mean_outcome_batch(dgp, x_test, np.broadcast_to(t, (n, len(t))))
        errors.append(np.asarray(predict(x_test, t), dtype=np.float64) - mu)

    m_outcomes = errors[0].shape[1]
    ssq = np.zeros(m_outcomes)
    if all_pairs:
        for i, err_a in enumerate(errors):
            for j, err_b in enumerate(errors):
                if i == j:
                    continue
                contrast = err_a - err_b
                ssq += np.sum(contrast * contrast, axis=0)
        cells = n * n_treat * (n_treat - 1)
    else:
        err_ref = errors[ref_index]
        for i, err_t in enumerate(errors):
            if i == ref_index:
                continue
            contrast = err_t - err_ref
            ssq += np.sum(contrast * contrast, axis=0)
        cells = n * (n_treat - 1)

    per_outcome = ssq / cells
    return EvalReport(
        pehe_composite=float(np.mean(per_outcome)),
        pehe_per_outcome=[float(v) for v in per_outcome],
        factual_rmse=None,
        n_test=n,
        n_eval_treatments=n_treat,
        reference_treatment=t_ref.copy(),
    )


def factual_rmse(model, dataset) -> float:
    """Root mean squared error of predictions at the received treatments."""
    preds = _factual_predictor(model)(dataset.x, dataset.t)
    diff = np.asarray(preds, dtype=np.float64) - dataset.y
    return float(np.sqrt(np.mean(diff * diff)))
