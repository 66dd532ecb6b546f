"""Tests for the composite effect-error metric.

The vectorized metric is pinned against three independent references: an
exact hand computation on a two-record instance, a brute-force triple loop
built on scalar predict_all/mean_outcome calls, and the closed-form zero of
the oracle predictor.
"""

import dataclasses

import numpy as np
import pytest

from hlearner.data import (
    TreatmentSpec,
    enumerate_eval_treatments,
    generate_dataset,
    mean_outcome,
    sample_dgp,
)
from hlearner.learners import (
    HLEARNER,
    TrainConfig,
    init_baseline,
    init_hlearner,
    predict_all,
)
from hlearner.metrics import ConstantModel, EvalReport, OracleModel, factual_rmse, pehe_composite


def brute_force_pehe(model, dgp, x_test, treatments, t_ref):
    """Independent triple-loop recomputation using scalar oracle calls."""

    def pall(x, t):
        if hasattr(model, "predict_all"):
            return model.predict_all(x, t)
        return predict_all(model, x, t)

    per_outcome = [0.0] * dgp.m
    n_contrasts = 0
    for x in x_test:
        pred_ref = pall(x, t_ref)
        mu_ref = [mean_outcome(dgp, x, t_ref, m) for m in range(dgp.m)]
        for t in treatments:
            if np.array_equal(t, t_ref):
                continue
            pred = pall(x, t)
            n_contrasts += 1
            for m in range(dgp.m):
                est = pred[m] - pred_ref[m]
                true = mean_outcome(dgp, x, t, m) - mu_ref[m]
                per_outcome[m] += (est - true) ** 2
    cells = n_contrasts  # already n * (T-1) after the double loop
    per_outcome = [v / cells for v in per_outcome]
    return sum(per_outcome) / dgp.m, per_outcome


def test_oracle_scores_exactly_zero():
    spec = TreatmentSpec.from_counts(2, 1)
    dgp = sample_dgp(4, spec, 2, seed=0)
    x = np.random.default_rng(1).normal(size=(20, 4))
    report = pehe_composite(OracleModel(dgp), dgp, x, enumerate_eval_treatments(spec, 3))
    assert report.pehe_composite == 0.0
    assert all(v == 0.0 for v in report.pehe_per_outcome)
    assert report.n_test == 20
    assert report.n_eval_treatments == 4 * 3
    np.testing.assert_array_equal(report.reference_treatment, np.zeros(3))


def test_hand_computed_two_record_instance():
    # mu(x, t) = 2x + 1.5*(1 + 0.5x)*t; model predicts x + t, so its effect
    # estimate is always 1 while the truth is 1.5*(1 + 0.5x).
    spec = TreatmentSpec.from_counts(1)
    dgp = sample_dgp(1, spec, 1, sigma_y=0.0, seed=0)
    dgp = dataclasses.replace(
        dgp,
        alpha=np.array([[2.0]]),
        c=np.array([[1.5]]),
        v=np.array([[[0.5]]]),
        d=np.zeros((1, 1, 1)),
    )

    class LinearModel:
        m = 1

        def predict_batch(self, x, t):
            x = np.atleast_2d(x)
            return (x[:, 0] + t[0])[:, None]

        def predict_all(self, x, t):
            return np.array([x[0] + t[0]])

    x_test = np.array([[0.0], [2.0]])
    combos = enumerate_eval_treatments(spec)
    report = pehe_composite(LinearModel(), dgp, x_test, combos)
    # truth: tau(0) = 1.5, tau(2) = 3.0; cells (1-1.5)^2 and (1-3)^2
    expected = ((1.0 - 1.5) ** 2 + (1.0 - 3.0) ** 2) / 2.0
    assert report.pehe_composite == pytest.approx(expected, rel=1e-15)


def test_constant_model_matches_brute_force():
    spec = TreatmentSpec.from_counts(2)
    dgp = sample_dgp(3, spec, 2, seed=2)
    x = np.random.default_rng(3).normal(size=(12, 3))
    combos = enumerate_eval_treatments(spec)
    model = ConstantModel(4.2, 2)
    report = pehe_composite(model, dgp, x, combos)
    brute, brute_per = brute_force_pehe(model, dgp, x, combos, combos[0])
    assert report.pehe_composite == pytest.approx(brute, rel=1e-12)
    np.testing.assert_allclose(report.pehe_per_outcome, brute_per, rtol=1e-12)


def test_learner_models_match_brute_force():
    spec = TreatmentSpec.from_counts(2)
    dgp = sample_dgp(3, spec, 2, seed=4)
    x = np.random.default_rng(5).normal(size=(10, 3))
    combos = enumerate_eval_treatments(spec)
    cfg = TrainConfig(embedding_size=6, hypernet_hidden=(7,), target_hidden=(4,), seed=6)
    for model in (
        init_hlearner(3, 2, 2, cfg),
        init_baseline("slearner", 3, 2, 2, cfg),
        init_baseline("xslearner", 3, 2, 2, cfg),
    ):
        report = pehe_composite(model, dgp, x, combos)
        brute, _ = brute_force_pehe(model, dgp, x, combos, combos[0])
        assert report.pehe_composite == pytest.approx(brute, rel=1e-12)


def test_metric_invariant_to_constant_prediction_shift():
    spec = TreatmentSpec.from_counts(2)
    dgp = sample_dgp(3, spec, 1, seed=7)
    x = np.random.default_rng(8).normal(size=(9, 3))
    combos = enumerate_eval_treatments(spec)

    class Shifted:
        def __init__(self, base, shift):
            self.base, self.shift = base, shift

        def predict_batch(self, xx, t):
            return self.base.predict_batch(xx, t) + self.shift

    base = ConstantModel(1.0, 1)
    a = pehe_composite(base, dgp, x, combos).pehe_composite
    b = pehe_composite(Shifted(base, 7.5), dgp, x, combos).pehe_composite
    assert b == pytest.approx(a, rel=1e-12)


def test_metric_invariant_to_orderings():
    spec = TreatmentSpec.from_counts(2)
    dgp = sample_dgp(3, spec, 2, seed=9)
    rng = np.random.default_rng(10)
    x = rng.normal(size=(8, 3))
    combos = enumerate_eval_treatments(spec)
    model = ConstantModel(0.5, 2)
    ref = pehe_composite(model, dgp, x, combos, t_ref=combos[0]).pehe_composite
    shuffled_rows = pehe_composite(
        model, dgp, x[rng.permutation(8)], combos, t_ref=combos[0]
    ).pehe_composite
    shuffled_treatments = pehe_composite(
        model, dgp, x, [combos[i] for i in (2, 0, 3, 1)], t_ref=combos[0]
    ).pehe_composite
    assert shuffled_rows == pytest.approx(ref, rel=1e-12)
    assert shuffled_treatments == pytest.approx(ref, rel=1e-12)


def test_two_arm_case_reduces_to_classic_pehe():
    spec = TreatmentSpec.from_counts(1)
    dgp = sample_dgp(4, spec, 1, seed=11)
    x = np.random.default_rng(12).normal(size=(15, 4))
    combos = enumerate_eval_treatments(spec)
    model = ConstantModel(0.0, 1)
    report = pehe_composite(model, dgp, x, combos)
    # classic single-pair formula, coded independently
    t0, t1 = combos
    true_eff = np.array(
        [mean_outcome(dgp, xi, t1, 0) - mean_outcome(dgp, xi, t0, 0) for xi in x]
    )
    est_eff = np.zeros(15)
    classic = float(np.mean((est_eff - true_eff) ** 2))
    assert report.pehe_composite == pytest.approx(classic, rel=1e-12)
    # with exactly two treatments, the all-pairs variant coincides
    both = pehe_composite(model, dgp, x, combos, all_pairs=True)
    assert both.pehe_composite == pytest.approx(report.pehe_composite, rel=1e-12)


def test_all_pairs_variant_matches_its_own_brute_force():
    spec = TreatmentSpec.from_counts(2)
    dgp = sample_dgp(3, spec, 2, seed=13)
    x = np.random.default_rng(14).normal(size=(6, 3))
    combos = enumerate_eval_treatments(spec)
    model = ConstantModel(1.0, 2)
    report = pehe_composite(model, dgp, x, combos, all_pairs=True)
    total = 0.0
    for xi in x:
        for m in range(2):
            for ta in combos:
                for tb in combos:
                    if np.array_equal(ta, tb):
                        continue
                    true = mean_outcome(dgp, xi, ta, m) - mean_outcome(dgp, xi, tb, m)
                    total += (0.0 - true) ** 2
    expected = total / (6 * 2 * len(combos) * (len(combos) - 1))
    assert report.pehe_composite == pytest.approx(expected, rel=1e-12)


def test_metric_rejects_bad_arguments():
    spec = TreatmentSpec.from_counts(2)
    dgp = sample_dgp(3, spec, 1, seed=15)
    x = np.zeros((4, 3))
    combos = enumerate_eval_treatments(spec)
    model = ConstantModel(0.0, 1)
    with pytest.raises(ValueError):
        pehe_composite(model, dgp, x, combos[:1])
    with pytest.raises(ValueError):
        pehe_composite(model, dgp, x, combos, t_ref=np.array([0.5, 0.5]))
    with pytest.raises(ValueError):
        pehe_composite(model, dgp, np.zeros((0, 3)), combos)


def test_factual_rmse_oracle_and_zero_model():
    spec = TreatmentSpec.from_counts(2)
    dgp = sample_dgp(3, spec, 2, sigma_y=0.0, seed=16)
    ds = generate_dataset(dgp, 30, seed=17)
    assert factual_rmse(OracleModel(dgp), ds) == 0.0
    zero = ConstantModel(0.0, 2)
    direct = np.sqrt(np.mean(ds.y**2))
    assert factual_rmse(zero, ds) == pytest.approx(direct, rel=1e-12)


def test_factual_rmse_general_direct_recomputation():
    spec = TreatmentSpec.from_counts(1, 1)
    dgp = sample_dgp(3, spec, 2, sigma_y=0.2, seed=18)
    ds = generate_dataset(dgp, 25, seed=19)
    cfg = TrainConfig(embedding_size=6, hypernet_hidden=(7,), target_hidden=(4,), seed=20)
    model = init_hlearner(3, 2, 2, cfg)
    total = 0.0
    for i in range(ds.n):
        pred = predict_all(model, ds.x[i], ds.t[i])
        total += float(np.sum((pred - ds.y[i]) ** 2))
    expected = np.sqrt(total / (ds.n * ds.m))
    assert factual_rmse(model, ds) == pytest.approx(expected, rel=1e-10)


def test_report_composite_is_mean_of_per_outcome():
    spec = TreatmentSpec.from_counts(2)
    dgp = sample_dgp(3, spec, 3, seed=21)
    x = np.random.default_rng(22).normal(size=(7, 3))
    report = pehe_composite(ConstantModel(2.0, 3), dgp, x, enumerate_eval_treatments(spec))
    assert report.pehe_composite == pytest.approx(np.mean(report.pehe_per_outcome), rel=1e-15)
    assert isinstance(report, EvalReport)
    assert report.factual_rmse is None
