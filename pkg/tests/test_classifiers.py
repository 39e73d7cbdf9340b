import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from engage_facets.classifiers import (
    KINDS,
    ClassifierSpec,
    TrainingError,
    argmax_facet,
    cross_entropy,
    dumps_model,
    gradient_check,
    loads_model,
    logistic_loss_and_grad,
    predict,
    predict_proba,
    train,
)
from engage_facets.dataset import Facet

FAST = {
    "naive_bayes": {},
    "logistic": {"epochs": 200},
    "linear_svm": {"epochs": 10, "batch_size": 8},
    "ann": {"epochs": 300, "hidden_units": 6},
}


def fast_spec(kind, **extra):
    return ClassifierSpec(kind, {**FAST[kind], **extra})


def separable(n_per_class=60, noise=6, seed=0):
    """Class c switches on column c; the remaining columns are coin flips."""
    rng = np.random.default_rng(seed)
    y = np.repeat(np.arange(3), n_per_class)
    X = np.zeros((len(y), 3 + noise))
    X[np.arange(len(y)), y] = 1.0
    X[:, 3:] = rng.integers(0, 2, size=(len(y), noise))
    return X, y


def noisy(n=90, d=8, seed=0):
    rng = np.random.default_rng(seed)
    y = np.arange(n) % 3
    X = rng.integers(0, 2, size=(n, d)).astype(float)
    X[:, 0] = np.where(rng.random(n) < 0.8, y == 0, X[:, 0])
    return X, y


class TestSpec:
    def test_defaults_merged(self):
        spec = ClassifierSpec("ann", {"epochs": 10})
        assert spec["epochs"] == 10 and spec["hidden_units"] == 16

    def test_unknown_kind(self):
        with pytest.raises(ValueError, match="unknown classifier"):
            ClassifierSpec("forest")

    def test_unknown_hyperparameter(self):
        with pytest.raises(ValueError, match="depth"):
            ClassifierSpec("logistic", {"depth": 3})

    def test_parse(self):
        spec = ClassifierSpec.parse("linear_svm:epochs=5,learning_rate=0.5")
        assert spec.kind == "linear_svm"
        assert spec["epochs"] == 5 and spec["learning_rate"] == 0.5


class TestNaiveBayes:
    def test_memorises_one_row_per_class(self):
        X = np.eye(3)
        model = train(ClassifierSpec("naive_bayes"), X, [0, 1, 2])
        assert [predict(model, row) for row in X] == list((Facet.BEHAVIORAL, Facet.EMOTIONAL, Facet.MENTAL))

    def test_identical_class_conditionals_give_uniform(self):
        X = np.tile([[1, 0, 1, 0], [0, 1, 1, 0]], (3, 1)).astype(float)
        y = np.repeat(np.arange(3), 2)
        model = train(ClassifierSpec("naive_bayes"), X, y)
        assert np.allclose(predict_proba(model, [1, 1, 0, 0]), 1 / 3, atol=1e-12)

    def test_duplication_invariant_without_smoothing(self):
        X, y = noisy(seed=3)
        X[:3], y[:3] = [[0] * 8, [1] * 8, [0] * 8], [0, 0, 1]  # keep every feature non-degenerate
        X[3:6], y[3:6] = [[1] * 8, [0] * 8, [1] * 8], [1, 2, 2]
        X[6] = 1 - X[6]
        spec = ClassifierSpec("naive_bayes", {"smoothing": 0})
        once = train(spec, X, y)
        twice = train(spec, np.vstack([X, X]), np.concatenate([y, y]))
        assert np.allclose(predict_proba(once, X), predict_proba(twice, X), atol=1e-12)

    def test_duplication_changes_smoothed_model_only_slightly(self):
        X, y = noisy(n=300, seed=4)
        spec = ClassifierSpec("naive_bayes")
        once = train(spec, X, y)
        twice = train(spec, np.vstack([X, X]), np.concatenate([y, y]))
        assert np.abs(predict_proba(once, X) - predict_proba(twice, X)).max() < 0.02
        assert np.array_equal(predict(once, X), predict(twice, X))

    def test_degenerate_without_smoothing(self):
        with pytest.raises(TrainingError, match="smoothing"):
            train(ClassifierSpec("naive_bayes", {"smoothing": 0}), np.eye(3), [0, 1, 2])


class TestLearning:
    def test_logistic_separable(self):
        X, y = separable()
        model = train(ClassifierSpec("logistic"), X, y)
        assert np.mean(predict(model, X) == y) >= 0.99

    def test_svm_separable(self):
        X, y = separable()
        model = train(ClassifierSpec("linear_svm", {"batch_size": 16}), X, y)
        assert np.mean(predict(model, X) == y) >= 0.99

    @pytest.mark.parametrize("seed", range(3))
    def test_ann_xor(self, seed):
        X = np.array([[0, 0], [1, 1], [0, 1], [1, 0]], dtype=float)
        y = np.array([0, 0, 1, 2])
        spec = ClassifierSpec("ann", {"hidden_units": 4, "epochs": 5000, "seed": seed})
        model = train(spec, X, y)
        assert np.array_equal(predict(model, X), y)

    @pytest.mark.parametrize("kind", ["logistic", "ann"])
    def test_loss_monotone_non_increasing(self, kind):
        X, y = noisy()
        history = np.array(train(fast_spec(kind), X, y).loss_history)
        assert np.all(np.diff(history) <= 1e-12)

    @pytest.mark.parametrize("kind", KINDS)
    def test_final_cross_entropy_not_above_initial(self, kind):
        X, y = noisy()
        model = train(fast_spec(kind), X, y)
        # zero-information baseline is ln 3 for every untrained model here
        assert cross_entropy(model, X, y) <= np.log(3) + 1e-9


class TestPrediction:
    @pytest.mark.parametrize("kind", KINDS)
    def test_predict_is_argmax(self, kind):
        X, y = noisy()
        model = train(fast_spec(kind), X, y)
        assert np.array_equal(predict(model, X), np.argmax(predict_proba(model, X), axis=1))

    def test_tie_goes_to_first_class(self):
        assert argmax_facet([1 / 3, 1 / 3, 1 / 3]) is Facet.BEHAVIORAL

    def test_argmax_example(self):
        assert argmax_facet([0.2, 0.5, 0.3]) is Facet.EMOTIONAL

    def test_wrong_length(self):
        model = train(ClassifierSpec("naive_bayes"), np.eye(3), [0, 1, 2])
        with pytest.raises(ValueError, match="3 features"):
            predict(model, [0, 1])

    def test_wrong_schema(self):
        model = train(ClassifierSpec("naive_bayes"), np.eye(3), [0, 1, 2])
        with pytest.raises(ValueError, match="schema"):
            predict(model, [0, 1, 0], schema_version="v2")


@pytest.fixture(scope="module")
def trained_models():
    X, y = noisy(seed=9)
    return {kind: train(fast_spec(kind), X, y) for kind in KINDS}


@settings(max_examples=50, deadline=None)
@given(rows=arrays(np.uint8, st.tuples(st.integers(1, 5), st.just(8)), elements=st.integers(0, 1)))
def test_probabilities_sum_to_one(trained_models, rows):
    for model in trained_models.values():
        P = predict_proba(model, rows)
        assert np.all(P >= 0)
        assert np.allclose(P.sum(axis=1), 1.0, atol=1e-12)


class TestDeterminism:
    @pytest.mark.parametrize("kind", KINDS)
    def test_same_seed_bit_identical(self, kind):
        X, y = noisy()
        a, b = train(fast_spec(kind), X, y), train(fast_spec(kind), X, y)
        assert a.same_parameters(b)
        assert a.loss_history == b.loss_history

    @pytest.mark.parametrize("kind", ["naive_bayes", "logistic", "linear_svm"])
    def test_feature_permutation_equivariance(self, kind):
        X, y = noisy(seed=5)
        perm = np.random.default_rng(1).permutation(X.shape[1])
        a = train(fast_spec(kind), X, y)
        b = train(fast_spec(kind), X[:, perm], y)
        assert np.allclose(predict_proba(a, X), predict_proba(b, X[:, perm]), atol=1e-9)


class TestGradients:
    @pytest.mark.parametrize("kind", ["logistic", "ann"])
    @pytest.mark.parametrize("seed", range(3))
    def test_gradient_check(self, kind, seed):
        rng = np.random.default_rng(seed)
        X = rng.integers(0, 2, size=(12, 5)).astype(float)
        y = rng.integers(0, 3, size=12)
        spec = ClassifierSpec(kind, {"seed": seed, "hidden_units": 4} if kind == "ann" else {"seed": seed})
        assert gradient_check(spec, X, y) < 1e-4

    def test_zero_weights_zero_bias_gradient_on_balanced_data(self):
        X = np.eye(3)
        Y = np.eye(3)
        params = {"W": np.zeros((3, 3)), "b": np.zeros(3)}
        _, grad = logistic_loss_and_grad(params, X, Y, 1e-4)
        assert np.allclose(grad["b"], 0.0)

    def test_wrong_gradient_detected(self, monkeypatch):
        import engage_facets.classifiers as clf

        def broken(params, X, Y, l2):
            loss, grad = logistic_loss_and_grad(params, X, Y, l2)
            return loss, {k: 2.0 * v for k, v in grad.items()}

        monkeypatch.setitem(clf._LOSSES, "logistic", broken)
        rng = np.random.default_rng(0)
        X = rng.integers(0, 2, size=(10, 4)).astype(float)
        assert gradient_check(ClassifierSpec("logistic"), X, rng.integers(0, 3, 10)) > 0.1

    def test_too_many_rows(self):
        X, y = noisy(n=30)
        with pytest.raises(ValueError):
            gradient_check(ClassifierSpec("logistic"), X, y)


class TestFailures:
    def test_missing_class(self):
        with pytest.raises(TrainingError, match="mental"):
            train(ClassifierSpec("logistic"), np.eye(3)[:2], [0, 1])

    def test_non_binary_features(self):
        with pytest.raises(ValueError, match="0 or 1"):
            train(ClassifierSpec("logistic"), np.eye(3) * 2, [0, 1, 2])

    def test_divergence_reports_epoch(self):
        X, y = noisy()
        spec = ClassifierSpec("logistic", {"learning_rate": 1e200, "epochs": 50})
        with pytest.raises(TrainingError, match=r"epoch \d+"):
            train(spec, X, y)


@pytest.mark.parametrize("kind", KINDS)
def test_serialization_round_trip(trained_models, kind):
    model = trained_models[kind]
    back = loads_model(dumps_model(model))
    assert back.same_parameters(model)
    assert (back.schema_version, back.n_features, back.classes) == (model.schema_version, model.n_features, model.classes)
    X, _ = noisy(seed=2)
    assert np.array_equal(predict_proba(back, X), predict_proba(model, X))


def test_loads_rejects_foreign_text():
    with pytest.raises(ValueError):
        loads_model("hello\n")
