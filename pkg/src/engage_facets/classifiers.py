"""From-scratch multiclass classifiers over binary feature vectors.

All models share one contract: ``train(spec, X, y)`` returns an immutable
:class:`TrainedModel`; ``predict_proba`` / ``predict`` act on single vectors
or row matrices.  Labels are integer indices into ``CLASS_ORDER``.
"""

from __future__ import annotations

import math
from collections.abc import Mapping
from dataclasses import dataclass, field
from types import MappingProxyType

import numpy as np

from .dataset import CLASS_NAMES, CLASS_ORDER, Facet

KINDS = ("naive_bayes", "logistic", "linear_svm", "ann")

DEFAULT_HYPERPARAMETERS = {
    "naive_bayes": {"smoothing": 1.0, "seed": 0},
    "logistic": {"learning_rate": 0.1, "epochs": 500, "l2": 1e-4, "seed": 0},
    "linear_svm": {"learning_rate": 0.1, "epochs": 30, "margin_c": 1.0, "batch_size": 64, "seed": 0},
    "ann": {"hidden_units": 16, "learning_rate": 1.0, "epochs": 1500, "l2": 1e-4, "seed": 0},
}

N_CLASSES = len(CLASS_ORDER)


class TrainingError(RuntimeError):
    pass


@dataclass(frozen=True)
class ClassifierSpec:
    kind: str
    hyperparameters: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown classifier kind {self.kind!r}; expected one of {KINDS}")
        defaults = DEFAULT_HYPERPARAMETERS[self.kind]
        unknown = set(self.hyperparameters) - set(defaults)
        if unknown:
            raise ValueError(f"unknown hyperparameter(s) for {self.kind}: {sorted(unknown)}")
        merged = {**defaults, **self.hyperparameters}
        object.__setattr__(self, "hyperparameters", MappingProxyType(merged))

    def __getitem__(self, name: str):
        return self.hyperparameters[name]

    @classmethod
    def parse(cls, text: str) -> ClassifierSpec:
        """``kind`` or ``kind:name=value,name=value``."""
        kind, _, rest = text.partition(":")
        hyper = {}
        for item in filter(None, rest.split(",")):
            name, eq, value = item.partition("=")
            if not eq:
                raise ValueError(f"bad hyperparameter {item!r} in {text!r}")
            number = float(value)
            hyper[name.strip()] = int(number) if number.is_integer() and "." not in value else number
        return cls(kind.strip(), hyper)


@dataclass(frozen=True)
class TrainedModel:
    kind: str
    params: Mapping[str, np.ndarray]
    schema_version: str
    n_features: int
    classes: tuple[str, ...] = CLASS_NAMES
    loss_history: tuple[float, ...] = field(default=(), compare=False, repr=False)

    def __post_init__(self):
        frozen = {}
        for name, arr in self.params.items():
            arr = np.array(arr, dtype=np.float64)
            arr.setflags(write=False)
            frozen[name] = arr
        object.__setattr__(self, "params", MappingProxyType(dict(sorted(frozen.items()))))

    def same_parameters(self, other: TrainedModel) -> bool:
        return (
            self.kind == other.kind
            and self.params.keys() == other.params.keys()
            and all(np.array_equal(self.params[k], other.params[k]) for k in self.params)
        )


def _softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _one_hot_labels(y: np.ndarray) -> np.ndarray:
    Y = np.zeros((len(y), N_CLASSES))
    Y[np.arange(len(y)), y] = 1.0
    return Y


def _sigmoid(z: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def compress_rows(X: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Unique feature rows and per-class label counts for each of them.

    Full-batch losses below take ``Y`` as a count matrix, so training on the
    compressed pair optimises exactly the same objective as on the raw rows.
    """
    unique, inverse = np.unique(X, axis=0, return_inverse=True)
    counts = np.zeros((len(unique), N_CLASSES))
    np.add.at(counts, (inverse.ravel(), y), 1.0)
    return unique, counts


# ---------------------------------------------------------------------------
# losses and analytic gradients
#
# ``Y`` holds per-row class weights (one-hot labels or compressed counts);
# losses are means over the total weight.
# ---------------------------------------------------------------------------


def logistic_loss_and_grad(params, X, Y, l2):
    W, b = params["W"], params["b"]
    P = _softmax(X @ W + b)
    n = Y.sum()
    loss = -np.sum(Y * np.log(np.clip(P, 1e-300, None))) / n + 0.5 * l2 * np.sum(W * W)
    D = (P * Y.sum(axis=1, keepdims=True) - Y) / n
    return loss, {"W": X.T @ D + l2 * W, "b": D.sum(axis=0)}


def ann_loss_and_grad(params, X, Y, l2):
    W1, b1, W2, b2 = params["W1"], params["b1"], params["W2"], params["b2"]
    H = _sigmoid(X @ W1 + b1)
    P = _softmax(H @ W2 + b2)
    n = Y.sum()
    loss = -np.sum(Y * np.log(np.clip(P, 1e-300, None))) / n + 0.5 * l2 * (np.sum(W1 * W1) + np.sum(W2 * W2))
    D2 = (P * Y.sum(axis=1, keepdims=True) - Y) / n
    D1 = (D2 @ W2.T) * H * (1.0 - H)
    return loss, {
        "W1": X.T @ D1 + l2 * W1,
        "b1": D1.sum(axis=0),
        "W2": H.T @ D2 + l2 * W2,
        "b2": D2.sum(axis=0),
    }


_LOSSES = {"logistic": logistic_loss_and_grad, "ann": ann_loss_and_grad}


def init_params(spec: ClassifierSpec, n_features: int) -> dict[str, np.ndarray]:
    if spec.kind == "ann":
        rng = np.random.default_rng(spec["seed"])
        h = int(spec["hidden_units"])
        return {
            "W1": rng.uniform(-0.5, 0.5, size=(n_features, h)),
            "b1": np.zeros(h),
            "W2": rng.uniform(-0.5, 0.5, size=(h, N_CLASSES)),
            "b2": np.zeros(N_CLASSES),
        }
    if spec.kind in ("logistic", "linear_svm"):
        return {"W": np.zeros((n_features, N_CLASSES)), "b": np.zeros(N_CLASSES)}
    raise ValueError(f"{spec.kind} has no gradient-trained parameters")


def _gradient_descent(spec: ClassifierSpec, X, Y, params):
    loss_fn = _LOSSES[spec.kind]
    lr, l2 = float(spec["learning_rate"]), float(spec["l2"])
    history = []
    for epoch in range(int(spec["epochs"])):
        # divergence surfaces as a non-finite loss below, not as a warning
        with np.errstate(over="ignore", invalid="ignore"):
            loss, grad = loss_fn(params, X, Y, l2)
        if not math.isfinite(loss):
            raise TrainingError(f"{spec.kind}: non-finite loss at epoch {epoch}")
        history.append(float(loss))
        for name in params:
            params[name] = params[name] - lr * grad[name]
    with np.errstate(over="ignore", invalid="ignore"):
        loss, _ = loss_fn(params, X, Y, l2)
    if not math.isfinite(loss):
        raise TrainingError(f"{spec.kind}: non-finite loss at epoch {int(spec['epochs'])}")
    history.append(float(loss))
    return params, history


def _train_naive_bayes(spec, X, y):
    alpha = float(spec["smoothing"])
    if alpha < 0:
        raise ValueError("smoothing must be non-negative")
    counts = np.bincount(y, minlength=N_CLASSES).astype(np.float64)
    on = np.stack([X[y == c].sum(axis=0) for c in range(N_CLASSES)]).astype(np.float64)
    p_on = (on + alpha) / (counts[:, None] + 2.0 * alpha)
    if np.any(p_on <= 0.0) or np.any(p_on >= 1.0):
        raise TrainingError("naive_bayes: degenerate feature probabilities; use smoothing > 0")
    return {"log_prior": np.log(counts / counts.sum()), "log_on": np.log(p_on), "log_off": np.log1p(-p_on)}, []


def svm_objective(params, X, S, c):
    """One-vs-rest primal objective summed over classes; ``S`` holds ±1 targets."""
    n = len(X)
    margins = S * (X @ params["W"] + params["b"])
    hinge = np.maximum(0.0, 1.0 - margins).sum() / n
    return 0.5 / (c * n) * np.sum(params["W"] ** 2) + hinge


def _train_linear_svm(spec, X, y):
    c = float(spec["margin_c"])
    lr0 = float(spec["learning_rate"])
    batch = int(spec["batch_size"])
    n, d = X.shape
    lam = 1.0 / (c * n)
    S = 2.0 * _one_hot_labels(y) - 1.0
    params = init_params(spec, d)
    W, b = params["W"], params["b"]
    rng = np.random.default_rng(spec["seed"])
    history = [float(svm_objective(params, X, S, c))]
    for epoch in range(int(spec["epochs"])):
        lr = lr0 / math.sqrt(1.0 + epoch)
        order = rng.permutation(n)
        for start in range(0, n, batch):
            idx = order[start : start + batch]
            Xb, Sb = X[idx], S[idx]
            active = (Sb * (Xb @ W + b) < 1.0) * Sb
            W = W - lr * (lam * W - Xb.T @ active / len(idx))
            b = b + lr * active.sum(axis=0) / len(idx)
        loss = float(svm_objective({"W": W, "b": b}, X, S, c))
        if not math.isfinite(loss):
            raise TrainingError(f"linear_svm: non-finite loss at epoch {epoch}")
        history.append(loss)
    return {"W": W, "b": b}, history


def train(spec: ClassifierSpec, X, y, schema_version: str = "v1") -> TrainedModel:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2 or len(X) != len(y):
        raise ValueError("X must be a 2-D matrix with one row per label")
    present = set(np.unique(y).tolist())
    missing = [CLASS_NAMES[c] for c in range(N_CLASSES) if c not in present]
    if missing:
        raise TrainingError(f"training rows missing class(es): {', '.join(missing)}")
    if not np.all((X == 0.0) | (X == 1.0)):
        raise ValueError("feature values must be 0 or 1")

    if spec.kind == "naive_bayes":
        params, history = _train_naive_bayes(spec, X, y)
    elif spec.kind == "linear_svm":
        params, history = _train_linear_svm(spec, X, y)
    else:
        Xu, counts = compress_rows(X, y)
        params, history = _gradient_descent(spec, Xu, counts, init_params(spec, X.shape[1]))
    return TrainedModel(spec.kind, params, schema_version, X.shape[1], CLASS_NAMES, tuple(history))


def decision_scores(model: TrainedModel, X: np.ndarray) -> np.ndarray:
    p = model.params
    if model.kind == "naive_bayes":
        return p["log_prior"] + X @ p["log_on"].T + (1.0 - X) @ p["log_off"].T
    if model.kind in ("logistic", "linear_svm"):
        return X @ p["W"] + p["b"]
    if model.kind == "ann":
        return _sigmoid(X @ p["W1"] + p["b1"]) @ p["W2"] + p["b2"]
    raise ValueError(f"unknown model kind {model.kind!r}")


def _as_rows(model: TrainedModel, x, schema_version: str | None):
    if schema_version is not None and schema_version != model.schema_version:
        raise ValueError(f"model expects schema {model.schema_version!r}, got {schema_version!r}")
    X = np.asarray(x, dtype=np.float64)
    single = X.ndim == 1
    X = np.atleast_2d(X)
    if X.shape[1] != model.n_features:
        raise ValueError(f"model expects {model.n_features} features, got {X.shape[1]}")
    return X, single


def predict_proba(model: TrainedModel, x, schema_version: str | None = None) -> np.ndarray:
    """Class probabilities; SVM margins are passed through a softmax."""
    X, single = _as_rows(model, x, schema_version)
    P = _softmax(decision_scores(model, X))
    return P[0] if single else P


def predict(model: TrainedModel, x, schema_version: str | None = None):
    """Most probable facet for a vector, or class indices for a row matrix.

    Ties go to the earliest class in ``CLASS_ORDER``.
    """
    P = predict_proba(model, x, schema_version)
    if P.ndim == 1:
        return CLASS_ORDER[int(np.argmax(P))]
    return np.argmax(P, axis=1)


def argmax_facet(proba) -> Facet:
    return CLASS_ORDER[int(np.argmax(np.asarray(proba)))]


def cross_entropy(model: TrainedModel, X, y) -> float:
    P = predict_proba(model, np.atleast_2d(X))
    y = np.asarray(y)
    return float(-np.mean(np.log(np.clip(P[np.arange(len(y)), y], 1e-300, None))))


# ---------------------------------------------------------------------------
# gradient checking
# ---------------------------------------------------------------------------


def gradient_check(spec: ClassifierSpec, X, y, step: float = 1e-5, params=None) -> float:
    """Max relative error between analytic and central-difference gradients.

    Parameters are drawn at random from ``spec.seed`` unless given, so the
    check does not sit at the symmetric zero initialisation.
    """
    if spec.kind not in _LOSSES:
        raise ValueError(f"{spec.kind} is not gradient-trained")
    X = np.asarray(X, dtype=np.float64)
    if len(X) > 20:
        raise ValueError("gradient_check is meant for datasets of at most 20 rows")
    Y = _one_hot_labels(np.asarray(y, dtype=np.int64))
    l2 = float(spec["l2"])
    loss_fn = _LOSSES[spec.kind]
    if params is None:
        rng = np.random.default_rng(spec["seed"])
        params = {k: rng.normal(0.0, 0.5, size=v.shape) for k, v in init_params(spec, X.shape[1]).items()}
    params = {k: np.array(v, dtype=np.float64) for k, v in params.items()}
    _, analytic = loss_fn(params, X, Y, l2)

    worst = 0.0
    for name, value in params.items():
        for idx in np.ndindex(value.shape):
            orig = value[idx]
            value[idx] = orig + step
            up, _ = loss_fn(params, X, Y, l2)
            value[idx] = orig - step
            down, _ = loss_fn(params, X, Y, l2)
            value[idx] = orig
            numeric = (up - down) / (2.0 * step)
            a = analytic[name][idx]
            denom = max(abs(a) + abs(numeric), 1e-7)
            worst = max(worst, abs(a - numeric) / denom)
    return worst


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

MODEL_FORMAT = "engage-facets-model 1"


def dumps_model(model: TrainedModel) -> str:
    lines = [
        MODEL_FORMAT,
        f"kind {model.kind}",
        f"schema {model.schema_version}",
        f"n_features {model.n_features}",
        "classes " + " ".join(model.classes),
    ]
    for name, arr in model.params.items():
        shape = " ".join(str(s) for s in arr.shape)
        lines.append(f"param {name} {arr.ndim} {shape}".rstrip())
        lines.append(" ".join(f"{v:.17g}" for v in arr.ravel().tolist()))
    return "\n".join(lines) + "\n"


def loads_model(text: str) -> TrainedModel:
    lines = text.splitlines()
    if not lines or lines[0] != MODEL_FORMAT:
        raise ValueError("not an engage-facets model file")

    def field_value(line: str, key: str) -> str:
        name, _, value = line.partition(" ")
        if name != key:
            raise ValueError(f"expected {key!r}, found {line!r}")
        return value

    kind = field_value(lines[1], "kind")
    schema = field_value(lines[2], "schema")
    n_features = int(field_value(lines[3], "n_features"))
    classes = tuple(field_value(lines[4], "classes").split())
    params = {}
    i = 5
    while i < len(lines):
        head = field_value(lines[i], "param").split()
        name, ndim = head[0], int(head[1])
        shape = tuple(int(s) for s in head[2 : 2 + ndim])
        values = [float(v) for v in lines[i + 1].split()] if i + 1 < len(lines) else []
        params[name] = np.array(values, dtype=np.float64).reshape(shape)
        i += 2
    return TrainedModel(kind, params, schema, n_features, classes)
