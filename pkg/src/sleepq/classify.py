"""Classification: fold-safe standardization, four deterministic classifiers,
leave-one-subject-out cross-validation, and agreement metrics.

All solvers are full-batch with fixed initialization and schedules, so a
given (dataset, parameters) pair always produces bit-identical models.
Ties anywhere (kNN votes, LDA scores, an SVM decision value of 0, a logistic
probability of exactly 0.5) resolve to the first class in sorted label
order, which is GS for GS/PS labels.
"""

from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.special import expit
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin, clone

from .errors import DomainError
from .validation import as_float_matrix, as_float_series

VARIANCE_FLOOR = 1e-12


def _as_label(value):
    return str(value.value) if isinstance(value, Enum) else value


def _check_xy(X, y):
    X = as_float_matrix(X, name="X")
    y = np.asarray([_as_label(v) for v in y])
    if len(y) != X.shape[0]:
        raise DomainError(f"{X.shape[0]} rows but {len(y)} labels")
    return X, y


def _two_classes(y):
    classes = np.unique(y)
    if len(classes) != 2:
        raise DomainError(f"need exactly 2 classes, got {list(classes)}")
    return classes


class Standardizer(TransformerMixin, BaseEstimator):
    """Column z-scoring with the fit-time mean/std; std floored at 1e-12.

    A constant column therefore maps every value to 0 instead of dividing
    by zero.
    """

    def fit(self, X, y=None):
        X = as_float_matrix(X, name="X")
        if X.shape[0] < 2:
            raise DomainError("standardization needs > 1 row to fit")
        self.mean_ = X.mean(axis=0)
        self.scale_ = np.maximum(X.std(axis=0), VARIANCE_FLOOR)
        return self

    def transform(self, X):
        X = as_float_matrix(X, name="X")
        return (X - self.mean_) / self.scale_


def standardize(train, test):
    """Z-score both folds with the training fold's statistics (no leakage)."""
    scaler = Standardizer().fit(train)
    return scaler.transform(train), scaler.transform(test)


class LinearSVM(ClassifierMixin, BaseEstimator):
    """Linear soft-margin SVM: mean hinge loss + lam * ||w||^2.

    Solved by full-batch subgradient descent from w = 0 with a diminishing
    step schedule; stops when the objective change falls below tol.
    """

    def __init__(self, lam=0.1, lr0=0.5, lr_decay=0.1, tol=1e-8,
                 max_epochs=100_000):
        self.lam = lam
        self.lr0 = lr0
        self.lr_decay = lr_decay
        self.tol = tol
        self.max_epochs = max_epochs

    def fit(self, X, y):
        X, y = _check_xy(X, y)
        self.classes_ = _two_classes(y)
        sign = np.where(y == self.classes_[1], 1.0, -1.0)
        n, d = X.shape
        w = np.zeros(d)
        b = 0.0
        prev_obj = np.inf
        for t in range(self.max_epochs):
            margins = sign * (X @ w + b)
            slack = np.maximum(0.0, 1.0 - margins)
            obj = slack.mean() + self.lam * (w @ w)
            if abs(prev_obj - obj) < self.tol:
                break
            prev_obj = obj
            viol = margins < 1.0
            g_w = -(sign[viol] @ X[viol]) / n + 2.0 * self.lam * w
            g_b = -sign[viol].sum() / n
            lr = self.lr0 / (1.0 + self.lr_decay * t)
            w = w - lr * g_w
            b = b - lr * g_b
        self.coef_ = w
        self.intercept_ = b
        self.n_epochs_ = t + 1
        self.objective_ = prev_obj
        return self

    def decision_function(self, X):
        X = as_float_matrix(X, name="X")
        return X @ self.coef_ + self.intercept_

    def predict(self, X):
        return np.where(self.decision_function(X) > 0,
                        self.classes_[1], self.classes_[0])


class DiagonalLDA(ClassifierMixin, BaseEstimator):
    """Gaussian discriminant with pooled per-feature variances only.

    The covariance is forced diagonal; priors are empirical class rates.
    """

    def fit(self, X, y):
        X, y = _check_xy(X, y)
        self.classes_ = _two_classes(y)
        n, d = X.shape
        self.means_ = np.empty((2, d))
        pooled = np.zeros(d)
        self.priors_ = np.empty(2)
        for c, label in enumerate(self.classes_):
            rows = X[y == label]
            if len(rows) < 2:
                raise DomainError(f"class {str(label)!r} needs >= 2 samples, has {len(rows)}")
            self.means_[c] = rows.mean(axis=0)
            pooled += ((rows - self.means_[c]) ** 2).sum(axis=0)
            self.priors_[c] = len(rows) / n
        self.variances_ = np.maximum(pooled / (n - 2), VARIANCE_FLOOR)
        return self

    def _scores(self, X):
        X = as_float_matrix(X, name="X")
        scores = np.empty((X.shape[0], 2))
        for c in range(2):
            maha = ((X - self.means_[c]) ** 2 / self.variances_).sum(axis=1)
            scores[:, c] = np.log(self.priors_[c]) - 0.5 * maha
        return scores

    def predict(self, X):
        return self.classes_[np.argmax(self._scores(X), axis=1)]


class InverseDistanceKNN(ClassifierMixin, BaseEstimator):
    """k nearest neighbors with 1/distance vote weights.

    A query that coincides with a training point takes that point's label
    outright (the lowest-index such point when several coincide).
    """

    def __init__(self, k=5):
        self.k = k

    def fit(self, X, y):
        X, y = _check_xy(X, y)
        if not 1 <= self.k <= X.shape[0]:
            raise DomainError(f"k={self.k} must lie in [1, {X.shape[0]}]")
        self.classes_ = np.unique(y)
        self.X_ = X
        self.y_ = y
        return self

    def predict(self, X):
        X = as_float_matrix(X, name="X")
        out = np.empty(X.shape[0], dtype=self.y_.dtype)
        for i, q in enumerate(X):
            dist = np.sqrt(((self.X_ - q) ** 2).sum(axis=1))
            order = np.argsort(dist, kind="stable")[: self.k]
            if dist[order[0]] == 0.0:
                out[i] = self.y_[order[0]]
                continue
            votes = np.zeros(len(self.classes_))
            for j in order:
                votes[np.searchsorted(self.classes_, self.y_[j])] += 1.0 / dist[j]
            out[i] = self.classes_[np.argmax(votes)]
        return out


def logreg_objective(w, b, X, y01, lam):
    """Mean negative log-likelihood + lam * ||w||^2 (bias unpenalized)."""
    f = X @ w + b
    nll = np.where(y01 == 1, np.logaddexp(0.0, -f), np.logaddexp(0.0, f))
    return float(nll.mean() + lam * (w @ w))


def logreg_gradient(w, b, X, y01, lam):
    """Analytic gradient of logreg_objective; returns (g_w, g_b)."""
    resid = expit(X @ w + b) - y01
    g_w = X.T @ resid / len(y01) + 2.0 * lam * w
    g_b = float(resid.mean())
    return g_w, g_b


class LogisticRegressionGD(ClassifierMixin, BaseEstimator):
    """L2-regularized logistic regression by deterministic gradient descent.

    The step size is 1 over a Lipschitz bound of the gradient, so descent
    is monotone; iteration stops when the gradient norm drops below tol.
    """

    def __init__(self, lam=0.1, tol=1e-6, max_iter=200_000):
        self.lam = lam
        self.tol = tol
        self.max_iter = max_iter

    def fit(self, X, y):
        X, y = _check_xy(X, y)
        self.classes_ = _two_classes(y)
        y01 = (y == self.classes_[1]).astype(np.float64)
        n, d = X.shape
        w = np.zeros(d)
        b = 0.0
        # Hessian spectral norm is at most (||X_aug||_F^2 / 4 + 2*lam*n) / n.
        lipschitz = ((X**2).sum() + n) / (4.0 * n) + 2.0 * self.lam
        lr = 1.0 / lipschitz
        for t in range(self.max_iter):
            g_w, g_b = logreg_gradient(w, b, X, y01, self.lam)
            if np.sqrt(g_w @ g_w + g_b * g_b) < self.tol:
                break
            w = w - lr * g_w
            b = b - lr * g_b
        self.coef_ = w
        self.intercept_ = b
        self.n_iter_ = t + 1
        return self

    def predict_proba(self, X):
        X = as_float_matrix(X, name="X")
        p1 = expit(X @ self.coef_ + self.intercept_)
        return np.column_stack([1.0 - p1, p1])

    def predict(self, X):
        return np.where(self.predict_proba(X)[:, 1] > 0.5,
                        self.classes_[1], self.classes_[0])


@dataclass
class SubjectFeatures:
    """One subject's feature vector with its group label and session tag."""

    subject_id: str
    features: np.ndarray
    label: str
    session: str = None

    def __post_init__(self):
        self.features = as_float_series(self.features, name="features")
        self.label = _as_label(self.label)


def confusion_counts(y_true, y_pred, positive=None):
    """(TP, TN, FP, FN) with PS as the positive class when present."""
    y_true = np.asarray([_as_label(v) for v in y_true])
    y_pred = np.asarray([_as_label(v) for v in y_pred])
    if len(y_true) != len(y_pred) or len(y_true) == 0:
        raise DomainError("truth and prediction must be equal-length, non-empty")
    if positive is None:
        labels = set(y_true) | set(y_pred)
        positive = "PS" if "PS" in labels else max(labels)
    t = y_true == positive
    p = y_pred == positive
    tp = int(np.sum(t & p))
    tn = int(np.sum(~t & ~p))
    fp = int(np.sum(~t & p))
    fn = int(np.sum(t & ~p))
    return tp, tn, fp, fn


def metrics(tp, tn, fp, fn):
    """(accuracy, F1, Cohen's kappa) from confusion counts.

    F1 and kappa fall back to 0 when their denominators vanish.
    """
    for name, v in (("tp", tp), ("tn", tn), ("fp", fp), ("fn", fn)):
        if v < 0 or v != int(v):
            raise DomainError(f"{name} must be a nonnegative integer, got {v}")
    total = tp + tn + fp + fn
    if total == 0:
        raise DomainError("confusion counts sum to zero")
    acc = (tp + tn) / total
    f1_denom = 2 * tp + fp + fn
    f1 = 2 * tp / f1_denom if f1_denom else 0.0
    p_o = acc
    p_e = ((tp + fp) * (tp + fn) + (fn + tn) * (fp + tn)) / total**2
    kappa = (p_o - p_e) / (1.0 - p_e) if p_e != 1.0 else 0.0
    return acc, f1, kappa


@dataclass
class ClassificationReport:
    """LOSO outcome: per-subject predictions plus aggregate metrics."""

    subject_ids: tuple
    y_true: tuple
    y_pred: tuple
    fold_flags: tuple
    tp: int
    tn: int
    fp: int
    fn: int
    accuracy: float
    f1: float
    kappa: float

    def __post_init__(self):
        n = len(self.subject_ids)
        if not (len(self.y_true) == len(self.y_pred) == len(self.fold_flags) == n):
            raise DomainError("report fields must align one-per-subject")
        if self.tp + self.tn + self.fp + self.fn != n:
            raise DomainError("confusion counts must sum to the subject count")
        if not (0 <= self.accuracy <= 1 and 0 <= self.f1 <= 1):
            raise DomainError("accuracy and F1 must lie in [0, 1]")
        if not -1 <= self.kappa <= 1:
            raise DomainError("kappa must lie in [-1, 1]")


def loso_cv(dataset, estimator):
    """Leave-one-subject-out cross-validation of an unfitted estimator.

    Every fold re-fits standardization on its own training subjects and
    clones the estimator, so nothing learned ever touches the held-out
    subject.  A training fold left with a single class predicts that fold's
    majority label and is flagged in the report.
    """
    dataset = list(dataset)
    if len(dataset) < 3:
        raise DomainError(f"LOSO needs >= 3 subjects, got {len(dataset)}")
    dims = {len(s.features) for s in dataset}
    if len(dims) != 1:
        raise DomainError(f"feature dimensions differ across subjects: {dims}")
    ids = [s.subject_id for s in dataset]
    if len(set(ids)) != len(ids):
        raise DomainError("subject_ids must be unique")
    all_labels = np.asarray([s.label for s in dataset])
    if len(np.unique(all_labels)) != 2:
        raise DomainError("dataset must contain exactly 2 classes overall")

    preds = []
    flags = []
    for i, held_out in enumerate(dataset):
        train = dataset[:i] + dataset[i + 1:]
        assert all(s.subject_id != held_out.subject_id for s in train), \
            "held-out subject leaked into the training fold"
        X_train = np.vstack([s.features for s in train])
        y_train = np.asarray([s.label for s in train])
        X_test = held_out.features.reshape(1, -1)

        if len(np.unique(y_train)) < 2:
            unique, counts = np.unique(y_train, return_counts=True)
            preds.append(unique[np.argmax(counts)])
            flags.append("single-class-train")
            continue
        X_train_s, X_test_s = standardize(X_train, X_test)
        model = clone(estimator).fit(X_train_s, y_train)
        preds.append(model.predict(X_test_s)[0])
        flags.append(None)

    y_pred = np.asarray(preds)
    tp, tn, fp, fn = confusion_counts(all_labels, y_pred)
    acc, f1, kappa = metrics(tp, tn, fp, fn)
    return ClassificationReport(
        subject_ids=tuple(ids),
        y_true=tuple(all_labels.tolist()),
        y_pred=tuple(y_pred.tolist()),
        fold_flags=tuple(flags),
        tp=tp, tn=tn, fp=fp, fn=fn,
        accuracy=acc, f1=f1, kappa=kappa,
    )
