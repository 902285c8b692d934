"""nu-SVM with the quadratic kernel ``K(u, v) = (u . v)^2``, solved by SMO.

The dual solved is

    min 1/2 sum_st l_s l_t y_s y_t K_st
    s.t. 0 <= l_s <= 1/N,  sum_s l_s y_s = 0,  sum_s l_s = nu

(the inequality ``sum l >= nu`` is active at the optimum). Pairwise updates
keep both equality constraints, so each pair is drawn from a single class.
Working-set selection takes the maximal violating pair of the class with the
larger violation, ties broken by lowest index. When the Gram matrix fits
the cache budget the loop runs compiled; otherwise it works column by column
through an LRU cache. Both take the same steps.

The KKT violation is measured on ``l`` with the kernel divided by its largest
diagonal entry, which makes the stopping tolerance independent of the
feature scale. After convergence the solution is rescaled so that free
support vectors sit on ``d = +-1``; this is what gives the bias ``b`` its
absolute meaning (``|b| >> 1`` within a phase, ``|b| <~ 1`` across phases).

The rescaling divides by the margin ``r``. When the two classes cannot be
told apart, the optimal margin is zero and ``b = rho / r`` diverges. A
margin within a decade of the solver's KKT resolution (``tol`` on the ``l``
scale) triggers a warm-started refinement at a hundredfold tighter
tolerance. A zero margin keeps tracking the tolerance down, so a margin
still within a decade of the refined resolution is treated as zero: the model
is flagged ``margin_resolved_ = False`` and ``b`` is reported as an infinity
carrying the sign of ``rho``.
"""

from __future__ import annotations

import json
import logging
from collections import OrderedDict
from dataclasses import dataclass
from pathlib import Path

import numba
import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .exceptions import ConvergenceError, TrainingError

__all__ = [
    "QuadraticNuSVC",
    "TrainingSet",
    "CoefficientColumn",
    "train",
    "decide",
    "coefficient_column",
    "column_weight",
    "accuracy",
    "save_model",
    "load_model",
    "MODEL_FORMAT",
]

logger = logging.getLogger(__name__)

MODEL_FORMAT = "tksvm-model/v1"
_DECISION_ENTRIES = 2_000_000
_REFINE_STEPS = 1
_REFINE_FACTOR = 1e-2
_REFINE_RATIO = 10.0


class KernelCache:
    """Columns of the quadratic Gram matrix, fully stored when they fit the budget."""

    def __init__(self, X: np.ndarray, budget_mb: float):
        self.X = X
        n = X.shape[0]
        self.n = n
        self.diag = np.einsum("ij,ij->i", X, X) ** 2
        self.full = None
        self.max_columns = max(2, int(budget_mb * 2**20 // (8 * max(n, 1))))
        if self.max_columns >= n:
            self.full = (X @ X.T) ** 2
        self._cols: OrderedDict = OrderedDict()

    def column(self, i: int) -> np.ndarray:
        if self.full is not None:
            return self.full[:, i]
        col = self._cols.get(i)
        if col is None:
            col = (self.X @ self.X[i]) ** 2
            self._cols[i] = col
            if len(self._cols) > self.max_columns:
                self._cols.popitem(last=False)
        else:
            self._cols.move_to_end(i)
        return col


def _initial_alpha(y: np.ndarray, nu: float) -> np.ndarray:
    # LIBSVM-style start on the alpha = N * l scale: each class gets nu * N / 2
    n = y.size
    alpha = np.zeros(n)
    for cls in (1, -1):
        remaining = nu * n / 2
        for i in np.nonzero(y == cls)[0]:
            alpha[i] = min(1.0, remaining)
            remaining -= alpha[i]
    return alpha


@numba.njit(cache=True)
def _smo_full(K, scale, y, alpha, grad, tol_alpha, max_iter):
    """The SMO loop of :func:`solve_nu_dual` on a stored Gram matrix, in place."""
    n = y.size
    violation = np.inf
    for it in range(max_iter):
        best_gap = -np.inf
        bi = -1
        bj = -1
        for cls in (1.0, -1.0):
            vu = -np.inf
            vl = np.inf
            i = -1
            j = -1
            for k in range(n):
                if y[k] != cls:
                    continue
                v = -y[k] * grad[k]
                if cls > 0:
                    up = alpha[k] < 1.0
                    low = alpha[k] > 0.0
                else:
                    up = alpha[k] > 0.0
                    low = alpha[k] < 1.0
                if up and v > vu:
                    vu = v
                    i = k
                if low and v < vl:
                    vl = v
                    j = k
            if i < 0 or j < 0:
                continue
            gap = vu - vl
            if bi < 0 or gap > best_gap:
                best_gap = gap
                bi = i
                bj = j
        if bi < 0:
            return it, 0.0, True
        violation = best_gap
        if violation < tol_alpha:
            return it, violation, True
        i = bi
        j = bj
        quad = K[i, i] / scale + K[j, j] / scale - 2 * (K[j, i] / scale)
        if quad <= 0:
            quad = 1e-12
        delta = -(grad[i] - grad[j]) / quad
        delta = min(max(delta, max(-alpha[i], alpha[j] - 1.0)), min(1.0 - alpha[i], alpha[j]))
        alpha[i] += delta
        alpha[j] -= delta
        yi = y[i]
        for k in range(n):
            grad[k] += delta * y[k] * yi * (K[k, i] / scale - K[k, j] / scale)
    return max_iter, violation, False


def solve_nu_dual(cache: KernelCache, y: np.ndarray, nu: float, tol: float, max_iter: int,
                  alpha0: np.ndarray | None = None):
    """SMO on the alpha = N * l scale with the normalized kernel.

    ``alpha0`` warm-starts from a feasible point. Returns
    ``(alpha, grad, kernel_scale, n_iter, violation)``.
    """
    n = y.size
    scale = float(cache.diag.max())
    if scale <= 0:
        raise TrainingError("all training vectors are zero; kernel vanishes")
    alpha = _initial_alpha(y, nu) if alpha0 is None else alpha0.copy()
    grad = np.zeros(n)
    for j in np.nonzero(alpha)[0]:
        grad += alpha[j] * y * y[j] * cache.column(j) / scale
    pos = y > 0
    # tolerance is stated for l = alpha / N, whose gradient is grad / N
    tol_alpha = tol * n
    if cache.full is not None:
        it, violation, done = _smo_full(cache.full, scale, y, alpha, grad, tol_alpha, max_iter)
        if not done:
            raise ConvergenceError(
                f"SMO stopped after {max_iter} iterations with KKT violation {violation / n:.3e} "
                f"(tolerance {tol:g})"
            )
        return alpha, grad, scale, it, violation / n
    violation = np.inf
    for it in range(max_iter):
        val = -y * grad
        up = np.where(pos, alpha < 1.0, alpha > 0.0)
        low = np.where(pos, alpha > 0.0, alpha < 1.0)
        best = None
        for cls_mask in (pos, ~pos):
            u = up & cls_mask
            lo = low & cls_mask
            if not u.any() or not lo.any():
                continue
            vu = np.where(u, val, -np.inf)
            vl = np.where(lo, val, np.inf)
            i = int(np.argmax(vu))
            j = int(np.argmin(vl))
            gap = vu[i] - vl[j]
            if best is None or gap > best[0]:
                best = (gap, i, j)
        if best is None:
            violation = 0.0
            break
        violation, i, j = best
        if violation < tol_alpha:
            break
        qi = cache.column(i) / scale
        qj = cache.column(j) / scale
        quad = qi[i] + qj[j] - 2 * qi[j]
        if quad <= 0:
            quad = 1e-12
        delta = -(grad[i] - grad[j]) / quad
        delta = min(max(delta, max(-alpha[i], alpha[j] - 1.0)), min(1.0 - alpha[i], alpha[j]))
        alpha[i] += delta
        alpha[j] -= delta
        # same class: y_i = y_j, so Q[:, i] - Q[:, j] = y * y_i * (K_i - K_j)
        grad += delta * y * y[i] * (qi - qj)
    else:
        raise ConvergenceError(
            f"SMO stopped after {max_iter} iterations with KKT violation {violation / n:.3e} "
            f"(tolerance {tol:g})"
        )
    return alpha, grad, scale, it, violation / n


def _margin_and_offset(alpha: np.ndarray, grad: np.ndarray, y: np.ndarray):
    """LIBSVM's nu-SVC ``r`` and ``rho`` from the final gradient."""
    out = []
    for cls in (1, -1):
        m = y == cls
        a, g = alpha[m], grad[m]
        free = (a > 0) & (a < 1)
        if free.any():
            out.append(g[free].mean())
        else:
            # midpoint of the feasible interval; one-sided when a bound set is empty
            ub = g[a <= 0].min() if (a <= 0).any() else None
            lb = g[a >= 1].max() if (a >= 1).any() else None
            if ub is None or lb is None:
                out.append(lb if ub is None else ub)
            else:
                out.append((ub + lb) / 2)
    r1, r2 = out
    return (r1 + r2) / 2, (r1 - r2) / 2


class QuadraticNuSVC(ClassifierMixin, BaseEstimator):
    """Binary nu-SVM classifier with the quadratic kernel and an interpretable dual.

    Parameters
    ----------
    nu : float, default=0.5
        Lower bound on the fraction of support vectors, in ``(0, 1]``.
    tol : float, default=1e-6
        Maximal KKT violation at termination (normalized kernel, ``l`` scale).
    max_iter : int or None
        SMO iteration cap; ``None`` means ``max(10**6, 100 * N)``.
    cache_size : float, default=200
        Kernel cache budget in MB; the full Gram matrix is stored if it fits.

    Attributes
    ----------
    support_ : indices of training vectors with non-zero dual weight
    support_vectors_ : the corresponding feature vectors
    nu_duals_ : dual weights ``l_s`` satisfying the nu-SVM constraints
    support_labels_ : ``y_s`` in {-1, +1}
    dual_coef_ : ``y_s l_s`` rescaled so that the decision function is
        ``d(x) = sum_s dual_coef_s (x_s . x)^2 - bias_``
    bias_ : ``b`` (and ``intercept_ = -b``, sklearn sign convention)
    """

    def __init__(self, nu=0.5, tol=1e-6, max_iter=None, cache_size=200):
        self.nu = nu
        self.tol = tol
        self.max_iter = max_iter
        self.cache_size = cache_size

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=np.float64)
        classes = np.unique(y)
        if classes.size != 2:
            raise ValueError(f"need exactly two classes, got {classes.size}")
        self.classes_ = classes
        ys = np.where(y == classes[1], 1.0, -1.0)
        n = ys.size
        n_pos = int((ys > 0).sum())
        if not 0 < self.nu <= 1:
            raise ValueError("nu must lie in (0, 1]")
        nu_max = 2 * min(n_pos, n - n_pos) / n
        if self.nu > nu_max + 1e-12:
            raise ValueError(f"nu = {self.nu} is infeasible; at most {nu_max:.4f} for these class sizes")
        max_iter = self.max_iter or max(10**6, 100 * n)
        cache = KernelCache(X, self.cache_size)
        tol = self.tol
        alpha, grad, scale, n_iter, violation = solve_nu_dual(cache, ys, self.nu, tol, max_iter)
        r, rho = _margin_and_offset(alpha, grad, ys)
        # r and rho live on the alpha = N * l scale, where the KKT resolution is tol * N;
        # a margin close to it is refined before it is called zero
        for _ in range(_REFINE_STEPS):
            if not (np.isfinite(r) and r <= _REFINE_RATIO * tol * n):
                break
            tol *= _REFINE_FACTOR
            alpha, grad, scale, more, violation = solve_nu_dual(cache, ys, self.nu, tol, max_iter, alpha)
            n_iter += more
            r, rho = _margin_and_offset(alpha, grad, ys)
        if not (np.isfinite(r) and np.isfinite(rho)):
            raise TrainingError("no usable margin support vectors; bias undefined")
        # a zero margin follows the tolerance down; a genuine one stays put
        resolution = _REFINE_RATIO * tol * n
        resolved = bool(r > resolution)
        r_eff = r if resolved else resolution
        sv = np.nonzero(alpha > 0)[0]
        self.support_ = sv
        self.support_vectors_ = X[sv].copy()
        self.support_labels_ = ys[sv].copy()
        self.nu_duals_ = alpha[sv] / n
        self.dual_coef_ = ys[sv] * alpha[sv] / (r_eff * scale)
        self.bias_ = float(rho / r) if resolved else float(np.copysign(np.inf, rho))
        self.intercept_ = -self.bias_
        self.margin_ = float(r)
        self.offset_ = float(rho)
        self.margin_resolved_ = resolved
        self.kernel_scale_ = scale
        self.n_iter_ = n_iter
        self.kkt_violation_ = float(violation)
        self.n_train_ = n
        self.n_features_in_ = X.shape[1]
        if not resolved:
            logger.info("nu-SVM margin %.3e below KKT resolution %.3e: classes indistinguishable", r, resolution)
        logger.debug("nu-SVM: %d SVs, b=%.4g, %d iterations", sv.size, self.bias_, n_iter)
        return self

    def _check(self, X):
        check_is_fitted(self, "dual_coef_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} features, got {X.shape[1]}")
        return X

    def decision_function(self, X):
        X = self._check(X)
        out = np.empty(X.shape[0])
        step = max(1, _DECISION_ENTRIES // max(1, self.support_vectors_.shape[0]))
        for a in range(0, X.shape[0], step):
            out[a : a + step] = ((X[a : a + step] @ self.support_vectors_.T) ** 2) @ self.dual_coef_
        return out - self.bias_

    def predict(self, X):
        d = self.decision_function(X)
        return self.classes_[(d > 0).astype(int)]

    def score(self, X, y, sample_weight=None):
        """Fraction of vectors with ``sign(d)`` equal to the label; ``d = 0`` is an error."""
        d = self.decision_function(X)
        ys = np.where(np.asarray(y) == self.classes_[1], 1.0, -1.0)
        return float(np.mean(np.sign(d) == ys))

    def coefficient_column(self, nu_bar: int) -> np.ndarray:
        """``C[:, nu_bar]`` with ``C = sum_s dual_coef_s x_s x_s^T``, without forming ``C``."""
        check_is_fitted(self, "dual_coef_")
        if not 0 <= nu_bar < self.n_features_in_:
            raise IndexError(f"column {nu_bar} outside 0..{self.n_features_in_ - 1}")
        sv = self.support_vectors_
        return sv.T @ (self.dual_coef_ * sv[:, nu_bar])

    def coefficient_matrix(self) -> np.ndarray:
        check_is_fitted(self, "dual_coef_")
        sv = self.support_vectors_
        return sv.T @ (self.dual_coef_[:, None] * sv)

    def column_weights(self) -> np.ndarray:
        """Screening statistic ``|sum_s l_s x_s[nu]|`` for every column."""
        check_is_fitted(self, "dual_coef_")
        return np.abs(self.nu_duals_ @ self.support_vectors_)

    def to_dict(self) -> dict:
        check_is_fitted(self, "dual_coef_")
        return {
            "format": MODEL_FORMAT,
            "kernel": "quadratic",
            "dim": int(self.n_features_in_),
            "params": self.get_params(),
            "classes": [c.item() if hasattr(c, "item") else c for c in self.classes_],
            # strict JSON: an unresolved margin's infinite bias is written as a string
            "b": self.bias_ if np.isfinite(self.bias_) else repr(self.bias_),
            "margin": self.margin_,
            "offset": self.offset_,
            "margin_resolved": self.margin_resolved_,
            "kernel_scale": self.kernel_scale_,
            "n_iter": int(self.n_iter_),
            "kkt_violation": self.kkt_violation_,
            "n_train": int(self.n_train_),
            "support": [int(i) for i in self.support_],
            "lambda": self.nu_duals_.tolist(),
            "y": self.support_labels_.astype(int).tolist(),
            "dual_coef": self.dual_coef_.tolist(),
            "support_vectors": self.support_vectors_.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "QuadraticNuSVC":
        if data.get("format") != MODEL_FORMAT:
            raise ValueError(f"not a {MODEL_FORMAT} document")
        model = cls(**data["params"])
        model.classes_ = np.asarray(data["classes"])
        model.bias_ = float(data["b"])
        model.intercept_ = -model.bias_
        model.margin_ = float(data["margin"])
        model.offset_ = float(data["offset"])
        model.margin_resolved_ = bool(data["margin_resolved"])
        model.kernel_scale_ = float(data["kernel_scale"])
        model.n_iter_ = int(data["n_iter"])
        model.kkt_violation_ = float(data["kkt_violation"])
        model.n_train_ = int(data["n_train"])
        model.support_ = np.asarray(data["support"], dtype=np.int64)
        model.nu_duals_ = np.asarray(data["lambda"], dtype=np.float64)
        model.support_labels_ = np.asarray(data["y"], dtype=np.float64)
        model.dual_coef_ = np.asarray(data["dual_coef"], dtype=np.float64)
        dim = int(data["dim"])
        model.support_vectors_ = np.asarray(data["support_vectors"], dtype=np.float64).reshape(-1, dim)
        model.n_features_in_ = dim
        return model


@dataclass
class TrainingSet:
    vectors: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        self.vectors = np.atleast_2d(np.asarray(self.vectors, dtype=float))
        self.labels = np.asarray(self.labels, dtype=float).reshape(-1)
        if self.vectors.shape[0] != self.labels.size:
            raise ValueError("vectors and labels differ in length")
        if not np.all(np.isin(self.labels, (-1.0, 1.0))):
            raise ValueError("labels must be +1 or -1")

    @classmethod
    def from_classes(cls, positive, negative) -> "TrainingSet":
        positive, negative = np.atleast_2d(positive), np.atleast_2d(negative)
        if positive.shape[1] != negative.shape[1]:
            raise ValueError("classes have different feature dimensions")
        return cls(np.vstack([positive, negative]),
                   np.concatenate([np.ones(len(positive)), -np.ones(len(negative))]))


@dataclass
class CoefficientColumn:
    nu_bar: int
    values: np.ndarray


def train(ts: TrainingSet, nu: float = 0.5, **kwargs) -> QuadraticNuSVC:
    if not ((ts.labels > 0).any() and (ts.labels < 0).any()):
        raise ValueError("both classes must be present")
    return QuadraticNuSVC(nu=nu, **kwargs).fit(ts.vectors, ts.labels)


def decide(model: QuadraticNuSVC, phi) -> float | np.ndarray:
    phi = np.asarray(phi, dtype=float)
    d = model.decision_function(np.atleast_2d(phi))
    return float(d[0]) if phi.ndim == 1 else d


def coefficient_column(model: QuadraticNuSVC, nu_bar: int) -> CoefficientColumn:
    return CoefficientColumn(int(nu_bar), model.coefficient_column(int(nu_bar)))


def column_weight(model: QuadraticNuSVC, nu: int) -> float:
    if not 0 <= nu < model.n_features_in_:
        raise IndexError(f"column {nu} outside 0..{model.n_features_in_ - 1}")
    return float(abs(model.nu_duals_ @ model.support_vectors_[:, nu]))


def accuracy(model: QuadraticNuSVC, test: TrainingSet) -> float:
    if test.labels.size == 0:
        raise ValueError("empty test set")
    d = model.decision_function(test.vectors)
    return float(np.mean(np.sign(d) == test.labels))


def save_model(path, model: QuadraticNuSVC, meta: dict | None = None):
    doc = model.to_dict()
    doc["meta"] = meta or {}
    Path(path).write_text(json.dumps(doc, indent=1, allow_nan=False) + "\n", encoding="utf-8")


def load_model(path):
    """Returns ``(model, meta)``."""
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    return QuadraticNuSVC.from_dict(doc), doc.get("meta", {})
