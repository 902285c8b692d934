"""Phase-diagram topology from pairwise classification biases.

Every pair of grid points is classified against each other; the absolute
bias of each pair becomes an edge weight through a Lorentzian centred at
``|b| = 1``. The Fiedler vector of the resulting graph Laplacian is then
split into bands, one per phase.
"""

from __future__ import annotations

import itertools
import json
import logging
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg
from joblib import Parallel, delayed
from scipy.sparse.csgraph import connected_components

from .exceptions import ConvergenceError
from .svm import QuadraticNuSVC

__all__ = [
    "lorentzian_weight",
    "laplacian",
    "fiedler",
    "partition",
    "pairwise_biases",
    "PhaseGraph",
    "PartitionResult",
    "FiedlerResult",
    "DEFAULT_BC",
    "GRAPH_FORMAT",
]

logger = logging.getLogger(__name__)

DEFAULT_BC = 100.0
DEFAULT_BINS = 64
MIN_BAND = 2
SMALL_GRAPH_FACTOR = 4
DISCONNECTED_TOL = 1e-10
RESIDUAL_TOL = 1e-8
GRAPH_FORMAT = "tksvm-graph/v1"


def lorentzian_weight(b, b_c: float = DEFAULT_BC):
    """``w = 1 - b_c^2 / ((|b| - 1)^2 + b_c^2)``; zero at ``|b| = 1``, tends to 1 as ``|b|`` grows."""
    if not b_c > 0:
        raise ValueError("b_c must be positive")
    b = np.abs(np.asarray(b, dtype=float))
    # 1 / (1 + t^2) with t = b_c / ||b| - 1|: no cancellation near |b| = 1 and
    # no overflow for huge |b|; an infinite bias (unresolved margin) gives exactly 1
    with np.errstate(divide="ignore"):
        t = b_c / np.abs(b - 1.0)
    w = 1.0 / (1.0 + t * t)
    return float(w) if w.ndim == 0 else w


def _check_weights(w) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    if w.ndim != 2 or w.shape[0] != w.shape[1]:
        raise ValueError("weight matrix must be square")
    if not np.allclose(w, w.T, rtol=0, atol=1e-14):
        raise ValueError("weight matrix must be symmetric")
    if np.any(np.diag(w) != 0):
        raise ValueError("weight matrix must have a zero diagonal")
    if np.any(w < 0):
        raise ValueError("weights must be non-negative")
    return w


def laplacian(weights) -> np.ndarray:
    """``L_ij = -w_ij`` off the diagonal, ``L_ii = sum_j w_ij``."""
    w = _check_weights(weights)
    lap = -w.copy()
    np.fill_diagonal(lap, w.sum(axis=1))
    return lap


def _complement_basis(m: int) -> np.ndarray:
    """Orthonormal basis of the subspace orthogonal to the constant vector."""
    q, _ = np.linalg.qr(np.column_stack([np.ones(m), np.eye(m)[:, : m - 1]]))
    return q[:, 1:]


@dataclass
class FiedlerResult:
    lambda2: float
    vector: np.ndarray
    residual: float
    connected: bool
    components: np.ndarray


def _fix_sign(z: np.ndarray) -> np.ndarray:
    nz = np.nonzero(np.abs(z) > 1e-12)[0]
    if nz.size and z[nz[0]] < 0:
        return -z
    return z


def fiedler(lap) -> FiedlerResult:
    """Second-smallest Laplacian eigenpair, with the constant eigenvector deflated.

    The Laplacian is projected onto the orthogonal complement of ``1`` and
    the lowest eigenpair of the projected matrix is taken. If ``lambda2``
    falls below ``1e-10`` the graph is reported as disconnected; each
    connected component is then solved on its own and the per-component
    vectors are stacked (``components`` holds the component label per vertex).
    """
    lap = np.asarray(lap, dtype=float)
    m = lap.shape[0]
    if m < 2:
        raise ValueError("need at least two vertices")
    q = _complement_basis(m)
    vals, vecs = scipy.linalg.eigh(q.T @ lap @ q, subset_by_index=[0, 0])
    lam = max(float(vals[0]), 0.0)
    z = q @ vecs[:, 0]
    z = _fix_sign(z / np.linalg.norm(z))
    scale = max(1.0, float(np.abs(lap).max()))
    residual = float(np.linalg.norm(lap @ z - vals[0] * z))
    if residual > RESIDUAL_TOL * scale:
        raise ConvergenceError(f"Fiedler residual {residual:.3e} above tolerance")
    comps = np.zeros(m, dtype=int)
    if lam >= DISCONNECTED_TOL:
        return FiedlerResult(lam, z, residual, True, comps)
    n_comp, comps = connected_components(np.abs(lap) > 0, directed=False)
    logger.warning("graph is disconnected (lambda2 = %.2e); %d components", lam, n_comp)
    z = np.zeros(m)
    for c in range(n_comp):
        idx = np.nonzero(comps == c)[0]
        if idx.size > 1:
            z[idx] = fiedler(lap[np.ix_(idx, idx)]).vector
    return FiedlerResult(lam, z, residual, False, comps)


@dataclass
class PartitionResult:
    fiedler: np.ndarray
    lambda2: float
    labels: np.ndarray
    histogram: tuple = field(default=None)
    mode: str = "histogram"

    @property
    def n_parts(self) -> int:
        return int(np.unique(self.labels).size)


def _canonical(raw) -> np.ndarray:
    """Relabel so that labels appear as 0, 1, 2, ... in vertex order."""
    order = {}
    return np.array([order.setdefault(v, len(order)) for v in raw], dtype=int)


def _bands(z: np.ndarray, bins: int, min_band: int):
    lo, hi = float(z.min()), float(z.max())
    span = hi - lo
    if span <= 1e-9 * max(1.0, abs(lo), abs(hi)):
        counts = np.zeros(bins, dtype=int)
        counts[0] = z.size
        return np.zeros(z.size, dtype=int), (counts, np.linspace(lo, lo + 1.0, bins + 1))
    counts, edges = np.histogram(z, bins=bins, range=(lo, hi))
    which = np.clip(np.searchsorted(edges, z, side="right") - 1, 0, bins - 1)
    # maximal runs of occupied bins, separated by at least one empty bin
    runs = []
    for k in range(bins):
        if counts[k]:
            if runs and runs[-1][1] == k - 1:
                runs[-1][1] = k
            else:
                runs.append([k, k])
    # absorb thin bands into the neighbour across the narrower gap; on small
    # graphs a single vertex may be a whole phase, so nothing is absorbed
    while len(runs) > 1 and z.size >= SMALL_GRAPH_FACTOR * min_band:
        sizes = [counts[a : b + 1].sum() for a, b in runs]
        thin = [i for i, s in enumerate(sizes) if s < min_band]
        if not thin:
            break
        i = thin[0]
        gap_left = runs[i][0] - runs[i - 1][1] if i > 0 else np.inf
        gap_right = runs[i + 1][0] - runs[i][1] if i + 1 < len(runs) else np.inf
        j = i - 1 if gap_left <= gap_right else i + 1
        a, b = min(i, j), max(i, j)
        runs[a:b + 1] = [[runs[a][0], runs[b][1]]]
    # every entry falls in an occupied bin, so only run members need a band
    band_of_bin = np.zeros(bins, dtype=int)
    for idx, (a, b) in enumerate(runs):
        band_of_bin[a : b + 1] = idx
    return band_of_bin[which], (counts, edges)


def partition(z, mode: str = "histogram", bins: int = DEFAULT_BINS, min_band: int = MIN_BAND,
              lambda2: float = float("nan"), components=None) -> PartitionResult:
    """Split Fiedler entries into parts.

    ``sign`` mode labels vertices by the sign of their entry. ``histogram``
    mode bins the entries over their range and cuts at empty bins, merging
    bands with fewer than ``min_band`` members into their nearest neighbour
    (graphs with fewer than ``4 * min_band`` vertices keep every band).
    Labels are canonical (first vertex gets 0) and therefore invariant under
    a global sign flip of ``z``. With ``components`` given, each connected
    component is partitioned separately.
    """
    z = np.asarray(z, dtype=float)
    if mode not in ("sign", "histogram"):
        raise ValueError("mode must be 'sign' or 'histogram'")
    comps = np.zeros(z.size, dtype=int) if components is None else np.asarray(components)
    raw = np.empty(z.size, dtype=object)
    hist = None
    for c in np.unique(comps):
        idx = np.nonzero(comps == c)[0]
        zc = z[idx]
        if mode == "sign":
            part = (zc > 0).astype(int)
        else:
            part, h = _bands(zc, bins, min_band)
            hist = h if hist is None else hist
        raw[idx] = [(int(c), int(p)) for p in part]
    if hist is None:
        hist = np.histogram(z, bins=bins)
    return PartitionResult(z, lambda2, _canonical(raw.tolist()), hist, mode)


def _train_pair(i, j, fa, fb, nu, svm_params):
    ys = np.concatenate([np.ones(len(fa)), -np.ones(len(fb))])
    try:
        model = QuadraticNuSVC(nu=nu, **svm_params).fit(np.vstack([fa, fb]), ys)
        return i, j, model.bias_, None
    except Exception as exc:  # noqa: BLE001 - any pair failure degrades to weight 0
        return i, j, np.nan, f"{type(exc).__name__}: {exc}"


def pairwise_biases(features: list, nu: float = 0.5, n_jobs: int = 1, **svm_params) -> np.ndarray:
    """Signed bias ``b`` for every unordered pair of datasets.

    ``features[k]`` is the feature-vector batch of grid point ``k``; the
    first dataset of each pair is labelled ``+1``. Failed pairs are NaN.
    """
    m = len(features)
    if m < 2:
        raise ValueError("need at least two grid points")
    pairs = list(itertools.combinations(range(m), 2))
    if n_jobs == 1:
        results = [_train_pair(i, j, features[i], features[j], nu, svm_params) for i, j in pairs]
    else:
        results = Parallel(n_jobs=n_jobs)(
            delayed(_train_pair)(i, j, features[i], features[j], nu, svm_params) for i, j in pairs
        )
    bias = np.zeros((m, m))
    for i, j, b, err in results:
        if err is not None:
            warnings.warn(f"pair ({i}, {j}) failed, weight set to 0: {err}", RuntimeWarning, stacklevel=2)
        bias[i, j] = bias[j, i] = b
    return bias


def _encode_bias(v):
    # strict JSON has no NaN/Infinity: failed pairs become null, unresolved ones a string
    if np.isnan(v):
        return None
    if np.isinf(v):
        return "inf" if v > 0 else "-inf"
    return float(v)


def _decode_bias(v):
    return np.nan if v is None else float(v)


class PhaseGraph:
    """Fully connected graph over grid points with Lorentzian-normalized bias weights."""

    def __init__(self, coords, biases, b_c: float = DEFAULT_BC):
        self.coords = [tuple(float(v) for v in np.atleast_1d(c)) for c in coords]
        self.biases = np.asarray(biases, dtype=float)
        m = len(self.coords)
        if self.biases.shape != (m, m):
            raise ValueError("bias matrix does not match the vertex count")
        if m < 2:
            raise ValueError("need at least two grid points")
        self.b_c = float(b_c)

    @property
    def weights(self) -> np.ndarray:
        w = lorentzian_weight(np.nan_to_num(self.biases, nan=1.0), self.b_c)
        w = np.asarray(w, dtype=float)
        w = (w + w.T) / 2
        np.fill_diagonal(w, 0.0)
        return w

    def laplacian(self) -> np.ndarray:
        return laplacian(self.weights)

    def partition(self, mode: str = "histogram", bins: int = DEFAULT_BINS, min_band: int = MIN_BAND
                  ) -> PartitionResult:
        f = fiedler(self.laplacian())
        res = partition(f.vector, mode, bins, min_band, f.lambda2,
                        None if f.connected else f.components)
        return res

    def with_bc(self, b_c: float) -> "PhaseGraph":
        return PhaseGraph(self.coords, self.biases, b_c)

    def to_dict(self) -> dict:
        return {
            "format": GRAPH_FORMAT,
            "b_c": self.b_c,
            "coords": [list(c) for c in self.coords],
            "biases": [[_encode_bias(v) for v in row] for row in self.biases],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "PhaseGraph":
        if data.get("format") != GRAPH_FORMAT:
            raise ValueError(f"not a {GRAPH_FORMAT} document")
        biases = np.array([[_decode_bias(v) for v in row] for row in data["biases"]], dtype=float)
        return cls(data["coords"], biases, data["b_c"])

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=1, allow_nan=False) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path) -> "PhaseGraph":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
