"""End-to-end pipelines shared by the command line and the acceptance tests.

Every function here is a pure function of its arguments and seeds: child
seeds are derived from the caller's seed with ``numpy.random.SeedSequence``
spawn keys, so re-running any pipeline reproduces it bit for bit.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .features import ClusterSpec, batch_feature_vectors, default_group_size, enumerate_clusters
from .interpret import extract_features, rank_columns
from .phase_graph import PhaseGraph, pairwise_biases
from .quantum import (
    HamiltonianSpec,
    Lattice,
    Snapshots,
    ground_state,
    prepare_cluster_state,
    prepare_toric_code,
    random_snapshots,
    sample_pauli6_statevector,
    sample_pauli6_tableau,
    sample_product,
)
from .quantum.statevector import MAX_QUBITS
from .svm import CoefficientColumn, QuadraticNuSVC

__all__ = [
    "derive_seed",
    "generate_snapshots",
    "parse_bloch_pattern",
    "matched_random",
    "split_holdout",
    "TrainResult",
    "train_against_random",
    "top_features",
    "grid_points",
    "phase_graph_from_snapshots",
    "bench_point",
    "crossing_shots",
]

logger = logging.getLogger(__name__)

# spawn-key tags, one per independent random stream
_TAG_RANDOM_CLASS = 1
_TAG_SPLIT = 2
_TAG_BENCH = 3

_AXES = {"x": (1.0, 0.0, 0.0), "y": (0.0, 1.0, 0.0), "z": (0.0, 0.0, 1.0)}


def derive_seed(seed: int, *tags: int) -> int:
    """Deterministic 63-bit child seed of ``seed`` for the stream named by ``tags``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(t) for t in tags))
    return int(ss.generate_state(1, np.uint64)[0] >> np.uint64(1))


def parse_bloch_pattern(pattern: str, n: int) -> np.ndarray:
    """``"+z,-z"`` -> Bloch vectors repeated cyclically over ``n`` sites."""
    vecs = []
    for tok in pattern.split(","):
        tok = tok.strip().lower()
        sign = -1.0 if tok.startswith("-") else 1.0
        axis = tok.lstrip("+-")
        if axis not in _AXES:
            raise ValueError(f"bad Bloch direction {tok!r}; use [+-]x, [+-]y or [+-]z")
        vecs.append(sign * np.array(_AXES[axis]))
    return np.array([vecs[k % len(vecs)] for k in range(n)])


def generate_snapshots(source: str, lattice: Lattice, shots: int, seed: int, couplings=(0.0, 0.0),
                       method: str = "auto", bloch: str = "+x", threads: int = 1) -> Snapshots:
    """Pauli-6 snapshots from a model ground state, a product state, or uniform noise.

    ``source`` is ``cluster-chain``, ``toric-code``, ``product`` or ``random``.
    For the two models ``method="auto"`` uses the stabilizer tableau in the pure
    limit (all couplings zero) and exact diagonalization otherwise.
    """
    if shots < 1:
        raise ValueError("shots must be positive")
    if method not in ("auto", "tableau", "ed"):
        raise ValueError("method must be auto, tableau or ed")
    if source == "random":
        snaps = random_snapshots(lattice, shots, seed)
        snaps.params = {"source": "random"}
        return snaps
    if source == "product":
        snaps = sample_product(parse_bloch_pattern(bloch, lattice.site_count), shots, seed, lattice)
        snaps.params = {"source": "product", "bloch": bloch.replace(" ", "")}
        return snaps
    if source == "cluster-chain":
        spec = HamiltonianSpec("cluster-chain", couplings, lattice)
    elif source == "toric-code":
        spec = HamiltonianSpec("toric-code", couplings, lattice)
    else:
        raise ValueError(f"unknown source {source!r}")
    pure = all(c == 0.0 for c in spec.couplings)
    if method == "tableau" and not pure:
        raise ValueError("tableau sampling needs the pure limit (all couplings zero)")
    if method == "tableau" or (method == "auto" and pure):
        if source == "cluster-chain":
            state = prepare_cluster_state(lattice.site_count)
        else:
            state = prepare_toric_code(*lattice.extents)
        snaps = sample_pauli6_tableau(state, shots, seed, lattice, threads)
        used = "tableau"
    else:
        if lattice.site_count > MAX_QUBITS:
            raise ValueError(f"{lattice.site_count} qubits is beyond exact diagonalization "
                             f"(limit {MAX_QUBITS}); only the pure limit can be sampled")
        state = ground_state(spec)
        snaps = sample_pauli6_statevector(state, shots, seed, lattice, threads)
        used = "ed"
    snaps.params = {"source": source, **{k: repr(v) for k, v in spec.params().items()}, "method": used}
    return snaps


def matched_random(snaps: Snapshots, seed: int) -> Snapshots:
    """Featureless second class: same lattice and shot count, independent seed."""
    return random_snapshots(snaps.lattice, len(snaps), derive_seed(seed, _TAG_RANDOM_CLASS))


def split_holdout(n: int, fraction: float, rng: np.random.Generator) -> tuple:
    """Random ``(train, test)`` index split with ``max(1, floor(fraction * n))`` held out."""
    if n < 2:
        raise ValueError("need at least two feature vectors per class to hold some out")
    n_test = max(1, int(math.floor(fraction * n)))
    perm = rng.permutation(n)
    return np.sort(perm[n_test:]), np.sort(perm[:n_test])


@dataclass
class TrainResult:
    model: QuadraticNuSVC
    accuracy: float
    n_train: int
    n_test: int
    group_size: int
    meta: dict


def train_against_random(snaps: Snapshots, spec: ClusterSpec, r: int, nu: float = 0.5,
                         group_size: int | None = None, seed: int = 0, holdout: float = 0.2,
                         tol: float = 1e-6, negatives: Snapshots | None = None) -> TrainResult:
    """Train ``snaps`` (class +1) against a matched random class (class -1).

    A ``holdout`` fraction of each class is withheld and the accuracy on it is
    reported. ``negatives`` replaces the generated random class when given.
    """
    neg = negatives if negatives is not None else matched_random(snaps, seed)
    if group_size is None:
        group_size = default_group_size(r, len(enumerate_clusters(spec)), len(snaps))
    pos_x = batch_feature_vectors(snaps, spec, r, group_size=group_size)
    neg_x = batch_feature_vectors(neg, spec, r, group_size=group_size)
    rng = np.random.default_rng(derive_seed(seed, _TAG_SPLIT))
    p_tr, p_te = split_holdout(len(pos_x), holdout, rng)
    n_tr, n_te = split_holdout(len(neg_x), holdout, rng)
    x_train = np.vstack([pos_x[p_tr], neg_x[n_tr]])
    y_train = np.concatenate([np.ones(len(p_tr)), -np.ones(len(n_tr))])
    x_test = np.vstack([pos_x[p_te], neg_x[n_te]])
    y_test = np.concatenate([np.ones(len(p_te)), -np.ones(len(n_te))])
    model = QuadraticNuSVC(nu=nu, tol=tol).fit(x_train, y_train)
    acc = model.score(x_test, y_test)
    meta = {"cluster": spec.to_dict(), "r": r, "group_size": group_size, "seed": seed,
            "holdout": holdout, "test_accuracy": acc}
    return TrainResult(model, acc, len(y_train), len(y_test), group_size, meta)


def top_features(model: QuadraticNuSVC, r: int, n: int, k: int = 1, rho: float = 0.2) -> list:
    """Feature reports for the ``k`` highest-weight columns."""
    return [extract_features(CoefficientColumn(c, model.coefficient_column(c)), r, n, rho)
            for c in rank_columns(model, k)]


def grid_points(first: tuple, second: tuple) -> list:
    """``(lo, hi, count)`` ranges -> coordinate pairs, second axis major."""
    xs = np.linspace(first[0], first[1], int(first[2]))
    ys = np.linspace(second[0], second[1], int(second[2]))
    return [(float(x), float(y)) for y in ys for x in xs]


def phase_graph_from_snapshots(datasets: list, coords: list, spec: ClusterSpec, r: int,
                               nu: float = 0.5, b_c: float = 100.0, group_size: int | None = None,
                               n_jobs: int = 1, tol: float = 1e-6) -> PhaseGraph:
    """Pairwise-bias phase graph over a list of snapshot sets."""
    if len(datasets) != len(coords):
        raise ValueError("one coordinate per dataset is required")
    feats = [batch_feature_vectors(s, spec, r, group_size=group_size) for s in datasets]
    return PhaseGraph(coords, pairwise_biases(feats, nu=nu, n_jobs=n_jobs, tol=tol), b_c)


def bench_point(L: int, rn: int, shots: int, n_train: int, n_test: int, seed: int,
                nu: float = 0.5, overlap: bool = False, tol: float = 1e-6, periodic: bool = True) -> float:
    """Held-out accuracy of pure cluster state vs random, ``shots`` snapshots per feature vector.

    Uses ``n_train + n_test`` feature vectors per class; the rank and string
    length are both ``rn``. The ring (``periodic``) makes every cluster
    placement equivalent, so a vector's quality depends only on the number of
    cluster samples it averages.
    """
    if shots < 1 or n_train < 1 or n_test < 1:
        raise ValueError("shots, n_train and n_test must be positive")
    lat = Lattice("chain", (L,), "periodic" if periodic else "open")
    spec = ClusterSpec(lat, "chain-string", rn, overlap)
    enumerate_clusters(spec)
    total = (n_train + n_test) * shots
    s = derive_seed(seed, _TAG_BENCH, L, rn, shots)
    pos = sample_pauli6_tableau(prepare_cluster_state(L, periodic), total, derive_seed(s, 0), lat)
    neg = random_snapshots(lat, total, derive_seed(s, 1))
    pos_x = batch_feature_vectors(pos, spec, rn, group_size=shots)
    neg_x = batch_feature_vectors(neg, spec, rn, group_size=shots)
    x_train = np.vstack([pos_x[:n_train], neg_x[:n_train]])
    y_train = np.concatenate([np.ones(n_train), -np.ones(n_train)])
    x_test = np.vstack([pos_x[n_train:], neg_x[n_train:]])
    y_test = np.concatenate([np.ones(n_test), -np.ones(n_test)])
    return QuadraticNuSVC(nu=nu, tol=tol).fit(x_train, y_train).score(x_test, y_test)


def crossing_shots(shots, accuracy, level: float = 0.8) -> float:
    """First crossing of ``level``, interpolated linearly in ``log(shots)``; NaN if never reached."""
    s = np.asarray(shots, dtype=float)
    a = np.asarray(accuracy, dtype=float)
    order = np.argsort(s)
    s, a = s[order], a[order]
    if a[0] >= level:
        return float(s[0])
    for k in range(1, len(s)):
        if a[k] >= level:
            t = (level - a[k - 1]) / (a[k] - a[k - 1])
            return float(np.exp(np.log(s[k - 1]) + t * (np.log(s[k]) - np.log(s[k - 1]))))
    return float("nan")
