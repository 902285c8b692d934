"""Cluster partitioning and rank-r tensorial feature vectors.

A rank-``r`` monomial over an ``n``-site cluster picks ``r`` distinct
within-cluster positions ``a_1 < ... < a_r`` and a spin component for each.
Flat index layout::

    mu = colex_rank(a_1, ..., a_r) * 3**r + sum_k c_k * 3**(r - 1 - k)

with ``c in {x: 0, y: 1, z: 2}``, so the site combination is the major index
and the component tuple the minor one. Model files depend on this layout.

Each Pauli-6 outcome has exactly one non-zero Bloch component, so each
(cluster, site-combination) pair of a snapshot lights up exactly one monomial
with value ``+-1``; all others are literal zeros.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .povm import Povm, pauli6
from .quantum.lattice import Lattice
from .quantum.pauli import PauliString
from .quantum.sampling import Snapshots

__all__ = [
    "ClusterSpec",
    "enumerate_clusters",
    "feature_dim",
    "monomial_encode",
    "monomial_decode",
    "monomial_pauli",
    "build_feature_vector",
    "batch_feature_vectors",
    "default_group_size",
    "TensorialFeatureMap",
    "FeatureVector",
]

SHAPES = ("chain-string", "square-vertex", "square-plaquette", "square-cells")
_CHUNK_ENTRIES = 4_000_000


@dataclass(frozen=True)
class ClusterSpec:
    """How a lattice configuration is cut into equal-size clusters.

    ``size`` is the string length ``n`` for ``chain-string`` and the block edge
    ``k`` (in unit cells) for ``square-cells``; it is ignored otherwise.
    """

    lattice: Lattice
    shape: str = "chain-string"
    size: int = 3
    overlap: bool = False

    def __post_init__(self):
        if self.shape not in SHAPES:
            raise ValueError(f"unknown cluster shape {self.shape!r}; expected one of {SHAPES}")
        if self.shape == "chain-string" and self.lattice.kind != "chain":
            raise ValueError("chain-string clusters need a chain lattice")
        if self.shape != "chain-string" and self.lattice.kind != "square-link":
            raise ValueError(f"{self.shape} clusters need a square link lattice")
        if self.size < 1:
            raise ValueError("cluster size must be positive")

    @property
    def n_sites(self) -> int:
        if self.shape == "chain-string":
            return self.size
        if self.shape == "square-cells":
            return 2 * self.size * self.size
        return 4

    def to_dict(self) -> dict:
        lat = self.lattice
        return {"lattice": lat.kind, "extents": list(lat.extents), "boundary": lat.boundary,
                "shape": self.shape, "size": self.size, "overlap": self.overlap}

    @classmethod
    def from_dict(cls, d: dict) -> "ClusterSpec":
        lat = Lattice(d["lattice"], tuple(d["extents"]), d["boundary"])
        return cls(lat, d["shape"], int(d["size"]), bool(d["overlap"]))


def _chain_clusters(spec: ClusterSpec) -> list:
    L = spec.lattice.site_count
    n = spec.size
    if n > L:
        raise ValueError(f"cluster of {n} sites does not fit a chain of {L}")
    if not spec.overlap:
        if L % n:
            raise ValueError(f"non-overlapping clusters need L divisible by n (L={L}, n={n})")
        return [tuple(range(j, j + n)) for j in range(0, L, n)]
    if spec.lattice.periodic:
        return [tuple((j + a) % L for a in range(n)) for j in range(L)]
    return [tuple(range(j, j + n)) for j in range(L - n + 1)]


def _square_clusters(spec: ClusterSpec) -> list:
    lat = spec.lattice
    lx, ly = lat.extents
    if not lat.periodic:
        raise ValueError("square link clusters are only defined on periodic lattices")
    if spec.shape == "square-vertex":
        return [lat.vertex_bonds(x, y) for x, y in lat.vertices()]
    if spec.shape == "square-plaquette":
        return [lat.plaquette_bonds(x, y) for x, y in lat.vertices()]
    k = spec.size
    if k > min(lx, ly):
        raise ValueError(f"{k}x{k} cell block does not fit a {lx}x{ly} lattice")
    if spec.overlap:
        origins = [(x, y) for y in range(ly) for x in range(lx)]
    else:
        if lx % k or ly % k:
            raise ValueError(f"non-overlapping {k}x{k} blocks need extents divisible by {k}")
        origins = [(x, y) for y in range(0, ly, k) for x in range(0, lx, k)]
    out = []
    for x0, y0 in origins:
        sites = []
        for dy in range(k):
            for dx in range(k):
                sites += [lat.h(x0 + dx, y0 + dy), lat.v(x0 + dx, y0 + dy)]
        out.append(tuple(sites))
    return out


def enumerate_clusters(spec: ClusterSpec) -> list:
    """Site tuples of every cluster placement, in a fixed deterministic order."""
    clusters = _chain_clusters(spec) if spec.shape == "chain-string" else _square_clusters(spec)
    if any(len(set(c)) != len(c) for c in clusters):
        raise ValueError("cluster larger than the lattice: placement wraps onto itself")
    return clusters


def feature_dim(r: int, n: int) -> int:
    if not 1 <= r <= n:
        raise ValueError(f"rank must satisfy 1 <= r <= n (r={r}, n={n})")
    return math.comb(n, r) * 3**r


def _colex_rank(sites) -> int:
    return sum(math.comb(a, k + 1) for k, a in enumerate(sites))


def monomial_encode(sites, components, r: int, n: int) -> int:
    sites = tuple(int(s) for s in sites)
    comps = tuple("xyz".index(c) if isinstance(c, str) else int(c) for c in components)
    if len(sites) != r or len(comps) != r:
        raise ValueError("need exactly r sites and r components")
    if r > n:
        raise ValueError("rank exceeds cluster size")
    if any(b <= a for a, b in zip(sites, sites[1:])):
        raise ValueError("sites must be strictly increasing (no repeats)")
    if sites and (sites[0] < 0 or sites[-1] >= n):
        raise ValueError("site outside the cluster")
    if any(c not in (0, 1, 2) for c in comps):
        raise ValueError("components must be x, y or z")
    minor = 0
    for c in comps:
        minor = 3 * minor + c
    return _colex_rank(sites) * 3**r + minor


def monomial_decode(mu: int, r: int, n: int) -> tuple:
    dim = feature_dim(r, n)
    if not 0 <= mu < dim:
        raise IndexError(f"monomial index {mu} outside 0..{dim - 1}")
    major, minor = divmod(int(mu), 3**r)
    comps = []
    for _ in range(r):
        minor, c = divmod(minor, 3)
        comps.append(c)
    comps.reverse()
    sites = []
    for k in range(r, 0, -1):
        a = k - 1
        while math.comb(a + 1, k) <= major:
            a += 1
        sites.append(a)
        major -= math.comb(a, k)
    sites.reverse()
    return tuple(sites), tuple(comps)


def monomial_pauli(mu: int, r: int, cluster_sites) -> PauliString:
    """The Pauli string whose ``3^-r``-scaled expectation is component ``mu``."""
    sites, comps = monomial_decode(mu, r, len(cluster_sites))
    return PauliString(tuple((cluster_sites[a], "XYZ"[c]) for a, c in zip(sites, comps)))


def _combination_table(n: int, r: int) -> np.ndarray:
    combos = sorted(combinations(range(n), r), key=_colex_rank)
    return np.array(combos, dtype=np.int64).reshape(len(combos), r)


@dataclass
class FeatureVector:
    values: np.ndarray
    r: int
    cluster: ClusterSpec
    samples_averaged: int

    @property
    def n(self) -> int:
        return self.cluster.n_sites


def default_group_size(r: int, n_clusters: int, shots: int) -> int:
    """``ceil(100 * 3^r / N_cl)`` clamped to ``[1, shots / 20]``."""
    size = math.ceil(100 * 3**r / n_clusters)
    upper = max(1, shots // 20)
    return int(min(max(size, 1), upper))


def _outcome_tables(povm: Povm):
    """Per outcome: (component index, sign) of its single non-zero Bloch entry."""
    blochs = povm.blochs
    nonzero = np.abs(blochs) > 1e-12
    if not np.all(nonzero.sum(axis=1) == 1) or not np.allclose(np.abs(blochs[nonzero]), 1):
        return None
    comp = np.argmax(nonzero, axis=1)
    sign = np.sign(blochs[np.arange(len(blochs)), comp])
    return comp.astype(np.int64), sign


def _group_sums(outcomes: np.ndarray, clusters: np.ndarray, combos: np.ndarray, r: int,
                povm: Povm, group_of_shot: np.ndarray, n_groups: int) -> np.ndarray:
    """Sum of monomials over clusters and shots, per group: shape ``(n_groups, dim)``."""
    n_comb = combos.shape[0]
    per_block = 3**r
    dim = n_comb * per_block
    tables = _outcome_tables(povm)
    total = np.zeros(n_groups * dim)
    # cluster_site[j, c, k]: lattice site of the k-th factor of combination c in cluster j
    cluster_site = clusters[:, combos]
    offsets = np.arange(n_comb, dtype=np.int64) * per_block
    weights = 3 ** np.arange(r - 1, -1, -1, dtype=np.int64)
    chunk = max(1, _CHUNK_ENTRIES // (cluster_site.size * (1 if tables is not None else 3**r)))
    for start in range(0, outcomes.shape[0], chunk):
        block = outcomes[start : start + chunk].astype(np.int64)
        groups = group_of_shot[start : start + chunk]
        keep = groups >= 0
        block, groups = block[keep], groups[keep]
        if block.size == 0:
            continue
        picked = block[:, cluster_site]  # (shots, clusters, combos, r)
        if tables is not None:
            comp, sign = tables
            minor = (comp[picked] * weights).sum(axis=-1)
            value = np.prod(sign[picked], axis=-1)
            flat = groups[:, None, None] * dim + offsets[None, None, :] + minor
            total += np.bincount(flat.ravel(), weights=value.ravel(), minlength=n_groups * dim)
        else:
            # general POVM: every component of every factor may be non-zero
            bloch = povm.blochs[picked]  # (shots, clusters, combos, r, 3)
            prod = bloch[..., 0, :]
            for k in range(1, r):
                prod = (prod[..., :, None] * bloch[..., k, None, :]).reshape(*prod.shape[:-1], -1)
            summed = prod.sum(axis=1).reshape(len(groups), dim)
            np.add.at(total.reshape(n_groups, dim), groups, summed)
    return total.reshape(n_groups, dim)


def _validate(snapshots, spec: ClusterSpec) -> np.ndarray:
    if isinstance(snapshots, Snapshots):
        if snapshots.lattice != spec.lattice:
            raise ValueError("snapshot lattice does not match the cluster specification")
        outcomes = snapshots.outcomes
    else:
        outcomes = np.asarray(snapshots)
        if outcomes.ndim != 2 or outcomes.shape[1] != spec.lattice.site_count:
            raise ValueError(
                f"snapshots must have shape (shots, {spec.lattice.site_count}), got {outcomes.shape}"
            )
    if outcomes.shape[0] == 0:
        raise ValueError("no snapshots given")
    return outcomes


def batch_feature_vectors(snapshots, spec: ClusterSpec, r: int, povm: Povm | None = None,
                          group_size: int | None = None) -> np.ndarray:
    """One cluster- and sample-averaged feature vector per consecutive group of shots.

    Returns an array of shape ``(shots // group_size, dim)``; the remainder is dropped.
    """
    povm = povm or pauli6()
    outcomes = _validate(snapshots, spec)
    if outcomes.max() >= povm.n_outcomes:
        raise ValueError("outcome index out of range for the POVM")
    clusters = np.array(enumerate_clusters(spec), dtype=np.int64)
    n = clusters.shape[1]
    feature_dim(r, n)
    shots = outcomes.shape[0]
    if group_size is None:
        group_size = default_group_size(r, len(clusters), shots)
    if group_size < 1:
        raise ValueError("group_size must be at least 1")
    if group_size > shots:
        raise ValueError(f"group_size {group_size} exceeds the {shots} available snapshots")
    n_groups = shots // group_size
    group_of_shot = np.arange(shots) // group_size
    group_of_shot[group_of_shot >= n_groups] = -1
    sums = _group_sums(outcomes, clusters, _combination_table(n, r), r, povm, group_of_shot, n_groups)
    return sums / (group_size * len(clusters))


def build_feature_vector(snapshots, spec: ClusterSpec, r: int, povm: Povm | None = None) -> FeatureVector:
    """Single feature vector averaged over all clusters of all given snapshots."""
    outcomes = _validate(snapshots, spec)
    values = batch_feature_vectors(outcomes, spec, r, povm, group_size=outcomes.shape[0])[0]
    return FeatureVector(values, r, spec, outcomes.shape[0])


class TensorialFeatureMap(TransformerMixin, BaseEstimator):
    """Map raw snapshot batches to averaged rank-``r`` feature vectors.

    Parameters
    ----------
    cluster : ClusterSpec
        Lattice and cluster geometry.
    rank : int
        Number of spin-component factors per monomial.
    group_size : int or None
        Snapshots averaged into each output row; ``None`` picks
        :func:`default_group_size` from the input size.
    povm : Povm or None
        Defaults to Pauli-6.
    """

    def __init__(self, cluster=None, rank=3, group_size=None, povm=None):
        self.cluster = cluster
        self.rank = rank
        self.group_size = group_size
        self.povm = povm

    def fit(self, X=None, y=None):
        if not isinstance(self.cluster, ClusterSpec):
            raise ValueError("cluster must be a ClusterSpec")
        self.clusters_ = enumerate_clusters(self.cluster)
        self.n_sites_ = len(self.clusters_[0])
        self.n_features_out_ = feature_dim(self.rank, self.n_sites_)
        return self

    def transform(self, X):
        if not hasattr(self, "clusters_"):
            self.fit()
        return batch_feature_vectors(X, self.cluster, self.rank, self.povm, self.group_size)

    @property
    def dim(self) -> int:
        return feature_dim(self.rank, self.cluster.n_sites)

    def resolved_group_size(self, shots: int) -> int:
        if self.group_size is not None:
            return self.group_size
        return default_group_size(self.rank, len(enumerate_clusters(self.cluster)), shots)

    def decode(self, mu: int) -> tuple:
        return monomial_decode(mu, self.rank, self.cluster.n_sites)
