"""Reading order parameters off coefficient-matrix columns.

A column ``C[:, nu_bar]`` is thresholded relative to its largest entry; the
surviving monomials are decoded and rendered as Pauli strings. A column whose
largest entry does not rise clearly above the column's own noise floor (a
median-based scale estimate) is reported as carrying no signal.
"""

from __future__ import annotations

import csv
import json
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .features import feature_dim, monomial_decode, monomial_encode
from .svm import CoefficientColumn, QuadraticNuSVC

__all__ = [
    "FeatureHit",
    "FeatureReport",
    "rank_columns",
    "extract_features",
    "render_pauli",
    "parse_pauli",
    "feature_count",
    "report_table",
    "write_column_csv",
    "DEFAULT_RHO",
    "NOISE_SIGMAS",
]

DEFAULT_RHO = 0.2
# a column's maximum must exceed this many robust standard deviations of the column
NOISE_SIGMAS = 8.0
_MAD_SCALE = 1.4826

_TOKEN = re.compile(r"^([XYZ])(-?\d+)$")


def render_pauli(monomial, cluster_sites=None) -> str:
    """``((1, 2, 3), ('z', 'x', 'z'))`` -> ``"Z1 X2 Z3"``.

    With ``cluster_sites`` the within-cluster positions are replaced by the
    absolute lattice sites of the placement.
    """
    sites, comps = monomial
    labels = [cluster_sites[a] if cluster_sites is not None else a for a in sites]
    ops = ["XYZ"["xyz".index(c.lower())] if isinstance(c, str) else "XYZ"[int(c)] for c in comps]
    return " ".join(f"{o}{s}" for o, s in zip(ops, labels))


def parse_pauli(text: str, cluster_sites=None) -> tuple:
    """Inverse of :func:`render_pauli`; components come back as 0/1/2."""
    sites, comps = [], []
    for tok in text.split():
        m = _TOKEN.match(tok)
        if not m:
            raise ValueError(f"bad Pauli token {tok!r}")
        site = int(m.group(2))
        if cluster_sites is not None:
            site = list(cluster_sites).index(site)
        sites.append(site)
        comps.append("XYZ".index(m.group(1)))
    return tuple(sites), tuple(comps)


@dataclass(frozen=True)
class FeatureHit:
    index: int
    sites: tuple
    components: tuple
    value: float
    text: str

    @property
    def magnitude(self) -> float:
        return abs(self.value)


@dataclass
class FeatureReport:
    column: CoefficientColumn
    hits: list
    threshold_used: float
    rho: float
    r: int
    n: int
    no_signal: bool = False
    noise_scale: float = 0.0
    meta: dict = field(default_factory=dict)

    @property
    def peak(self) -> float:
        return self.threshold_used / self.rho

    @property
    def column_text(self) -> str:
        return render_pauli(monomial_decode(self.column.nu_bar, self.r, self.n))

    def texts(self) -> list:
        return [h.text for h in self.hits]

    def to_dict(self) -> dict:
        return {
            "column": self.column.nu_bar,
            "column_pauli": self.column_text,
            "r": self.r,
            "n": self.n,
            "rho": self.rho,
            "threshold": self.threshold_used,
            "noise_scale": self.noise_scale,
            "no_signal": self.no_signal,
            "hits": [
                {"index": h.index, "pauli": h.text, "value": h.value, "relative": h.value / self.peak}
                for h in self.hits
            ],
            **({"meta": self.meta} if self.meta else {}),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)


def rank_columns(model: QuadraticNuSVC, k: int) -> list:
    """Top-``k`` column indices by screening weight, descending, ties by lower index."""
    if k < 1:
        raise ValueError("k must be at least 1")
    w = model.column_weights()
    order = np.lexsort((np.arange(w.size), -w))
    return [int(i) for i in order[: min(k, w.size)]]


def _noise_scale(values: np.ndarray) -> float:
    a = np.abs(values)
    return float(_MAD_SCALE * np.median(a))


def extract_features(column: CoefficientColumn, r: int, n: int, rho: float = DEFAULT_RHO,
                     cluster_sites=None, noise_sigmas: float = NOISE_SIGMAS) -> FeatureReport:
    """Entries with ``|value| >= rho * max|value|``, decoded and sorted by magnitude."""
    if not 0 < rho < 1:
        raise ValueError("rho must lie in (0, 1)")
    values = np.asarray(column.values, dtype=float)
    if values.size != feature_dim(r, n):
        raise ValueError(f"column length {values.size} does not match dim({r}, {n})")
    peak = float(np.abs(values).max()) if values.size else 0.0
    noise = _noise_scale(values)
    if peak == 0.0 or peak < noise_sigmas * noise:
        return FeatureReport(column, [], rho * peak, rho, r, n, no_signal=True, noise_scale=noise)
    threshold = rho * peak
    idx = np.nonzero(np.abs(values) >= threshold)[0]
    idx = idx[np.lexsort((idx, -np.abs(values[idx])))]
    hits = []
    for mu in idx:
        sites, comps = monomial_decode(int(mu), r, n)
        hits.append(FeatureHit(int(mu), sites, comps, float(values[mu]),
                               render_pauli((sites, comps), cluster_sites)))
    return FeatureReport(column, hits, threshold, rho, r, n, noise_scale=noise)


def feature_count(model: QuadraticNuSVC, r: int, n: int, rho: float = DEFAULT_RHO, k: int = 8) -> tuple:
    """``N_f``: distinct hits over the top ``min(k, dim)`` columns, with the hit set."""
    found = set()
    for nu_bar in rank_columns(model, min(k, feature_dim(r, n))):
        rep = extract_features(CoefficientColumn(nu_bar, model.coefficient_column(nu_bar)), r, n, rho)
        found.update(h.index for h in rep.hits)
    return len(found), sorted(found)


def report_table(report: FeatureReport) -> str:
    head = f"column {report.column.nu_bar} ({report.column_text}), rho={report.rho:g}"
    if report.no_signal:
        return head + "\n  no signal\n"
    width = max(len(h.text) for h in report.hits)
    lines = [head, f"  {'index':>7}  {'pauli':<{width}}  {'value':>12}"]
    for h in report.hits:
        lines.append(f"  {h.index:>7}  {h.text:<{width}}  {h.value:>12.5e}")
    return "\n".join(lines) + "\n"


def write_column_csv(path, column: CoefficientColumn):
    with Path(path).open("w", newline="", encoding="ascii") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["index", "value"])
        for i, v in enumerate(np.asarray(column.values, dtype=float)):
            w.writerow([i, repr(float(v))])


def encode_pattern(text: str, r: int, n: int) -> int:
    """Flat index of a monomial written as within-cluster Pauli text, e.g. ``"Z0 X1 Z2"``."""
    sites, comps = parse_pauli(text)
    return monomial_encode(sites, comps, r, n)
