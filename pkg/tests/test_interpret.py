import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tksvm.features import ClusterSpec, batch_feature_vectors, feature_dim, monomial_decode
from tksvm.interpret import (
    encode_pattern,
    extract_features,
    feature_count,
    parse_pauli,
    rank_columns,
    render_pauli,
    report_table,
    write_column_csv,
)
from tksvm.quantum import chain, random_snapshots
from tksvm.svm import CoefficientColumn, QuadraticNuSVC, coefficient_column


def spiky_column(dim, spikes, seed=0, noise=1e-3):
    values = np.random.default_rng(seed).normal(scale=noise, size=dim)
    for i, v in spikes.items():
        values[i] = v
    return CoefficientColumn(0, values)


def test_render_examples():
    assert render_pauli(((1, 2, 3), ("z", "x", "z"))) == "Z1 X2 Z3"
    assert render_pauli(((1,), ("x",))) == "X1"
    assert render_pauli(((0, 1), (1, 1)), cluster_sites=(7, 8)) == "Y7 Y8"


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 5).flatmap(lambda n: st.tuples(st.just(n), st.integers(1, n))), st.data())
def test_render_parse_roundtrip(nr, data):
    n, r = nr
    mu = data.draw(st.integers(0, feature_dim(r, n) - 1))
    sites, comps = monomial_decode(mu, r, n)
    text = render_pauli((sites, comps))
    assert parse_pauli(text) == (tuple(sites), tuple(comps))
    assert encode_pattern(text, r, n) == mu
    offset = tuple(s + 10 for s in range(n))
    assert parse_pauli(render_pauli((sites, comps), offset), offset) == (tuple(sites), tuple(comps))


def test_parse_rejects_garbage():
    with pytest.raises(ValueError):
        parse_pauli("Z1 Q2")


def test_extract_threshold_and_order():
    col = spiky_column(27, {20: 1.0, 5: -0.5, 7: 0.25, 9: 0.1})
    rep = extract_features(col, 3, 3, rho=0.2)
    assert [h.index for h in rep.hits] == [20, 5, 7]
    assert rep.hits[0].text == "Z0 X1 Z2"
    assert rep.hits[1].value == -0.5
    assert rep.threshold_used == pytest.approx(0.2)
    assert all(h.magnitude >= rep.threshold_used for h in rep.hits)
    assert not rep.no_signal


def test_extract_ties_by_index():
    col = spiky_column(27, {3: 1.0, 1: -1.0})
    assert [h.index for h in extract_features(col, 3, 3).hits] == [1, 3]


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**31), st.floats(0.01, 0.98), st.floats(0.0, 0.01))
def test_raising_rho_never_adds_hits(seed, rho, step):
    values = np.random.default_rng(seed).standard_cauchy(27)
    col = CoefficientColumn(0, values)
    low = {h.index for h in extract_features(col, 3, 3, rho, noise_sigmas=0).hits}
    high = {h.index for h in extract_features(col, 3, 3, rho + step, noise_sigmas=0).hits}
    assert high <= low


def test_zero_column_flags_no_signal():
    rep = extract_features(CoefficientColumn(4, np.zeros(27)), 3, 3)
    assert rep.no_signal and rep.hits == []
    assert "no signal" in report_table(rep)


def test_flat_noise_column_flags_no_signal():
    col = CoefficientColumn(0, np.random.default_rng(2).normal(size=405))
    assert extract_features(col, 4, 5).no_signal


def test_extract_validation():
    with pytest.raises(ValueError):
        extract_features(CoefficientColumn(0, np.ones(26)), 3, 3)
    with pytest.raises(ValueError):
        extract_features(CoefficientColumn(0, np.ones(27)), 3, 3, rho=1.0)


def test_report_outputs(tmp_path):
    col = spiky_column(27, {20: 1.0, 5: -0.5})
    col = CoefficientColumn(20, col.values)
    rep = extract_features(col, 3, 3)
    doc = json.loads(rep.to_json())
    assert doc["column"] == 20 and doc["column_pauli"] == "Z0 X1 Z2"
    assert [h["pauli"] for h in doc["hits"]] == rep.texts()
    assert doc["hits"][0]["relative"] == pytest.approx(1.0)
    table = report_table(rep)
    assert "Z0 X1 Z2" in table and table.count("\n") == 4
    path = tmp_path / "col.csv"
    write_column_csv(path, col)
    rows = path.read_text().splitlines()
    assert rows[0] == "index,value" and len(rows) == 28
    assert float(rows[21].split(",")[1]) == col.values[20]


def small_model(seed=0):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(80, 6))
    X[:40, 2] += 2.0
    return QuadraticNuSVC().fit(X, np.r_[np.ones(40), -np.ones(40)])


def test_rank_columns():
    model = small_model()
    assert rank_columns(model, 1) == [2]
    ranked = rank_columns(model, 10)
    assert len(ranked) == 6 and sorted(ranked) == list(range(6))
    w = model.column_weights()
    assert all(w[a] >= w[b] for a, b in zip(ranked, ranked[1:]))
    with pytest.raises(ValueError):
        rank_columns(model, 0)


def test_random_against_random_has_no_structure():
    lat = chain(12)
    spec = ClusterSpec(lat, "chain-string", 3, False)
    a = batch_feature_vectors(random_snapshots(lat, 20_000, 1), spec, 3, group_size=100)
    b = batch_feature_vectors(random_snapshots(lat, 20_000, 2), spec, 3, group_size=100)
    model = QuadraticNuSVC().fit(np.vstack([a, b]), np.r_[np.ones(200), -np.ones(200)])
    top = rank_columns(model, 1)[0]
    rep = extract_features(coefficient_column(model, top), 3, 3)
    assert rep.no_signal and rep.hits == []


def test_feature_count_union():
    rng = np.random.default_rng(1)
    X = rng.normal(scale=0.1, size=(200, 27))
    X[:100, 20] += 1.0
    model = QuadraticNuSVC().fit(X, np.r_[np.ones(100), -np.ones(100)])
    count, found = feature_count(model, 3, 3, rho=0.2)
    assert 20 in found and count == len(found) == len(set(found))
