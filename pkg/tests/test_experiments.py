import math

import numpy as np
import pytest

from tksvm.experiments import (
    bench_point,
    crossing_shots,
    derive_seed,
    generate_snapshots,
    grid_points,
    matched_random,
    parse_bloch_pattern,
    phase_graph_from_snapshots,
    split_holdout,
    top_features,
    train_against_random,
)
from tksvm.features import ClusterSpec
from tksvm.quantum import chain, square_link


def test_derive_seed_streams():
    assert derive_seed(5, 1) == derive_seed(5, 1)
    assert len({derive_seed(5, 1), derive_seed(5, 2), derive_seed(6, 1), derive_seed(5, 1, 0)}) == 4
    assert 0 <= derive_seed(2**40, 3) < 2**63


def test_bloch_pattern():
    np.testing.assert_array_equal(parse_bloch_pattern("+z,-z", 3), [[0, 0, 1], [0, 0, -1], [0, 0, 1]])
    np.testing.assert_array_equal(parse_bloch_pattern("x", 2), [[1, 0, 0], [1, 0, 0]])
    with pytest.raises(ValueError):
        parse_bloch_pattern("+w", 2)


def test_generate_sources_and_determinism():
    lat = chain(6)
    for source in ("random", "product", "cluster-chain"):
        a = generate_snapshots(source, lat, 50, 3)
        b = generate_snapshots(source, lat, 50, 3)
        np.testing.assert_array_equal(a.outcomes, b.outcomes)
        assert a.params["source"] == source
    assert generate_snapshots("cluster-chain", lat, 10, 0).params["method"] == "tableau"
    assert generate_snapshots("cluster-chain", lat, 10, 0, (0.5, 0.0)).params["method"] == "ed"
    toric = generate_snapshots("toric-code", square_link(2, 2), 10, 0, (0.1, 0.1))
    assert toric.params["method"] == "ed"


def test_generate_rejections():
    lat = chain(12)
    with pytest.raises(ValueError):
        generate_snapshots("cluster-chain", lat, 0, 0)
    with pytest.raises(ValueError):
        generate_snapshots("ising", lat, 10, 0)
    with pytest.raises(ValueError):
        generate_snapshots("cluster-chain", lat, 10, 0, (0.5, 0.0), method="tableau")
    with pytest.raises(ValueError):
        generate_snapshots("cluster-chain", chain(24), 10, 0, (0.5, 0.0))
    with pytest.raises(ValueError):
        generate_snapshots("cluster-chain", lat, 10, 0, method="dmrg")


def test_product_state_statistics():
    snaps = generate_snapshots("product", chain(4), 30_000, 1, bloch="+z,-z")
    counts = np.bincount(snaps.outcomes[:, 1], minlength=6) / 30_000
    # -z site: outcome 5 (down-z) with probability 1/3, outcome 4 never
    assert counts[4] == 0 and abs(counts[5] - 1 / 3) < 0.01


def test_matched_random():
    snaps = generate_snapshots("cluster-chain", chain(6), 40, 0)
    neg = matched_random(snaps, 0)
    assert neg.outcomes.shape == snaps.outcomes.shape
    assert not np.array_equal(neg.outcomes, snaps.outcomes)
    np.testing.assert_array_equal(matched_random(snaps, 0).outcomes, neg.outcomes)


def test_split_holdout():
    rng = np.random.default_rng(0)
    tr, te = split_holdout(10, 0.2, rng)
    assert len(te) == 2 and len(tr) == 8 and not set(tr) & set(te)
    assert len(split_holdout(3, 0.01, rng)[1]) == 1
    with pytest.raises(ValueError):
        split_holdout(1, 0.5, rng)


def test_train_cluster_against_random():
    lat = chain(12)
    snaps = generate_snapshots("cluster-chain", lat, 5000, 7)
    spec = ClusterSpec(lat, "chain-string", 3, True)
    res = train_against_random(snaps, spec, 3, seed=7)
    assert res.accuracy > 0.95
    assert res.group_size == 250 and res.n_train == 32 and res.n_test == 8
    assert res.meta["r"] == 3 and res.meta["test_accuracy"] == res.accuracy
    rep = top_features(res.model, 3, 3)[0]
    assert rep.column_text == "Z0 X1 Z2"
    again = train_against_random(snaps, spec, 3, seed=7)
    np.testing.assert_array_equal(again.model.dual_coef_, res.model.dual_coef_)


def test_grid_points_order():
    pts = grid_points((0, 1, 2), (5, 6, 2))
    assert pts == [(0.0, 5.0), (1.0, 5.0), (0.0, 6.0), (1.0, 6.0)]


def test_phase_graph_pipeline_small():
    lat = chain(6)
    spec = ClusterSpec(lat, "chain-string", 3, False)
    data = [generate_snapshots("product", lat, 2000, 1, bloch="+x"),
            generate_snapshots("product", lat, 2000, 2, bloch="+x"),
            generate_snapshots("product", lat, 2000, 3, bloch="+z")]
    g = phase_graph_from_snapshots(data, [(0,), (1,), (2,)], spec, 1, group_size=20)
    assert abs(g.biases[0, 1]) > 10
    assert abs(g.biases[0, 2]) < 2
    labels = g.partition().labels
    assert labels[0] == labels[1] != labels[2]
    with pytest.raises(ValueError):
        phase_graph_from_snapshots(data, [(0,)], spec, 1)


def test_bench_point_limits():
    assert bench_point(6, 3, 1000, 40, 40, 0) > 0.95
    assert bench_point(6, 3, 1, 40, 40, 0) < 0.8
    with pytest.raises(ValueError):
        bench_point(6, 3, 0, 10, 10, 0)


def test_crossing_shots():
    assert crossing_shots([10, 100], [0.6, 1.0]) == pytest.approx(10 ** 1.5)
    assert crossing_shots([100, 10], [1.0, 0.6]) == pytest.approx(10 ** 1.5)
    assert crossing_shots([10, 100], [0.9, 1.0]) == 10
    assert math.isnan(crossing_shots([10, 100], [0.5, 0.6]))
