import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tksvm.povm import outcome_probabilities, pauli6
from tksvm.quantum import (
    HamiltonianSpec,
    Lattice,
    PauliString,
    Snapshots,
    Statevector,
    chain,
    cluster_generators,
    cluster_statevector,
    dense_string,
    expectation_pauli_string,
    ground_state,
    odd_string,
    pauli_estimator,
    plaquette_operator,
    prepare_cluster_state,
    prepare_toric_code,
    product_statevector,
    random_snapshots,
    read_snapshots,
    sample_pauli6_statevector,
    sample_pauli6_tableau,
    sample_product,
    square_link,
    toric_logicals,
    vertex_operator,
    write_snapshots,
)
from tksvm.quantum.statevector import pauli_sum_matrix
from tksvm.quantum.models import hamiltonian_terms


# lattice ---------------------------------------------------------------

def test_lattice_site_counts():
    assert chain(12).site_count == 12
    assert square_link(3, 3).site_count == 18
    assert square_link(2, 4).site_count == 16


def test_lattice_rejects_bad_extents():
    with pytest.raises(ValueError):
        Lattice("square-link", (1, 3), "periodic")
    with pytest.raises(ValueError):
        Lattice("chain", (3, 3))
    with pytest.raises(ValueError):
        Lattice("hexagonal", (3,))


def test_square_link_bonds_are_consistent():
    lat = square_link(3, 3)
    seen = itertools.chain.from_iterable(lat.vertex_bonds(x, y) for x, y in lat.vertices())
    counts = np.bincount(list(seen), minlength=lat.site_count)
    # every bond joins exactly two vertices
    assert np.all(counts == 2)
    seen = itertools.chain.from_iterable(lat.plaquette_bonds(x, y) for x, y in lat.vertices())
    assert np.all(np.bincount(list(seen), minlength=lat.site_count) == 2)


# Pauli strings -----------------------------------------------------------

def test_pauli_parse_roundtrip():
    p = PauliString.parse("-Z0 X1 Z2")
    assert p.sign == -1 and p.weight == 3
    assert str(p) == "-Z0 X1 Z2"
    assert PauliString.parse(str(p)) == p


def test_pauli_rejects_duplicate_sites():
    with pytest.raises(ValueError):
        PauliString(((0, "X"), (0, "Z")))


def test_stabilizer_products():
    # B1 B2 = Z0 X1 Z2 . Z1 X2 Z3 = Z0 (XZ)(ZX) Z3 = Z0 Y1 Y2 Z3
    b1, b2 = cluster_generators(5)[1:3]
    assert b1 * b2 == PauliString.parse("Z0 Y1 Y2 Z3")
    with pytest.raises(ValueError):
        PauliString.parse("X0") * PauliString.parse("Z0")


# states ----------------------------------------------------------------

def _random_pauli(rng, n, max_weight):
    w = int(rng.integers(1, max_weight + 1))
    sites = rng.choice(n, size=w, replace=False)
    return PauliString(tuple((int(s), "XYZ"[int(rng.integers(3))]) for s in sites))


def test_cluster_state_small_examples():
    tab = prepare_cluster_state(3)
    assert tab.expectation(PauliString.parse("Z0 X1 Z2")) == 1
    assert tab.expectation(PauliString.parse("X0 Z1")) == 1
    assert tab.expectation(PauliString.parse("Z1 X2")) == 1
    assert tab.is_valid()
    with pytest.raises(ValueError):
        prepare_cluster_state(2)


def test_cluster_tableau_matches_dense_circuit():
    L = 12
    tab = prepare_cluster_state(L)
    psi = cluster_statevector(L)
    for g in cluster_generators(L):
        assert tab.expectation(g) == 1
        assert psi.expectation(g) == pytest.approx(1.0, abs=1e-12)
    rng = np.random.default_rng(1)
    for _ in range(200):
        p = _random_pauli(rng, 8, 5)
        assert tab.expectation(p) == pytest.approx(psi.expectation(p), abs=1e-12)


def test_periodic_cluster_ring():
    tab = prepare_cluster_state(6, periodic=True)
    assert tab.expectation(PauliString.parse("Z0 X1 Z2")) == 1
    assert tab.expectation(PauliString.parse("Z4 X5 Z0")) == 1
    assert tab.expectation(PauliString.parse("X0 Z1")) == 0


def test_string_order_signs():
    tab = prepare_cluster_state(9)
    assert tab.expectation(odd_string(5, 1)) == 1
    assert odd_string(5, 1) == PauliString.parse("Z1 X2 X4 Z5")
    dense = dense_string(5, 1)
    assert dense.sites == (1, 2, 3, 4, 5)
    assert tab.expectation(dense) == 1


def test_toric_code_examples():
    tab = prepare_toric_code(3, 3)
    assert tab.n == 18 and tab.is_valid()
    tab = prepare_toric_code(2, 2)
    lat = square_link(2, 2)
    for x, y in lat.vertices():
        assert tab.expectation(vertex_operator(lat, x, y)) == 1
        assert tab.expectation(plaquette_operator(lat, x, y)) == 1
    for logical in toric_logicals(lat):
        assert tab.expectation(logical) == 1
    prod = vertex_operator(lat, 0, 0)
    for x, y in lat.vertices()[1:]:
        prod = prod * vertex_operator(lat, x, y)
    assert prod.weight == 0
    with pytest.raises(ValueError):
        prepare_toric_code(1, 3)


def test_expectation_oracle_examples():
    L = 4
    plus = product_statevector([(1, 0, 0)] * L)
    assert expectation_pauli_string(plus, PauliString.parse("X0")) == pytest.approx(1.0)
    with pytest.raises(IndexError):
        expectation_pauli_string(plus, PauliString.parse("X7"))
    with pytest.raises(IndexError):
        expectation_pauli_string(prepare_cluster_state(4), PauliString.parse("X7"))


def test_ground_state_pure_cluster():
    psi = ground_state(HamiltonianSpec.cluster(8))
    for k in range(1, 7):
        assert psi.expectation(PauliString(((k - 1, "Z"), (k, "X"), (k + 1, "Z")))) == pytest.approx(1, abs=1e-8)


def test_ground_state_paramagnet():
    psi = ground_state(HamiltonianSpec.cluster(8, 50.0, 0.0))
    for i in range(8):
        assert psi.expectation(PauliString(((i, "X"),))) > 1 - 1e-3


def test_ground_state_toric_with_fields_residual():
    spec = HamiltonianSpec.toric(2, 2, 0.3, 0.3)
    psi = ground_state(spec)
    ham = pauli_sum_matrix(hamiltonian_terms(spec), 8).toarray()
    exact = np.linalg.eigvalsh(ham)[0]
    # pinning shifts the energy by at most 2 * 1e-6
    assert psi.energy == pytest.approx(exact, abs=1e-5)
    assert psi.energy < -8
    vec = psi.amplitudes
    assert np.linalg.norm(ham @ vec - (vec.conj() @ ham @ vec).real * vec) < 1e-4


def test_hamiltonian_spec_validation():
    with pytest.raises(ValueError):
        HamiltonianSpec.cluster(8, -1.0, 0.0)
    with pytest.raises(ValueError):
        HamiltonianSpec.toric(2, 2, -0.1, 0.0)
    with pytest.raises(ValueError):
        HamiltonianSpec("cluster-chain", (0, 0), chain(8, "periodic"))


def test_ground_state_too_large():
    with pytest.raises(ValueError):
        ground_state(HamiltonianSpec.cluster(24))


# sampling ----------------------------------------------------------------

def _chi2_ok(counts, probs, shots):
    from scipy.stats import chisquare

    mask = probs > 0
    assert np.all(counts[~mask] == 0)
    return chisquare(counts[mask], probs[mask] * shots).pvalue > 1e-4


def test_tableau_single_qubit_zero():
    from tksvm.quantum import StabilizerTableau

    shots = 100_000
    snaps = sample_pauli6_tableau(StabilizerTableau.zero_state(1), shots, 11)
    counts = np.bincount(snaps.outcomes[:, 0], minlength=6)
    assert _chi2_ok(counts, outcome_probabilities((0, 0, 1), pauli6()), shots)


def test_tableau_sampler_leaves_state():
    tab = prepare_cluster_state(5)
    before = (tab.x.copy(), tab.z.copy(), tab.r.copy())
    sample_pauli6_tableau(tab, 100, 0)
    for a, b in zip(before, (tab.x, tab.z, tab.r)):
        np.testing.assert_array_equal(a, b)


def test_sampler_determinism():
    tab = prepare_cluster_state(6)
    a = sample_pauli6_tableau(tab, 3000, 42).outcomes
    b = sample_pauli6_tableau(tab, 3000, 42).outcomes
    c = sample_pauli6_tableau(tab, 3000, 42, threads=3).outcomes
    np.testing.assert_array_equal(a, b)
    np.testing.assert_array_equal(a, c)
    assert not np.array_equal(a, sample_pauli6_tableau(tab, 3000, 43).outcomes)
    lat = chain(4)
    np.testing.assert_array_equal(random_snapshots(lat, 500, 3).outcomes, random_snapshots(lat, 500, 3).outcomes)


def test_cluster_estimator_l3():
    snaps = sample_pauli6_tableau(prepare_cluster_state(3), 60_000, 9)
    vals = pauli_estimator(snaps, PauliString.parse("Z0 X1 Z2"))
    assert abs(vals.mean() - 1 / 27) < 4 * vals.std() / np.sqrt(len(vals))


def test_statevector_product_plus():
    shots = 60_000
    snaps = sample_pauli6_statevector(product_statevector([(1, 0, 0)] * 3), shots, 5)
    probs = np.array([1 / 3, 0, 1 / 6, 1 / 6, 1 / 6, 1 / 6])
    for site in range(3):
        assert _chi2_ok(np.bincount(snaps.outcomes[:, site], minlength=6), probs, shots)


def test_statevector_ghz_zz():
    amp = np.zeros(4, complex)
    amp[0] = amp[3] = 1 / np.sqrt(2)
    snaps = sample_pauli6_statevector(Statevector(2, amp), 100_000, 8)
    vals = pauli_estimator(snaps, PauliString.parse("Z0 Z1"))
    assert abs(vals.mean() - 1 / 9) < 4 * vals.std() / np.sqrt(len(vals))


def test_samplers_agree_on_cluster_state():
    from scipy.stats import chi2_contingency

    shots = 100_000
    a = sample_pauli6_tableau(prepare_cluster_state(4), shots, 1).outcomes
    b = sample_pauli6_statevector(cluster_statevector(4), shots, 2).outcomes
    code = lambda o: (o.astype(np.int64) * 6 ** np.arange(o.shape[1])).sum(axis=1)  # noqa: E731
    ca = np.bincount(code(a), minlength=6**4)
    cb = np.bincount(code(b), minlength=6**4)
    keep = (ca + cb) > 0
    # joint law over all 6^4 outcomes: homogeneity test (the raw joint TV is noise-dominated here)
    assert chi2_contingency(np.vstack([ca[keep], cb[keep]]))[1] > 1e-4
    # per-site and nearest-neighbour marginals: total variation below 0.02
    for sites in [(0,), (1,), (2,), (3,), (0, 1), (1, 2), (2, 3)]:
        ma = np.bincount(code(a[:, sites]) if len(sites) > 1 else a[:, sites[0]], minlength=36) / shots
        mb = np.bincount(code(b[:, sites]) if len(sites) > 1 else b[:, sites[0]], minlength=36) / shots
        assert 0.5 * np.abs(ma - mb).sum() < 0.02


def test_product_sampler_examples():
    shots = 50_000
    sx = lambda s, i: pauli_estimator(s, PauliString(((i, "X"),)))  # noqa: E731
    up = sample_product([(1, 0, 0)] * 4, shots, 3)
    for i in range(4):
        assert sx(up, i).mean() == pytest.approx(1 / 3, abs=0.01)
    alt = sample_product([(1, 0, 0), (-1, 0, 0)] * 2, shots, 4)
    stag = np.mean([(-1) ** i * sx(alt, i).mean() for i in range(4)])
    assert stag == pytest.approx(1 / 3, abs=0.01)
    mixed = sample_product([(0, 0, 0)] * 2, shots, 5)
    freq = np.bincount(mixed.outcomes.ravel(), minlength=6) / mixed.outcomes.size
    np.testing.assert_allclose(freq, 1 / 6, atol=0.01)
    with pytest.raises(ValueError):
        sample_product([(1, 1, 0)], 10, 0)


def test_random_snapshots_uniform():
    snaps = random_snapshots(chain(5), 60_000, 7)
    for site in range(5):
        assert _chi2_ok(np.bincount(snaps.outcomes[:, site], minlength=6), np.full(6, 1 / 6), 60_000)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_tableau_validity_after_measurements(seed):
    rng = np.random.default_rng(seed)
    tab = prepare_cluster_state(6)
    for _ in range(10):
        tab.measure(int(rng.integers(6)), int(rng.integers(3)), int(rng.integers(2)))
        assert tab.is_valid()


def test_snapshot_file_roundtrip(tmp_path):
    snaps = sample_pauli6_tableau(prepare_toric_code(2, 2), 20, 5, square_link(2, 2))
    path = tmp_path / "t.snap"
    write_snapshots(path, snaps, {"hx": 0.0})
    text = path.read_text()
    first = text.splitlines()[0]
    assert first.startswith("#tksvm v1 povm=pauli6 lattice=square-link L=2x2 boundary=periodic seed=5")
    assert len(text.splitlines()) == 21 and text.endswith("\n")
    back = read_snapshots(path)
    np.testing.assert_array_equal(back.outcomes, snaps.outcomes)
    assert back.lattice == snaps.lattice and back.seed == 5 and back.params["hx"] == 0.0


def test_snapshot_file_rejects_garbage(tmp_path):
    path = tmp_path / "bad.snap"
    path.write_text("hello\n1 2 3\n")
    with pytest.raises(ValueError):
        read_snapshots(path)


def test_snapshots_validate_indices():
    with pytest.raises(ValueError):
        Snapshots(chain(3), np.array([[0, 1, 6]]))
    with pytest.raises(ValueError):
        Snapshots(chain(3), np.array([[0, 1]]))
