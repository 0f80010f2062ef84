import numpy as np
import pytest

from chebcons.graphs import Graph, random_geometric
from chebcons.weights import (
    WeightKind,
    WeightMatrix,
    best_constant_weights,
    build_weights,
    dump_csv,
    laplacian,
    load_csv,
    local_degree_weights,
    nonsymmetric_weights,
    validate_assumption1,
    validate_assumption2,
)
from oracles import random_connected_adjacency


def path(n):
    return Graph(n, frozenset((i, i + 1) for i in range(n - 1)))


def from_adjacency(adj):
    n = adj.shape[0]
    return Graph(n, frozenset(zip(*np.nonzero(np.triu(adj, 1)))))


K2 = Graph(2, frozenset({(0, 1)}))
STAR3 = Graph(3, frozenset({(0, 1), (0, 2)}))


class TestLocalDegree:
    def test_path_example(self):
        a = local_degree_weights(path(3)).entries
        np.testing.assert_allclose(a[0], [2 / 3, 1 / 3, 0], atol=1e-15)
        np.testing.assert_allclose(a[1], [1 / 3, 1 / 3, 1 / 3], atol=1e-15)

    def test_two_nodes(self):
        np.testing.assert_allclose(local_degree_weights(K2).entries, [[0.5, 0.5], [0.5, 0.5]])

    def test_unit_eigenvector(self):
        g = random_geometric(25, 80, 20, seed=2)
        a = local_degree_weights(g).entries
        np.testing.assert_allclose(a @ np.ones(25), np.ones(25), atol=1e-12)
        assert np.linalg.eigvalsh(a)[-1] == pytest.approx(1.0)

    def test_immutable(self):
        w = local_degree_weights(path(3))
        with pytest.raises(ValueError):
            w.entries[0, 0] = 1.0


class TestBestConstant:
    def test_two_nodes(self):
        w = best_constant_weights(K2)
        assert w.meta["alpha"] == pytest.approx(0.5)
        np.testing.assert_allclose(w.entries, [[0.5, 0.5], [0.5, 0.5]])

    def test_star(self):
        w = best_constant_weights(STAR3)
        np.testing.assert_allclose(np.linalg.eigvalsh(laplacian(STAR3)), [0, 1, 3], atol=1e-12)
        assert w.meta["alpha_opt"] == pytest.approx(0.5)
        assert not w.meta["alpha_clamped"]

    def test_clamps_when_diagonal_would_go_negative(self):
        # star on 6 nodes: Laplacian spectrum {0, 1, 1, 1, 1, 6}, alpha_opt = 2/7 > 1/5
        g = Graph(6, frozenset((0, j) for j in range(1, 6)))
        w = best_constant_weights(g)
        assert w.meta["alpha_opt"] == pytest.approx(2 / 7)
        assert w.meta["alpha_clamped"]
        assert w.meta["alpha"] == pytest.approx(1 / 5)
        assert np.diag(w.entries).min() >= 0

    def test_disconnected(self):
        with pytest.raises(ValueError):
            best_constant_weights(Graph(4, frozenset({(0, 1), (2, 3)})))


class TestNonsymmetric:
    def test_path_middle_row(self):
        a = nonsymmetric_weights(path(3)).entries
        np.testing.assert_allclose(a[1], [1 / 3, 1 / 3, 1 / 3])
        np.testing.assert_allclose(a[0], [1 / 2, 1 / 2, 0])
        assert not nonsymmetric_weights(path(3)).is_symmetric

    def test_isolated_node(self):
        a = nonsymmetric_weights(Graph(3, frozenset({(0, 1)}))).entries
        assert a[2].tolist() == [0, 0, 1]

    def test_regular_graph_doubly_stochastic(self):
        ring = Graph(6, frozenset((i, (i + 1) % 6) for i in range(6)))
        a = nonsymmetric_weights(ring).entries
        np.testing.assert_allclose(a.sum(axis=0), 1)
        assert set(np.round(a[a > 0], 12)) == {round(1 / 3, 12)}


@pytest.mark.parametrize("kind", list(WeightKind))
def test_row_sums_on_random_graphs(kind):
    rng = np.random.default_rng(99)
    for _ in range(100):
        n = int(rng.integers(3, 20))
        g = from_adjacency(random_connected_adjacency(rng, n, p=0.3))
        a = build_weights(kind, g).entries
        assert np.abs(a.sum(axis=1) - 1).max() < 1e-12
        if kind is not WeightKind.NONSYMMETRIC:
            assert np.array_equal(a, a.T)
            vals = np.linalg.eigvalsh(a)
            # only the top eigenvalue has modulus one on a connected graph
            assert np.abs(vals[:-1]).max() < 1 - 1e-9


class TestValidators:
    def test_local_degree_passes(self):
        g = random_geometric(20, 60, 20, seed=1)
        w = local_degree_weights(g)
        assert validate_assumption1(w, g)
        assert validate_assumption2(w, g, 1e-3)

    def test_row_sum_failure(self):
        a = local_degree_weights(path(3)).entries.copy()
        a[0, 0] -= 0.1
        v = validate_assumption1(a, path(3))
        assert not v and "row sum" in v.reason

    def test_pattern_failure(self):
        a = np.full((3, 3), 1 / 3)
        v = validate_assumption1(a, path(3))
        assert not v and "pattern" in v.reason

    def test_zero_diagonal_failure(self):
        v = validate_assumption1(np.array([[0.0, 1.0], [1.0, 0.0]]), K2)
        assert not v and "diagonal" in v.reason

    def test_symmetry_failure(self):
        g = path(3)
        v = validate_assumption2(nonsymmetric_weights(g), g, 1e-3)
        assert not v and "symmetry" in v.reason

    def test_degeneracy_failure(self):
        a = np.array([[1 - 1e-9, 1e-9], [1e-9, 1 - 1e-9]])
        v = validate_assumption2(a, K2, 1e-3)
        assert not v and "degeneracy" in v.reason

    def test_epsilon_domain(self):
        with pytest.raises(ValueError):
            validate_assumption2(local_degree_weights(K2), K2, 1.0)


def test_kind_parse():
    assert WeightKind.parse("ld") is WeightKind.LOCAL_DEGREE
    assert WeightKind.parse("Best-Constant") is WeightKind.BEST_CONSTANT
    assert WeightKind.NONSYMMETRIC.short == "ns"
    with pytest.raises(ValueError):
        WeightKind.parse("optimal")


def test_csv_round_trip(tmp_path):
    g = random_geometric(15, 60, 20, seed=8)
    w = best_constant_weights(g)
    p = tmp_path / "w.csv"
    dump_csv(w, p)
    back = load_csv(p, WeightKind.BEST_CONSTANT)
    assert np.array_equal(back.entries, w.entries)


def test_rejects_non_square():
    with pytest.raises(ValueError):
        WeightMatrix(np.ones((2, 3)))
