import itertools

import networkx as nx
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from polylift.algebra import IndexSet, MatrixPolynomial, bouquet_of_graph, is_reduced
from polylift.catalog import ladder_polynomial
from polylift.errors import ValidationError
from polylift.graphview import (
    acyclic_ball_vertex,
    bicycle_free_radius,
    check_tree_decomposition,
    connected_in_infinite_lift,
    extend,
    folding_automaton,
    lift_graph,
    local_cover_check,
    random_walk_connectivity,
    tree_decomposition_ball,
)
from polylift.lifting import Signing, random_lift, signing_to_2lift
from polylift.spectra import adjacency_matrix

from conftest import random_self_adjoint
from oracles import folding_agreement, sparse_polynomial


def test_extension_matches_adjacency(rng):
    iset = IndexSet(1, 1)
    p = random_self_adjoint(iset, 2, 2, rng)
    L = random_lift(iset, 6, 0)
    chi = Signing.random(L, 1)
    np.testing.assert_allclose(extend(L, p).adjacency(), adjacency_matrix(L, p), atol=1e-12)
    np.testing.assert_allclose(extend(L, p, chi).adjacency(), adjacency_matrix(L, p, chi), atol=1e-12)


def test_extension_of_one_lift():
    iset = IndexSet(0, 1)
    p = MatrixPolynomial(iset, 2, {(1,): [[0, 1], [0, 0]], (2,): [[0, 0], [1, 0]], (): [[1, 0], [0, 0]]})
    L = random_lift(iset, 1, 0)
    np.testing.assert_allclose(extend(L, p).adjacency(), p.evaluate_at_ones())


def test_extension_three_matchings_regular():
    iset = IndexSet(3, 0)
    p = MatrixPolynomial(iset, 1, {(1,): 1, (2,): 1, (3,): 1})
    G = extend(random_lift(iset, 4, 2), p)
    assert np.all(G.adjacency().real.sum(axis=0) == 3)


def test_extension_rejects_non_self_adjoint():
    iset = IndexSet(0, 1)
    p = MatrixPolynomial(iset, 1, {(1,): 1})
    with pytest.raises(ValidationError):
        extend(random_lift(iset, 3, 0), p)


def test_k23_lift_locally_biregular():
    K = bouquet_of_graph(nx.complete_bipartite_graph(2, 3))
    L = random_lift(K.index_set, 200, 4)
    A = np.abs(extend(L, K.to_polynomial()).adjacency().real)
    deg = A.sum(axis=0).reshape(200, 5)
    assert np.all(deg[:, :2] == 3) and np.all(deg[:, 2:] == 2)


def test_extension_exports():
    iset = IndexSet(1, 0)
    G = extend(random_lift(iset, 2, 0), MatrixPolynomial(iset, 1, {(1,): 1}))
    assert G.to_tsv().splitlines()[0] == "u\tv\tre\tim\tword"
    assert len(G.to_tsv().splitlines()) == 3
    assert G.to_dot().startswith("digraph")


def test_bicycle_free_examples():
    assert bicycle_free_radius(nx.cycle_graph(10), 4) == 4
    bowtie = nx.Graph([(0, 1), (1, 2), (2, 0), (0, 3), (3, 4), (4, 0)])
    assert bicycle_free_radius(bowtie, 3) == 0
    assert bicycle_free_radius(nx.balanced_tree(2, 4), 5) == 5


def test_acyclic_ball_examples():
    assert acyclic_ball_vertex(nx.path_graph(10), 2) is not None
    assert acyclic_ball_vertex(nx.cycle_graph(6), 3) is None
    assert acyclic_ball_vertex(nx.balanced_tree(3, 3), 4) == 0


def test_self_loop_counts_as_cycle():
    G = nx.MultiGraph([(0, 1), (1, 1), (1, 2), (2, 2)])
    assert bicycle_free_radius(G, 3) == 0


@pytest.mark.parametrize("seed", range(6))
def test_two_lifts_keep_bicycle_free_radius(seed):
    iset = IndexSet(3, 0)
    base = random_lift(iset, 40, seed)
    lam = bicycle_free_radius(lift_graph(base), 4)
    for s in range(3):
        D = signing_to_2lift(base, Signing.random(base, [seed, s]))
        assert bicycle_free_radius(lift_graph(D), 4) >= lam


def test_folding_hand_trace():
    iset = IndexSet(0, 2)
    p = MatrixPolynomial(iset, 1, {(1, 2): 1})
    p = p + p.star()
    fa = folding_automaton(p)
    h, hi = fa.h(0), fa.h_inv(0)
    assert fa.accepts((h, 1, 2, 1, 2, hi))
    assert not fa.accepts((h, 1, hi))
    assert fa.accepts(())
    assert fa.is_deterministic()


@pytest.mark.parametrize("seed", range(10))
def test_folding_closed_under_inverse_and_concatenation(seed):
    p = sparse_polynomial(seed)
    fa = folding_automaton(p)
    iset = p.index_set
    loops = []
    for w in itertools.chain([()], itertools.product(iset.colors, repeat=2), itertools.product(iset.colors, repeat=3)):
        for k, l in itertools.product(range(p.r), repeat=2):
            q = (fa.h(k),) + tuple(w) + (fa.h_inv(l),)
            if fa.accepts(q):
                loops.append(q)
                assert fa.accepts(tuple(fa.inv(g) for g in reversed(q)))
    for a, b in itertools.islice(itertools.product(loops, repeat=2), 200):
        assert fa.accepts(a + b)


def test_connected_same_vertex():
    p = sparse_polynomial(3)
    assert connected_in_infinite_lift(p, ((), 0), ((), 0))


def test_k23_bouquet_components():
    p = bouquet_of_graph(nx.complete_bipartite_graph(2, 3)).to_polynomial()
    assert connected_in_infinite_lift(p, ((), 0), ((1,), 2))
    assert not connected_in_infinite_lift(p, ((), 0), ((1,), 0))


def test_ladder_connected():
    p = ladder_polynomial()
    for w in [(), (1,), (1, 1)]:
        if is_reduced(w, p.index_set):
            for k in range(p.r):
                assert connected_in_infinite_lift(p, ((), 0), (w, k))


def test_malformed_vertex():
    p = sparse_polynomial(1)
    with pytest.raises(ValidationError):
        connected_in_infinite_lift(p, ((), 0), ((), 99))
    with pytest.raises(ValidationError):
        connected_in_infinite_lift(p, ((), 0), "bad")


@pytest.mark.parametrize("seed", range(10))
def test_folding_agrees_with_bfs(seed):
    agree, total, _ = folding_agreement(seed)
    assert agree == total


def test_treewidth_linear_bouquet():
    K = bouquet_of_graph(nx.cycle_graph(4))
    p = K.to_polynomial()
    td = tree_decomposition_ball(p, 3)
    assert check_tree_decomposition(td) == []
    assert max(len(b) for b in td.bags.values()) <= (len(p.terms) + 1) * p.r


def test_treewidth_degree_three_term():
    iset = IndexSet(0, 2)
    p = MatrixPolynomial(iset, 1, {(1, 2, 3): 1})
    p = p + p.star()
    td = tree_decomposition_ball(p, 3)
    assert check_tree_decomposition(td) == []
    m = sum(len(w) for w in p.terms)
    assert max(len(b) for b in td.bags.values()) <= (m + 1) * p.r


def test_treewidth_depth_zero():
    p = bouquet_of_graph(nx.path_graph(3)).to_polynomial()
    td = tree_decomposition_ball(p, 0)
    nonempty = [b for b in td.bags.values() if b]
    assert len(nonempty) == 1 and len(nonempty[0]) == p.r


@given(st.integers(0, 10**6))
def test_tree_decomposition_axioms(seed):
    p = sparse_polynomial(seed)
    td = tree_decomposition_ball(p, 3)
    assert check_tree_decomposition(td) == []
    m = sum(max(len(w), 1) for w in p.terms)
    assert max(len(b) for b in td.bags.values()) <= (m + 1) * p.r


def test_random_walk_examples():
    ok, gap = random_walk_connectivity(np.array([[0, 1], [1, 0]]))
    assert ok and gap == pytest.approx(2)
    two = np.kron(np.eye(2), np.array([[0, 1], [1, 0]]))
    assert random_walk_connectivity(two)[0] is False
    ok, gap = random_walk_connectivity(nx.to_numpy_array(nx.cycle_graph(4)))
    assert ok and gap == pytest.approx(1)


def test_random_walk_isolated_vertex():
    assert random_walk_connectivity(np.zeros((1, 1)))[0] is True
    assert random_walk_connectivity(np.array([[0, 1, 0], [1, 0, 0], [0, 0, 0]]))[0] is False


def test_local_cover():
    iset = IndexSet(1, 1)
    p = random_self_adjoint(iset, 2, 2, np.random.default_rng(1))
    assert local_cover_check(random_lift(iset, 8, 0), p, 1)
    iset0 = IndexSet(0, 2)
    q = random_self_adjoint(iset0, 1, 2, np.random.default_rng(2))
    assert local_cover_check(random_lift(iset0, 1, 0), q, 3)
    assert local_cover_check(random_lift(iset, 50, 3), p, 2)
