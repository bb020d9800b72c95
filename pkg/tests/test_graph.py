"""Graph layer: adjacency, connectivity, shape flags, canonical forms.

Connectivity and local-patch connectivity are checked against brute-force
oracles over all small graphs, not just hand-picked cases.
"""

import itertools

import pytest
from hypothesis import given, strategies as st

from dissensus.errors import DegenerateTopologyError, InvalidPatchError
from dissensus.graph import (
    IdAllocator,
    Topology,
    canonical_form,
    canonical_key,
    classify,
    cycle_count,
    is_connected,
    is_locally_connected,
    norm_edge,
)


def all_graphs(nodes):
    """Every simple graph on the given node list, as edge lists."""
    pairs = list(itertools.combinations(sorted(nodes), 2))
    for r in range(len(pairs) + 1):
        for chosen in itertools.combinations(pairs, r):
            yield list(chosen)


def reachable_brute(nodes, edges):
    """Transitive closure by repeated relaxation; independent of BFS."""
    nodes = list(nodes)
    if not nodes:
        return True
    comp = {u: u for u in nodes}
    changed = True
    while changed:
        changed = False
        for u, v in edges:
            root = min(comp[u], comp[v])
            if comp[u] != root or comp[v] != root:
                comp[u] = comp[v] = root
                changed = True
    return len({comp[u] for u in nodes}) == 1


class TestNormEdge:
    def test_orders_endpoints(self):
        assert norm_edge(5, 2) == (2, 5)
        assert norm_edge(2, 5) == (2, 5)

    def test_rejects_self_loop(self):
        with pytest.raises(ValueError):
            norm_edge(3, 3)


class TestTopologyBasics:
    def test_add_edge_creates_endpoints(self):
        g = Topology()
        g.add_edge(1, 2)
        assert g.nodes() == [1, 2]
        assert g.has_edge(2, 1)

    def test_add_edge_idempotent(self):
        g = Topology([1, 2], [(1, 2), (2, 1), (1, 2)])
        assert g.edge_count() == 1

    def test_remove_node_drops_incident_edges(self):
        g = Topology([1, 2, 3], [(1, 2), (2, 3)])
        g.remove_node(2)
        assert g.nodes() == [1, 3]
        assert g.edges() == []
        g.check_symmetry()

    def test_copy_is_independent(self):
        g = Topology([1, 2], [(1, 2)])
        h = g.copy()
        h.add_edge(1, 3)
        assert g != h
        assert not g.has_edge(1, 3)

    def test_serialization_round_trip(self):
        g = Topology([1, 2, 3, 9], [(1, 2), (2, 3)])
        assert Topology.from_lines(g.to_lines()) == g

    def test_from_lines_rejects_garbage(self):
        with pytest.raises(ValueError):
            Topology.from_lines(["nodes 1 2", "1 2 3"])


def test_id_allocator_monotone_and_fresh():
    alloc = IdAllocator()
    alloc.reserve_above([4, 1, 2])
    ids = [alloc.fresh() for _ in range(3)]
    assert ids == [5, 6, 7]
    alloc.reserve_above([3])  # below the watermark: no effect
    assert alloc.fresh() == 8


def test_connectivity_matches_brute_force_on_all_small_graphs():
    for n in range(0, 6):
        nodes = list(range(1, n + 1))
        for edges in all_graphs(nodes):
            g = Topology(nodes, edges)
            assert is_connected(g) == reachable_brute(nodes, edges), (nodes, edges)


def test_local_connectivity_of_every_star_patch():
    # a star on any neighbor set is connected no matter which center is picked
    for n in range(1, 6):
        lam = set(range(1, n + 1))
        for center in lam:
            eps = [norm_edge(center, j) for j in lam if j != center]
            assert is_locally_connected(lam, eps)


def test_local_connectivity_brute_force_oracle():
    for n in range(1, 5):
        lam = list(range(1, n + 1))
        for eps in all_graphs(lam):
            assert is_locally_connected(lam, eps) == reachable_brute(lam, eps)


def test_local_connectivity_rejects_outside_endpoint():
    with pytest.raises(InvalidPatchError):
        is_locally_connected({1, 2}, [(1, 3)])


class TestClassify:
    def test_triangle_is_complete_and_hole(self):
        shape = classify(Topology([1, 2, 3], [(1, 2), (2, 3), (1, 3)]))
        assert shape.complete and shape.hole and not shape.chain

    def test_four_cycle_is_hole_only(self):
        shape = classify(Topology(range(4), [(0, 1), (1, 2), (2, 3), (0, 3)]))
        assert shape.hole and not shape.complete and not shape.chain

    def test_path_is_chain(self):
        shape = classify(Topology(range(4), [(0, 1), (1, 2), (2, 3)]))
        assert shape.chain and not shape.hole and not shape.complete

    def test_single_edge_is_chain_and_complete(self):
        shape = classify(Topology([1, 2], [(1, 2)]))
        assert shape.chain and shape.complete and not shape.hole

    def test_isolated_node_is_complete(self):
        shape = classify(Topology([7]))
        assert shape.complete and not shape.hole and not shape.chain

    def test_empty_graph_is_degenerate(self):
        with pytest.raises(DegenerateTopologyError):
            classify(Topology())

    def test_disconnected_pair_of_triangles_has_no_flags(self):
        g = Topology(range(6), [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)])
        shape = classify(g)
        assert not (shape.complete or shape.hole or shape.chain)

    def test_hole_and_chain_edge_counts(self):
        # every flagged graph must have the exact edge count the flag implies
        for n in range(1, 6):
            nodes = list(range(n))
            for edges in all_graphs(nodes):
                g = Topology(nodes, edges)
                shape = classify(g)
                if shape.hole:
                    assert g.edge_count() == n
                if shape.chain:
                    assert g.edge_count() == n - 1


def test_cycle_count_examples():
    tri = Topology(range(3), [(0, 1), (1, 2), (0, 2)])
    assert cycle_count(tri) == 1
    tree = Topology(range(4), [(0, 1), (1, 2), (1, 3)])
    assert cycle_count(tree) == 0


class TestCanonical:
    def test_key_stable_across_insertion_order(self):
        x = {1: 3, 2: 5, 3: 1}
        g1 = Topology([1, 2, 3], [(1, 2), (2, 3)])
        g2 = Topology([3, 1, 2], [(3, 2), (2, 1)])
        assert canonical_key(g1, x) == canonical_key(g2, dict(reversed(x.items())))

    def test_key_distinguishes_states(self):
        g = Topology([1, 2], [(1, 2)])
        assert canonical_key(g, {1: 3, 2: 5}) != canonical_key(g, {1: 5, 2: 3})

    def test_form_requires_matching_domain(self):
        g = Topology([1, 2], [(1, 2)])
        with pytest.raises(ValueError):
            canonical_form(g, {1: 3})


@given(st.sets(st.tuples(st.integers(0, 8), st.integers(0, 8)).filter(lambda e: e[0] != e[1]),
               max_size=15))
def test_symmetry_and_counts_hold_for_any_edge_set(raw_edges):
    g = Topology()
    for u, v in raw_edges:
        g.add_edge(u, v)
    g.check_symmetry()
    assert g.edge_count() == len({norm_edge(u, v) for u, v in raw_edges})
    assert all(u < v for u, v in g.edges())
