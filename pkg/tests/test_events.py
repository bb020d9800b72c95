"""Critical events: state splits, rewiring rules, patch validation, application.

The death and duplication admissibility conditions are checked against
brute-force enumeration of every candidate patch on small neighborhoods,
so `validate_patch` is tested as a whole predicate, not just on examples.
"""

import itertools

import pytest
from hypothesis import given, settings, strategies as st

from dissensus.errors import ConfigError, RuleViolationError
from dissensus.events import (
    EventKind,
    TopologyPatch,
    apply_death,
    apply_duplication,
    death_clique_rule,
    death_star_rule,
    dup_full_rule,
    dup_partition_rule,
    pick_jstar,
    split_state,
    validate_patch,
)
from dissensus.graph import Topology, is_connected, norm_edge
from dissensus.protocol import SystemState
from dissensus.streams import PICK, SplitMix


def make_state(x, edges, b):
    return SystemState(x=dict(x), g=Topology(x, edges), b=b)


# -- state split -----------------------------------------------------------


@pytest.mark.parametrize("b,alpha,beta", [(8, 4, 4), (9, 5, 4), (2, 1, 1), (3, 2, 1)])
def test_split_state_half(b, alpha, beta):
    assert split_state(b, "half") == (alpha, beta)


def test_split_state_fixed_alpha():
    assert split_state(8, 6) == (6, 2)


@pytest.mark.parametrize("b,policy", [(1, "half"), (0, "half"), (8, 8), (8, 3), (9, 2)])
def test_split_state_rejects_degenerate(b, policy):
    with pytest.raises(ConfigError):
        split_state(b, policy)


# -- rule constructors -----------------------------------------------------


def test_death_star_rule_example():
    p = death_star_rule(9, {2, 5, 7}, jstar=5)
    assert p.kind is EventKind.DEATH
    assert set(p.eps) == {(2, 5), (5, 7)}
    assert p.inherit[5] == frozenset({2, 7})
    assert p.inherit[2] == p.inherit[7] == frozenset({5})


def test_death_star_rule_rejects_foreign_center():
    with pytest.raises(RuleViolationError):
        death_star_rule(9, {2, 5}, jstar=7)


def test_death_clique_rule_example():
    p = death_clique_rule(9, {1, 2, 3})
    assert set(p.eps) == {(1, 2), (1, 3), (2, 3)}


def test_death_rules_single_neighbor():
    # sole survivor inherits nothing; the patch is a connected singleton
    for p in (death_star_rule(9, {4}, jstar=4), death_clique_rule(9, {4})):
        assert p.eps == frozenset()
        assert p.lam == frozenset({4})


def test_pick_jstar_max_state_breaks_ties_by_id():
    x = {2: 5, 5: 7, 7: 7}
    assert pick_jstar({2, 5, 7}, x, "max_state") == 5


def test_pick_jstar_random_is_seeded():
    x = {1: 1, 2: 1, 3: 1}
    a = pick_jstar({1, 2, 3}, x, "random", SplitMix(0, 2, 9))
    b = pick_jstar({1, 2, 3}, x, "random", SplitMix(0, 2, 9))
    assert a == b


def test_dup_partition_triangle_becomes_square():
    # a degree-2 parent splits its neighbors one each; the 3-cycle grows to a 4-cycle
    p = dup_partition_rule(2, {1, 3}, (4, 5), 4, 4, SplitMix(0, PICK, 1))
    assert len(p.lam_a) == len(p.lam_b) == 2
    assert 5 in p.lam_a and 4 in p.lam_b
    assert len(p.eps) == 3  # one inherited edge per child plus the sibling link


def test_dup_partition_half_size_pick():
    rng = SplitMix(3, PICK, 1)
    p = dup_partition_rule(0, {1, 2, 3, 4}, (10, 11), 4, 4, rng)
    assert len(p.lam_a - {11}) == 2  # floor(4/2) picked neighbors


def test_dup_partition_childless_parent():
    p = dup_partition_rule(1, set(), (2, 3), 3, 2, SplitMix(0, PICK, 1))
    assert p.lam_a == frozenset({3}) and p.lam_b == frozenset({2})
    assert p.eps == frozenset({(2, 3)})


def test_dup_full_k3_to_k4():
    p = dup_full_rule(1, {2, 3}, (4, 5), 4, 4)
    assert p.lam_a == frozenset({2, 3, 5})
    assert p.lam_b == frozenset({2, 3, 4})
    assert len(p.eps) == 5


# -- validation against brute-force condition evaluation -------------------


def subsets(xs):
    xs = sorted(xs)
    for r in range(len(xs) + 1):
        yield from map(frozenset, itertools.combinations(xs, r))


def test_death_conditions_brute_force():
    """validate_patch must agree with direct evaluation of the two conditions:
    the inherited sets cover all neighbors, and the patch graph is connected."""
    subject = 0
    for k in range(1, 4):
        neighbors = frozenset(range(1, k + 1))
        g = Topology({subject} | neighbors, [(subject, j) for j in neighbors])
        choices = [list(subsets(neighbors - {j})) for j in sorted(neighbors)]
        for combo in itertools.product(*choices):
            inherit = dict(zip(sorted(neighbors), combo))
            eps = frozenset(
                norm_edge(j, i) for j, lj in inherit.items() for i in lj
            )
            p = TopologyPatch(
                kind=EventKind.DEATH, subject=subject, lam=neighbors,
                eps=eps, inherit=inherit,
            )
            union = frozenset().union(*inherit.values()) if inherit else frozenset()
            covers = union == neighbors or len(neighbors) == 1
            patch_graph = Topology(neighbors, eps)
            expected_ok = covers and is_connected(patch_graph)
            assert (validate_patch(p, g, b=8) is None) == expected_ok, inherit


def test_duplication_union_rule_brute_force():
    """Either the children's sets cover neighbors plus both children, or they
    cover exactly the neighbors and overlap; everything else is rejected."""
    subject, b = 0, 8
    c1, c2 = 10, 11
    for k in range(0, 4):
        neighbors = frozenset(range(1, k + 1))
        g = Topology({subject} | neighbors, [(subject, j) for j in neighbors])
        for lam_a in subsets(neighbors | {c2}):
            for lam_b in subsets(neighbors | {c1}):
                eps = frozenset(norm_edge(c1, i) for i in lam_a) | frozenset(
                    norm_edge(c2, i) for i in lam_b
                )
                p = TopologyPatch(
                    kind=EventKind.DUPLICATION, subject=subject,
                    lam=neighbors | {c1, c2}, eps=eps, children=(c1, c2),
                    lam_a=lam_a, lam_b=lam_b, alpha=4, beta=4,
                )
                union = lam_a | lam_b
                expected_ok = union == neighbors | {c1, c2} or (
                    union == neighbors and bool(lam_a & lam_b)
                )
                assert (validate_patch(p, g, b) is None) == expected_ok, (lam_a, lam_b)


def test_validate_patch_rejects_stale_children():
    g = Topology([0, 1, 2], [(0, 1), (1, 2)])
    p = dup_full_rule(0, {1}, (2, 5), 4, 4)  # child id 2 already lives
    assert validate_patch(p, g, 8) == "dup-children-not-fresh"


def test_validate_patch_rejects_bad_split():
    g = Topology([0, 1], [(0, 1)])
    p = dup_full_rule(0, {1}, (4, 5), 5, 4)  # 5 + 4 != 8
    assert validate_patch(p, g, 8) == "dup-split-sum"


def test_validate_patch_rejects_orphaning_union():
    g = Topology([0, 1, 2], [(0, 1), (0, 2)])
    p = TopologyPatch(
        kind=EventKind.DUPLICATION, subject=0, lam=frozenset({1, 2, 4, 5}),
        eps=frozenset({(1, 4), (2, 5)}), children=(4, 5),
        lam_a=frozenset({1}), lam_b=frozenset({2}), alpha=4, beta=4,
    )
    assert validate_patch(p, g, 8) == "dup-union-rule"


# -- application -----------------------------------------------------------


def test_apply_death_square_to_triangle():
    s = make_state({1: 0, 2: 3, 3: 4, 4: 3}, [(1, 2), (2, 3), (3, 4), (1, 4)], b=8)
    p = death_clique_rule(1, s.g.neighbors(1))
    out, rec = apply_death(s, 1, p)
    assert out.x == {2: 3, 3: 4, 4: 3}
    assert out.g.edges() == [(2, 3), (2, 4), (3, 4)]
    assert out.epoch == s.epoch + 1
    assert rec.kind is EventKind.DEATH and rec.subject == 1
    assert 1 in s.g  # input state untouched


def test_apply_death_chain_extreme():
    s = make_state({1: 0, 2: 5, 3: 5}, [(1, 2), (2, 3)], b=8)
    jst = pick_jstar(s.g.neighbors(1), s.x, "max_state")
    out, _ = apply_death(s, 1, death_star_rule(1, s.g.neighbors(1), jst))
    assert out.x == {2: 5, 3: 5}
    assert out.g.edges() == [(2, 3)]
    assert sum(out.x.values()) == 10


def test_apply_death_requires_zero_state():
    s = make_state({1: 2, 2: 3}, [(1, 2)], b=8)
    with pytest.raises(RuleViolationError):
        apply_death(s, 1, death_star_rule(1, {2}, 2))


def test_apply_duplication_pair_to_triangle():
    s = make_state({1: 2, 2: 8}, [(1, 2)], b=8)
    p = dup_full_rule(2, s.g.neighbors(2), (3, 4), 4, 4)
    out, rec = apply_duplication(s, 2, p)
    assert out.x == {1: 2, 3: 4, 4: 4}
    assert out.g.edges() == [(1, 3), (1, 4), (3, 4)]
    assert rec.children == (3, 4) and rec.alpha == 4


def test_apply_duplication_keeps_hole_under_partition():
    x = {1: 3, 2: 8, 3: 3, 4: 2}
    s = make_state(x, [(1, 2), (2, 3), (3, 4), (1, 4)], b=8)
    p = dup_partition_rule(2, s.g.neighbors(2), (5, 6), 4, 4, SplitMix(0, PICK, 1))
    out, _ = apply_duplication(s, 2, p)
    assert len(out.x) == 5
    assert all(out.g.degree(u) == 2 for u in out.g.nodes())  # still one cycle
    assert is_connected(out.g)


def test_apply_duplication_requires_upper_threshold():
    s = make_state({1: 2, 2: 7}, [(1, 2)], b=8)
    with pytest.raises(RuleViolationError):
        apply_duplication(s, 2, dup_full_rule(2, {1}, (3, 4), 4, 4))


# -- whole-event properties ------------------------------------------------


def connected_graph_states(draw, n_min=2, n_max=6, b=8):
    n = draw(st.integers(n_min, n_max))
    nodes = list(range(1, n + 1))
    edges = {norm_edge(i, draw(st.integers(1, i - 1))) for i in nodes[1:]}
    extra = draw(st.sets(
        st.tuples(st.integers(1, n), st.integers(1, n)).filter(lambda e: e[0] != e[1]),
        max_size=6,
    ))
    edges |= {norm_edge(u, v) for u, v in extra}
    x = {i: draw(st.integers(0, b)) for i in nodes}
    return x, sorted(edges)


@settings(max_examples=150)
@given(st.data())
def test_death_preserves_total_and_connectivity(data):
    x, edges = connected_graph_states(data.draw)
    subject = min(x)
    x[subject] = 0
    s = make_state(x, edges, b=8)
    nbrs = s.g.neighbors(subject)
    rule = data.draw(st.sampled_from(["star", "clique"]))
    if rule == "star":
        p = death_star_rule(subject, nbrs, pick_jstar(nbrs, x, "max_state"))
    else:
        p = death_clique_rule(subject, nbrs)
    out, _ = apply_death(s, subject, p)
    assert sum(out.x.values()) == sum(x.values())
    assert is_connected(out.g)
    assert subject not in out.g


@settings(max_examples=150)
@given(st.data())
def test_duplication_preserves_total_and_connectivity(data):
    b = 8
    x, edges = connected_graph_states(data.draw, b=b)
    subject = max(x)
    x[subject] = b
    s = make_state(x, edges, b=b)
    nbrs = s.g.neighbors(subject)
    children = (subject + 1, subject + 2)
    if data.draw(st.booleans()):
        p = dup_full_rule(subject, nbrs, children, 4, 4)
    else:
        p = dup_partition_rule(subject, nbrs, children, 4, 4,
                               SplitMix(data.draw(st.integers(0, 99)), PICK, 1))
    out, _ = apply_duplication(s, subject, p)
    assert sum(out.x.values()) == sum(x.values())
    assert is_connected(out.g)
    assert len(out.x) == len(x) + 1
