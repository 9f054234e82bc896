import itertools
import math
from collections import Counter

import pytest
from hypothesis import assume, given, settings, strategies as st

from rgflow.graphs import (
    Graph,
    GraphError,
    TooLargeError,
    automorphism_order,
    build_graph,
    canonical_key,
    classify,
    enumerate_connected,
    first_betti,
    from_edges,
    genus,
    graph_from_json,
    graph_to_json,
    single_edge,
    tadpole,
    theta,
    wheel,
)


# -- oracles -------------------------------------------------------------------


def naive_aut(g: Graph, labeled_tails: bool = True) -> int:
    """Count half-edge permutations commuting with the involution and
    compatible with some vertex bijection, by brute force over permutations
    of the internal half-edges."""
    internal = [h for h in range(g.n_half_edges) if g.involution[h] != h]
    tails = g.tails_per_vertex
    count = 0
    for image in itertools.permutations(internal):
        phi = dict(zip(internal, image))
        if any(phi[g.involution[h]] != g.involution[phi[h]] for h in internal):
            continue
        psi = {}
        ok = True
        for h in internal:
            u, v = g.attachment[h], g.attachment[phi[h]]
            if psi.setdefault(u, v) != v:
                ok = False
                break
        if not ok:
            continue
        for v in range(g.n_vertices):
            psi.setdefault(v, v)  # vertices without internal half-edges
        if sorted(psi.values()) != list(range(g.n_vertices)):
            continue
        if any(g.vertex_genus[v] != g.vertex_genus[psi[v]] or tails[v] != tails[psi[v]] for v in psi):
            continue
        if labeled_tails and any(tails[v] and psi[v] != v for v in psi):
            continue
        count += 1
    if not labeled_tails:
        count *= math.prod(math.factorial(t) for t in tails)
    return count


def raw_configurations(n_vertices: int, valency: int, max_genus: int):
    """Every (tail set, perfect matching) on ``n_vertices`` labelled vertices
    with ``valency`` labelled half-edges each, kept when connected and of
    genus at most ``max_genus``."""
    att = [v for v in range(n_vertices) for _ in range(valency)]
    N = len(att)
    max_edges = n_vertices - 1 + max_genus

    def matchings(items):
        if not items:
            yield []
            return
        a = items[0]
        for i in range(1, len(items)):
            for rest in matchings(items[1:i] + items[i + 1:]):
                yield [(a, items[i])] + rest

    for n_edges in range(n_vertices - 1, max_edges + 1):
        for internal in itertools.combinations(range(N), 2 * n_edges):
            for m in matchings(list(internal)):
                tails = [0] * n_vertices
                for h in range(N):
                    if h not in internal:
                        tails[att[h]] += 1
                # relabel internal half-edges 0..2E-1 keeping attachment
                index = {h: i for i, h in enumerate(internal)}
                g = build_graph(n_vertices, [(index[a], index[b]) for a, b in m], tails,
                                attachment=[att[h] for h in internal])
                if g.is_connected() and genus(g) <= max_genus:
                    yield g


# -- strategies -------------------------------------------------------------------


@st.composite
def small_graphs(draw, max_vertices=4, max_internal=8, max_half_edges=10):
    nv = draw(st.integers(1, max_vertices))
    n_edges = draw(st.integers(max(nv - 1, 0), max_internal // 2))
    edges = [
        (draw(st.integers(0, nv - 1)), draw(st.integers(0, nv - 1))) for _ in range(n_edges)
    ]
    budget = max_half_edges - 2 * n_edges
    tails = [draw(st.integers(0, 2)) for _ in range(nv)]
    assume(sum(tails) <= budget)
    vgenus = [draw(st.integers(0, 1)) for _ in range(nv)]
    used = {v for e in edges for v in e} | {v for v in range(nv) if tails[v]}
    assume(len(used) == nv)
    return from_edges(nv, edges, tails, vgenus)


def relabel(g: Graph, vperm, hperm) -> Graph:
    """Same graph with vertices renamed by ``vperm`` and half-edges by ``hperm``."""
    nh = g.n_half_edges
    att = [0] * nh
    inv = [0] * nh
    for h in range(nh):
        att[hperm[h]] = vperm[g.attachment[h]]
        inv[hperm[h]] = hperm[g.involution[h]]
    gen = [0] * g.n_vertices
    for v in range(g.n_vertices):
        gen[vperm[v]] = g.vertex_genus[v]
    return Graph(tuple(att), tuple(inv), tuple(gen))


# -- named graphs -------------------------------------------------------------------


def test_gamma3_invariants():
    g = wheel(3, 1)
    assert first_betti(g) == 1 and genus(g) == 1
    assert automorphism_order(g) == 1
    assert automorphism_order(g, labeled_tails=False) == 6


def test_two_wheel_without_tails_has_order_four():
    # two vertices, double edge: swap vertices x swap the parallel edges
    assert automorphism_order(wheel(2)) == 4 == naive_aut(wheel(2))


def test_gamma4_and_tadpole():
    g = wheel(2, 2)
    assert automorphism_order(g) == 2
    assert automorphism_order(g, labeled_tails=False) == 16
    assert automorphism_order(tadpole(2)) == 2
    assert automorphism_order(tadpole(2), labeled_tails=False) == 4


def test_theta_betti():
    assert first_betti(theta()) == 2
    assert automorphism_order(theta()) == 12


def test_single_edge_tree():
    g = single_edge()
    assert first_betti(g) == 0 and genus(g) == 0 and automorphism_order(g) == 2


def test_bad_involution_rejected():
    with pytest.raises(GraphError):
        Graph((0, 0, 0), (1, 2, 0), (0,))
    with pytest.raises(GraphError):
        Graph((0, 0), (1, 5), (0,))


def test_dangling_half_edge_rejected():
    with pytest.raises(GraphError):
        build_graph(1, [(0, 1)], [0], attachment=[0, 0, 0])


def test_aut_cap():
    big = from_edges(4, [(0, 1), (1, 2), (2, 3), (3, 0)] * 2, [0] * 4)
    with pytest.raises(TooLargeError):
        automorphism_order(big, labeled_tails=False, cap=5)


def test_enumeration_cap():
    with pytest.raises(TooLargeError):
        enumerate_connected(6, 1, [3])
    with pytest.raises(TooLargeError):
        enumerate_connected(2, 2, [3])


def test_enumeration_includes_gamma4():
    classes = enumerate_connected(2, 1, [4])
    keys = {c.key for c in classes}
    assert canonical_key(wheel(2, 2)) in keys
    assert len(classes) == 5


def test_enumeration_is_sorted_and_unique():
    classes = enumerate_connected(3, 1, [3, 4])
    keys = [c.key for c in classes]
    assert keys == sorted(keys) and len(set(keys)) == len(keys)


@pytest.mark.parametrize("nv,k", [(1, 3), (2, 3), (3, 3), (1, 4), (2, 4)])
def test_enumeration_against_orbit_count(nv, k):
    """Brute-force configurations grouped by canonical key: each class has
    exactly nv! (k!)^nv / |Aut_full| configurations (orbit-stabilizer)."""
    orbits = Counter(canonical_key(g) for g in raw_configurations(nv, k, 1))
    listed = {c.key: c for c in enumerate_connected(nv, 1, [k]) if c.n_vertices == nv}
    assert set(orbits) == set(listed)
    group = math.factorial(nv) * math.factorial(k) ** nv
    for key, cnt in orbits.items():
        assert cnt * listed[key].full_aut_order == group


def test_labelings_sum_matches_tail_weight():
    for c in enumerate_connected(3, 1, [3]):
        assert c.labelings / c.aut_order == pytest.approx(c.tail_weight)


def test_json_roundtrip():
    g = wheel(3, 1)
    h = graph_from_json(graph_to_json(g))
    assert canonical_key(h) == canonical_key(g)
    with pytest.raises(GraphError):
        graph_from_json({"vertices": 2})


# -- properties ---------------------------------------------------------------------


@settings(max_examples=60, deadline=None)
@given(small_graphs())
def test_involution_squares_to_identity(g):
    assert all(g.involution[g.involution[h]] == h for h in range(g.n_half_edges))


@settings(max_examples=60, deadline=None)
@given(small_graphs())
def test_betti_and_genus(g):
    assert first_betti(g) == g.n_edges - g.n_vertices + g.n_components()
    if g.is_connected():
        assert genus(g) == first_betti(g) + sum(g.vertex_genus)


@settings(max_examples=40, deadline=None)
@given(small_graphs())
def test_aut_order_matches_permutation_oracle(g):
    assert automorphism_order(g, cap=10**6) == naive_aut(g)
    assert automorphism_order(g, labeled_tails=False, cap=10**6) == naive_aut(g, False)


@settings(max_examples=60, deadline=None)
@given(small_graphs(), st.randoms(use_true_random=False))
def test_canonical_key_is_relabeling_invariant(g, rnd):
    vperm = list(range(g.n_vertices))
    hperm = list(range(g.n_half_edges))
    rnd.shuffle(vperm)
    rnd.shuffle(hperm)
    h = relabel(g, vperm, hperm)
    assert canonical_key(h) == canonical_key(g)
    assert automorphism_order(h, labeled_tails=False, cap=10**6) == automorphism_order(
        g, labeled_tails=False, cap=10**6
    )


@settings(max_examples=40, deadline=None)
@given(small_graphs())
def test_classify_round_trip(g):
    assume(g.is_connected())
    c = classify(g)
    assert canonical_key(c.canonical_form) == c.key == canonical_key(g)
    assert c.full_aut_order == automorphism_order(g, labeled_tails=False, cap=10**6)
