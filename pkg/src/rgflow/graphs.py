"""Half-edge Feynman graphs: construction, Betti number and genus,
automorphism counting, canonical forms and bounded enumeration.

A graph is a finite set of half-edges H, a set of vertices V, an involution
sigma on H and an attachment map pi: H -> V, plus a genus label per vertex.
Fixed points of sigma are the tails (external legs); two-element orbits are
the internal edges.
"""

from __future__ import annotations

import itertools
import math
from collections import Counter
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

__all__ = [
    "Graph",
    "GraphClass",
    "GraphError",
    "TooLargeError",
    "build_graph",
    "from_edges",
    "first_betti",
    "genus",
    "automorphism_order",
    "canonical_key",
    "classify",
    "enumerate_connected",
    "wheel",
    "tadpole",
    "theta",
    "single_edge",
    "graph_to_json",
    "graph_from_json",
]

DEFAULT_AUT_CAP = 24


class GraphError(ValueError):
    """Invalid graph data."""


class TooLargeError(GraphError):
    """Graph exceeds the cap for exact exhaustive counting."""


@dataclass(frozen=True)
class Graph:
    """Immutable half-edge graph.

    ``attachment[h]`` is the vertex of half-edge ``h`` and ``involution[h]``
    its partner (``involution[h] == h`` for a tail).
    """

    attachment: tuple[int, ...]
    involution: tuple[int, ...]
    vertex_genus: tuple[int, ...]

    def __post_init__(self):
        nv = len(self.vertex_genus)
        nh = len(self.attachment)
        if len(self.involution) != nh:
            raise GraphError("involution and attachment must have equal length")
        for h, s in enumerate(self.involution):
            if not 0 <= s < nh:
                raise GraphError(f"half-edge {h} paired with dangling index {s}")
            if self.involution[s] != h:
                raise GraphError(f"pairing is not an involution at half-edge {h}")
        for h, v in enumerate(self.attachment):
            if not 0 <= v < nv:
                raise GraphError(f"half-edge {h} attached to unknown vertex {v}")
        if any(g < 0 for g in self.vertex_genus):
            raise GraphError("vertex genus must be non-negative")
        used = set(self.attachment)
        for v in range(nv):
            if v not in used:
                raise GraphError(f"vertex {v} is isolated (no half-edges)")

    @property
    def n_vertices(self) -> int:
        return len(self.vertex_genus)

    @property
    def n_half_edges(self) -> int:
        return len(self.attachment)

    @cached_property
    def tails(self) -> tuple[int, ...]:
        return tuple(h for h, s in enumerate(self.involution) if s == h)

    @cached_property
    def edges(self) -> tuple[tuple[int, int], ...]:
        """Internal edges as half-edge pairs ``(h, sigma(h))`` with ``h < sigma(h)``."""
        return tuple((h, s) for h, s in enumerate(self.involution) if h < s)

    @cached_property
    def vertex_edges(self) -> tuple[tuple[int, int], ...]:
        """Internal edges as vertex pairs, in the order of :attr:`edges`."""
        a = self.attachment
        return tuple((a[h], a[s]) for h, s in self.edges)

    @cached_property
    def tails_per_vertex(self) -> tuple[int, ...]:
        counts = [0] * self.n_vertices
        for h in self.tails:
            counts[self.attachment[h]] += 1
        return tuple(counts)

    @cached_property
    def valency(self) -> tuple[int, ...]:
        counts = [0] * self.n_vertices
        for v in self.attachment:
            counts[v] += 1
        return tuple(counts)

    @property
    def n_tails(self) -> int:
        return len(self.tails)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def n_components(self) -> int:
        parent = list(range(self.n_vertices))

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for u, v in self.vertex_edges:
            parent[find(u)] = find(v)
        return len({find(v) for v in range(self.n_vertices)})

    def is_connected(self) -> bool:
        return self.n_components() == 1

    def is_wheel(self) -> bool:
        """True when the internal edges form one cycle through every vertex."""
        if self.n_edges != self.n_vertices or not self.is_connected():
            return False
        deg = Counter()
        for u, v in self.vertex_edges:
            deg[u] += 1
            deg[v] += 1
        return all(deg[v] == 2 for v in range(self.n_vertices))


def build_graph(
    vertex_count: int,
    pairing: Iterable[Sequence[int]],
    tails_per_vertex: Sequence[int],
    vertex_genus: Sequence[int] | None = None,
    attachment: Sequence[int] | None = None,
) -> Graph:
    """Build a graph from explicit half-edge pairs.

    Internal half-edges are numbered ``0..len(attachment)-1`` and
    ``attachment`` gives the vertex of each; every one of them must occur in
    exactly one pair.  Tails are appended after the internal half-edges,
    vertex by vertex.  Without ``attachment`` the pairs are read as vertex
    pairs (see :func:`from_edges`).
    """
    pairs = [tuple(p) for p in pairing]
    if attachment is None:
        return from_edges(vertex_count, pairs, tails_per_vertex, vertex_genus)
    if len(tails_per_vertex) != vertex_count:
        raise GraphError("tails_per_vertex must have one entry per vertex")
    n_int = len(attachment)
    inv = [-1] * n_int
    for p in pairs:
        if len(p) != 2:
            raise GraphError(f"pair {p} does not have two half-edges")
        a, b = p
        for h in (a, b):
            if not 0 <= h < n_int:
                raise GraphError(f"dangling half-edge index {h}")
        if a == b:
            raise GraphError(f"half-edge {a} paired with itself; tails are implicit")
        if inv[a] != -1 or inv[b] != -1:
            raise GraphError(f"pair {p} reuses a half-edge: not an involution")
        inv[a], inv[b] = b, a
    unpaired = [h for h in range(n_int) if inv[h] == -1]
    if unpaired:
        raise GraphError(f"dangling internal half-edges {unpaired}")
    att = list(attachment)
    for v, t in enumerate(tails_per_vertex):
        for _ in range(t):
            inv.append(len(att))
            att.append(v)
    genus_ = tuple(vertex_genus) if vertex_genus is not None else (0,) * vertex_count
    if len(genus_) != vertex_count:
        raise GraphError("vertex_genus must have one entry per vertex")
    return Graph(tuple(att), tuple(inv), genus_)


def from_edges(
    vertex_count: int,
    edges: Iterable[Sequence[int]],
    tails_per_vertex: Sequence[int],
    vertex_genus: Sequence[int] | None = None,
) -> Graph:
    """Build a graph from vertex pairs; half-edges are numbered edge by edge,
    then tails vertex by vertex."""
    att: list[int] = []
    inv: list[int] = []
    for e in edges:
        if len(e) != 2:
            raise GraphError(f"edge {e} must join two vertices")
        u, v = e
        for x in (u, v):
            if not 0 <= x < vertex_count:
                raise GraphError(f"edge {e} references unknown vertex {x}")
        h = len(att)
        att += [u, v]
        inv += [h + 1, h]
    if len(tails_per_vertex) != vertex_count:
        raise GraphError("tails_per_vertex must have one entry per vertex")
    for v, t in enumerate(tails_per_vertex):
        if t < 0:
            raise GraphError("negative tail count")
        for _ in range(t):
            inv.append(len(att))
            att.append(v)
    genus_ = tuple(vertex_genus) if vertex_genus is not None else (0,) * vertex_count
    if len(genus_) != vertex_count:
        raise GraphError("vertex_genus must have one entry per vertex")
    return Graph(tuple(att), tuple(inv), genus_)


def first_betti(g: Graph) -> int:
    return g.n_edges - g.n_vertices + g.n_components()


def genus(g: Graph) -> int:
    if not g.is_connected():
        raise GraphError("genus is defined for connected graphs only")
    return first_betti(g) + sum(g.vertex_genus)


# -- automorphisms ---------------------------------------------------------


def _vertex_maps(g: Graph, labeled_tails: bool):
    """Vertex permutations compatible with genus, valency and tail counts."""
    sig = [(g.vertex_genus[v], g.valency[v], g.tails_per_vertex[v]) for v in range(g.n_vertices)]
    fixed = [labeled_tails and g.tails_per_vertex[v] > 0 for v in range(g.n_vertices)]
    n = g.n_vertices
    image = [-1] * n
    used = [False] * n

    def rec(v):
        if v == n:
            yield tuple(image)
            return
        cands = [v] if fixed[v] else range(n)
        for w in cands:
            if used[w] or sig[w] != sig[v] or (fixed[w] and w != v):
                continue
            image[v] = w
            used[w] = True
            yield from rec(v + 1)
            used[w] = False
        image[v] = -1

    yield from rec(0)


def _count_internal_maps(g: Graph, vmap: tuple[int, ...]) -> int:
    """Number of bijections of internal half-edges commuting with sigma and
    covering the vertex map ``vmap``, by exhaustive backtracking."""
    att, inv = g.attachment, g.involution
    internal = [h for h in range(g.n_half_edges) if inv[h] != h]
    by_vertex: dict[int, list[int]] = {}
    for h in internal:
        by_vertex.setdefault(att[h], []).append(h)
    image: dict[int, int] = {}
    used: set[int] = set()

    def rec(i):
        while i < len(internal) and internal[i] in image:
            i += 1
        if i == len(internal):
            return 1
        h = internal[i]
        s = inv[h]
        total = 0
        for h2 in by_vertex.get(vmap[att[h]], ()):
            # partners are assigned together, so h2 free implies sigma(h2) free
            if h2 in used:
                continue
            s2 = inv[h2]
            if att[s2] != vmap[att[s]]:
                continue
            image[h], image[s] = h2, s2
            used.update((h2, s2))
            total += rec(i + 1)
            del image[h], image[s]
            used.difference_update((h2, s2))
        return total

    return rec(0)


def automorphism_order(
    g: Graph, *, labeled_tails: bool = True, cap: int = DEFAULT_AUT_CAP
) -> int:
    """Order of Aut(G) by exhaustive search.

    With ``labeled_tails`` (the default) every tail is fixed pointwise; this
    is the convention under which a graph class contributes ``1/|Aut|`` per
    labelling of its external legs.  Without it, tails at a vertex may be
    permuted and vertices carrying tails may move.
    """
    if g.n_half_edges > cap:
        raise TooLargeError(
            f"graph has {g.n_half_edges} half-edges; too large for exact count (cap {cap})"
        )
    total = 0
    for vmap in _vertex_maps(g, labeled_tails):
        total += _count_internal_maps(g, vmap)
    if not labeled_tails:
        total *= math.prod(math.factorial(t) for t in g.tails_per_vertex)
    return total


# -- multigraph view: canonical forms and enumeration ----------------------


def _adjacency(n, vertex_edges, colors=None):
    adj = [[Counter() for _ in range(n)] for _ in range(n)]
    for idx, (u, v) in enumerate(vertex_edges):
        c = 0 if colors is None else colors[idx]
        adj[u][v][c] += 1
        if u != v:
            adj[v][u][c] += 1
    return adj


def _cell(counter: Counter, ncolors: int) -> tuple[int, ...]:
    return tuple(counter[c] for c in range(ncolors))


def _multigraph_key(labels, adj, perm, ncolors):
    n = len(labels)
    vpart = tuple(labels[perm[i]] for i in range(n))
    epart = tuple(
        _cell(adj[perm[i]][perm[j]], ncolors) for i in range(n) for j in range(i, n)
    )
    return (n, vpart, epart)


def _vertex_invariant(labels, adj, v, ncolors):
    n = len(labels)
    return (
        labels[v],
        _cell(adj[v][v], ncolors),
        tuple(sorted(_cell(adj[v][w], ncolors) for w in range(n) if w != v)),
    )


def _candidate_perms(labels, adj, ncolors):
    """Orderings of the vertices sorted by a refinement invariant; only
    permutations within invariant blocks can attain the minimum key."""
    n = len(labels)
    inv = [_vertex_invariant(labels, adj, v, ncolors) for v in range(n)]
    blocks: dict = {}
    for v in range(n):
        blocks.setdefault(inv[v], []).append(v)
    ordered = [blocks[k] for k in sorted(blocks)]
    for parts in itertools.product(*(itertools.permutations(b) for b in ordered)):
        yield tuple(itertools.chain.from_iterable(parts))


def canonical_key(g: Graph, colors: Sequence[int] | None = None):
    """Isomorphism-invariant key of ``g`` with tails unlabelled.

    ``colors`` optionally assigns a colour to every internal edge (in the
    order of ``g.edges``); isomorphisms must then preserve colours.
    """
    ncolors = 1 if colors is None else max(colors, default=0) + 1
    labels = [
        (g.vertex_genus[v], g.valency[v], g.tails_per_vertex[v]) for v in range(g.n_vertices)
    ]
    adj = _adjacency(g.n_vertices, g.vertex_edges, colors)
    return min(_multigraph_key(labels, adj, p, ncolors) for p in _candidate_perms(labels, adj, ncolors))


def _graph_from_key(key) -> Graph:
    n, vpart, epart = key
    edges = []
    it = iter(epart)
    for i in range(n):
        for j in range(i, n):
            cell = next(it)
            edges += [(i, j)] * sum(cell)
    tails = [lab[2] for lab in vpart]
    gen = [lab[0] for lab in vpart]
    return from_edges(n, edges, tails, gen)


def _colored_aut_count(key, labeled_tails: bool) -> int:
    """|Aut| of a (possibly edge-coloured) multigraph given by its key, from
    the vertex permutations that preserve it and the edge-multiplicity
    factors."""
    n, vpart, epart = key
    cells = {}
    it = iter(epart)
    for i in range(n):
        for j in range(i, n):
            cells[(i, j)] = next(it)

    def cell(i, j):
        return cells[(i, j) if i <= j else (j, i)]

    mult = 1
    for (i, j), c in cells.items():
        for m in c:
            mult *= math.factorial(m) * (2**m if i == j else 1)
    count = 0
    for perm in itertools.permutations(range(n)):
        if any(vpart[perm[i]] != vpart[i] for i in range(n)):
            continue
        if labeled_tails and any(vpart[i][2] > 0 and perm[i] != i for i in range(n)):
            continue
        if all(cell(perm[i], perm[j]) == cell(i, j) for i in range(n) for j in range(i, n)):
            count += 1
    total = count * mult
    if not labeled_tails:
        total *= math.prod(math.factorial(lab[2]) for lab in vpart)
    return total


@dataclass(frozen=True)
class GraphClass:
    """Isomorphism class of connected graphs (tails unlabelled).

    ``aut_order`` counts automorphisms fixing every tail; ``full_aut_order``
    lets tails move.  A class contributes ``n_tails! / full_aut_order`` times
    its weight to the coefficient of ``(1/k!) * integral(phi^k)``, which is
    the same as summing ``1 / aut_order`` over its distinct tail labellings.
    """

    canonical_form: Graph
    aut_order: int
    full_aut_order: int
    key: tuple

    @property
    def genus(self) -> int:
        return genus(self.canonical_form)

    @property
    def n_tails(self) -> int:
        return self.canonical_form.n_tails

    @property
    def n_vertices(self) -> int:
        return self.canonical_form.n_vertices

    @property
    def labelings(self) -> int:
        """Number of inequivalent ways to label the tails 1..k."""
        k = self.n_tails
        return math.factorial(k) * self.aut_order // self.full_aut_order

    @property
    def tail_weight(self) -> float:
        return math.factorial(self.n_tails) / self.full_aut_order


def classify(g: Graph) -> GraphClass:
    key = canonical_key(g)
    canon = _graph_from_key(key)
    return GraphClass(
        canonical_form=canon,
        aut_order=automorphism_order(canon, labeled_tails=True, cap=10**6),
        full_aut_order=_colored_aut_count(key, labeled_tails=False),
        key=key,
    )


def _edge_multisets(valencies, max_edges):
    """All edge multisets on ``len(valencies)`` vertices (loops allowed)
    that respect the valencies and use at most ``max_edges`` edges."""
    n = len(valencies)
    slots = [(i, j) for i in range(n) for j in range(i, n)]
    free = list(valencies)
    chosen: list[tuple[int, int]] = []

    def rec(idx, left):
        if idx == len(slots):
            yield list(chosen)
            return
        i, j = slots[idx]
        cost_i = 2 if i == j else 1
        m = 0
        while True:
            yield from rec(idx + 1, left - m)
            if left - m == 0:
                break
            if i == j and free[i] < 2:
                break
            if i != j and (free[i] < 1 or free[j] < 1):
                break
            free[i] -= cost_i
            if i != j:
                free[j] -= 1
            chosen.append((i, j))
            m += 1
        for _ in range(m):
            chosen.pop()
            free[i] += cost_i
            if i != j:
                free[j] += 1

    yield from rec(0, max_edges)


def enumerate_connected(
    max_vertices: int,
    max_genus: int,
    allowed_valencies: Iterable[int],
    *,
    vertex_types: Iterable[tuple[int, int]] | None = None,
) -> list[GraphClass]:
    """One representative per isomorphism class of connected graphs.

    Vertices are drawn from ``vertex_types`` (pairs ``(vertex genus,
    valency)``); by default every allowed valency with vertex genus 0.
    Output is sorted by canonical key, so it does not depend on the order in
    which candidates are generated.
    """
    if max_vertices > 5 or max_genus > 1:
        raise TooLargeError("enumeration is capped at 5 vertices and genus 1")
    if vertex_types is None:
        types = sorted({(0, int(k)) for k in allowed_valencies})
    else:
        types = sorted({(int(g), int(k)) for g, k in vertex_types})
    if any(k <= 0 for _, k in types):
        raise GraphError("valencies must be positive")
    found: dict = {}
    for nv in range(1, max_vertices + 1):
        for combo in itertools.combinations_with_replacement(types, nv):
            gsum = sum(g for g, _ in combo)
            if gsum > max_genus:
                continue
            vals = [k for _, k in combo]
            gens = [g for g, _ in combo]
            budget = nv - 1 + (max_genus - gsum)
            for edges in _edge_multisets(vals, budget):
                if len(edges) < nv - 1:
                    continue
                deg = [0] * nv
                for u, v in edges:
                    deg[u] += 1
                    deg[v] += 1
                tails = [vals[i] - deg[i] for i in range(nv)]
                g = from_edges(nv, edges, tails, gens)
                if not g.is_connected() or genus(g) > max_genus:
                    continue
                key = canonical_key(g)
                if key not in found:
                    found[key] = g
    return [classify(found[k]) for k in sorted(found)]


# -- named graphs ------------------------------------------------------------


def single_edge(tails: Sequence[int] = (0, 0)) -> Graph:
    return from_edges(2, [(0, 1)], tails)


def wheel(k: int, tails_per_vertex: int = 0) -> Graph:
    """One-loop graph whose k internal edges form a cycle through k vertices
    (k = 1 is the tadpole)."""
    if k < 1:
        raise GraphError("a wheel needs at least one vertex")
    edges = [(i, (i + 1) % k) for i in range(k)]
    return from_edges(k, edges, [tails_per_vertex] * k)


def tadpole(tails: int = 0) -> Graph:
    return wheel(1, tails)


def theta(tails: Sequence[int] = (0, 0)) -> Graph:
    """Two vertices joined by three parallel edges."""
    return from_edges(2, [(0, 1)] * 3, tails)


# -- JSON --------------------------------------------------------------------


def graph_to_json(g: Graph) -> dict:
    return {
        "vertices": g.n_vertices,
        "pairs": [list(e) for e in g.vertex_edges],
        "tails": list(g.tails_per_vertex),
        "genus": list(g.vertex_genus),
    }


def graph_from_json(obj: dict) -> Graph:
    try:
        return from_edges(
            int(obj["vertices"]),
            [tuple(p) for p in obj["pairs"]],
            [int(t) for t in obj["tails"]],
            [int(x) for x in obj.get("genus", [0] * int(obj["vertices"]))],
        )
    except (KeyError, TypeError) as exc:
        raise GraphError(f"malformed graph JSON: {exc}") from exc
