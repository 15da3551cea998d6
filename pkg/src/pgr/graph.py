"""Directed edge-labeled multigraphs and the operations the engine is built on.

Vertices and edges are opaque non-negative integers living in separate
namespaces within one graph.  Every edge carries a source, a target and a
label; parallel edges and loops are allowed.  Graphs are immutable after
construction, so they can be shared freely.

An edge is stored as a ``(src, label, tgt)`` triple, matching the arrow
reading ``src -label-> tgt`` used by the text format.
"""

from __future__ import annotations

import itertools
from collections import Counter
from collections.abc import Iterable, Mapping

from .exceptions import DomainGap, EdgeIdClash, InvalidPatch, NotASubgraph

# Reserved label for edges the input notation leaves unlabeled.
UNLABELED = "_"

EdgeTriple = tuple[int, str, int]


class Graph:
    """A finite directed multigraph with labeled edges."""

    __slots__ = ("_vertices", "_edges", "_hash", "_out", "_in")

    def __init__(self, vertices: Iterable[int] = (), edges=()):
        """Create a graph.

        ``edges`` is either a mapping ``{edge_id: (src, label, tgt)}`` or an
        iterable of ``(edge_id, src, label, tgt)`` tuples.
        """
        self._vertices = frozenset(vertices)
        if isinstance(edges, Mapping):
            edge_map = {int(e): (s, lab, t) for e, (s, lab, t) in edges.items()}
        else:
            edge_map = {}
            for eid, s, lab, t in edges:
                if eid in edge_map:
                    raise ValueError(f"duplicate edge id {eid}")
                edge_map[int(eid)] = (s, lab, t)
        for eid, (s, lab, t) in edge_map.items():
            if s not in self._vertices or t not in self._vertices:
                raise ValueError(f"edge {eid}: endpoint outside the vertex set")
            if not isinstance(lab, str) or not lab:
                raise ValueError(f"edge {eid}: label must be a nonempty string")
        self._edges = edge_map
        self._hash = None
        self._out = None
        self._in = None

    @classmethod
    def from_triples(cls, vertices: Iterable[int], triples: Iterable[EdgeTriple] = ()) -> "Graph":
        """Build a graph assigning edge ids 0, 1, ... in the given order."""
        return cls(vertices, [(i, s, lab, t) for i, (s, lab, t) in enumerate(triples)])

    @property
    def vertices(self) -> frozenset[int]:
        return self._vertices

    @property
    def edges(self) -> dict[int, EdgeTriple]:
        """Edge id -> (src, label, tgt).  Treat as read-only."""
        return self._edges

    def src(self, e: int) -> int:
        return self._edges[e][0]

    def label(self, e: int) -> str:
        return self._edges[e][1]

    def tgt(self, e: int) -> int:
        return self._edges[e][2]

    def sorted_edges(self) -> list[tuple[int, EdgeTriple]]:
        return sorted(self._edges.items())

    def _indexes(self):
        if self._out is None:
            out: dict[int, list[int]] = {v: [] for v in self._vertices}
            inc: dict[int, list[int]] = {v: [] for v in self._vertices}
            for e in sorted(self._edges):
                s, _, t = self._edges[e]
                out[s].append(e)
                inc[t].append(e)
            self._out = out
            self._in = inc
        return self._out, self._in

    def out_edges(self, v: int) -> list[int]:
        return self._indexes()[0][v]

    def in_edges(self, v: int) -> list[int]:
        return self._indexes()[1][v]

    def incident_edges(self, v: int) -> set[int]:
        out, inc = self._indexes()
        return set(out[v]) | set(inc[v])

    def labels(self) -> set[str]:
        return {lab for _, lab, _ in self._edges.values()}

    def max_id(self) -> int:
        """Largest id in use (vertex or edge), or -1 for the empty graph."""
        return max(itertools.chain(self._vertices, self._edges, [-1]))

    def is_empty(self) -> bool:
        return not self._vertices and not self._edges

    def __eq__(self, other):
        if not isinstance(other, Graph):
            return NotImplemented
        return self._vertices == other._vertices and self._edges == other._edges

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((self._vertices, frozenset(self._edges.items())))
        return self._hash

    def __repr__(self):
        es = ", ".join(f"{e}:{s}-{lab}->{t}" for e, (s, lab, t) in self.sorted_edges())
        return f"Graph(V={sorted(self._vertices)}, E=[{es}])"


EMPTY_GRAPH = Graph()


class Renaming:
    """A pair of injective id maps for vertices and edges.

    Applied to a graph whose ids it covers, a renaming yields an isomorphic
    copy.  The same object doubles as an embedding witness: the maps may be
    defined on more ids than any particular graph uses.
    """

    __slots__ = ("vmap", "emap")

    def __init__(self, vmap: Mapping[int, int] = (), emap: Mapping[int, int] = ()):
        self.vmap = dict(vmap)
        self.emap = dict(emap)
        if len(set(self.vmap.values())) != len(self.vmap):
            raise ValueError("vertex map is not injective")
        if len(set(self.emap.values())) != len(self.emap):
            raise ValueError("edge map is not injective")

    @classmethod
    def identity(cls, g: Graph) -> "Renaming":
        return cls({v: v for v in g.vertices}, {e: e for e in g.edges})

    def inverse(self) -> "Renaming":
        return Renaming({w: v for v, w in self.vmap.items()},
                        {f: e for e, f in self.emap.items()})

    def image_vertices(self) -> frozenset[int]:
        return frozenset(self.vmap.values())

    def image_edges(self) -> frozenset[int]:
        return frozenset(self.emap.values())

    def __eq__(self, other):
        if not isinstance(other, Renaming):
            return NotImplemented
        return self.vmap == other.vmap and self.emap == other.emap

    def __repr__(self):
        return f"Renaming(vmap={self.vmap}, emap={self.emap})"


class PatchDecomposition:
    """A host graph split into context C, match M and the patch J between them."""

    __slots__ = ("context", "patch", "match")

    def __init__(self, context: Graph, patch: Graph, match: Graph):
        self.context = context
        self.patch = patch
        self.match = match

    def __eq__(self, other):
        if not isinstance(other, PatchDecomposition):
            return NotImplemented
        return (self.context, self.patch, self.match) == (other.context, other.patch, other.match)

    def __repr__(self):
        return f"PatchDecomposition(C={self.context!r}, J={self.patch!r}, M={self.match!r})"


def graph_union(g: Graph, h: Graph) -> Graph:
    """Componentwise union of two graphs with disjoint edge sets.

    Shared vertices fuse; shared edge ids are an error even when they agree.
    """
    clash = set(g.edges) & set(h.edges)
    if clash:
        raise EdgeIdClash(f"edge ids present in both operands: {sorted(clash)}")
    edges = dict(g.edges)
    edges.update(h.edges)
    return Graph(g.vertices | h.vertices, edges)


def rename_graph(g: Graph, phi: Renaming) -> Graph:
    """Transport ``g`` along ``phi``; labels are unchanged."""
    missing_v = g.vertices - phi.vmap.keys()
    if missing_v:
        raise DomainGap(f"vertices without image: {sorted(missing_v)}")
    missing_e = set(g.edges) - phi.emap.keys()
    if missing_e:
        raise DomainGap(f"edges without image: {sorted(missing_e)}")
    return Graph(
        (phi.vmap[v] for v in g.vertices),
        {phi.emap[e]: (phi.vmap[s], lab, phi.vmap[t]) for e, (s, lab, t) in g.edges.items()},
    )


def is_simple(g: Graph) -> bool:
    """True iff no two distinct edges agree on source, target and label."""
    seen = set()
    for s, lab, t in g.edges.values():
        if (s, lab, t) in seen:
            return False
        seen.add((s, lab, t))
    return True


def validate_patch(d: PatchDecomposition) -> list[str]:
    """Check all decomposition invariants; return one message per violation."""
    c, j, m = d.context, d.patch, d.match
    out = []
    if c.vertices & m.vertices:
        out.append(f"context and match share vertices: {sorted(c.vertices & m.vertices)}")
    if set(c.edges) & set(m.edges):
        out.append(f"context and match share edges: {sorted(set(c.edges) & set(m.edges))}")
    overlap = set(j.edges) & (set(c.edges) | set(m.edges))
    if overlap:
        out.append(f"patch edges reuse context/match edge ids: {sorted(overlap)}")
    for e, (s, _, t) in j.sorted_edges():
        s_in_c, s_in_m = s in c.vertices, s in m.vertices
        t_in_c, t_in_m = t in c.vertices, t in m.vertices
        if not ((s_in_c and t_in_m) or (s_in_m and t_in_c) or (s_in_m and t_in_m)):
            out.append(f"patch edge {e} does not run between context and match "
                       f"or within the match")
    endpoints = {s for s, _, _ in j.edges.values()} | {t for _, _, t in j.edges.values()}
    extra = j.vertices - endpoints
    if extra:
        out.append(f"patch has isolated vertices: {sorted(extra)}")
    missing = endpoints - j.vertices
    if missing:
        out.append(f"patch endpoints missing from its vertex set: {sorted(missing)}")
    return out


def patch_compose(d: PatchDecomposition) -> Graph:
    """Reassemble C, J and M into one graph, preserving all ids."""
    violations = validate_patch(d)
    if violations:
        raise InvalidPatch(violations)
    return graph_union(graph_union(d.context, d.patch), d.match)


def decompose_at(g: Graph, match_vertices: Iterable[int], match_edges: Iterable[int]) -> PatchDecomposition:
    """Split ``g`` around the subgraph selected by the given vertex/edge sets.

    The context keeps every edge with both endpoints outside the match; all
    remaining edges form the patch.  ``patch_compose`` inverts this exactly.
    """
    mv = frozenset(match_vertices)
    me = frozenset(match_edges)
    if not mv <= g.vertices:
        raise NotASubgraph(f"match vertices outside the graph: {sorted(mv - g.vertices)}")
    if not me <= set(g.edges):
        raise NotASubgraph(f"match edges outside the graph: {sorted(me - set(g.edges))}")
    for e in me:
        s, _, t = g.edges[e]
        if s not in mv or t not in mv:
            raise NotASubgraph(f"match edge {e} has an endpoint outside the match vertices")
    match = Graph(mv, {e: g.edges[e] for e in me})
    cv = g.vertices - mv
    c_edges = {}
    j_edges = {}
    for e, (s, lab, t) in g.edges.items():
        if e in me:
            continue
        if s in cv and t in cv:
            c_edges[e] = (s, lab, t)
        else:
            j_edges[e] = (s, lab, t)
    context = Graph(cv, c_edges)
    j_vertices = {s for s, _, _ in j_edges.values()} | {t for _, _, t in j_edges.values()}
    patch = Graph(j_vertices, j_edges)
    return PatchDecomposition(context, patch, match)


# -- isomorphism ------------------------------------------------------------


def _refine_colors(g: Graph) -> dict[int, int]:
    """Iterated neighborhood refinement; color indices are renaming-invariant."""
    colors = {v: 0 for v in g.vertices}
    for _ in range(max(1, len(g.vertices))):
        sigs = {}
        for v in g.vertices:
            out = sorted((g.label(e), colors[g.tgt(e)]) for e in g.out_edges(v))
            inc = sorted((g.label(e), colors[g.src(e)]) for e in g.in_edges(v))
            sigs[v] = (colors[v], tuple(out), tuple(inc))
        ranking = {sig: i for i, sig in enumerate(sorted(set(sigs.values())))}
        new = {v: ranking[sigs[v]] for v in g.vertices}
        if new == colors:
            break
        colors = new
    return colors


def _pair_counts(g: Graph) -> Counter:
    return Counter((s, lab, t) for s, lab, t in g.edges.values())


def _edge_bijection(g: Graph, h: Graph, vmap: dict[int, int]) -> dict[int, int] | None:
    """Match edges of ``g`` to edges of ``h`` along a fixed vertex bijection."""
    groups: dict[EdgeTriple, list[int]] = {}
    for e in sorted(h.edges):
        s, lab, t = h.edges[e]
        groups.setdefault((s, lab, t), []).append(e)
    emap = {}
    used: dict[EdgeTriple, int] = Counter()
    for e in sorted(g.edges):
        s, lab, t = g.edges[e]
        key = (vmap[s], lab, vmap[t])
        pool = groups.get(key, [])
        if used[key] >= len(pool):
            return None
        emap[e] = pool[used[key]]
        used[key] += 1
    return emap


def find_isomorphism(g: Graph, h: Graph) -> Renaming | None:
    """Return a renaming with ``rename_graph(g, phi) == h``, or None."""
    if len(g.vertices) != len(h.vertices) or len(g.edges) != len(h.edges):
        return None
    if Counter(lab for _, lab, _ in g.edges.values()) != Counter(
            lab for _, lab, _ in h.edges.values()):
        return None
    gcol = _refine_colors(g)
    hcol = _refine_colors(h)
    if Counter(gcol.values()) != Counter(hcol.values()):
        return None

    h_by_color: dict[int, list[int]] = {}
    for v in sorted(h.vertices):
        h_by_color.setdefault(hcol[v], []).append(v)
    g_counts = _pair_counts(g)
    h_counts = _pair_counts(h)

    # Assign most-constrained vertices first.
    order = sorted(g.vertices, key=lambda v: (len(h_by_color[gcol[v]]), v))
    vmap: dict[int, int] = {}
    used: set[int] = set()

    def pairs_ok(v, w):
        # Parallel-edge multiplicities between already-assigned vertices must
        # match exactly on both sides.
        for e in g.incident_edges(v):
            s, lab, t = g.edges[e]
            if s in vmap and t in vmap:
                if g_counts[(s, lab, t)] != h_counts[(vmap[s], lab, vmap[t])]:
                    return False
        return True

    def backtrack(i):
        if i == len(order):
            return True
        v = order[i]
        for w in h_by_color[gcol[v]]:
            if w in used:
                continue
            vmap[v] = w
            used.add(w)
            if pairs_ok(v, w) and backtrack(i + 1):
                return True
            del vmap[v]
            used.discard(w)
        return False

    if not backtrack(0):
        return None
    emap = _edge_bijection(g, h, vmap)
    if emap is None:  # pragma: no cover - pairs_ok should already prevent this
        return None
    return Renaming(vmap, emap)


def isomorphic(g: Graph, h: Graph) -> bool:
    return find_isomorphism(g, h) is not None


# -- canonical form ----------------------------------------------------------


def _canonical_vertex_order(g: Graph) -> list[int]:
    """A vertex order whose induced encoding is minimal over all orders.

    Level-synchronous search: place one vertex at a time, recording as the
    level's block the refinement color of the vertex plus the edges it closes
    with already-placed vertices.  Orders whose block sequence is not minimal
    are pruned; ties are deduplicated by the set of placed vertices (any
    completion is then identical).
    """
    if not g.vertices:
        return []
    colors = _refine_colors(g)
    states: dict[frozenset[int], tuple[int, ...]] = {frozenset(): ()}
    for _ in range(len(g.vertices)):
        candidates: dict[frozenset[int], tuple[int, ...]] = {}
        best = None
        for placed, order in states.items():
            pos = {v: i for i, v in enumerate(order)}
            for v in g.vertices - placed:
                new_edges = []
                for e in g.incident_edges(v):
                    s, lab, t = g.edges[e]
                    if (s == v or s in pos) and (t == v or t in pos):
                        k = len(pos)
                        new_edges.append((pos.get(s, k), lab, pos.get(t, k)))
                block = (colors[v], tuple(sorted(new_edges)))
                if best is None or block < best:
                    best = block
                    candidates = {placed | {v}: order + (v,)}
                elif block == best:
                    candidates.setdefault(placed | {v}, order + (v,))
        states = candidates
    return list(next(iter(states.values())))


def canonical_form(g: Graph) -> Graph:
    """Deterministic representative of ``g``'s isomorphism class.

    ``canonical_form(g) == canonical_form(h)`` holds exactly when the two
    graphs are isomorphic; vertices are renumbered ``0..n-1`` and edges
    ``0..m-1``.
    """
    order = _canonical_vertex_order(g)
    pos = {v: i for i, v in enumerate(order)}
    triples = sorted((pos[s], lab, pos[t]) for s, lab, t in g.edges.values())
    return Graph.from_triples(range(len(order)), triples)


def canonical_renaming(g: Graph) -> Renaming:
    """The renaming that carries ``g`` onto ``canonical_form(g)``."""
    order = _canonical_vertex_order(g)
    vmap = {v: i for i, v in enumerate(order)}
    ranked = sorted(g.edges, key=lambda e: (vmap[g.src(e)], g.label(e), vmap[g.tgt(e)], e))
    return Renaming(vmap, {e: i for i, e in enumerate(ranked)})
