"""Patch types, schemes and rewrite rules.

A rule is a pair of schemes, each a pattern graph annotated with a *patch
type*: a set of unlabeled placeholder edges over the pattern vertices plus
the reserved context endpoint ``CONTEXT``.  Each type edge stands for a set
of patch edges around a match.  A trace function maps every right type edge
back to a left type edge, saying how the corresponding patch edges are
moved, duplicated, inverted or dropped by a step.

Rules whose left patch type is simple admit exactly one adherence map per
match and therefore rewrite deterministically; the general ("quasi") case
allows several.
"""

from __future__ import annotations

import itertools
import os
import warnings
from collections import Counter
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field

from .exceptions import (
    DanglingRhsName,
    InvalidRule,
    NotAMorphism,
    PositionMismatch,
    SharedName,
)
from .graph import Graph, PatchDecomposition, Renaming, _edge_bijection, rename_graph

# Reserved endpoint standing for "some context vertex".  Vertex ids are
# integers, so the sentinel can never collide with one.
CONTEXT = "ctx"

Endpoint = int | str  # a vertex id or CONTEXT

DEFAULT_MAP_CAP = 4096


def default_map_cap() -> int:
    """Adherence-map enumeration cap; PGR_MAX_MAPS overrides the default."""
    raw = os.environ.get("PGR_MAX_MAPS")
    if raw is None:
        return DEFAULT_MAP_CAP
    cap = int(raw)
    if cap <= 0:
        raise ValueError("PGR_MAX_MAPS must be positive")
    return cap


def _ep_key(ep: Endpoint):
    return (1, 0) if ep == CONTEXT else (0, ep)


class PatchType:
    """Unlabeled placeholder edges over a pattern graph and CONTEXT."""

    __slots__ = ("pattern", "edges")

    def __init__(self, pattern: Graph, edges: Mapping[int, tuple[Endpoint, Endpoint]] = ()):
        self.pattern = pattern
        self.edges = {int(e): (s, t) for e, (s, t) in dict(edges).items()}
        for e, (s, t) in self.edges.items():
            if s == CONTEXT and t == CONTEXT:
                raise ValueError(f"type edge {e} lies entirely in the context")
            for ep in (s, t):
                if ep != CONTEXT and ep not in pattern.vertices:
                    raise ValueError(f"type edge {e}: endpoint {ep} not a pattern vertex")

    def is_simple(self) -> bool:
        pairs = list(self.edges.values())
        return len(pairs) == len(set(pairs))

    def renamed(self, ren: Renaming) -> "PatchType":
        """Transport the annotation onto the renamed pattern; ids are kept."""
        new_pattern = rename_graph(self.pattern, ren)

        def move(ep):
            return CONTEXT if ep == CONTEXT else ren.vmap[ep]

        return PatchType(new_pattern,
                         {e: (move(s), move(t)) for e, (s, t) in self.edges.items()})

    def sorted_edges(self):
        return sorted(self.edges.items())

    def __eq__(self, other):
        if not isinstance(other, PatchType):
            return NotImplemented
        return self.pattern == other.pattern and self.edges == other.edges

    def __repr__(self):
        es = ", ".join(f"{e}:{s}->{t}" for e, (s, t) in self.sorted_edges())
        return f"PatchType([{es}])"


@dataclass(frozen=True)
class Scheme:
    """A pattern together with the patch type that annotates it."""

    pattern: Graph
    ptype: PatchType

    def __post_init__(self):
        if self.ptype.pattern != self.pattern:
            raise ValueError("patch type does not annotate this pattern")


@dataclass(frozen=True)
class QuasiRule:
    """A pair of schemes plus the trace from right type edges to left ones."""

    lhs: Scheme
    rhs: Scheme
    trace: dict[int, int]

    @property
    def deterministic(self) -> bool:
        return self.lhs.ptype.is_simple()


def validate_quasi_rule(rule: QuasiRule) -> list[str]:
    """Structural check report for a rule; empty means valid."""
    out = []
    t_l, t_r = rule.lhs.ptype, rule.rhs.ptype
    if set(rule.trace) != set(t_r.edges):
        out.append("trace is not total on the right type edges")
    for e, target in rule.trace.items():
        if target not in t_l.edges:
            out.append(f"trace of type edge {e} is not a left type edge")
    for e, (s, t) in t_r.edges.items():
        target = rule.trace.get(e)
        if target is None or target not in t_l.edges:
            continue
        if CONTEXT in (s, t) and CONTEXT not in t_l.edges[target]:
            out.append(f"type edge {e} touches the context but its trace "
                       f"image {target} does not")
    id_sets = [set(rule.lhs.pattern.edges), set(rule.rhs.pattern.edges),
               set(t_l.edges), set(t_r.edges)]
    for a, b in itertools.combinations(range(4), 2):
        if id_sets[a] & id_sets[b]:
            out.append("edge/type-edge ids are not unique across the rule")
            break
    return out


def build_rule(lhs_pattern: Graph,
               lhs_types: Mapping[object, tuple[Endpoint, Endpoint]],
               rhs_pattern: Graph,
               rhs_types: Iterable[tuple[Endpoint, Endpoint, object]],
               validate: bool = True) -> QuasiRule:
    """Assemble a rule from keyed type edges.

    ``lhs_types`` maps a key to an endpoint pair; every right type edge cites
    the key of the left edge it traces to.  Type-edge ids are allocated above
    both patterns' edge ids.
    """
    next_id = max(max(lhs_pattern.edges, default=-1),
                  max(rhs_pattern.edges, default=-1)) + 1
    lhs_ids = {}
    t_l = {}
    for key, (s, t) in lhs_types.items():
        if key in lhs_ids:
            raise InvalidRule([f"duplicate left type-edge key {key!r}"])
        lhs_ids[key] = next_id
        t_l[next_id] = (s, t)
        next_id += 1
    t_r = {}
    trace = {}
    for s, t, key in rhs_types:
        if key not in lhs_ids:
            raise InvalidRule([f"right type edge cites unknown key {key!r}"])
        t_r[next_id] = (s, t)
        trace[next_id] = lhs_ids[key]
        next_id += 1
    rule = QuasiRule(Scheme(lhs_pattern, PatchType(lhs_pattern, t_l)),
                     Scheme(rhs_pattern, PatchType(rhs_pattern, t_r)),
                     trace)
    if validate:
        violations = validate_quasi_rule(rule)
        if violations:
            raise InvalidRule(violations)
    return rule


# -- adherence ---------------------------------------------------------------


def edge_adheres(d: PatchDecomposition, patch_edge: int,
                 ptype: PatchType, type_edge: int) -> bool:
    """Decide whether one patch edge may stand in for one type edge.

    The patch type must already live over the match graph of ``d`` (i.e. its
    non-context endpoints are match vertices of the host).
    """
    js, _, jt = d.patch.edges[patch_edge]
    ts, tt = ptype.edges[type_edge]
    if js in d.context.vertices and ts != CONTEXT:
        return False
    if js in d.match.vertices and js != ts:
        return False
    if jt in d.context.vertices and tt != CONTEXT:
        return False
    if jt in d.match.vertices and jt != tt:
        return False
    return True


def enumerate_adherence_maps(j: Graph, ptype: PatchType, d: PatchDecomposition,
                             cap: int | None = None) -> tuple[list[dict[int, int]], bool]:
    """All total adherence maps from patch ``j`` into ``ptype``.

    Returns the maps in lexicographic order over (patch edge id, type edge
    id) together with a flag telling whether the listing was cut off at
    ``cap``.  An empty list means the patch does not adhere at all.
    """
    if cap is None:
        cap = default_map_cap()
    edge_ids = sorted(j.edges)
    candidates = []
    for e in edge_ids:
        cands = [te for te, _ in ptype.sorted_edges() if edge_adheres(d, e, ptype, te)]
        if not cands:
            return [], False
        candidates.append(cands)
    total = 1
    for c in candidates:
        total *= len(c)
    maps = [dict(zip(edge_ids, combo))
            for combo in itertools.islice(itertools.product(*candidates), cap)]
    return maps, total > cap


def adherence_ok(j: Graph, ptype: PatchType, d: PatchDecomposition,
                 mapping: Mapping[int, int]) -> bool:
    """Check a given map: total on the patch and edge-wise adherent."""
    if set(mapping) != set(j.edges):
        return False
    return all(te in ptype.edges and edge_adheres(d, e, ptype, te)
               for e, te in mapping.items())


# -- shorthand notation ------------------------------------------------------


@dataclass
class RuleSketch:
    """Surface form of a rule before the shorthand notations are expanded.

    ``*_names`` carries per-vertex name annotations; ``black`` marks vertices
    (present with the same id on both sides) around which every possible type
    edge is generated; ``*_forbids`` removes otherwise-implicit name edges,
    given as ``(src_vertex, tgt_vertex, name_x, name_y)``.
    """

    lhs: Graph
    rhs: Graph
    lhs_names: dict[int, tuple[str, ...]] = field(default_factory=dict)
    rhs_names: dict[int, tuple[str, ...]] = field(default_factory=dict)
    black: frozenset[int] = frozenset()
    lhs_types: dict[object, tuple[Endpoint, Endpoint]] = field(default_factory=dict)
    rhs_types: list[tuple[Endpoint, Endpoint, object]] = field(default_factory=list)
    lhs_forbids: frozenset[tuple[int, int, str, str]] = frozenset()
    rhs_forbids: frozenset[tuple[int, int, str, str]] = frozenset()


def _name_edges(pattern: Graph, names: Mapping[int, tuple[str, ...]],
                forbids: frozenset) -> list[tuple[object, tuple[Endpoint, Endpoint]]]:
    """The implicit type edges induced by name annotations, keyed by name."""
    named = sorted({(v, x) for v, xs in names.items() for x in xs})
    for v, w, x, y in forbids:
        if (v, x) not in set(named) or (w, y) not in set(named):
            warnings.warn(f"forbidden mark ({x},{y}) on {v}->{w} matches no "
                          f"implicit type edge", stacklevel=3)
    out = []
    for v, x in named:
        out.append(((CONTEXT, x), (CONTEXT, v)))
        out.append(((x, CONTEXT), (v, CONTEXT)))
    for (v, x), (w, y) in itertools.product(named, named):
        if (v, w, x, y) not in forbids:
            out.append(((x, y), (v, w)))
    return out


def desugar_rule(sketch: RuleSketch) -> QuasiRule:
    """Expand name, forbidden-edge and black-node annotations into a rule."""
    seen: dict[str, int] = {}
    for v in sorted(sketch.lhs_names):
        for x in sketch.lhs_names[v]:
            if x in seen and seen[x] != v:
                raise SharedName(f"name {x!r} appears on distinct left nodes "
                                 f"{seen[x]} and {v}")
            seen[x] = v
    lhs_name_set = {x for xs in sketch.lhs_names.values() for x in xs}
    for v in sorted(sketch.rhs_names):
        for x in sketch.rhs_names[v]:
            if x not in lhs_name_set:
                raise DanglingRhsName(f"right name {x!r} has no left counterpart")
    for b in sorted(sketch.black):
        if b not in sketch.lhs.vertices or b not in sketch.rhs.vertices:
            raise PositionMismatch(f"black node {b} is not present on both sides")

    lhs_types: dict[object, tuple[Endpoint, Endpoint]] = dict(sketch.lhs_types)
    rhs_types: list[tuple[Endpoint, Endpoint, object]] = list(sketch.rhs_types)

    for key, pair in _name_edges(sketch.lhs, sketch.lhs_names, sketch.lhs_forbids):
        if key in lhs_types:
            raise InvalidRule([f"generated type-edge key {key!r} already taken"])
        lhs_types[key] = pair
    for key, (s, t) in _name_edges(sketch.rhs, sketch.rhs_names, sketch.rhs_forbids):
        if key not in lhs_types:
            raise DanglingRhsName(f"right name edge {key!r} lacks a left "
                                  f"counterpart (absent or forbidden)")
        rhs_types.append((s, t, key))

    blacks = sorted(sketch.black)
    black_pairs = [(s, t) for s in blacks for t in blacks]
    black_pairs += [(CONTEXT, b) for b in blacks] + [(b, CONTEXT) for b in blacks]
    for s, t in black_pairs:
        key = ("black", s, t)
        lhs_types[key] = (s, t)
        rhs_types.append((s, t, key))

    return build_rule(sketch.lhs, lhs_types, sketch.rhs, rhs_types)


def expand_name_shorthand(sketch: RuleSketch) -> QuasiRule:
    """Expand a sketch that uses only name annotations and forbidden marks."""
    if sketch.black:
        raise ValueError("sketch carries black-node marks; use desugar_rule")
    return desugar_rule(sketch)


def expand_black_node_shorthand(sketch: RuleSketch) -> QuasiRule:
    """Expand a sketch that uses only black-node marks."""
    if sketch.lhs_names or sketch.rhs_names:
        raise ValueError("sketch carries name annotations; use desugar_rule")
    return desugar_rule(sketch)


# -- rule isomorphism --------------------------------------------------------


def _vertex_signature(rule: QuasiRule, v: int, in_lhs: bool, in_rhs: bool):
    sig = [in_lhs, in_rhs]
    for side in (rule.lhs, rule.rhs):
        pat = side.pattern
        if v in pat.vertices:
            sig.append(tuple(sorted((pat.label(e), "o") for e in pat.out_edges(v))))
            sig.append(tuple(sorted((pat.label(e), "i") for e in pat.in_edges(v))))
            touch = sorted(("c" if s == CONTEXT else "v", "c" if t == CONTEXT else "v",
                            s == v, t == v)
                           for s, t in side.ptype.edges.values() if v in (s, t))
            sig.append(tuple(touch))
        else:
            sig.append(None)
            sig.append(None)
            sig.append(None)
    return tuple(sig)


def _type_groups(ptype: PatchType, vmap: Mapping[int, int] | None):
    """Type edges grouped by endpoint pair, optionally transported by vmap."""

    def move(ep):
        if ep == CONTEXT:
            return CONTEXT
        return vmap[ep] if vmap is not None else ep

    groups: dict[tuple, list[int]] = {}
    for e, (s, t) in ptype.sorted_edges():
        groups.setdefault((move(s), move(t)), []).append(e)
    return groups


def rules_isomorphic(r1: QuasiRule, r2: QuasiRule) -> Renaming | None:
    """A witness renaming between two rules, or None.

    The witness fixes CONTEXT, maps both patterns and patch types, and
    commutes with the traces.
    """
    v1 = sorted(r1.lhs.pattern.vertices | r1.rhs.pattern.vertices)
    v2 = sorted(r2.lhs.pattern.vertices | r2.rhs.pattern.vertices)
    if len(v1) != len(v2):
        return None
    sizes1 = (len(r1.lhs.pattern.edges), len(r1.rhs.pattern.edges),
              len(r1.lhs.ptype.edges), len(r1.rhs.ptype.edges))
    sizes2 = (len(r2.lhs.pattern.edges), len(r2.rhs.pattern.edges),
              len(r2.lhs.ptype.edges), len(r2.rhs.ptype.edges))
    if sizes1 != sizes2:
        return None

    def memberships(rule, v):
        return (v in rule.lhs.pattern.vertices, v in rule.rhs.pattern.vertices)

    sig2: dict[tuple, list[int]] = {}
    for v in v2:
        sig2.setdefault(_vertex_signature(r2, v, *memberships(r2, v)), []).append(v)

    cand = {}
    for v in v1:
        key = _vertex_signature(r1, v, *memberships(r1, v))
        if key not in sig2:
            return None
        cand[v] = sig2[key]

    order = sorted(v1, key=lambda v: (len(cand[v]), v))

    def check_vmap(vmap):
        for side1, side2 in ((r1.lhs, r2.lhs), (r1.rhs, r2.rhs)):
            c1 = Counter((vmap[s], lab, vmap[t]) for s, lab, t in side1.pattern.edges.values())
            c2 = Counter(side2.pattern.edges.values())
            if c1 != c2:
                return None
            if {vmap[v] for v in side1.pattern.vertices} != set(side2.pattern.vertices):
                return None
        # Left type edges: any within-group pairing works, but the choice must
        # let the right groups commute with both traces.
        lgroups1 = _type_groups(r1.lhs.ptype, vmap)
        lgroups2 = _type_groups(r2.lhs.ptype, None)
        rgroups1 = _type_groups(r1.rhs.ptype, vmap)
        rgroups2 = _type_groups(r2.rhs.ptype, None)
        if set(lgroups1) != set(lgroups2) or set(rgroups1) != set(rgroups2):
            return None
        if any(len(lgroups1[k]) != len(lgroups2[k]) for k in lgroups1):
            return None
        if any(len(rgroups1[k]) != len(rgroups2[k]) for k in rgroups1):
            return None

        def assign_left(keys, acc):
            if not keys:
                yield dict(acc)
                return
            k, rest = keys[0], keys[1:]
            for perm in itertools.permutations(lgroups2[k]):
                step = dict(zip(lgroups1[k], perm))
                yield from assign_left(rest, {**acc, **step})

        for lmap in assign_left(sorted(lgroups1, key=lambda k: (_ep_key(k[0]), _ep_key(k[1]))), {}):
            rmap = {}
            ok = True
            for k in sorted(rgroups1, key=lambda k: (_ep_key(k[0]), _ep_key(k[1]))):
                matched = None
                for perm in itertools.permutations(rgroups2[k]):
                    trial = dict(zip(rgroups1[k], perm))
                    if all(r2.trace[img] == lmap[r1.trace[e]] for e, img in trial.items()):
                        matched = trial
                        break
                if matched is None:
                    ok = False
                    break
                rmap.update(matched)
            if ok:
                emap = dict(lmap)
                emap.update(rmap)
                for side1, side2 in ((r1.lhs.pattern, r2.lhs.pattern),
                                     (r1.rhs.pattern, r2.rhs.pattern)):
                    part = _edge_bijection(side1, side2, vmap)
                    if part is None:
                        return None
                    emap.update(part)
                return Renaming(vmap, emap)
        return None

    vmap: dict[int, int] = {}
    used: set[int] = set()

    def backtrack(i):
        if i == len(order):
            return check_vmap(dict(vmap))
        v = order[i]
        for w in cand[v]:
            if w in used:
                continue
            m1 = memberships(r1, v)
            if m1 != memberships(r2, w):
                continue
            vmap[v] = w
            used.add(w)
            found = backtrack(i + 1)
            if found is not None:
                return found
            del vmap[v]
            used.discard(w)
        return None

    return backtrack(0)


# -- importing span-style rules ---------------------------------------------


@dataclass(frozen=True)
class Morphism:
    """A total graph morphism given by vertex and edge maps."""

    vmap: dict[int, int]
    emap: dict[int, int]

    @classmethod
    def identity(cls, g: Graph) -> "Morphism":
        return cls({v: v for v in g.vertices}, {e: e for e in g.edges})


def _check_morphism(src: Graph, dst: Graph, m: Morphism, what: str) -> None:
    for v in src.vertices:
        if m.vmap.get(v) not in dst.vertices:
            raise NotAMorphism(f"{what}: vertex {v} has no valid image")
    for e, (s, lab, t) in src.edges.items():
        img = m.emap.get(e)
        if img not in dst.edges:
            raise NotAMorphism(f"{what}: edge {e} has no valid image")
        s2, lab2, t2 = dst.edges[img]
        if (m.vmap[s], lab, m.vmap[t]) != (s2, lab2, t2):
            raise NotAMorphism(f"{what}: edge {e} is not preserved")


def _interface_names(pattern: Graph, interface: Graph, m: Morphism):
    names: dict[int, tuple[str, ...]] = {}
    for v in pattern.vertices:
        pre = sorted(str(k) for k in interface.vertices if m.vmap[k] == v)
        if pre:
            names[v] = tuple(pre)
    return names


def _separate_edge_ids(l: Graph, r: Graph, psi: Morphism) -> tuple[Graph, Morphism]:
    """Shift right-pattern edge ids clear of the left pattern's.

    Sharing vertex ids across the sides of a rule is meaningful (positional
    identity); sharing edge ids is not, so callers passing e.g. L = R get
    the right copy relabeled.
    """
    clash = set(l.edges) & set(r.edges)
    if not clash:
        return r, psi
    base = max(l.max_id(), r.max_id()) + 1
    shift = {e: base + i for i, e in enumerate(sorted(r.edges))}
    moved = Graph(r.vertices, {shift[e]: triple for e, triple in r.edges.items()})
    return moved, Morphism(psi.vmap, {e: shift[img] for e, img in psi.emap.items()})


def import_dpo(l: Graph, k: Graph, r: Graph, phi: Morphism, psi: Morphism,
               injective_phi: bool = True) -> QuasiRule:
    """Translate a span rule L <- K -> R into a patch rewrite rule.

    Pattern vertices are annotated with the names of their interface
    preimages and the annotation is expanded; vertices outside the image of
    the interface get no names, so any incident patch edge blocks the rule
    (the usual gluing behavior).  A non-injective left leg yields a quasi
    rule that distributes patch edges among the split copies.
    """
    _check_morphism(k, l, phi, "left leg")
    _check_morphism(k, r, psi, "right leg")
    if injective_phi and len(set(phi.vmap.values())) != len(phi.vmap):
        raise NotAMorphism("left leg was declared injective but is not")
    r, psi = _separate_edge_ids(l, r, psi)
    sketch = RuleSketch(l, r,
                        lhs_names=_interface_names(l, k, phi),
                        rhs_names=_interface_names(r, k, psi))
    return expand_name_shorthand(sketch)


def import_spo(l: Graph, k: Graph, r: Graph, phi: Morphism, psi: Morphism) -> QuasiRule:
    """As ``import_dpo``, but deletion wins over blocking.

    Pattern vertices without an interface preimage get a fresh left-only
    name, so their incident patch edges match and are dropped by the step
    instead of preventing it.
    """
    _check_morphism(k, l, phi, "left leg")
    _check_morphism(k, r, psi, "right leg")
    r, psi = _separate_edge_ids(l, r, psi)
    lhs_names = _interface_names(l, k, phi)
    for v in sorted(l.vertices):
        if v not in lhs_names:
            lhs_names[v] = (f"dangling{v}",)
    sketch = RuleSketch(l, r,
                        lhs_names=lhs_names,
                        rhs_names=_interface_names(r, k, psi))
    return expand_name_shorthand(sketch)
