"""Constructing, verifying and chaining rewrite steps.

A step replaces the match by a fresh copy of the right pattern and rebuilds
the patch around it: for every right type edge, each patch edge assigned to
its trace image spawns one new edge, placed by which endpoints the type edge
keeps on the pattern and which it hands to the context.  The certificate
produced alongside each step carries all witnesses, and ``verify_step``
re-checks them declaratively, independent of the constructive path.
"""

from __future__ import annotations

import itertools
import random as random_module
from dataclasses import dataclass

from .exceptions import (
    BoundTooSmall,
    DeterminismViolation,
    PgrError,
    StepLimitReached,
)
from .graph import (
    Graph,
    PatchDecomposition,
    Renaming,
    canonical_form,
    graph_union,
    rename_graph,
    validate_patch,
)
from .matching import Redex, context_of, find_redexes
from .rules import CONTEXT, QuasiRule, adherence_ok


@dataclass
class StepCertificate:
    """Witnesses that one rewrite step satisfies the step conditions."""

    redex: Redex
    rhs_instance: Renaming
    j_prime: Graph
    h_r: dict[int, int]
    sigma: dict[int, int]

    @property
    def instance_type(self):
        """The right patch type transported onto the fresh pattern copy."""
        return self.redex.rule.rhs.ptype.renamed(self.rhs_instance)


def _instantiate_rhs(rule: QuasiRule, counter) -> Renaming:
    pattern = rule.rhs.pattern
    vmap = {v: next(counter) for v in sorted(pattern.vertices)}
    emap = {e: next(counter) for e in sorted(pattern.edges)}
    return Renaming(vmap, emap)


def construct_rhs_patch(redex: Redex, fresh_base: int):
    """Build the replacement patch for a redex.

    Returns ``(rhs_instance, j_prime, h_r, sigma)`` where ``sigma`` pairs
    every new patch edge with the old patch edge it derives from.  Fresh ids
    are drawn from ``fresh_base`` upward.
    """
    rule = redex.rule
    counter = itertools.count(fresh_base)
    inst = _instantiate_rhs(rule, counter)
    t_l = rule.lhs.ptype.renamed(redex.embedding)
    t_r = rule.rhs.ptype
    patch = redex.decomposition.patch

    by_left: dict[int, list[int]] = {}
    for j in sorted(patch.edges):
        by_left.setdefault(redex.h_l[j], []).append(j)

    jp_edges = {}
    h_r = {}
    sigma = {}
    for t, (ts, tt) in sorted(t_r.edges.items()):
        left = rule.trace[t]
        lts, ltt = t_l.edges[left]
        for j in by_left.get(left, ()):
            js, lab, jt = patch.edges[j]
            if CONTEXT not in (ts, tt):
                new = (inst.vmap[ts], lab, inst.vmap[tt])
            elif ts == CONTEXT and lts == CONTEXT:
                new = (js, lab, inst.vmap[tt])
            elif tt == CONTEXT and ltt == CONTEXT:
                new = (inst.vmap[ts], lab, jt)
            elif ts == CONTEXT and ltt == CONTEXT:
                new = (jt, lab, inst.vmap[tt])
            else:  # tt == CONTEXT and lts == CONTEXT
                new = (inst.vmap[ts], lab, js)
            eid = next(counter)
            jp_edges[eid] = new
            h_r[eid] = t
            sigma[eid] = j
    vertices = {s for s, _, _ in jp_edges.values()} | {t for _, _, t in jp_edges.values()}
    return inst, Graph(vertices, jp_edges), h_r, sigma


def apply_at(host: Graph, redex: Redex,
             fresh_base: int | None = None) -> tuple[Graph, StepCertificate]:
    """Perform the step at a redex; the host itself is untouched.

    The result keeps the context ids verbatim; the fresh pattern copy and the
    new patch edges take ids from ``fresh_base`` (default: above every id in
    the host and the rule).
    """
    rule = redex.rule
    floor = max(host.max_id(), rule.rhs.pattern.max_id()) + 1
    if fresh_base is None:
        fresh_base = floor
    elif fresh_base < floor:
        raise ValueError(f"fresh base {fresh_base} collides with existing ids "
                         f"(needs at least {floor})")
    inst, j_prime, h_r, sigma = construct_rhs_patch(redex, fresh_base)
    m_prime = rename_graph(rule.rhs.pattern, inst)
    result = graph_union(graph_union(redex.decomposition.context, j_prime), m_prime)
    return result, StepCertificate(redex, inst, j_prime, h_r, sigma)


def verify_step(host: Graph, result: Graph, cert: StepCertificate) -> bool:
    """Re-check a certificate against the declarative step conditions.

    Verifies both compositions, both adherence maps, and per right type edge
    that sigma restricts to a label-preserving, context-respecting bijection
    onto the corresponding left patch edges.  Malformed certificates count
    as failures rather than raising.
    """
    try:
        return _verify_step_strict(host, result, cert)
    except (PgrError, KeyError, ValueError):
        return False


def _verify_step_strict(host: Graph, result: Graph, cert: StepCertificate) -> bool:
    redex = cert.redex
    rule = redex.rule
    d = redex.decomposition

    if validate_patch(d):
        return False
    if graph_union(graph_union(d.context, d.patch), d.match) != host:
        return False
    if rename_graph(rule.lhs.pattern, redex.embedding) != d.match:
        return False
    t_l = rule.lhs.ptype.renamed(redex.embedding)
    if not adherence_ok(d.patch, t_l, d, redex.h_l):
        return False

    m_prime = rename_graph(rule.rhs.pattern, cert.rhs_instance)
    d_prime = PatchDecomposition(d.context, cert.j_prime, m_prime)
    if validate_patch(d_prime):
        return False
    if graph_union(graph_union(d.context, cert.j_prime), m_prime) != result:
        return False
    t_r = cert.instance_type
    if not adherence_ok(cert.j_prime, t_r, d_prime, cert.h_r):
        return False

    if set(cert.sigma) != set(cert.j_prime.edges):
        return False
    for t in t_r.edges:
        left = rule.trace[t]
        new_edges = sorted(e for e, te in cert.h_r.items() if te == t)
        old_edges = sorted(e for e, te in redex.h_l.items() if te == left)
        images = [cert.sigma[e] for e in new_edges]
        if sorted(images) != old_edges:
            return False
        for e in new_edges:
            j = cert.sigma[e]
            if cert.j_prime.label(e) != d.patch.label(j):
                return False
            cxt_new = context_of(e, cert.h_r, d_prime, t_r)
            cxt_old = context_of(j, redex.h_l, d, t_l)
            if not cxt_new <= cxt_old:
                return False
    return True


def brute_force_step_oracle(host: Graph, redex: Redex,
                            size_bound: int = 12) -> list[Graph]:
    """Independent enumeration of every result the step conditions allow.

    Candidate replacement patches are generated from the declarative
    constraints alone: per right type edge, as many edges as its trace image
    has adherents, each endpoint either forced by the type edge or drawn from
    the context vertices the old edges touch, labels drawn from the old label
    multiset in every arrangement.  Every candidate is paired with every
    per-type-edge bijection and pushed through ``verify_step``; surviving
    results are deduplicated by canonical form.
    """
    rule = redex.rule
    d = redex.decomposition
    fresh_base = max(host.max_id(), rule.rhs.pattern.max_id()) + 1
    counter = itertools.count(fresh_base)
    inst = _instantiate_rhs(rule, counter)
    m_prime = rename_graph(rule.rhs.pattern, inst)
    t_l = rule.lhs.ptype.renamed(redex.embedding)
    t_r = rule.rhs.ptype

    by_left: dict[int, list[int]] = {}
    for j in sorted(d.patch.edges):
        by_left.setdefault(redex.h_l[j], []).append(j)

    needed = {t: len(by_left.get(rule.trace[t], ()))
              for t in t_r.edges}
    total = sum(needed.values())
    if total > size_bound:
        raise BoundTooSmall(f"replacement patch needs {total} edges, "
                            f"bound is {size_bound}")

    per_type_options: list[tuple[int, list[list[tuple[int, str, int]]]]] = []
    for t, (ts, tt) in sorted(t_r.edges.items()):
        old = by_left.get(rule.trace[t], [])
        if not old:
            per_type_options.append((t, [[]]))
            continue
        labels = sorted(d.patch.label(j) for j in old)
        ctx_choices = sorted({v for j in old
                              for v in context_of(j, redex.h_l, d, t_l)})
        slot_endpoints = []
        if ts == CONTEXT:
            sources = ctx_choices
        else:
            sources = [inst.vmap[ts]]
        if tt == CONTEXT:
            targets = ctx_choices
        else:
            targets = [inst.vmap[tt]]
        slot_endpoints = [(s, t2) for s in sources for t2 in targets]
        combos = []
        seen = set()
        for label_perm in itertools.permutations(labels):
            if label_perm in seen:
                continue
            seen.add(label_perm)
            for ends in itertools.product(slot_endpoints, repeat=len(old)):
                combos.append([(s, lab, t2) for (s, t2), lab in zip(ends, label_perm)])
        per_type_options.append((t, combos))

    results: dict[Graph, Graph] = {}
    for pick in itertools.product(*[opts for _, opts in per_type_options]):
        jp_edges = {}
        h_r = {}
        slots_by_type = {}
        eid = itertools.count(fresh_base + 1000)
        for (t, _), triples in zip(per_type_options, pick):
            slots = []
            for s, lab, t2 in triples:
                e = next(eid)
                jp_edges[e] = (s, lab, t2)
                h_r[e] = t
                slots.append(e)
            slots_by_type[t] = slots
        vertices = {s for s, _, _ in jp_edges.values()} | \
                   {t2 for _, _, t2 in jp_edges.values()}
        j_prime = Graph(vertices, jp_edges)
        try:
            candidate = graph_union(graph_union(d.context, j_prime), m_prime)
        except PgrError:
            continue
        sigma_spaces = []
        for t, _ in per_type_options:
            old = by_left.get(rule.trace[t], [])
            sigma_spaces.append([dict(zip(slots_by_type[t], perm))
                                 for perm in itertools.permutations(old)])
        for sigma_parts in itertools.product(*sigma_spaces):
            sigma = {}
            for part in sigma_parts:
                sigma.update(part)
            cert = StepCertificate(redex, inst, j_prime, h_r, sigma)
            if verify_step(host, candidate, cert):
                key = canonical_form(candidate)
                results.setdefault(key, candidate)
                break
    return sorted(results,
                  key=lambda g: (len(g.vertices), tuple(sorted(g.edges.values()))))


def successors(host: Graph, system: dict[str, QuasiRule], dedup: bool = True,
               cap: int | None = None) -> tuple[list[tuple[str, Graph]], bool]:
    """All one-step results over all rules of the system, in rule order.

    With ``dedup`` the list keeps one representative per isomorphism class.
    """
    out = []
    seen = set()
    truncated = False
    for name, rule in system.items():
        redexes, cut = find_redexes(host, rule, cap)
        truncated = truncated or cut
        for redex in redexes:
            result, _ = apply_at(host, redex)
            if dedup:
                key = canonical_form(result)
                if key in seen:
                    continue
                seen.add(key)
            out.append((name, result))
    return out, truncated


@dataclass(frozen=True)
class StepRecord:
    """One entry of a normalization trace."""

    rule: str
    match_vertices: tuple[int, ...]
    match_edges: tuple[int, ...]


def normalize(host: Graph, system: dict[str, QuasiRule], strategy: str = "first",
              seed: int | None = None, max_steps: int = 10000,
              cap: int | None = None,
              canonical: bool = False) -> tuple[Graph, list[StepRecord]]:
    """Apply redexes until none remains.

    ``first`` picks the first redex of the first applicable rule in declared
    order; ``random`` draws uniformly from all (rule, redex) pairs with the
    given seed.  Raises StepLimitReached (carrying the partial trace) if no
    normal form is found within ``max_steps``.  ``canonical`` renames the
    final result into canonical form; it stays off by default so trace ids
    keep pointing into the intermediate graphs.
    """
    if strategy not in ("first", "random"):
        raise ValueError(f"unknown strategy {strategy!r}")
    rng = random_module.Random(seed)
    g = host
    trace: list[StepRecord] = []
    for _ in range(max_steps):
        choice = None
        if strategy == "first":
            for name, rule in system.items():
                redexes, _ = find_redexes(g, rule, cap)
                if redexes:
                    choice = (name, redexes[0])
                    break
        else:
            pool = []
            for name, rule in system.items():
                redexes, _ = find_redexes(g, rule, cap)
                pool.extend((name, r) for r in redexes)
            if pool:
                choice = pool[rng.randrange(len(pool))]
        if choice is None:
            return (canonical_form(g) if canonical else g), trace
        name, redex = choice
        g, _ = apply_at(g, redex)
        mv, me = redex.match_summary()
        trace.append(StepRecord(name, mv, me))
    # One more look: the limit only matters if a redex is still there.
    if any(find_redexes(g, rule, cap)[0] for rule in system.values()):
        raise StepLimitReached(g, trace)
    return (canonical_form(g) if canonical else g), trace


def check_rule_determinism(rule: QuasiRule, hosts: list[Graph],
                           cap: int | None = None) -> dict[str, int]:
    """Apply every redex twice with different fresh bases and shuffled
    enumeration; isomorphic results are required each time.

    Only meaningful for rules with a simple left patch type; quasi rules are
    rejected outright.
    """
    if not rule.deterministic:
        raise ValueError("rule is quasi; determinism is not claimed for it")
    from .graph import find_isomorphism

    checked = 0
    for host in hosts:
        redexes, _ = find_redexes(host, rule, cap)
        by_location: dict[tuple, list[Redex]] = {}
        for redex in redexes:
            by_location.setdefault(redex.match_summary(), []).append(redex)
        for group in by_location.values():
            # Same decomposition: every derivation from it must agree up to
            # isomorphism, whatever instance ids or embedding variant.
            reference, _ = apply_at(host, group[0])
            for redex in group:
                base = max(host.max_id(), rule.rhs.pattern.max_id()) + 7919
                for variant in (apply_at(host, redex)[0],
                                apply_at(host, redex, fresh_base=base)[0]):
                    if find_isomorphism(reference, variant) is None:
                        raise DeterminismViolation(
                            f"derivations at one location differ on {host!r}")
                    checked += 1
    return {"hosts": len(hosts), "steps_checked": checked}
