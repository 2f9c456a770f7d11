"""Brute-force reference computations for small instances.

Nothing here calls into the propagation simulator, the path comparator or the
centrality accumulator: relationships are read off ``Topology.edges()`` and
every rule is re-derived locally.
"""
from __future__ import annotations

import itertools
import random
from fractions import Fraction
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Set, Tuple

MAX_PATH_ASES = 10
MAX_CENTRALITY_COUNTRIES = 6
MAX_CENTRALITY_PREFIXES = 12


class OracleSizeError(ValueError):
    pass


def _labels(topo) -> Dict[Tuple[int, int], str]:
    """``lab[(a, b)]`` is "up" if b is a's provider, "down" if b is a's customer, "peer", "sib"."""
    lab = {}
    for a, b, rel in topo.edges():
        name = rel.value
        if name == "provider":
            lab[(a, b)], lab[(b, a)] = "up", "down"
        elif name == "customer":
            lab[(a, b)], lab[(b, a)] = "down", "up"
        elif name == "peer":
            lab[(a, b)] = lab[(b, a)] = "peer"
        else:
            lab[(a, b)] = lab[(b, a)] = "sib"
    return lab


def _sibling_groups(lab) -> Dict[int, int]:
    parent: Dict[int, int] = {}

    def find(x):
        while parent.setdefault(x, x) != x:
            x = parent[x]
        return x

    for (a, b), kind in lab.items():
        find(a), find(b)
        if kind == "sib":
            ra, rb = find(a), find(b)
            if ra != rb:
                parent[max(ra, rb)] = min(ra, rb)
    return {x: find(x) for x in parent}


def valley_free(path: Sequence[int], lab) -> bool:
    # pattern over non-sibling steps: up* peer? down*
    steps = [lab[(a, b)] for a, b in zip(path, path[1:])]
    steps = [s for s in steps if s != "sib"]
    i = 0
    while i < len(steps) and steps[i] == "up":
        i += 1
    if i < len(steps) and steps[i] == "peer":
        i += 1
    while i < len(steps) and steps[i] == "down":
        i += 1
    return i == len(steps)


def loop_free(path: Sequence[int], groups) -> bool:
    if len(set(path)) != len(path):
        return False
    collapsed = [k for k, _ in itertools.groupby(groups.get(a, a) for a in path)]
    return len(collapsed) == len(set(collapsed))


def _announced(path, announce) -> bool:
    # only the origin's own export is filtered
    if announce and len(path) == 2 and path[-1] in announce:
        return path[-2] in announce[path[-1]]
    return True


def oracle_paths(topo, origin, announce: Optional[Mapping[int, Iterable[int]]] = None,
                 max_ases: int = MAX_PATH_ASES) -> Dict[int, Set[Tuple[int, ...]]]:
    """Every loop-free, valley-free path from each AS to ``origin`` (DFS)."""
    vertices = sorted(topo.vertices)
    if len(vertices) > max_ases:
        raise OracleSizeError(f"{len(vertices)} ASes exceeds oracle limit {max_ases}")
    lab = _labels(topo)
    groups = _sibling_groups(lab)
    announce = {o: set(ns) for o, ns in (announce or {}).items()}
    adj: Dict[int, List[int]] = {v: [] for v in vertices}
    for a, b in lab:
        adj.setdefault(a, []).append(b)
    out: Dict[int, Set[Tuple[int, ...]]] = {}

    def dfs(path):
        # path is (v, ..., origin); extend at the front
        if valley_free(path, lab) and loop_free(path, groups) and _announced(path, announce):
            out.setdefault(path[0], set()).add(path)
            for w in adj[path[0]]:
                if w not in path:
                    dfs((w,) + path)

    dfs((origin,))
    return out


def _suffix_rank(path, training):
    # longest suffix of `path` that is a suffix of some training path, and how many carry it
    for k in range(len(path)):
        suffix = path[k:]
        freq = sum(1 for t in training if len(t) >= len(suffix) and tuple(t[len(t) - len(suffix):]) == suffix)
        if freq:
            return (k, len(path), -freq, path)
    return (len(path), len(path), 0, path)


def _seeds(training, lab, groups):
    seeds: Dict[int, Set[Tuple[int, ...]]] = {}
    for t in training:
        t = tuple(t)
        for k in range(len(t)):
            s = t[k:]
            if all(e in lab for e in zip(s, s[1:])) and valley_free(s, lab) and loop_free(s, groups):
                seeds.setdefault(s[0], set()).add(s)
    return seeds


def oracle_rib(topo, training: Sequence[Sequence[int]],
               announce: Optional[Mapping[int, Iterable[int]]] = None,
               max_ases: int = MAX_PATH_ASES) -> Dict[int, Set[Tuple[int, ...]]]:
    """Candidate sets at the stable state, found greedily.

    Paths are fixed one at a time, always taking the globally cheapest path
    whose next hop is already fixed.  Extending a path by one AS always makes
    it more expensive, so a fixed choice can never be undercut later.  The
    candidate set of an AS is then its seeds plus every neighbour's best path
    that it may legally receive.
    """
    vertices = sorted(topo.vertices)
    if len(vertices) > max_ases:
        raise OracleSizeError(f"{len(vertices)} ASes exceeds oracle limit {max_ases}")
    lab = _labels(topo)
    groups = _sibling_groups(lab)
    announce = {o: set(ns) for o, ns in (announce or {}).items()}
    training = [tuple(t) for t in training]
    seeds = _seeds(training, lab, groups)
    nbrs: Dict[int, Set[int]] = {}
    for a, b in lab:
        nbrs.setdefault(a, set()).add(b)

    def legal(path):
        return valley_free(path, lab) and loop_free(path, groups) and _announced(path, announce)

    best: Dict[int, Tuple[int, ...]] = {}
    everyone = set(vertices) | set(seeds)
    while True:
        options = []
        for v in everyone - set(best):
            for s in seeds.get(v, ()):
                options.append(_suffix_rank(s, training))
            for u in nbrs.get(v, ()):
                if u in best:
                    cand = (v,) + best[u]
                    if legal(cand):
                        options.append(_suffix_rank(cand, training))
        if not options:
            break
        pick = min(options)[3]
        best[pick[0]] = pick

    rib = {}
    for v in everyone:
        cands = set(seeds.get(v, ()))
        for u in nbrs.get(v, ()):
            if u in best:
                cand = (v,) + best[u]
                if legal(cand):
                    cands.add(cand)
        if cands:
            rib[v] = cands
    return rib


def oracle_best(rib: Mapping[int, Set[Tuple[int, ...]]], training) -> Dict[int, Tuple[int, ...]]:
    training = [tuple(t) for t in training]
    return {v: min(cands, key=lambda p: _suffix_rank(p, training)) for v, cands in rib.items()}


def async_rib(topo, training, announce=None, rng: Optional[random.Random] = None,
              order: Optional[Sequence[int]] = None, max_rounds: int = 10_000):
    """Pull-style asynchronous simulation: activate ASes in a random (or given) order
    until no AS changes its best path.  Returns the final candidate sets."""
    lab = _labels(topo)
    groups = _sibling_groups(lab)
    announce = {o: set(ns) for o, ns in (announce or {}).items()}
    training = [tuple(t) for t in training]
    seeds = _seeds(training, lab, groups)
    nbrs: Dict[int, Set[int]] = {}
    for a, b in lab:
        nbrs.setdefault(a, set()).add(b)
    vertices = sorted(set(topo.vertices) | set(seeds))
    best: Dict[int, Tuple[int, ...]] = {}

    def cands(v):
        out = set(seeds.get(v, ()))
        for u in nbrs.get(v, ()):
            if u in best:
                c = (v,) + best[u]
                if valley_free(c, lab) and loop_free(c, groups) and _announced(c, announce):
                    out.add(c)
        return out

    for _ in range(max_rounds):
        seq = list(order) if order is not None else vertices[:]
        if order is None and rng is not None:
            rng.shuffle(seq)
        changed = False
        for v in seq:
            c = cands(v)
            new = min(c, key=lambda p: _suffix_rank(p, training)) if c else None
            if new != best.get(v):
                changed = True
                if new is None:
                    del best[v]
                else:
                    best[v] = new
        if not changed:
            return {v: cands(v) for v in vertices if cands(v)}
    raise RuntimeError("asynchronous simulation did not settle")


def oracle_centrality(pairs: Iterable[Tuple], prefix_country: Mapping,
                      max_countries: int = MAX_CENTRALITY_COUNTRIES,
                      max_prefixes: int = MAX_CENTRALITY_PREFIXES) -> Dict[str, Tuple[float, float]]:
    """Exact normalised (CC, SCC) per country by explicit double loops over prefix pairs.

    ``pairs`` holds ``(src_prefix, dst_prefix, best_path, alternates)`` tuples;
    weights are exact fractions of each country's address space.
    """
    countries = sorted(set(prefix_country.values()))
    if len(countries) > max_countries or len(prefix_country) > max_prefixes:
        raise OracleSizeError("instance too large for the centrality oracle")
    space = {c: sum(p.size() for p, cc in prefix_country.items() if cc == c) for c in countries}
    W = {p: Fraction(p.size(), space[cc]) for p, cc in prefix_country.items()}
    paths = {}
    for src, dst, best, alts in pairs:
        paths[(src, dst)] = (tuple(best), [tuple(a) for a in alts] or [tuple(best)])

    universe = set(countries)
    for best, alts in paths.values():
        universe.update(best)
        for a in alts:
            universe.update(a)

    out = {}
    for v in sorted(universe):
        cc_num = scc_num = den = Fraction(0)
        for rho_s in prefix_country:
            for rho_t in prefix_country:
                s, t = prefix_country[rho_s], prefix_country[rho_t]
                if s == t or v == s or v == t or (rho_s, rho_t) not in paths:
                    continue
                w = W[rho_s] * W[rho_t]
                best, alts = paths[(rho_s, rho_t)]
                den += w
                if v in best:
                    cc_num += w
                if all(v in a for a in alts):
                    scc_num += w
        out[v] = (float(cc_num / den) if den else 0.0, float(scc_num / den) if den else 0.0)
    return out
