"""Per-prefix BGP propagation primed with known RIB paths.

Each AS keeps every path currently offered by its neighbours (one per
neighbour, later offers replace earlier ones) plus the known-path suffixes it
was seeded with.  Candidates are ranked by :func:`path_key`:

* ``ulen``  -- leading hops not covered by a known suffix (fewer is better),
* length    -- AS hop count (shorter is better),
* ``freq``  -- how many training routes carry that known suffix (more is better),
* the ASN sequence itself as a final total-order tiebreak.

Because ``(ulen, length)`` strictly grows when a path is extended by one AS,
the ranking admits no dispute wheel and the work queue reaches the same fixed
point under any processing order.
"""
from __future__ import annotations

import logging
from collections import Counter, deque
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, NamedTuple, Optional, Sequence, Set, Tuple

from .asrel import Topology, UnknownEdgeError, is_valley_free, learned_relationship, may_export
from .net import AsPath, Asn, ParseError, Prefix, parse_asn, parse_prefix
from .rib import RibCorpus

log = logging.getLogger(__name__)

DEFAULT_POP_FACTOR = 64
DEFAULT_MAX_ALTERNATES = 16


class PropagationError(RuntimeError):
    """Raised when a prefix exceeds its queue-pop budget."""

    def __init__(self, prefix, pops, queue_len):
        super().__init__(f"propagation for {prefix} did not converge after {pops} queue pops "
                         f"({queue_len} ASes still queued)")
        self.prefix = prefix
        self.pops = pops


class PathRank(NamedTuple):
    ulen: int
    length: int
    freq: int


def known_suffixes(paths: Iterable[Sequence[Asn]]) -> Counter:
    """Count, for every suffix of every training path, how many paths carry it."""
    counts = Counter()
    for path in paths:
        path = tuple(path)
        for k in range(len(path)):
            counts[path[k:]] += 1
    return counts


def rank_path(path: Sequence[Asn], known: Mapping[AsPath, int]) -> PathRank:
    path = tuple(path)
    for k in range(len(path)):
        freq = known.get(path[k:])
        if freq:
            return PathRank(k, len(path), freq)
    return PathRank(len(path), len(path), 0)


def path_key(path: AsPath, rank: PathRank):
    return (rank.ulen, rank.length, -rank.freq, path)


def compare_paths(p1: Sequence[Asn], p2: Sequence[Asn], known: Mapping[AsPath, int]) -> int:
    """Negative if ``p1`` is preferred, positive if ``p2`` is, 0 if identical."""
    r1, r2 = rank_path(p1, known), rank_path(p2, known)
    if r1.ulen != r2.ulen:
        return r1.ulen - r2.ulen
    if r1.length != r2.length:
        return r1.length - r2.length
    if r1.freq != r2.freq:
        return r2.freq - r1.freq
    t1, t2 = tuple(p1), tuple(p2)
    return (t1 > t2) - (t1 < t2)


@dataclass
class PropagationStats:
    pops: int = 0
    dropped_seeds: int = 0
    truncated: int = 0


@dataclass
class RibIn:
    """Candidate AS paths per (prefix, AS), best first."""
    tables: Dict[Prefix, Dict[Asn, Tuple[AsPath, ...]]] = field(default_factory=dict)
    seeds: Dict[Prefix, Dict[Asn, Set[AsPath]]] = field(default_factory=dict)
    known: Dict[Prefix, Counter] = field(default_factory=dict)
    stats: Dict[Prefix, PropagationStats] = field(default_factory=dict)

    def prefixes(self):
        return sorted(self.tables)

    def update(self, other: "RibIn") -> None:
        for name in ("tables", "seeds", "known", "stats"):
            getattr(self, name).update(getattr(other, name))


def prime(corpus: RibCorpus, prefix: Prefix) -> RibIn:
    """Seed every AS on every training route for ``prefix`` with its suffix to the origin."""
    routes = corpus.by_prefix.get(prefix)
    if not routes:
        raise KeyError(f"no training route for {prefix}")
    paths = [r.path for r in routes]
    seeds: Dict[Asn, Set[AsPath]] = {}
    for path in paths:
        for k in range(len(path)):
            seeds.setdefault(path[k], set()).add(path[k:])
    rib = RibIn()
    rib.seeds[prefix] = seeds
    rib.known[prefix] = known_suffixes(paths)
    rib.tables[prefix] = {asn: tuple(sorted(s, key=lambda p: path_key(p, rank_path(p, rib.known[prefix]))))
                          for asn, s in seeds.items()}
    return rib


def _usable_seed(path: AsPath, topo: Topology) -> bool:
    try:
        return is_valley_free(path, topo) and _loop_free(path, topo)
    except UnknownEdgeError:
        return False


def _loop_free(path: AsPath, topo: Topology) -> bool:
    if len(set(path)) != len(path):
        return False
    reps = []
    for a in path:
        r = topo.sibling_rep(a)
        if not reps or reps[-1] != r:
            reps.append(r)
    return len(set(reps)) == len(reps)


def propagate(topo: Topology, primed: RibIn, prefix: Prefix, *,
              announce: Optional[Mapping[Asn, Iterable[Asn]]] = None,
              max_alternates: int = DEFAULT_MAX_ALTERNATES,
              pop_factor: int = DEFAULT_POP_FACTOR) -> RibIn:
    """Run the work queue for ``prefix`` to its fixed point.

    ``announce`` optionally restricts which neighbours an origin AS announces
    its own route to.  Seeds that are not valley-free on ``topo`` are dropped
    and counted in the returned stats.
    """
    known = primed.known[prefix]
    stats = PropagationStats()
    allowed = {o: frozenset(ns) for o, ns in (announce or {}).items()}

    seeds: Dict[Asn, Set[AsPath]] = {}
    for asn, paths in primed.seeds[prefix].items():
        for p in paths:
            if _usable_seed(p, topo):
                seeds.setdefault(asn, set()).add(p)
            else:
                stats.dropped_seeds += 1

    ranks: Dict[AsPath, PathRank] = {}
    for paths in seeds.values():
        for p in paths:
            ranks[p] = rank_path(p, known)

    learned: Dict[Asn, Dict[Asn, AsPath]] = {}
    best: Dict[Asn, AsPath] = {}

    def key(p):
        return path_key(p, ranks[p])

    def reselect(v):
        cands = set(seeds.get(v, ()))
        cands.update(learned.get(v, {}).values())
        if cands:
            best[v] = min(cands, key=key)
        else:
            best.pop(v, None)

    for v in seeds:
        reselect(v)

    queue = deque(sorted(seeds))
    queued = set(queue)
    cap = pop_factor * max(1, len(topo.vertices))
    while queue:
        stats.pops += 1
        if stats.pops > cap:
            raise PropagationError(prefix, stats.pops, len(queue))
        u = queue.popleft()
        queued.discard(u)
        P = best.get(u)
        via = learned_relationship(P, topo) if P is not None else None
        rank_u = ranks[P] if P is not None else None
        origin_filter = allowed.get(u) if P is not None and len(P) == 1 else None
        for v, role in sorted(topo.neighbors(u).items()):
            offer = None
            if P is not None and may_export(via, role) and (origin_filter is None or v in origin_filter):
                cand = (v,) + P
                if _loop_free(cand, topo):
                    offer = cand
            slot = learned.setdefault(v, {})
            if slot.get(u) == offer:
                continue
            if offer is None:
                del slot[u]
            else:
                if offer not in ranks:
                    if rank_u.ulen == 0 and offer in known:
                        ranks[offer] = PathRank(0, len(offer), known[offer])
                    else:
                        ranks[offer] = PathRank(rank_u.ulen + 1, len(offer), rank_u.freq)
                slot[u] = offer
            before = best.get(v)
            reselect(v)
            if best.get(v) != before and v not in queued:
                queue.append(v)
                queued.add(v)

    table = {}
    for v in set(seeds) | set(learned):
        cands = set(seeds.get(v, ()))
        cands.update(learned.get(v, {}).values())
        if not cands:
            continue
        ordered = sorted(cands, key=key)
        if len(ordered) > max_alternates:
            stats.truncated += len(ordered) - max_alternates
            ordered = ordered[:max_alternates]
        table[v] = tuple(ordered)
    if stats.truncated:
        log.info("stage=propagate prefix=%s truncated=%d", prefix, stats.truncated)

    out = RibIn()
    out.tables[prefix] = table
    out.seeds[prefix] = seeds
    out.known[prefix] = known
    out.stats[prefix] = stats
    return out


def best_path(rib: RibIn, asn: Asn, prefix: Prefix) -> Optional[AsPath]:
    """Index-0 candidate, or ``None`` when the AS cannot reach the prefix."""
    paths = rib.tables.get(prefix, {}).get(asn)
    return paths[0] if paths else None


def alternate_paths(rib: RibIn, asn: Asn, prefix: Prefix) -> List[AsPath]:
    return list(rib.tables.get(prefix, {}).get(asn, ()))


def write_snapshot(rib: RibIn, fh) -> None:
    """``prefix<TAB>asn<TAB>rank<TAB>as-path`` lines sorted by prefix, asn, rank."""
    for prefix in sorted(rib.tables):
        table = rib.tables[prefix]
        for asn in sorted(table):
            for i, path in enumerate(table[asn]):
                fh.write(f"{prefix}\t{asn}\t{i}\t{' '.join(map(str, path))}\n")


def read_snapshot(lines: Iterable[str]) -> RibIn:
    rows: Dict[Prefix, Dict[Asn, List[Tuple[int, AsPath]]]] = {}
    for n, line in enumerate(lines, 1):
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.rstrip("\n").split("\t")
        if len(parts) != 4:
            raise ParseError(f"snapshot line {n}: expected 4 fields")
        prefix = parse_prefix(parts[0])
        path = tuple(parse_asn(a) for a in parts[3].split())
        rows.setdefault(prefix, {}).setdefault(parse_asn(parts[1]), []).append((int(parts[2]), path))
    rib = RibIn()
    for prefix, table in rows.items():
        rib.tables[prefix] = {asn: tuple(p for _, p in sorted(entries)) for asn, entries in table.items()}
    return rib
