"""AS business relationships: Gao-style inference and valley-free export rules.

``Topology.rel(u, v)`` answers "what is ``v`` to ``u``": one of
``Rel.CUSTOMER``, ``Rel.PROVIDER``, ``Rel.PEER`` or ``Rel.SIBLING``.
"""
from __future__ import annotations

import csv
import enum
import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, Iterable, Mapping, Optional, Sequence, Tuple

from .net import Asn, ParseError, parse_asn
from .rib import RibCorpus, TopologySkeleton, edge_key

log = logging.getLogger(__name__)


class Rel(enum.Enum):
    CUSTOMER = "customer"
    PROVIDER = "provider"
    PEER = "peer"
    SIBLING = "sibling"

    def reverse(self) -> "Rel":
        return _REVERSE[self]


_REVERSE = {Rel.CUSTOMER: Rel.PROVIDER, Rel.PROVIDER: Rel.CUSTOMER,
            Rel.PEER: Rel.PEER, Rel.SIBLING: Rel.SIBLING}

# Edge label text: "p2c" means the first AS is the provider of the second.
_LABEL_TO_REL = {"p2c": Rel.CUSTOMER, "c2p": Rel.PROVIDER, "p2p": Rel.PEER, "s2s": Rel.SIBLING,
                 "-1": Rel.CUSTOMER, "0": Rel.PEER, "1": Rel.SIBLING, "2": Rel.SIBLING}
_REL_TO_LABEL = {Rel.CUSTOMER: "p2c", Rel.PROVIDER: "c2p", Rel.PEER: "p2p", Rel.SIBLING: "s2s"}


class UnknownEdgeError(KeyError):
    def __init__(self, a, b):
        super().__init__(f"no edge between AS{a} and AS{b}")
        self.pair = (a, b)


class Topology:
    """Labelled AS graph.  Treated as immutable once built."""

    def __init__(self, vertices=(), labelled_edges: Iterable[Tuple[Asn, Asn, Rel]] = ()):
        self._adj: Dict[Asn, Dict[Asn, Rel]] = {v: {} for v in vertices}
        self.low_confidence = set()
        for a, b, rel in labelled_edges:
            self._set(a, b, rel)
        self._sibling_rep = None

    def _set(self, a: Asn, b: Asn, rel: Rel) -> None:
        if a == b:
            raise ValueError(f"self-edge on AS{a}")
        self._adj.setdefault(a, {})[b] = rel
        self._adj.setdefault(b, {})[a] = rel.reverse()

    @property
    def vertices(self):
        return self._adj.keys()

    def neighbors(self, u: Asn) -> Mapping[Asn, Rel]:
        return self._adj.get(u, {})

    def has_edge(self, a: Asn, b: Asn) -> bool:
        return b in self._adj.get(a, ())

    def rel(self, u: Asn, v: Asn) -> Rel:
        try:
            return self._adj[u][v]
        except KeyError:
            raise UnknownEdgeError(u, v) from None

    def edges(self):
        """Yield each edge once as ``(a, b, rel(a, b))`` with ``a < b``."""
        for a in sorted(self._adj):
            for b in sorted(self._adj[a]):
                if a < b:
                    yield a, b, self._adj[a][b]

    def counts(self) -> Counter:
        c = Counter()
        for _, _, rel in self.edges():
            c["sibling" if rel is Rel.SIBLING else "peer" if rel is Rel.PEER else "customer-provider"] += 1
        return c

    def sibling_rep(self, asn: Asn) -> Asn:
        """Canonical representative (lowest ASN) of the sibling group containing ``asn``."""
        if self._sibling_rep is None:
            rep = {}
            for start in sorted(self._adj):
                if start in rep:
                    continue
                group, stack = [], [start]
                seen = {start}
                while stack:
                    x = stack.pop()
                    group.append(x)
                    for y, r in self._adj[x].items():
                        if r is Rel.SIBLING and y not in seen:
                            seen.add(y)
                            stack.append(y)
                low = min(group)
                for x in group:
                    rep[x] = low
            self._sibling_rep = rep
        return self._sibling_rep.get(asn, asn)

    def with_overrides(self, overrides: Iterable[Tuple[Asn, Asn, Rel]]) -> "Topology":
        topo = Topology(self._adj.keys(), self.edges())
        topo.low_confidence = set(self.low_confidence)
        for a, b, rel in overrides:
            topo._set(a, b, rel)
            topo.low_confidence.discard(edge_key(a, b))
        return topo


def parse_relationships(lines: Iterable[str]):
    """Parse ``asn1,asn2,label`` rows (CAIDA-style ``|`` separators also accepted)."""
    out = []
    for n, line in enumerate(lines, 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = [p.strip() for p in line.replace("|", ",").split(",")]
        if len(parts) < 3:
            raise ParseError(f"line {n}: expected asn1,asn2,label: {line!r}")
        if parts[0] == "asn1":
            continue
        label = parts[2].lower()
        if label not in _LABEL_TO_REL:
            raise ParseError(f"line {n}: unknown relationship label {parts[2]!r}")
        out.append((parse_asn(parts[0]), parse_asn(parts[1]), _LABEL_TO_REL[label]))
    return out


def relationship_label(rel: Rel) -> str:
    return _REL_TO_LABEL[rel]


def read_relationships(path):
    with open(path) as fh:
        return parse_relationships(fh)


def write_relationships(topo: Topology, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["asn1", "asn2", "label"])
        for a, b, rel in topo.edges():
            w.writerow([a, b, _REL_TO_LABEL[rel]])


def topology_from_relationships(rows) -> Topology:
    vertices = set()
    for a, b, _ in rows:
        vertices.update((a, b))
    return Topology(sorted(vertices), rows)


@dataclass
class RelTally:
    """Mergeable per-path votes used by the inference.

    ``transit[(u, v)]`` counts paths on which ``v`` provided transit for ``u``
    (i.e. votes for "u is a customer of v").
    """
    transit: Counter = field(default_factory=Counter)
    not_peering: set = field(default_factory=set)

    def merge(self, other: "RelTally") -> "RelTally":
        return RelTally(self.transit + other.transit, self.not_peering | other.not_peering)


def _top_index(path: Sequence[Asn], degree: Mapping[Asn, int]) -> int:
    best = 0
    for i, a in enumerate(path):
        if degree.get(a, 0) > degree.get(path[best], 0):
            best = i
    return best


def tally_votes(paths: Iterable[Sequence[Asn]], degree: Mapping[Asn, int]) -> RelTally:
    tally = RelTally()
    for path in paths:
        j = _top_index(path, degree)
        for i in range(len(path) - 1):
            u, v = path[i], path[i + 1]
            if i < j:
                tally.transit[(u, v)] += 1
            else:
                tally.transit[(v, u)] += 1
    return tally


def _peer_exclusions(paths, degree, labels) -> set:
    excluded = set()
    for path in paths:
        n = len(path)
        j = _top_index(path, degree)
        for i in range(n - 1):
            if i < j - 1 or i > j:
                excluded.add(edge_key(path[i], path[i + 1]))
        if 0 < j < n - 1:
            left, right = edge_key(path[j - 1], path[j]), edge_key(path[j], path[j + 1])
            if labels.get(left) is not Rel.SIBLING and labels.get(right) is not Rel.SIBLING:
                if degree.get(path[j - 1], 0) > degree.get(path[j + 1], 0):
                    excluded.add(right)
                else:
                    excluded.add(left)
    return excluded


def infer_relationships(skeleton: TopologySkeleton, corpus: RibCorpus, *,
                        sibling_threshold: int = 1, peer_degree_ratio: float = 60.0) -> Topology:
    """Label every skeleton edge with Gao's degree-based heuristic.

    Each path votes customer->provider on edges left of its highest-degree AS
    and provider->customer to the right.  Edges with votes both ways become
    siblings when both counts exceed ``sibling_threshold`` or both are within
    it; otherwise the majority direction wins.  Edges next to a path's top
    provider that nothing rules out are then relabelled peer when the endpoint
    degree ratio is below ``peer_degree_ratio``.
    """
    degree = skeleton.degree()
    paths = [r.path for r in corpus.routes]
    tally = tally_votes(paths, degree)
    L = sibling_threshold

    labels: Dict[Tuple[Asn, Asn], Rel] = {}   # rel(a, b) for a < b
    low_conf = set()
    for a, b in sorted(skeleton.edges):
        up, down = tally.transit[(a, b)], tally.transit[(b, a)]   # up: a customer of b
        if up and down and ((up > L and down > L) or (up <= L and down <= L)):
            labels[(a, b)] = Rel.SIBLING
        elif up > L or (up and not down):
            labels[(a, b)] = Rel.PROVIDER
        elif down > L or (down and not up):
            labels[(a, b)] = Rel.CUSTOMER
        else:
            # no vote at all: higher-degree endpoint is the provider
            low_conf.add((a, b))
            da, db = degree.get(a, 0), degree.get(b, 0)
            labels[(a, b)] = Rel.PROVIDER if (db, -b) > (da, -a) else Rel.CUSTOMER
    if low_conf:
        log.info("stage=relationships low_confidence_edges=%d", len(low_conf))

    excluded = _peer_exclusions(paths, degree, labels)
    for (a, b), rel in labels.items():
        if rel is Rel.SIBLING or (a, b) in excluded or (a, b) in low_conf:
            continue
        da, db = degree.get(a, 0), degree.get(b, 0)
        if da and db and 1.0 / peer_degree_ratio < da / db < peer_degree_ratio:
            labels[(a, b)] = Rel.PEER

    topo = Topology(sorted(skeleton.vertices), ((a, b, r) for (a, b), r in labels.items()))
    topo.low_confidence = low_conf
    return topo


def is_valley_free(path: Sequence[Asn], topo: Topology) -> bool:
    """Uphill steps, at most one peer step, then downhill; sibling steps are transparent."""
    phase = 0   # 0 climbing, 1 descending (after peer or downhill step)
    for a, b in zip(path, path[1:]):
        r = topo.rel(a, b)
        if r is Rel.SIBLING:
            continue
        if r is Rel.PROVIDER:
            if phase:
                return False
        elif r is Rel.PEER:
            if phase:
                return False
            phase = 1
        else:
            phase = 1
    return True


def may_export(learned_via: Optional[Rel], neighbor: Rel) -> bool:
    """Whether a route learned over ``learned_via`` may be announced to ``neighbor``.

    ``learned_via`` is ``None`` for locally originated routes.
    """
    if neighbor in (Rel.CUSTOMER, Rel.SIBLING):
        return True
    return learned_via is None or learned_via in (Rel.CUSTOMER, Rel.SIBLING)


def learned_relationship(path: Sequence[Asn], topo: Topology) -> Optional[Rel]:
    """Effective relationship a route was learned over, looking through sibling hops.

    ``None`` means the route is local to the AS (or its sibling group).
    """
    for a, b in zip(path, path[1:]):
        r = topo.rel(a, b)
        if r is not Rel.SIBLING:
            return r
    return None
