"""RIB dump ingestion, observer-level train/test split and topology extraction.

Input is the canonical TSV form, one route per line::

    observer_asn<TAB>prefix<TAB>space separated AS path

Lines starting with ``#`` are comments.  Bad lines are collected in
``RibCorpus.rejects`` as ``(line_number, reason)`` rather than aborting the
parse.
"""
from __future__ import annotations

import csv
import logging
import random
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Tuple

from .net import AsPath, Asn, ParseError, Prefix, collapse_prepends, parse_asn, parse_prefix

log = logging.getLogger(__name__)


class EmptyCorpusError(ValueError):
    pass


@dataclass(frozen=True)
class RibRoute:
    observer: Asn
    prefix: Prefix
    path: AsPath

    @property
    def origin(self) -> Asn:
        return self.path[-1]


@dataclass
class RibCorpus:
    routes: List[RibRoute] = field(default_factory=list)
    rejects: List[Tuple[int, str]] = field(default_factory=list)
    as_sets_dropped: int = 0

    def __post_init__(self):
        self._by_prefix = None
        self._by_observer = None

    def __len__(self):
        return len(self.routes)

    def _index(self):
        by_prefix = defaultdict(list)
        by_observer = defaultdict(list)
        for r in self.routes:
            by_prefix[r.prefix].append(r)
            by_observer[r.observer].append(r)
        self._by_prefix = dict(by_prefix)
        self._by_observer = dict(by_observer)

    @property
    def by_prefix(self) -> Dict[Prefix, List[RibRoute]]:
        if self._by_prefix is None:
            self._index()
        return self._by_prefix

    @property
    def by_observer(self) -> Dict[Asn, List[RibRoute]]:
        if self._by_observer is None:
            self._index()
        return self._by_observer

    def prefixes(self) -> List[Prefix]:
        return sorted(self.by_prefix)

    def observers(self) -> List[Asn]:
        return sorted(self.by_observer)

    def origins(self) -> Dict[Prefix, Asn]:
        """Origin AS per prefix; on conflicting origins the most common wins (lowest ASN on ties)."""
        out = {}
        for p, routes in self.by_prefix.items():
            counts = defaultdict(int)
            for r in routes:
                counts[r.origin] += 1
            out[p] = min(counts, key=lambda a: (-counts[a], a))
        return out

    def merge(self, other: "RibCorpus") -> "RibCorpus":
        return RibCorpus(self.routes + other.routes, self.rejects + other.rejects,
                         self.as_sets_dropped + other.as_sets_dropped)

    def subset(self, observers) -> "RibCorpus":
        keep = set(observers)
        return RibCorpus([r for r in self.routes if r.observer in keep])


def _parse_path(text: str) -> Tuple[List[int], int]:
    """Parse an AS path string; AS-set / confederation groups are dropped and counted."""
    asns, dropped, depth = [], 0, 0
    for tok in text.replace("(", " ( ").replace(")", " ) ").split():
        if "{" in tok or "(" in tok:
            if depth == 0:
                dropped += 1
            depth += 1
            if "}" in tok:
                depth -= 1
            continue
        if "}" in tok or ")" in tok:
            depth = max(0, depth - 1)
            continue
        if depth:
            continue
        asns.append(parse_asn(tok))
    if depth:
        raise ParseError(f"unterminated AS-set in {text!r}")
    return asns, dropped


def parse_rib(lines: Iterable[str], *, allow_empty: bool = False) -> RibCorpus:
    corpus = RibCorpus()
    for n, line in enumerate(lines, 1):
        line = line.rstrip("\r\n")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        fields = line.split("\t")
        if len(fields) != 3:
            corpus.rejects.append((n, f"expected 3 fields, got {len(fields)}"))
            continue
        try:
            observer = parse_asn(fields[0])
            prefix = parse_prefix(fields[1])
            asns, dropped = _parse_path(fields[2])
        except ParseError as exc:
            corpus.rejects.append((n, str(exc)))
            continue
        corpus.as_sets_dropped += dropped
        path = collapse_prepends(asns)
        if not path:
            corpus.rejects.append((n, "empty AS path"))
            continue
        if len(set(path)) != len(path):
            corpus.rejects.append((n, "AS path loop"))
            continue
        corpus.routes.append(RibRoute(observer, prefix, path))
    if corpus.as_sets_dropped:
        log.warning("stage=ingest as_sets_dropped=%d", corpus.as_sets_dropped)
    if not corpus.routes and not allow_empty:
        raise EmptyCorpusError("no valid routes in RIB input")
    return corpus


def read_rib(path) -> RibCorpus:
    with open(path) as fh:
        return parse_rib(fh)


def write_rib(corpus: RibCorpus, path) -> None:
    with open(path, "w") as fh:
        for r in corpus.routes:
            fh.write(f"{r.observer}\t{r.prefix}\t{' '.join(map(str, r.path))}\n")


def write_rejects(rejects, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["line", "reason"])
        w.writerows(rejects)


def balanced_partition(counts, ratio: float = 0.5, seed: int = 0):
    """Split the keys of ``counts`` into two lists whose totals approach ``ratio``.

    Keys are shuffled with ``seed`` then placed largest-first on whichever side
    is further below its target.  Both sides are non-empty.
    """
    if not 0 < ratio < 1:
        raise ValueError(f"ratio must be in (0, 1), got {ratio}")
    if len(counts) < 2:
        raise ValueError(f"need at least 2 groups to split, got {len(counts)}")
    order = sorted(counts)
    random.Random(seed).shuffle(order)
    # stable sort keeps the seeded order among equal counts
    order.sort(key=lambda a: -counts[a])
    total = sum(counts.values())
    target = (ratio * total, (1 - ratio) * total)
    filled = [0, 0]
    sides = ([], [])
    for key in order:
        side = 0 if target[0] - filled[0] >= target[1] - filled[1] else 1
        sides[side].append(key)
        filled[side] += counts[key]
    for side in (0, 1):
        if not sides[side]:
            other = sides[1 - side]
            smallest = min(other, key=lambda a: (counts[a], a))
            other.remove(smallest)
            sides[side].append(smallest)
    return sides


def split_train_test(corpus: RibCorpus, ratio: float = 0.5, seed: int = 0):
    """Partition routes into (train, test) by observer AS; an observer is never split."""
    counts = {obs: len(rs) for obs, rs in corpus.by_observer.items()}
    if len(counts) < 2:
        raise ValueError(f"need at least 2 observer ASes to split, got {len(counts)}")
    train, test = balanced_partition(counts, ratio, seed)
    return corpus.subset(train), corpus.subset(test)


def edge_key(a: Asn, b: Asn) -> Tuple[Asn, Asn]:
    return (a, b) if a < b else (b, a)


@dataclass(frozen=True)
class TopologySkeleton:
    vertices: frozenset
    edges: frozenset
    witness: Dict[Tuple[Asn, Asn], AsPath] = field(default_factory=dict, compare=False, hash=False)

    def degree(self) -> Dict[Asn, int]:
        deg = {v: 0 for v in self.vertices}
        for a, b in self.edges:
            deg[a] += 1
            deg[b] += 1
        return deg


def extract_topology(corpus: RibCorpus) -> TopologySkeleton:
    if not corpus.routes:
        raise EmptyCorpusError("cannot extract a topology from an empty corpus")
    vertices, witness = set(), {}
    for r in corpus.routes:
        vertices.update(r.path)
        for a, b in zip(r.path, r.path[1:]):
            if a != b:
                witness.setdefault(edge_key(a, b), r.path)
    return TopologySkeleton(frozenset(vertices), frozenset(witness), witness)
