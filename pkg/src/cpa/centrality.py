"""Betweenness, Country Centrality (CC) and Strong Country Centrality (SCC).

For an ordered pair of prefixes (rho_s, rho_t) in distinct countries s and t
the pair carries traffic ``W(rho_s) * W(rho_t)`` where ``W`` is a prefix's
share of its country's address space.  A country v (neither s nor t) earns that
weight under CC when it lies on the best country path, and under SCC when it
lies on every available path.  Raw sums are normalised by the total weight of
pairs that do not have v as an endpoint, so 1.0 means "v carries all traffic
between every other pair of countries".

Sums are kept as exact float expansions (the partials of Shewchuk's algorithm,
as used by :func:`math.fsum`), which makes the results independent of the
order in which pairs are accumulated or shards are merged.
"""
from __future__ import annotations

import csv
import io
import json
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Dict, Hashable, Iterable, List, Mapping, Optional, Sequence, Tuple

from .geodb import PrefixTrie
from .net import CountryCode, CountryPath, IpAddr, ParseError, Prefix, parse_prefix

CC = "CC"
SCC = "SCC"


class CentralityError(KeyError):
    pass


class ExactSum:
    """Running float sum held exactly as non-overlapping partials."""

    __slots__ = ("partials",)

    def __init__(self, partials: Iterable[float] = ()):
        self.partials: List[float] = []
        for p in partials:
            self.add(p)

    def add(self, x: float) -> None:
        partials = self.partials
        i = 0
        for y in partials:
            if abs(x) < abs(y):
                x, y = y, x
            hi = x + y
            lo = y - (hi - x)
            if lo:
                partials[i] = lo
                i += 1
            x = hi
        partials[i:] = [x]

    def merge(self, other: "ExactSum") -> None:
        for p in other.partials:
            self.add(p)

    def value(self) -> float:
        return math.fsum(self.partials)

    def minus(self, other: "ExactSum") -> float:
        """Correctly rounded ``self - other``."""
        return math.fsum(self.partials + [-p for p in other.partials])


class CountryPrefixTable:
    """Country of every routable prefix, with address-space weights."""

    def __init__(self, assignment: Mapping[Prefix, CountryCode]):
        self._country: Dict[Prefix, CountryCode] = dict(assignment)
        self._by_country: Dict[CountryCode, List[Prefix]] = {}
        for p, cc in sorted(self._country.items()):
            self._by_country.setdefault(cc, []).append(p)
        self._weight: Dict[Prefix, float] = {}
        for cc, prefixes in self._by_country.items():
            total = sum(p.size() for p in prefixes)
            for p in prefixes:
                self._weight[p] = p.size() / total
        self._trie = None

    @classmethod
    def from_pairs(cls, pairs: Iterable[Tuple[Prefix, CountryCode]]) -> "CountryPrefixTable":
        seen: Dict[Prefix, CountryCode] = {}
        for p, cc in pairs:
            if p in seen and seen[p] != cc:
                raise ValueError(f"prefix {p} assigned to both {seen[p]} and {cc}")
            seen[p] = cc
        return cls(seen)

    def __len__(self):
        return len(self._country)

    def __contains__(self, prefix):
        return prefix in self._country

    @property
    def countries(self) -> List[CountryCode]:
        return sorted(self._by_country)

    def prefixes(self, country: Optional[CountryCode] = None) -> List[Prefix]:
        if country is None:
            return sorted(self._country)
        return list(self._by_country.get(country, ()))

    def country(self, prefix: Prefix) -> CountryCode:
        try:
            return self._country[prefix]
        except KeyError:
            raise CentralityError(f"prefix {prefix} not in country prefix table") from None

    def weight(self, prefix: Prefix) -> float:
        try:
            return self._weight[prefix]
        except KeyError:
            raise CentralityError(f"prefix {prefix} not in country prefix table") from None

    def match(self, ip: IpAddr) -> Optional[Prefix]:
        """Longest table prefix containing ``ip``."""
        if self._trie is None:
            self._trie = PrefixTrie((p, None) for p in self._country)
        hit = self._trie.longest_match(ip)
        return hit[0] if hit else None

    def write_csv(self, fh) -> None:
        for p in sorted(self._country):
            fh.write(f"{p},{self._country[p]}\n")

    @classmethod
    def read_csv(cls, lines: Iterable[str]) -> "CountryPrefixTable":
        pairs = []
        for n, line in enumerate(lines, 1):
            line = line.strip()
            if not line or line.startswith("#") or line.startswith("prefix,"):
                continue
            parts = [x.strip() for x in line.split(",")]
            if len(parts) != 2:
                raise ParseError(f"prefix table line {n}: expected prefix,country")
            pairs.append((parse_prefix(parts[0]), parts[1].upper()))
        return cls.from_pairs(pairs)


@dataclass(frozen=True)
class PathAssignment:
    src: Prefix
    dst: Prefix
    best: CountryPath
    alternates: Tuple[CountryPath, ...] = ()

    def available(self) -> Tuple[CountryPath, ...]:
        if not self.alternates:
            return (self.best,)
        if self.best in self.alternates:
            return self.alternates
        return (self.best,) + self.alternates


def _fmt_path(path: CountryPath) -> str:
    return ",".join(path)


def write_assignments(assignments: Iterable[PathAssignment], fh) -> None:
    """``src<TAB>dst<TAB>best<TAB>alt1|alt2`` with comma-separated country codes."""
    for a in assignments:
        alts = "|".join(_fmt_path(p) for p in a.alternates)
        fh.write(f"{a.src}\t{a.dst}\t{_fmt_path(a.best)}\t{alts}\n")


def read_assignments(lines: Iterable[str]):
    for n, line in enumerate(lines, 1):
        line = line.rstrip("\n")
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) not in (3, 4):
            raise ParseError(f"assignment line {n}: expected 3 or 4 tab-separated fields")
        best = tuple(c for c in parts[2].split(",") if c)
        alts = ()
        if len(parts) == 4 and parts[3]:
            alts = tuple(tuple(c for c in alt.split(",") if c) for alt in parts[3].split("|"))
        yield PathAssignment(parse_prefix(parts[0]), parse_prefix(parts[1]), best, alts)


class CentralityAccumulator:
    """Mergeable CC/SCC sums over a stream of weighted country paths."""

    def __init__(self):
        self.total = ExactSum()
        self.endpoint: Dict[CountryCode, ExactSum] = {}
        self.cc: Dict[CountryCode, ExactSum] = {}
        self.scc: Dict[CountryCode, ExactSum] = {}
        self.pairs = 0

    def add_weighted(self, s: CountryCode, t: CountryCode, weight: float,
                     best: CountryPath, available: Sequence[CountryPath] = ()) -> None:
        if s == t:
            return
        self.pairs += 1
        self.total.add(weight)
        for end in (s, t):
            self.endpoint.setdefault(end, ExactSum()).add(weight)
        for c in set(best):
            if c != s and c != t:
                self.cc.setdefault(c, ExactSum()).add(weight)
        if available:
            common = set(available[0]).intersection(*available[1:])
        else:
            common = set(best)
        for c in common:
            if c != s and c != t:
                self.scc.setdefault(c, ExactSum()).add(weight)

    def add(self, a: PathAssignment, table: CountryPrefixTable) -> None:
        s, t = table.country(a.src), table.country(a.dst)
        self.add_weighted(s, t, table.weight(a.src) * table.weight(a.dst), a.best, a.available())

    def merge(self, other: "CentralityAccumulator") -> "CentralityAccumulator":
        self.total.merge(other.total)
        self.pairs += other.pairs
        for name in ("endpoint", "cc", "scc"):
            mine = getattr(self, name)
            for c, s in getattr(other, name).items():
                mine.setdefault(c, ExactSum()).merge(s)
        return self

    def to_json(self) -> dict:
        def dump(d):
            return {c: s.partials for c, s in sorted(d.items())}
        return {"total": self.total.partials, "pairs": self.pairs, "endpoint": dump(self.endpoint),
                "cc": dump(self.cc), "scc": dump(self.scc)}

    @classmethod
    def from_json(cls, data: dict) -> "CentralityAccumulator":
        acc = cls()
        acc.total = ExactSum(data["total"])
        acc.pairs = data["pairs"]
        for name in ("endpoint", "cc", "scc"):
            setattr(acc, name, {c: ExactSum(p) for c, p in data[name].items()})
        return acc

    def denominator(self, country: CountryCode) -> float:
        return self.total.minus(self.endpoint.get(country, ExactSum()))

    def report(self, metric: str = CC, path_source: str = "inferred",
               metadata: Optional[dict] = None) -> "CentralityReport":
        sums = self.cc if metric == CC else self.scc
        countries = set(self.endpoint) | set(self.cc) | set(self.scc)
        scores = []
        for c in countries:
            raw = sums[c].value() if c in sums else 0.0
            denom = self.denominator(c)
            scores.append(CountryScore(c, raw, raw / denom if denom > 0 else 0.0, 0, denom))
        meta = {"denominator": "weight of ordered prefix pairs between two other distinct countries",
                "pairs": self.pairs}
        meta.update(metadata or {})
        return CentralityReport(metric, path_source, _ranked(scores), meta)


@dataclass(frozen=True)
class CountryScore:
    country: CountryCode
    raw: float
    normalized: float
    rank: int
    denominator: float


def _ranked(scores: Iterable[CountryScore]) -> List[CountryScore]:
    ordered = sorted(scores, key=lambda s: (-s.normalized, s.country))
    return [CountryScore(s.country, s.raw, s.normalized, i, s.denominator)
            for i, s in enumerate(ordered, 1)]


@dataclass
class CentralityReport:
    metric: str
    path_source: str
    scores: List[CountryScore]
    metadata: dict = field(default_factory=dict)

    def get(self, country: CountryCode) -> Optional[CountryScore]:
        for s in self.scores:
            if s.country == country:
                return s
        return None

    def normalized(self) -> Dict[CountryCode, float]:
        return {s.country: s.normalized for s in self.scores}

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["country", "metric", "raw", "normalized", "rank", "path_source"])
        for s in self.scores:
            w.writerow([s.country, self.metric, repr(s.raw), repr(s.normalized), s.rank, self.path_source])
        return buf.getvalue()

    def to_jsonl(self) -> str:
        lines = [json.dumps({"metadata": self.metadata, "metric": self.metric,
                             "path_source": self.path_source}, sort_keys=True)]
        for s in self.scores:
            lines.append(json.dumps({"country": s.country, "metric": self.metric, "raw": s.raw,
                                     "normalized": s.normalized, "rank": s.rank,
                                     "denominator": s.denominator, "path_source": self.path_source},
                                    sort_keys=True))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_csv(cls, lines: Iterable[str]) -> "CentralityReport":
        rows = list(csv.DictReader(lines))
        if not rows:
            raise ParseError("empty report")
        scores = [CountryScore(r["country"], float(r["raw"]), float(r["normalized"]), int(r["rank"]), math.nan)
                  for r in rows]
        return cls(rows[0]["metric"], rows[0]["path_source"], sorted(scores, key=lambda s: s.rank))


def country_centrality(assignments: Iterable[PathAssignment], table: CountryPrefixTable,
                       path_source: str = "inferred") -> CentralityReport:
    acc = CentralityAccumulator()
    for a in assignments:
        acc.add(a, table)
    return acc.report(CC, path_source)


def strong_country_centrality(assignments: Iterable[PathAssignment], table: CountryPrefixTable,
                              path_source: str = "inferred") -> CentralityReport:
    acc = CentralityAccumulator()
    for a in assignments:
        acc.add(a, table)
    return acc.report(SCC, path_source)


def rank_report(report: CentralityReport, top_n: Optional[int] = None) -> List[CountryScore]:
    ordered = _ranked(report.scores)
    return ordered if top_n is None else ordered[:top_n]


def betweenness(graph: Mapping[Hashable, Iterable[Hashable]]) -> Dict[Hashable, float]:
    """Exact betweenness of an undirected, unweighted graph (Brandes).

    Each unordered pair {s, t} contributes once, split evenly over its
    shortest paths.
    """
    adj = {v: set(ns) for v, ns in graph.items()}
    for v, ns in list(adj.items()):
        for w in ns:
            adj.setdefault(w, set()).add(v)
    nodes = sorted(adj, key=repr)
    cb = {v: 0.0 for v in nodes}
    for s in nodes:
        stack = []
        preds = {v: [] for v in nodes}
        sigma = dict.fromkeys(nodes, 0)
        dist = dict.fromkeys(nodes, -1)
        sigma[s], dist[s] = 1, 0
        q = deque([s])
        while q:
            v = q.popleft()
            stack.append(v)
            for w in adj[v]:
                if dist[w] < 0:
                    dist[w] = dist[v] + 1
                    q.append(w)
                if dist[w] == dist[v] + 1:
                    sigma[w] += sigma[v]
                    preds[w].append(v)
        delta = dict.fromkeys(nodes, 0.0)
        while stack:
            w = stack.pop()
            for v in preds[w]:
                delta[v] += sigma[v] / sigma[w] * (1.0 + delta[w])
            if w != s:
                cb[w] += delta[w]
    return {v: x / 2.0 for v, x in cb.items()}
