"""Traceroute annotation, ingress tables, and AS-path -> country-path prediction.

A traceroute is split into AS segments (runs of hops in one AS).  The first
hop of a segment is that AS's ingress point.  For every AS transition we learn
where the next AS is entered and which countries lie between the two ingress
points (both ends included).  Prediction walks an AS path and, hop by hop,
looks that information up in progressively less specific tables:

==========  ==============================================  =======================
table       key                                             value
==========  ==============================================  =======================
known_d     (AS_i, AS_i+1, AS_i+2, entry ip)                (next ingress, countries)
known_s     (AS_i, AS_i+1, entry ip)                        (next ingress, countries)
freq_dc     (AS_i, AS_i+1, current country)                 (next ingress, countries)
freq_d      (AS_i, AS_i+1)                                  (next ingress, countries)
freq_sc     (AS_i+1, current country)                       next ingress
freq_s      AS_i+1                                          next ingress
==========  ==============================================  =======================

Every table keeps counts; the answer is the most frequent value, ties going to
the lowest ingress address (then the lexicographically smallest countries).
"""
from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, NamedTuple, Optional, Sequence, Tuple, Union

from .geodb import GeoDb, LookupClient, parse_registry, resolve, write_registry
from .net import (AsPath, Asn, CountryCode, CountryPath, IpAddr, ParseError, Prefix, Traceroute,
                  dedupe_countries, format_ip, parse_ip)
from .rib import balanced_partition

log = logging.getLogger(__name__)

MODEL_VERSION = 1
TABLES = ("known_d", "known_s", "freq_dc", "freq_d", "freq_sc", "freq_s")


class Hop(NamedTuple):
    ip: Optional[IpAddr]
    asn: Optional[Asn]
    country: Optional[CountryCode]

    @property
    def known(self) -> bool:
        return self.asn is not None and self.country is not None


class Segment(NamedTuple):
    asn: Asn
    start: int    # hop index of the ingress point
    end: int      # hop index of the egress point


class Transition(NamedTuple):
    usable: bool
    countries: CountryPath


class Skipped(NamedTuple):
    reason: str


@dataclass(frozen=True)
class AnnotatedTrace:
    src: IpAddr
    dst: IpAddr
    hops: Tuple[Hop, ...]
    segments: Tuple[Segment, ...]
    transitions: Tuple[Transition, ...]

    @property
    def as_path(self) -> AsPath:
        return tuple(s.asn for s in self.segments)

    def ingress(self, i: int) -> IpAddr:
        return self.hops[self.segments[i].start].ip

    def egress(self, i: int) -> IpAddr:
        return self.hops[self.segments[i].end].ip

    @property
    def complete(self) -> bool:
        return all(h.known for h in self.hops)

    @property
    def src_country(self) -> CountryCode:
        return self.hops[0].country

    @property
    def dst_country(self) -> CountryCode:
        return self.hops[-1].country

    @property
    def country_path(self) -> CountryPath:
        return dedupe_countries(h.country for h in self.hops if h.country is not None)


def annotate(trace: Traceroute, db: GeoDb, client: Optional[LookupClient] = None
             ) -> Union[AnnotatedTrace, Skipped]:
    seq = trace.addresses()
    hops = []
    for ip in seq:
        r = resolve(db, client, ip) if ip is not None else None
        hops.append(Hop(ip, r.asn, r.country) if r is not None else Hop(ip, None, None))
    if not hops[0].known:
        return Skipped("source unresolvable")
    if not hops[-1].known:
        return Skipped("destination unresolvable")

    segments: List[Segment] = []
    for i, h in enumerate(hops):
        if not h.known:
            continue
        if segments and segments[-1].asn == h.asn:
            segments[-1] = segments[-1]._replace(end=i)
        else:
            segments.append(Segment(h.asn, i, i))

    transitions = []
    for a, b in zip(segments, segments[1:]):
        span = hops[a.start:b.start + 1]
        usable = all(h.known for h in span)
        transitions.append(Transition(usable, dedupe_countries(h.country for h in span if h.known)))
    return AnnotatedTrace(trace.src, trace.dst, tuple(hops), tuple(segments), tuple(transitions))


@dataclass
class TraceCorpusStats:
    total: int = 0
    complete: int = 0
    unresolved: int = 0
    skipped: int = 0
    observation_points: int = 0


def annotate_all(traces: Iterable[Traceroute], db: GeoDb, client=None):
    """Annotate a corpus; returns (annotated traces, stats)."""
    stats = TraceCorpusStats()
    out, sources = [], set()
    for tr in traces:
        stats.total += 1
        sources.add(tr.src)
        a = annotate(tr, db, client)
        if isinstance(a, Skipped):
            stats.skipped += 1
            continue
        if a.complete:
            stats.complete += 1
        elif any(h.ip is not None and not h.known for h in a.hops):
            stats.unresolved += 1
        out.append(a)
    stats.observation_points = len(sources)
    return out, stats


def _pick(counter: Counter):
    # highest count; ties to the smallest value (ingress ip first)
    return min(counter.items(), key=lambda kv: (-kv[1], kv[0]))[0]


@dataclass
class IngressModel:
    known_d: Dict[tuple, Counter] = field(default_factory=dict)
    known_s: Dict[tuple, Counter] = field(default_factory=dict)
    freq_dc: Dict[tuple, Counter] = field(default_factory=dict)
    freq_d: Dict[tuple, Counter] = field(default_factory=dict)
    freq_sc: Dict[tuple, Counter] = field(default_factory=dict)
    freq_s: Dict[Asn, Counter] = field(default_factory=dict)
    ip_country: Dict[IpAddr, CountryCode] = field(default_factory=dict)
    geo: Optional[GeoDb] = None   # registry embedded in snapshots, for standalone prediction

    def __post_init__(self):
        self._best = None

    def table(self, name: str) -> Dict:
        return getattr(self, name)

    def __len__(self):
        return sum(len(self.table(t)) for t in TABLES)

    def add(self, trace: AnnotatedTrace) -> int:
        """Record every usable transition of ``trace``; returns how many were used."""
        self._best = None
        segs, hops = trace.segments, trace.hops
        used = 0
        for i, tr in enumerate(trace.transitions):
            if not tr.usable:
                continue
            a, b = segs[i].asn, segs[i + 1].asn
            ip_i, ip_next = hops[segs[i].start].ip, hops[segs[i + 1].start].ip
            cur = hops[segs[i].start].country
            value = (ip_next, tr.countries)
            self.freq_s.setdefault(b, Counter())[ip_next] += 1
            self.freq_sc.setdefault((b, cur), Counter())[ip_next] += 1
            self.freq_d.setdefault((a, b), Counter())[value] += 1
            self.freq_dc.setdefault((a, b, cur), Counter())[value] += 1
            self.known_s.setdefault((a, b, ip_i), Counter())[value] += 1
            if i + 2 < len(segs):
                self.known_d.setdefault((a, b, segs[i + 2].asn, ip_i), Counter())[value] += 1
            self.ip_country[ip_next] = hops[segs[i + 1].start].country
            used += 1
        return used

    def merge(self, other: "IngressModel") -> "IngressModel":
        out = IngressModel(geo=self.geo or other.geo)
        for name in TABLES:
            mine, theirs, dest = self.table(name), other.table(name), out.table(name)
            for key in set(mine) | set(theirs):
                dest[key] = mine.get(key, Counter()) + theirs.get(key, Counter())
        out.ip_country = {**self.ip_country, **other.ip_country}
        return out

    def best(self) -> Dict[str, Dict]:
        """Most-frequent value per key for every table (cached until the next update)."""
        if self._best is None:
            self._best = {name: {k: _pick(c) for k, c in self.table(name).items()} for name in TABLES}
            # known_d keys extend known_s keys, so one probe on (a, b, ip) rules out both
            entry = {k: (v, {}) for k, v in self._best["known_s"].items()}
            for (a, b, c, ip), v in self._best["known_d"].items():
                entry.setdefault((a, b, ip), (None, {}))[1][c] = v
            self._best["entry"] = entry
            # same trick for freq_dc under freq_d
            pair = {k: (v, {}) for k, v in self._best["freq_d"].items()}
            for (a, b, c), v in self._best["freq_dc"].items():
                pair.setdefault((a, b), (None, {}))[1][c] = v
            self._lookup = (entry, pair, self._best["freq_sc"], self._best["freq_s"])
        return self._best


def build_model(traces: Iterable[Union[AnnotatedTrace, Skipped]]) -> IngressModel:
    model = IngressModel()
    for t in traces:
        if isinstance(t, AnnotatedTrace):
            model.add(t)
    return model


class Prediction(NamedTuple):
    path: CountryPath
    steps: Tuple[str, ...]      # table that answered each AS transition, or "miss"
    probes: int                 # number of table lookups performed
    low_confidence: bool


class UnresolvableError(ValueError):
    pass


def _walk(as_path, src_ip, dst_prefix, model, db, client, src_country, dst_country, record):
    if src_country is None:
        r = resolve(db, client, src_ip)
        if r is None:
            raise UnresolvableError(f"source {format_ip(src_ip)} unresolvable")
        src_country = r.country
    if dst_country is None:
        dst_country = db.country_of_prefix(dst_prefix)
        if dst_country is None:
            raise UnresolvableError(f"destination {dst_prefix} has no country")
    if model._best is None:
        model.best()
    known, pair, fsc, fs = model._lookup
    ip_country = model.ip_country

    out = [src_country]
    last = src_country
    entry = src_ip
    probes = 0
    for a, b, c in zip(as_path, as_path[1:], (*as_path[2:], None)):
        hit = None
        if entry is not None:
            rec = known.get((a, b, entry))
            if rec is None:
                probes += 1 if c is None else 2
            else:
                if c is not None:
                    probes += 1
                    hit = rec[1].get(c)
                    tag = "known_d"
                if hit is None:
                    probes += 1
                    hit = rec[0]
                    tag = "known_s"
        if hit is None:
            rec = pair.get((a, b))
            if rec is None:
                probes += 2
            else:
                probes += 1
                hit = rec[1].get(last)
                tag = "freq_dc"
                if hit is None:
                    probes += 1
                    hit = rec[0]
                    tag = "freq_d"
        if hit is not None:
            entry = hit[0]
            for cc in hit[1]:
                if cc != last:
                    out.append(cc)
                    last = cc
        else:
            probes += 1
            entry = fsc.get((b, last))
            tag = "freq_sc"
            if entry is None:
                probes += 1
                entry = fs.get(b)
                tag = "freq_s"
            if entry is not None:
                cc = ip_country.get(entry)
                if cc is None:
                    r = resolve(db, client, entry)
                    cc = r.country if r is not None else None
            else:
                tag = "miss"
                cc = db.as_country(b)
            if cc is not None and cc != last:
                out.append(cc)
                last = cc
        if record is not None:
            record.append(tag)
    if dst_country != last:
        out.append(dst_country)
    return tuple(out), probes


def predict_country_path(as_path: Sequence[Asn], src_ip: IpAddr, dst_prefix: Prefix,
                         model: IngressModel, db: GeoDb, client: Optional[LookupClient] = None, *,
                         src_country: Optional[CountryCode] = None,
                         dst_country: Optional[CountryCode] = None) -> CountryPath:
    """Country path for traffic from ``src_ip`` along ``as_path`` to ``dst_prefix``.

    ``src_country`` / ``dst_country`` skip the registry lookups when the caller
    already knows them.
    """
    if not as_path:
        raise ValueError("empty AS path")
    return _walk(as_path, src_ip, dst_prefix, model, db, client, src_country, dst_country, None)[0]


def explain_country_path(as_path, src_ip, dst_prefix, model, db, client=None, *,
                         src_country=None, dst_country=None) -> Prediction:
    """Like :func:`predict_country_path` but reports which table answered each hop."""
    if not as_path:
        raise ValueError("empty AS path")
    steps: List[str] = []
    path, probes = _walk(as_path, src_ip, dst_prefix, model, db, client, src_country, dst_country, steps)
    weak = any(s in ("freq_sc", "freq_s", "miss") for s in steps)
    return Prediction(path, tuple(steps), probes, weak)


def path_agreement(predicted: Sequence[CountryCode], actual: Sequence[CountryCode]) -> float:
    """|predicted & actual| / |predicted | actual| over country sets; 1.0 when both are empty."""
    p, a = set(predicted), set(actual)
    union = p | a
    if not union:
        return 1.0
    return len(p & a) / len(union)


def split_traces(traces: Sequence, ratio: float = 0.5, seed: int = 0):
    """Split traces into (train, test) keeping each observation point (source IP) on one side."""
    counts = Counter(t.src for t in traces)
    train, _ = balanced_partition(counts, ratio, seed)
    keep = set(train)
    return [t for t in traces if t.src in keep], [t for t in traces if t.src not in keep]


# --- snapshot ----------------------------------------------------------------

def _cc(path: CountryPath) -> str:
    return ">".join(path)


def _uncc(text: str) -> CountryPath:
    return tuple(text.split(">")) if text else ()


def write_model(model: IngressModel, fh) -> None:
    fh.write(f"# cpa ingress model\nversion\t{MODEL_VERSION}\n")

    def rows(name, fmt_key):
        fh.write(f"[{name}]\n")
        table = model.table(name)
        out = []
        for key, counter in table.items():
            for value, count in counter.items():
                if isinstance(value, tuple):
                    v = f"{format_ip(value[0])}\t{_cc(value[1])}"
                else:
                    v = format_ip(value)
                out.append(f"{fmt_key(key)}\t{v}\t{count}\n")
        fh.writelines(sorted(out))

    rows("known_d", lambda k: f"{k[0]}\t{k[1]}\t{k[2]}\t{format_ip(k[3])}")
    rows("known_s", lambda k: f"{k[0]}\t{k[1]}\t{format_ip(k[2])}")
    rows("freq_dc", lambda k: f"{k[0]}\t{k[1]}\t{k[2]}")
    rows("freq_d", lambda k: f"{k[0]}\t{k[1]}")
    rows("freq_sc", lambda k: f"{k[0]}\t{k[1]}")
    rows("freq_s", lambda k: f"{k}")
    fh.write("[ip_country]\n")
    fh.writelines(sorted(f"{format_ip(ip)}\t{cc}\n" for ip, cc in model.ip_country.items()))
    if model.geo is not None:
        fh.write("[registry]\n")
        write_registry(model.geo, fh)


_KEY_WIDTH = {"known_d": 4, "known_s": 3, "freq_dc": 3, "freq_d": 2, "freq_sc": 2, "freq_s": 1}


def _parse_key(name, parts):
    if name == "known_d":
        return (int(parts[0]), int(parts[1]), int(parts[2]), parse_ip(parts[3]))
    if name == "known_s":
        return (int(parts[0]), int(parts[1]), parse_ip(parts[2]))
    if name == "freq_dc":
        return (int(parts[0]), int(parts[1]), parts[2])
    if name == "freq_d":
        return (int(parts[0]), int(parts[1]))
    if name == "freq_sc":
        return (int(parts[0]), parts[1])
    return int(parts[0])


def read_model(lines: Iterable[str]) -> IngressModel:
    model = IngressModel()
    section = None
    registry_lines = []
    version_seen = False
    for n, raw in enumerate(lines, 1):
        line = raw.rstrip("\n")
        if not line or line.startswith("#"):
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1]
            continue
        if section is None:
            key, _, val = line.partition("\t")
            if key == "version":
                if int(val) != MODEL_VERSION:
                    raise ParseError(f"unsupported model version {val!r}")
                version_seen = True
            continue
        if section == "registry":
            registry_lines.append(line)
            continue
        parts = line.split("\t")
        try:
            if section == "ip_country":
                model.ip_country[parse_ip(parts[0])] = parts[1]
                continue
            width = _KEY_WIDTH[section]
            key = _parse_key(section, parts[:width])
            rest = parts[width:]
            if section in ("freq_sc", "freq_s"):
                value, count = parse_ip(rest[0]), int(rest[1])
            else:
                value, count = (parse_ip(rest[0]), _uncc(rest[1])), int(rest[2])
        except (IndexError, KeyError, ValueError) as exc:
            raise ParseError(f"model line {n} in [{section}]: {exc}") from None
        model.table(section).setdefault(key, Counter())[value] += count
    if not version_seen:
        raise ParseError("model snapshot has no version header")
    if registry_lines:
        model.geo = parse_registry(registry_lines)
    return model
