"""Synthetic Internets and a small fixture language for hand-drawn scenarios.

Fixture text, one declaration per line (``#`` starts a comment)::

    as     <asn> <CC> [<CC> ...]              regions the AS operates in, home first
    edge   <a> <b> <p2c|c2p|p2p|s2s>           "a p2c b": a is b's provider
    prefix <prefix> <origin> <CC> [announce=<asn>,<asn>...]
    route  <observer> <prefix> <asn> <asn> ...  a RIB route
    geo    <prefix> <CC> <asn>                  extra registry row (router space)
    trace  <src-ip> <dst-ip> <hop>,<hop>,...    '*' for a silent hop, '-' for none

``generate`` builds the same structure at random: a tier-1 peer clique, every
other AS buying transit from one or two lower-numbered ASes, a sprinkle of
peer and sibling links, prefixes with countries, router address space per
(AS, region), RIB routes seen from a set of observer ASes, and traceroutes
that follow the ground-truth routes hop by hop.
"""
from __future__ import annotations

import random
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

from .asrel import Rel, Topology, write_relationships
from .centrality import CountryPrefixTable
from .geodb import GeoDb, write_registry
from .net import (Asn, ParseError, Prefix, Traceroute, format_ip, format_traceroute, parse_asn,
                  parse_ip, parse_prefix)
from .oracle import _labels, _sibling_groups, loop_free, valley_free
from .rib import RibCorpus, RibRoute, write_rib
from .trace import IngressModel

COUNTRY_POOL = ("US", "GB", "DE", "FR", "JP", "BR", "AU", "CN", "IN", "ZA", "RU", "CA", "NL", "SE", "KR", "MX")
_LABELS = {"p2c": Rel.CUSTOMER, "c2p": Rel.PROVIDER, "p2p": Rel.PEER, "s2s": Rel.SIBLING}
_NAMES = {v: k for k, v in _LABELS.items()}


class SynthError(ValueError):
    pass


@dataclass(frozen=True)
class PrefixInfo:
    origin: Asn
    country: str
    announce: Optional[Tuple[Asn, ...]] = None


@dataclass
class Fixture:
    ases: Dict[Asn, Tuple[str, ...]] = field(default_factory=dict)
    edges: List[Tuple[Asn, Asn, Rel]] = field(default_factory=list)
    prefixes: Dict[Prefix, PrefixInfo] = field(default_factory=dict)
    routes: List[RibRoute] = field(default_factory=list)
    geo: List[Tuple[Prefix, str, Asn]] = field(default_factory=list)
    traces: List[Traceroute] = field(default_factory=list)
    truth: Dict[Prefix, Dict[Asn, Tuple[Asn, ...]]] = field(default_factory=dict, repr=False)

    def topology(self) -> Topology:
        return Topology(sorted(self.ases), self.edges)

    def table(self) -> CountryPrefixTable:
        return CountryPrefixTable({p: i.country for p, i in self.prefixes.items()})

    def geodb(self) -> GeoDb:
        db = GeoDb()
        for p, info in sorted(self.prefixes.items()):
            db.add(p, info.country, info.origin)
        for p, cc, asn in self.geo:
            db.add(p, cc, asn)
        return db

    def corpus(self) -> RibCorpus:
        return RibCorpus(list(self.routes))

    def announce(self, prefix: Prefix) -> Optional[Dict[Asn, Tuple[Asn, ...]]]:
        info = self.prefixes.get(prefix)
        if info is None or info.announce is None:
            return None
        return {info.origin: info.announce}

    def announcements(self) -> Dict[Prefix, Dict[Asn, Tuple[Asn, ...]]]:
        return {p: {i.origin: i.announce} for p, i in self.prefixes.items() if i.announce is not None}

    def to_text(self) -> str:
        out = []
        for asn in sorted(self.ases):
            out.append(f"as {asn} {' '.join(self.ases[asn])}")
        for a, b, rel in self.edges:
            out.append(f"edge {a} {b} {_NAMES[rel]}")
        for p in sorted(self.prefixes):
            i = self.prefixes[p]
            extra = f" announce={','.join(map(str, i.announce))}" if i.announce is not None else ""
            out.append(f"prefix {p} {i.origin} {i.country}{extra}")
        for p, cc, asn in self.geo:
            out.append(f"geo {p} {cc} {asn}")
        for r in self.routes:
            out.append(f"route {r.observer} {r.prefix} {' '.join(map(str, r.path))}")
        for t in self.traces:
            hops = ",".join("*" if h is None else format_ip(h) for h in t.hops) or "-"
            out.append(f"trace {format_ip(t.src)} {format_ip(t.dst)} {hops}")
        return "\n".join(out) + "\n"

    def write_inputs(self, directory) -> Dict[str, Path]:
        """Write RIB, traceroute, registry, relationship and prefix-table files; return their paths."""
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        paths = {name: d / fname for name, fname in (
            ("rib", "rib.tsv"), ("traces", "traces.tsv"), ("registry", "registry.csv"),
            ("relationships", "relationships.csv"), ("prefix_table", "prefix_table.csv"))}
        write_rib(self.corpus(), paths["rib"])
        with open(paths["traces"], "w") as fh:
            for t in self.traces:
                fh.write(format_traceroute(t) + "\n")
        with open(paths["registry"], "w") as fh:
            fh.write("prefix,country,asn\n")
            write_registry(self.geodb(), fh)
        write_relationships(self.topology(), paths["relationships"])
        with open(paths["prefix_table"], "w") as fh:
            self.table().write_csv(fh)
        return paths


def parse_fixture(text: str) -> Fixture:
    fx = Fixture()
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        kind, *args = line.split()
        try:
            if kind == "as":
                if len(args) < 2:
                    raise ParseError("as needs an ASN and at least one country")
                fx.ases[parse_asn(args[0])] = tuple(c.upper() for c in args[1:])
            elif kind == "edge":
                if len(args) != 3 or args[2] not in _LABELS:
                    raise ParseError("edge needs <a> <b> <p2c|c2p|p2p|s2s>")
                a, b = parse_asn(args[0]), parse_asn(args[1])
                fx.edges.append((a, b, _LABELS[args[2]]))
                for x in (a, b):
                    fx.ases.setdefault(x, ())
            elif kind == "prefix":
                if len(args) not in (3, 4):
                    raise ParseError("prefix needs <prefix> <origin> <CC> [announce=...]")
                announce = None
                if len(args) == 4:
                    if not args[3].startswith("announce="):
                        raise ParseError(f"unexpected {args[3]!r}")
                    announce = tuple(parse_asn(x) for x in args[3][9:].split(",") if x)
                fx.prefixes[parse_prefix(args[0])] = PrefixInfo(parse_asn(args[1]), args[2].upper(), announce)
            elif kind == "route":
                if len(args) < 3:
                    raise ParseError("route needs <observer> <prefix> <path...>")
                fx.routes.append(RibRoute(parse_asn(args[0]), parse_prefix(args[1]),
                                          tuple(parse_asn(a) for a in args[2:])))
            elif kind == "geo":
                if len(args) != 3:
                    raise ParseError("geo needs <prefix> <CC> <asn>")
                fx.geo.append((parse_prefix(args[0]), args[1].upper(), parse_asn(args[2])))
            elif kind == "trace":
                if len(args) != 3:
                    raise ParseError("trace needs <src> <dst> <hops>")
                hops = () if args[2] == "-" else tuple(
                    None if h == "*" else parse_ip(h) for h in args[2].split(","))
                fx.traces.append(Traceroute(parse_ip(args[0]), parse_ip(args[1]), hops))
            else:
                raise ParseError(f"unknown declaration {kind!r}")
        except ParseError as exc:
            raise ParseError(f"fixture line {n}: {exc}") from None
    return fx


def load_fixture(path) -> Fixture:
    return parse_fixture(Path(path).read_text())


# --- ground truth routing ----------------------------------------------------

def route_all(topo: Topology, origin: Asn, announce=None) -> Dict[Asn, Tuple[Asn, ...]]:
    """Stable routes when every AS prefers the shortest legal path (ties: lowest ASN sequence).

    Settled level by level: an AS's route of length k+1 extends some
    neighbour's settled route of length k.
    """
    lab = _labels(topo)
    groups = _sibling_groups(lab)
    allowed = set(announce[origin]) if announce and origin in announce else None
    best = {origin: (origin,)}
    frontier = [origin]
    while frontier:
        offers: Dict[Asn, Tuple[Asn, ...]] = {}
        for u in frontier:
            for v in topo.neighbors(u):
                if v in best or (allowed is not None and u == origin and v not in allowed):
                    continue
                cand = (v,) + best[u]
                if valley_free(cand, lab) and loop_free(cand, groups):
                    if v not in offers or cand < offers[v]:
                        offers[v] = cand
        best.update(offers)
        frontier = sorted(offers)
    return best


# --- random generation ------------------------------------------------------

@dataclass
class SynthSpec:
    n_ases: int = 12
    n_countries: int = 4
    prefixes_per_as: Tuple[int, int] = (1, 2)
    tier1: int = 3
    peer_prob: float = 0.1
    sibling_prob: float = 0.03
    multi_region_prob: float = 0.3
    split_announce_prob: float = 0.0
    observer_fraction: float = 0.3
    n_vantage: int = 6
    n_traces: int = 40
    silent_hop_prob: float = 0.0
    seed: int = 0

    def check(self):
        if self.n_ases < 1:
            raise SynthError("need at least one AS")
        if self.n_ases > 100:
            raise SynthError("address plan supports at most 100 ASes")
        if not 1 <= self.n_countries <= len(COUNTRY_POOL):
            raise SynthError(f"n_countries must be in [1, {len(COUNTRY_POOL)}]")
        lo, hi = self.prefixes_per_as
        if not 0 <= lo <= hi <= 16:
            raise SynthError("prefixes_per_as must satisfy 0 <= lo <= hi <= 16")
        if not 1 <= self.tier1 <= self.n_ases:
            raise SynthError("tier1 must be between 1 and n_ases")
        if self.n_traces and self.n_vantage < 1:
            raise SynthError("traces need at least one vantage point")


def _border(asn, region, neighbor):
    return ((120 + asn) << 24) | (region << 16) | (neighbor << 8) | 1


def _core(asn, region):
    return ((120 + asn) << 24) | (region << 16) | 1


# World used for the noise-robustness sweep: large enough that each replica
# has a few thousand evaluated traces over 12 countries.
NOISE_WORLD = SynthSpec(n_ases=100, n_countries=12, n_traces=10_000, n_vantage=150,
                        observer_fraction=0.6, peer_prob=0.03, multi_region_prob=0.1)
NOISE_SEEDS = tuple(range(8))


def generate(spec: SynthSpec) -> Fixture:
    """Random fixture, fully determined by ``spec`` (including its seed)."""
    spec.check()
    rng = random.Random(spec.seed)
    n = spec.n_ases
    ases = list(range(1, n + 1))
    countries = COUNTRY_POOL[:spec.n_countries]
    fx = Fixture()

    for a in ases:
        home = rng.choice(countries)
        regions = [home]
        extra = min(2, len(countries) - 1) if a <= spec.tier1 else (
            rng.randint(1, 2) if rng.random() < spec.multi_region_prob else 0)
        others = [c for c in countries if c != home]
        rng.shuffle(others)
        regions += others[:extra]
        fx.ases[a] = tuple(regions)

    adj = set()

    def link(a, b, rel):
        adj.add((min(a, b), max(a, b)))
        fx.edges.append((a, b, rel))

    for a in range(1, spec.tier1 + 1):
        for b in range(a + 1, spec.tier1 + 1):
            link(a, b, Rel.PEER)
    for a in range(spec.tier1 + 1, n + 1):
        k = min(a - 1, 1 + (rng.random() < 0.5))
        for p in sorted(rng.sample(range(1, a), k)):
            link(p, a, Rel.CUSTOMER)
    for a in range(spec.tier1 + 1, n + 1):
        for b in range(a + 1, n + 1):
            if (a, b) in adj:
                continue
            r = rng.random()
            if r < spec.sibling_prob:
                link(a, b, Rel.SIBLING)
            elif r < spec.sibling_prob + spec.peer_prob:
                link(a, b, Rel.PEER)

    providers = {a: [] for a in ases}
    for a, b, rel in fx.edges:
        if rel is Rel.CUSTOMER:
            providers[b].append(a)

    lo, hi = spec.prefixes_per_as
    for a in ases:
        for j in range(rng.randint(lo, hi)):
            length = rng.choice((16, 20, 24))
            p = Prefix(((20 + a) << 24) | ((16 * j) << 16), length)
            announce = None
            if len(providers[a]) > 1 and rng.random() < spec.split_announce_prob:
                announce = (rng.choice(providers[a]),)
            fx.prefixes[p] = PrefixInfo(a, rng.choice(fx.ases[a]), announce)
        for r, cc in enumerate(fx.ases[a]):
            fx.geo.append((Prefix(((120 + a) << 24) | (r << 16), 16), cc, a))

    topo = fx.topology()
    for p in sorted(fx.prefixes):
        fx.truth[p] = route_all(topo, fx.prefixes[p].origin, fx.announce(p))

    n_obs = max(1, round(spec.observer_fraction * n))
    observers = sorted(rng.sample(ases, min(n, n_obs)))
    for o in observers:
        for p in sorted(fx.prefixes):
            path = fx.truth[p].get(o)
            if path is not None:
                fx.routes.append(RibRoute(o, p, path))

    if spec.n_traces and fx.prefixes:
        _make_traces(fx, spec, rng)
    return fx


def _make_traces(fx: Fixture, spec: SynthSpec, rng: random.Random) -> None:
    plist = sorted(fx.prefixes)
    # vantage points sit in stub-ish (high numbered) ASes when possible
    pool = sorted(plist, key=lambda p: -fx.prefixes[p].origin)[:max(spec.n_vantage * 2, 1)]
    vantage = []
    for _ in range(spec.n_vantage):
        p = rng.choice(pool)
        vantage.append((p, p.host(rng.randint(1, min(p.size() - 2, 250)))))
    seed = spec.seed

    def ingress_region(b, a):
        return random.Random(f"in:{seed}:{b}:{a}").randrange(len(fx.ases[b]))

    def egress_region(a, nxt, r):
        g = random.Random(f"out:{seed}:{a}:{nxt}:{r}")
        return r if g.random() < 0.6 else g.randrange(len(fx.ases[a]))

    attempts = 0
    while len(fx.traces) < spec.n_traces and attempts < spec.n_traces * 20:
        attempts += 1
        src_p, src = rng.choice(vantage)
        dst_p = rng.choice(plist)
        a0 = fx.prefixes[src_p].origin
        path = fx.truth[dst_p].get(a0)
        if path is None or len(path) < 2:
            continue
        dst = dst_p.host(rng.randint(1, min(dst_p.size() - 2, 250)))
        r_src = fx.ases[a0].index(fx.prefixes[src_p].country)
        r_dst = fx.ases[path[-1]].index(fx.prefixes[dst_p].country)
        hops = []
        entry = r_src
        for i, a in enumerate(path):
            if i:
                entry = ingress_region(a, path[i - 1])
                hops.append(_border(a, entry, path[i - 1]))
            if i < len(path) - 1:
                out = egress_region(a, path[i + 1], entry)
                hops.append(_core(a, entry))
                if out != entry:
                    hops.append(_core(a, out))
                hops.append(_border(a, out, path[i + 1]))
            elif r_dst != entry:
                hops.append(_core(a, r_dst))
        if spec.silent_hop_prob:
            hops = [None if rng.random() < spec.silent_hop_prob else h for h in hops]
        fx.traces.append(Traceroute(src, dst, tuple(hops)))


def inject_segment_noise(model: IngressModel, rate: float, seed: int = 0,
                         countries: Sequence[str] = COUNTRY_POOL) -> IngressModel:
    """Copy of ``model`` as if a ``rate`` fraction of the observed transitions had one
    country of their segment mis-located to a random different country.

    Noise is drawn per observation (per unit of count), so frequency tables
    can out-vote it while single observations cannot.
    """
    rng = random.Random(seed)
    out = IngressModel(ip_country=dict(model.ip_country), geo=model.geo)
    for name in ("known_d", "known_s", "freq_dc", "freq_d"):
        src, dst = model.table(name), out.table(name)
        for key in sorted(src, key=repr):
            c = Counter()
            for (ip, seg), k in sorted(src[key].items(), key=repr):
                for _ in range(k):
                    noisy = seg
                    if seg and rng.random() < rate:
                        i = rng.randrange(len(seg))
                        noisy = seg[:i] + (rng.choice([x for x in countries if x != seg[i]]),) + seg[i + 1:]
                    c[(ip, noisy)] += 1
            dst[key] = c
    for name in ("freq_sc", "freq_s"):
        out.table(name).update({k: Counter(v) for k, v in model.table(name).items()})
    return out


# --- hand-built fixtures ----------------------------------------------------

MULTIPATHS = """\
# Source A=1 reaches destination AS B=2 via C=3 for one prefix and via E=5
# for another; a third prefix at B sits in a different country.
as 1 GB
as 2 US AU
as 3 US
as 4 GB
as 5 FR
edge 4 1 p2c
edge 4 3 p2c
edge 4 5 p2c
edge 3 2 p2c
edge 5 2 p2c
prefix 10.1.0.0/16 1 GB
prefix 20.1.0.0/16 2 US announce=3
prefix 20.2.0.0/16 2 US announce=5
prefix 20.3.0.0/16 2 AU announce=3
route 4 20.1.0.0/16 4 3 2
route 4 20.2.0.0/16 4 5 2
route 4 20.3.0.0/16 4 3 2
route 4 10.1.0.0/16 4 1
"""

TRIPLE = """\
# Seven-hop trace: src,ip2 in AS1; ip3,ip4,ip5 in AS2; ip6,dst in AS3.
# Countries: C1 = US for src,ip2,ip3; C2 = DE for ip4,ip5,ip6; C3 = JP for dst.
as 1 US
as 2 US DE
as 3 DE JP
edge 1 2 c2p
edge 2 3 p2c
prefix 10.0.0.0/24 1 US
prefix 30.0.0.0/24 3 JP
geo 10.0.1.2/32 US 1
geo 20.0.0.3/32 US 2
geo 20.0.0.4/32 DE 2
geo 20.0.0.5/32 DE 2
geo 30.0.1.6/32 DE 3
route 1 30.0.0.0/24 1 2 3
trace 10.0.0.1 30.0.0.7 10.0.1.2,20.0.0.3,20.0.0.4,20.0.0.5,30.0.1.6
"""


def multipaths_fixture() -> Fixture:
    return parse_fixture(MULTIPATHS)


def triple_fixture() -> Fixture:
    return parse_fixture(TRIPLE)
