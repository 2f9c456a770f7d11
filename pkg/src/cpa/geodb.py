"""IP -> (country, AS) resolution over a longest-prefix-match registry table.

Registry CSV rows are ``prefix,country_code,asn``.  Hong Kong is folded into
China; rows carrying continent-level codes (EU, AP) are kept as *vague* and
answered through a :class:`LookupClient` fallback instead.
"""
from __future__ import annotations

import logging
import socket
import time
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, Generic, Iterable, Iterator, List, NamedTuple, Optional, Protocol, Tuple, TypeVar

from .net import (VAGUE_COUNTRIES, Asn, CountryCode, IpAddr, ParseError, Prefix, format_ip,
                  normalize_country, parse_asn, parse_ip, parse_prefix)

log = logging.getLogger(__name__)

T = TypeVar("T")

REGISTRY = "registry"
WHOIS = "whois-fallback"
OVERRIDE = "override"


class PrefixTrie(Generic[T]):
    """Binary trie keyed by prefix bits.  Nodes are ``[child0, child1, prefix, value]`` lists."""

    __slots__ = ("_root", "_len")

    def __init__(self, items: Iterable[Tuple[Prefix, T]] = ()):
        self._root = [None, None, None, None]
        self._len = 0
        for p, v in items:
            self[p] = v

    def __len__(self):
        return self._len

    def __setitem__(self, prefix: Prefix, value: T) -> None:
        node, base = self._root, prefix.base
        for i in range(prefix.length):
            bit = (base >> (31 - i)) & 1
            nxt = node[bit]
            if nxt is None:
                nxt = node[bit] = [None, None, None, None]
            node = nxt
        if node[2] is None:
            self._len += 1
        node[2], node[3] = prefix, value

    def get(self, prefix: Prefix, default=None):
        node, base = self._root, prefix.base
        for i in range(prefix.length):
            node = node[(base >> (31 - i)) & 1]
            if node is None:
                return default
        return node[3] if node[2] is not None else default

    def __contains__(self, prefix: Prefix) -> bool:
        return self.get(prefix, _MISSING) is not _MISSING

    def longest_match(self, ip: IpAddr, max_length: int = 32) -> Optional[Tuple[Prefix, T]]:
        node, found = self._root, None
        if node[2] is not None:
            found = node
        for i in range(max_length):
            node = node[(ip >> (31 - i)) & 1]
            if node is None:
                break
            if node[2] is not None:
                found = node
        return (found[2], found[3]) if found is not None else None

    def covering(self, prefix: Prefix) -> Optional[Tuple[Prefix, T]]:
        """Longest stored prefix that covers all of ``prefix``."""
        return self.longest_match(prefix.base, prefix.length)

    def items(self) -> Iterator[Tuple[Prefix, T]]:
        stack = [self._root]
        while stack:
            node = stack.pop()
            if node[2] is not None:
                yield node[2], node[3]
            for child in (node[1], node[0]):
                if child is not None:
                    stack.append(child)


_MISSING = object()


def longest_match(table, ip: IpAddr) -> Optional[Prefix]:
    """Longest prefix in ``table`` (a trie, GeoDb, or iterable of prefixes) containing ``ip``."""
    if isinstance(table, GeoDb):
        table = table.trie
    if not isinstance(table, PrefixTrie):
        table = PrefixTrie((p, None) for p in table)
    hit = table.longest_match(ip)
    return hit[0] if hit else None


class GeoEntry(NamedTuple):
    country: Optional[CountryCode]    # None when the registry answer is vague
    asn: Optional[Asn]
    source: str
    raw_country: str = ""

    @property
    def vague(self) -> bool:
        return self.country is None


class Resolution(NamedTuple):
    country: CountryCode
    asn: Asn
    source: str


class LookupClient(Protocol):
    def request(self, ip: IpAddr) -> Optional[Tuple[CountryCode, Asn]]:
        ...


class NullClient:
    def request(self, ip):
        return None


def format_bulk_request(ips: Iterable[IpAddr]) -> str:
    return "".join(format_ip(ip) + "\n" for ip in ips)


def parse_bulk_response(lines: Iterable[str]) -> Dict[IpAddr, Tuple[str, Optional[Asn]]]:
    """Parse ``ip|asn|country`` lines; unparseable lines are skipped."""
    out = {}
    for line in lines:
        parts = [p.strip() for p in line.strip().split("|")]
        if len(parts) != 3 or line.startswith("#"):
            continue
        try:
            ip = parse_ip(parts[0])
        except ParseError:
            continue
        try:
            asn = parse_asn(parts[1])
        except ParseError:
            asn = None
        out[ip] = (parts[2], asn)
    return out


def _usable_answer(answer) -> Optional[Tuple[CountryCode, Asn]]:
    if answer is None:
        return None
    cc, asn = answer
    cc = normalize_country(cc)
    if cc is None or asn is None:
        return None
    return cc, asn


class FileLookupClient:
    """Answers from a local ``ip|asn|country`` transcript (tests, offline runs)."""

    def __init__(self, path=None, lines: Iterable[str] = ()):
        if path is not None:
            with open(path) as fh:
                self._answers = parse_bulk_response(fh)
        else:
            self._answers = parse_bulk_response(lines)

    def request(self, ip):
        return _usable_answer(self._answers.get(ip))


class BulkWhoisClient:
    """Rate-limited client for a bulk whois service.

    Sends newline-delimited IPs and reads ``ip|asn|country`` lines back.  Network
    access is disabled unless ``enabled=True``; a disabled client answers nothing.
    """

    def __init__(self, host: str, port: int = 43, *, enabled: bool = False,
                 min_interval: float = 1.0, timeout: float = 10.0):
        self.host, self.port = host, port
        self.enabled = enabled
        self.min_interval = min_interval
        self.timeout = timeout
        self._last = 0.0
        self.errors = 0

    def bulk(self, ips: List[IpAddr]) -> Dict[IpAddr, Tuple[str, Optional[Asn]]]:
        if not self.enabled or not ips:
            return {}
        wait = self._last + self.min_interval - time.monotonic()
        if wait > 0:
            time.sleep(wait)
        self._last = time.monotonic()
        try:
            with socket.create_connection((self.host, self.port), timeout=self.timeout) as sock:
                sock.sendall(format_bulk_request(ips).encode())
                sock.shutdown(socket.SHUT_WR)
                chunks = []
                while True:
                    data = sock.recv(65536)
                    if not data:
                        break
                    chunks.append(data)
        except OSError as exc:
            self.errors += 1
            log.warning("stage=geodb whois_error=%r", exc)
            return {}
        return parse_bulk_response(b"".join(chunks).decode(errors="replace").splitlines())

    def request(self, ip):
        return _usable_answer(self.bulk([ip]).get(ip))


@dataclass
class GeoDb:
    trie: PrefixTrie = field(default_factory=PrefixTrie)
    rejects: List[Tuple[int, str]] = field(default_factory=list)
    warnings: List[str] = field(default_factory=list)
    cache: Dict[IpAddr, Optional[Resolution]] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self._as_country = None
        self._prefix_country: Dict[Prefix, Optional[CountryCode]] = {}

    def add(self, prefix: Prefix, country: str, asn: Optional[Asn], source: str = REGISTRY) -> None:
        if prefix in self.trie:
            self.warnings.append(f"duplicate prefix {prefix}: later row wins")
        self.trie[prefix] = GeoEntry(normalize_country(country), asn, source, (country or "").upper())
        self.cache.clear()
        self._as_country = None
        self._prefix_country.clear()

    def entries(self):
        return sorted(self.trie.items())

    def lookup(self, ip: IpAddr) -> Optional[Tuple[Prefix, GeoEntry]]:
        return self.trie.longest_match(ip)

    def country_of_prefix(self, prefix: Prefix) -> Optional[CountryCode]:
        """Country of the longest registry entry covering ``prefix`` (None if vague/absent)."""
        try:
            return self._prefix_country[prefix]
        except KeyError:
            pass
        hit = self.trie.covering(prefix)
        cc = hit[1].country if hit else None
        self._prefix_country[prefix] = cc
        return cc

    def as_country(self, asn: Asn) -> Optional[CountryCode]:
        """Majority country across the registry prefixes held by ``asn`` (lowest code on ties)."""
        if self._as_country is None:
            votes: Dict[Asn, Counter] = {}
            for _, e in self.trie.items():
                if e.asn is not None and e.country is not None:
                    votes.setdefault(e.asn, Counter())[e.country] += 1
            self._as_country = {a: min(c, key=lambda k: (-c[k], k)) for a, c in votes.items()}
        return self._as_country.get(asn)


def parse_registry(lines: Iterable[str], db: Optional[GeoDb] = None, source: str = REGISTRY) -> GeoDb:
    db = db if db is not None else GeoDb()
    for n, line in enumerate(lines, 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = [p.strip() for p in line.split(",")]
        if len(parts) != 3:
            db.rejects.append((n, f"expected 3 fields, got {len(parts)}"))
            continue
        if parts[0] == "prefix":
            continue
        try:
            prefix = parse_prefix(parts[0])
            asn = parse_asn(parts[2]) if parts[2] else None
        except ParseError as exc:
            db.rejects.append((n, str(exc)))
            continue
        cc = parts[1].upper()
        if len(cc) != 2 or not cc.isalpha():
            db.rejects.append((n, f"bad country code {parts[1]!r}"))
            continue
        db.add(prefix, cc, asn, source)
    for w in db.warnings:
        log.warning("stage=geodb %s", w)
    return db


def build_geodb(registry_file, overrides=None) -> GeoDb:
    with open(registry_file) as fh:
        db = parse_registry(fh)
    if overrides is not None:
        with open(overrides) as fh:
            parse_registry(fh, db, OVERRIDE)
    return db


def write_registry(db: GeoDb, fh) -> None:
    for prefix, e in db.entries():
        cc = e.raw_country if e.country is None else e.country
        fh.write(f"{prefix},{cc},{e.asn or ''}\n")


def resolve(db: GeoDb, client: Optional[LookupClient], ip: IpAddr) -> Optional[Resolution]:
    """Longest specific registry match, else the client's answer, else ``None``."""
    try:
        return db.cache[ip]
    except KeyError:
        pass
    hit = db.trie.longest_match(ip)
    result = None
    if hit is not None and not hit[1].vague and hit[1].asn is not None:
        result = Resolution(hit[1].country, hit[1].asn, hit[1].source)
    elif client is not None:
        answer = _usable_answer(client.request(ip))
        if answer is not None:
            result = Resolution(answer[0], answer[1], WHOIS)
    db.cache[ip] = result
    return result


def is_vague(code: str) -> bool:
    return code.upper() in VAGUE_COUNTRIES
