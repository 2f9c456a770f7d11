"""Core value types: IPv4 addresses, prefixes, AS numbers, country codes and paths.

Addresses are kept as plain ``int`` values (0 .. 2**32-1) so that they hash and
compare cheaply in the hot lookup tables; text conversion goes through the
standard :mod:`ipaddress` module.  AS paths and country paths are tuples.
"""
from __future__ import annotations

import ipaddress
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, Tuple, Union

IpAddr = int
Asn = int
CountryCode = str
AsPath = Tuple[int, ...]
CountryPath = Tuple[str, ...]

IPV4_MAX = (1 << 32) - 1

# Registry answers too coarse to place a router in one country.
VAGUE_COUNTRIES = frozenset({"EU", "AP"})


class ParseError(ValueError):
    """Raised on malformed textual input; the message names the bad token."""


def parse_ip(text: Union[str, int]) -> IpAddr:
    if isinstance(text, int):
        if not 0 <= text <= IPV4_MAX:
            raise ParseError(f"address out of range: {text!r}")
        return text
    try:
        return int(ipaddress.IPv4Address(text.strip()))
    except ValueError:
        raise ParseError(f"bad IPv4 address: {text!r}") from None


def format_ip(ip: IpAddr) -> str:
    return str(ipaddress.IPv4Address(ip))


@dataclass(frozen=True, order=True)
class Prefix:
    base: int
    length: int

    def __post_init__(self):
        if not 0 <= self.length <= 32:
            raise ParseError(f"bad prefix length: {self.length!r}")
        if self.base & ~self.mask & IPV4_MAX:
            raise ParseError(f"host bits set in {format_ip(self.base)}/{self.length}")

    @property
    def mask(self) -> int:
        return (IPV4_MAX << (32 - self.length)) & IPV4_MAX

    def size(self) -> int:
        return 1 << (32 - self.length)

    @property
    def last(self) -> int:
        return self.base + self.size() - 1

    def contains(self, ip: IpAddr) -> bool:
        return (ip & self.mask) == self.base

    def covers(self, other: "Prefix") -> bool:
        return self.length <= other.length and self.contains(other.base)

    def host(self, offset: int = 1) -> IpAddr:
        """An address inside the prefix (``offset`` wraps within its size)."""
        return self.base + (offset % self.size())

    def __str__(self) -> str:
        return f"{format_ip(self.base)}/{self.length}"

    def __repr__(self) -> str:
        return f"Prefix({self})"


def parse_prefix(text: str) -> Prefix:
    """Parse ``a.b.c.d/len``; host bits below the length are cleared."""
    raw = text.strip()
    if raw.count("/") != 1:
        raise ParseError(f"bad prefix: {text!r}")
    addr, _, length = raw.partition("/")
    if not length.isdigit():
        raise ParseError(f"bad prefix length: {length!r}")
    n = int(length)
    if n > 32:
        raise ParseError(f"bad prefix length: {length!r}")
    ip = parse_ip(addr)
    mask = (IPV4_MAX << (32 - n)) & IPV4_MAX
    return Prefix(ip & mask, n)


def parse_asn(text: Union[str, int]) -> Asn:
    try:
        asn = int(text)
    except ValueError:
        raise ParseError(f"bad AS number: {text!r}") from None
    if not 0 < asn <= IPV4_MAX:
        raise ParseError(f"bad AS number: {text!r}")
    return asn


def normalize_country(code: Optional[str]) -> Optional[CountryCode]:
    """Uppercase a registry country code, folding Hong Kong into China.

    Returns ``None`` for empty or vague (continent-level) codes.
    """
    if not code:
        return None
    cc = code.strip().upper()
    if len(cc) != 2 or not cc.isascii() or not cc.isalpha():
        return None
    if cc in VAGUE_COUNTRIES:
        return None
    if cc == "HK":
        return "CN"
    return cc


def dedupe_countries(path: Iterable[CountryCode]) -> CountryPath:
    out = []
    for cc in path:
        if not out or out[-1] != cc:
            out.append(cc)
    return tuple(out)


def collapse_prepends(path: Sequence[Asn]) -> AsPath:
    out = []
    for asn in path:
        if not out or out[-1] != asn:
            out.append(asn)
    return tuple(out)


def is_loop_free(path: Sequence[Asn], sibling_rep=None) -> bool:
    """True if no AS repeats; with ``sibling_rep`` consecutive siblings count as one AS."""
    if len(set(path)) != len(path):
        return False
    if sibling_rep is None:
        return True
    reps = collapse_prepends([sibling_rep(a) for a in path])
    return len(set(reps)) == len(reps)


@dataclass(frozen=True)
class Traceroute:
    src: IpAddr
    dst: IpAddr
    hops: Tuple[Optional[IpAddr], ...]

    @property
    def incomplete(self) -> bool:
        return any(h is None for h in self.hops)

    def addresses(self) -> Tuple[Optional[IpAddr], ...]:
        """Hop sequence bracketed by src and dst (not repeated if already present)."""
        seq = list(self.hops)
        if not seq or seq[0] != self.src:
            seq.insert(0, self.src)
        if seq[-1] != self.dst:
            seq.append(self.dst)
        return tuple(seq)


def parse_traceroute(line: str) -> Traceroute:
    parts = line.rstrip("\n").split("\t")
    if len(parts) != 3:
        raise ParseError(f"expected 3 tab-separated fields, got {len(parts)}: {line.strip()!r}")
    src, dst, hops = parts
    parsed = []
    for tok in hops.split(","):
        tok = tok.strip()
        if not tok:
            continue
        parsed.append(None if tok == "*" else parse_ip(tok))
    return Traceroute(parse_ip(src), parse_ip(dst), tuple(parsed))


def format_traceroute(tr: Traceroute) -> str:
    hops = ",".join("*" if h is None else format_ip(h) for h in tr.hops)
    return f"{format_ip(tr.src)}\t{format_ip(tr.dst)}\t{hops}"


def read_traceroutes(lines: Iterable[str]):
    """Yield ``(line_number, Traceroute | ParseError)`` for each data line."""
    for n, line in enumerate(lines, 1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        try:
            yield n, parse_traceroute(line)
        except ParseError as exc:
            yield n, exc
