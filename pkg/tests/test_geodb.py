from hypothesis import given, settings, strategies as st

from cpa.geodb import (OVERRIDE, WHOIS, BulkWhoisClient, FileLookupClient, GeoDb, PrefixTrie, longest_match,
                       parse_bulk_response, parse_registry, resolve)
from cpa.net import Prefix, parse_ip, parse_prefix

ROWS = ["prefix,country,asn", "1.2.0.0/16,HK,4134", "5.0.0.0/8,EU,65010", "5.6.0.0/16,FR,65011",
        "bogus line", "7.0.0.0/8,XYZ,1"]


def test_hong_kong_stored_as_china():
    db = parse_registry(ROWS)
    assert db.lookup(parse_ip("1.2.3.4"))[1].country == "CN"
    assert resolve(db, None, parse_ip("1.2.3.4")).country == "CN"


def test_vague_rows_marked_unresolved():
    db = parse_registry(ROWS)
    entry = db.lookup(parse_ip("5.1.1.1"))[1]
    assert entry.vague and entry.raw_country == "EU"
    assert resolve(db, None, parse_ip("5.1.1.1")) is None


def test_rejects_reported():
    db = parse_registry(ROWS)
    assert [n for n, _ in db.rejects] == [5, 6]


def test_duplicate_rows_last_wins():
    db = parse_registry(["9.0.0.0/8,US,1", "9.0.0.0/8,DE,2"])
    assert resolve(db, None, parse_ip("9.1.1.1")).country == "DE"
    assert db.warnings


def test_specific_beats_vague_cover():
    db = parse_registry(ROWS)
    assert resolve(db, None, parse_ip("5.6.7.8")).country == "FR"


def test_fallback_client_for_vague_space():
    db = parse_registry(ROWS)
    client = FileLookupClient(lines=["5.1.1.1|65020|DE", "5.1.1.2|65021|EU"])
    r = resolve(db, client, parse_ip("5.1.1.1"))
    assert (r.country, r.asn, r.source) == ("DE", 65020, WHOIS)
    assert resolve(db, client, parse_ip("5.1.1.2")) is None


def test_no_match_anywhere():
    db = parse_registry(ROWS)
    assert resolve(db, FileLookupClient(lines=[]), parse_ip("200.0.0.1")) is None


def test_override_source_tag():
    db = parse_registry(["9.0.0.0/8,US,1"])
    parse_registry(["9.9.0.0/16,GB,2"], db, OVERRIDE)
    assert resolve(db, None, parse_ip("9.9.9.9")).source == OVERRIDE


def test_lpm_examples():
    table = [parse_prefix("10.0.0.0/8"), parse_prefix("10.1.0.0/16")]
    assert longest_match(table, parse_ip("10.1.2.3")) == parse_prefix("10.1.0.0/16")
    assert longest_match(table, parse_ip("10.2.0.1")) == parse_prefix("10.0.0.0/8")
    assert longest_match(table, parse_ip("11.0.0.1")) is None


def test_as_country_majority():
    db = GeoDb()
    db.add(parse_prefix("1.0.0.0/16"), "US", 7)
    db.add(parse_prefix("1.1.0.0/16"), "DE", 7)
    db.add(parse_prefix("1.2.0.0/16"), "DE", 7)
    assert db.as_country(7) == "DE"
    assert db.as_country(8) is None


def test_bulk_protocol_text():
    parsed = parse_bulk_response(["# header", "1.2.3.4 | 15169 | US", "junk", "1.2.3.5|NA|DE"])
    assert parsed == {parse_ip("1.2.3.4"): ("US", 15169), parse_ip("1.2.3.5"): ("DE", None)}


def test_disabled_whois_client_is_silent():
    assert BulkWhoisClient("whois.invalid").request(parse_ip("1.2.3.4")) is None


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 2 ** 32 - 1), st.integers(0, 32)), max_size=25),
       st.lists(st.integers(0, 2 ** 32 - 1), min_size=1, max_size=20))
def test_trie_agrees_with_linear_scan(raw, ips):
    prefixes = {parse_prefix(f"{(b >> 24) & 255}.{(b >> 16) & 255}.{(b >> 8) & 255}.{b & 255}/{n}")
                for b, n in raw}
    trie = PrefixTrie((p, str(p)) for p in prefixes)
    assert len(trie) == len(prefixes)
    for ip in ips:
        hits = [p for p in prefixes if p.contains(ip)]
        expect = max(hits, key=lambda p: p.length) if hits else None
        got = trie.longest_match(ip)
        assert (got[0] if got else None) == expect


def test_trie_items_and_covering():
    trie = PrefixTrie([(Prefix(10 << 24, 8), "a"), (parse_prefix("10.1.0.0/16"), "b")])
    assert sorted(trie.items()) == [(Prefix(10 << 24, 8), "a"), (parse_prefix("10.1.0.0/16"), "b")]
    assert trie.covering(parse_prefix("10.1.2.0/24"))[1] == "b"
    assert trie.covering(parse_prefix("10.0.0.0/7")) is None
