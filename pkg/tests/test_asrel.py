import pytest
from hypothesis import given, settings, strategies as st

from cpa.asrel import (Rel, Topology, UnknownEdgeError, infer_relationships, is_valley_free, may_export,
                       parse_relationships, topology_from_relationships, write_relationships)
from cpa.net import ParseError
from cpa.oracle import _labels, valley_free
from cpa.rib import extract_topology, parse_rib


def _infer(paths, **kw):
    corpus = parse_rib([f"{p[0]}\t10.0.0.0/8\t{' '.join(map(str, p))}" for p in paths])
    return infer_relationships(extract_topology(corpus), corpus, **kw)


def test_star_leaves_are_customers_of_hub():
    topo = _infer([(1, 10, 2), (2, 10, 3), (3, 10, 1)])
    for leaf in (1, 2, 3):
        assert topo.rel(leaf, 10) is Rel.PROVIDER
        assert topo.rel(10, leaf) is Rel.CUSTOMER


def test_both_way_votes_within_threshold_make_siblings():
    # each path's top AS sits on a different side of edge 1-2
    topo = _infer([(5, 1, 2), (6, 2, 1)], sibling_threshold=1)
    assert topo.rel(1, 2) is Rel.SIBLING


def test_lopsided_votes_pick_majority():
    topo = _infer([(5, 1, 2), (6, 2, 1), (7, 1, 2), (8, 1, 2)], sibling_threshold=1)
    assert topo.rel(1, 2) is not Rel.SIBLING


def test_rel_is_antisymmetric():
    t = Topology([1, 2, 3, 4], [(1, 2, Rel.CUSTOMER), (2, 3, Rel.PEER), (3, 4, Rel.SIBLING)])
    assert t.rel(1, 2) is Rel.CUSTOMER and t.rel(2, 1) is Rel.PROVIDER
    assert t.rel(2, 3) is t.rel(3, 2) is Rel.PEER
    assert t.rel(3, 4) is t.rel(4, 3) is Rel.SIBLING
    with pytest.raises(UnknownEdgeError) as exc:
        t.rel(1, 4)
    assert "AS1" in str(exc.value) and "AS4" in str(exc.value)


def _chain():
    # 1 < 2 < 3 (customer to provider), 3 peers 4, 4 peers 5, 4 provides 6
    return Topology(range(1, 7), [(1, 2, Rel.PROVIDER), (2, 3, Rel.PROVIDER), (3, 4, Rel.PEER),
                                  (4, 5, Rel.PEER), (4, 6, Rel.CUSTOMER)])


def test_valley_free_examples():
    t = _chain()
    assert is_valley_free([1, 2, 3], t)
    assert is_valley_free([1, 2, 3, 4, 6], t)
    assert not is_valley_free([3, 4, 5], t)        # two peer steps
    assert not is_valley_free([3, 2, 1, 2], t)     # down then up
    assert is_valley_free([6, 4, 3], t)            # up then peer
    assert not is_valley_free([2, 3, 4, 5], t)
    assert not is_valley_free([2, 1, 2], t)


def test_siblings_are_transparent():
    t = Topology(range(1, 5), [(1, 2, Rel.PROVIDER), (2, 3, Rel.SIBLING), (3, 4, Rel.CUSTOMER)])
    assert is_valley_free([1, 2, 3, 4], t)
    assert is_valley_free([4, 3, 2, 1], t)


def test_export_rules():
    assert not may_export(Rel.PROVIDER, Rel.PROVIDER)
    assert may_export(Rel.CUSTOMER, Rel.PEER)
    for via in (None, Rel.CUSTOMER, Rel.PROVIDER, Rel.PEER, Rel.SIBLING):
        assert may_export(via, Rel.CUSTOMER)
    assert not may_export(Rel.PEER, Rel.PEER)
    assert may_export(None, Rel.PROVIDER)


def test_relationship_file_roundtrip(tmp_path):
    t = _chain()
    path = tmp_path / "rel.csv"
    write_relationships(t, path)
    back = topology_from_relationships(parse_relationships(path.read_text().splitlines()))
    assert list(back.edges()) == list(t.edges())


def test_relationship_labels_caida_style():
    rows = parse_relationships(["1|2|-1", "2|3|0"])
    assert rows == [(1, 2, Rel.CUSTOMER), (2, 3, Rel.PEER)]
    with pytest.raises(ParseError):
        parse_relationships(["1,2,boss"])


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.integers(1, 7), st.integers(1, 7), st.sampled_from(list(Rel))), max_size=14),
       st.lists(st.integers(1, 7), min_size=1, max_size=6))
def test_valley_free_agrees_with_pattern_scan(edges, walk):
    edges = [(a, b, r) for a, b, r in edges if a != b]
    t = Topology(range(1, 8), edges)
    if not all(t.has_edge(a, b) for a, b in zip(walk, walk[1:])):
        return
    assert is_valley_free(walk, t) == valley_free(walk, _labels(t))


def test_write_relationships_header(tmp_path):
    write_relationships(Topology([1, 2], [(1, 2, Rel.CUSTOMER)]), tmp_path / "r.csv")
    assert (tmp_path / "r.csv").read_text().splitlines() == ["asn1,asn2,label", "1,2,p2c"]
