import io
from collections import Counter

import pytest
from hypothesis import given, strategies as st

from cpa.geodb import GeoDb
from cpa.net import Traceroute, parse_ip, parse_prefix
from cpa.trace import (AnnotatedTrace, IngressModel, Skipped, annotate, build_model, explain_country_path,
                       path_agreement, predict_country_path, read_model, split_traces, write_model)

DST = parse_prefix("30.0.0.0/24")
ip = parse_ip


@pytest.fixture
def triple(load):
    fx = load("triple.fix")
    db = fx.geodb()
    return fx, db, build_model([annotate(t, db) for t in fx.traces])


def test_triple_annotation(triple):
    fx, db, _ = triple
    a = annotate(fx.traces[0], db)
    assert len(a.hops) == 7
    assert a.as_path == (1, 2, 3)
    assert [a.ingress(i) for i in range(3)] == [ip("10.0.0.1"), ip("20.0.0.3"), ip("30.0.1.6")]
    assert a.country_path == ("US", "DE", "JP")


def test_triple_known_single_lookahead(triple):
    _, _, model = triple
    best = model.best()
    assert best["known_s"][(2, 3, ip("20.0.0.3"))] == (ip("30.0.1.6"), ("US", "DE"))
    assert best["known_d"][(1, 2, 3, ip("10.0.0.1"))] == (ip("20.0.0.3"), ("US",))


def test_memorised_trace(triple):
    _, db, model = triple
    pred = explain_country_path((1, 2, 3), ip("10.0.0.1"), DST, model, db)
    assert pred.path == ("US", "DE", "JP")
    assert pred.steps == ("known_d", "known_s")
    assert not pred.low_confidence


def test_unseen_entry_uses_pair_frequency(triple):
    _, db, model = triple
    # entering AS2 at an address never seen in training
    pred = explain_country_path((2, 3), ip("99.0.0.1"), DST, model, db, src_country="FR")
    assert pred.path == ("FR", "US", "DE", "JP")
    assert pred.steps == ("freq_d",)


def test_unseen_source_uses_country_context(triple):
    _, db, model = triple
    pred = explain_country_path((1, 2, 3), ip("10.0.0.99"), DST, model, db)
    assert pred.steps == ("freq_dc", "known_s")
    assert pred.path == ("US", "DE", "JP")


def test_next_as_only_fallback(triple):
    _, db, model = triple
    # AS7 -> AS2 never observed; AS2's usual ingress is 20.0.0.3 (US)
    pred = explain_country_path((7, 2, 3), ip("10.0.0.1"), DST, model, db)
    assert pred.steps == ("freq_sc", "known_s")
    assert pred.path == ("US", "DE", "JP")
    assert pred.low_confidence


def test_total_miss_bridges_with_registry_country(triple):
    _, db, model = triple
    pred = explain_country_path((3, 1), ip("30.0.0.9"), parse_prefix("10.0.0.0/24"), model, db)
    assert pred.steps == ("miss",)
    assert pred.path == ("JP", "US")


def test_empty_model():
    db = GeoDb()
    db.add(parse_prefix("10.0.0.0/8"), "US", 1)
    db.add(parse_prefix("30.0.0.0/8"), "JP", 3)
    out = predict_country_path((1, 2, 3), ip("10.0.0.1"), parse_prefix("30.0.0.0/8"), IngressModel(), db)
    assert out == ("US", "JP")


def test_single_as_trace():
    db = GeoDb()
    db.add(parse_prefix("10.0.0.0/8"), "US", 1)
    a = annotate(Traceroute(ip("10.0.0.1"), ip("10.9.0.1"), (ip("10.1.0.1"), ip("10.2.0.1"))), db)
    assert len(a.segments) == 1 and a.country_path == ("US",)


def test_silent_hop_marks_transition_unusable(load):
    fx = load("triple.fix")
    t = fx.traces[0]
    hops = list(t.hops)
    hops[3] = None                      # 20.0.0.4, inside AS2
    a = annotate(Traceroute(t.src, t.dst, tuple(hops)), fx.geodb())
    assert [tr.usable for tr in a.transitions] == [True, False]
    m = IngressModel()
    assert m.add(a) == 1
    assert (1, 2) in m.freq_d and (2, 3) not in m.freq_d


def test_unresolvable_endpoints_skipped():
    db = GeoDb()
    db.add(parse_prefix("10.0.0.0/8"), "US", 1)
    assert isinstance(annotate(Traceroute(ip("10.0.0.1"), ip("99.0.0.1"), ()), db), Skipped)
    assert isinstance(annotate(Traceroute(ip("99.0.0.1"), ip("10.0.0.1"), ()), db), Skipped)


def test_majority_and_tie_break():
    m = IngressModel()
    m.freq_d[(1, 2)] = Counter({(ip("9.0.0.2"), ("US",)): 3, (ip("9.0.0.1"), ("US",)): 1})
    m.freq_d[(3, 4)] = Counter({(ip("9.0.0.2"), ("US",)): 1, (ip("9.0.0.1"), ("DE",)): 1})
    best = m.best()["freq_d"]
    assert best[(1, 2)][0] == ip("9.0.0.2")
    assert best[(3, 4)][0] == ip("9.0.0.1")


def test_agreement_values():
    assert path_agreement(["US", "GB"], ["US", "GB"]) == 1.0
    assert path_agreement(["US", "GB", "DE"], ["US", "GB"]) == 2 / 3
    assert path_agreement(["US"], ["DE"]) == 0.0
    assert path_agreement([], []) == 1.0


@given(st.lists(st.sampled_from("ABCDEFG"), max_size=6), st.lists(st.sampled_from("ABCDEFG"), max_size=6))
def test_agreement_bounds_and_symmetry(a, b):
    x = path_agreement(a, b)
    assert 0.0 <= x <= 1.0
    assert x == path_agreement(b, a)
    assert (x == 1.0) == (set(a) == set(b))


def test_model_snapshot_roundtrip(triple):
    _, db, model = triple
    model.geo = db
    buf = io.StringIO()
    write_model(model, buf)
    back = read_model(buf.getvalue().splitlines(True))
    for name in ("known_d", "known_s", "freq_dc", "freq_d", "freq_sc", "freq_s"):
        assert back.table(name) == model.table(name)
    assert back.ip_country == model.ip_country
    assert predict_country_path((1, 2, 3), ip("10.0.0.1"), DST, back, back.geo) == ("US", "DE", "JP")


def test_split_traces_by_source():
    traces = [Traceroute(s, 9, ()) for s in (1, 1, 2, 3, 3, 3)]
    train, test = split_traces(traces, 0.5, 0)
    assert {t.src for t in train}.isdisjoint({t.src for t in test})
    assert len(train) + len(test) == 6


def test_annotated_type(triple):
    fx, db, _ = triple
    assert isinstance(annotate(fx.traces[0], db), AnnotatedTrace)
