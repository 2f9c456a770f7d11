import io
import math
import random
from fractions import Fraction

import networkx as nx
import pytest
from hypothesis import given, settings, strategies as st

from cpa.centrality import (CC, SCC, CentralityAccumulator, CentralityError, CentralityReport, CountryPrefixTable,
                            ExactSum, PathAssignment, betweenness, country_centrality, rank_report,
                            read_assignments, strong_country_centrality, write_assignments)
from cpa.net import parse_prefix
from cpa.oracle import oracle_centrality

PA, PB, PC = (parse_prefix(p) for p in ("10.0.0.0/16", "20.0.0.0/16", "30.0.0.0/16"))
LINE_TABLE = CountryPrefixTable({PA: "A", PB: "B", PC: "C"})


def _line_assignments():
    order = "ABC"
    out = []
    for s, ps in ((PA, "A"), (PB, "B"), (PC, "C")):
        for t, pt in ((PA, "A"), (PB, "B"), (PC, "C")):
            if ps == pt:
                continue
            i, j = order.index(ps), order.index(pt)
            step = 1 if j > i else -1
            out.append(PathAssignment(s, t, tuple(order[k] for k in range(i, j + step, step))))
    return out


def test_line_middle_is_fully_central():
    rep = country_centrality(_line_assignments(), LINE_TABLE)
    n = rep.normalized()
    assert n["B"] == 1.0
    assert n["A"] == 0.0 and n["C"] == 0.0
    assert rep.get("B").rank == 1


def test_prefix_weights():
    t = CountryPrefixTable({parse_prefix("12.0.0.0/8"): "S", parse_prefix("13.0.0.0/16"): "S"})
    assert t.weight(parse_prefix("12.0.0.0/8")) == 2 ** 24 / (2 ** 24 + 2 ** 16)
    assert Fraction(t.weight(parse_prefix("12.0.0.0/8"))).limit_denominator(1000) == Fraction(256, 257)


def test_avoidable_transit_not_strong():
    a = PathAssignment(PA, PC, ("A", "B", "C"), (("A", "B", "C"), ("A", "D", "C")))
    t = CountryPrefixTable({PA: "A", PC: "C"})
    scc = strong_country_centrality([a], t).normalized()
    cc = country_centrality([a], t).normalized()
    assert scc.get("B", 0.0) == 0.0 and scc.get("D", 0.0) == 0.0
    assert cc["B"] == 1.0


def test_unavoidable_transit_is_strong():
    a = PathAssignment(PA, PC, ("A", "B", "C"))
    t = CountryPrefixTable({PA: "A", PC: "C"})
    assert strong_country_centrality([a], t).normalized()["B"] == 1.0


def test_missing_prefix_named():
    with pytest.raises(CentralityError) as exc:
        country_centrality([PathAssignment(PA, parse_prefix("99.0.0.0/8"), ("A", "Z"))], LINE_TABLE)
    assert "99.0.0.0/8" in str(exc.value)


def test_endpoints_get_no_credit():
    acc = CentralityAccumulator()
    acc.add_weighted("A", "C", 1.0, ("A", "B", "C"), [("A", "B", "C")])
    rep = acc.report(CC)
    assert rep.get("A").raw == 0.0 and rep.get("C").raw == 0.0
    assert acc.denominator("A") == 0.0 and acc.denominator("B") == 1.0


def test_domestic_pairs_ignored():
    acc = CentralityAccumulator()
    acc.add_weighted("A", "A", 1.0, ("A", "B", "A"))
    assert acc.pairs == 0


def test_all_zero_report_ranks_by_code():
    acc = CentralityAccumulator()
    acc.add_weighted("B", "A", 1.0, ("B", "A"))
    rep = acc.report(CC)
    assert [s.country for s in rank_report(rep)] == ["A", "B"]
    assert [s.rank for s in rep.scores] == [1, 2]


def test_report_formats_roundtrip():
    rep = country_centrality(_line_assignments(), LINE_TABLE, "assignments")
    back = CentralityReport.from_csv(io.StringIO(rep.to_csv()))
    assert back.normalized() == rep.normalized()
    lines = rep.to_jsonl().splitlines()
    assert '"metadata"' in lines[0] and len(lines) == 4


def test_assignment_file_roundtrip():
    items = _line_assignments() + [PathAssignment(PA, PC, ("A", "B", "C"), (("A", "B", "C"), ("A", "D", "C")))]
    buf = io.StringIO()
    write_assignments(items, buf)
    assert list(read_assignments(buf.getvalue().splitlines())) == items


def test_prefix_table_conflict():
    with pytest.raises(ValueError):
        CountryPrefixTable.from_pairs([(PA, "A"), (PA, "B")])


def test_line_betweenness():
    assert betweenness({"a": ["b"], "b": ["c"]}) == {"a": 0.0, "b": 1.0, "c": 0.0}


def test_split_credit_on_equal_paths():
    b = betweenness({"s": ["x", "y"], "x": ["t"], "y": ["t"]})
    assert b["x"] == b["y"] == 0.5


def _clusters(k=5, n=3):
    g = {"mid": []}
    for c in range(n):
        hub = f"h{c}"
        g["mid"].append(hub)
        g[hub] = [f"l{c}_{i}" for i in range(k)]
    return g


def test_cluster_bridge_beats_hubs():
    g = _clusters()
    b = betweenness(g)
    G = nx.Graph([(u, v) for u, vs in g.items() for v in vs])
    ref = nx.betweenness_centrality(G, normalized=False)
    assert all(math.isclose(b[v], ref[v]) for v in G)
    assert b["mid"] == 108.0 and b["h0"] == 75.0
    assert G.degree("mid") < G.degree("h0")
    assert max(b, key=b.get) == "mid"


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_betweenness_matches_networkx(seed):
    G = nx.gnm_random_graph(12, 20, seed=seed)
    b = betweenness({v: list(G[v]) for v in G})
    ref = nx.betweenness_centrality(G, normalized=False)
    assert all(math.isclose(b[v], ref[v], abs_tol=1e-9) for v in G)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-1e12, 1e12, allow_nan=False), max_size=40), st.randoms())
def test_exact_sum_order_independent(xs, rnd):
    a = ExactSum(xs)
    ys = list(xs)
    rnd.shuffle(ys)
    half = len(ys) // 2
    b, c = ExactSum(ys[:half]), ExactSum(ys[half:])
    b.merge(c)
    assert a.value() == b.value() == math.fsum(xs)


def _random_case(seed):
    rng = random.Random(seed)
    countries = "ABCDEF"[:rng.randint(3, 6)]
    prefixes = {parse_prefix(f"{10 + i}.0.0.0/{rng.choice((8, 12, 16))}"): rng.choice(countries)
                for i in range(rng.randint(3, 12))}
    pairs = []
    for s in prefixes:
        for t in prefixes:
            if prefixes[s] == prefixes[t] or rng.random() < 0.2:
                continue
            mid = rng.sample(countries, rng.randint(0, 3))
            best = tuple(dict.fromkeys((prefixes[s], *mid, prefixes[t])))
            alts = [best] + [tuple(dict.fromkeys((prefixes[s], *rng.sample(countries, 2), prefixes[t])))
                             for _ in range(rng.randint(0, 2))]
            pairs.append((s, t, best, alts))
    return prefixes, pairs


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_accumulator_matches_exhaustive_sum(seed):
    prefixes, pairs = _random_case(seed)
    table = CountryPrefixTable(prefixes)
    acc = CentralityAccumulator()
    for s, t, best, alts in reversed(pairs):
        acc.add(PathAssignment(s, t, best, tuple(alts)), table)
    ref = oracle_centrality(pairs, prefixes)
    cc, scc = acc.report(CC).normalized(), acc.report(SCC).normalized()
    for c, (x, y) in ref.items():
        assert abs(cc.get(c, 0.0) - x) <= 1e-12
        assert abs(scc.get(c, 0.0) - y) <= 1e-12
        assert 0.0 <= scc.get(c, 0.0) <= cc.get(c, 0.0) <= 1.0


def test_accumulator_json_roundtrip():
    acc = CentralityAccumulator()
    for a in _line_assignments():
        acc.add(a, LINE_TABLE)
    back = CentralityAccumulator.from_json(acc.to_json())
    assert back.report(CC).to_csv() == acc.report(CC).to_csv()
