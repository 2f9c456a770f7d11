import io
import random

import pytest
from hypothesis import given, settings, strategies as st

from cpa.asrel import Rel, Topology
from cpa.net import parse_prefix
from cpa.oracle import async_rib, oracle_best, oracle_paths, oracle_rib
from cpa.propagate import (PropagationError, alternate_paths, best_path, compare_paths, known_suffixes, prime,
                           propagate, rank_path, read_snapshot, write_snapshot)
from cpa.rib import RibCorpus, RibRoute, parse_rib
from cpa.synth import SynthSpec, generate

P = parse_prefix("40.0.0.0/16")


def _corpus(*paths, prefix=P):
    return RibCorpus([RibRoute(p[0], prefix, tuple(p)) for p in paths])


def test_fewer_unknown_hops_beats_shorter():
    known = known_suffixes([(1, 2, 3, 4)])
    p1, p2 = (1, 2, 3, 4), (9, 4)
    assert rank_path(p1, known).ulen == 0 and rank_path(p2, known).ulen == 1
    assert compare_paths(p1, p2, known) < 0


def test_equal_ulen_shorter_wins():
    known = known_suffixes([(2, 3), (5, 4, 3)])
    assert compare_paths((1, 2, 3), (1, 5, 4, 3), known) < 0


def test_lexicographic_tiebreak():
    assert compare_paths((1, 2, 3), (1, 2, 4), {}) < 0
    assert compare_paths((1, 2, 4), (1, 2, 3), {}) > 0
    assert compare_paths((1, 2, 3), (1, 2, 3), {}) == 0


def test_more_frequent_known_suffix_wins():
    known = known_suffixes([(7, 2, 3), (8, 2, 3), (6, 5, 3)])
    assert compare_paths((1, 2, 3), (1, 5, 3), known) < 0


def test_priming_seeds_suffixes():
    rib = prime(_corpus((1, 2, 3)), P)
    assert rib.seeds[P] == {1: {(1, 2, 3)}, 2: {(2, 3)}, 3: {(3,)}}


def test_shared_suffix_counted_twice():
    rib = prime(_corpus((1, 2, 3), (4, 2, 3)), P)
    assert rib.known[P][(2, 3)] == 2 and rib.known[P][(3,)] == 2
    assert rib.known[P][(1, 2, 3)] == 1


def test_no_route_is_an_error():
    with pytest.raises(KeyError):
        prime(_corpus((1, 2, 3)), parse_prefix("9.0.0.0/8"))


def _line():
    # 1 customer of 2, 2 customer of 3
    return Topology([1, 2, 3], [(1, 2, Rel.PROVIDER), (2, 3, Rel.PROVIDER)])


def test_line_topology():
    rib = propagate(_line(), prime(_corpus((3,)), P), P)
    assert best_path(rib, 1, P) == (1, 2, 3)
    assert alternate_paths(rib, 1, P) == [(1, 2, 3)]


def test_diamond_keeps_both(load):
    fx = load("diamond.fix")
    topo = fx.topology()
    rib = propagate(topo, prime(fx.corpus(), P), P)
    alts = alternate_paths(rib, 1, P)
    assert set(alts) == oracle_paths(topo, 4)[1] == {(1, 2, 4), (1, 3, 4)}
    assert best_path(rib, 1, P) == (1, 2, 4)


def test_unreachable_across_two_peers():
    topo = Topology([1, 2, 3], [(1, 2, Rel.PEER), (2, 3, Rel.PEER)])
    rib = propagate(topo, prime(_corpus((3,)), P), P)
    assert best_path(rib, 2, P) == (2, 3)
    assert best_path(rib, 1, P) is None
    assert alternate_paths(rib, 1, P) == []


def test_invalid_seeds_are_dropped():
    # 1 up to 2, 2 down to 3, 3 up to 4: a valley
    topo = Topology([1, 2, 3, 4], [(1, 2, Rel.PROVIDER), (3, 2, Rel.PROVIDER), (3, 4, Rel.PROVIDER)])
    rib = propagate(topo, prime(_corpus((1, 2, 3, 4)), P), P)
    assert rib.stats[P].dropped_seeds == 2      # (1,2,3,4) and (2,3,4)
    assert alternate_paths(rib, 1, P) == []
    assert best_path(rib, 3, P) == (3, 4)


def test_announce_filter_only_on_origin(load):
    fx = load("multipaths.fix")
    p = parse_prefix("20.1.0.0/16")
    rib = propagate(fx.topology(), prime(fx.corpus(), p), p, announce=fx.announce(p))
    assert (5, 2) not in alternate_paths(rib, 5, p)
    assert best_path(rib, 5, p) == (5, 4, 3, 2)


def test_pop_budget_is_enforced():
    spec = SynthSpec(n_ases=30, n_traces=0, seed=4)
    fx = generate(spec)
    p = sorted(fx.prefixes)[0]
    with pytest.raises(PropagationError) as exc:
        propagate(fx.topology(), prime(fx.corpus(), p), p, pop_factor=0)
    assert str(p) in str(exc.value)


def test_alternates_truncated():
    fx = generate(SynthSpec(n_ases=25, peer_prob=0.4, n_traces=0, seed=2))
    p = sorted(fx.prefixes)[0]
    rib = propagate(fx.topology(), prime(fx.corpus(), p), p, max_alternates=1)
    assert all(len(v) == 1 for v in rib.tables[p].values())


def test_snapshot_roundtrip(load):
    fx = load("diamond.fix")
    rib = propagate(fx.topology(), prime(fx.corpus(), P), P)
    buf = io.StringIO()
    write_snapshot(rib, buf)
    back = read_snapshot(buf.getvalue().splitlines())
    assert back.tables == rib.tables


def _rib_sets(rib, p):
    return {v: set(paths) for v, paths in rib.tables[p].items()}


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_matches_async_simulation_in_any_order(seed):
    fx = generate(SynthSpec(n_ases=7, peer_prob=0.25, sibling_prob=0.1, observer_fraction=0.3,
                            n_traces=0, seed=seed))
    topo = fx.topology()
    rng = random.Random(seed)
    for p in sorted(fx.prefixes):
        routes = fx.corpus().by_prefix.get(p)
        if not routes:
            continue
        training = [r.path for r in routes]
        rib = propagate(topo, prime(fx.corpus(), p), p, max_alternates=100)
        assert _rib_sets(rib, p) == async_rib(topo, training, rng=rng)
        best = oracle_best(oracle_rib(topo, training), training)
        assert {v: ps[0] for v, ps in rib.tables[p].items()} == best


def test_parse_through_to_propagation():
    corpus = parse_rib(["3\t40.0.0.0/16\t3", "1\t40.0.0.0/16\t1 2 3"])
    rib = propagate(_line(), prime(corpus, P), P)
    assert best_path(rib, 2, P) == (2, 3)
