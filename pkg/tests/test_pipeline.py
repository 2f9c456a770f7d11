import json

import pytest

from cpa import pipeline as pl
from cpa.synth import SynthSpec, generate


def _config(fx, d, **kw):
    paths = fx.write_inputs(d)
    base = dict(rib=str(paths["rib"]), traces=str(paths["traces"]), registry=str(paths["registry"]),
                prefix_table=str(paths["prefix_table"]), output_dir=str(d / "out"))
    base.update(kw)
    return pl.PipelineConfig(**base)


def test_config_file_resolves_relative_paths(tmp_path):
    fx = generate(SynthSpec(n_ases=6, seed=1))
    fx.write_inputs(tmp_path)
    (tmp_path / "c.toml").write_text('rib = "rib.tsv"\nregistry = "registry.csv"\nworkers = 3\nseed = 5\n')
    cfg = pl.load_config(tmp_path / "c.toml")
    assert cfg.rib == str(tmp_path / "rib.tsv") and cfg.workers == 3 and cfg.seed == 5
    cfg.validate()


def test_config_errors(tmp_path):
    (tmp_path / "bad.toml").write_text('rib = "x"\ncolour = "blue"\n')
    with pytest.raises(pl.ConfigError, match="colour"):
        pl.load_config(tmp_path / "bad.toml")
    with pytest.raises(pl.ConfigError, match="rib"):
        pl.PipelineConfig(registry=None).validate()
    with pytest.raises(pl.ConfigError, match="no such file"):
        pl.PipelineConfig(rib=str(tmp_path / "missing"), registry=str(tmp_path / "bad.toml")).validate()
    with pytest.raises(pl.ConfigError, match="mode"):
        pl.PipelineConfig(mode="turbo").validate(need=())


def test_echo_excludes_runtime_knobs():
    echo = pl.PipelineConfig(workers=8, output_dir="x").echo()
    assert "workers" not in echo and "output_dir" not in echo and "seed" in echo


def test_observed_cc_on_hand_fixture(load, tmp_path):
    cfg = _config(load("observed.fix"), tmp_path)
    tr, bgp = pl.run_observed_cc(cfg)
    # only US<->DE pairs have a third country; both cross GB
    assert tr.normalized() == {"GB": 1.0, "US": 0.0, "DE": 0.0}
    assert tr.metadata["pairs"] == 3
    assert bgp.normalized()["GB"] == 1.0


def test_observed_cc_needs_complete_traces(load, tmp_path):
    fx = load("observed.fix")
    fx.traces = [t.__class__(t.src, t.dst, (t.hops[0], None) + t.hops[2:]) for t in fx.traces]
    with pytest.raises(ValueError, match="complete"):
        pl.run_observed_cc(_config(fx, tmp_path))


def test_loglog_fit_identity_and_skip():
    vals = {"A": 0.5, "B": 0.1, "C": 0.01, "D": 0.3}
    fit = pl.loglog_fit(vals, vals)
    assert fit.slope == pytest.approx(1.0) and fit.r2 == pytest.approx(1.0)
    assert pl.loglog_fit({"A": 0.1, "B": 0.2}, {"A": 0.1, "B": 0.2}) is None
    assert pl.loglog_fit({"A": 0.1, "B": 0.2, "C": 0.0}, {"A": 0.1, "B": 0.2, "C": 0.3}) is None


def test_validation_counts_and_outputs(tmp_path):
    fx = generate(SynthSpec(n_ases=30, n_countries=5, n_traces=600, n_vantage=30, observer_fraction=0.5, seed=2))
    res = pl.run_validation(_config(fx, tmp_path, mode="validate-inference"))
    c = res.counts
    assert c["evaluated"] > 0
    assert 0.0 <= c["as_exact_rate"] <= c["as_in_table_rate"] <= 1.0
    assert 0.0 <= c["country_exact_rate"] <= 1.0
    assert res.to_csv().startswith("country,actual_cc,inferred_cc\n")
    assert json.dumps(res.summary())


def test_cache_hits_give_identical_results(tmp_path):
    fx = generate(SynthSpec(n_ases=12, n_traces=80, seed=3))
    cfg = _config(fx, tmp_path, shard_size=4)
    cold = pl.run_full_mesh(cfg)
    root = tmp_path / "out" / "cache"
    before = sorted(p.relative_to(root) for p in root.rglob("*") if p.is_file())
    assert {p.parts[0] for p in before} == {"relationships", "model"}
    warm = pl.run_full_mesh(cfg.replace(output_dir=str(tmp_path / "out2"), cache_dir=str(root)))
    assert sorted(p.relative_to(root) for p in root.rglob("*") if p.is_file()) == before
    assert warm.cc.to_csv() == cold.cc.to_csv() and warm.scc.to_csv() == cold.scc.to_csv()


def test_cache_key_changes_with_inputs(tmp_path):
    cache = pl.StageCache(tmp_path)
    built = []

    def build(v):
        built.append(v)
        return v

    dump = lambda obj, fh: fh.write(obj)
    load = lambda fh: fh.read()
    assert cache.get_or_build("s", {"k": 1}, lambda: build("a"), dump, load) == "a"
    assert cache.get_or_build("s", {"k": 1}, lambda: build("b"), dump, load) == "a"
    assert cache.get_or_build("s", {"k": 2}, lambda: build("c"), dump, load) == "c"
    assert built == ["a", "c"] and cache.hits["s"] == 1


def test_resume_after_interrupt(tmp_path):
    fx = generate(SynthSpec(n_ases=12, n_traces=60, seed=5))
    cfg = _config(fx, tmp_path, shard_size=3)
    with pytest.raises(RuntimeError, match="pending"):
        pl.run_full_mesh(cfg, stop_after=2)
    resumed = pl.run_full_mesh(cfg)
    assert resumed.resumed == 2 and resumed.shards > 2
    fresh = pl.run_full_mesh(cfg.replace(output_dir=str(tmp_path / "fresh")))
    assert fresh.resumed == 0
    assert resumed.cc.to_jsonl() == fresh.cc.to_jsonl()
    assert resumed.scc.to_jsonl() == fresh.scc.to_jsonl()


def test_report_metadata_records_inputs(tmp_path):
    fx = generate(SynthSpec(n_ases=8, n_traces=30, seed=6))
    res = pl.run_full_mesh(_config(fx, tmp_path))
    meta = res.cc.metadata
    assert set(meta["inputs"]) >= {"rib", "registry", "traces", "prefix_table"}
    assert meta["config"]["seed"] == 0 and "workers" not in meta["config"]
    files = pl.write_reports(tmp_path / "r", cc=res.cc)
    assert sorted(p.name for p in files) == ["cc.csv", "cc.jsonl"]


def test_source_groups_sum_weights(tmp_path):
    fx = generate(SynthSpec(n_ases=10, prefixes_per_as=(2, 3), n_traces=0, seed=4))
    groups = pl.source_groups(fx.table(), fx.corpus(), fx.geodb())
    total = {}
    for g in groups:
        total[g.country] = total.get(g.country, 0.0) + g.weight
    assert all(v == pytest.approx(1.0) for v in total.values())


def test_bench_model_size():
    model, walks, _ = pl.synthetic_model(2000, seed=1, n_ases=200)
    assert len(model) >= 2000 and walks
    out = pl.bench_predict(2000, 500, seed=1)
    assert out["entries"] >= 2000 and out["queries"] == 500 and out["per_second"] > 0
