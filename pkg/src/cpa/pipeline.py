"""Experiment drivers: observed-path centrality, inference validation and the
all-pairs ("full mesh") run, plus config loading and a content-addressed
artifact cache shared between stages.
"""
from __future__ import annotations

import dataclasses
import gc
import hashlib
import io
import json
import logging
import math
import os
import random
import time
from collections import Counter, defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np

from .asrel import infer_relationships, parse_relationships, relationship_label, topology_from_relationships
from .centrality import CC, SCC, CentralityAccumulator, CentralityReport, CountryPrefixTable
from .geodb import FileLookupClient, GeoDb, build_geodb
from .net import CountryPath, ParseError, Prefix, read_traceroutes
from .propagate import PropagationError, alternate_paths, best_path, prime, propagate
from .rib import RibCorpus, extract_topology, read_rib, split_train_test
from .trace import (AnnotatedTrace, IngressModel, annotate_all, build_model, path_agreement,
                    predict_country_path, read_model, split_traces, write_model)

try:
    import tomllib
except ModuleNotFoundError:     # python < 3.11
    import tomli as tomllib

log = logging.getLogger("cpa.pipeline")

MODES = ("observed-cc", "validate-inference", "full-mesh")
_PATH_FIELDS = ("rib", "traces", "registry", "overrides", "relationships", "whois", "prefix_table")
# not echoed into report metadata: they must not change report bytes
_RUNTIME_FIELDS = ("workers", "output_dir", "cache_dir")


class ConfigError(ValueError):
    pass


@dataclass
class PipelineConfig:
    rib: Optional[str] = None
    traces: Optional[str] = None
    registry: Optional[str] = None
    overrides: Optional[str] = None
    relationships: Optional[str] = None     # skip inference, use these labels
    whois: Optional[str] = None             # ip|asn|country transcript for vague registry rows
    prefix_table: Optional[str] = None
    split_ratio: float = 0.5
    seed: int = 0
    workers: int = 1
    shard_size: int = 16
    pop_factor: int = 64                    # K
    max_alternates: int = 16                # M
    sibling_threshold: int = 1              # L
    peer_degree_ratio: float = 60.0         # R
    segment_noise: float = 0.0              # validation robustness runs only
    output_dir: str = "out"
    cache_dir: Optional[str] = None
    mode: str = "full-mesh"

    def validate(self, need=("rib", "registry")) -> "PipelineConfig":
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {', '.join(MODES)}; got {self.mode!r}")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.shard_size < 1:
            raise ConfigError("shard_size must be >= 1")
        if not 0 < self.split_ratio < 1:
            raise ConfigError("split_ratio must be in (0, 1)")
        for name in need:
            if getattr(self, name) is None:
                raise ConfigError(f"missing required input: {name}")
        for name in _PATH_FIELDS:
            value = getattr(self, name)
            if value is not None and not Path(value).is_file():
                raise ConfigError(f"{name}: no such file {value}")
        return self

    def replace(self, **changes) -> "PipelineConfig":
        return dataclasses.replace(self, **{k: v for k, v in changes.items() if v is not None})

    def echo(self) -> dict:
        return {k: v for k, v in sorted(dataclasses.asdict(self).items()) if k not in _RUNTIME_FIELDS}


def load_config(path) -> PipelineConfig:
    """Flat TOML key/value file; relative input paths resolve against the file's directory."""
    path = Path(path)
    try:
        data = tomllib.loads(path.read_text())
    except (OSError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    known = {f.name for f in dataclasses.fields(PipelineConfig)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    for name in _PATH_FIELDS + ("output_dir", "cache_dir"):
        if isinstance(data.get(name), str) and not os.path.isabs(data[name]):
            data[name] = str(path.parent / data[name])
    return PipelineConfig(**data)


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def text_digest(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()


def input_digests(config: PipelineConfig) -> Dict[str, str]:
    return {name: file_digest(getattr(config, name)) for name in _PATH_FIELDS
            if getattr(config, name) is not None}


def run_fingerprint(config: PipelineConfig) -> str:
    blob = json.dumps({"config": config.echo(), "inputs": input_digests(config)}, sort_keys=True)
    return text_digest(blob)


class StageCache:
    """Artifacts stored under ``<root>/<stage>/<sha256 of key>``; a hit needs an identical key."""

    def __init__(self, root):
        self.root = Path(root) if root is not None else None
        self.hits = Counter()
        self.misses = Counter()

    def _path(self, stage: str, key: dict) -> Path:
        return self.root / stage / text_digest(json.dumps(key, sort_keys=True))

    def get_or_build(self, stage: str, key: dict, build, dump, load):
        if self.root is None:
            return build()
        path = self._path(stage, key)
        if path.exists():
            self.hits[stage] += 1
            with open(path) as fh:
                return load(fh)
        self.misses[stage] += 1
        obj = build()
        path.parent.mkdir(parents=True, exist_ok=True)
        buf = io.StringIO()
        dump(obj, buf)
        tmp = path.with_suffix(".tmp")
        tmp.write_text(buf.getvalue())
        os.replace(tmp, path)
        # hand back what a later hit would see
        return load(io.StringIO(buf.getvalue()))


def _cache(config: PipelineConfig) -> StageCache:
    root = config.cache_dir if config.cache_dir is not None else Path(config.output_dir) / "cache"
    return StageCache(root)


# --- shared stages ----------------------------------------------------------

@dataclass
class Inputs:
    corpus: RibCorpus
    geodb: GeoDb
    client: Optional[FileLookupClient]
    traces: list
    trace_rejects: int = 0


def load_inputs(config: PipelineConfig) -> Inputs:
    corpus = read_rib(config.rib) if config.rib else RibCorpus()
    geodb = build_geodb(config.registry, config.overrides) if config.registry else GeoDb()
    client = FileLookupClient(config.whois) if config.whois else None
    traces, rejects = [], 0
    if config.traces:
        with open(config.traces) as fh:
            for _, t in read_traceroutes(fh):
                if isinstance(t, ParseError):
                    rejects += 1
                else:
                    traces.append(t)
    log.info("stage=ingest routes=%d rib_rejects=%d traces=%d trace_rejects=%d registry=%d",
             len(corpus.routes), len(corpus.rejects), len(traces), rejects, len(geodb.trie))
    return Inputs(corpus, geodb, client, traces, rejects)


def _corpus_digest(corpus: RibCorpus) -> str:
    lines = sorted(f"{r.observer}\t{r.prefix}\t{' '.join(map(str, r.path))}" for r in corpus.routes)
    return text_digest("\n".join(lines))


def _trace_digest(traces) -> str:
    return text_digest("\n".join(sorted(repr((t.src, t.dst, t.hops)) for t in traces)))


def build_topology(config: PipelineConfig, corpus: RibCorpus, cache: StageCache):
    if config.relationships:
        with open(config.relationships) as fh:
            return topology_from_relationships(parse_relationships(fh))
    key = {"corpus": _corpus_digest(corpus), "L": config.sibling_threshold, "R": config.peer_degree_ratio}

    def dump(topo, fh):
        fh.write("asn1,asn2,label\n")
        for a, b, rel in topo.edges():
            fh.write(f"{a},{b},{relationship_label(rel)}\n")

    return cache.get_or_build(
        "relationships", key,
        lambda: infer_relationships(extract_topology(corpus), corpus, sibling_threshold=config.sibling_threshold,
                                    peer_degree_ratio=config.peer_degree_ratio),
        dump, lambda fh: topology_from_relationships(parse_relationships(fh)))


def build_ingress_model(config: PipelineConfig, traces, geodb: GeoDb, client, cache: StageCache) -> IngressModel:
    key = {"traces": _trace_digest(traces),
           "registry": file_digest(config.registry) if config.registry else None,
           "overrides": file_digest(config.overrides) if config.overrides else None,
           "whois": file_digest(config.whois) if config.whois else None}
    return cache.get_or_build(
        "model", key,
        lambda: build_model(annotate_all(traces, geodb, client)[0]),
        write_model, read_model)


def prefix_table(config: PipelineConfig, corpus: RibCorpus, geodb: GeoDb) -> CountryPrefixTable:
    if config.prefix_table:
        with open(config.prefix_table) as fh:
            return CountryPrefixTable.read_csv(fh)
    pairs, missing = {}, 0
    for p in corpus.prefixes():
        cc = geodb.country_of_prefix(p)
        if cc is None:
            missing += 1
        else:
            pairs[p] = cc
    if missing:
        log.warning("stage=prefix-table prefixes_without_country=%d", missing)
    return CountryPrefixTable(pairs)


def _origin(p: Prefix, origins, geodb: GeoDb):
    if p in origins:
        return origins[p]
    hit = geodb.trie.covering(p)
    return hit[1].asn if hit else None


# --- observed paths ---------------------------------------------------------

def _majority_paths(observations) -> Dict[Tuple[Prefix, Prefix], CountryPath]:
    out = {}
    for pair, paths in observations.items():
        c = Counter(paths)
        out[pair] = min(c, key=lambda p: (-c[p], p))
    return out


def _cc_from_pairs(pairs: Dict[Tuple[Prefix, Prefix], CountryPath], table, source, meta):
    acc = CentralityAccumulator()
    for (s, t), path in sorted(pairs.items()):
        acc.add_weighted(table.country(s), table.country(t), table.weight(s) * table.weight(t), path, (path,))
    return acc.report(CC, source, meta)


def run_observed_cc(config: PipelineConfig) -> Tuple[CentralityReport, CentralityReport]:
    """CC straight from measured paths: traceroutes, and RIB AS paths mapped to countries."""
    config.validate(need=("rib", "traces", "registry"))
    inp = load_inputs(config)
    table = prefix_table(config, inp.corpus, inp.geodb)
    meta = {"config": config.echo(), "inputs": input_digests(config)}

    annotated, stats = annotate_all(inp.traces, inp.geodb, inp.client)
    tr_obs = defaultdict(list)
    for t in annotated:
        if not isinstance(t, AnnotatedTrace) or not t.complete:
            continue
        s, d = table.match(t.src), table.match(t.dst)
        if s is not None and d is not None:
            tr_obs[(s, d)].append(t.country_path)
    if not tr_obs:
        raise ValueError("no complete traceroute maps onto the prefix table")

    cache = _cache(config)
    model = build_ingress_model(config, inp.traces, inp.geodb, inp.client, cache)
    origins = inp.corpus.origins()
    by_as = defaultdict(list)
    for p in table.prefixes():
        a = _origin(p, origins, inp.geodb)
        if a is not None:
            by_as[a].append(p)
    bgp_obs = defaultdict(list)
    for r in inp.corpus.routes:
        if r.prefix not in table:
            continue
        t_cc = table.country(r.prefix)
        for s in by_as.get(r.path[0], ()):
            path = predict_country_path(r.path, s.host(1), r.prefix, model, inp.geodb, inp.client,
                                        src_country=table.country(s), dst_country=t_cc)
            bgp_obs[(s, r.prefix)].append(path)
    if not bgp_obs:
        raise ValueError("no RIB route maps onto the prefix table")

    tr = _cc_from_pairs(_majority_paths(tr_obs), table, "observed-traceroute", meta)
    bgp = _cc_from_pairs(_majority_paths(bgp_obs), table, "observed-bgp", meta)
    log.info("stage=observed-cc tr_pairs=%d bgp_pairs=%d complete_traces=%d", len(tr_obs), len(bgp_obs),
             stats.complete)
    return tr, bgp


# --- validation ---------------------------------------------------------------

@dataclass
class LogFit:
    slope: float
    intercept: float
    r2: float
    n: int


def loglog_fit(actual: Dict[str, float], inferred: Dict[str, float]) -> Optional[LogFit]:
    """Least squares of log10(inferred) on log10(actual) over countries nonzero in both."""
    keys = sorted(c for c in set(actual) & set(inferred) if actual[c] > 0 and inferred[c] > 0)
    if len(keys) < 3:
        return None
    x = np.log10([actual[c] for c in keys])
    y = np.log10([inferred[c] for c in keys])
    if np.ptp(x) == 0:
        return None
    slope, intercept = np.polyfit(x, y, 1)
    pred = slope * x + intercept
    ss_res = float(np.sum((y - pred) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return LogFit(float(slope), float(intercept), r2, len(keys))


@dataclass
class ValidationResult:
    actual: CentralityReport
    inferred: CentralityReport
    fit: Optional[LogFit]
    notice: str = ""
    counts: Dict[str, float] = field(default_factory=dict)

    def rows(self):
        a, i = self.actual.normalized(), self.inferred.normalized()
        return [(c, a.get(c, 0.0), i.get(c, 0.0)) for c in sorted(set(a) | set(i))]

    def to_csv(self) -> str:
        lines = ["country,actual_cc,inferred_cc"]
        lines += [f"{c},{x!r},{y!r}" for c, x, y in self.rows()]
        return "\n".join(lines) + "\n"

    def summary(self) -> dict:
        out = {"counts": self.counts, "notice": self.notice}
        if self.fit is not None:
            out["fit"] = dataclasses.asdict(self.fit)
        return out


def run_validation(config: PipelineConfig) -> ValidationResult:
    """Infer country paths for held-out traceroutes and compare their CC with the measured one."""
    config.validate(need=("rib", "traces", "registry"))
    inp = load_inputs(config)
    cache = _cache(config)
    table = prefix_table(config, inp.corpus, inp.geodb)
    train_rib, _ = split_train_test(inp.corpus, config.split_ratio, config.seed)
    train_tr, test_tr = split_traces(inp.traces, config.split_ratio, config.seed)
    topo = build_topology(config, train_rib, cache)
    model = build_ingress_model(config, train_tr, inp.geodb, inp.client, cache)
    if config.segment_noise:
        from .synth import inject_segment_noise
        model = inject_segment_noise(model, config.segment_noise, config.seed, table.countries)

    counts = Counter()
    ribs = {}
    actual_obs, inferred_obs = defaultdict(list), defaultdict(list)
    agreement = []
    annotated, _ = annotate_all(test_tr, inp.geodb, inp.client)
    for t in annotated:
        counts["test_traces"] += 1
        if not isinstance(t, AnnotatedTrace) or not t.complete:
            counts["incomplete"] += 1
            continue
        s, d = table.match(t.src), table.match(t.dst)
        if s is None or d is None or table.country(s) == table.country(d):
            counts["unmapped_or_domestic"] += 1
            continue
        src_as = t.as_path[0]
        if d not in ribs:
            try:
                ribs[d] = propagate(topo, prime(train_rib, d), d, max_alternates=config.max_alternates,
                                    pop_factor=config.pop_factor)
            except (KeyError, PropagationError) as exc:
                log.warning("stage=validate prefix=%s skipped=%s", d, exc)
                ribs[d] = None
        rib = ribs[d]
        if rib is None:
            counts["no_route"] += 1
            continue
        if src_as in rib.seeds[d]:
            counts["overlap_excluded"] += 1
            continue
        bp = best_path(rib, src_as, d)
        if bp is None:
            counts["unreachable"] += 1
            continue
        counts["evaluated"] += 1
        counts["as_exact"] += bp == t.as_path
        counts["as_in_table"] += t.as_path in alternate_paths(rib, src_as, d)
        inferred = predict_country_path(bp, t.src, d, model, inp.geodb, inp.client,
                                        src_country=table.country(s), dst_country=table.country(d))
        actual = t.country_path
        counts["country_exact"] += inferred == actual
        agreement.append(path_agreement(inferred, actual))
        actual_obs[(s, d)].append(actual)
        inferred_obs[(s, d)].append(inferred)
    n = counts["evaluated"]
    rates = {"as_exact_rate": counts["as_exact"] / n if n else 0.0,
             "as_in_table_rate": counts["as_in_table"] / n if n else 0.0,
             "country_exact_rate": counts["country_exact"] / n if n else 0.0,
             "agreement_mean": float(np.mean(agreement)) if agreement else 0.0}
    if not n:
        raise ValueError("no test traceroute survived filtering")

    meta = {"config": config.echo(), "inputs": input_digests(config)}
    actual = _cc_from_pairs(_majority_paths(actual_obs), table, "actual", meta)
    inferred = _cc_from_pairs(_majority_paths(inferred_obs), table, "inferred", meta)
    fit = loglog_fit(actual.normalized(), inferred.normalized())
    notice = "" if fit else "fewer than 3 countries nonzero on both sides; fit skipped"
    if notice:
        log.warning("stage=validate %s", notice)
    result = ValidationResult(actual, inferred, fit, notice, {**dict(counts), **rates})
    log.info("stage=validate evaluated=%d overlap_excluded=%d slope=%s r2=%s", n, counts["overlap_excluded"],
             fit and round(fit.slope, 4), fit and round(fit.r2, 4))
    return result


@dataclass
class ReplicaSweep:
    noise: float
    per_seed: Dict[int, ValidationResult]
    fit: Optional[LogFit]


def pooled_fit(results: Dict[int, ValidationResult]) -> Optional[LogFit]:
    """One log-log fit over every (replica, country) point."""
    actual, inferred = {}, {}
    for seed, r in results.items():
        for c, v in r.actual.normalized().items():
            actual[f"{seed}:{c}"] = v
        for c, v in r.inferred.normalized().items():
            inferred[f"{seed}:{c}"] = v
    return loglog_fit(actual, inferred)


def noise_replicas(base, seeds, noise: float, workdir) -> ReplicaSweep:
    """Run the validation harness on one generated world per seed, with ``noise``
    injected into the ingress model, and fit all replicas jointly."""
    from .synth import generate
    results = {}
    for seed in seeds:
        spec = dataclasses.replace(base, seed=seed)
        d = Path(workdir) / f"seed{seed}"
        paths = generate(spec).write_inputs(d)
        cfg = PipelineConfig(rib=str(paths["rib"]), traces=str(paths["traces"]),
                             registry=str(paths["registry"]), prefix_table=str(paths["prefix_table"]),
                             relationships=str(paths["relationships"]), seed=seed,
                             output_dir=str(d / "out"), segment_noise=noise, mode="validate-inference")
        results[seed] = run_validation(cfg)
    return ReplicaSweep(noise, results, pooled_fit(results))


# --- full mesh ----------------------------------------------------------------

@dataclass(frozen=True)
class SourceGroup:
    asn: int
    country: str
    ip: int
    weight: float


def source_groups(table: CountryPrefixTable, corpus: RibCorpus, geodb: GeoDb, traces=()) -> List[SourceGroup]:
    """One group per (origin AS, country): all its prefixes share the AS's RIB entry, so
    their pair weights can be summed.  The group's source address is the most common
    traceroute source inside it, else the first host of its lowest prefix."""
    origins = corpus.origins()
    members = defaultdict(list)
    for p in table.prefixes():
        a = _origin(p, origins, geodb)
        if a is not None:
            members[(a, table.country(p))].append(p)
    seen = Counter()
    for t in traces:
        p = table.match(t.src)
        if p is not None:
            seen[(p, t.src)] += 1
    groups = []
    for (a, cc), ps in sorted(members.items()):
        inside = Counter({ip: k for (p, ip), k in seen.items() if p in set(ps)})
        ip = min(inside, key=lambda x: (-inside[x], x)) if inside else min(ps).host(1)
        groups.append(SourceGroup(a, cc, ip, math.fsum(table.weight(p) for p in ps)))
    return groups


_CTX = None


def _init_worker(ctx):
    global _CTX
    _CTX = ctx


def _run_shard(job):
    idx, prefixes = job
    ctx = _CTX
    acc = CentralityAccumulator()
    failures, unreachable = [], 0
    for d in prefixes:
        t = ctx["table"].country(d)
        try:
            rib = propagate(ctx["topo"], prime(ctx["corpus"], d), d, max_alternates=ctx["M"],
                            pop_factor=ctx["K"])
        except (KeyError, PropagationError) as exc:
            failures.append([str(d), str(exc).strip("'\"")])
            continue
        wt = ctx["table"].weight(d)
        memo = {}
        for g in ctx["groups"]:
            if g.country == t:
                continue
            paths = alternate_paths(rib, g.asn, d)
            if not paths:
                unreachable += 1
                continue
            cps = []
            for p in paths:
                k = (p, g.ip, g.country)
                if k not in memo:
                    memo[k] = predict_country_path(p, g.ip, d, ctx["model"], ctx["geodb"], None,
                                                   src_country=g.country, dst_country=t)
                cps.append(memo[k])
            acc.add_weighted(g.country, t, g.weight * wt, cps[0], cps)
    return {"index": idx, "acc": acc.to_json(), "failures": failures, "unreachable": unreachable}


@dataclass
class FullMeshResult:
    cc: CentralityReport
    scc: CentralityReport
    failures: List[List[str]]
    shards: int
    resumed: int
    unreachable: int


def run_full_mesh(config: PipelineConfig, *, stop_after: Optional[int] = None) -> FullMeshResult:
    """All (source, destination) prefix pairs, sharded by destination prefix.

    Each finished shard leaves a marker holding its partial sums, so a rerun
    with the same fingerprint only computes the missing shards.  ``stop_after``
    aborts after that many new shards (used to exercise resumption).
    """
    config.validate(need=("rib", "registry"))
    inp = load_inputs(config)
    cache = _cache(config)
    table = prefix_table(config, inp.corpus, inp.geodb)
    topo = build_topology(config, inp.corpus, cache)
    model = build_ingress_model(config, inp.traces, inp.geodb, inp.client, cache)
    groups = source_groups(table, inp.corpus, inp.geodb, inp.traces)
    dests = table.prefixes()
    shards = [(i, dests[k:k + config.shard_size]) for i, k in enumerate(range(0, len(dests), config.shard_size))]

    fp = run_fingerprint(config)
    marker_dir = Path(config.output_dir) / "shards" / fp[:16]
    marker_dir.mkdir(parents=True, exist_ok=True)
    done = {}
    for i, _ in shards:
        m = marker_dir / f"shard-{i:05d}.json"
        if m.exists():
            try:
                done[i] = json.loads(m.read_text())
            except json.JSONDecodeError:
                log.warning("stage=full-mesh shard=%d corrupt marker, recomputing", i)
    resumed = len(done)
    pending = [s for s in shards if s[0] not in done]
    if stop_after is not None:
        pending = pending[:stop_after]
    log.info("stage=full-mesh shards=%d resumed=%d pending=%d groups=%d workers=%d",
             len(shards), resumed, len(pending), len(groups), config.workers)

    ctx = {"table": table, "topo": topo, "corpus": inp.corpus, "model": model, "geodb": inp.geodb,
           "groups": groups, "K": config.pop_factor, "M": config.max_alternates}

    def record(res):
        tmp = marker_dir / f"shard-{res['index']:05d}.tmp"
        tmp.write_text(json.dumps(res, sort_keys=True))
        os.replace(tmp, marker_dir / f"shard-{res['index']:05d}.json")
        done[res["index"]] = res
        log.info("stage=full-mesh shard=%d pairs=%d failures=%d", res["index"], res["acc"]["pairs"],
                 len(res["failures"]))

    if config.workers == 1 or len(pending) <= 1:
        _init_worker(ctx)
        for job in pending:
            record(_run_shard(job))
    else:
        with ProcessPoolExecutor(max_workers=config.workers, initializer=_init_worker,
                                 initargs=(ctx,)) as pool:
            for res in pool.map(_run_shard, pending):
                record(res)

    if len(done) < len(shards):
        raise RuntimeError(f"{len(shards) - len(done)} shards still pending")
    acc = CentralityAccumulator()
    failures, unreachable = [], 0
    for i, _ in shards:          # canonical merge order
        acc.merge(CentralityAccumulator.from_json(done[i]["acc"]))
        failures.extend(done[i]["failures"])
        unreachable += done[i]["unreachable"]
    meta = {"config": config.echo(), "inputs": input_digests(config), "failures": len(failures),
            "shards": len(shards)}
    return FullMeshResult(acc.report(CC, "inferred", meta), acc.report(SCC, "inferred", meta),
                          failures, len(shards), resumed, unreachable)


def write_reports(outdir, **reports) -> List[Path]:
    """Write each report as ``<name>.csv`` and ``<name>.jsonl``."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    written = []
    for name, rep in reports.items():
        for ext, text in (("csv", rep.to_csv()), ("jsonl", rep.to_jsonl())):
            path = outdir / f"{name}.{ext}"
            path.write_text(text)
            written.append(path)
    return written


# --- benchmark --------------------------------------------------------------

def synthetic_model(n_entries: int = 100_000, seed: int = 0, n_ases: int = 3000):
    """A random model with at least ``n_entries`` table keys, plus the walks it was built from."""
    rng = random.Random(seed)
    countries = ["US", "GB", "DE", "FR", "JP", "BR", "AU", "CN", "IN", "ZA"]
    nbrs = {a: rng.sample(range(1, n_ases + 1), 6) for a in range(1, n_ases + 1)}
    model = IngressModel()
    walks = []

    def ingress(a, b, ip):
        return (hash((a, b, ip)) & 0x00FFFFFF) | (((b % 200) + 20) << 24)

    while len(model) < n_entries:
        path = [rng.randint(1, n_ases)]
        for _ in range(rng.randint(2, 5)):
            path.append(rng.choice(nbrs[path[-1]]))
        src = rng.getrandbits(24) | (10 << 24)
        ip, cur = src, rng.choice(countries)
        for i in range(len(path) - 1):
            a, b = path[i], path[i + 1]
            nxt = ingress(a, b, ip)
            seg = (cur,) if rng.random() < 0.6 else (cur, rng.choice(countries))
            value = (nxt, seg)
            model.freq_s.setdefault(b, Counter())[nxt] += 1
            model.freq_sc.setdefault((b, cur), Counter())[nxt] += 1
            model.freq_d.setdefault((a, b), Counter())[value] += 1
            model.freq_dc.setdefault((a, b, cur), Counter())[value] += 1
            model.known_s.setdefault((a, b, ip), Counter())[value] += 1
            if i + 2 < len(path):
                model.known_d.setdefault((a, b, path[i + 2], ip), Counter())[value] += 1
            model.ip_country[nxt] = seg[-1]
            ip, cur = nxt, seg[-1]
        walks.append((tuple(path), src))
    return model, walks, nbrs


def bench_predict(n_entries: int = 100_000, n_queries: int = 200_000, seed: int = 0) -> dict:
    """Time ``predict_country_path`` on a synthetic model; half the queries replay
    training walks, half are fresh walks that fall through to frequency tables."""
    model, walks, nbrs = synthetic_model(n_entries, seed)
    rng = random.Random(seed + 1)
    db = GeoDb()
    dst = Prefix(30 << 24, 8)
    db.add(dst, "JP", 1)
    queries = []
    for q in range(n_queries):
        if q % 2 == 0:
            path, src = walks[rng.randrange(len(walks))]
        else:
            path = [rng.randint(1, len(nbrs))]
            for _ in range(rng.randint(2, 5)):
                path.append(rng.choice(nbrs[path[-1]]))
            path, src = tuple(path), rng.getrandbits(24) | (10 << 24)
        queries.append((path, src))
    model.best()
    # same convention as timeit: no collector passes inside the timed loop
    was_enabled = gc.isenabled()
    gc.disable()
    try:
        t0 = time.perf_counter()
        for path, src in queries:
            predict_country_path(path, src, dst, model, db, src_country="US", dst_country="JP")
        elapsed = time.perf_counter() - t0
    finally:
        if was_enabled:
            gc.enable()
    return {"entries": len(model), "queries": n_queries, "seconds": elapsed,
            "per_second": n_queries / elapsed if elapsed > 0 else float("inf")}
