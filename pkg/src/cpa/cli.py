"""``cpa`` command line.

Exit status: 0 on success, 1 for bad input (unreadable files, parse errors,
unknown flags), 2 when an internal invariant breaks.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import pipeline as pl
from .asrel import (infer_relationships, parse_relationships, relationship_label, topology_from_relationships,
                    write_relationships)
from .centrality import (CC, SCC, CentralityAccumulator, CentralityError, CentralityReport, CountryPrefixTable,
                         rank_report, read_assignments)
from .geodb import FileLookupClient, build_geodb
from .net import ParseError, parse_asn, parse_ip, parse_prefix, read_traceroutes
from .propagate import PropagationError, prime, propagate, write_snapshot
from .rib import EmptyCorpusError, extract_topology, read_rib, write_rejects, write_rib
from .trace import annotate_all, build_model, explain_country_path, read_model, write_model

log = logging.getLogger("cpa")


class InputError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _config_flags(p):
    p.add_argument("--config", help="TOML config file")
    for flag in ("rib", "traces", "registry", "overrides", "relationships", "whois", "prefix-table"):
        p.add_argument(f"--{flag}")
    p.add_argument("--split-ratio", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--shard-size", type=int)
    p.add_argument("--pop-factor", type=int, help="K: queue pops per AS before giving up")
    p.add_argument("--max-alternates", type=int, help="M: candidate paths kept per AS")
    p.add_argument("--sibling-threshold", type=int, help="L")
    p.add_argument("--peer-degree-ratio", type=float, help="R")
    p.add_argument("--segment-noise", type=float)
    p.add_argument("--output-dir")


def _config(args, mode) -> pl.PipelineConfig:
    cfg = pl.load_config(args.config) if args.config else pl.PipelineConfig()
    over = {k: getattr(args, k) for k in ("rib", "traces", "registry", "overrides", "relationships", "whois",
                                         "prefix_table", "split_ratio", "seed", "workers", "shard_size",
                                         "pop_factor", "max_alternates", "sibling_threshold",
                                         "peer_degree_ratio", "segment_noise", "output_dir")}
    return cfg.replace(mode=mode, **over)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="cpa", description="Country-level path inference and centrality.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="cmd", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("ingest", help="parse a RIB TSV dump and report what was kept")
    p.add_argument("--rib", required=True)
    p.add_argument("--out", help="write the cleaned routes here")
    p.add_argument("--rejects", help="CSV of rejected lines")

    p = sub.add_parser("relationships", help="infer AS relationships from a RIB")
    p.add_argument("--rib", required=True)
    p.add_argument("--out")
    p.add_argument("--sibling-threshold", type=int, default=1)
    p.add_argument("--peer-degree-ratio", type=float, default=60.0)

    p = sub.add_parser("propagate", help="compute per-prefix candidate paths")
    p.add_argument("--rib", required=True)
    p.add_argument("--relationships", help="labelled edges; inferred from the RIB when omitted")
    p.add_argument("--prefix", action="append", help="repeatable; default all prefixes")
    p.add_argument("--out")
    p.add_argument("--pop-factor", type=int, default=64)
    p.add_argument("--max-alternates", type=int, default=16)

    p = sub.add_parser("model", help="build the ingress model from traceroutes")
    p.add_argument("--traces", required=True)
    p.add_argument("--registry", required=True)
    p.add_argument("--overrides")
    p.add_argument("--whois")
    p.add_argument("--out", required=True)

    p = sub.add_parser("predict", help="country path for one AS path")
    p.add_argument("--as-path", required=True, help="comma separated ASNs")
    p.add_argument("--src", required=True)
    p.add_argument("--dst-prefix", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--registry", help="registry CSV (default: the one embedded in the model)")
    p.add_argument("--explain", action="store_true")

    for name in ("cc", "scc"):
        p = sub.add_parser(name, help=f"{name.upper()} from path assignments")
        p.add_argument("--assignments", required=True)
        p.add_argument("--prefix-table", required=True)
        p.add_argument("--format", choices=("csv", "jsonl"), default="csv")

    for name, helptext in (("validate", "held-out inference vs measured centrality"),
                           ("full-mesh", "all prefix pairs, CC and SCC"),
                           ("observed", "CC of measured traceroute and RIB paths")):
        p = sub.add_parser(name, help=helptext)
        _config_flags(p)

    p = sub.add_parser("report", help="print a ranked report")
    p.add_argument("--input", required=True, help="report CSV")
    p.add_argument("--top", type=int)

    p = sub.add_parser("bench", help="time country-path prediction")
    p.add_argument("--entries", type=int, default=100_000)
    p.add_argument("--queries", type=int, default=200_000)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("synth", help="write a synthetic input set and config")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--ases", type=int, default=20)
    p.add_argument("--countries", type=int, default=5)
    p.add_argument("--traces", type=int, default=200)
    return ap


def _open(path):
    try:
        return open(path)
    except OSError as exc:
        raise InputError(str(exc)) from None


def cmd_ingest(args):
    corpus = read_rib(args.rib)
    if args.out:
        write_rib(corpus, args.out)
    if args.rejects:
        write_rejects(corpus.rejects, args.rejects)
    print(json.dumps({"routes": len(corpus.routes), "rejects": len(corpus.rejects),
                      "prefixes": len(corpus.by_prefix), "observers": len(corpus.by_observer),
                      "as_sets_dropped": corpus.as_sets_dropped}, sort_keys=True))


def cmd_relationships(args):
    corpus = read_rib(args.rib)
    topo = infer_relationships(extract_topology(corpus), corpus, sibling_threshold=args.sibling_threshold,
                               peer_degree_ratio=args.peer_degree_ratio)
    if args.out:
        write_relationships(topo, args.out)
    else:
        print("asn1,asn2,label")
        for a, b, rel in topo.edges():
            print(f"{a},{b},{relationship_label(rel)}")
    log.info("stage=relationships %s", dict(topo.counts()))


def cmd_propagate(args):
    corpus = read_rib(args.rib)
    if args.relationships:
        with _open(args.relationships) as fh:
            topo = topology_from_relationships(parse_relationships(fh))
    else:
        topo = infer_relationships(extract_topology(corpus), corpus)
    prefixes = [parse_prefix(p) for p in args.prefix] if args.prefix else corpus.prefixes()
    out = open(args.out, "w") if args.out else sys.stdout
    try:
        for p in prefixes:
            try:
                primed = prime(corpus, p)
            except KeyError:
                raise InputError(f"no route for {p} in the RIB") from None
            write_snapshot(propagate(topo, primed, p, max_alternates=args.max_alternates,
                                     pop_factor=args.pop_factor), out)
    finally:
        if out is not sys.stdout:
            out.close()


def cmd_model(args):
    db = build_geodb(args.registry, args.overrides)
    client = FileLookupClient(args.whois) if args.whois else None
    traces = []
    with _open(args.traces) as fh:
        for n, t in read_traceroutes(fh):
            if isinstance(t, ParseError):
                log.warning("stage=model line=%d rejected=%s", n, t)
            else:
                traces.append(t)
    annotated, stats = annotate_all(traces, db, client)
    model = build_model(annotated)
    model.geo = db
    with open(args.out, "w") as fh:
        write_model(model, fh)
    print(json.dumps({"traces": stats.total, "complete": stats.complete, "skipped": stats.skipped,
                      "observation_points": stats.observation_points, "entries": len(model)}, sort_keys=True))


def cmd_predict(args):
    with _open(args.model) as fh:
        model = read_model(fh)
    db = build_geodb(args.registry) if args.registry else model.geo
    if db is None:
        raise InputError("model has no embedded registry; pass --registry")
    as_path = tuple(parse_asn(a) for a in args.as_path.split(",") if a.strip())
    if not as_path:
        raise InputError("empty --as-path")
    pred = explain_country_path(as_path, parse_ip(args.src), parse_prefix(args.dst_prefix), model, db)
    print(",".join(pred.path))
    if args.explain:
        print(json.dumps({"steps": list(pred.steps), "probes": pred.probes,
                          "low_confidence": pred.low_confidence}))


def _centrality(args, metric):
    with _open(args.prefix_table) as fh:
        table = CountryPrefixTable.read_csv(fh)
    acc = CentralityAccumulator()
    with _open(args.assignments) as fh:
        for a in read_assignments(fh):
            try:
                acc.add(a, table)
            except CentralityError as exc:
                raise InputError(str(exc)) from None
    rep = acc.report(metric, "assignments")
    sys.stdout.write(rep.to_csv() if args.format == "csv" else rep.to_jsonl())


def cmd_validate(args):
    cfg = _config(args, "validate-inference")
    res = pl.run_validation(cfg)
    out = Path(cfg.output_dir)
    pl.write_reports(out, validation_actual=res.actual, validation_inferred=res.inferred)
    (out / "validation.csv").write_text(res.to_csv())
    (out / "validation_summary.json").write_text(json.dumps(res.summary(), indent=2, sort_keys=True) + "\n")
    print(json.dumps(res.summary(), sort_keys=True))


def cmd_full_mesh(args):
    cfg = _config(args, "full-mesh")
    res = pl.run_full_mesh(cfg)
    out = Path(cfg.output_dir)
    pl.write_reports(out, cc=res.cc, scc=res.scc)
    summary = {"shards": res.shards, "resumed": res.resumed, "failures": len(res.failures),
               "unreachable": res.unreachable, "pairs": res.cc.metadata["pairs"]}
    (out / "full_mesh_summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    print(json.dumps(summary, sort_keys=True))


def cmd_observed(args):
    cfg = _config(args, "observed-cc")
    tr, bgp = pl.run_observed_cc(cfg)
    pl.write_reports(cfg.output_dir, observed_traceroute=tr, observed_bgp=bgp)
    print(json.dumps({"traceroute_pairs": tr.metadata["pairs"], "bgp_pairs": bgp.metadata["pairs"]}))


def cmd_report(args):
    with _open(args.input) as fh:
        rep = CentralityReport.from_csv(fh)
    print(f"{'rank':>4}  {'country':<7} {rep.metric:>10}")
    for s in rank_report(rep, args.top):
        print(f"{s.rank:>4}  {s.country:<7} {s.normalized:>10.6f}")


def cmd_bench(args):
    print(json.dumps(pl.bench_predict(args.entries, args.queries, args.seed), sort_keys=True))


def cmd_synth(args):
    from .synth import SynthSpec, generate
    fx = generate(SynthSpec(n_ases=args.ases, n_countries=args.countries, n_traces=args.traces,
                            n_vantage=max(2, args.traces // 20), seed=args.seed))
    paths = fx.write_inputs(args.out)
    cfg = Path(args.out) / "config.toml"
    cfg.write_text("".join(f'{k} = "{v.name}"\n' for k, v in paths.items() if k != "relationships")
                   + f'seed = {args.seed}\noutput_dir = "out"\n')
    print(cfg)


COMMANDS = {"ingest": cmd_ingest, "relationships": cmd_relationships, "propagate": cmd_propagate,
            "model": cmd_model, "predict": cmd_predict, "cc": lambda a: _centrality(a, CC),
            "scc": lambda a: _centrality(a, SCC), "validate": cmd_validate, "full-mesh": cmd_full_mesh,
            "observed": cmd_observed, "report": cmd_report, "bench": cmd_bench, "synth": cmd_synth}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 1
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(levelname)s %(name)s %(message)s", stream=sys.stderr)
    try:
        COMMANDS[args.cmd](args)
    except (InputError, ParseError, EmptyCorpusError, pl.ConfigError, OSError, ValueError) as exc:
        print(f"cpa {args.cmd}: {exc}", file=sys.stderr)
        return 1
    except (PropagationError, AssertionError, RuntimeError) as exc:
        print(f"cpa {args.cmd}: internal error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
