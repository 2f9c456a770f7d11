#!/usr/bin/env python3
"""Desk-scale experiments on generated worlds.

    python scripts/run_synthetic_experiment.py noise --rates 0 0.05 0.1 0.2
    python scripts/run_synthetic_experiment.py mesh --ases 60 --workers 2

``noise`` runs the inference validation on several generated replicas per
noise rate and prints per-replica and pooled log-log fits.  ``mesh`` writes
one world, runs the full mesh and prints the top of the CC and SCC rankings.
"""
import argparse
import dataclasses
import json
import sys
import tempfile
import time
from pathlib import Path

from cpa import pipeline as pl
from cpa.synth import NOISE_SEEDS, NOISE_WORLD, SynthSpec, generate


def noise(args):
    spec = dataclasses.replace(NOISE_WORLD, n_traces=args.traces, n_countries=args.countries)
    seeds = tuple(range(args.replicas)) if args.replicas else NOISE_SEEDS
    with tempfile.TemporaryDirectory() as tmp:
        for rate in args.rates:
            t0 = time.time()
            sweep = pl.noise_replicas(spec, seeds, rate, Path(tmp) / f"r{rate}")
            per = {s: (round(r.fit.slope, 3) if r.fit else None) for s, r in sweep.per_seed.items()}
            f = sweep.fit
            print(json.dumps({"noise": rate, "pooled_slope": f and round(f.slope, 4),
                              "pooled_r2": f and round(f.r2, 4), "points": f and f.n,
                              "per_replica": per, "seconds": round(time.time() - t0, 1)}))


def mesh(args):
    fx = generate(SynthSpec(n_ases=args.ases, n_countries=args.countries, n_traces=args.traces,
                            n_vantage=max(1, args.ases // 2), seed=args.seed))
    out = Path(args.out or tempfile.mkdtemp(prefix="cpa-mesh-"))
    paths = fx.write_inputs(out / "inputs")
    cfg = pl.PipelineConfig(rib=str(paths["rib"]), traces=str(paths["traces"]), registry=str(paths["registry"]),
                            prefix_table=str(paths["prefix_table"]), workers=args.workers,
                            output_dir=str(out / "out"), seed=args.seed)
    t0 = time.time()
    res = pl.run_full_mesh(cfg)
    pl.write_reports(out / "out", cc=res.cc, scc=res.scc)
    print(f"# {res.shards} shards, {len(res.failures)} failures, {time.time() - t0:.1f}s, reports in {out / 'out'}")
    for name, rep in (("CC", res.cc), ("SCC", res.scc)):
        print(name, " ".join(f"{s.country}:{s.normalized:.4f}" for s in rep.scores[:args.top]))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="cmd", required=True)
    p = sub.add_parser("noise")
    p.add_argument("--rates", type=float, nargs="+", default=[0.0, 0.1])
    p.add_argument("--replicas", type=int, default=0, help="0 = the default replica set")
    p.add_argument("--traces", type=int, default=NOISE_WORLD.n_traces)
    p.add_argument("--countries", type=int, default=NOISE_WORLD.n_countries)
    p.set_defaults(fn=noise)
    p = sub.add_parser("mesh")
    p.add_argument("--ases", type=int, default=40)
    p.add_argument("--countries", type=int, default=8)
    p.add_argument("--traces", type=int, default=400)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--top", type=int, default=5)
    p.add_argument("--out")
    p.set_defaults(fn=mesh)
    args = ap.parse_args(argv)
    args.fn(args)
    return 0


if __name__ == "__main__":
    sys.exit(main())
