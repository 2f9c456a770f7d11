#!/usr/bin/env python3
"""Convert RouteViews / RIPE RIS MRT RIB dumps to the route TSV read by ``cpa ingest``.

    python scripts/mrt_to_tsv.py rib.20090301.0000.bz2 [more dumps ...] > rib.tsv

Each output line is ``observer_asn<TAB>prefix<TAB>as path``.  Only IPv4 unicast
entries are written.  Paths containing AS_SET segments are dropped (counted on
stderr) since they have no single AS sequence.  Needs ``pip install mrtparse``
(the ``mrt`` extra).
"""
import argparse
import sys

import mrtparse

AS_PATH = 2
AS_SEQUENCE = 2


def as_path(attrs):
    for attr in attrs:
        if AS_PATH not in attr["type"]:
            continue
        hops = []
        for seg in attr["value"]:
            if AS_SEQUENCE not in seg["type"]:
                return None
            hops.extend(seg["value"])
        return hops
    return None


def convert(fname, out, stats):
    peers = []
    for entry in mrtparse.Reader(fname):
        if entry.err:
            stats["errors"] += 1
            continue
        d = entry.data
        sub = next(iter(d["subtype"].values()))
        if sub == "PEER_INDEX_TABLE":
            peers = [p["peer_as"] for p in d["peer_entries"]]
            continue
        if sub == "RIB_IPV4_UNICAST":
            pfx = f"{d['prefix']}/{d['length']}"
            rows = [(peers[r["peer_index"]], r["path_attributes"]) for r in d["rib_entries"]]
        elif sub == "AFI_IPv4" and "TABLE_DUMP" in d["type"].values():
            rows = [(d["peer_as"], d["path_attributes"])]
            pfx = f"{d['prefix']}/{d['length']}"
        else:
            stats["skipped"] += 1
            continue
        for observer, attrs in rows:
            hops = as_path(attrs)
            if not hops:
                stats["as_set"] += 1
                continue
            out.write(f"{observer}\t{pfx}\t{' '.join(map(str, hops))}\n")
            stats["routes"] += 1


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("dumps", nargs="+")
    ap.add_argument("-o", "--out", help="output file (default stdout)")
    args = ap.parse_args(argv)
    stats = dict(routes=0, as_set=0, skipped=0, errors=0)
    out = open(args.out, "w") if args.out else sys.stdout
    try:
        for f in args.dumps:
            convert(f, out, stats)
    finally:
        if args.out:
            out.close()
    print(" ".join(f"{k}={v}" for k, v in stats.items()), file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
