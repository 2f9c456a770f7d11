"""Country-level path inference from BGP RIBs and traceroutes, and country centrality metrics."""

from .asrel import Rel, Topology, infer_relationships, is_valley_free
from .centrality import CentralityAccumulator, CountryPrefixTable, PathAssignment, betweenness
from .geodb import GeoDb, build_geodb, resolve
from .net import Prefix, Traceroute, parse_ip, parse_prefix
from .propagate import alternate_paths, best_path, prime, propagate
from .rib import RibCorpus, parse_rib, read_rib
from .trace import IngressModel, annotate, build_model, path_agreement, predict_country_path

__version__ = "0.1.0"

__all__ = [
    "Rel",
    "Topology",
    "infer_relationships",
    "is_valley_free",
    "CentralityAccumulator",
    "CountryPrefixTable",
    "PathAssignment",
    "betweenness",
    "GeoDb",
    "build_geodb",
    "resolve",
    "Prefix",
    "Traceroute",
    "parse_ip",
    "parse_prefix",
    "alternate_paths",
    "best_path",
    "prime",
    "propagate",
    "RibCorpus",
    "parse_rib",
    "read_rib",
    "IngressModel",
    "annotate",
    "build_model",
    "path_agreement",
    "predict_country_path",
]
