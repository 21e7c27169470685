"""Numerical dynamics of entire and meromorphic functions."""
from .fnkit import INFINITY, MeroFn, classify_class, differentiate, evaluate, parse, serialize
from .orbit import OrbitRecord, PreimageSet, iterate, preimages
from .periodic import PeriodicPoint, classify_multiplier, find_periodic
from .fatou import FateLabel, RateCheck, classify_seed, escape_rate_check
from .julia import RasterGrid, boundary_extract, raster_escape, raster_preimage
from .newton import BasinReport, NewtonSetup, basin_measures, flow_basin, make_relaxed, smale_test
from .bouquet import BouquetConfig, configure, endpoint_from_itinerary, itinerary, verify_conjugacy

__version__ = "0.1.0"

__all__ = [
    "INFINITY",
    "MeroFn",
    "parse",
    "serialize",
    "evaluate",
    "differentiate",
    "classify_class",
    "OrbitRecord",
    "PreimageSet",
    "iterate",
    "preimages",
    "PeriodicPoint",
    "classify_multiplier",
    "find_periodic",
    "FateLabel",
    "RateCheck",
    "classify_seed",
    "escape_rate_check",
    "RasterGrid",
    "raster_escape",
    "raster_preimage",
    "boundary_extract",
    "NewtonSetup",
    "BasinReport",
    "make_relaxed",
    "smale_test",
    "flow_basin",
    "basin_measures",
    "BouquetConfig",
    "configure",
    "itinerary",
    "endpoint_from_itinerary",
    "verify_conjugacy",
]
