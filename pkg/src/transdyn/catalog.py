"""Named example maps."""
from __future__ import annotations

from dataclasses import dataclass

from . import fnkit
from .fnkit import MeroFn
from .newton import newton_map


@dataclass(frozen=True)
class CatalogEntry:
    key: str
    text: str
    fn_class: str
    description: str
    newton_target: bool = False  # iterate the Newton map of this function


CATALOG = {
    e.key: e
    for e in (
        CatalogEntry("fatou1", "z + 1 + exp(-z)", fnkit.CLASS_E, "invariant Baker domain containing the right half-plane"),
        CatalogEntry("baker2", "1/z - exp(z)", fnkit.CLASS_M, "cycle of two Baker domains"),
        CatalogEntry(
            "wander1", "z - 1 + exp(-z) + 6.283185307179586*i", fnkit.CLASS_E, "wandering domains drifting by 2 pi i"
        ),
        CatalogEntry("exp03", "0.3*exp(z)", fnkit.CLASS_E, "single attracting basin, Cantor bouquet Julia set"),
        CatalogEntry("exp", "exp(z)", fnkit.CLASS_E, "Julia set is the whole plane"),
        CatalogEntry("expz", "exp(z) + z", fnkit.CLASS_E, "no fixed points"),
        CatalogEntry("tan2", "2*tan(z)", fnkit.CLASS_M, "Julia set is the real line"),
        CatalogEntry("tan05", "0.5*tan(z)", fnkit.CLASS_M, "Julia set is a Cantor subset of the real line"),
        CatalogEntry(
            "smale2",
            "z^3 - z + 0.7071067811865476",
            fnkit.RATIONAL,
            "Newton map has a superattracting 2-cycle {0, 1/sqrt 2}",
            newton_target=True,
        ),
    )
}


def entry(key: str) -> CatalogEntry:
    try:
        return CATALOG[key]
    except KeyError:
        raise KeyError(f"unknown catalog key {key!r}; known: {', '.join(sorted(CATALOG))}") from None


def function(key: str) -> MeroFn:
    """The catalog function itself (annotated with its class)."""
    e = entry(key)
    return fnkit.parse(e.text, fn_class=e.fn_class)


def iteration_map(key: str) -> MeroFn:
    """The map to iterate: the Newton map for Newton targets, else the function."""
    e = entry(key)
    return newton_map(function(key)) if e.newton_target else function(key)
