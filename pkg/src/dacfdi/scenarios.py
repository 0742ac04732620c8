"""The two replication experiments, each in clean / fault / accommodated form."""

from __future__ import annotations

from dataclasses import replace

from .consensus import Kind, default_design, staggered_sinusoids
from .fdi import half_frequency_fault
from .graph import nine_node_graph
from .sim import Scenario, TopologyEvent

REFERENCE_K1 = (5.3993, 12.1485, 1.7998)
VARIANTS = ("clean", "fault", "accommodated")


def example1(variant: str = "clean", kind: Kind | str = Kind.ISAC, omega: float = 1.5) -> Scenario:
    """Nine nodes, sinusoidal inputs, cos(wt/2) fault on link 1-2 after t = 25."""
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}; choose from {VARIANTS}")
    kind = Kind(kind)
    return Scenario(
        graph=nine_node_graph(),
        design=default_design(kind, omega),
        signals=staggered_sinusoids(omega),
        omega=omega,
        faults=() if variant == "clean" else (half_frequency_fault(omega),),
        accommodation=variant == "accommodated",
        observer_k1=REFERENCE_K1 if kind is Kind.ISAC and omega == 1.5 else None,
        window=(40.0, 50.0),
        name=f"example1_{kind.value}_{variant}",
    )


def example2(variant: str = "clean", kind: Kind | str = Kind.RAC, omega: float = 1.5) -> Scenario:
    """Example 1 plus the 3-6 link cut at t = 30, splitting the network in two."""
    sc = example1(variant, kind, omega)
    return replace(sc, events=(TopologyEvent(30.0, 3, 6),), window=(45.0, 50.0),
                   name=f"example2_{Kind(kind).value}_{variant}")


BUILTINS = {
    "example1_isac": lambda v: example1(v, Kind.ISAC),
    "example1_rac": lambda v: example1(v, Kind.RAC),
    "example2_rac": lambda v: example2(v, Kind.RAC),
    "example2_isac": lambda v: example2(v, Kind.ISAC),
}


def builtin(ref: str) -> Scenario:
    """``name`` or ``name/variant``, e.g. ``example1_isac/accommodated``."""
    name, _, variant = ref.partition("/")
    if name not in BUILTINS:
        raise KeyError(f"unknown builtin scenario {name!r}; known: {sorted(BUILTINS)}")
    return BUILTINS[name](variant or "clean")
