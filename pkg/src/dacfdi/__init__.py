"""Fault detection and accommodation for internal-model dynamic average consensus."""

from .consensus import EstimatorDesign, Kind, ReferenceSignal, default_design, verify_lemma1
from .fdi import FaultModel, build_extended, uio_design, uio_existence_check
from .graph import Graph, components, laplacian, nine_node_graph, remove_edge
from .lti import Polynomial, StateSpace, TransferFunction, tf_realize
from .sim import Scenario, TimeSeries, TopologyEvent, metrics, run

__all__ = [
    "EstimatorDesign", "FaultModel", "Graph", "Kind", "Polynomial", "ReferenceSignal",
    "Scenario", "StateSpace", "TimeSeries", "TopologyEvent", "TransferFunction",
    "build_extended", "components", "laplacian", "metrics", "nine_node_graph", "default_design",
    "remove_edge", "run", "tf_realize", "uio_design", "uio_existence_check", "verify_lemma1",
]
