"""qgl: spectra and counting statistics of standard quantum graphs."""

from .graphs import MetricGraph, Topology, load_graph, save_graph, validate

__all__ = ["MetricGraph", "Topology", "load_graph", "save_graph", "validate"]

__version__ = "0.1.0"
