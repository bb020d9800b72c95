"""Competitive quantized gossip on dynamic networks with death and duplication.

Integer-valued agent states evolve by pairwise exchanges that amplify
differences; an agent dying at state 0 or splitting at the threshold B
rewrites the topology through locally-validated patches. This package
simulates the dynamics deterministically and machine-checks the
conservation, connectivity, bound, and shape-invariance properties.
"""

from .engine import RunConfig, Termination, Trace, init, run
from .graph import Topology, TopologyShape, canonical_key, classify, is_connected
from .protocol import SystemState

__version__ = "0.1.0"

__all__ = [
    "RunConfig",
    "SystemState",
    "Termination",
    "Topology",
    "TopologyShape",
    "Trace",
    "canonical_key",
    "classify",
    "init",
    "is_connected",
    "run",
    "__version__",
]
