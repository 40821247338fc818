"""hhnet: deterministic recurrent Hodgkin-Huxley network simulator.

A 200-neuron recurrent network with stochastic vesicle release,
spike-timing-dependent plasticity, and voltage-dependent inhibition, plus
the spike-train analysis toolchain (rates, participation, Fano factors,
raster export).
"""

from .engine import NumericAbort, SimConfig, World, build_world, run
from .hh import GatingState, NeuronParams, NeuronState
from .plasticity import PairEvent, StdpParams
from .synapse import SynapseParams, SynapseState
from .topology import NetworkConfig, StimulusConfig, StimulusProtocol, Topology, \
    build_stimulus, build_topology

__all__ = [
    "GatingState", "NetworkConfig", "NeuronParams", "NeuronState",
    "NumericAbort", "PairEvent", "SimConfig", "StdpParams", "StimulusConfig",
    "StimulusProtocol", "SynapseParams", "SynapseState", "Topology",
    "World", "build_stimulus", "build_topology", "build_world", "run",
]
