"""Memory-based dynamic event-triggered control of interval type-2 fuzzy multi-agent systems."""
from .config import Scenario, load_scenario
from .controller import GainFile, MemoryGains, control_input, load_gains, save_gains
from .detm import DetmParams, DetmState, dynamic_threshold, should_trigger
from .fuzzy import IT2MembershipFamily, normalized_membership, sigmoid_band
from .plant import AgentModel, augment
from .sim import SimConfig, SimTrace, run
from .topology import Topology, build_graph_matrices

__version__ = "0.1.0"
