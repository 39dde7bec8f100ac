"""Delay- and profit-aware 5G slice admission simulator."""

from .allocator import Placement, RejectReason, Rejection, map_request, verify_placement
from .engine import (
    ExperimentResult,
    SimulationConfig,
    SubstrateParams,
    TrafficParams,
    WindowRecord,
    run_experiment,
)
from .policy import Action, AgentParams, QPolicy, boltzmann_probs, encode_state, prioritize
from .reward import EconomicParams, RewardBreakdown, max_profit, slice_reward, window_reward
from .slicegen import DemandConfig, SliceRequest, SliceType, build_slice_graph, generate_trace
from .substrate import CapacityProfile, NodeRegion, SubstrateNetwork, generate

__version__ = "0.1.0"
