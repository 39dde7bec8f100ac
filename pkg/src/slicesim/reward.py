"""Economic model: per-request revenue, cost, profit, delay penalty and the
normalized per-window reward.

Revenue and cost are linear per-resource rates (money per unit per window),
so a request's profit is (revenue_rate - cost_rate) * operational_time. The
delay penalty is delay_penalty_rate * priority * delay and is subtracted from
profit to form the reward. Window rewards are normalized by the best profit
the substrate could yield at full utilization, which makes runs on different
substrates comparable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping

from .allocator import Placement
from .slicegen import DemandConfig, SliceRequest, SliceType
from .substrate import NodeRegion, SubstrateNetwork


class DegenerateEconomics(ValueError):
    """Raised when the configured prices make the full-utilization profit zero."""


def calibrate_delay_penalty(
    demands: DemandConfig = DemandConfig(),
    unit_revenue_cpu: float = 1.0,
    unit_revenue_bw: float = 0.5,
    urllc_multiplier: float = 1.5,
    unit_cost_cpu_core: float = 0.2,
    unit_cost_cpu_edge: float = 0.4,
    unit_cost_bw: float = 0.1,
    priority: float = 3.0,
    forfeit_fraction: float = 0.25,
    assumed_hops: float = 2.0,
) -> float:
    """Delay price such that a median URLLC request held up one full window
    forfeits ``forfeit_fraction`` of its median profit."""
    spec = demands.urllc
    cpu_med = (spec.cpu[0] + spec.cpu[1]) / 2.0
    bw_med = (spec.bw[0] + spec.bw[1]) / 2.0
    hold_med = (spec.hold[0] + spec.hold[1]) / 2.0
    # template: AMF+SMF on core, UPF+backup on edge, three virtual links
    cpu_sum = 4 * cpu_med
    bw_sum = 3 * bw_med
    revenue = urllc_multiplier * (unit_revenue_cpu * cpu_sum + unit_revenue_bw * bw_sum)
    cost = (
        unit_cost_cpu_core * 2 * cpu_med
        + unit_cost_cpu_edge * 2 * cpu_med
        + unit_cost_bw * bw_sum * assumed_hops
    )
    profit = (revenue - cost) * hold_med
    return forfeit_fraction * profit / priority


DEFAULT_DELAY_PENALTY = calibrate_delay_penalty()


@dataclass(frozen=True)
class EconomicParams:
    unit_revenue_cpu: float = 1.0
    unit_revenue_bw: float = 0.5
    multiplier_embb: float = 1.0
    multiplier_urllc: float = 1.5
    multiplier_mmtc: float = 0.8
    unit_cost_cpu_core: float = 0.2
    unit_cost_cpu_edge: float = 0.4
    unit_cost_bw: float = 0.1
    delay_penalty_rate: float = DEFAULT_DELAY_PENALTY

    def multiplier(self, stype: SliceType) -> float:
        return {
            SliceType.EMBB: self.multiplier_embb,
            SliceType.URLLC: self.multiplier_urllc,
            SliceType.MMTC: self.multiplier_mmtc,
        }[stype]


@dataclass(frozen=True)
class RewardBreakdown:
    revenue: float
    cost: float
    profit: float
    penalty: float
    reward: float
    delay: float
    priority: float

    @classmethod
    def zero(cls) -> "RewardBreakdown":
        return cls(0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0)


def revenue_rate(req: SliceRequest, econ: EconomicParams) -> float:
    """Money earned per window while the request is being served."""
    return econ.multiplier(req.stype) * (
        econ.unit_revenue_cpu * req.total_cpu() + econ.unit_revenue_bw * req.total_bw()
    )


def cost_rate(placement: Placement, sn: SubstrateNetwork, econ: EconomicParams) -> float:
    """Operational cost per window of a placement.

    CPU costs depend on the hosting node's region; bandwidth is charged once
    per substrate link a virtual link crosses, so longer paths cost more.
    """
    total = 0.0
    for node_id, cpu in placement.cpu_per_node.items():
        unit = (
            econ.unit_cost_cpu_edge
            if sn.nodes[node_id].region is NodeRegion.EDGE
            else econ.unit_cost_cpu_core
        )
        total += unit * cpu
    total += econ.unit_cost_bw * sum(placement.bw_per_link.values())
    return total


def slice_reward(
    req: SliceRequest,
    placement: Placement | None,
    delay: float,
    priority: float,
    sn: SubstrateNetwork,
    econ: EconomicParams,
) -> RewardBreakdown:
    """Full per-request breakdown; a rejected request (placement None) is all zeros."""
    if placement is None:
        return RewardBreakdown.zero()
    rev = revenue_rate(req, econ)
    cost = cost_rate(placement, sn, econ)
    profit = (rev - cost) * req.operational_time
    penalty = econ.delay_penalty_rate * priority * delay
    return RewardBreakdown(
        revenue=rev,
        cost=cost,
        profit=profit,
        penalty=penalty,
        reward=profit - penalty,
        delay=delay,
        priority=priority,
    )


def max_profit(sn: SubstrateNetwork, horizon: float, econ: EconomicParams) -> float:
    """Upper bound on profit over ``horizon``: every resource fully sold at the
    best per-type margin, with loss-making margins clamped to zero.

    The CPU cost is blended across regions by capacity share because a full
    substrate necessarily uses both core and edge nodes.
    """
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    total_cpu = sn.total_cpu()
    core_cpu = sum(n.cpu_capacity for n in sn.nodes if n.region is NodeRegion.CORE)
    edge_cpu = total_cpu - core_cpu
    if total_cpu > 0:
        blended_cpu_cost = (
            econ.unit_cost_cpu_core * core_cpu + econ.unit_cost_cpu_edge * edge_cpu
        ) / total_cpu
    else:
        blended_cpu_cost = 0.0
    multipliers = [econ.multiplier(st) for st in SliceType]
    cpu_margin = max(0.0, max(m * econ.unit_revenue_cpu - blended_cpu_cost for m in multipliers))
    bw_margin = max(0.0, max(m * econ.unit_revenue_bw - econ.unit_cost_bw for m in multipliers))
    return horizon * (cpu_margin * total_cpu + bw_margin * sn.total_bw())


def window_reward(
    breakdowns: Iterable[RewardBreakdown],
    sn: SubstrateNetwork,
    horizon: float,
    econ: EconomicParams,
) -> float:
    """Sum of per-request rewards normalized by the full-utilization bound."""
    bound = max_profit(sn, horizon, econ)
    if bound <= 0:
        raise DegenerateEconomics("max_profit is zero; no slice type is profitable")
    return math.fsum(b.reward for b in breakdowns) / bound
