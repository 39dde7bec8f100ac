"""Discrete-event simulation loop.

Arrivals are batched into fixed-length time windows. The batch collected
during window w is processed at the window boundary (w+1)*window_length: the
agent observes the substrate state, picks a weight triple, the prioritizer
orders the batch, and requests are mapped one by one. Queue position k is
served at boundary + (k+1)*service_time, so ordering has a real delay cost.
Accepted slices hold their resources for their operational time and are
released as simulated time passes their expiry.

Two modes share this loop. "depsac" uses the delay-penalized reward and
Boltzmann exploration; "dsara" is the profit-only baseline with uniform
exploration draws.
"""

from __future__ import annotations

import csv
import heapq
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from . import substrate as subnet
from .allocator import Placement, Rejection, map_request
from .policy import (
    DEFAULT_LEVEL_WEIGHTS,
    AgentParams,
    Experience,
    QPolicy,
    encode_state,
    prioritize,
)
from .reward import EconomicParams, RewardBreakdown, max_profit, slice_reward
from .slicegen import DemandConfig, SliceRequest, SliceType, generate_trace
from .substrate import CapacityProfile, SubstrateNetwork

MODES = ("depsac", "dsara")
PENALTY_PRIORITY_MODES = ("type_level", "action_scaled")

TYPES = (SliceType.EMBB, SliceType.URLLC, SliceType.MMTC)


@dataclass(frozen=True)
class SubstrateParams:
    n_nodes: int = 64
    attach_m: int = 2
    edge_fraction: float = 0.5
    profile: CapacityProfile = CapacityProfile()


@dataclass(frozen=True)
class TrafficParams:
    rate: float = 6.0                      # arrivals per window
    mix: tuple[float, float, float] = (0.4, 0.3, 0.3)  # (eMBB, URLLC, mMTC)
    demands: DemandConfig = DemandConfig()


@dataclass(frozen=True)
class SimulationConfig:
    substrate: SubstrateParams = SubstrateParams()
    traffic: TrafficParams = TrafficParams()
    economics: EconomicParams = EconomicParams()
    agent: AgentParams = AgentParams()
    window_length: float = 1.0
    service_time: float = 0.1              # per queue position, in window units
    n_windows: int = 300
    mode: str = "depsac"
    penalty_priority: str = "type_level"   # "action_scaled" reproduces the weight-scaled penalty
    seed: int = 1
    check_conservation: bool = False


@dataclass
class ActiveSlice:
    nslr_id: int
    placement: Placement
    expiry_time: float


@dataclass
class WindowRecord:
    window_index: int
    normalized_reward: float
    profit: dict[SliceType, float]
    offered: dict[SliceType, int]
    accepted: dict[SliceType, int]
    delay_sum: dict[SliceType, float]    # service-completion delay, accepted requests
    qdelay_sum: dict[SliceType, float]   # queuing delay, accepted requests
    consumption: float

    def profit_total(self) -> float:
        return math.fsum(self.profit.values())

    def offered_total(self) -> int:
        return sum(self.offered.values())

    def accepted_total(self) -> int:
        return sum(self.accepted.values())

    def mean_delay(self, stype: SliceType | None = None) -> float | None:
        return _mean_from(self.delay_sum, self.accepted, stype)

    def mean_qdelay(self, stype: SliceType | None = None) -> float | None:
        return _mean_from(self.qdelay_sum, self.accepted, stype)


def _mean_from(sums: dict, counts: dict, stype: SliceType | None) -> float | None:
    if stype is None:
        total = sum(counts.values())
        return math.fsum(sums.values()) / total if total else None
    return sums[stype] / counts[stype] if counts[stype] else None


@dataclass
class RequestEvent:
    window_index: int
    nslr_id: int
    stype: SliceType
    priority: float
    position: int
    accepted: bool
    reason: str
    qdelay: float


@dataclass
class ExperimentResult:
    records: list[WindowRecord]
    policy: QPolicy
    trace: list[SliceRequest]
    substrate: SubstrateNetwork
    events: list[RequestEvent] = field(default_factory=list)
    breakdowns: list[list[RewardBreakdown]] | None = None

    def acceptance(self, stype: SliceType | None = None) -> float | None:
        offered = sum((r.offered[stype] if stype else r.offered_total()) for r in self.records)
        accepted = sum((r.accepted[stype] if stype else r.accepted_total()) for r in self.records)
        return accepted / offered if offered else None

    def cumulative_profit(self, stype: SliceType | None = None) -> float:
        if stype is None:
            return math.fsum(r.profit_total() for r in self.records)
        return math.fsum(r.profit[stype] for r in self.records)

    def mean_delay(self, stype: SliceType | None = None) -> float | None:
        return self._mean("delay_sum", stype)

    def mean_qdelay(self, stype: SliceType | None = None) -> float | None:
        return self._mean("qdelay_sum", stype)

    def mean_consumption(self) -> float:
        return math.fsum(r.consumption for r in self.records) / len(self.records)

    def _mean(self, attr: str, stype: SliceType | None) -> float | None:
        if stype is None:
            total = sum(r.accepted_total() for r in self.records)
            sums = math.fsum(math.fsum(getattr(r, attr).values()) for r in self.records)
        else:
            total = sum(r.accepted[stype] for r in self.records)
            sums = math.fsum(getattr(r, attr)[stype] for r in self.records)
        return sums / total if total else None


class ConservationError(AssertionError):
    """Allocated resources disagree with the active-slice ledger."""


class Simulation:
    """Owns the substrate, the agent and the active-slice lifecycle."""

    def __init__(
        self,
        config: SimulationConfig,
        sn: SubstrateNetwork,
        agent: QPolicy,
        record_events: bool = False,
        record_breakdowns: bool = False,
    ):
        if config.mode not in MODES:
            raise ValueError(f"unknown mode {config.mode!r}")
        if config.penalty_priority not in PENALTY_PRIORITY_MODES:
            raise ValueError(f"unknown penalty_priority {config.penalty_priority!r}")
        self.config = config
        self.sn = sn
        self.agent = agent
        self.econ = config.economics
        if config.mode == "dsara":
            self.econ = replace(self.econ, delay_penalty_rate=0.0)
        self.max_profit = max_profit(sn, config.window_length, self.econ)
        self._active: list[tuple[float, int, ActiveSlice]] = []
        self._active_seq = 0
        self._alloc_cpu: dict[int, int] = {}
        self._alloc_bw: dict[int, int] = {}
        self.events: list[RequestEvent] = [] if record_events else None  # type: ignore[assignment]
        self.breakdowns: list[list[RewardBreakdown]] | None = [] if record_breakdowns else None

    # -- lifecycle ------------------------------------------------------------

    def release_expired(self, now: float) -> None:
        while self._active and self._active[0][0] <= now:
            _, _, slot = heapq.heappop(self._active)
            subnet.release(self.sn, slot.placement)
            for node_id, cpu in slot.placement.cpu_per_node.items():
                self._alloc_cpu[node_id] -= cpu
            for link_id, bw in slot.placement.bw_per_link.items():
                self._alloc_bw[link_id] -= bw
            self._check_conservation()

    def drain(self) -> None:
        """Release everything still active (end-of-experiment settling)."""
        self.release_expired(math.inf)

    def _admit(self, placement: Placement, expiry: float) -> None:
        subnet.allocate(self.sn, placement)
        slot = ActiveSlice(placement.nslr_id, placement, expiry)
        heapq.heappush(self._active, (expiry, self._active_seq, slot))
        self._active_seq += 1
        for node_id, cpu in placement.cpu_per_node.items():
            self._alloc_cpu[node_id] = self._alloc_cpu.get(node_id, 0) + cpu
        for link_id, bw in placement.bw_per_link.items():
            self._alloc_bw[link_id] = self._alloc_bw.get(link_id, 0) + bw
        self._check_conservation()

    def _check_conservation(self) -> None:
        if not self.config.check_conservation:
            return
        for node in self.sn.nodes:
            if node.cpu_capacity - node.cpu_available != self._alloc_cpu.get(node.id, 0):
                raise ConservationError(f"node {node.id} cpu ledger mismatch")
            if not 0 <= node.cpu_available <= node.cpu_capacity:
                raise ConservationError(f"node {node.id} cpu out of bounds")
        for link in self.sn.links:
            if link.bw_capacity - link.bw_available != self._alloc_bw.get(link.id, 0):
                raise ConservationError(f"link {link.id} bw ledger mismatch")
            if not 0 <= link.bw_available <= link.bw_capacity:
                raise ConservationError(f"link {link.id} bw out of bounds")

    # -- main loop ------------------------------------------------------------

    def run_window(
        self,
        window_index: int,
        requests: Sequence[SliceRequest],
        pinned_action: int | None = None,
    ) -> WindowRecord:
        cfg = self.config
        t_proc = (window_index + 1) * cfg.window_length
        self.release_expired(t_proc)

        state = encode_state(self.sn)
        action_index = pinned_action if pinned_action is not None else self.agent.select(state)
        action = self.agent.actions[action_index]
        ordered = prioritize(requests, action)

        offered = {st: 0 for st in TYPES}
        accepted = {st: 0 for st in TYPES}
        profit = {st: 0.0 for st in TYPES}
        delay_sum = {st: 0.0 for st in TYPES}
        qdelay_sum = {st: 0.0 for st in TYPES}
        breakdowns: list[RewardBreakdown] = []

        for position, (req, queue_priority) in enumerate(ordered):
            offered[req.stype] += 1
            t_svc = t_proc + (position + 1) * cfg.service_time
            self.release_expired(t_svc)
            outcome = map_request(self.sn, req)
            if isinstance(outcome, Rejection):
                breakdowns.append(RewardBreakdown.zero())
                if self.events is not None:
                    self.events.append(
                        RequestEvent(window_index, req.id, req.stype, queue_priority,
                                     position, False, outcome.reason.value, 0.0)
                    )
                continue
            self._admit(outcome, t_svc + req.operational_time)
            qdelay = t_svc - req.arrival_time
            if cfg.penalty_priority == "type_level":
                reward_priority = float(DEFAULT_LEVEL_WEIGHTS[req.stype])
            else:
                reward_priority = queue_priority
            breakdown = slice_reward(req, outcome, qdelay, reward_priority, self.sn, self.econ)
            breakdowns.append(breakdown)
            accepted[req.stype] += 1
            profit[req.stype] += breakdown.profit
            qdelay_sum[req.stype] += qdelay
            delay_sum[req.stype] += qdelay + req.operational_time
            if self.events is not None:
                self.events.append(
                    RequestEvent(window_index, req.id, req.stype, queue_priority,
                                 position, True, "", qdelay)
                )

        normalized = math.fsum(b.reward for b in breakdowns) / self.max_profit
        record = WindowRecord(
            window_index=window_index,
            normalized_reward=normalized,
            profit=profit,
            offered=offered,
            accepted=accepted,
            delay_sum=delay_sum,
            qdelay_sum=qdelay_sum,
            consumption=compute_consumption(self.sn),
        )
        if self.breakdowns is not None:
            self.breakdowns.append(breakdowns)

        next_state = encode_state(self.sn)
        self.agent.observe(Experience(state, action_index, normalized, next_state))
        self.agent.learn()
        self.agent.end_window()
        return record


def bucket_by_window(
    trace: Iterable[SliceRequest], window_length: float, n_windows: int
) -> list[list[SliceRequest]]:
    """Batch arrivals: window w holds arrivals in (w*L, (w+1)*L]."""
    windows: list[list[SliceRequest]] = [[] for _ in range(n_windows)]
    for req in trace:
        idx = int(math.ceil(req.arrival_time / window_length)) - 1
        if idx < 0 or idx >= n_windows:
            continue
        windows[idx].append(req)
    return windows


def build_agent(config: SimulationConfig, state_dim: int) -> QPolicy:
    _, agent_seed, _ = _child_seeds(config.seed)
    return QPolicy(
        state_dim,
        params=config.agent,
        rng=np.random.default_rng(agent_seed),
        explore="uniform" if config.mode == "dsara" else "boltzmann",
    )


def _child_seeds(seed: int) -> tuple[int, int, int]:
    """Independent streams for trace, agent init and anything auxiliary."""
    trace_ss, agent_ss, aux_ss = np.random.SeedSequence(seed).spawn(3)
    return (
        int(trace_ss.generate_state(1)[0]),
        int(agent_ss.generate_state(1)[0]),
        int(aux_ss.generate_state(1)[0]),
    )


def run_experiment(
    config: SimulationConfig,
    trace: Sequence[SliceRequest] | None = None,
    pinned_actions: Sequence[int] | None = None,
    record_events: bool = False,
    record_breakdowns: bool = False,
) -> ExperimentResult:
    """Run the full windowed loop over a generated or supplied trace.

    The same config and seed always produce identical results; a shared trace
    can be passed in so both modes see identical traffic.
    """
    sn = subnet.generate(
        config.substrate.n_nodes,
        config.substrate.attach_m,
        config.substrate.edge_fraction,
        config.substrate.profile,
        seed=config.seed,
    )
    trace_seed, _, _ = _child_seeds(config.seed)
    if trace is None:
        trace = generate_trace(
            horizon=config.n_windows * config.window_length,
            rate=config.traffic.rate,
            mix=config.traffic.mix,
            demands=config.traffic.demands,
            seed=trace_seed,
        )
    agent = build_agent(config, state_dim=len(sn.nodes) + len(sn.links))
    sim = Simulation(config, sn, agent,
                     record_events=record_events, record_breakdowns=record_breakdowns)

    windows = bucket_by_window(trace, config.window_length, config.n_windows)
    records = []
    for w in range(config.n_windows):
        pinned = pinned_actions[w] if pinned_actions is not None else None
        records.append(sim.run_window(w, windows[w], pinned_action=pinned))
    return ExperimentResult(
        records=records,
        policy=agent,
        trace=list(trace),
        substrate=sn,
        events=sim.events if sim.events is not None else [],
        breakdowns=sim.breakdowns,
    )


# -- metrics ------------------------------------------------------------------


def compute_consumption(sn: SubstrateNetwork) -> float:
    """Mean of the allocated CPU and bandwidth fractions, in [0, 1]."""
    total_cpu = sn.total_cpu()
    total_bw = sn.total_bw()
    used_cpu = sum(n.cpu_capacity - n.cpu_available for n in sn.nodes)
    used_bw = sum(l.bw_capacity - l.bw_available for l in sn.links)
    cpu_frac = used_cpu / total_cpu if total_cpu else 0.0
    bw_frac = used_bw / total_bw if total_bw else 0.0
    return (cpu_frac + bw_frac) / 2.0


def compute_acceptance(
    records: Sequence[WindowRecord], stype: SliceType | None = None
) -> float | None:
    """Cumulative accepted/offered ratio over a record range."""
    offered = sum((r.offered[stype] if stype else r.offered_total()) for r in records)
    accepted = sum((r.accepted[stype] if stype else r.accepted_total()) for r in records)
    return accepted / offered if offered else None


def compute_delay_metric(delays: Iterable[float]) -> float | None:
    values = list(delays)
    return math.fsum(values) / len(values) if values else None


# -- CSV output ----------------------------------------------------------------

WINDOWS_CSV_HEADER = (
    ["window_index", "R"]
    + [f"profit_{s}" for s in ("total", "embb", "urllc", "mmtc")]
    + [f"offered_{s}" for s in ("total", "embb", "urllc", "mmtc")]
    + [f"accepted_{s}" for s in ("total", "embb", "urllc", "mmtc")]
    + [f"delay_{s}" for s in ("total", "embb", "urllc", "mmtc")]
    + [f"qdelay_{s}" for s in ("total", "embb", "urllc", "mmtc")]
    + ["consumption"]
)


def _fmt(value: float | int | None) -> str:
    return "" if value is None else repr(value)


def write_windows_csv(records: Iterable[WindowRecord], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(WINDOWS_CSV_HEADER)
        for r in records:
            row = [r.window_index, _fmt(r.normalized_reward)]
            row += [_fmt(r.profit_total())] + [_fmt(r.profit[st]) for st in TYPES]
            row += [r.offered_total()] + [r.offered[st] for st in TYPES]
            row += [r.accepted_total()] + [r.accepted[st] for st in TYPES]
            row += [_fmt(r.mean_delay())] + [_fmt(r.mean_delay(st)) for st in TYPES]
            row += [_fmt(r.mean_qdelay())] + [_fmt(r.mean_qdelay(st)) for st in TYPES]
            row.append(_fmt(r.consumption))
            writer.writerow(row)


def write_events_log(events: Iterable[RequestEvent], path) -> None:
    with open(path, "w") as fh:
        for e in events:
            status = "accept" if e.accepted else f"reject:{e.reason}"
            fh.write(
                f"window={e.window_index} nslr={e.nslr_id} type={e.stype.value} "
                f"priority={e.priority!r} position={e.position} {status} qdelay={e.qdelay!r}\n"
            )
