"""Experiment spec files: INI-style key/value sections.

Every key is optional and falls back to the built-in defaults, so a minimal
spec can be just a [experiment] section with seeds. load_spec reports
unparseable values with their section and key; validate_spec checks the
semantic invariants without running anything.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, replace

from .engine import (
    MODES,
    PENALTY_PRIORITY_MODES,
    SimulationConfig,
    SubstrateParams,
    TrafficParams,
)
from .policy import AgentParams
from .reward import EconomicParams
from .slicegen import DemandConfig, TypeDemand
from .substrate import CapacityProfile


class SpecError(ValueError):
    def __init__(self, diagnostics: list[str]):
        super().__init__("; ".join(diagnostics))
        self.diagnostics = diagnostics


@dataclass(frozen=True)
class ExperimentSpec:
    sim: SimulationConfig = SimulationConfig()
    seeds: tuple[int, ...] = (1,)
    output_dir: str = "out"
    comparison: bool = True
    mode: str = "depsac"  # used when comparison is off


KNOWN_SECTIONS = {
    "experiment", "simulation", "substrate", "traffic", "economics", "agent",
}


class _Reader:
    """Typed access into a ConfigParser, accumulating diagnostics."""

    def __init__(self, parser: configparser.ConfigParser):
        self.parser = parser
        self.diagnostics: list[str] = []
        self.seen: set[tuple[str, str]] = set()

    def _raw(self, section: str, key: str) -> str | None:
        self.seen.add((section, key))
        if self.parser.has_option(section, key):
            return self.parser.get(section, key)
        return None

    def get(self, section: str, key: str, cast, default):
        raw = self._raw(section, key)
        if raw is None:
            return default
        try:
            return cast(raw)
        except (TypeError, ValueError):
            self.diagnostics.append(f"{section}.{key}: cannot parse {raw!r}")
            return default

    def check_unknown(self) -> None:
        for section in self.parser.sections():
            if section not in KNOWN_SECTIONS:
                self.diagnostics.append(f"{section}: unknown section")
                continue
            for key in self.parser.options(section):
                if (section, key) not in self.seen:
                    self.diagnostics.append(f"{section}.{key}: unknown key")


def _bool(raw: str) -> bool:
    lowered = raw.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(raw)


def _int_list(raw: str) -> tuple[int, ...]:
    return tuple(int(tok) for tok in raw.replace(";", ",").split(",") if tok.strip())


def _float_list(raw: str) -> tuple[float, ...]:
    return tuple(float(tok) for tok in raw.replace(";", ",").split(",") if tok.strip())


def _int_pair(raw: str) -> tuple[int, int]:
    values = _int_list(raw)
    if len(values) != 2:
        raise ValueError(raw)
    return values[0], values[1]


def _float_pair(raw: str) -> tuple[float, float]:
    values = _float_list(raw)
    if len(values) != 2:
        raise ValueError(raw)
    return values[0], values[1]


def load_spec(path) -> ExperimentSpec:
    """Parse a spec file; raises SpecError listing every bad value."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise SpecError([f"cannot read spec: {exc}"]) from exc
    except configparser.Error as exc:
        raise SpecError([str(exc).replace("\n", " ")]) from exc

    r = _Reader(parser)
    defaults = ExperimentSpec()
    dsim = defaults.sim

    profile = CapacityProfile(
        core_cpu=r.get("substrate", "core_cpu", int, CapacityProfile.core_cpu),
        edge_cpu=r.get("substrate", "edge_cpu", int, CapacityProfile.edge_cpu),
        link_bw=r.get("substrate", "link_bw", int, CapacityProfile.link_bw),
    )
    substrate = SubstrateParams(
        n_nodes=r.get("substrate", "n_nodes", int, dsim.substrate.n_nodes),
        attach_m=r.get("substrate", "attach_m", int, dsim.substrate.attach_m),
        edge_fraction=r.get("substrate", "edge_fraction", float, dsim.substrate.edge_fraction),
        profile=profile,
    )

    ddem = DemandConfig()
    demands = DemandConfig(
        embb=TypeDemand(
            cpu=r.get("traffic", "embb_cpu", _int_pair, ddem.embb.cpu),
            bw=r.get("traffic", "embb_bw", _int_pair, ddem.embb.bw),
            hold=r.get("traffic", "embb_hold", _float_pair, ddem.embb.hold),
        ),
        urllc=TypeDemand(
            cpu=r.get("traffic", "urllc_cpu", _int_pair, ddem.urllc.cpu),
            bw=r.get("traffic", "urllc_bw", _int_pair, ddem.urllc.bw),
            hold=r.get("traffic", "urllc_hold", _float_pair, ddem.urllc.hold),
        ),
        mmtc=TypeDemand(
            cpu=r.get("traffic", "mmtc_cpu", _int_pair, ddem.mmtc.cpu),
            bw=r.get("traffic", "mmtc_bw", _int_pair, ddem.mmtc.bw),
            hold=r.get("traffic", "mmtc_hold", _float_pair, ddem.mmtc.hold),
        ),
        default_max_hops=r.get("traffic", "default_max_hops", int, ddem.default_max_hops),
        urllc_up_max_hops=r.get("traffic", "urllc_up_max_hops", int, ddem.urllc_up_max_hops),
    )
    mix = r.get("traffic", "mix", _float_list, dsim.traffic.mix)
    traffic = TrafficParams(
        rate=r.get("traffic", "rate", float, dsim.traffic.rate),
        mix=tuple(mix),  # length validated later
        demands=demands,
    )

    decon = EconomicParams()
    economics = EconomicParams(
        unit_revenue_cpu=r.get("economics", "unit_revenue_cpu", float, decon.unit_revenue_cpu),
        unit_revenue_bw=r.get("economics", "unit_revenue_bw", float, decon.unit_revenue_bw),
        multiplier_embb=r.get("economics", "multiplier_embb", float, decon.multiplier_embb),
        multiplier_urllc=r.get("economics", "multiplier_urllc", float, decon.multiplier_urllc),
        multiplier_mmtc=r.get("economics", "multiplier_mmtc", float, decon.multiplier_mmtc),
        unit_cost_cpu_core=r.get("economics", "unit_cost_cpu_core", float, decon.unit_cost_cpu_core),
        unit_cost_cpu_edge=r.get("economics", "unit_cost_cpu_edge", float, decon.unit_cost_cpu_edge),
        unit_cost_bw=r.get("economics", "unit_cost_bw", float, decon.unit_cost_bw),
        delay_penalty_rate=r.get("economics", "delay_penalty", float, decon.delay_penalty_rate),
    )

    dagent = AgentParams()
    agent = AgentParams(
        hidden=r.get("agent", "hidden", _int_list, dagent.hidden),
        learning_rate=r.get("agent", "learning_rate", float, dagent.learning_rate),
        discount=r.get("agent", "discount", float, dagent.discount),
        replay_capacity=r.get("agent", "replay_capacity", int, dagent.replay_capacity),
        batch_size=r.get("agent", "batch_size", int, dagent.batch_size),
        sync_every=r.get("agent", "sync_every", int, dagent.sync_every),
        epsilon=r.get("agent", "epsilon", float, dagent.epsilon),
        epsilon_min=r.get("agent", "epsilon_min", float, dagent.epsilon_min),
        epsilon_decay=r.get("agent", "epsilon_decay", float, dagent.epsilon_decay),
        temperature=r.get("agent", "temperature", float, dagent.temperature),
        action_step=r.get("agent", "action_step", int, dagent.action_step),
        max_weight=r.get("agent", "max_weight", int, dagent.max_weight),
        train_steps_per_window=r.get("agent", "train_steps_per_window", int, dagent.train_steps_per_window),
        q_weighted_boltzmann=r.get("agent", "q_weighted_boltzmann", _bool, dagent.q_weighted_boltzmann),
    )

    sim = SimulationConfig(
        substrate=substrate,
        traffic=traffic,
        economics=economics,
        agent=agent,
        window_length=r.get("simulation", "window_length", float, dsim.window_length),
        service_time=r.get("simulation", "service_time", float, dsim.service_time),
        n_windows=r.get("simulation", "n_windows", int, dsim.n_windows),
        penalty_priority=r.get("simulation", "penalty_priority", str, dsim.penalty_priority),
        check_conservation=r.get("simulation", "check_conservation", _bool, dsim.check_conservation),
    )
    spec = ExperimentSpec(
        sim=sim,
        seeds=r.get("experiment", "seeds", _int_list, defaults.seeds),
        output_dir=r.get("experiment", "output_dir", str, defaults.output_dir),
        comparison=r.get("experiment", "comparison", _bool, defaults.comparison),
        mode=r.get("experiment", "mode", str, defaults.mode).lower(),
    )
    r.check_unknown()
    if r.diagnostics:
        raise SpecError(r.diagnostics)
    return spec


def validate_spec(spec: ExperimentSpec) -> list[str]:
    """All semantic violations in the spec, empty when runnable."""
    diags: list[str] = []
    sim = spec.sim

    if not spec.seeds:
        diags.append("experiment.seeds: at least one seed required")
    if spec.mode not in MODES:
        diags.append(f"experiment.mode: must be one of {MODES}")

    if sim.n_windows < 1:
        diags.append("simulation.n_windows: must be >= 1")
    if sim.window_length <= 0:
        diags.append("simulation.window_length: must be positive")
    if sim.service_time < 0:
        diags.append("simulation.service_time: must be >= 0")
    if sim.penalty_priority not in PENALTY_PRIORITY_MODES:
        diags.append(f"simulation.penalty_priority: must be one of {PENALTY_PRIORITY_MODES}")

    sub = sim.substrate
    if sub.attach_m < 1:
        diags.append("substrate.attach_m: must be >= 1")
    if sub.n_nodes < sub.attach_m + 1:
        diags.append("substrate.n_nodes: must be >= attach_m + 1")
    if not 0.0 <= sub.edge_fraction <= 1.0:
        diags.append("substrate.edge_fraction: must be in [0, 1]")
    for name, value in (
        ("core_cpu", sub.profile.core_cpu),
        ("edge_cpu", sub.profile.edge_cpu),
        ("link_bw", sub.profile.link_bw),
    ):
        if value < 0:
            diags.append(f"substrate.{name}: must be >= 0")

    traffic = sim.traffic
    if traffic.rate <= 0:
        diags.append("traffic.rate: must be positive")
    if len(traffic.mix) != 3:
        diags.append("traffic.mix: needs exactly three probabilities (eMBB, URLLC, mMTC)")
    else:
        if any(p < 0 for p in traffic.mix):
            diags.append("traffic.mix: probabilities must be >= 0")
        if abs(sum(traffic.mix) - 1.0) > 1e-9:
            diags.append(f"traffic.mix: must sum to 1, got {sum(traffic.mix)!r}")
    for tname in ("embb", "urllc", "mmtc"):
        tdem: TypeDemand = getattr(traffic.demands, tname)
        if tdem.cpu[0] < 1 or tdem.cpu[0] > tdem.cpu[1]:
            diags.append(f"traffic.{tname}_cpu: need 1 <= lo <= hi")
        if tdem.bw[0] < 1 or tdem.bw[0] > tdem.bw[1]:
            diags.append(f"traffic.{tname}_bw: need 1 <= lo <= hi")
        if tdem.hold[0] <= 0 or tdem.hold[0] > tdem.hold[1]:
            diags.append(f"traffic.{tname}_hold: need 0 < lo <= hi")
    if traffic.demands.default_max_hops < 1:
        diags.append("traffic.default_max_hops: must be >= 1")
    if traffic.demands.urllc_up_max_hops < 1:
        diags.append("traffic.urllc_up_max_hops: must be >= 1")

    econ = sim.economics
    for name in (
        "unit_revenue_cpu", "unit_revenue_bw", "multiplier_embb", "multiplier_urllc",
        "multiplier_mmtc", "unit_cost_cpu_core", "unit_cost_cpu_edge", "unit_cost_bw",
        "delay_penalty_rate",
    ):
        if getattr(econ, name) < 0:
            diags.append(f"economics.{name}: must be >= 0")
    if _degenerate_economics(sub, econ):
        diags.append("economics: no slice type is profitable; full-utilization profit is zero")

    agent = sim.agent
    if not agent.hidden or any(h < 1 for h in agent.hidden):
        diags.append("agent.hidden: need at least one positive layer width")
    if agent.learning_rate <= 0:
        diags.append("agent.learning_rate: must be positive")
    if not 0.0 <= agent.discount < 1.0:
        diags.append("agent.discount: must be in [0, 1)")
    if agent.batch_size < 1:
        diags.append("agent.batch_size: must be >= 1")
    if agent.replay_capacity < agent.batch_size:
        diags.append("agent.replay_capacity: must be >= batch_size")
    if agent.sync_every < 1:
        diags.append("agent.sync_every: must be >= 1")
    if not 0.0 <= agent.epsilon <= 1.0:
        diags.append("agent.epsilon: must be in [0, 1]")
    if not 0.0 <= agent.epsilon_min <= agent.epsilon:
        diags.append("agent.epsilon_min: must be in [0, epsilon]")
    if not 0.0 < agent.epsilon_decay <= 1.0:
        diags.append("agent.epsilon_decay: must be in (0, 1]")
    if agent.temperature <= 0:
        diags.append("agent.temperature: temperature must be positive")
    if agent.action_step < 1 or agent.max_weight % agent.action_step != 0:
        diags.append("agent.action_step: must be >= 1 and divide max_weight")
    if agent.max_weight < 1:
        diags.append("agent.max_weight: must be >= 1")
    if agent.train_steps_per_window < 0:
        diags.append("agent.train_steps_per_window: must be >= 0")

    return diags


def _degenerate_economics(sub: SubstrateParams, econ: EconomicParams) -> bool:
    n_edge = int(sub.edge_fraction * sub.n_nodes + 0.5)
    n_core = sub.n_nodes - n_edge
    total_cpu = n_core * sub.profile.core_cpu + n_edge * sub.profile.edge_cpu
    if total_cpu > 0:
        blended = (
            econ.unit_cost_cpu_core * n_core * sub.profile.core_cpu
            + econ.unit_cost_cpu_edge * n_edge * sub.profile.edge_cpu
        ) / total_cpu
    else:
        blended = 0.0
    mults = (econ.multiplier_embb, econ.multiplier_urllc, econ.multiplier_mmtc)
    cpu_margin = max(m * econ.unit_revenue_cpu - blended for m in mults)
    bw_margin = max(m * econ.unit_revenue_bw - econ.unit_cost_bw for m in mults)
    has_cpu = total_cpu > 0 and cpu_margin > 0
    has_bw = sub.profile.link_bw > 0 and bw_margin > 0
    return not (has_cpu or has_bw)
