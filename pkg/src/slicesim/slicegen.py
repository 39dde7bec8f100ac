"""Slice request structure and stochastic arrival traces.

A request carries a small VNF graph following the control-plane/user-plane
split (AMF/SMF on the control side, UPF on the user side). Per-type templates
encode the qualitative differences between service classes: URLLC is
lightweight, edge-bound and carries a backup UPF; eMBB is bandwidth heavy;
mMTC runs a second AMF for device density. Arrivals follow a Poisson process.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence

import numpy as np


class SliceType(Enum):
    EMBB = "embb"
    URLLC = "urllc"
    MMTC = "mmtc"


class Plane(Enum):
    CONTROL = "cp"
    USER = "up"


@dataclass(frozen=True)
class VNF:
    id: int
    name: str
    cpu_demand: int
    plane: Plane
    is_backup: bool = False
    protects: int | None = None  # id of the primary VNF this one backs up


@dataclass(frozen=True)
class VirtualLink:
    id: int
    a: int
    b: int
    bw_demand: int
    max_hops: int


@dataclass(frozen=True)
class SliceRequest:
    id: int
    stype: SliceType
    arrival_time: float
    operational_time: float
    vnfs: tuple[VNF, ...]
    vlinks: tuple[VirtualLink, ...]

    def total_cpu(self) -> int:
        return sum(v.cpu_demand for v in self.vnfs)

    def total_bw(self) -> int:
        return sum(l.bw_demand for l in self.vlinks)


@dataclass(frozen=True)
class TypeDemand:
    cpu: tuple[int, int]        # per-VNF CPU range, inclusive
    bw: tuple[int, int]         # per-virtual-link bandwidth range, inclusive
    hold: tuple[float, float]   # operational-time range in windows


@dataclass(frozen=True)
class DemandConfig:
    embb: TypeDemand = TypeDemand(cpu=(4, 8), bw=(8, 16), hold=(20.0, 60.0))
    urllc: TypeDemand = TypeDemand(cpu=(2, 4), bw=(2, 6), hold=(10.0, 40.0))
    mmtc: TypeDemand = TypeDemand(cpu=(2, 5), bw=(1, 4), hold=(30.0, 80.0))
    default_max_hops: int = 4
    urllc_up_max_hops: int = 2

    def for_type(self, stype: SliceType) -> TypeDemand:
        return {SliceType.EMBB: self.embb, SliceType.URLLC: self.urllc, SliceType.MMTC: self.mmtc}[stype]


def build_slice_graph(
    stype: SliceType,
    rng: np.random.Generator,
    demands: DemandConfig = DemandConfig(),
) -> tuple[tuple[VNF, ...], tuple[VirtualLink, ...]]:
    """Instantiate the per-type VNF graph template with sampled demands."""
    spec = demands.for_type(stype)

    def cpu() -> int:
        return int(rng.integers(spec.cpu[0], spec.cpu[1], endpoint=True))

    def bw() -> int:
        return int(rng.integers(spec.bw[0], spec.bw[1], endpoint=True))

    hops = demands.default_max_hops
    up_hops = demands.urllc_up_max_hops if stype is SliceType.URLLC else hops

    vnfs: list[VNF] = []
    vlinks: list[VirtualLink] = []
    if stype is SliceType.MMTC:
        vnfs.append(VNF(0, "AMF", cpu(), Plane.CONTROL))
        vnfs.append(VNF(1, "AMF", cpu(), Plane.CONTROL))
        vnfs.append(VNF(2, "SMF", cpu(), Plane.CONTROL))
        vnfs.append(VNF(3, "UPF", cpu(), Plane.USER))
        vlinks.append(VirtualLink(0, 0, 2, bw(), hops))
        vlinks.append(VirtualLink(1, 1, 2, bw(), hops))
        vlinks.append(VirtualLink(2, 2, 3, bw(), hops))
    else:
        vnfs.append(VNF(0, "AMF", cpu(), Plane.CONTROL))
        vnfs.append(VNF(1, "SMF", cpu(), Plane.CONTROL))
        vnfs.append(VNF(2, "UPF", cpu(), Plane.USER))
        vlinks.append(VirtualLink(0, 0, 1, bw(), hops))
        vlinks.append(VirtualLink(1, 1, 2, bw(), up_hops))
        if stype is SliceType.URLLC:
            vnfs.append(VNF(3, "UPF", cpu(), Plane.USER, is_backup=True, protects=2))
            vlinks.append(VirtualLink(2, 1, 3, bw(), up_hops))
    return tuple(vnfs), tuple(vlinks)


def generate_trace(
    horizon: float,
    rate: float,
    mix: Sequence[float],
    demands: DemandConfig = DemandConfig(),
    seed: int = 0,
) -> list[SliceRequest]:
    """Poisson arrivals over (0, horizon] with types drawn i.i.d. from ``mix``.

    ``mix`` is the (eMBB, URLLC, mMTC) probability vector. The same arguments
    and seed always produce the same trace.
    """
    if rate <= 0:
        raise ValueError("rate must be positive")
    if len(mix) != 3 or any(p < 0 for p in mix) or abs(sum(mix) - 1.0) > 1e-9:
        raise ValueError("mix must be three non-negative probabilities summing to 1")

    rng = np.random.default_rng(seed)
    order = (SliceType.EMBB, SliceType.URLLC, SliceType.MMTC)
    requests: list[SliceRequest] = []
    t = 0.0
    while True:
        gap = float(rng.exponential(1.0 / rate))
        if gap <= 0.0:
            continue
        t += gap
        if t > horizon:
            break
        u = float(rng.random())
        acc = 0.0
        stype = order[-1]
        for candidate, p in zip(order, mix):
            acc += p
            if u < acc:
                stype = candidate
                break
        vnfs, vlinks = build_slice_graph(stype, rng, demands)
        hold = demands.for_type(stype).hold
        operational = float(rng.uniform(hold[0], hold[1]))
        requests.append(
            SliceRequest(
                id=len(requests),
                stype=stype,
                arrival_time=t,
                operational_time=operational,
                vnfs=vnfs,
                vlinks=vlinks,
            )
        )
    return requests


# --- trace file round-trip -------------------------------------------------

TRACE_HEADER = ["id", "stype", "arrival_time", "operational_time", "graph"]


def _graph_to_json(req: SliceRequest) -> str:
    payload = {
        "vnfs": [
            [v.id, v.name, v.cpu_demand, v.plane.value, int(v.is_backup), v.protects]
            for v in req.vnfs
        ],
        "vlinks": [[l.id, l.a, l.b, l.bw_demand, l.max_hops] for l in req.vlinks],
    }
    return json.dumps(payload, separators=(",", ":"))


def write_trace_csv(requests: Iterable[SliceRequest], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRACE_HEADER)
        for req in requests:
            writer.writerow(
                [req.id, req.stype.value, repr(req.arrival_time), repr(req.operational_time), _graph_to_json(req)]
            )


def read_trace_csv(path) -> list[SliceRequest]:
    requests: list[SliceRequest] = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != TRACE_HEADER:
            raise ValueError(f"unexpected trace header: {header}")
        for row in reader:
            payload = json.loads(row[4])
            vnfs = tuple(
                VNF(
                    id=v[0],
                    name=v[1],
                    cpu_demand=v[2],
                    plane=Plane(v[3]),
                    is_backup=bool(v[4]),
                    protects=v[5],
                )
                for v in payload["vnfs"]
            )
            vlinks = tuple(VirtualLink(*l) for l in payload["vlinks"])
            requests.append(
                SliceRequest(
                    id=int(row[0]),
                    stype=SliceType(row[1]),
                    arrival_time=float(row[2]),
                    operational_time=float(row[3]),
                    vnfs=vnfs,
                    vlinks=vlinks,
                )
            )
    return requests
