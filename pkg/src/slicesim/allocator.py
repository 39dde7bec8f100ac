"""Resource allocation: map a slice request onto the substrate or reject it.

Node mapping is greedy without backtracking: VNFs are placed in descending
CPU order onto the feasible node with the highest embedding potential. Link
mapping then routes each virtual link along the shortest feasible path. Both
phases are dry runs against a substrate snapshot; the caller applies the
returned placement with substrate.allocate.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from .slicegen import Plane, SliceRequest, SliceType
from .substrate import NodeRegion, SubstrateNetwork, embedding_potential, shortest_feasible_path


class RejectReason(Enum):
    NODE_MAPPING = "node_mapping"
    ANTI_AFFINITY = "anti_affinity"
    LINK_MAPPING = "link_mapping"


@dataclass(frozen=True)
class Rejection:
    reason: RejectReason
    element: int  # id of the first VNF or virtual link that could not be mapped


@dataclass
class Placement:
    nslr_id: int
    vnf_map: dict[int, int] = field(default_factory=dict)          # vnf id -> node id
    link_map: dict[int, tuple[int, ...]] = field(default_factory=dict)  # vlink id -> link path
    cpu_per_node: dict[int, int] = field(default_factory=dict)
    bw_per_link: dict[int, int] = field(default_factory=dict)


def _region_ok(vnf, stype: SliceType, region: NodeRegion) -> bool:
    if vnf.plane is Plane.CONTROL:
        return region is NodeRegion.CORE
    if stype is SliceType.URLLC:
        return region is NodeRegion.EDGE
    return True


def _conflict_nodes(vnf, req: SliceRequest, placement: Placement) -> set[int]:
    """Nodes excluded by backup/primary anti-affinity, either direction."""
    conflicts: set[int] = set()
    if vnf.protects is not None and vnf.protects in placement.vnf_map:
        conflicts.add(placement.vnf_map[vnf.protects])
    for other in req.vnfs:
        if other.protects == vnf.id and other.id in placement.vnf_map:
            conflicts.add(placement.vnf_map[other.id])
    return conflicts


def map_request(sn: SubstrateNetwork, req: SliceRequest) -> Placement | Rejection:
    """Two-phase greedy embedding; never mutates ``sn``.

    Phase 1 places VNFs (largest CPU demand first) on the highest-potential
    node that satisfies region rules, anti-affinity and the CPU still left
    after earlier VNFs of this same request. Phase 2 routes each virtual link
    within its hop budget over links with enough bandwidth left. The first
    element that cannot be mapped aborts the whole request.
    """
    placement = Placement(nslr_id=req.id)

    order = sorted(req.vnfs, key=lambda v: (-v.cpu_demand, v.id))
    for vnf in order:
        conflicts = _conflict_nodes(vnf, req, placement)
        best = None
        best_rank = None
        blocked_only_by_affinity = False
        for node in sn.nodes:
            if not _region_ok(vnf, req.stype, node.region):
                continue
            residual = node.cpu_available - placement.cpu_per_node.get(node.id, 0)
            if residual < vnf.cpu_demand:
                continue
            if node.id in conflicts:
                blocked_only_by_affinity = True
                continue
            rank = (-embedding_potential(sn, node.id), node.id)
            if best_rank is None or rank < best_rank:
                best_rank = rank
                best = node
        if best is None:
            reason = RejectReason.ANTI_AFFINITY if blocked_only_by_affinity else RejectReason.NODE_MAPPING
            return Rejection(reason, vnf.id)
        placement.vnf_map[vnf.id] = best.id
        placement.cpu_per_node[best.id] = placement.cpu_per_node.get(best.id, 0) + vnf.cpu_demand

    for vlink in req.vlinks:
        src = placement.vnf_map[vlink.a]
        dst = placement.vnf_map[vlink.b]
        if src == dst:
            placement.link_map[vlink.id] = ()
            continue
        path = shortest_feasible_path(
            sn, src, dst, vlink.bw_demand, vlink.max_hops, reserved=placement.bw_per_link
        )
        if path is None:
            return Rejection(RejectReason.LINK_MAPPING, vlink.id)
        placement.link_map[vlink.id] = tuple(path)
        for lid in path:
            placement.bw_per_link[lid] = placement.bw_per_link.get(lid, 0) + vlink.bw_demand

    return placement


def verify_placement(sn: SubstrateNetwork, req: SliceRequest, placement: Placement) -> bool:
    """Check every placement invariant against the request and ``sn``.

    Used as the test oracle and as a debug assertion: structure (all elements
    mapped, paths actually connect the mapped endpoints), constraints (region,
    anti-affinity, hop budgets), aggregation consistency and feasibility
    against current availability.
    """
    vnf_by_id = {v.id: v for v in req.vnfs}
    if set(placement.vnf_map) != set(vnf_by_id):
        return False
    if set(placement.link_map) != {l.id for l in req.vlinks}:
        return False

    cpu: dict[int, int] = {}
    for vnf_id, node_id in placement.vnf_map.items():
        if not 0 <= node_id < len(sn.nodes):
            return False
        vnf = vnf_by_id[vnf_id]
        if not _region_ok(vnf, req.stype, sn.nodes[node_id].region):
            return False
        if vnf.protects is not None and placement.vnf_map.get(vnf.protects) == node_id:
            return False
        cpu[node_id] = cpu.get(node_id, 0) + vnf.cpu_demand
    if cpu != placement.cpu_per_node:
        return False

    bw: dict[int, int] = {}
    for vlink in req.vlinks:
        path = placement.link_map[vlink.id]
        src = placement.vnf_map[vlink.a]
        dst = placement.vnf_map[vlink.b]
        if src == dst:
            if path != ():
                return False
            continue
        if not path or len(path) > vlink.max_hops:
            return False
        at = src
        for lid in path:
            if not 0 <= lid < len(sn.links):
                return False
            link = sn.links[lid]
            if at not in (link.u, link.v):
                return False
            at = link.other_end(at)
            bw[lid] = bw.get(lid, 0) + vlink.bw_demand
        if at != dst:
            return False
    if bw != placement.bw_per_link:
        return False

    for node_id, amount in placement.cpu_per_node.items():
        if amount > sn.nodes[node_id].cpu_available:
            return False
    for link_id, amount in placement.bw_per_link.items():
        if amount > sn.links[link_id].bw_available:
            return False
    return True
