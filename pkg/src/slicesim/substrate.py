"""Substrate network model.

The physical infrastructure is a connected weighted undirected graph of
compute nodes (CPU capacity) and links (bandwidth capacity). Availability is
tracked separately from capacity so placements can be applied and released
exactly; all resource amounts are integers, which keeps conservation checks
and allocate/release round-trips bit-exact.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Mapping, Sequence

import numpy as np


class NodeRegion(Enum):
    CORE = "core"
    EDGE = "edge"


class ParameterError(ValueError):
    """Invalid generation or lookup parameters."""


class InfeasiblePlacement(RuntimeError):
    """An allocation was submitted that does not fit the current availability.

    The allocator is supposed to submit only feasible placements, so raising
    this signals a mapping-logic bug rather than a normal rejection.
    """


class DoubleRelease(RuntimeError):
    """A release would push availability above capacity (lifecycle bug)."""


@dataclass
class SubstrateNode:
    id: int
    region: NodeRegion
    cpu_capacity: int
    cpu_available: int


@dataclass
class SubstrateLink:
    id: int
    u: int
    v: int
    bw_capacity: int
    bw_available: int

    def other_end(self, node_id: int) -> int:
        return self.v if node_id == self.u else self.u


@dataclass(frozen=True)
class CapacityProfile:
    core_cpu: int = 100
    edge_cpu: int = 50
    link_bw: int = 100


class SubstrateNetwork:
    """Node/link store with fixed ordering and per-node adjacency lists.

    The node and link orderings never change after construction; state
    vectors and CSV output rely on that.
    """

    def __init__(self, nodes: Sequence[SubstrateNode], links: Sequence[SubstrateLink]):
        self.nodes: list[SubstrateNode] = list(nodes)
        self.links: list[SubstrateLink] = list(links)
        self.adjacency: list[list[int]] = [[] for _ in self.nodes]
        self._link_ids: dict[tuple[int, int], int] = {}
        for link in self.links:
            if link.u == link.v:
                raise ParameterError(f"self-loop on node {link.u}")
            key = (min(link.u, link.v), max(link.u, link.v))
            if key in self._link_ids:
                raise ParameterError(f"duplicate link {key}")
            self._link_ids[key] = link.id
            self.adjacency[link.u].append(link.id)
            self.adjacency[link.v].append(link.id)
        for neighbors in self.adjacency:
            neighbors.sort()

    def link_between(self, u: int, v: int) -> int | None:
        return self._link_ids.get((min(u, v), max(u, v)))

    def total_cpu(self) -> int:
        return sum(n.cpu_capacity for n in self.nodes)

    def total_bw(self) -> int:
        return sum(l.bw_capacity for l in self.links)

    def availability(self) -> tuple[tuple[int, ...], tuple[int, ...]]:
        """Snapshot of (cpu_available per node, bw_available per link)."""
        return (
            tuple(n.cpu_available for n in self.nodes),
            tuple(l.bw_available for l in self.links),
        )

    def edge_list(self) -> list[tuple[int, int, int]]:
        return [(l.u, l.v, l.bw_capacity) for l in self.links]


def generate(
    n_nodes: int,
    attach_m: int,
    edge_fraction: float = 0.5,
    profile: CapacityProfile = CapacityProfile(),
    seed: int = 0,
) -> SubstrateNetwork:
    """Grow a scale-free substrate by preferential attachment.

    Construction starts from a complete graph on ``attach_m`` seed nodes;
    each further node attaches to ``attach_m`` distinct existing nodes chosen
    with probability proportional to degree, so the result is always
    connected and has attach_m*(n-attach_m) + C(attach_m,2) links. The
    ``edge_fraction`` lowest-degree nodes become edge nodes (low CPU), the
    rest core nodes (high CPU).
    """
    if attach_m < 1:
        raise ParameterError("attach_m must be >= 1")
    if n_nodes < attach_m + 1:
        raise ParameterError("n_nodes must be >= attach_m + 1")
    if not 0.0 <= edge_fraction <= 1.0:
        raise ParameterError("edge_fraction must be in [0, 1]")

    rng = np.random.default_rng(seed)
    edges: list[tuple[int, int]] = []
    degree = [0] * n_nodes

    def add_edge(u: int, v: int) -> None:
        edges.append((min(u, v), max(u, v)))
        degree[u] += 1
        degree[v] += 1

    for u in range(attach_m):
        for v in range(u + 1, attach_m):
            add_edge(u, v)

    # Nodes repeated once per adjacent edge; uniform draws from this list
    # implement degree-proportional attachment.
    repeated: list[int] = []
    for node, deg in enumerate(degree[:attach_m]):
        repeated.extend([node] * deg)
    if attach_m == 1:
        repeated = [0]  # a lone seed node has degree 0 but must be reachable

    for source in range(attach_m, n_nodes):
        targets: set[int] = set()
        while len(targets) < attach_m:
            targets.add(repeated[int(rng.integers(len(repeated)))])
        for target in sorted(targets):
            add_edge(source, target)
            repeated.append(target)
        repeated.extend([source] * attach_m)

    n_edge = int(edge_fraction * n_nodes + 0.5)
    by_degree = sorted(range(n_nodes), key=lambda i: (degree[i], i))
    edge_set = set(by_degree[:n_edge])

    nodes = []
    for i in range(n_nodes):
        region = NodeRegion.EDGE if i in edge_set else NodeRegion.CORE
        cpu = profile.edge_cpu if region is NodeRegion.EDGE else profile.core_cpu
        nodes.append(SubstrateNode(id=i, region=region, cpu_capacity=cpu, cpu_available=cpu))
    links = [
        SubstrateLink(id=k, u=u, v=v, bw_capacity=profile.link_bw, bw_available=profile.link_bw)
        for k, (u, v) in enumerate(edges)
    ]
    return SubstrateNetwork(nodes, links)


def embedding_potential(sn: SubstrateNetwork, node_id: int) -> float:
    """Node rank for placement: available CPU times total adjacent available bandwidth."""
    if not 0 <= node_id < len(sn.nodes):
        raise ParameterError(f"unknown node {node_id}")
    bw = sum(sn.links[lid].bw_available for lid in sn.adjacency[node_id])
    return float(sn.nodes[node_id].cpu_available) * float(bw)


def shortest_feasible_path(
    sn: SubstrateNetwork,
    src: int,
    dst: int,
    bw_demand: int,
    max_hops: int,
    reserved: Mapping[int, int] | None = None,
) -> list[int] | None:
    """Minimum-hop path of links that all carry at least ``bw_demand``.

    ``reserved`` holds extra per-link bandwidth already claimed by the caller
    (used when several virtual links of one request share the substrate).
    Ties between equal-length paths go to the smallest node-id sequence.
    Returns None when no feasible path exists within ``max_hops``.
    """
    if src == dst:
        raise ParameterError("src and dst must differ")
    reserved = reserved or {}

    def usable(lid: int) -> bool:
        return sn.links[lid].bw_available - reserved.get(lid, 0) >= bw_demand

    # Level-synchronous BFS keeping, per node, the lexicographically smallest
    # node sequence that reaches it at the current depth.
    frontier: dict[int, tuple[int, ...]] = {src: (src,)}
    visited = {src}
    for _ in range(max_hops):
        nxt: dict[int, tuple[int, ...]] = {}
        for node in sorted(frontier):
            path = frontier[node]
            for lid in sn.adjacency[node]:
                if not usable(lid):
                    continue
                other = sn.links[lid].other_end(node)
                if other in visited:
                    continue
                cand = path + (other,)
                if other not in nxt or cand < nxt[other]:
                    nxt[other] = cand
        if dst in nxt:
            seq = nxt[dst]
            return [sn.link_between(a, b) for a, b in zip(seq, seq[1:])]  # type: ignore[misc]
        visited.update(nxt)
        frontier = nxt
        if not frontier:
            return None
    return None


def allocate(sn: SubstrateNetwork, placement) -> None:
    """Subtract a placement's aggregated demands from availability.

    Atomic: feasibility of the whole placement is checked first, so a raised
    InfeasiblePlacement leaves the network untouched.
    """
    for node_id, cpu in placement.cpu_per_node.items():
        if sn.nodes[node_id].cpu_available < cpu:
            raise InfeasiblePlacement(
                f"node {node_id}: need {cpu} cpu, have {sn.nodes[node_id].cpu_available}"
            )
    for link_id, bw in placement.bw_per_link.items():
        if sn.links[link_id].bw_available < bw:
            raise InfeasiblePlacement(
                f"link {link_id}: need {bw} bw, have {sn.links[link_id].bw_available}"
            )
    for node_id, cpu in placement.cpu_per_node.items():
        sn.nodes[node_id].cpu_available -= cpu
    for link_id, bw in placement.bw_per_link.items():
        sn.links[link_id].bw_available -= bw


def release(sn: SubstrateNetwork, placement) -> None:
    """Return a previously allocated placement's demands to availability."""
    for node_id, cpu in placement.cpu_per_node.items():
        if sn.nodes[node_id].cpu_available + cpu > sn.nodes[node_id].cpu_capacity:
            raise DoubleRelease(f"node {node_id} would exceed capacity")
    for link_id, bw in placement.bw_per_link.items():
        if sn.links[link_id].bw_available + bw > sn.links[link_id].bw_capacity:
            raise DoubleRelease(f"link {link_id} would exceed capacity")
    for node_id, cpu in placement.cpu_per_node.items():
        sn.nodes[node_id].cpu_available += cpu
    for link_id, bw in placement.bw_per_link.items():
        sn.links[link_id].bw_available += bw


def to_text(sn: SubstrateNetwork) -> str:
    """Plain-text dump: node table then edge list."""
    lines = ["# nodes: id region cpu_capacity"]
    for n in sn.nodes:
        lines.append(f"{n.id} {n.region.value} {n.cpu_capacity}")
    lines.append("# links: node_u node_v bw_capacity")
    for u, v, bw in sn.edge_list():
        lines.append(f"{u} {v} {bw}")
    return "\n".join(lines) + "\n"
