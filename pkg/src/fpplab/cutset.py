"""Minimal cutsets, their capacities, and their set-valued representations.

The canonical minimal cutset is extracted source-side-first: take the
vertices reachable from the inlet in the residual graph of a maximal stream,
then prune boundary edges whose far endpoint cannot reach the outlet (such
edges only dangle into zero-capacity pockets and would break inclusion
minimality).  The result satisfies the boundary identity E = edge-boundary of
its own source side and has capacity exactly equal to the maximal flow.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .capacity import CapacityField
from .geometry import Box, DomainSpec
from .lattice import Discretization, LatticeNetwork, VoxelSet, fatten
from .maxflow import StreamFunction, residual_source_set, solve_network_flow

__all__ = [
    "Cutset",
    "CutRegion",
    "CutsetReport",
    "min_cutset",
    "min_card_min_cutset",
    "cut_region",
    "verify_cutset",
    "plaquettes",
]


@dataclass(frozen=True)
class Cutset:
    """An inclusion-minimal edge set separating the inlet from the outlet."""

    network: LatticeNetwork
    caps: CapacityField
    edges: tuple                    # edge ids
    source_side: frozenset          # r(E): reachable from sources avoiding E
    sources: frozenset
    sinks: frozenset

    @property
    def capacity(self) -> Fraction:
        return sum((self.caps.value(e) for e in self.edges), Fraction(0))

    @property
    def cardinality(self) -> int:
        return len(self.edges)

    @property
    def n(self) -> int:
        return self.network.n

    def edge_rows(self):
        """(axis, k_1..k_d, t) rows for the CSV export."""
        axis, coords = self.network.edge_keys()
        for e in self.edges:
            yield (int(axis[e]), *map(int, coords[e]), self.caps.value(e))


@dataclass(frozen=True)
class CutRegion:
    """Fattened source side R(E) and its restriction to the domain."""

    voxels: VoxelSet
    spec: "DomainSpec | None"

    @property
    def n(self) -> int:
        return self.voxels.n

    def volume(self) -> Fraction:
        return self.voxels.volume()

    def _domain_boxes(self) -> list[Box]:
        if self.spec is None:
            raise ValueError("cut region has no domain attached")
        boxes = self.spec.body_boxes()
        if boxes is None:
            raise ValueError(
                "restriction volumes require a box-union domain body"
            )
        return boxes

    def restricted_volume(self) -> Fraction:
        """Volume of E = R(E) intersected with the open domain."""
        return self.voxels.clip_volume(self._domain_boxes())

    def dist_R_to_E(self) -> Fraction:
        """Symmetric-difference volume between R(E) and its restriction."""
        return self.volume() - self.restricted_volume()

    def dist_to(self, reference: Sequence[Box]) -> Fraction:
        """Symmetric-difference volume between E and a reference set in the domain."""
        ref = list(reference)
        vol_ref = _boxes_volume(ref)
        vol_e = self.restricted_volume()
        inter = self.voxels.clip_volume(_clip_to(ref, self._domain_boxes()))
        return vol_e + vol_ref - 2 * inter

    def cube_centers(self):
        n = self.n
        for k in sorted(self.voxels.keys):
            yield tuple(Fraction(ki, n) for ki in k)


def _boxes_volume(boxes: Sequence[Box]) -> Fraction:
    from .geometry import union_volume

    return union_volume(list(boxes))


def _clip_to(boxes: Sequence[Box], frame: Sequence[Box]) -> list[Box]:
    out = []
    for b in boxes:
        for f in frame:
            c = b.intersect(f)
            if c is not None and c.is_proper():
                out.append(c)
    return out


class StreamNotMaximalError(ValueError):
    pass


def min_cutset(
    disc: "Discretization | LatticeNetwork",
    caps: CapacityField,
    stream: StreamFunction,
) -> Cutset:
    """Canonical minimal cutset of a maximal stream (source-nearest)."""
    net = stream.network
    reach = residual_source_set(stream)
    for v in stream.sinks:
        if reach[v]:
            raise StreamNotMaximalError(
                "residual path from inlet to outlet: stream is not maximal"
            )
    tails, heads = net.edge_tail, net.edge_head
    raw = [
        e
        for e in range(net.num_edges)
        if bool(reach[tails[e]]) != bool(reach[heads[e]])
    ]
    # prune edges dangling into pockets that cannot reach the outlet
    in_raw = np.zeros(net.num_edges, dtype=bool)
    in_raw[raw] = True
    co_reach = _reach_avoiding(net, in_raw, stream.sinks)
    edges = []
    for e in raw:
        far = int(heads[e]) if reach[tails[e]] else int(tails[e])
        if co_reach[far]:
            edges.append(e)
    in_cut = np.zeros(net.num_edges, dtype=bool)
    in_cut[edges] = True
    side = _reach_avoiding(net, in_cut, stream.sources)
    cut = Cutset(
        net, caps, tuple(edges),
        frozenset(int(v) for v in np.nonzero(side)[0]),
        stream.sources, stream.sinks,
    )
    if stream.mode == "exact":
        phi = stream.flow_value_raw()
        if cut.capacity != phi:
            raise AssertionError(
                f"cutset capacity {cut.capacity} differs from flow {phi}"
            )
        _check_boundary_identity(cut)
    return cut


def _reach_avoiding(net: LatticeNetwork, blocked_edges, start_set) -> np.ndarray:
    seen = np.zeros(net.num_vertices, dtype=bool)
    stack = [int(v) for v in start_set]
    for v in stack:
        seen[v] = True
    inc = net.incident_edges()
    tails, heads = net.edge_tail, net.edge_head
    while stack:
        v = stack.pop()
        for e in inc[v]:
            if blocked_edges[e]:
                continue
            w = int(heads[e]) if int(tails[e]) == v else int(tails[e])
            if not seen[w]:
                seen[w] = True
                stack.append(w)
    return seen


def _check_boundary_identity(cut: Cutset) -> None:
    net = cut.network
    side = cut.source_side
    boundary = set()
    for e in range(net.num_edges):
        t, h = int(net.edge_tail[e]), int(net.edge_head[e])
        if (t in side) != (h in side):
            boundary.add(e)
    if boundary != set(cut.edges):
        raise AssertionError("cutset is not the edge boundary of its source side")


def min_card_min_cutset(
    disc: "Discretization | LatticeNetwork",
    caps: CapacityField,
) -> Cutset:
    """Among the minimum-capacity cutsets, one of minimal cardinality.

    Solves the flow problem under the perturbed integer capacities
    K * t + 1 with K = (edge count) + 1 after clearing denominators, which
    orders cuts lexicographically by (capacity, cardinality).
    """
    if isinstance(disc, Discretization):
        net = disc.network
        src, snk = disc.source_vids(), disc.sink_vids()
    else:
        raise TypeError("min_card_min_cutset needs a Discretization")
    ints, scale = caps.scaled_ints()
    K = net.num_edges + 1
    perturbed = CapacityField.from_values(net, [K * t + 1 for t in ints])
    stream_p, result_p = solve_network_flow(net, perturbed, src, snk, mode="exact")
    cut_p = min_cutset(net, perturbed, stream_p)
    # consistency: perturbed optimum = K * (integer capacity) + cardinality
    v_int = sum(ints[e] for e in cut_p.edges)
    if K * v_int + cut_p.cardinality != result_p.phi:
        raise AssertionError("perturbed solve is inconsistent")
    return Cutset(
        net, caps, cut_p.edges, cut_p.source_side, cut_p.sources, cut_p.sinks
    )


def cut_region(cut: Cutset, spec: "DomainSpec | None" = None) -> CutRegion:
    """Fattened region R(E) of the cutset's source side."""
    coords = [cut.network.coords[v] for v in sorted(cut.source_side)]
    vox = fatten(coords, cut.network.n)
    return CutRegion(vox, spec)


@dataclass(frozen=True)
class CutsetReport:
    cuts: bool
    witness_path: tuple
    minimal: bool
    removable_edge: "int | None"
    boundary_identity: bool

    @property
    def valid(self) -> bool:
        return self.cuts and self.minimal and self.boundary_identity


def verify_cutset(cut: Cutset, disc: "Discretization | None" = None) -> CutsetReport:
    """Check the cut property, inclusion minimality, and the boundary identity."""
    net = cut.network
    in_cut = np.zeros(net.num_edges, dtype=bool)
    in_cut[list(cut.edges)] = True
    reach = _reach_avoiding(net, in_cut, cut.sources)
    hit = [v for v in cut.sinks if reach[v]]
    witness: tuple = ()
    cuts = not hit
    if hit:
        witness = _find_path(net, in_cut, cut.sources, set(cut.sinks))
    removable = None
    minimal = True
    if cuts:
        for e in cut.edges:
            in_cut[e] = False
            r2 = _reach_avoiding(net, in_cut, cut.sources)
            restored = any(r2[v] for v in cut.sinks)
            in_cut[e] = True
            if not restored:
                removable = int(e)
                minimal = False
                break
    side = frozenset(int(v) for v in np.nonzero(reach)[0]) if cuts else frozenset()
    boundary_ok = False
    if cuts:
        boundary = set()
        for e in range(net.num_edges):
            t, h = int(net.edge_tail[e]), int(net.edge_head[e])
            if (t in side) != (h in side):
                boundary.add(e)
        boundary_ok = boundary == set(cut.edges)
    return CutsetReport(cuts, witness, minimal, removable, boundary_ok)


def _find_path(net, blocked_edges, sources, sinks) -> tuple:
    prev = {}
    stack = [int(v) for v in sources]
    seen = set(stack)
    inc = net.incident_edges()
    tails, heads = net.edge_tail, net.edge_head
    end = None
    while stack and end is None:
        v = stack.pop()
        if v in sinks:
            end = v
            break
        for e in inc[v]:
            if blocked_edges[e]:
                continue
            w = int(heads[e]) if int(tails[e]) == v else int(tails[e])
            if w not in seen:
                seen.add(w)
                prev[w] = v
                stack.append(w)
                if w in sinks:
                    end = w
                    break
    if end is None:
        return ()
    path = [end]
    while path[-1] in prev:
        path.append(prev[path[-1]])
    return tuple(reversed(path))


def plaquettes(cut: Cutset):
    """Dual (d-1)-faces bisecting the cut edges: (center, axis, side 1/n)."""
    n = cut.network.n
    axis, coords = cut.network.edge_keys()
    side = Fraction(1, n)
    for e in cut.edges:
        a = int(axis[e])
        center = [Fraction(int(k), n) for k in coords[e]]
        center[a] += Fraction(1, 2 * n)
        yield tuple(center), a, side
