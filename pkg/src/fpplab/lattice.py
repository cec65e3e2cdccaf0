"""Discrete model: the rescaled lattice restricted to a domain.

Vertices are integer vectors k representing the points k/n of Z^d/n.  Edges
are identified by (axis, k) where k is the endpoint on the negative side, and
every edge carries the canonical orientation pointing in the +axis direction.

``discretize`` realizes a domain at scale n: the vertex set keeps the lattice
points at L-inf distance < 1/n from the domain, the boundary vertices are
those with a lattice neighbor outside, and the inlet/outlet vertex classes are
cut out of the boundary by distance to the corresponding boundary parts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .geometry import Box, DomainSpec, Polytope, RegionUnion, frac, union_volume

__all__ = [
    "LatticeNetwork",
    "Discretization",
    "VoxelSet",
    "DiscretizationError",
    "EmptyTerminalError",
    "discretize",
    "fatten",
    "network_from_mask",
]

_MAX_GRID_CELLS = 80_000_000


class DiscretizationError(ValueError):
    pass


class EmptyTerminalError(DiscretizationError):
    """Inlet or outlet has no lattice vertices at this scale."""


@dataclass(frozen=True)
class LatticeNetwork:
    """A finite piece of Z^d/n with its interior edges.

    Immutable after construction; vertex ids are row-major over the occupied
    grid positions, so they are deterministic functions of the vertex set.
    """

    n: int
    d: int
    grid_lo: tuple[int, ...]
    grid_shape: tuple[int, ...]
    mask: np.ndarray                 # bool, grid_shape
    vid: np.ndarray                  # int32, grid_shape, -1 where absent
    coords: np.ndarray               # int64, (V, d) lattice integer coords
    edge_axis: np.ndarray            # int8, (E,)
    edge_tail: np.ndarray            # int32, (E,)  vid of lower endpoint
    edge_head: np.ndarray            # int32, (E,)

    @property
    def num_vertices(self) -> int:
        return len(self.coords)

    @property
    def num_edges(self) -> int:
        return len(self.edge_axis)

    def edge_keys(self) -> tuple[np.ndarray, np.ndarray]:
        """Edge identities (axis, tail lattice coordinates)."""
        return self.edge_axis, self.coords[self.edge_tail]

    def points(self) -> np.ndarray:
        return self.coords.astype(float) / self.n

    def edge_centers(self) -> np.ndarray:
        c = self.coords[self.edge_tail].astype(float)
        for a in range(self.d):
            c[self.edge_axis == a, a] += 0.5
        return c / self.n

    def vid_of(self, k: Sequence[int]) -> int:
        idx = tuple(int(ki) - lo for ki, lo in zip(k, self.grid_lo))
        if any(i < 0 or i >= s for i, s in zip(idx, self.grid_shape)):
            return -1
        return int(self.vid[idx])

    def incident_edges(self) -> list[list[int]]:
        """Edge ids incident to each vertex (computed on demand)."""
        inc: list[list[int]] = [[] for _ in range(self.num_vertices)]
        for e in range(self.num_edges):
            inc[self.edge_tail[e]].append(e)
            inc[self.edge_head[e]].append(e)
        return inc


def network_from_mask(n: int, grid_lo: Sequence[int], mask: np.ndarray) -> LatticeNetwork:
    d = mask.ndim
    vid = np.full(mask.shape, -1, dtype=np.int32)
    flat_idx = np.nonzero(mask)
    nv = len(flat_idx[0])
    vid[flat_idx] = np.arange(nv, dtype=np.int32)
    coords = np.stack(
        [flat_idx[i].astype(np.int64) + grid_lo[i] for i in range(d)], axis=1
    ) if nv else np.zeros((0, d), dtype=np.int64)
    axes, tails, heads = [], [], []
    for a in range(d):
        sl_lo = [slice(None)] * d
        sl_hi = [slice(None)] * d
        sl_lo[a] = slice(0, mask.shape[a] - 1)
        sl_hi[a] = slice(1, mask.shape[a])
        both = mask[tuple(sl_lo)] & mask[tuple(sl_hi)]
        t = vid[tuple(sl_lo)][both]
        h = vid[tuple(sl_hi)][both]
        axes.append(np.full(len(t), a, dtype=np.int8))
        tails.append(t)
        heads.append(h)
    edge_axis = np.concatenate(axes) if axes else np.zeros(0, dtype=np.int8)
    edge_tail = np.concatenate(tails) if tails else np.zeros(0, dtype=np.int32)
    edge_head = np.concatenate(heads) if heads else np.zeros(0, dtype=np.int32)
    for arr in (mask, vid, coords, edge_axis, edge_tail, edge_head):
        arr.setflags(write=False)
    return LatticeNetwork(
        n, d, tuple(int(g) for g in grid_lo), mask.shape, mask, vid,
        coords, edge_axis, edge_tail, edge_head,
    )


def boundary_vertex_mask(mask: np.ndarray) -> np.ndarray:
    """Vertices with a lattice neighbor absent (grid border counts as absent)."""
    d = mask.ndim
    padded = np.pad(mask, 1, constant_values=False)
    out = np.zeros_like(mask)
    core = tuple(slice(1, 1 + s) for s in mask.shape)
    for a in range(d):
        for step in (-1, 1):
            sl = list(core)
            sl[a] = slice(1 + step, 1 + step + mask.shape[a])
            out |= ~padded[tuple(sl)]
    return out & mask


@dataclass(frozen=True)
class Discretization:
    """Discrete version of a domain at scale n.

    Vertex classes are boolean arrays over the network's vertex ids.
    """

    spec: DomainSpec
    n: int
    network: LatticeNetwork
    gamma_mask: np.ndarray
    gamma1_mask: np.ndarray
    gamma2_mask: np.ndarray
    warnings: tuple[str, ...] = ()

    @property
    def d(self) -> int:
        return self.network.d

    @property
    def num_vertices(self) -> int:
        return self.network.num_vertices

    @property
    def num_edges(self) -> int:
        return self.network.num_edges

    def source_vids(self) -> np.ndarray:
        return np.nonzero(self.gamma1_mask)[0]

    def sink_vids(self) -> np.ndarray:
        return np.nonzero(self.gamma2_mask)[0]

    def has_terminals(self) -> bool:
        return bool(self.gamma1_mask.any() and self.gamma2_mask.any())

    def class_rows(self):
        """(class_name, lattice coordinates) rows for the CSV export."""
        names = (
            ("omega", np.ones(self.num_vertices, dtype=bool)),
            ("gamma", self.gamma_mask),
            ("gamma1", self.gamma1_mask),
            ("gamma2", self.gamma2_mask),
        )
        for name, m in names:
            for k in self.network.coords[m]:
                yield (name, *map(int, k))


def _strict_int_above(x: Fraction) -> int:
    # smallest integer strictly greater than x
    return math.floor(x) + 1


def _strict_int_below(x: Fraction) -> int:
    return math.ceil(x) - 1


def _box_lattice_range(box: Box, n: int) -> "list[tuple[int, int]] | None":
    """Integer ranges of k with d_inf(k/n, box) < 1/n (inclusive bounds)."""
    rng = []
    for lo, hi in zip(box.lo, box.hi):
        kmin = _strict_int_above(n * lo - 1)
        kmax = _strict_int_below(n * hi + 1)
        if kmin > kmax:
            return None
        rng.append((kmin, kmax))
    return rng


def discretize(spec: DomainSpec, n: int) -> Discretization:
    """Build the discrete model of the domain at scale n."""
    if n < 1:
        raise DiscretizationError("scale n must be >= 1")
    d = spec.d
    bb = spec.bounding_box()
    grid_lo = [_strict_int_above(n * l - 1) - 1 for l in bb.lo]
    grid_hi = [_strict_int_below(n * h + 1) + 1 for h in bb.hi]
    shape = tuple(h - l + 1 for l, h in zip(grid_lo, grid_hi))
    ncells = math.prod(shape)
    if ncells > _MAX_GRID_CELLS:
        raise DiscretizationError(
            f"lattice grid of {ncells} cells exceeds the configured memory bound"
        )
    if any(abs(v) > 2**62 for v in grid_lo + grid_hi):
        raise DiscretizationError("scaled coordinates overflow the integer range")
    mask = np.zeros(shape, dtype=bool)

    boxes = spec.body_boxes()
    if boxes is not None:
        for bx in boxes:
            rng = _box_lattice_range(bx, n)
            if rng is None:
                continue
            sl = tuple(
                slice(max(k0, g0) - g0, min(k1, g1) - g0 + 1)
                for (k0, k1), g0, g1 in zip(rng, grid_lo, grid_hi)
            )
            if all(s.start < s.stop for s in sl):
                mask[sl] = True
    else:
        _fill_polytope_mask(mask, spec, n, grid_lo)

    if not mask.any():
        raise DiscretizationError(f"no lattice vertices at scale n={n}")

    net = network_from_mask(n, grid_lo, mask)
    _check_edge_count_bound(spec, net)

    gamma_grid = boundary_vertex_mask(mask)
    gamma_mask = gamma_grid[mask]

    inv_n = Fraction(1, n)
    g1 = np.zeros(net.num_vertices, dtype=bool)
    g2 = np.zeros(net.num_vertices, dtype=bool)
    frag1, frag2 = spec.gamma1_fragments, spec.gamma2_fragments
    for v in np.nonzero(gamma_mask)[0]:
        pt = tuple(Fraction(int(k), n) for k in net.coords[v])
        d1 = min((f.dist_inf(pt) for f in frag1), default=None)
        d2 = min((f.dist_inf(pt) for f in frag2), default=None)
        near1 = d1 is not None and d1 < inv_n
        near2 = d2 is not None and d2 < inv_n
        if near1 and not near2:
            g1[v] = True
        elif near2 and not near1:
            g2[v] = True

    warnings = []
    if not g1.any():
        warnings.append("gamma1 has no lattice vertices at this scale")
    if not g2.any():
        warnings.append("gamma2 has no lattice vertices at this scale")
    for arr in (gamma_mask, g1, g2):
        arr.setflags(write=False)
    return Discretization(spec, n, net, gamma_mask, g1, g2, tuple(warnings))


def _fill_polytope_mask(mask, spec: DomainSpec, n: int, grid_lo) -> None:
    body = spec.body
    inv_n = Fraction(1, n)
    bb = body.bounding_box()
    it = np.ndindex(mask.shape)
    for idx in it:
        k = tuple(i + lo for i, lo in zip(idx, grid_lo))
        pt = tuple(Fraction(ki, n) for ki in k)
        if body.contains(pt, closed=True):
            mask[idx] = True
            continue
        # cheap prune: the box distance lower-bounds the polytope distance
        if bb.dist_inf(pt) >= inv_n:
            continue
        if body.dist_inf(pt) < inv_n:
            mask[idx] = True


def _check_edge_count_bound(spec: DomainSpec, net: LatticeNetwork) -> None:
    # card(Pi_n) <= 2 d n^d L^d(V_inf(Omega, 1)); exact volume for box unions,
    # bounding-box overestimate otherwise (the assertion stays valid)
    n, d = net.n, net.d
    boxes = spec.body_boxes()
    if boxes is not None:
        vol = union_volume([b.inflate(Fraction(1)) for b in boxes])
    else:
        vol = spec.bounding_box().inflate(Fraction(1)).volume()
    bound = 2 * d * n**d * vol
    if net.num_edges > bound:
        raise DiscretizationError(
            f"edge count {net.num_edges} violates the volume bound {bound}"
        )


# ---------------------------------------------------------------------------
# Fattened vertex sets (voxel unions)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class VoxelSet:
    """Union of lattice cubes of side 1/n centered at vertices k/n."""

    n: int
    keys: frozenset

    @property
    def d(self) -> int:
        for k in self.keys:
            return len(k)
        return 0

    def volume(self) -> Fraction:
        return Fraction(len(self.keys), self.n ** self.d) if self.keys else Fraction(0)

    def boxes(self) -> list[Box]:
        half = Fraction(1, 2 * self.n)
        out = []
        for k in sorted(self.keys):
            center = [Fraction(ki, self.n) for ki in k]
            out.append(Box(tuple(c - half for c in center), tuple(c + half for c in center)))
        return out

    def sym_diff_volume(self, other: "VoxelSet") -> Fraction:
        if self.n != other.n:
            raise ValueError("voxel sets at different scales")
        return Fraction(len(self.keys ^ other.keys), self.n ** self.d)

    def clip_volume(self, clip_boxes: Sequence[Box]) -> Fraction:
        """Exact volume of (this union) intersected with a union of boxes."""
        if not self.keys:
            return Fraction(0)
        half = Fraction(1, 2 * self.n)
        total = Fraction(0)
        cube_vol = Fraction(1, self.n ** self.d)
        for k in self.keys:
            lo = tuple(Fraction(ki, self.n) - half for ki in k)
            hi = tuple(Fraction(ki, self.n) + half for ki in k)
            cube = Box(lo, hi)
            pieces = []
            full = False
            for cb in clip_boxes:
                piece = cube.intersect(cb)
                if piece is None:
                    continue
                if piece == cube:
                    full = True
                    break
                if piece.is_proper():
                    pieces.append(piece)
            if full:
                total += cube_vol
            elif pieces:
                total += union_volume(pieces)
        return total


def fatten(vertices: Iterable[Sequence[int]], n: int) -> VoxelSet:
    """Union of cubes of side 1/n centered at the given lattice vertices."""
    keys = frozenset(tuple(int(x) for x in k) for k in vertices)
    if not keys:
        raise ValueError("cannot fatten an empty vertex set")
    return VoxelSet(n, keys)
