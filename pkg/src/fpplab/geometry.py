"""Continuous-side geometry: polyhedral regions, L-infinity distances, volumes.

All region coordinates are exact rationals (``fractions.Fraction``); decimal
strings such as ``"0.41"`` parse exactly.  Distances and volumes of axis-box
unions are computed exactly; convex polytopes fall back on an exact rational
linear program, and generic volume queries on grid quadrature with a reported
error bound.

The volume of a symmetric difference, ``sym_diff_volume``, is the pseudometric
used throughout the package to compare cut regions with continuum candidates.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence, Union

__all__ = [
    "frac",
    "Box",
    "Halfspace",
    "Polytope",
    "RegionUnion",
    "Region",
    "DomainSpec",
    "VolumeEstimate",
    "contains",
    "dist_inf",
    "union_volume",
    "sym_diff_volume",
    "boundary_neighborhood_volume",
    "boundary_faces",
]

Scalar = Union[int, float, str, Fraction]


def frac(x: Scalar) -> Fraction:
    """Parse a coordinate into an exact Fraction.

    Strings may be decimal ("0.41") or ratios ("41/100"); floats convert via
    their exact binary value.
    """
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (int, str)):
        return Fraction(x)
    if isinstance(x, float):
        return Fraction(x)
    raise TypeError(f"cannot interpret {x!r} as an exact coordinate")


def fracs(xs: Iterable[Scalar]) -> tuple[Fraction, ...]:
    return tuple(frac(x) for x in xs)


# ---------------------------------------------------------------------------
# Region primitives
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Box:
    """Axis-aligned box [lo_1,hi_1] x ... x [lo_d,hi_d].

    Degenerate axes (lo_i == hi_i) are allowed; they arise as boundary-face
    fragments.  Membership of the *open* set requires a proper box.
    """

    lo: tuple[Fraction, ...]
    hi: tuple[Fraction, ...]

    def __post_init__(self):
        if len(self.lo) != len(self.hi):
            raise ValueError("lo/hi dimension mismatch")
        if any(l > h for l, h in zip(self.lo, self.hi)):
            raise ValueError("box with lo > hi")

    @staticmethod
    def make(lo: Iterable[Scalar], hi: Iterable[Scalar]) -> "Box":
        return Box(fracs(lo), fracs(hi))

    @property
    def dim(self) -> int:
        return len(self.lo)

    def is_proper(self) -> bool:
        return all(l < h for l, h in zip(self.lo, self.hi))

    def contains(self, x: Sequence[Fraction], closed: bool = False) -> bool:
        if closed:
            return all(l <= xi <= h for xi, l, h in zip(x, self.lo, self.hi))
        return all(l < xi < h for xi, l, h in zip(x, self.lo, self.hi))

    def dist_inf(self, x: Sequence[Fraction]) -> Fraction:
        d = Fraction(0)
        for xi, l, h in zip(x, self.lo, self.hi):
            gap = max(l - xi, xi - h, Fraction(0))
            if gap > d:
                d = gap
        return d

    def volume(self) -> Fraction:
        v = Fraction(1)
        for l, h in zip(self.lo, self.hi):
            v *= h - l
        return v

    def inflate(self, r: Fraction) -> "Box":
        return Box(tuple(l - r for l in self.lo), tuple(h + r for h in self.hi))

    def intersect(self, other: "Box") -> "Box | None":
        lo = tuple(max(a, b) for a, b in zip(self.lo, other.lo))
        hi = tuple(min(a, b) for a, b in zip(self.hi, other.hi))
        if any(l > h for l, h in zip(lo, hi)):
            return None
        return Box(lo, hi)

    def bounding_box(self) -> "Box":
        return self

    def parts(self) -> list["Box"]:
        return [self]

    def euclid_gap_sq(self, other: "Box") -> Fraction:
        """Squared Euclidean distance between two closed boxes (exact)."""
        s = Fraction(0)
        for l1, h1, l2, h2 in zip(self.lo, self.hi, other.lo, other.hi):
            g = max(l2 - h1, l1 - h2, Fraction(0))
            s += g * g
        return s


@dataclass(frozen=True)
class Segment:
    """Closed segment in the plane; boundary fragment of a polygon body."""

    p: tuple[Fraction, Fraction]
    q: tuple[Fraction, Fraction]

    @property
    def dim(self) -> int:
        return 2

    def dist_inf(self, x: Sequence[Fraction]) -> Fraction:
        # minimize max_i |x_i - (p_i + t (q_i - p_i))| over t in [0, 1];
        # the max of two absolute linear functions attains its minimum at an
        # endpoint, a zero crossing, or a crossing of the two branches.
        f = [(x[i] - self.p[i], self.p[i] - self.q[i]) for i in range(2)]  # a + b t
        cands = [Fraction(0), Fraction(1)]
        for a, b in f:
            if b != 0:
                cands.append(-a / b)
        (a1, b1), (a2, b2) = f
        for s in (1, -1):
            den = b1 - s * b2
            if den != 0:
                cands.append((s * a2 - a1) / den)
        best = None
        for t in cands:
            t = min(max(t, Fraction(0)), Fraction(1))
            v = max(abs(a + b * t) for a, b in f)
            best = v if best is None else min(best, v)
        return best

    def endpoints(self):
        return self.p, self.q


def _pt_seg_euclid_sq(x, seg: Segment) -> Fraction:
    px, py = seg.p
    qx, qy = seg.q
    ux, uy = qx - px, qy - py
    den = ux * ux + uy * uy
    if den == 0:
        dx, dy = x[0] - px, x[1] - py
        return dx * dx + dy * dy
    t = ((x[0] - px) * ux + (x[1] - py) * uy) / den
    t = min(max(t, Fraction(0)), Fraction(1))
    dx, dy = x[0] - (px + t * ux), x[1] - (py + t * uy)
    return dx * dx + dy * dy


def _segments_cross(s1: Segment, s2: Segment) -> bool:
    def orient(a, b, c):
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])

    o1 = orient(s1.p, s1.q, s2.p)
    o2 = orient(s1.p, s1.q, s2.q)
    o3 = orient(s2.p, s2.q, s1.p)
    o4 = orient(s2.p, s2.q, s1.q)
    if ((o1 > 0) != (o2 > 0) and o1 != 0 and o2 != 0
            and (o3 > 0) != (o4 > 0) and o3 != 0 and o4 != 0):
        return True
    return False


def _seg_seg_euclid_sq(s1: Segment, s2: Segment) -> Fraction:
    if _segments_cross(s1, s2):
        return Fraction(0)
    vals = [
        _pt_seg_euclid_sq(s1.p, s2),
        _pt_seg_euclid_sq(s1.q, s2),
        _pt_seg_euclid_sq(s2.p, s1),
        _pt_seg_euclid_sq(s2.q, s1),
    ]
    return min(vals)


def _box_edge_segments(b: Box) -> list[Segment]:
    (x0, y0), (x1, y1) = b.lo, b.hi
    return [
        Segment((x0, y0), (x1, y0)),
        Segment((x1, y0), (x1, y1)),
        Segment((x1, y1), (x0, y1)),
        Segment((x0, y1), (x0, y0)),
    ]


def fragment_gap_sq(a, b) -> Fraction:
    """Squared Euclidean distance between two boundary fragments (exact)."""
    if isinstance(a, Box) and isinstance(b, Box):
        return a.euclid_gap_sq(b)
    sa = _box_edge_segments(a) if isinstance(a, Box) else [a]
    sb = _box_edge_segments(b) if isinstance(b, Box) else [b]
    return min(_seg_seg_euclid_sq(s1, s2) for s1 in sa for s2 in sb)


@dataclass(frozen=True)
class Halfspace:
    """Closed halfspace a . x <= b; the open set is a . x < b."""

    a: tuple[Fraction, ...]
    b: Fraction

    @staticmethod
    def make(a: Iterable[Scalar], b: Scalar) -> "Halfspace":
        return Halfspace(fracs(a), frac(b))

    @property
    def dim(self) -> int:
        return len(self.a)

    def contains(self, x: Sequence[Fraction], closed: bool = False) -> bool:
        s = sum(ai * xi for ai, xi in zip(self.a, x))
        return s <= self.b if closed else s < self.b

    def dist_inf(self, x: Sequence[Fraction]) -> Fraction:
        # L-inf distance to {a.y <= b} is (a.x - b)_+ / ||a||_1 (dual norm).
        s = sum(ai * xi for ai, xi in zip(self.a, x))
        if s <= self.b:
            return Fraction(0)
        norm1 = sum(abs(ai) for ai in self.a)
        if norm1 == 0:
            raise ValueError("halfspace with zero normal")
        return (s - self.b) / norm1

    def bounding_box(self):
        raise ValueError("halfspace is unbounded")

    def parts(self):
        return [self]


@dataclass(frozen=True)
class Polytope:
    """Convex polytope {x : A x <= b} with rational data.

    The open set is {x : A x < b}; callers must ensure boundedness where an
    operation requires it (``bounding_box`` raises otherwise).
    """

    A: tuple[tuple[Fraction, ...], ...]
    b: tuple[Fraction, ...]

    @staticmethod
    def make(A: Iterable[Iterable[Scalar]], b: Iterable[Scalar]) -> "Polytope":
        return Polytope(tuple(fracs(row) for row in A), fracs(b))

    @property
    def dim(self) -> int:
        return len(self.A[0])

    def contains(self, x: Sequence[Fraction], closed: bool = False) -> bool:
        for row, bi in zip(self.A, self.b):
            s = sum(ai * xi for ai, xi in zip(row, x))
            if (s > bi) if closed else (s >= bi):
                return False
        return True

    def dist_inf(self, x: Sequence[Fraction]) -> Fraction:
        if self.contains(x, closed=True):
            return Fraction(0)
        return _polytope_dist_inf(self, x)

    def interior_depth(self, x: Sequence[Fraction]) -> Fraction:
        """L-inf distance from an interior point to the boundary (0 outside)."""
        depth = None
        for row, bi in zip(self.A, self.b):
            s = sum(ai * xi for ai, xi in zip(row, x))
            norm1 = sum(abs(ai) for ai in row)
            d = (bi - s) / norm1
            depth = d if depth is None else min(depth, d)
        return max(depth, Fraction(0))

    def bounding_box(self) -> Box:
        d = self.dim
        lo, hi = [], []
        for i in range(d):
            lo.append(_polytope_extreme(self, i, minimize=True))
            hi.append(_polytope_extreme(self, i, minimize=False))
        return Box(tuple(lo), tuple(hi))

    def parts(self):
        return [self]


@dataclass(frozen=True)
class RegionUnion:
    """Finite union of region parts (boxes, halfspaces, polytopes)."""

    members: tuple

    @staticmethod
    def make(members: Iterable) -> "RegionUnion":
        return RegionUnion(tuple(members))

    @property
    def dim(self) -> int:
        return self.members[0].dim

    def contains(self, x, closed: bool = False) -> bool:
        return any(m.contains(x, closed=closed) for m in self.members)

    def dist_inf(self, x) -> Fraction:
        return min(m.dist_inf(x) for m in self.members)

    def bounding_box(self) -> Box:
        bbs = [m.bounding_box() for m in self.members]
        lo = tuple(min(bb.lo[i] for bb in bbs) for i in range(self.dim))
        hi = tuple(max(bb.hi[i] for bb in bbs) for i in range(self.dim))
        return Box(lo, hi)

    def parts(self) -> list:
        return list(self.members)


Region = Union[Box, Halfspace, Polytope, RegionUnion]


def contains(region: Region, x: Sequence[Scalar], closed: bool = False) -> bool:
    """Open-set (default) or closed-set membership test; exact for rationals."""
    pt = fracs(x)
    if len(pt) != region.dim:
        raise ValueError(f"point dimension {len(pt)} != region dimension {region.dim}")
    return region.contains(pt, closed=closed)


def dist_inf(x: Sequence[Scalar], region: Region) -> Fraction:
    """L-infinity distance from x to the closure of the region (exact)."""
    pt = fracs(x)
    if len(pt) != region.dim:
        raise ValueError("dimension mismatch")
    return region.dist_inf(pt)


# ---------------------------------------------------------------------------
# Exact rational LP fallback for polytope distances (small dimensions only)
# ---------------------------------------------------------------------------


def _sympy_linprog(c, A, b):
    """Exact rational LP: minimize c.z s.t. A z <= b, z free.

    sympy's simplex assumes nonnegative variables, so each free variable is
    split as z = z+ - z-.
    """
    from sympy.solvers.simplex import linprog

    n = len(c)
    c2 = [v for ci in c for v in (ci, -ci)]
    A2 = [[v for ai in row for v in (ai, -ai)] for row in A]
    opt, sol = linprog(c2, A2, list(b))
    z = [_to_frac(sol[2 * i]) - _to_frac(sol[2 * i + 1]) for i in range(n)]
    return _to_frac(opt), z


def _to_frac(v) -> Fraction:
    from sympy import Rational

    r = Rational(v)
    return Fraction(int(r.p), int(r.q))


def _polytope_dist_inf(P: Polytope, x: Sequence[Fraction]) -> Fraction:
    # minimize r  s.t.  A y <= b,  y_i - r <= x_i,  -y_i - r <= -x_i
    d = P.dim
    c = [Fraction(0)] * d + [Fraction(1)]
    A, b = [], []
    for row, bi in zip(P.A, P.b):
        A.append(list(row) + [Fraction(0)])
        b.append(bi)
    for i in range(d):
        e = [Fraction(0)] * (d + 1)
        e[i], e[d] = Fraction(1), Fraction(-1)
        A.append(list(e))
        b.append(x[i])
        e = [Fraction(0)] * (d + 1)
        e[i], e[d] = Fraction(-1), Fraction(-1)
        A.append(list(e))
        b.append(-x[i])
    opt, _ = _sympy_linprog(c, A, b)
    return max(opt, Fraction(0))


def _polytope_extreme(P: Polytope, axis: int, minimize: bool) -> Fraction:
    d = P.dim
    c = [Fraction(0)] * d
    c[axis] = Fraction(1) if minimize else Fraction(-1)
    try:
        opt, sol = _sympy_linprog(c, P.A, P.b)
    except Exception as exc:  # unbounded or infeasible
        raise ValueError(f"polytope has no finite extent on axis {axis}: {exc}")
    return sol[axis]


# ---------------------------------------------------------------------------
# Exact box-union algebra via coordinate compression
# ---------------------------------------------------------------------------


def _grid_coords(boxes: Sequence[Box]) -> list[list[Fraction]]:
    d = boxes[0].dim
    coords = []
    for i in range(d):
        vals = set()
        for bx in boxes:
            vals.add(bx.lo[i])
            vals.add(bx.hi[i])
        coords.append(sorted(vals))
    return coords


_MAX_CELLS = 2_000_000


def _cells(coords: list[list[Fraction]]):
    ranges = [range(len(c) - 1) for c in coords]
    ncells = math.prod(len(r) for r in ranges)
    if ncells > _MAX_CELLS:
        raise ValueError(
            f"box union too fragmented for exact compression ({ncells} cells); "
            "use voxel-set operations instead"
        )
    yield from itertools.product(*ranges)


def _cell_box(coords, idx) -> Box:
    return Box(
        tuple(coords[i][j] for i, j in enumerate(idx)),
        tuple(coords[i][j + 1] for i, j in enumerate(idx)),
    )


def _cell_in_union(cell: Box, boxes: Sequence[Box]) -> bool:
    # grid includes every box face, so each cell is wholly in or out
    for bx in boxes:
        if all(bl <= cl and ch <= bh for cl, ch, bl, bh in zip(cell.lo, cell.hi, bx.lo, bx.hi)):
            return True
    return False


def union_volume(boxes: Sequence[Box]) -> Fraction:
    """Exact Lebesgue volume of a finite union of axis boxes."""
    boxes = [b for b in boxes if b.is_proper()]
    if not boxes:
        return Fraction(0)
    coords = _grid_coords(boxes)
    total = Fraction(0)
    for idx in _cells(coords):
        cell = _cell_box(coords, idx)
        if _cell_in_union(cell, boxes):
            total += cell.volume()
    return total


def complement_boxes(boxes: Sequence[Box], frame: Box) -> list[Box]:
    """Cells of the frame not covered by the union (exact box list)."""
    coords = _grid_coords(list(boxes) + [frame])
    coords = [
        [v for v in axis if flo <= v <= fhi]
        for axis, flo, fhi in zip(coords, frame.lo, frame.hi)
    ]
    out = []
    for idx in _cells(coords):
        cell = _cell_box(coords, idx)
        if cell.is_proper() and not _cell_in_union(cell, boxes):
            out.append(cell)
    return out


def _boxes_sym_diff_volume(A: Sequence[Box], B: Sequence[Box]) -> Fraction:
    A = [b for b in A if b.is_proper()]
    B = [b for b in B if b.is_proper()]
    if not A and not B:
        return Fraction(0)
    coords = _grid_coords(A + B)
    total = Fraction(0)
    for idx in _cells(coords):
        cell = _cell_box(coords, idx)
        if _cell_in_union(cell, A) != _cell_in_union(cell, B):
            total += cell.volume()
    return total


def intersect_volume(A: Sequence[Box], B: Sequence[Box]) -> Fraction:
    pieces: list[Box] = []
    for a in A:
        for b in B:
            c = a.intersect(b)
            if c is not None and c.is_proper():
                pieces.append(c)
    return union_volume(pieces)


# ---------------------------------------------------------------------------
# Generic volume queries
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class VolumeEstimate:
    """A volume with a rigorous two-sided error bound (0 for exact paths)."""

    value: Fraction
    error_bound: Fraction

    def __float__(self) -> float:
        return float(self.value)


def _as_box_list(obj) -> "list[Box] | None":
    if isinstance(obj, Box):
        return [obj]
    if isinstance(obj, RegionUnion) and all(isinstance(m, Box) for m in obj.members):
        return list(obj.members)
    if isinstance(obj, (list, tuple)) and all(isinstance(m, Box) for m in obj):
        return list(obj)
    if hasattr(obj, "boxes"):  # lattice voxel sets
        return list(obj.boxes())
    return None


def sym_diff_volume(A, B, resolution: int = 64) -> VolumeEstimate:
    """Lebesgue volume of the symmetric difference A xor B.

    Exact (error_bound 0) whenever both arguments reduce to axis-box unions;
    otherwise grid quadrature at ``resolution`` subdivisions per unit length
    with the mixed-cell volume reported as the error bound.
    """
    if resolution < 1:
        raise ValueError("resolution must be >= 1")
    boxes_a, boxes_b = _as_box_list(A), _as_box_list(B)
    if boxes_a is not None and boxes_b is not None:
        return VolumeEstimate(_boxes_sym_diff_volume(boxes_a, boxes_b), Fraction(0))
    return _quadrature_sym_diff(A, B, resolution)


def _region_bbox(obj) -> Box:
    boxes = _as_box_list(obj)
    if boxes is not None:
        if not boxes:
            raise ValueError("empty region")
        d = boxes[0].dim
        return Box(
            tuple(min(b.lo[i] for b in boxes) for i in range(d)),
            tuple(max(b.hi[i] for b in boxes) for i in range(d)),
        )
    return obj.bounding_box()


def _region_members(obj):
    boxes = _as_box_list(obj)
    if boxes is not None:
        return boxes
    return obj.parts()


def _quadrature_sym_diff(A, B, resolution: int) -> VolumeEstimate:
    bb_a, bb_b = _region_bbox(A), _region_bbox(B)
    d = bb_a.dim
    lo = tuple(min(a, b) for a, b in zip(bb_a.lo, bb_b.lo))
    hi = tuple(max(a, b) for a, b in zip(bb_a.hi, bb_b.hi))
    step = Fraction(1, resolution)
    half = step / 2
    starts = [_floor_multiple(l, step) for l in lo]
    counts = [int(math.ceil((h - s) / step)) for s, h in zip(starts, hi)]
    value = Fraction(0)
    err = Fraction(0)
    cellvol = step**d
    parts_a, parts_b = _region_members(A), _region_members(B)
    for idx in itertools.product(*[range(c) for c in counts]):
        center = tuple(s + step * i + half for s, i in zip(starts, idx))
        sa = _cube_side(center, half, parts_a)
        sb = _cube_side(center, half, parts_b)
        if sa == "mixed" or sb == "mixed":
            err += cellvol
            in_a = any(p.contains(center, closed=True) for p in parts_a)
            in_b = any(p.contains(center, closed=True) for p in parts_b)
        else:
            in_a, in_b = sa == "in", sb == "in"
        if in_a != in_b:
            value += cellvol
    return VolumeEstimate(value, err)


def _floor_multiple(x: Fraction, step: Fraction) -> Fraction:
    return (x / step).__floor__() * step


def _cube_side(center, half: Fraction, parts) -> str:
    """Classify the closed cube of L-inf radius ``half`` against a part union."""
    # Disjoint from every part iff the L-inf distance from the center to each
    # part is >= half (the cube is exactly the L-inf ball).
    if all(p.dist_inf(center) >= half for p in parts):
        return "out"
    for p in parts:
        corners = itertools.product(*[(c - half, c + half) for c in center])
        if all(p.contains(corner, closed=True) for corner in corners):
            return "in"  # convex part contains all corners => whole cube
    return "mixed"


# ---------------------------------------------------------------------------
# Domain specification
# ---------------------------------------------------------------------------


class DomainGeometryError(ValueError):
    pass


def boundary_faces(body_boxes: Sequence[Box]) -> list[tuple[Box, int, int]]:
    """Oriented boundary faces of a box union.

    Returns (face, axis, sign) triples: the face is a degenerate box on the
    boundary, and sign is +1 if the outward normal points along +e_axis.
    """
    boxes = list(body_boxes)
    d = boxes[0].dim
    coords = _grid_coords(boxes)
    faces = []
    for axis in range(d):
        other = [i for i in range(d) if i != axis]
        cell_ranges = [range(len(coords[i]) - 1) for i in other]
        for plane_j, plane in enumerate(coords[axis]):
            for idx in itertools.product(*cell_ranges):
                lo = [None] * d
                hi = [None] * d
                lo[axis] = hi[axis] = plane
                for i, j in zip(other, idx):
                    lo[i] = coords[i][j]
                    hi[i] = coords[i][j + 1]
                face = Box(tuple(lo), tuple(hi))
                below = _side_cell_in(coords, boxes, axis, plane_j - 1, other, idx)
                above = _side_cell_in(coords, boxes, axis, plane_j, other, idx)
                if below != above:
                    faces.append((face, axis, +1 if below else -1))
    return faces


def _side_cell_in(coords, boxes, axis, slab_j, other, idx) -> bool:
    if slab_j < 0 or slab_j >= len(coords[axis]) - 1:
        return False
    lo = [None] * len(coords)
    hi = [None] * len(coords)
    lo[axis] = coords[axis][slab_j]
    hi[axis] = coords[axis][slab_j + 1]
    for i, j in zip(other, idx):
        lo[i] = coords[i][j]
        hi[i] = coords[i][j + 1]
    return _cell_in_union(Box(tuple(lo), tuple(hi)), boxes)


def _clip_face_to_region(face: Box, region, d: int) -> "list[Box]":
    """Intersect a boundary face with the closure of a selector region.

    Box selectors clip exactly in any dimension.  Halfspace and polytope
    selectors are supported in d=2, where faces are segments and the clipped
    piece is again a (degenerate) box.
    """
    out: list[Box] = []
    for part in (region.parts() if isinstance(region, RegionUnion) else [region]):
        if isinstance(part, Box):
            piece = face.intersect(part)
            if piece is not None:
                out.append(piece)
        elif isinstance(part, (Halfspace, Polytope)):
            if d != 2:
                raise DomainGeometryError(
                    "halfspace/polytope boundary selectors are only supported in d=2; "
                    "use axis boxes"
                )
            out.extend(_clip_segment(face, part))
        else:
            raise DomainGeometryError(f"unsupported selector region {type(part)}")
    return out


def _clip_segment(face: Box, part) -> list[Box]:
    # 2-d faces are axis-aligned segments; clipping by halfplanes keeps them so
    var_axis = 0 if face.lo[0] < face.hi[0] else 1
    fixed_axis = 1 - var_axis
    c = face.lo[fixed_axis]
    t0, t1 = face.lo[var_axis], face.hi[var_axis]
    if isinstance(part, Polytope):
        rows, rhs = part.A, part.b
    else:
        rows, rhs = (part.a,), (part.b,)
    for a, bi in zip(rows, rhs):
        # constraint a_f * c + a_v * t <= b on t in [t0, t1]
        av = a[var_axis]
        rest = bi - a[fixed_axis] * c
        if av == 0:
            if rest < 0:
                return []
            continue
        bound = rest / av
        if av > 0:
            t1 = min(t1, bound)
        else:
            t0 = max(t0, bound)
        if t0 > t1:
            return []
    lo = list(face.lo)
    hi = list(face.hi)
    lo[var_axis], hi[var_axis] = t0, t1
    return [Box(tuple(lo), tuple(hi))]


@dataclass(frozen=True)
class DomainSpec:
    """A bounded domain with inlet and outlet boundary parts.

    ``body`` is the open domain (box union or convex polytope); ``gamma1`` and
    ``gamma2`` are selector regions whose intersection with the boundary
    defines the inlet and the outlet.  Construction validates boundedness,
    nonempty interior, and the positive inlet/outlet separation required for
    well-posed flow problems.
    """

    d: int
    body: Region
    gamma1: tuple
    gamma2: tuple
    gamma1_fragments: tuple = field(default=(), compare=False)
    gamma2_fragments: tuple = field(default=(), compare=False)

    @staticmethod
    def make(d: int, body, gamma1: Iterable, gamma2: Iterable) -> "DomainSpec":
        if d < 2:
            raise DomainGeometryError("dimension must be >= 2")
        body = _normalize_body(body, d)
        bb = body.bounding_box()  # raises if unbounded
        if not bb.is_proper():
            raise DomainGeometryError("body has empty interior (degenerate extent)")
        if isinstance(body, RegionUnion):
            if union_volume(list(body.members)) == 0:
                raise DomainGeometryError("body has empty interior")
        g1 = tuple(gamma1)
        g2 = tuple(gamma2)
        f1 = _gamma_fragments(body, g1, d)
        f2 = _gamma_fragments(body, g2, d)
        _check_separation(f1, f2)
        return DomainSpec(d, body, g1, g2, tuple(f1), tuple(f2))

    # -- membership / distances ------------------------------------------------

    def contains(self, x: Sequence[Scalar]) -> bool:
        return contains(self.body, x, closed=False)

    def dist_to_closure(self, x: Sequence[Scalar]) -> Fraction:
        return dist_inf(x, self.body)

    def body_boxes(self) -> "list[Box] | None":
        return _as_box_list(self.body)

    def bounding_box(self) -> Box:
        return self.body.bounding_box()

    def gamma_fragments(self, which: int):
        if which == 1:
            return self.gamma1_fragments
        if which == 2:
            return self.gamma2_fragments
        raise ValueError("which must be 1 or 2")

    def dist_to_gamma(self, x: Sequence[Scalar], which: int) -> "Fraction | None":
        frags = self.gamma_fragments(which)
        if not frags:
            return None
        pt = fracs(x)
        return min(f.dist_inf(pt) for f in frags)

    # -- volumes ----------------------------------------------------------------

    def neighborhood_volume(self, r: Scalar, resolution: int = 256) -> Fraction:
        """L^d of the open L-inf r-neighborhood of the closed body."""
        rr = frac(r)
        boxes = self.body_boxes()
        if boxes is not None:
            return union_volume([b.inflate(rr) for b in boxes])
        bb = self.body.bounding_box().inflate(rr)
        est = _quadrature_region_volume(
            lambda c: self.body.dist_inf(c) < rr, bb, resolution
        )
        return est


def _normalize_body(body, d: int) -> Region:
    if isinstance(body, (list, tuple)):
        body = RegionUnion.make([b for b in body])
    if isinstance(body, Box):
        body = RegionUnion.make([body])
    if isinstance(body, RegionUnion):
        if not all(isinstance(m, Box) for m in body.members):
            raise DomainGeometryError("union bodies must consist of axis boxes")
    elif not isinstance(body, Polytope):
        raise DomainGeometryError("body must be a polytope or a union of axis boxes")
    if body.dim != d:
        raise DomainGeometryError("body dimension mismatch")
    return body


def _gamma_fragments(body: Region, selectors, d: int) -> list:
    boxes = _as_box_list(body)
    frags: list = []
    if boxes is not None:
        faces = boundary_faces(boxes)
        for face, _axis, _sign in faces:
            for region in selectors:
                frags.extend(_clip_face_to_region(face, region, d))
    else:
        if d != 2:
            raise DomainGeometryError(
                "polytope bodies support boundary selectors only in d=2"
            )
        frags = _polygon_gamma_fragments(body, selectors)
    # keep only pieces of full boundary dimension d-1 (isolated corners and
    # lower-dimensional grazings carry no surface measure)
    return [f for f in frags if _fragment_dim(f) >= d - 1]


def _fragment_dim(f) -> int:
    if isinstance(f, Segment):
        return 0 if f.p == f.q else 1
    return sum(1 for l, h in zip(f.lo, f.hi) if l < h)


def polygon_edges(body: Polytope) -> list[Segment]:
    """Edges of a bounded polygon given by halfplanes (d=2, exact)."""
    verts = _polygon_vertices(body)
    edges = []
    for row, bi in zip(body.A, body.b):
        on_face = [v for v in verts
                   if sum(a * x for a, x in zip(row, v)) == bi]
        if len(on_face) < 2:
            continue
        # order along the face direction and keep the extreme pair
        direction = (-row[1], row[0])
        on_face.sort(key=lambda v: v[0] * direction[0] + v[1] * direction[1])
        if on_face[0] != on_face[-1]:
            edges.append(Segment(on_face[0], on_face[-1]))
    return edges


def _polygon_vertices(body: Polytope) -> list[tuple[Fraction, Fraction]]:
    rows = list(zip(body.A, body.b))
    verts = set()
    for (a1, b1), (a2, b2) in itertools.combinations(rows, 2):
        det = a1[0] * a2[1] - a1[1] * a2[0]
        if det == 0:
            continue
        x = (b1 * a2[1] - b2 * a1[1]) / det
        y = (a1[0] * b2 - a2[0] * b1) / det
        if body.contains((x, y), closed=True):
            verts.add((x, y))
    if len(verts) < 3:
        raise DomainGeometryError("polytope body is degenerate or unbounded")
    return sorted(verts)


def _clip_segment_to_region(seg: Segment, part) -> list[Segment]:
    # constrain t in [0,1] for y(t) = p + t (q - p) against the part's closure
    t0, t1 = Fraction(0), Fraction(1)
    if isinstance(part, Box):
        rows = []
        for i in range(2):
            e = [Fraction(0), Fraction(0)]
            e[i] = Fraction(1)
            rows.append((tuple(e), part.hi[i]))
            e2 = [Fraction(0), Fraction(0)]
            e2[i] = Fraction(-1)
            rows.append((tuple(e2), -part.lo[i]))
    elif isinstance(part, Polytope):
        rows = list(zip(part.A, part.b))
    else:
        rows = [(part.a, part.b)]
    px, py = seg.p
    ux, uy = seg.q[0] - px, seg.q[1] - py
    for a, bi in rows:
        const = a[0] * px + a[1] * py
        slope = a[0] * ux + a[1] * uy
        if slope == 0:
            if const > bi:
                return []
            continue
        bound = (bi - const) / slope
        if slope > 0:
            t1 = min(t1, bound)
        else:
            t0 = max(t0, bound)
        if t0 > t1:
            return []
    return [Segment((px + t0 * ux, py + t0 * uy), (px + t1 * ux, py + t1 * uy))]


def _polygon_gamma_fragments(body: Polytope, selectors) -> list[Segment]:
    frags: list[Segment] = []
    for edge in polygon_edges(body):
        for region in selectors:
            for part in (region.parts() if isinstance(region, RegionUnion) else [region]):
                frags.extend(_clip_segment_to_region(edge, part))
    return frags


def _check_separation(f1: Sequence, f2: Sequence) -> None:
    if not f1 or not f2:
        return
    best = None
    for a in f1:
        for b in f2:
            g = fragment_gap_sq(a, b)
            best = g if best is None else min(best, g)
    if best == 0:
        raise DomainGeometryError(
            "inlet and outlet touch: the separation hypothesis requires a "
            "strictly positive distance between them"
        )


def _quadrature_region_volume(pred, bb: Box, resolution: int) -> Fraction:
    step = Fraction(1, resolution)
    half = step / 2
    starts = [_floor_multiple(l, step) for l in bb.lo]
    counts = [int(math.ceil((h - s) / step)) for s, h in zip(starts, bb.hi)]
    vol = Fraction(0)
    cellvol = step ** bb.dim
    for idx in itertools.product(*[range(c) for c in counts]):
        center = tuple(s + step * i + half for s, i in zip(starts, idx))
        if pred(center):
            vol += cellvol
    return vol


def boundary_neighborhood_volume(
    spec: DomainSpec, r: Scalar, resolution: int = 256
) -> Fraction:
    """L^d of the open L-inf r-neighborhood of the domain boundary.

    Exact for box-union bodies (the neighborhood is the intersection of the
    dilated body and the dilated complement, both box unions); quadrature for
    polytope bodies.
    """
    rr = frac(r)
    if rr <= 0:
        raise ValueError("r must be positive")
    boxes = spec.body_boxes()
    if boxes is not None:
        outer = [b.inflate(rr) for b in boxes]
        frame = _region_bbox(outer).inflate(rr)
        comp = complement_boxes(boxes, frame)
        comp_dilated = [b.inflate(rr) for b in comp]
        return intersect_volume(outer, comp_dilated)
    # polytope body: quadrature on |near boundary| test
    bb = spec.body.bounding_box().inflate(rr)

    def near_gamma(c):
        if spec.body.contains(c, closed=True):
            return spec.body.interior_depth(c) < rr
        return spec.body.dist_inf(c) < rr

    return _quadrature_region_volume(near_gamma, bb, resolution)
