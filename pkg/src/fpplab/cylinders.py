"""Cylinder flows and Monte Carlo estimation of the flow constant.

A cylinder is determined by a base hyperrectangle (center, integer normal
vector, Euclidean side lengths) and a half-height h.  All lattice membership
tests compare squared rational quantities, so the discrete vertex sets are
exact whatever the direction, as long as it is rational.

The flow constant estimate for a direction v is the Monte Carlo mean of
tau_n / (n^(d-1) * area(A)) at the largest requested scale; subadditivity
makes this a downward-biased estimate, which is recorded in the metadata
rather than corrected by extrapolation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .capacity import CapacityField, LawSpec, _splitmix64, sample
from .geometry import frac
from .lattice import EmptyTerminalError, LatticeNetwork, network_from_mask
from .maxflow import FlowResult, StreamFunction, solve_network_flow

__all__ = [
    "CylinderSpec",
    "NuEstimate",
    "NuTable",
    "build_cylinder",
    "tau",
    "estimate_nu",
    "nu_table",
    "integer_frame",
    "canonical_direction",
]


def integer_frame(w: Sequence[int]) -> list[tuple[int, ...]]:
    """Integer vectors orthogonal to w (and each other) spanning hyp(A).

    Gram-Schmidt on integer vectors, cleared of denominators and reduced.
    """
    w = tuple(int(x) for x in w)
    d = len(w)
    if all(x == 0 for x in w):
        raise ValueError("direction must be nonzero")
    if d == 2:
        u = (-w[1], w[0])
        return [_reduce(u)]
    if d == 3:
        # pick a canonical axis not parallel to w
        for j in range(3):
            e = [0, 0, 0]
            e[j] = 1
            cross = _cross(w, e)
            if any(cross):
                break
        u2 = _reduce(cross)
        u3 = _reduce(_cross(w, u2))
        return [u2, u3]
    raise ValueError("cylinders support d in {2, 3}")


def _cross(a, b):
    return (
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    )


def _reduce(u):
    g = 0
    for x in u:
        g = math.gcd(g, abs(int(x)))
    return tuple(int(x) // g for x in u)


def canonical_direction(w: Sequence[int]) -> tuple[int, ...]:
    """Representative of w under the lattice symmetry group (exact lookups)."""
    comps = sorted((abs(int(x)) for x in w), reverse=True)
    return _reduce(tuple(comps))


@dataclass(frozen=True)
class CylinderSpec:
    """Discretized cylinder cyl(A, h) with its boundary halves.

    ``w`` is the integer normal of the base A; ``frame`` spans A.  The
    vertex sets top/bottom are the discrete upper and lower half boundaries
    (T' and B'): cylinder vertices with a lattice neighbor outside, split by
    the sign of the normal coordinate.
    """

    n: int
    d: int
    center: tuple
    w: tuple
    frame: tuple
    side_lengths: tuple
    height: Fraction
    network: LatticeNetwork
    top_keys: frozenset
    bottom_keys: frozenset

    @property
    def base_area(self) -> Fraction:
        out = Fraction(1)
        for s in self.side_lengths:
            out *= s
        return out

    def w_norm_sq(self) -> int:
        return sum(x * x for x in self.w)

    def contains_lattice(self, k: Sequence[int]) -> bool:
        """Closed-cylinder membership of the lattice point k/n (exact)."""
        rel = [Fraction(int(ki), self.n) - ci for ki, ci in zip(k, self.center)]
        t = sum(r * wi for r, wi in zip(rel, self.w))
        if t * t > self.height**2 * self.w_norm_sq():
            return False
        for u, L in zip(self.frame, self.side_lengths):
            s = sum(r * ui for r, ui in zip(rel, u))
            usq = sum(ui * ui for ui in u)
            if s * s * 4 > L**2 * usq:
                return False
        return True

    def normal_coordinate_sign(self, k: Sequence[int]) -> int:
        rel = [Fraction(int(ki), self.n) - ci for ki, ci in zip(k, self.center)]
        t = sum(r * wi for r, wi in zip(rel, self.w))
        return (t > 0) - (t < 0)

    def top_vids(self) -> list[int]:
        return self._vids_of(self.top_keys)

    def bottom_vids(self) -> list[int]:
        return self._vids_of(self.bottom_keys)

    def _vids_of(self, keys) -> list[int]:
        return sorted(self.network.vid_of(k) for k in keys)


def build_cylinder(
    center: Iterable,
    direction: Sequence[int],
    side_lengths: Iterable,
    height,
    n: int,
) -> CylinderSpec:
    """Discretize cyl(A, h) at scale n for a rational direction.

    ``direction`` is an integer vector normal to the base A; side lengths
    are Euclidean lengths along the integer frame spanning A.
    """
    w = _reduce(tuple(int(x) for x in direction))
    d = len(w)
    c = tuple(frac(x) for x in center)
    h = frac(height)
    sides = tuple(frac(s) for s in side_lengths)
    if len(sides) != d - 1:
        raise ValueError("need d-1 side lengths for the base")
    if any(s <= 0 for s in sides):
        raise ValueError("degenerate base")
    if h < Fraction(1, n):
        raise EmptyTerminalError(
            f"cylinder of half-height {h} has no interior slab at n={n}"
        )
    frame = tuple(integer_frame(w))

    radius = float(h) + sum(float(s) for s in sides) / 2.0 + 2.0 / n
    lo = [math.floor((float(ci) - radius) * n) - 1 for ci in c]
    hi = [math.ceil((float(ci) + radius) * n) + 1 for ci in c]
    shape = tuple(h_ - l_ + 1 for l_, h_ in zip(lo, hi))
    spec_stub = CylinderSpec(
        n, d, c, w, frame, sides, h,
        network=None, top_keys=frozenset(), bottom_keys=frozenset(),
    )
    mask = np.zeros(shape, dtype=bool)
    for idx in np.ndindex(shape):
        k = tuple(i + l for i, l in zip(idx, lo))
        if spec_stub.contains_lattice(k):
            mask[idx] = True
    if not mask.any():
        raise EmptyTerminalError("cylinder contains no lattice vertices")
    net = network_from_mask(n, lo, mask)

    from .lattice import boundary_vertex_mask

    boundary = boundary_vertex_mask(mask)
    top, bottom = set(), set()
    for idx in zip(*np.nonzero(boundary)):
        k = tuple(int(i) + l for i, l in zip(idx, lo))
        sign = spec_stub.normal_coordinate_sign(k)
        if sign > 0:
            top.add(k)
        elif sign < 0:
            bottom.add(k)
    if not top or not bottom:
        raise EmptyTerminalError("cylinder boundary halves are empty at this scale")
    return CylinderSpec(
        n, d, c, w, frame, sides, h, net, frozenset(top), frozenset(bottom)
    )


def tau(
    cyl: CylinderSpec,
    law_or_caps,
    seed: "int | None" = None,
    replicate: int = 0,
    mode: str = "exact",
) -> tuple[StreamFunction, FlowResult]:
    """Maximal flow between the two boundary halves of the cylinder."""
    if isinstance(law_or_caps, CapacityField):
        caps = law_or_caps
        if caps.network is not cyl.network:
            caps = CapacityField.from_values(cyl.network, caps.values)
    else:
        if seed is None:
            raise ValueError("sampling a law requires a seed")
        caps = sample(law_or_caps, cyl.network, seed, replicate)
    return solve_network_flow(
        cyl.network, caps, cyl.bottom_vids(), cyl.top_vids(), mode
    )


# ---------------------------------------------------------------------------
# Flow constant estimation
# ---------------------------------------------------------------------------


def direction_seed(master_seed: int, direction: Sequence[int]) -> int:
    """Stable per-direction sub-seed; opposite directions draw independently."""
    h = master_seed & 0xFFFFFFFFFFFFFFFF
    for comp in direction:
        h = _splitmix64(h ^ (int(comp) & 0xFFFFFFFFFFFFFFFF))
    return h


@dataclass(frozen=True)
class NuEstimate:
    """Monte Carlo estimate of the flow constant in one direction."""

    direction: tuple                  # integer vector as given
    rows: tuple                       # (n, mean, stderr, replicates)
    law: dict
    base_area: float
    height: float
    master_seed: int
    bias_note: str = (
        "estimate is the largest-n sample mean; subadditivity biases it downward"
    )

    @property
    def value(self) -> float:
        return self.rows[-1][1]

    @property
    def stderr(self) -> float:
        return self.rows[-1][2]

    @property
    def unit_direction(self) -> tuple:
        norm = math.sqrt(sum(x * x for x in self.direction))
        return tuple(x / norm for x in self.direction)

    @property
    def canonical(self) -> tuple:
        return canonical_direction(self.direction)

    def extension(self, vec: Sequence[float]) -> float:
        """Homogeneous extension along this estimate's own direction."""
        norm = math.sqrt(sum(float(x) ** 2 for x in vec))
        return norm * self.value

    def as_rows(self):
        v = self.unit_direction
        for n, mean, stderr, reps in self.rows:
            yield (*v, n, mean, stderr, reps)


def estimate_nu(
    direction: Sequence[int],
    side_lengths: Iterable,
    height,
    n_list: Sequence[int],
    replicates: int,
    law: LawSpec,
    master_seed: int,
    center: "Iterable | None" = None,
    mode: str = "exact",
) -> NuEstimate:
    """Estimate the flow constant for a rational direction.

    Per-n sample means and standard errors of tau_n/(n^(d-1) area(A)); the
    recorded value is the largest-n mean.
    """
    if list(n_list) != sorted(set(n_list)):
        raise ValueError("n_list must be strictly increasing")
    if replicates < 1:
        raise ValueError("need at least one replicate")
    d = len(tuple(direction))
    c = tuple(center) if center is not None else (Fraction(0),) * d
    seed = direction_seed(master_seed, direction)
    rows = []
    area = None
    for n in n_list:
        cyl = build_cylinder(c, direction, side_lengths, height, n)
        area = cyl.base_area
        scale = Fraction(n ** (d - 1)) * area
        vals = []
        for rep in range(replicates):
            _, res = tau(cyl, law, seed=seed, replicate=rep, mode=mode)
            vals.append(float(res.phi / scale))
        mean = sum(vals) / len(vals)
        if len(vals) > 1:
            var = sum((v - mean) ** 2 for v in vals) / (len(vals) - 1)
            stderr = math.sqrt(var / len(vals))
        else:
            stderr = 0.0
        rows.append((n, mean, stderr, replicates))
    return NuEstimate(
        tuple(int(x) for x in direction),
        tuple(rows),
        law.describe(),
        float(area),
        float(frac(height)),
        master_seed,
    )


@dataclass(frozen=True)
class NuTable:
    """Tabulated flow-constant estimates with a spherical interpolator.

    Lookups canonicalize directions by the lattice symmetries; between
    tabulated directions (d=2) the positively homogeneous extension is
    interpolated linearly, which preserves convexity of the extension.
    """

    entries: tuple
    convexity_warnings: tuple = ()

    def entry_for(self, direction: Sequence[int]) -> "NuEstimate | None":
        key = canonical_direction(direction)
        for e in self.entries:
            if e.canonical == key:
                return e
        return None

    def nu_hat(self, vec: Sequence[float]) -> float:
        """Homogeneous extension at an arbitrary vector."""
        v = [float(x) for x in vec]
        norm = math.sqrt(sum(x * x for x in v))
        if norm == 0:
            return 0.0
        # exact canonical hit
        as_int = _rationalize(v)
        if as_int is not None:
            e = self.entry_for(as_int)
            if e is not None:
                return norm * e.value
        if len(v) != 2:
            raise ValueError(
                "interpolation between tabulated directions is only available "
                "in d=2; tabulate the needed direction exactly"
            )
        return norm * self._interp_2d(v)

    def _interp_2d(self, v) -> float:
        # fold into the fundamental domain [0, pi/4] of the square symmetries
        a, b = abs(v[0]), abs(v[1])
        if a < b:
            a, b = b, a
        theta = math.atan2(b, a)
        pts = []
        for e in self.entries:
            ca, cb = e.canonical[0], e.canonical[1] if len(e.canonical) > 1 else 0
            pts.append((math.atan2(cb, ca), e.value))
        pts.sort()
        below = [(t, val) for t, val in pts if t <= theta + 1e-15]
        above = [(t, val) for t, val in pts if t >= theta - 1e-15]
        limit = math.radians(30)
        if below and above:
            t1, v1 = below[-1]
            t2, v2 = above[0]
            if abs(t1 - theta) > limit and abs(t2 - theta) > limit:
                raise ValueError("no tabulated direction within 30 degrees")
            if abs(t2 - t1) < 1e-12:
                return v1
            # express the unit query as a positive combination of the two
            # bracketing unit directions and combine their values linearly
            u1 = (math.cos(t1), math.sin(t1))
            u2 = (math.cos(t2), math.sin(t2))
            q = (math.cos(theta), math.sin(theta))
            det = u1[0] * u2[1] - u1[1] * u2[0]
            alpha = (q[0] * u2[1] - q[1] * u2[0]) / det
            beta = (u1[0] * q[1] - u1[1] * q[0]) / det
            return alpha * v1 + beta * v2
        side = below or above
        t1, v1 = side[-1] if below else side[0]
        if abs(t1 - theta) > limit:
            raise ValueError("no tabulated direction within 30 degrees")
        return v1

    def as_json(self) -> dict:
        return {
            "entries": [
                {
                    "direction": list(e.direction),
                    "unit_direction": list(e.unit_direction),
                    "value": e.value,
                    "stderr": e.stderr,
                    "rows": [list(r) for r in e.rows],
                    "law": e.law,
                    "bias_note": e.bias_note,
                }
                for e in self.entries
            ],
            "convexity_warnings": list(self.convexity_warnings),
        }


def _rationalize(v, max_den: int = 1_000_000) -> "tuple[int, ...] | None":
    fr = [Fraction(x).limit_denominator(max_den) for x in v]
    den = 1
    for f in fr:
        den = den * f.denominator // math.gcd(den, f.denominator)
    ints = [int(f * den) for f in fr]
    approx = [i / den for i in ints]
    if all(abs(a - float(x)) <= 1e-12 * max(1.0, abs(float(x))) for a, x in zip(approx, v)):
        return _reduce(tuple(ints))
    return None


def nu_table(
    directions: Sequence[Sequence[int]],
    side_lengths: Iterable,
    height,
    n_list: Sequence[int],
    replicates: int,
    law: LawSpec,
    master_seed: int,
    mode: str = "exact",
) -> NuTable:
    """Tabulate the flow constant over a direction list with a convexity check."""
    entries = tuple(
        estimate_nu(
            v, side_lengths, height, n_list, replicates, law, master_seed, mode=mode
        )
        for v in directions
    )
    warnings = []
    if len(entries) >= 3:
        warnings = _convexity_warnings(entries)
    return NuTable(entries, tuple(warnings))


def _convexity_warnings(entries) -> list[str]:
    # midpoint convexity of the homogeneous extension: for tabulated unit
    # directions u, v whose sum direction is also tabulated,
    # nu(u + v) <= nu(u) + nu(v) up to 3 combined standard errors
    by_key = {e.canonical: e for e in entries}
    out = []
    seen = set()
    for i, ei in enumerate(entries):
        for ej in entries[i + 1:]:
            u = ei.unit_direction
            v = ej.unit_direction
            s = tuple(a + b for a, b in zip(u, v))
            key_int = _rationalize(s)
            if key_int is None:
                continue
            key = canonical_direction(key_int)
            em = by_key.get(key)
            if em is None or key in (ei.canonical, ej.canonical):
                continue
            tag = tuple(sorted((ei.canonical, ej.canonical, key)))
            if tag in seen:
                continue
            seen.add(tag)
            norm_s = math.sqrt(sum(x * x for x in s))
            lhs = norm_s * em.value
            rhs = ei.value + ej.value
            tol = 3 * math.sqrt(
                ei.stderr**2 + ej.stderr**2 + (norm_s * em.stderr) ** 2
            )
            if lhs > rhs + tol:
                out.append(
                    f"midpoint convexity violated beyond 3 SE for "
                    f"{ei.canonical}+{ej.canonical} vs {key}: "
                    f"{lhs:.6g} > {rhs:.6g} + {tol:.3g}"
                )
    return out
