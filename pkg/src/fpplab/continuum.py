"""Continuum capacity of polyhedral candidate sets and convergence experiments.

The capacity functional of a candidate region F inside the domain adds three
face classes: faces of F interior to the domain, faces of F lying on the
outlet, and inlet boundary left exposed by F (weighted by the domain's
outward normal there).  Candidate sets are box unions, so the face
decomposition is exact: a joint coordinate compression over the candidate,
the domain body and the inlet/outlet fragments splits every face before
classification.

The experiment drivers run (scale, replicate) grids of max-flow instances,
extract minimal cutsets, and record rescaled flows, symmetric-difference
distances to a reference set, and the restriction bound, in deterministic
row order.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence

from .capacity import LawSpec, sample
from .cutset import cut_region, min_cutset
from .cylinders import NuTable
from .geometry import (
    Box,
    DomainSpec,
    boundary_neighborhood_volume,
    union_volume,
)
from .lattice import discretize
from .maxflow import max_flow

__all__ = [
    "CandidateSet",
    "CapaResult",
    "ExperimentRow",
    "ConvergenceReport",
    "capa_polyhedral",
    "lln_experiment",
    "cut_convergence",
]

_ZERO_CLASSES = ("gamma1_covered", "gamma_other", "omega_complement")


@dataclass(frozen=True)
class Face:
    box: Box
    axis: int
    sign: int           # outward normal sign along the axis
    cls: str            # interior | gamma2 | gamma1_exposed | zero classes

    def area(self) -> Fraction:
        a = Fraction(1)
        for i, (l, h) in enumerate(zip(self.box.lo, self.box.hi)):
            if i != self.axis:
                a *= h - l
        return a

    def normal(self) -> tuple:
        out = [0.0] * self.box.dim
        out[self.axis] = float(self.sign)
        return tuple(out)


@dataclass(frozen=True)
class CandidateSet:
    """Polyhedral candidate F inside the domain with classified faces."""

    boxes: tuple
    spec: DomainSpec
    faces: tuple

    @staticmethod
    def make(boxes: Sequence[Box], spec: DomainSpec) -> "CandidateSet":
        body = spec.body_boxes()
        if body is None:
            raise ValueError("candidate sets require a box-union domain body")
        fboxes = [b for b in boxes if b.is_proper()]
        if fboxes:
            outside = _volume_difference(fboxes, body)
            if outside != 0:
                raise ValueError(
                    f"candidate set leaves the domain (volume {outside})"
                )
        faces = _classify_faces(fboxes, body, spec)
        return CandidateSet(tuple(fboxes), spec, tuple(faces))

    @staticmethod
    def empty(spec: DomainSpec) -> "CandidateSet":
        return CandidateSet.make([], spec)

    def volume(self) -> Fraction:
        return union_volume(list(self.boxes))

    def faces_of_class(self, cls: str):
        return [f for f in self.faces if f.cls == cls]


def _volume_difference(A: Sequence[Box], B: Sequence[Box]) -> Fraction:
    # volume of A minus union B (exact)
    from .geometry import _boxes_sym_diff_volume, intersect_volume

    vol_a = union_volume(list(A))
    return vol_a - intersect_volume(list(A), list(B))


def _classify_faces(fboxes, body, spec: DomainSpec):
    d = spec.d
    coords = [set() for _ in range(d)]
    frag_boxes = [f for f in spec.gamma1_fragments + spec.gamma2_fragments
                  if isinstance(f, Box)]
    for bx in itertools.chain(fboxes, body, frag_boxes):
        for i in range(d):
            coords[i].add(bx.lo[i])
            coords[i].add(bx.hi[i])
    coords = [sorted(c) for c in coords]

    def cell_in(idx, boxes) -> bool:
        lo = tuple(coords[i][j] for i, j in enumerate(idx))
        hi = tuple(coords[i][j + 1] for i, j in enumerate(idx))
        cell = Box(lo, hi)
        from .geometry import _cell_in_union

        return _cell_in_union(cell, boxes)

    faces = []
    for axis in range(d):
        other = [i for i in range(d) if i != axis]
        ranges = [range(len(coords[i]) - 1) for i in other]
        for pj, plane in enumerate(coords[axis]):
            for oidx in itertools.product(*ranges):
                below = _slab_index(axis, pj - 1, other, oidx, coords)
                above = _slab_index(axis, pj, other, oidx, coords)
                inF_lo = below is not None and cell_in(below, fboxes)
                inF_hi = above is not None and cell_in(above, fboxes)
                inO_lo = below is not None and cell_in(below, body)
                inO_hi = above is not None and cell_in(above, body)
                rec = _face_class(inF_lo, inF_hi, inO_lo, inO_hi)
                if rec is None:
                    continue
                sign, kind = rec
                lo = [None] * d
                hi = [None] * d
                lo[axis] = hi[axis] = plane
                for i, j in zip(other, oidx):
                    lo[i] = coords[i][j]
                    hi[i] = coords[i][j + 1]
                face_box = Box(tuple(lo), tuple(hi))
                if kind == "boundary_F" or kind == "boundary_rest":
                    cls = _gamma_class(face_box, spec, kind)
                else:
                    cls = kind
                faces.append(Face(face_box, axis, sign, cls))
    return faces


def _slab_index(axis, j, other, oidx, coords):
    if j < 0 or j >= len(coords[axis]) - 1:
        return None
    idx = [None] * len(coords)
    idx[axis] = j
    for i, k in zip(other, oidx):
        idx[i] = k
    return tuple(idx)


def _face_class(inF_lo, inF_hi, inO_lo, inO_hi):
    """(outward sign, kind) of the facet, or None when nothing separates."""
    if inF_lo and inO_hi and not inF_hi:
        return (+1, "interior")
    if inF_hi and inO_lo and not inF_lo:
        return (-1, "interior")
    if inF_lo and not inO_hi:
        return (+1, "boundary_F")
    if inF_hi and not inO_lo:
        return (-1, "boundary_F")
    if inO_lo and not inF_lo and not inO_hi:
        return (+1, "boundary_rest")
    if inO_hi and not inF_hi and not inO_lo:
        return (-1, "boundary_rest")
    return None


def _gamma_class(face_box: Box, spec: DomainSpec, kind: str) -> str:
    in_g1 = _face_in_fragments(face_box, spec.gamma1_fragments)
    in_g2 = _face_in_fragments(face_box, spec.gamma2_fragments)
    if kind == "boundary_F":
        if in_g2:
            return "gamma2"
        if in_g1:
            return "gamma1_covered"
        return "gamma_other"
    # boundary of (Omega minus F)
    if in_g1:
        return "gamma1_exposed"
    return "omega_complement"


def _face_in_fragments(face_box: Box, fragments) -> bool:
    center = tuple((l + h) / 2 for l, h in zip(face_box.lo, face_box.hi))
    for f in fragments:
        if isinstance(f, Box) and f.contains(center, closed=True):
            return True
    return False


@dataclass(frozen=True)
class CapaResult:
    value: float
    stderr: float
    terms: dict

    def __float__(self):
        return self.value


def capa_polyhedral(F: CandidateSet, nu, spec: "DomainSpec | None" = None) -> CapaResult:
    """Capacity of a candidate set under a flow-constant table.

    Adds area times nu(normal) over the interior faces of F, its outlet
    faces, and the inlet area left exposed (with the domain outward normal).
    ``nu`` may be a NuTable or a plain callable on unit vectors.
    """
    if isinstance(nu, NuTable):
        nu_hat = nu.nu_hat
        se_hat = _table_se(nu)
    else:
        nu_hat = nu
        se_hat = lambda v: 0.0
    total = 0.0
    var = 0.0
    terms: dict[str, list] = {}
    for cls in ("interior", "gamma2", "gamma1_exposed"):
        area_sum = Fraction(0)
        contrib = 0.0
        for face in F.faces:
            if face.cls != cls:
                continue
            normal = face.normal()
            a = face.area()
            area_sum += a
            contrib += float(a) * nu_hat(normal)
            var += (float(a) * se_hat(normal)) ** 2
        terms[cls] = [float(area_sum), contrib]
        total += contrib
    return CapaResult(total, math.sqrt(var), terms)


def _table_se(table: NuTable) -> Callable:
    def se(v):
        from .cylinders import _rationalize, canonical_direction

        key = _rationalize([float(x) for x in v])
        if key is not None:
            e = table.entry_for(key)
            if e is not None:
                norm = math.sqrt(sum(float(x) ** 2 for x in v))
                return norm * e.stderr
        return 0.0

    return se


# ---------------------------------------------------------------------------
# Convergence experiments
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExperimentRow:
    n: int
    seed: int
    replicate: int
    phi: Fraction
    phi_rescaled: float
    cut_card: int
    cut_capacity: float
    dist_to_ref: "float | None"
    dist_RE_E: "float | None"
    boundary_bound: "float | None"
    runtime_ms: float

    def as_csv_row(self, with_runtime: bool = False):
        # runtime is wall-clock telemetry: left blank by default so result
        # bodies stay byte-identical across runs and thread counts
        def opt(x):
            return "" if x is None else repr(float(x))

        return (
            self.n, self.seed, self.replicate, repr(self.phi_rescaled),
            self.cut_card, repr(self.cut_capacity), opt(self.dist_to_ref),
            opt(self.dist_RE_E), opt(self.boundary_bound),
            repr(self.runtime_ms) if with_runtime else "",
        )


CSV_HEADER = (
    "n", "seed", "replicate", "phi_rescaled", "cut_card", "cut_capacity",
    "dist_to_ref", "dist_RE_E", "boundary_bound", "runtime_ms",
)


@dataclass(frozen=True)
class ConvergenceReport:
    rows: tuple
    summary: dict
    duality_violations: tuple
    capa_ref: "CapaResult | None" = None

    def rows_for_n(self, n: int):
        return [r for r in self.rows if r.n == n]


def _stats(values):
    m = sum(values) / len(values)
    if len(values) > 1:
        var = sum((v - m) ** 2 for v in values) / (len(values) - 1)
        return m, math.sqrt(var / len(values)), math.sqrt(var)
    return m, 0.0, 0.0


def _run_instance(spec, law, n, replicate, master_seed, F_ref_boxes, mode):
    disc = discretize(spec, n)
    caps = sample(law, disc.network, master_seed, replicate)
    stream, result = max_flow(disc, caps, mode=mode)
    cut = min_cutset(disc, caps, stream)
    dist_to_ref = dist_re = bound = None
    if F_ref_boxes is not None:
        region = cut_region(cut, spec)
        dist_to_ref = float(region.dist_to(F_ref_boxes))
        dist_re = float(region.dist_R_to_E())
        bound = float(boundary_neighborhood_volume(spec, Fraction(1, n)))
    return ExperimentRow(
        n=n,
        seed=master_seed,
        replicate=replicate,
        phi=result.phi,
        phi_rescaled=float(result.phi_rescaled),
        cut_card=cut.cardinality,
        cut_capacity=float(cut.capacity),
        dist_to_ref=dist_to_ref,
        dist_RE_E=dist_re,
        boundary_bound=bound,
        runtime_ms=result.runtime_ms,
    )


def _run_grid(spec, law, n_list, replicates, master_seed, F_ref_boxes, mode, threads):
    jobs = [(n, r) for n in n_list for r in range(replicates)]
    results = {}
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futs = {
                (n, r): pool.submit(
                    _run_instance, spec, law, n, r, master_seed, F_ref_boxes, mode
                )
                for n, r in jobs
            }
            for key, fut in futs.items():
                results[key] = fut.result()
    else:
        for n, r in jobs:
            results[(n, r)] = _run_instance(
                spec, law, n, r, master_seed, F_ref_boxes, mode
            )
    return tuple(results[key] for key in sorted(results))


def lln_experiment(
    spec: DomainSpec,
    law: LawSpec,
    n_list: Sequence[int],
    replicates: int,
    master_seed: int,
    F_ref: "CandidateSet | None" = None,
    nu: "NuTable | Callable | None" = None,
    mode: str = "exact",
    threads: int = 1,
) -> ConvergenceReport:
    """Rescaled maximal flows across scales, with an optional duality check.

    When a candidate reference set and a flow-constant table are supplied,
    every row is checked against flow <= capa(F_ref) + 3 combined errors.
    """
    if list(n_list) != sorted(set(n_list)):
        raise ValueError("n_list must be strictly increasing")
    boxes = list(F_ref.boxes) if F_ref is not None else None
    rows = _run_grid(
        spec, law, n_list, replicates, master_seed, boxes, mode, threads
    )
    capa_ref = None
    if F_ref is not None and nu is not None:
        capa_ref = capa_polyhedral(F_ref, nu)
    summary = {}
    violations = []
    for n in n_list:
        vals = [r.phi_rescaled for r in rows if r.n == n]
        mean, se, sd = _stats(vals)
        entry = {"mean": mean, "stderr": se, "sd": sd, "replicates": len(vals)}
        if capa_ref is not None:
            entry["capa_ref"] = capa_ref.value
            tol = 3 * math.sqrt(capa_ref.stderr**2 + sd**2)
            for r in rows:
                if r.n == n and r.phi_rescaled > capa_ref.value + tol:
                    violations.append(
                        f"n={n} replicate={r.replicate}: flow {r.phi_rescaled:.6g} "
                        f"exceeds capa {capa_ref.value:.6g} + {tol:.3g}"
                    )
        summary[n] = entry
    return ConvergenceReport(rows, summary, tuple(violations), capa_ref)


def cut_convergence(
    spec: DomainSpec,
    law: LawSpec,
    n_list: Sequence[int],
    F_ref: CandidateSet,
    replicates: int,
    master_seed: int,
    mode: str = "exact",
    threads: int = 1,
) -> ConvergenceReport:
    """Distances of the minimal-cutset regions to a reference set across scales."""
    if list(n_list) != sorted(set(n_list)):
        raise ValueError("n_list must be strictly increasing")
    rows = _run_grid(
        spec, law, n_list, replicates, master_seed, list(F_ref.boxes), mode, threads
    )
    summary = {}
    violations = []
    for n in n_list:
        sel = [r for r in rows if r.n == n]
        mean, se, sd = _stats([r.dist_to_ref for r in sel])
        summary[n] = {
            "dist_mean": mean,
            "dist_stderr": se,
            "replicates": len(sel),
        }
        for r in sel:
            if r.dist_RE_E is not None and r.dist_RE_E > r.boundary_bound + 1e-12:
                violations.append(
                    f"n={n} replicate={r.replicate}: restriction distance "
                    f"{r.dist_RE_E:.6g} exceeds the boundary shell bound "
                    f"{r.boundary_bound:.6g}"
                )
    return ConvergenceReport(rows, summary, tuple(violations))
