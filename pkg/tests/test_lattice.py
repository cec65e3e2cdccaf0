import itertools
from fractions import Fraction

import numpy as np
import pytest

from fpplab.geometry import Box, DomainSpec, dist_inf
from fpplab.lattice import (
    DiscretizationError,
    VoxelSet,
    discretize,
    fatten,
)


def brute_force_omega(spec, n, pad=3):
    """Independent enumeration of Omega_n over a padded bounding grid."""
    bb = spec.bounding_box()
    lo = [int(np.floor(float(v) * n)) - pad for v in bb.lo]
    hi = [int(np.ceil(float(v) * n)) + pad for v in bb.hi]
    out = set()
    for k in itertools.product(*[range(l, h + 1) for l, h in zip(lo, hi)]):
        pt = tuple(Fraction(ki, n) for ki in k)
        if dist_inf(pt, spec.body) < Fraction(1, n):
            out.add(k)
    return out


def test_discretize_square_n4(square_spec):
    disc = discretize(square_spec, 4)
    assert disc.num_vertices == 25
    assert int(disc.gamma_mask.sum()) == 16
    g1 = {tuple(map(int, k)) for k in disc.network.coords[disc.gamma1_mask]}
    g2 = {tuple(map(int, k)) for k in disc.network.coords[disc.gamma2_mask]}
    assert g1 == {(0, j) for j in range(5)}
    assert g2 == {(4, j) for j in range(5)}


def test_discretize_matches_brute_force(square_spec, hourglass_spec):
    for spec, n in [(square_spec, 1), (square_spec, 4), (hourglass_spec, 5)]:
        disc = discretize(spec, n)
        got = {tuple(map(int, k)) for k in disc.network.coords}
        assert got == brute_force_omega(spec, n)


def test_discretize_square_n1(square_spec):
    disc = discretize(square_spec, 1)
    assert disc.num_vertices == 4
    assert disc.num_edges == 4


def test_gamma1_edges_lead_inside(square_spec):
    disc = discretize(square_spec, 4)
    net = disc.network
    # every edge with an endpoint in Gamma1_n has its other endpoint in Omega_n
    src = set(np.nonzero(disc.gamma1_mask)[0])
    for e in range(net.num_edges):
        t, h = int(net.edge_tail[e]), int(net.edge_head[e])
        if t in src or h in src:
            assert 0 <= t < net.num_vertices and 0 <= h < net.num_vertices


def test_edge_count_bound(square_spec, hourglass_spec):
    for spec in (square_spec, hourglass_spec):
        for n in (2, 5, 8):
            disc = discretize(spec, n)
            vol = spec.neighborhood_volume(1)
            assert disc.num_edges <= 2 * disc.d * n**disc.d * float(vol)


def test_refinement_keeps_nonempty(square_spec, hourglass_spec):
    for spec in (square_spec, hourglass_spec):
        for n in (1, 2, 4):
            assert discretize(spec, n).num_vertices > 0
            assert discretize(spec, 2 * n).num_vertices > 0


def test_empty_terminals_is_reported_not_fatal():
    # an inlet selector that never meets the boundary leaves gamma1_n empty
    spec = DomainSpec.make(
        2,
        [Box.make([0, 0], [1, 1])],
        gamma1=[Box.make(["0.4", "0.4"], ["0.6", "0.6"])],
        gamma2=[Box.make([1, 0], [1, 1])],
    )
    disc = discretize(spec, 4)
    assert not disc.gamma1_mask.any()
    assert any("gamma1" in w for w in disc.warnings)
    assert disc.gamma2_mask.any()


def test_h1_violation_cited():
    with pytest.raises(Exception) as exc:
        DomainSpec.make(
            2,
            [Box.make([0, 0], [1, 1])],
            gamma1=[Box.make([0, 0], [0, 1])],
            gamma2=[Box.make([0, "0.5"], [1, "1.5"])],
        )
    assert "separation" in str(exc.value)


def test_fatten_single_vertex():
    v = fatten([(0, 0)], 2)
    assert v.volume() == Fraction(1, 4)
    bx = v.boxes()[0]
    assert bx.lo == (Fraction(-1, 4), Fraction(-1, 4))
    assert bx.hi == (Fraction(1, 4), Fraction(1, 4))


def test_fatten_two_adjacent_vertices():
    v = fatten([(0, 0), (1, 0)], 1)
    assert v.volume() == 2


def test_fatten_grid_volume(square_spec):
    disc = discretize(square_spec, 4)
    v = fatten(disc.network.coords, 4)
    assert v.volume() == Fraction(25, 16)


def test_voxel_clip_volume():
    v = fatten([(0, 0), (1, 0)], 1)  # [-0.5,1.5] x [-0.5,0.5]
    clip = [Box.make([0, 0], [2, 2])]
    assert v.clip_volume(clip) == Fraction(3, 2) * Fraction(1, 2)


def test_voxel_sym_diff():
    a = fatten([(0, 0), (1, 0)], 2)
    b = fatten([(1, 0), (2, 0)], 2)
    assert a.sym_diff_volume(b) == Fraction(2, 4)


def test_bad_scale_rejected(square_spec):
    with pytest.raises(DiscretizationError):
        discretize(square_spec, 0)
