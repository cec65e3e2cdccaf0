import random
from fractions import Fraction

import pytest

from fpplab.capacity import CapacityField, LawSpec, sample
from fpplab.geometry import Box, DomainSpec
from fpplab.lattice import EmptyTerminalError, discretize
from fpplab.maxflow import (
    brute_force_min_cut_value,
    canonicalize_stream,
    max_flow,
    solve_network_flow,
    verify_stream,
)


def tiny_spec(width=1, height=0):
    """A 1 x height strip; at n=1 it has (width+1) x (height+1) vertices."""
    return DomainSpec.make(
        2,
        [Box.make([0, 0], [width, max(height, 1)])],
        gamma1=[Box.make([0, 0], [0, max(height, 1)])],
        gamma2=[Box.make([width, 0], [width, max(height, 1)])],
    )


def test_single_edge_instance():
    import numpy as np

    from fpplab.lattice import network_from_mask

    mask = np.ones((2, 1), dtype=bool)
    net = network_from_mask(1, (0, 0), mask)
    assert net.num_edges == 1
    caps = CapacityField.from_values(net, [3])
    s, r = solve_network_flow(net, caps, [0], [1])
    assert r.phi == 3
    assert s.flows[0] == 3  # oriented along +x
    rep = verify_stream(s)
    assert rep.admissible


def test_square_constant_capacity(square_spec):
    disc = discretize(square_spec, 4)
    caps = sample(LawSpec.constant(1), disc.network, seed=0)
    s, r = max_flow(disc, caps)
    assert r.phi == 5
    assert r.phi_rescaled == Fraction(5, 4)
    assert verify_stream(s).admissible


def test_square_matches_brute_force_random():
    spec = tiny_spec()
    rng = random.Random(123)
    for trial in range(30):
        n = rng.choice([2, 3])
        disc = discretize(spec, n)
        caps = CapacityField.from_values(
            disc.network,
            [rng.randint(1, 5) for _ in range(disc.network.num_edges)],
        )
        s, r = max_flow(disc, caps)
        oracle = brute_force_min_cut_value(
            disc.network, caps, disc.source_vids(), disc.sink_vids()
        )
        assert r.phi == oracle


def test_subcritical_zero_flow_frequency(square_spec):
    # bernoulli(0.3) in d=2 is subcritical: phi_n = 0 should dominate; the
    # zero-flow oracle is a positive-capacity path search
    disc = discretize(square_spec, 16)
    law = LawSpec.bernoulli("0.3", 1)
    zeros = 0
    trials = 12
    for rep in range(trials):
        caps = sample(law, disc.network, seed=99, replicate=rep)
        s, r = max_flow(disc, caps)
        has_path = _positive_path_exists(disc, caps)
        assert (r.phi > 0) == has_path
        if r.phi == 0:
            zeros += 1
    assert zeros >= trials // 2


def _positive_path_exists(disc, caps):
    net = disc.network
    adj = [[] for _ in range(net.num_vertices)]
    for e in range(net.num_edges):
        if caps.value(e) > 0:
            t, h = int(net.edge_tail[e]), int(net.edge_head[e])
            adj[t].append(h)
            adj[h].append(t)
    seen = set(map(int, disc.source_vids()))
    stack = list(seen)
    sinks = set(map(int, disc.sink_vids()))
    while stack:
        v = stack.pop()
        if v in sinks:
            return True
        for w in adj[v]:
            if w not in seen:
                seen.add(w)
                stack.append(w)
    return False


def test_scaling_by_lambda(square_spec):
    disc = discretize(square_spec, 3)
    rng = random.Random(5)
    vals = [rng.randint(0, 4) for _ in range(disc.network.num_edges)]
    c1 = CapacityField.from_values(disc.network, vals)
    c2 = CapacityField.from_values(disc.network, [2 * v for v in vals])
    _, r1 = max_flow(disc, c1)
    _, r2 = max_flow(disc, c2)
    assert r2.phi == 2 * r1.phi


def test_axis_reflection_negates_flow(square_spec):
    # reflecting the instance through x -> 1-x swaps the terminals and maps
    # each horizontal edge (0,(i,j)) to (0,(3-i... at n=4: (n-1-i, j));
    # phi is unchanged and the flow field is the reflected negation
    n = 4
    disc = discretize(square_spec, n)
    net = disc.network
    rng = random.Random(11)
    axis, coords = net.edge_keys()
    mapping = {}
    for a, k in zip(axis, coords):
        mapping[(int(a), tuple(map(int, k)))] = rng.randint(1, 4)
    caps = CapacityField.from_edge_map(net, mapping)

    def reflect_key(a, k):
        i, j = k
        if a == 0:
            return (0, (n - 1 - i, j))
        return (1, (n - i, j))

    refl_mapping = {reflect_key(a, k): v for (a, k), v in mapping.items()}
    refl_caps = CapacityField.from_edge_map(net, refl_mapping)
    s1, r1 = max_flow(disc, caps)
    # swap terminals: flow right-to-left on the reflected capacities
    s2, r2 = solve_network_flow(
        net, refl_caps, disc.sink_vids(), disc.source_vids()
    )
    assert r1.phi == r2.phi
    # the reflected stream of s1 is feasible for the second problem with
    # horizontal flows negated; compare flow through the reflected edges
    f1 = {}
    for e in range(net.num_edges):
        a, k = int(axis[e]), tuple(map(int, coords[e]))
        f1[reflect_key(a, k)] = s1.flows[e] * (-1 if a == 0 else 1)
    total = Fraction(0)
    for e in range(net.num_edges):
        a, k = int(axis[e]), tuple(map(int, coords[e]))
        if k[0] == 0 and a == 0:
            total += -f1[(a, k)]  # reflected flow into the left column
    assert abs(total) == r1.phi


def test_canonicalize_removes_cycle(square_spec):
    disc = discretize(square_spec, 2)
    net = disc.network
    vids = {tuple(map(int, k)): i for i, k in enumerate(net.coords)}
    caps = CapacityField.from_values(net, [2] * net.num_edges)
    # path flow 1 along the bottom row plus a cycle of 1/2 around the lower
    # left square
    flows = [Fraction(0)] * net.num_edges
    axis, coords = net.edge_keys()
    eidx = {
        (int(a), tuple(map(int, k))): e for e, (a, k) in enumerate(zip(axis, coords))
    }
    for i in range(2):
        flows[eidx[(0, (i, 0))]] = Fraction(1)
    half = Fraction(1, 2)
    flows[eidx[(0, (0, 0))]] += half
    flows[eidx[(1, (1, 0))]] += half
    flows[eidx[(0, (0, 1))]] -= half
    flows[eidx[(1, (0, 0))]] -= half
    from fpplab.maxflow import StreamFunction

    s = StreamFunction(
        net, caps, tuple(flows),
        frozenset(map(int, disc.source_vids())),
        frozenset(map(int, disc.sink_vids())),
    )
    assert s.flow_value_raw() == 1
    c = canonicalize_stream(s)
    assert c.flow_value_raw() == 1
    assert verify_stream(c).admissible
    # the cycle is gone: flow lives on the bottom row only
    for e in range(net.num_edges):
        expect = 1 if (int(axis[e]), tuple(map(int, coords[e]))) in (
            (0, (0, 0)), (0, (1, 0))
        ) else 0
        assert c.flows[e] == expect
    # idempotent
    c2 = canonicalize_stream(c)
    assert c2.flows == c.flows


def test_canonicalize_zero_stream(square_spec):
    disc = discretize(square_spec, 2)
    caps = CapacityField.from_values(disc.network, [1] * disc.network.num_edges)
    from fpplab.maxflow import StreamFunction

    z = StreamFunction(
        disc.network, caps, tuple([Fraction(0)] * disc.network.num_edges),
        frozenset(map(int, disc.source_vids())),
        frozenset(map(int, disc.sink_vids())),
    )
    c = canonicalize_stream(z)
    assert all(f == 0 for f in c.flows)


def test_canonicalize_contract_on_random_maximal_streams(square_spec):
    rng = random.Random(2024)
    for trial in range(20):
        n = rng.choice([2, 3, 4])
        disc = discretize(square_spec, n)
        caps = CapacityField.from_values(
            disc.network,
            [rng.randint(0, 3) for _ in range(disc.network.num_edges)],
        )
        s, r = max_flow(disc, caps)
        c = canonicalize_stream(s)
        assert c.flow_value_raw() == r.phi
        assert verify_stream(c).admissible
        # no flow enters the inlet class
        net = disc.network
        for e in range(net.num_edges):
            t, h = int(net.edge_tail[e]), int(net.edge_head[e])
            if t in c.sources and h not in c.sources:
                assert c.flows[e] >= 0
            if h in c.sources and t not in c.sources:
                assert c.flows[e] <= 0
        assert canonicalize_stream(c).flows == c.flows


def test_verify_stream_detects_violations(square_spec):
    disc = discretize(square_spec, 2)
    caps = sample(LawSpec.constant(1), disc.network, seed=0)
    s, _ = max_flow(disc, caps)
    flows = list(s.flows)
    flows[0] = caps.value(0) + 1
    bad = s.with_flows(flows)
    rep = verify_stream(bad)
    assert rep.max_capacity_violation == 1
    assert not rep.admissible


def test_empty_terminals_raise():
    spec = DomainSpec.make(
        2,
        [Box.make([0, 0], [1, 1])],
        gamma1=[Box.make(["0.4", "0.4"], ["0.6", "0.6"])],  # never meets gamma
        gamma2=[Box.make([1, 0], [1, 1])],
    )
    disc = discretize(spec, 2)
    caps = sample(LawSpec.constant(1), disc.network, seed=0)
    with pytest.raises(EmptyTerminalError):
        max_flow(disc, caps)


def test_float_mode_close_to_exact(square_spec):
    disc = discretize(square_spec, 3)
    rng = random.Random(9)
    vals = [Fraction(rng.randint(0, 8), 4) for _ in range(disc.network.num_edges)]
    caps = CapacityField.from_values(disc.network, vals)
    _, r_exact = max_flow(disc, caps, mode="exact")
    _, r_float = max_flow(disc, caps, mode="float")
    assert abs(float(r_float.phi) - float(r_exact.phi)) < 1e-9
