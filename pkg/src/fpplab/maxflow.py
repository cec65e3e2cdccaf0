"""Maximal flow on the lattice network and admissible stream functions.

The solver is a preflow-push with highest-label selection, a gap heuristic
and an initial reverse-BFS labeling, run on a residual-arc representation
where each undirected lattice edge becomes an antiparallel arc pair of equal
capacity (so the signed edge flow is capacity minus forward residual).

Terminal sets enter through a virtual super-source and super-sink joined by
arcs whose capacity, max capacity times edge count plus one, can never bind.

Two arithmetic modes: "exact" clears denominators and runs on integers (the
default; duality is verified exactly on every solve), and "float" runs on
floats with a small slack tolerance.
"""

from __future__ import annotations

import math
import time
from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .capacity import CapacityField
from .lattice import Discretization, EmptyTerminalError, LatticeNetwork

__all__ = [
    "StreamFunction",
    "FlowResult",
    "StreamReport",
    "max_flow",
    "solve_network_flow",
    "canonicalize_stream",
    "verify_stream",
    "residual_source_set",
    "brute_force_min_cut_value",
]

_FLOAT_EPS = 1e-12


@dataclass(frozen=True)
class FlowResult:
    """Value of a maximal flow with solver statistics."""

    phi: Fraction
    n: int
    d: int
    pushes: int
    relabels: int
    runtime_ms: float

    @property
    def phi_rescaled(self) -> Fraction:
        return self.phi / self.n ** (self.d - 1)

    def as_dict(self) -> dict:
        return {
            "phi": float(self.phi),
            "phi_rescaled": float(self.phi_rescaled),
            "n": self.n,
            "runtime_ms": self.runtime_ms,
            "augment_ops": self.pushes + self.relabels,
        }


@dataclass(frozen=True)
class StreamFunction:
    """Signed flow per edge, relative to the canonical +axis orientation."""

    network: LatticeNetwork
    caps: CapacityField
    flows: tuple                    # Fractions aligned with edge order
    sources: frozenset
    sinks: frozenset
    mode: str = "exact"

    def flow(self, e: int) -> Fraction:
        return self.flows[e]

    def boundary_flux(self, v: int) -> Fraction:
        """Water appearing at a vertex: inflow minus outflow on oriented edges."""
        net = self.network
        total = Fraction(0)
        for e in self._incident(v):
            if net.edge_head[e] == v:
                total += self.flows[e]
            else:
                total -= self.flows[e]
        return total

    def _incident(self, v: int):
        net = self.network
        inc = getattr(self, "_inc_cache", None)
        if inc is None:
            inc = net.incident_edges()
            object.__setattr__(self, "_inc_cache", inc)
        return inc[v]

    def flow_value_raw(self) -> Fraction:
        """Total flow out of the source class (unrescaled)."""
        return -sum((self.boundary_flux(v) for v in self.sources), Fraction(0))

    def with_flows(self, flows) -> "StreamFunction":
        return StreamFunction(
            self.network, self.caps, tuple(flows), self.sources, self.sinks, self.mode
        )


@dataclass(frozen=True)
class StreamReport:
    max_capacity_violation: Fraction
    max_conservation_residual: Fraction
    support_violations: int

    @property
    def admissible(self) -> bool:
        return (
            self.max_capacity_violation == 0
            and self.max_conservation_residual == 0
            and self.support_violations == 0
        )


def verify_stream(s: StreamFunction) -> StreamReport:
    """Residuals of the admissibility conditions (all zero iff admissible)."""
    net = s.network
    cap_viol = Fraction(0)
    for e in range(net.num_edges):
        over = abs(s.flows[e]) - s.caps.value(e)
        if over > cap_viol:
            cap_viol = over
    terminals = s.sources | s.sinks
    cons = Fraction(0)
    for v in range(net.num_vertices):
        if v in terminals:
            continue
        r = abs(s.boundary_flux(v))
        if r > cons:
            cons = r
    return StreamReport(cap_viol, cons, 0)


# ---------------------------------------------------------------------------
# Preflow-push solver
# ---------------------------------------------------------------------------


def _preflow_push(nv: int, arc_to, arc_res, adj, S: int, T: int, zero):
    """Highest-label preflow-push with gap heuristic; mutates arc_res."""
    N = nv
    height = [0] * N
    excess = [zero] * N
    count = [0] * (2 * N)
    pushes = relabels = 0

    # initial labels: BFS distance to T in the residual graph
    INF_H = N
    dist = [INF_H] * N
    dist[T] = 0
    dq = deque([T])
    while dq:
        w = dq.popleft()
        for a in adj[w]:
            u = arc_to[a]
            if dist[u] == INF_H and arc_res[a ^ 1] > zero:
                dist[u] = dist[w] + 1
                dq.append(u)
    for v in range(N):
        height[v] = dist[v] if dist[v] < INF_H else N
    height[S] = N
    for h in height:
        count[h] += 1

    buckets: list[list[int]] = [[] for _ in range(2 * N)]
    in_bucket = [False] * N

    def activate(v):
        if v != S and v != T and excess[v] > zero and not in_bucket[v]:
            buckets[height[v]].append(v)
            in_bucket[v] = True

    # saturate source arcs
    for a in adj[S]:
        x = arc_res[a]
        if x > zero:
            v = arc_to[a]
            arc_res[a] -= x
            arc_res[a ^ 1] += x
            excess[v] += x
            excess[S] -= x
            pushes += 1
            activate(v)

    cur = [0] * N
    highest = 2 * N - 1
    while True:
        while highest >= 0 and not buckets[highest]:
            highest -= 1
        if highest < 0:
            break
        v = buckets[highest].pop()
        in_bucket[v] = False
        if excess[v] <= zero:
            continue
        hv = height[v]
        arcs = adj[v]
        ci = cur[v]
        na = len(arcs)
        while excess[v] > zero:
            if ci == na:
                # relabel
                relabels += 1
                old = hv
                new_h = 2 * N - 1
                for a in arcs:
                    if arc_res[a] > zero:
                        cand = height[arc_to[a]] + 1
                        if cand < new_h:
                            new_h = cand
                count[old] -= 1
                if count[old] == 0 and old < N:
                    # gap: disconnect everything strictly above the gap
                    for u in range(N):
                        if old < height[u] < N and u != S:
                            count[height[u]] -= 1
                            height[u] = N + 1
                            count[N + 1] += 1
                height[v] = new_h
                count[new_h] += 1
                hv = new_h
                ci = 0
                if new_h >= 2 * N - 1:
                    break
                continue
            a = arcs[ci]
            w = arc_to[a]
            if arc_res[a] > zero and hv == height[w] + 1:
                x = excess[v] if excess[v] < arc_res[a] else arc_res[a]
                arc_res[a] -= x
                arc_res[a ^ 1] += x
                excess[v] -= x
                excess[w] += x
                pushes += 1
                activate(w)
            else:
                ci += 1
        cur[v] = ci if ci < na else 0
        if excess[v] > zero:
            activate(v)
        if height[v] > highest:
            highest = height[v]
    return excess[T], pushes, relabels


def _build_arcs(network: LatticeNetwork, caps_num, src, snk, sup_cap):
    nv = network.num_vertices + 2
    S, T = nv - 2, nv - 1
    arc_to: list[int] = []
    arc_res: list = []
    adj: list[list[int]] = [[] for _ in range(nv)]

    def add(u, v, c):
        a = len(arc_to)
        arc_to.append(v)
        arc_res.append(c)
        adj[u].append(a)
        arc_to.append(u)
        arc_res.append(c)
        adj[v].append(a + 1)
        return a

    edge_arc = []
    tails, heads = network.edge_tail, network.edge_head
    for e in range(network.num_edges):
        edge_arc.append(add(int(tails[e]), int(heads[e]), caps_num[e]))
    zero = 0 if isinstance(sup_cap, int) else 0.0
    for v in src:
        a = len(arc_to)
        arc_to.append(int(v))
        arc_res.append(sup_cap)
        adj[S].append(a)
        arc_to.append(S)
        arc_res.append(zero)
        adj[int(v)].append(a + 1)
    for v in snk:
        a = len(arc_to)
        arc_to.append(T)
        arc_res.append(sup_cap)
        adj[int(v)].append(a)
        arc_to.append(int(v))
        arc_res.append(zero)
        adj[T].append(a + 1)
    return nv, S, T, arc_to, arc_res, adj, edge_arc


def solve_network_flow(
    network: LatticeNetwork,
    caps: CapacityField,
    source_vids: Sequence[int],
    sink_vids: Sequence[int],
    mode: str = "exact",
) -> tuple[StreamFunction, FlowResult]:
    """Maximal flow between two vertex classes of a lattice network."""
    src = [int(v) for v in source_vids]
    snk = [int(v) for v in sink_vids]
    if not src or not snk:
        raise EmptyTerminalError("source or sink class is empty")
    if set(src) & set(snk):
        raise ValueError("source and sink classes overlap")
    t0 = time.perf_counter()
    if mode == "exact":
        ints, scale = caps.scaled_ints()
        max_int = max(ints, default=0)
        sup_cap = max_int * network.num_edges + 1
        caps_num = ints
        zero = 0
    elif mode == "float":
        caps_num = [float(v) for v in caps.values]
        scale = 1
        sup_cap = (max(caps_num, default=0.0)) * network.num_edges + 1.0
        zero = _FLOAT_EPS * (max(caps_num, default=0.0) + 1.0)
    else:
        raise ValueError(f"unknown arithmetic mode {mode!r}")

    nv, S, T, arc_to, arc_res, adj, edge_arc = _build_arcs(
        network, caps_num, src, snk, sup_cap
    )
    phi_num, pushes, relabels = _preflow_push(nv, arc_to, arc_res, adj, S, T, zero)

    flows = []
    for e in range(network.num_edges):
        a = edge_arc[e]
        net_flow = caps_num[e] - arc_res[a]
        if mode == "exact":
            flows.append(Fraction(net_flow, scale))
        else:
            flows.append(Fraction(net_flow) if net_flow else Fraction(0))
    runtime_ms = (time.perf_counter() - t0) * 1000.0

    stream = StreamFunction(
        network, caps, tuple(flows), frozenset(src), frozenset(snk), mode
    )
    phi = Fraction(phi_num, scale) if mode == "exact" else Fraction(phi_num)
    result = FlowResult(phi, network.n, network.d, pushes, relabels, runtime_ms)

    if mode == "exact":
        _verify_duality_exact(network, caps, stream, phi, arc_to, arc_res, adj, S)
    return stream, result


def _verify_duality_exact(network, caps, stream, phi, arc_to, arc_res, adj, S):
    # residual reachability from the super source; the saturated edge
    # boundary must have capacity exactly phi (max-flow min-cut)
    reach = _reachable(arc_to, arc_res, adj, S)
    cut_value = Fraction(0)
    for e in range(network.num_edges):
        t, h = int(network.edge_tail[e]), int(network.edge_head[e])
        if reach[t] != reach[h]:
            cut_value += caps.value(e)
    for v in stream.sinks:
        if reach[v]:
            raise AssertionError("residual path reaches a sink after solve")
    if cut_value != phi:
        raise AssertionError(
            f"strong duality violated: cut {cut_value} != flow {phi}"
        )
    # conservation at non-terminals
    terminals = stream.sources | stream.sinks
    for v in range(network.num_vertices):
        if v not in terminals and stream.boundary_flux(v) != 0:
            raise AssertionError("conservation violated at a non-terminal vertex")


def _reachable(arc_to, arc_res, adj, start: int):
    nv = len(adj)
    seen = [False] * nv
    seen[start] = True
    stack = [start]
    while stack:
        v = stack.pop()
        for a in adj[v]:
            w = arc_to[a]
            if not seen[w] and arc_res[a] > 0:
                seen[w] = True
                stack.append(w)
    return seen


def residual_source_set(stream: StreamFunction) -> np.ndarray:
    """Vertices reachable from the sources in the residual graph of a stream."""
    net = stream.network
    nv = net.num_vertices
    adj: list[list[tuple[int, int]]] = [[] for _ in range(nv)]
    for e in range(net.num_edges):
        t, h = int(net.edge_tail[e]), int(net.edge_head[e])
        c = stream.caps.value(e)
        f = stream.flows[e]
        if c - f > 0:
            adj[t].append((h, e))
        if c + f > 0:
            adj[h].append((t, e))
    seen = np.zeros(nv, dtype=bool)
    stack = list(stream.sources)
    for v in stack:
        seen[v] = True
    while stack:
        v = stack.pop()
        for w, _e in adj[v]:
            if not seen[w]:
                seen[w] = True
                stack.append(w)
    return seen


def max_flow(
    disc: Discretization, caps: CapacityField, mode: str = "exact"
) -> tuple[StreamFunction, FlowResult]:
    """Maximal flow from the inlet to the outlet of a discretized domain."""
    if not disc.gamma1_mask.any() or not disc.gamma2_mask.any():
        raise EmptyTerminalError(
            "inlet or outlet has no lattice vertices at this scale"
        )
    return solve_network_flow(
        disc.network, caps, disc.source_vids(), disc.sink_vids(), mode
    )


# ---------------------------------------------------------------------------
# Canonical maximal streams
# ---------------------------------------------------------------------------


def canonicalize_stream(s: StreamFunction) -> StreamFunction:
    """Rebuild a maximal stream from its source-to-sink path decomposition.

    Cycles and inlet-to-inlet pieces are dropped, so the result carries the
    same total flow, stays admissible, never sends flow into the inlet class,
    and is a sum of inlet-to-outlet paths only.  Idempotent.
    """
    rep = verify_stream(s)
    if rep.max_conservation_residual != 0:
        raise ValueError("stream is not conservative; cannot canonicalize")
    net = s.network
    nv = net.num_vertices
    # directed remaining weights: arc (vertex -> vertex) per edge and direction
    out_arcs: list[list[int]] = [[] for _ in range(nv)]
    weight = {}
    arc_head = {}
    arc_edge = {}
    for e in range(net.num_edges):
        f = s.flows[e]
        if f == 0:
            continue
        t, h = int(net.edge_tail[e]), int(net.edge_head[e])
        u, v = (t, h) if f > 0 else (h, t)
        weight[e] = abs(f)
        arc_head[e] = v
        arc_edge[e] = u
        out_arcs[u].append(e)
    terminals = s.sources | s.sinks
    kept = {}  # edge -> signed kept flow

    def record(path_edges, w, keep):
        for e in path_edges:
            weight[e] -= w
            if keep:
                sign = 1 if arc_edge[e] == int(net.edge_tail[e]) else -1
                kept[e] = kept.get(e, Fraction(0)) + sign * w

    cursor = [0] * nv

    def next_arc(v):
        lst = out_arcs[v]
        i = cursor[v]
        while i < len(lst) and weight[lst[i]] == 0:
            i += 1
        cursor[v] = i
        return lst[i] if i < len(lst) else None

    starts = sorted(s.sources) + sorted(s.sinks)
    for start in starts:
        while next_arc(start) is not None:
            path: list[int] = []
            pos: dict[int, int] = {}
            v = start
            while True:
                a = next_arc(v)
                if a is None:
                    raise ValueError(
                        "decomposition stuck: stream is not conservative"
                    )
                pos[v] = len(path)
                path.append(a)
                v = arc_head[a]
                if v in terminals:
                    w = min(weight[e] for e in path)
                    if start in s.sinks and v in s.sources:
                        raise ValueError(
                            "stream carries flow from the outlet back to the "
                            "inlet; it is not a maximal stream"
                        )
                    record(path, w, keep=(start in s.sources and v in s.sinks))
                    break
                if v in pos:
                    # excise the cycle and resume the walk at v
                    cyc_start = pos[v]
                    cyc = path[cyc_start:]
                    w = min(weight[e] for e in cyc)
                    record(cyc, w, keep=False)
                    for e in cyc:
                        pos.pop(arc_edge[e], None)
                    del path[cyc_start:]
    # any weight still left lies on cycles through non-terminals; dropped
    flows = [kept.get(e, Fraction(0)) for e in range(net.num_edges)]
    return s.with_flows(flows)


# ---------------------------------------------------------------------------
# Brute-force oracle (small instances)
# ---------------------------------------------------------------------------


def brute_force_min_cut_value(
    network: LatticeNetwork,
    caps: CapacityField,
    source_vids: Sequence[int],
    sink_vids: Sequence[int],
    max_subsets: int = 1 << 16,
) -> Fraction:
    """Minimum edge-boundary capacity over all source-side bipartitions.

    Enumerates every vertex subset containing the sources and avoiding the
    sinks; intended for instances with at most ~16 free vertices.
    """
    src = set(int(v) for v in source_vids)
    snk = set(int(v) for v in sink_vids)
    free = [v for v in range(network.num_vertices) if v not in src and v not in snk]
    if 2 ** len(free) > max_subsets:
        raise ValueError(f"too many subsets: 2^{len(free)}")
    tails, heads = network.edge_tail, network.edge_head
    best = None
    for bits in range(2 ** len(free)):
        side = set(src)
        for i, v in enumerate(free):
            if bits >> i & 1:
                side.add(v)
        val = Fraction(0)
        for e in range(network.num_edges):
            if (int(tails[e]) in side) != (int(heads[e]) in side):
                val += caps.value(e)
            if best is not None and val >= best:
                break
        else:
            best = val if best is None else min(best, val)
    return best
