"""Random edge capacities: laws, counter-based sampling, hypothesis checks.

Sampling is a pure function of (seed, replicate, edge identity): each edge's
uniform comes from one Philox-4x32 block whose counter encodes the edge's
(axis, lattice coordinates) and whose key mixes the master seed with the
replicate index.  This makes fields reproducible bit-for-bit regardless of
iteration order or thread schedule, and couples laws through shared uniforms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .geometry import frac
from .lattice import LatticeNetwork

__all__ = [
    "LawSpec",
    "CapacityField",
    "HypothesisReport",
    "sample",
    "check_hypotheses",
    "edge_uniform_mantissas",
    "P_C",
]

# Critical probabilities for edge Bernoulli percolation on Z^d. The d=2 value
# is exact; the d=3 value is the standard numerical estimate and is used only
# for advisory verdicts, never in numerical results.
P_C = {2: Fraction(1, 2), 3: 0.2488}

_MANTISSA_BITS = 53
_MANTISSA_DEN = 1 << _MANTISSA_BITS

_PHILOX_M0 = np.uint64(0xD2511F53)
_PHILOX_M1 = np.uint64(0xCD9E8D57)

_COORD_BITS = 21
_COORD_OFFSET = 1 << (_COORD_BITS - 1)
_U32 = np.uint64(0xFFFFFFFF)


def _splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & 0xFFFFFFFFFFFFFFFF
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & 0xFFFFFFFFFFFFFFFF
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & 0xFFFFFFFFFFFFFFFF
    return z ^ (z >> 31)


def _philox4x32(c0, c1, c2, c3, key0: int, key1: int):
    """Vectorized Philox-4x32-10; counters are uint32 arrays, keys wrap mod 2^32."""
    k0 = key0 & 0xFFFFFFFF
    k1 = key1 & 0xFFFFFFFF
    for _ in range(10):
        p0 = c0.astype(np.uint64) * _PHILOX_M0
        p1 = c2.astype(np.uint64) * _PHILOX_M1
        hi0 = (p0 >> np.uint64(32)).astype(np.uint32)
        lo0 = (p0 & _U32).astype(np.uint32)
        hi1 = (p1 >> np.uint64(32)).astype(np.uint32)
        lo1 = (p1 & _U32).astype(np.uint32)
        c0, c1, c2, c3 = hi1 ^ c1 ^ np.uint32(k0), lo1, hi0 ^ c3 ^ np.uint32(k1), lo0
        k0 = (k0 + 0x9E3779B9) & 0xFFFFFFFF
        k1 = (k1 + 0xBB67AE85) & 0xFFFFFFFF
    return c0, c1, c2, c3


def _pack_edge_keys(axis: np.ndarray, coords: np.ndarray) -> np.ndarray:
    if np.any(np.abs(coords) >= _COORD_OFFSET):
        raise ValueError("lattice coordinates exceed the packable range")
    d = coords.shape[1] if coords.ndim == 2 else 0
    if d > 3:
        raise ValueError("edge keys support at most 3 dimensions")
    w = np.zeros(len(axis), dtype=np.uint64)
    for i in range(d):
        w |= (coords[:, i] + _COORD_OFFSET).astype(np.uint64) << np.uint64(_COORD_BITS * i)
    return w, axis.astype(np.uint64)


def edge_uniform_mantissas(
    seed: int, replicate: int, axis: np.ndarray, coords: np.ndarray
) -> np.ndarray:
    """53-bit uniform mantissas, one per edge identity (pure function)."""
    w0, w1 = _pack_edge_keys(np.asarray(axis), np.asarray(coords))
    key = _splitmix64((seed & 0xFFFFFFFFFFFFFFFF) ^ _splitmix64(replicate))
    c0 = (w0 & _U32).astype(np.uint32)
    c1 = (w0 >> np.uint64(32)).astype(np.uint32)
    c2 = (w1 & _U32).astype(np.uint32)
    c3 = (w1 >> np.uint64(32)).astype(np.uint32)
    o0, o1, _, _ = _philox4x32(c0, c1, c2, c3, key & 0xFFFFFFFF, key >> 32)
    word = o0.astype(np.uint64) | (o1.astype(np.uint64) << np.uint64(32))
    return word >> np.uint64(64 - _MANTISSA_BITS)


# ---------------------------------------------------------------------------
# Capacity laws
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LawSpec:
    """Law of the i.i.d. edge capacities; all atoms are exact rationals.

    ``atoms`` is a tuple of (value, probability) for the discrete part; the
    ``uniform`` kind instead scales the unit uniform by ``scale``.
    """

    kind: str
    atoms: tuple = ()
    scale: Fraction = Fraction(0)

    @staticmethod
    def constant(value) -> "LawSpec":
        v = frac(value)
        if v < 0:
            raise ValueError("capacities must be nonnegative")
        return LawSpec("discrete", ((v, Fraction(1)),))

    @staticmethod
    def bernoulli(p, value) -> "LawSpec":
        pp, v = frac(p), frac(value)
        if not 0 <= pp <= 1:
            raise ValueError("p must lie in [0, 1]")
        if v < 0:
            raise ValueError("capacities must be nonnegative")
        return LawSpec("discrete", ((Fraction(0), 1 - pp), (v, pp)))

    @staticmethod
    def uniform(high) -> "LawSpec":
        h = frac(high)
        if h <= 0:
            raise ValueError("uniform upper bound must be positive")
        return LawSpec("uniform", (), h)

    @staticmethod
    def discrete(atoms) -> "LawSpec":
        at = tuple(sorted((frac(v), frac(p)) for v, p in atoms))
        if any(v < 0 for v, _ in at):
            raise ValueError("capacities must be nonnegative")
        if any(p < 0 for _, p in at):
            raise ValueError("probabilities must be nonnegative")
        if sum(p for _, p in at) != 1:
            raise ValueError("probabilities must sum to 1")
        return LawSpec("discrete", at)

    @property
    def max_value(self) -> Fraction:
        if self.kind == "uniform":
            return self.scale
        return max(v for v, _ in self.atoms)

    @property
    def mass_at_zero(self) -> Fraction:
        if self.kind == "uniform":
            return Fraction(0)
        return sum((p for v, p in self.atoms if v == 0), Fraction(0))

    def icdf(self, u: Fraction) -> Fraction:
        """Nondecreasing inverse CDF; shared uniforms couple laws monotonely."""
        if self.kind == "uniform":
            return u * self.scale
        acc = Fraction(0)
        for v, p in self.atoms:
            acc += p
            if u < acc:
                return v
        return self.atoms[-1][0]

    @property
    def mean(self) -> Fraction:
        if self.kind == "uniform":
            return self.scale / 2
        return sum((v * p for v, p in self.atoms), Fraction(0))

    def describe(self) -> dict:
        if self.kind == "uniform":
            return {"type": "uniform", "high": str(self.scale)}
        if len(self.atoms) == 1:
            return {"type": "constant", "value": str(self.atoms[0][0])}
        if len(self.atoms) == 2 and self.atoms[0][0] == 0:
            return {
                "type": "bernoulli",
                "p": str(self.atoms[1][1]),
                "value": str(self.atoms[1][0]),
            }
        return {
            "type": "discrete",
            "atoms": [[str(v), str(p)] for v, p in self.atoms],
        }

    @staticmethod
    def from_config(cfg: dict) -> "LawSpec":
        t = cfg.get("type")
        if t == "constant":
            return LawSpec.constant(cfg["value"])
        if t == "bernoulli":
            return LawSpec.bernoulli(cfg["p"], cfg.get("value", 1))
        if t == "uniform":
            return LawSpec.uniform(cfg["high"])
        if t == "discrete":
            return LawSpec.discrete(cfg["atoms"])
        raise ValueError(f"unknown law type {t!r}")


# ---------------------------------------------------------------------------
# Capacity fields
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CapacityField:
    """Nonnegative capacity per edge of a lattice network (immutable)."""

    network: LatticeNetwork
    values: tuple                    # Fractions, aligned with edge order
    law: "LawSpec | None"
    seed: "int | None"
    replicate: "int | None"

    def __post_init__(self):
        if len(self.values) != self.network.num_edges:
            raise ValueError("one capacity per edge is required")

    @property
    def max_value(self) -> Fraction:
        if self.law is not None:
            return self.law.max_value
        return max(self.values, default=Fraction(0))

    def value(self, e: int) -> Fraction:
        return self.values[e]

    def floats(self) -> np.ndarray:
        return np.array([float(v) for v in self.values])

    def scaled_ints(self) -> tuple[list[int], int]:
        """Integer capacities and the common denominator clearing them."""
        scale = 1
        for v in self.values:
            scale = scale * v.denominator // math.gcd(scale, v.denominator)
        return [int(v * scale) for v in self.values], scale

    @staticmethod
    def from_values(network: LatticeNetwork, values) -> "CapacityField":
        vals = tuple(frac(v) for v in values)
        if any(v < 0 for v in vals):
            raise ValueError("capacities must be nonnegative")
        return CapacityField(network, vals, None, None, None)

    @staticmethod
    def from_edge_map(network: LatticeNetwork, mapping, default=0) -> "CapacityField":
        """Capacities from {(axis, k_tuple): value}; other edges get default."""
        axis, coords = network.edge_keys()
        vals = []
        for a, k in zip(axis, coords):
            key = (int(a), tuple(int(x) for x in k))
            vals.append(frac(mapping.get(key, default)))
        return CapacityField.from_values(network, vals)


def sample(
    law: LawSpec, network: LatticeNetwork, seed: int, replicate: int = 0
) -> CapacityField:
    """Draw i.i.d. capacities; values depend only on (seed, replicate, edge)."""
    axis, coords = network.edge_keys()
    mants = edge_uniform_mantissas(seed, replicate, axis, coords)
    values = _apply_icdf(law, mants)
    return CapacityField(network, values, law, seed, replicate)


def _apply_icdf(law: LawSpec, mants: np.ndarray) -> tuple:
    if law.kind == "uniform":
        return tuple(Fraction(int(m), _MANTISSA_DEN) * law.scale for m in mants)
    # discrete: thresholds on the 53-bit mantissa, exact rational cut points
    cuts = []
    acc = Fraction(0)
    for v, p in law.atoms:
        acc += p
        cuts.append((acc, v))
    out = []
    for m in mants:
        u = Fraction(int(m), _MANTISSA_DEN)
        for acc, v in cuts:
            if u < acc:
                out.append(v)
                break
        else:
            out.append(law.atoms[-1][0])
    return tuple(out)


# ---------------------------------------------------------------------------
# Hypothesis checks
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HypothesisReport:
    max_value: Fraction
    mass_at_zero: Fraction
    dimension: int
    zero_threshold: "Fraction | float | None"   # 1 - p_c(d)
    nu_positive_expected: str                   # yes / no / unknown

    def as_dict(self) -> dict:
        return {
            "M": str(self.max_value),
            "lambda_zero": str(self.mass_at_zero),
            "d": self.dimension,
            "one_minus_pc": None if self.zero_threshold is None else float(self.zero_threshold),
            "nu_positive_expected": self.nu_positive_expected,
        }


def check_hypotheses(law: LawSpec, d: int) -> HypothesisReport:
    """Boundedness and the positivity criterion for the flow constant.

    The flow constant vanishes identically iff the mass at zero reaches
    1 - p_c(d); the verdict is advisory (it uses a literature value of p_c
    in d=3).
    """
    m0 = law.mass_at_zero
    if d not in P_C:
        return HypothesisReport(law.max_value, m0, d, None, "unknown")
    threshold = 1 - P_C[d] if isinstance(P_C[d], Fraction) else 1.0 - P_C[d]
    if isinstance(threshold, Fraction):
        verdict = "yes" if m0 < threshold else "no"
    else:
        verdict = "yes" if float(m0) < threshold else "no"
    return HypothesisReport(law.max_value, m0, d, threshold, verdict)
