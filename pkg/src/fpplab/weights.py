"""Parametric edge-weight laws: finite atom mixtures plus finite unions of
uniform pieces.

The supported family keeps everything decidable in exact rational
arithmetic: the CDF, the generalized inverse (left-continuous quantile),
the half-plus-dyadic quantile sequence, and the four-way growth
classification of boundary passage times.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .lattice import Box, WeightConfig, enumerate_edges


class CriticalClass(enum.Enum):
    SUBCRITICAL = "subcritical"  # zero-weight density below one half
    SUPERCRITICAL = "supercritical"  # above one half
    CRITICAL_FINITE = "critical-finite"  # Sum of a_k converges
    CRITICAL_INFINITE = "critical-infinite"  # Sum of a_k diverges


def _frac(x) -> Fraction:
    if isinstance(x, float):
        return Fraction(x).limit_denominator(10**12)
    return Fraction(x)


@dataclass(frozen=True)
class WeightDistribution:
    """A law for one edge weight: atoms ``(value, prob)`` plus uniform
    pieces ``(lo, hi, prob)``, all exact rationals.

    Probabilities must sum to exactly one; values and interval endpoints
    must be nonnegative with ``lo < hi`` on each piece.
    """

    atoms: tuple
    pieces: tuple = ()

    @classmethod
    def from_spec(cls, atoms=(), pieces=()) -> "WeightDistribution":
        a = tuple((Fraction(v), Fraction(p)) for v, p in atoms)
        u = tuple((Fraction(lo), Fraction(hi), Fraction(p)) for lo, hi, p in pieces)
        return cls(atoms=a, pieces=u)

    def __post_init__(self):
        total = Fraction(0)
        for v, p in self.atoms:
            if v < 0 or p < 0:
                raise ValueError("atom values and probabilities must be nonnegative")
            total += p
        for lo, hi, p in self.pieces:
            if lo < 0 or p < 0:
                raise ValueError("piece endpoints and probabilities must be nonnegative")
            if not lo < hi:
                raise ValueError("uniform piece needs lo < hi")
            total += p
        if total != 1:
            raise ValueError(f"probabilities sum to {total}, not 1")

    # -- CDF and quantiles ---------------------------------------------------

    def cdf(self, x) -> Fraction:
        x = _frac(x)
        total = Fraction(0)
        for v, p in self.atoms:
            if v <= x:
                total += p
        for lo, hi, p in self.pieces:
            if x >= hi:
                total += p
            elif x > lo:
                total += p * (x - lo) / (hi - lo)
        return total

    @property
    def zero_probability(self) -> Fraction:
        return self.cdf(0)

    def quantile(self, t) -> Fraction:
        """The generalized inverse inf{x : F(x) >= t} for t in (0, 1)."""
        t = _frac(t)
        if not (0 < t < 1):
            raise ValueError("quantile defined for t strictly between 0 and 1")
        # walk the combined support in increasing order, accumulating mass
        events = []  # (position, kind, payload); atom before piece at same lo
        for v, p in self.atoms:
            events.append((v, 0, p))
        for lo, hi, p in self.pieces:
            events.append((lo, 1, (hi, p)))
        events.sort(key=lambda ev: (ev[0], ev[1]))
        acc = Fraction(0)
        for pos, kind, payload in events:
            if kind == 0:
                acc += payload
                if acc >= t:
                    return pos
            else:
                hi, p = payload
                if acc + p >= t:
                    return pos + (t - acc) * (hi - pos) / p
                acc += p
        # t <= 1 and masses sum to 1, so we only get here by rounding of input
        raise ValueError(f"quantile({t}) ran off the support")

    def a_k(self, k: int) -> Fraction:
        """quantile(1/2 + 2^-k) for k >= 2."""
        if k < 2:
            raise ValueError("a_k defined for k >= 2")
        return self.quantile(Fraction(1, 2) + Fraction(1, 2**k))

    def right_quantile_at_half(self) -> Fraction:
        """inf{x : F(x) > 1/2}; the limit of a_k as k grows."""
        half = Fraction(1, 2)
        events = []
        for v, p in self.atoms:
            events.append((v, 0, p))
        for lo, hi, p in self.pieces:
            events.append((lo, 1, (hi, p)))
        events.sort(key=lambda ev: (ev[0], ev[1]))
        acc = Fraction(0)
        for pos, kind, payload in events:
            if kind == 0:
                acc += payload
                if acc > half:
                    return pos
            else:
                hi, p = payload
                if acc + p > half:
                    # inside the piece; mass strictly above 1/2 starts here
                    return pos + max(half - acc, 0) * (hi - pos) / p
                acc += p
        raise ValueError("distribution has no mass above 1/2")

    def classify(self) -> CriticalClass:
        """Growth class for boundary passage times under this law.

        Off-critical cases compare F(0) to 1/2 exactly.  At criticality the
        a_k sequence decreases to ``right_quantile_at_half``; within this
        parametric family the sequence is eventually constant (divergent sum
        unless the constant is 0) or exactly geometric (convergent sum), so
        the limit being zero decides convergence.
        """
        f0 = self.zero_probability
        half = Fraction(1, 2)
        if f0 < half:
            return CriticalClass.SUBCRITICAL
        if f0 > half:
            return CriticalClass.SUPERCRITICAL
        if self.right_quantile_at_half() > 0:
            return CriticalClass.CRITICAL_INFINITE
        return CriticalClass.CRITICAL_FINITE

    # -- conditioned positives -------------------------------------------------

    def positive_part(self) -> "WeightDistribution":
        """The law of the weight conditioned to be positive."""
        p0 = self.zero_probability
        if p0 >= 1:
            raise ValueError("no positive mass to condition on")
        scale = 1 / (1 - p0)
        atoms = tuple((v, p * scale) for v, p in self.atoms if v > 0)
        pieces = tuple((lo, hi, p * scale) for lo, hi, p in self.pieces)
        return WeightDistribution(atoms=atoms, pieces=pieces)

    # -- sampling ---------------------------------------------------------------

    def sample(self, rng: np.random.Generator):
        """One weight, drawn as quantile(U) with U uniform on (0, 1).

        Atom hits return exact values (int when integral); piece hits
        return floats.
        """
        return self._from_uniform(float(rng.random()))

    def _from_uniform(self, u: float):
        acc = 0.0
        events = []
        for v, p in self.atoms:
            events.append((v, 0, p))
        for lo, hi, p in self.pieces:
            events.append((lo, 1, (hi, p)))
        events.sort(key=lambda ev: (float(ev[0]), ev[1]))
        for pos, kind, payload in events:
            if kind == 0:
                acc += float(payload)
                if u <= acc:
                    return int(pos) if pos.denominator == 1 else pos
            else:
                hi, p = payload
                if u <= acc + float(p):
                    frac = (u - acc) / float(p)
                    return float(pos) + frac * float(hi - pos)
                acc += float(p)
        v = max(self.atoms, key=lambda a: a[0])[0] if self.atoms else self.pieces[-1][1]
        return int(v) if isinstance(v, Fraction) and v.denominator == 1 else float(v)

    def is_two_point(self) -> bool:
        return not self.pieces and len(self.atoms) == 2 and self.zero_probability > 0

    def positive_atom_value(self):
        vals = [v for v, p in self.atoms if v > 0]
        return vals[0] if len(vals) == 1 and not self.pieces else None

    def sample_config(self, box: Box, rng: np.random.Generator) -> WeightConfig:
        """An i.i.d. weight configuration on the box.

        The underlying uniforms are retained on the returned config, so
        p-open/p-closed status (U <= p) stays queryable afterwards.
        """
        weights = {}
        uniforms = {}
        for e in enumerate_edges(box):
            u = float(rng.random())
            uniforms[e] = u
            weights[e] = self._from_uniform(u)
        return WeightConfig(box, weights=weights, uniforms=uniforms)

    def sample_config_arrays(self, box: Box, rng: np.random.Generator):
        """Array-backed i.i.d. sampling (two-point laws only): returns
        (config, east_uniforms, north_uniforms)."""
        v = self.positive_atom_value()
        if v is None and self.atoms != ((Fraction(0), Fraction(1)),):
            raise TypeError("array sampling supports two-point/degenerate laws")
        n = box.n
        ue = rng.random((2 * n, 2 * n + 1))
        un = rng.random((2 * n + 1, 2 * n))
        p0 = float(self.zero_probability)
        val = 0 if v is None else (int(v) if v.denominator == 1 else float(v))
        dtype = np.int64 if isinstance(val, int) else np.float64
        east = np.where(ue <= p0, 0, val).astype(dtype)
        north = np.where(un <= p0, 0, val).astype(dtype)
        return WeightConfig.from_arrays(box, east, north), ue, un


# ---------------------------------------------------------------------------
# presets


def preset(name: str) -> WeightDistribution:
    """Named laws: 'bernoulli-half', 'half-uniform', 'half-atom:v',
    'dirac:v', and 'atoms:v1:p1,v2:p2,...'."""
    if name == "bernoulli-half":
        return WeightDistribution.from_spec(atoms=[(0, "1/2"), (1, "1/2")])
    if name == "half-uniform":
        return WeightDistribution.from_spec(atoms=[(0, "1/2")], pieces=[(0, 1, "1/2")])
    if name.startswith("half-atom:"):
        v = Fraction(name.split(":", 1)[1])
        return WeightDistribution.from_spec(atoms=[(0, "1/2"), (v, "1/2")])
    if name.startswith("dirac:"):
        v = Fraction(name.split(":", 1)[1])
        return WeightDistribution.from_spec(atoms=[(v, 1)])
    if name.startswith("atoms:"):
        pairs = []
        for part in name.split(":", 1)[1].split(","):
            v, p = part.split(":")
            pairs.append((Fraction(v), Fraction(p)))
        return WeightDistribution.from_spec(atoms=pairs)
    raise ValueError(f"unknown distribution preset {name!r}")


def distribution_from_config(spec) -> WeightDistribution:
    """Parse a distribution from a config value: a preset name or a dict
    with 'atoms'/'pieces' lists of rational strings."""
    if isinstance(spec, str):
        return preset(spec)
    atoms = [(Fraction(str(v)), Fraction(str(p))) for v, p in spec.get("atoms", [])]
    pieces = [
        (Fraction(str(lo)), Fraction(str(hi)), Fraction(str(p)))
        for lo, hi, p in spec.get("pieces", [])
    ]
    return WeightDistribution.from_spec(atoms=atoms, pieces=pieces)
