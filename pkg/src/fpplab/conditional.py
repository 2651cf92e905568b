"""Rare-event conditional ensembles by rejection sampling.

Estimates cylinder-event probabilities given that the passage time from the
origin to the box boundary is at most L (including L = 0), samples the
product construction that factorizes such zero-level ensembles into an
indicator layer times independent positive parts, and probes how fast the
conditional probability of a positive passage time near the origin decays
as the box grows.

Rejection keeps the conditioning exact and unbiased; the trade is a
budget-and-bail contract (RareConditioningError) instead of variance
tricks.  Acceptance decisions for two-point weight laws run on the cluster
graph (positive edges cost one step), which keeps 1e5-sample budgets cheap.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import kernels
from .errors import RareConditioningError
from .lattice import Box, WeightConfig, edge_east, edge_north
from .report import EstimateReport, wilson_interval, Z95
from .weights import CriticalClass, WeightDistribution


# ---------------------------------------------------------------------------
# cylinder events


class CylinderEvent:
    """A deterministic predicate over weights on a finite edge set."""

    def support(self) -> frozenset:
        raise NotImplementedError

    def evaluate(self, config) -> bool:
        raise NotImplementedError

    def describe(self) -> str:
        raise NotImplementedError


@dataclass(frozen=True)
class EdgeThreshold(CylinderEvent):
    """{weight(edge) >= value}; with value > 0 this is an increasing event."""

    edge: tuple
    value: object

    def support(self):
        return frozenset([self.edge])

    def evaluate(self, config):
        return config.weight(self.edge) >= self.value

    def describe(self):
        (x, y), _ = self.edge
        d = "E" if self.edge[0][1] == self.edge[1][1] else "N"
        return f"edge({x},{y},{d}) >= {self.value}"


@dataclass(frozen=True)
class EdgeIsZero(CylinderEvent):
    edge: tuple

    def support(self):
        return frozenset([self.edge])

    def evaluate(self, config):
        return config.weight(self.edge) == 0

    def describe(self):
        (x, y), _ = self.edge
        d = "E" if self.edge[0][1] == self.edge[1][1] else "N"
        return f"edge({x},{y},{d}) == 0"


@dataclass(frozen=True)
class BallThreshold(CylinderEvent):
    """{T(0, boundary of B(K)) >= delta}, a decreasing-complement primitive
    depending on the edges of B(K)."""

    K: int
    delta: object

    def support(self):
        from .lattice import enumerate_edges

        return frozenset(enumerate_edges(Box(self.K))) if self.K > 0 else frozenset()

    def evaluate(self, config):
        if self.delta <= 0:
            return True
        if self.K == 0:
            return False
        from .passage import t_to_boundary

        return t_to_boundary(config, self.K) >= self.delta

    def describe(self):
        return f"ball({self.K}) >= {self.delta}"


@dataclass(frozen=True)
class Not(CylinderEvent):
    inner: CylinderEvent

    def support(self):
        return self.inner.support()

    def evaluate(self, config):
        return not self.inner.evaluate(config)

    def describe(self):
        return f"not ({self.inner.describe()})"


@dataclass(frozen=True)
class And(CylinderEvent):
    parts: tuple

    def support(self):
        return frozenset().union(*(p.support() for p in self.parts))

    def evaluate(self, config):
        return all(p.evaluate(config) for p in self.parts)

    def describe(self):
        return " and ".join(f"({p.describe()})" for p in self.parts)


@dataclass(frozen=True)
class Or(CylinderEvent):
    parts: tuple

    def support(self):
        return frozenset().union(*(p.support() for p in self.parts))

    def evaluate(self, config):
        return any(p.evaluate(config) for p in self.parts)

    def describe(self):
        return " or ".join(f"({p.describe()})" for p in self.parts)


@dataclass(frozen=True)
class SureEvent(CylinderEvent):
    def support(self):
        return frozenset()

    def evaluate(self, config):
        return True

    def describe(self):
        return "true"


_TOKEN = re.compile(r"\s*(>=|==|\(|\)|,|[A-Za-z_]+|-?\d+(?:/\d+)?(?:\.\d+)?)")


def parse_event(text: str) -> CylinderEvent:
    """Parse the event mini-language.

    Grammar (case-sensitive keywords, 'and' binds tighter than 'or')::

        expr      := and_expr ('or' and_expr)*
        and_expr  := not_expr ('and' not_expr)*
        not_expr  := 'not' not_expr | '(' expr ')' | primitive
        primitive := 'edge' '(' x ',' y ',' dir ')' ('>=' value | '==' '0')
                   | 'ball' '(' K ')' '>=' value
                   | 'true'

    with dir in {E, N} and values rational strings ('3/4', '1', '0.5').
    """
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise ValueError(f"bad event syntax near {text[pos:pos+12]!r}")
        tokens.append(m.group(1))
        pos = m.end()
    idx = 0

    def peek():
        return tokens[idx] if idx < len(tokens) else None

    def take(expected=None):
        nonlocal idx
        if idx >= len(tokens):
            raise ValueError("unexpected end of event expression")
        tok = tokens[idx]
        if expected is not None and tok != expected:
            raise ValueError(f"expected {expected!r}, found {tok!r}")
        idx += 1
        return tok

    def parse_value():
        return Fraction(take())

    def parse_primitive():
        tok = take()
        if tok == "true":
            return SureEvent()
        if tok == "edge":
            take("(")
            x = int(take())
            take(",")
            y = int(take())
            take(",")
            d = take()
            take(")")
            e = edge_east(x, y) if d == "E" else edge_north(x, y)
            op = take()
            if op == ">=":
                return EdgeThreshold(edge=e, value=parse_value())
            if op == "==":
                if take() != "0":
                    raise ValueError("edge equality is only supported against 0")
                return EdgeIsZero(edge=e)
            raise ValueError(f"unknown comparison {op!r}")
        if tok == "ball":
            take("(")
            k = int(take())
            take(")")
            take(">=")
            return BallThreshold(K=k, delta=parse_value())
        raise ValueError(f"unknown primitive {tok!r}")

    def parse_not():
        if peek() == "not":
            take()
            return Not(inner=parse_not())
        if peek() == "(":
            take()
            node = parse_or()
            take(")")
            return node
        return parse_primitive()

    def parse_and():
        parts = [parse_not()]
        while peek() == "and":
            take()
            parts.append(parse_not())
        return parts[0] if len(parts) == 1 else And(parts=tuple(parts))

    def parse_or():
        parts = [parse_and()]
        while peek() == "or":
            take()
            parts.append(parse_and())
        return parts[0] if len(parts) == 1 else Or(parts=tuple(parts))

    node = parse_or()
    if idx != len(tokens):
        raise ValueError(f"trailing tokens in event: {tokens[idx:]}")
    return node


# ---------------------------------------------------------------------------
# sample adapters


class _ArraySample:
    """Read-only WeightConfig-alike over one sample's weight arrays."""

    __slots__ = ("n", "east", "north", "_ball_cache", "_vstep")

    def __init__(self, n, east, north, vstep=None):
        self.n = n
        self.east = east
        self.north = north
        self._ball_cache = {}
        self._vstep = vstep  # positive atom value for two-point laws

    @property
    def region(self):
        return Box(self.n)

    def weight(self, e):
        (x0, y0), (x1, y1) = e
        if y0 == y1:
            return self.east[x0 + self.n, y0 + self.n].item()
        return self.north[x0 + self.n, y0 + self.n].item()


def _adapter_ball_value(sample: _ArraySample, K: int):
    """T(0, boundary of B(K)) for one sample, cached per K."""
    if K in sample._ball_cache:
        return sample._ball_cache[K]
    if K == 0:
        val = 0
    elif sample._vstep is not None:
        n = sample.n
        sl_e = sample.east[n - K : n + K, n - K : n + K + 1] == 0
        sl_n = sample.north[n - K : n + K + 1, n - K : n + K] == 0
        steps = kernels.min_positive_steps(sl_e, sl_n)
        val = steps * sample._vstep
    else:
        from .passage import t_to_boundary

        cfg = WeightConfig.from_arrays(Box(sample.n), sample.east, sample.north)
        val = t_to_boundary(cfg, K)
    sample._ball_cache[K] = val
    return val


def _evaluate_event(event: CylinderEvent, sample) -> bool:
    """Evaluate with ball primitives routed through the cached metric."""
    if isinstance(event, BallThreshold):
        if event.delta <= 0:
            return True
        return _adapter_ball_value(sample, event.K) >= event.delta
    if isinstance(event, Not):
        return not _evaluate_event(event.inner, sample)
    if isinstance(event, And):
        return all(_evaluate_event(p, sample) for p in event.parts)
    if isinstance(event, Or):
        return any(_evaluate_event(p, sample) for p in event.parts)
    return event.evaluate(sample)


# ---------------------------------------------------------------------------
# conditioned estimation


@dataclass
class ConditionalEstimate:
    """ConditionalEstimate: an exactly conditioned Monte Carlo proportion."""

    event: str
    n: int
    L: object
    estimate: float
    ci_lo: float
    ci_hi: float
    accepted_samples: int
    total_samples: int
    seed: int | None = None
    extra: dict = field(default_factory=dict)

    @property
    def acceptance_rate(self) -> float:
        return self.accepted_samples / self.total_samples if self.total_samples else 0.0

    @property
    def stderr(self) -> float:
        p = self.estimate
        if self.accepted_samples <= 0:
            return float("nan")
        return math.sqrt(max(p * (1 - p), 0.0) / self.accepted_samples)

    def to_json(self) -> dict:
        return {
            "event": self.event,
            "n": self.n,
            "L": None if _is_inf(self.L) else str(self.L),
            "estimate": self.estimate,
            "ci_lo": self.ci_lo,
            "ci_hi": self.ci_hi,
            "accepted_samples": self.accepted_samples,
            "total_samples": self.total_samples,
            "acceptance_rate": self.acceptance_rate,
            "seed": self.seed,
            **({"extra": self.extra} if self.extra else {}),
        }


def _is_inf(L) -> bool:
    return L is None or (isinstance(L, float) and math.isinf(L))


def _steps_allowed(L, v) -> int:
    """floor(L / v) for a two-point positive value v."""
    return int(Fraction(L) / Fraction(v)) if not _is_inf(L) else -1


def _iter_accepted_two_point(dist, n, L, budget, rng, batch=256):
    """Yield accepted (east, north) weight arrays for a two-point law."""
    v = dist.positive_atom_value()
    p0 = float(dist.zero_probability)
    vnum = int(v) if v.denominator == 1 else float(v)
    dtype = np.int64 if isinstance(vnum, int) else np.float64
    steps = _steps_allowed(L, v)
    done = 0
    while done < budget:
        m = min(batch, budget - done)
        done += m
        ue = rng.random((m, 2 * n, 2 * n + 1))
        un = rng.random((m, 2 * n + 1, 2 * n))
        ze = ue <= p0
        zn = un <= p0
        for i in range(m):
            if steps >= 0:
                got = kernels.min_positive_steps(ze[i], zn[i])
                if got > steps:
                    continue
            east = np.where(ze[i], 0, vnum).astype(dtype)
            north = np.where(zn[i], 0, vnum).astype(dtype)
            yield done - m + i, east, north


def _iter_accepted_general(dist, n, L, budget, rng):
    from .passage import t_to_boundary

    box = Box(n)
    for i in range(budget):
        cfg = dist.sample_config(box, rng)
        if _is_inf(L) or t_to_boundary(cfg, n) <= L:
            east, north = cfg.arrays() if cfg.numeric_kind() != "exact" else (None, None)
            if east is None:
                yield i, cfg, None
            else:
                yield i, east, north


def estimate_conditional(
    dist: WeightDistribution,
    event: CylinderEvent,
    n: int,
    L,
    budget: int,
    rng,
    seed: int | None = None,
    min_accepted: int = 30,
) -> ConditionalEstimate:
    """Estimate P(event | T(0, boundary of B(n)) <= L) by plain rejection.

    Use ``L=None`` (or infinity) for the unconditioned law and ``L=0`` for
    the zero-level ensemble.  Exact conditioning, no bias; raises
    RareConditioningError below ``min_accepted`` accepted samples.
    """
    for e in event.support():
        if not Box(n).contains(e[0]) or not Box(n).contains(e[1]):
            raise ValueError(f"event support edge {e} outside B({n})")
    v = dist.positive_atom_value()
    accepted = 0
    hits = 0
    if v is not None:
        vnum = int(v) if v.denominator == 1 else float(v)
        for _, east, north in _iter_accepted_two_point(dist, n, L, budget, rng):
            accepted += 1
            sample = _ArraySample(n, east, north, vstep=vnum)
            if _evaluate_event(event, sample):
                hits += 1
    else:
        for _, cfg_or_east, north in _iter_accepted_general(dist, n, L, budget, rng):
            accepted += 1
            if north is None:
                ok = _evaluate_event(event, cfg_or_east)
            else:
                sample = _ArraySample(n, cfg_or_east, north)
                ok = _evaluate_event(event, sample)
            if ok:
                hits += 1
    if accepted < min_accepted:
        raise RareConditioningError(accepted, budget)
    lo, hi = wilson_interval(hits, accepted)
    return ConditionalEstimate(
        event=event.describe(),
        n=n,
        L=L,
        estimate=hits / accepted if accepted else float("nan"),
        ci_lo=lo,
        ci_hi=hi,
        accepted_samples=accepted,
        total_samples=budget,
        seed=seed,
        extra={"hits": hits},
    )


# ---------------------------------------------------------------------------
# the zero-level product ensemble


def sample_nu_tilde(
    dist: WeightDistribution,
    proxy_n: int,
    rng,
    budget: int = 200_000,
) -> WeightConfig:
    """One weight configuration from the finite-size zero-level ensemble.

    Draws the indicator layer as a Bernoulli-half configuration conditioned
    on a zero-weight path from the origin to the boundary of B(proxy_n),
    then multiplies entrywise by independent positive parts.  The output
    always satisfies T(0, boundary of B(proxy_n)) == 0.
    """
    configs = sample_nu_tilde_many(dist, proxy_n, 1, rng, budget=budget)
    return configs[0]


def sample_nu_tilde_many(
    dist: WeightDistribution, proxy_n: int, count: int, rng, budget: int = 200_000
) -> list:
    if dist.zero_probability != Fraction(1, 2):
        raise ValueError("the zero-level product ensemble needs a critical law")
    n = proxy_n
    positive = dist.positive_part()
    patom = positive.positive_atom_value() if not positive.pieces else None
    out = []
    tried = 0
    batch = 128
    while len(out) < count and tried < budget:
        m = min(batch, budget - tried)
        tried += m
        ze = rng.random((m, 2 * n, 2 * n + 1)) <= 0.5
        zn = rng.random((m, 2 * n + 1, 2 * n)) <= 0.5
        for i in range(m):
            if kernels.min_positive_steps(ze[i], zn[i]) != 0:
                continue
            if patom is not None:
                val = int(patom) if patom.denominator == 1 else float(patom)
                dtype = np.int64 if isinstance(val, int) else np.float64
                east = np.where(ze[i], 0, val).astype(dtype)
                north = np.where(zn[i], 0, val).astype(dtype)
                out.append(WeightConfig.from_arrays(Box(n), east, north))
            else:
                east = np.zeros((2 * n, 2 * n + 1))
                north = np.zeros((2 * n + 1, 2 * n))
                pe = ~ze[i]
                pn = ~zn[i]
                east[pe] = [positive._from_uniform(float(u)) for u in rng.random(int(pe.sum()))]
                north[pn] = [positive._from_uniform(float(u)) for u in rng.random(int(pn.sum()))]
                out.append(WeightConfig.from_arrays(Box(n), east, north))
            if len(out) >= count:
                break
    if len(out) < count:
        raise RareConditioningError(len(out), budget)
    return out


@dataclass
class FactorizationReport:
    """Joint-vs-product comparison for the zero-level ensemble."""

    d1: str
    d2: str
    n: int
    joint: float
    product: float
    p_d1: float
    p_d2: float
    difference: float
    sigma: float
    within_ci: bool
    accepted: int

    def to_json(self) -> dict:
        return self.__dict__.copy()


def factorization_check(
    dist: WeightDistribution,
    d1: CylinderEvent,
    d2: CylinderEvent,
    n: int,
    budget: int,
    rng,
    min_accepted: int = 100,
) -> FactorizationReport:
    """Check that indicator-layer events decouple from positive-part events
    under the zero-level conditioning.

    d1 must depend only on the indicator layer (it is evaluated on 0/1
    weights); d2 only on the positive parts (evaluated on an independent
    family with the conditioned-positive law).  Three independent sample
    sets estimate the joint and the two factors, so the difference carries
    a clean delta-method sigma.
    """
    if dist.zero_probability != Fraction(1, 2):
        raise ValueError("factorization check needs a critical law")
    positive = dist.positive_part()
    half = WeightDistribution.from_spec(atoms=[(0, "1/2"), (1, "1/2")])

    def accepted_indicators(cap):
        got = []
        for _, east, north in _iter_accepted_two_point(half, n, 0, cap, rng):
            got.append((east, north))
        return got

    third = budget // 3
    joint_samples = accepted_indicators(third)
    d1_samples = accepted_indicators(third)
    if min(len(joint_samples), len(d1_samples)) < min_accepted:
        raise RareConditioningError(min(len(joint_samples), len(d1_samples)), third)

    s_support = sorted(d2.support())

    def draw_s():
        return _MapSample(n, {e: positive._from_uniform(float(rng.random())) for e in s_support})

    joint_hits = 0
    for east, north in joint_samples:
        ind = _ArraySample(n, east, north, vstep=1)
        ok1 = _evaluate_event(d1, ind)
        ok2 = _evaluate_event(d2, draw_s())
        if ok1 and ok2:
            joint_hits += 1
    d1_hits = sum(
        1 for east, north in d1_samples if _evaluate_event(d1, _ArraySample(n, east, north, vstep=1))
    )
    m2 = max(third, 1000)
    d2_hits = sum(1 for _ in range(m2) if _evaluate_event(d2, draw_s()))

    p_joint = joint_hits / len(joint_samples)
    p1 = d1_hits / len(d1_samples)
    p2 = d2_hits / m2
    var_joint = p_joint * (1 - p_joint) / len(joint_samples)
    var1 = p1 * (1 - p1) / len(d1_samples)
    var2 = p2 * (1 - p2) / m2
    sigma = math.sqrt(var_joint + p2 * p2 * var1 + p1 * p1 * var2)
    diff = p_joint - p1 * p2
    return FactorizationReport(
        d1=d1.describe(),
        d2=d2.describe(),
        n=n,
        joint=p_joint,
        product=p1 * p2,
        p_d1=p1,
        p_d2=p2,
        difference=diff,
        sigma=sigma,
        within_ci=abs(diff) <= Z95 * sigma if sigma > 0 else diff == 0,
        accepted=len(joint_samples),
    )


class _MapSample:
    """WeightConfig-alike over a sparse edge map (missing edges read 0)."""

    __slots__ = ("n", "mapping")

    def __init__(self, n, mapping):
        self.n = n
        self.mapping = mapping

    def weight(self, e):
        return self.mapping.get(e, 0)


def convergence_probe(
    dist: WeightDistribution,
    K: int,
    eta,
    L,
    n_list,
    budget: int,
    rng,
) -> list[ConditionalEstimate]:
    """Conditional probability that T(0, boundary of B(K)) reaches the
    eta-quantile, given T(0, boundary of B(n)) <= L, for each n.

    For laws in the critical-infinite class the limit in n is zero; this
    instrument reports the finite-n trend without asserting a rate.
    """
    eta = Fraction(eta)
    if not eta > Fraction(1, 2):
        raise ValueError("eta must exceed 1/2")
    delta = dist.quantile(eta)
    event = BallThreshold(K=K, delta=delta)
    out = []
    for n in n_list:
        out.append(estimate_conditional(dist, event, n, L, budget, rng))
    return out
