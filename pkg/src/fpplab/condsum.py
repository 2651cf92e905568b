"""Exact engine for independent nonnegative discrete sums conditioned to be
small.

Everything here is computed in rational arithmetic: joint conditional laws
via convolution DP on a rescaled integer grid, the resampling upper bound
for the first term of a conditioned sum, decidable criteria for the
trivial-limit regime, the closed-form limit through the conditioned-positive
tail (with its feasibility horizon computed by support convolution), and
block-built examples whose conditional probabilities oscillate.

Grid contract: all support values and the level L are brought to a common
denominator so the DP runs on integers; the number of states is capped
(default 1e6, overridable via the FPPLAB_STATE_CAP environment variable or
per call), and exceeding the cap raises GridOverflowError rather than
degrading to floats.
"""

from __future__ import annotations

import itertools
import math
import os
from dataclasses import dataclass
from fractions import Fraction

from .errors import EmptyConditioningError, GridOverflowError, UndecidableTailError

DEFAULT_STATE_CAP = 10**6


def _state_cap(override=None) -> int:
    if override is not None:
        return int(override)
    env = os.environ.get("FPPLAB_STATE_CAP")
    return int(env) if env else DEFAULT_STATE_CAP


def _fr(x) -> Fraction:
    return x if isinstance(x, Fraction) else Fraction(x)


# ---------------------------------------------------------------------------
# variables and models


@dataclass(frozen=True)
class DiscreteVar:
    """A nonnegative random variable with finite support, exact rationals.

    ``support`` is a tuple of (value, prob) pairs, values distinct and
    sorted increasing, probabilities positive and summing to one.
    """

    support: tuple

    def __post_init__(self):
        vals = [v for v, _ in self.support]
        if not vals:
            raise ValueError("support must be nonempty")
        if any(v < 0 for v in vals):
            raise ValueError("values must be nonnegative")
        if sorted(vals) != vals or len(set(vals)) != len(vals):
            raise ValueError("values must be sorted and distinct")
        if any(p <= 0 for _, p in self.support):
            raise ValueError("probabilities must be positive")
        if sum(p for _, p in self.support) != 1:
            raise ValueError("probabilities must sum to one")

    @classmethod
    def from_pairs(cls, pairs) -> "DiscreteVar":
        return cls(support=tuple(sorted((_fr(v), _fr(p)) for v, p in pairs)))

    @classmethod
    def two_point(cls, zero_prob, value) -> "DiscreteVar":
        p0 = _fr(zero_prob)
        return cls.from_pairs([(0, p0), (value, 1 - p0)])

    @classmethod
    def point(cls, value) -> "DiscreteVar":
        return cls.from_pairs([(value, 1)])

    @property
    def values(self):
        return tuple(v for v, _ in self.support)

    @property
    def min_value(self) -> Fraction:
        return self.support[0][0]

    @property
    def max_value(self) -> Fraction:
        return self.support[-1][0]

    def prob_of(self, v) -> Fraction:
        v = _fr(v)
        for val, p in self.support:
            if val == v:
                return p
        return Fraction(0)

    def prob_at_most(self, x) -> Fraction:
        x = _fr(x)
        return sum((p for v, p in self.support if v <= x), Fraction(0))

    def mean_below(self, cutoff) -> Fraction:
        """E[X 1{X <= cutoff}]."""
        cutoff = _fr(cutoff)
        return sum((v * p for v, p in self.support if v <= cutoff), Fraction(0))

    @property
    def prob_positive(self) -> Fraction:
        return 1 - self.prob_of(0)

    def min_positive(self):
        pos = [v for v, _ in self.support if v > 0]
        return pos[0] if pos else None

    def positive_part(self) -> "DiscreteVar":
        pp = self.prob_positive
        if pp == 0:
            raise ValueError("no positive mass")
        return DiscreteVar(support=tuple((v, p / pp) for v, p in self.support if v > 0))

    def gap_above_min(self):
        """Distance from the support infimum to the next support point."""
        if len(self.support) < 2:
            return None
        return self.support[1][0] - self.support[0][0]


@dataclass(frozen=True)
class IIDTail:
    var: DiscreteVar
    kind: str = "iid"

    def var_at(self, i: int) -> DiscreteVar:
        return self.var


@dataclass(frozen=True)
class IndexedTail:
    """Index-dependent tails with a named rule.

    kind 'linear': X_i takes 0 with probability zero_prob and the value i
    otherwise.  kind 'blocks': two-point at a block-valued level (see
    ``oscillation_model``).  kind 'custom': an arbitrary index -> var map
    (excluded from the decidable partial-sum criteria).
    """

    kind: str
    zero_prob: Fraction = Fraction(1, 2)
    rblocks: tuple = ()
    fn: object = None

    def var_at(self, i: int) -> DiscreteVar:
        if self.kind == "linear":
            return DiscreteVar.two_point(self.zero_prob, i)
        if self.kind == "blocks":
            return DiscreteVar.two_point(self.zero_prob, block_value(self.rblocks, i))
        if self.kind == "custom":
            return self.fn(i)
        raise ValueError(f"unknown tail kind {self.kind!r}")


def block_value(rblocks, i: int) -> int:
    """The block-built level for index i >= 2: level 2 on even-indexed
    blocks [r_2k, r_2k+1) and 3 on odd-indexed ones; the final block's level
    continues past the last boundary."""
    if i < 2:
        raise ValueError("block levels start at index 2")
    idx = 0
    for b, r in enumerate(rblocks):
        if i >= r:
            idx = b
        else:
            break
    return 2 if idx % 2 == 0 else 3


@dataclass(frozen=True)
class SumModel:
    """X_1, X_2, ... as an explicit head plus a tail rule (1-based index)."""

    head: tuple
    tail: object = None

    def var_at(self, i: int) -> DiscreteVar:
        if i < 1:
            raise ValueError("indices are 1-based")
        if i <= len(self.head):
            return self.head[i - 1]
        if self.tail is None:
            raise ValueError(f"index {i} beyond the explicit head")
        return self.tail.var_at(i)

    def vars_up_to(self, n: int):
        return [self.var_at(i) for i in range(1, n + 1)]


def parity_model(p, step=2) -> SumModel:
    """X_1 in {0, 1}, X_k in {0, step} for k >= 2, zero with probability p."""
    p = _fr(p)
    return SumModel(
        head=(DiscreteVar.two_point(p, 1),),
        tail=IIDTail(DiscreteVar.two_point(p, step)),
    )


def partition_model(p="1/2") -> SumModel:
    """X_k in {0, k}, zero with probability p."""
    p = _fr(p)
    return SumModel(head=(DiscreteVar.two_point(p, 1),), tail=IndexedTail("linear", zero_prob=p))


def oscillation_model(rblocks) -> SumModel:
    """X_1 in {0,1}; X_k two-point at block-built levels in {2, 3}."""
    rb = tuple(int(r) for r in rblocks)
    if not rb or rb[0] != 2 or any(a >= b for a, b in zip(rb, rb[1:])):
        raise ValueError("block boundaries must be strictly increasing and start at 2")
    return SumModel(
        head=(DiscreteVar.two_point(Fraction(1, 2), 1),),
        tail=IndexedTail("blocks", zero_prob=Fraction(1, 2), rblocks=rb),
    )


# ---------------------------------------------------------------------------
# the convolution DP


def _common_denominator(values) -> int:
    d = 1
    for v in values:
        d = d * v.denominator // math.gcd(d, v.denominator)
    return d


def _grid(model_vars, L, state_cap) -> tuple[int, int]:
    """(denominator, integer level M) with the state cap enforced."""
    vals = [L]
    for var in model_vars:
        vals.extend(var.values)
    d = _common_denominator([_fr(v) for v in vals])
    m = int(L * d)
    cap = _state_cap(state_cap)
    if m + 1 > cap:
        raise GridOverflowError(
            f"grid needs {m + 1} states (cap {cap}); "
            "raise FPPLAB_STATE_CAP or pass a larger state_cap"
        )
    return d, m


def _convolve(dp, var: DiscreteVar, d: int, m: int):
    """One variable folded into the truncated pmf (mass beyond m dropped)."""
    out = [Fraction(0)] * (m + 1)
    steps = [(int(v * d), p) for v, p in var.support]
    for s, mass in enumerate(dp):
        if mass == 0:
            continue
        for dv, p in steps:
            t = s + dv
            if t <= m:
                out[t] += mass * p
    return out


def sum_distribution(model_vars, L, state_cap=None):
    """Truncated pmf of the sum of the given variables on the integer grid.

    Returns (pmf, d) with pmf[s] = P(sum == s/d) for s/d <= L.
    """
    L = _fr(L)
    d, m = _grid(model_vars, L, state_cap)
    dp = [Fraction(0)] * (m + 1)
    dp[0] = Fraction(1)
    for var in model_vars:
        dp = _convolve(dp, var, d, m)
    return dp, d


def sum_pmf(model: SumModel, n: int, L) -> Fraction:
    """P(S_n == L), exact."""
    dp, d = sum_distribution(model.vars_up_to(n), L)
    return dp[-1]


def sum_cdf(model: SumModel, n: int, L) -> Fraction:
    """P(S_n <= L), exact."""
    dp, _ = sum_distribution(model.vars_up_to(n), L)
    return sum(dp, Fraction(0))


@dataclass
class ConditionalLaw:
    """Exact joint law of (X_1, ..., X_j) given S_n <= L."""

    j: int
    n: int
    L: Fraction
    table: dict  # value tuple -> probability
    total_prob: Fraction  # P(S_n <= L)

    def prob(self, assignment) -> Fraction:
        key = tuple(_fr(v) for v in assignment)
        return self.table.get(key, Fraction(0))

    def marginal(self, index: int) -> dict:
        """Law of X_index (1-based, index <= j)."""
        out = {}
        for tup, p in self.table.items():
            v = tup[index - 1]
            out[v] = out.get(v, Fraction(0)) + p
        return out

    def prob_x1_geq(self, threshold) -> Fraction:
        t = _fr(threshold)
        return sum((p for tup, p in self.table.items() if tup[0] >= t), Fraction(0))

    def prob_x1_gt(self, threshold) -> Fraction:
        t = _fr(threshold)
        return sum((p for tup, p in self.table.items() if tup[0] > t), Fraction(0))

    def prob_x1_eq(self, value) -> Fraction:
        v = _fr(value)
        return sum((p for tup, p in self.table.items() if tup[0] == v), Fraction(0))

    def to_json(self) -> dict:
        return {
            "j": self.j,
            "n": self.n,
            "L": str(self.L),
            "total_prob": str(self.total_prob),
            "table": {
                " ".join(str(v) for v in tup): str(p) for tup, p in sorted(self.table.items())
            },
        }


def conditional_law(model: SumModel, n: int, L, j: int = 1, state_cap=None) -> ConditionalLaw:
    """Exact joint law of the first j variables given S_n <= L."""
    if not (1 <= j <= n):
        raise ValueError("need 1 <= j <= n")
    L = _fr(L)
    model_vars = model.vars_up_to(n)
    if sum(v.min_value for v in model_vars) > L:
        raise EmptyConditioningError(f"P(S_{n} <= {L}) = 0")
    d, m = _grid(model_vars, L, state_cap)

    tail_pmf = [Fraction(0)] * (m + 1)
    tail_pmf[0] = Fraction(1)
    for var in model_vars[j:]:
        tail_pmf = _convolve(tail_pmf, var, d, m)
    tail_cdf = list(itertools.accumulate(tail_pmf))

    table = {}
    total = Fraction(0)
    for combo in itertools.product(*(var.support for var in model_vars[:j])):
        s = sum(int(v * d) for v, _ in combo)
        if s > m:
            continue
        p_head = Fraction(1)
        for _, p in combo:
            p_head *= p
        mass = p_head * tail_cdf[m - s]
        if mass > 0:
            table[tuple(v for v, _ in combo)] = mass
            total += mass
    if total == 0:
        raise EmptyConditioningError(f"P(S_{n} <= {L}) = 0")
    return ConditionalLaw(
        j=j,
        n=n,
        L=L,
        table={k: v / total for k, v in table.items()},
        total_prob=total,
    )


# ---------------------------------------------------------------------------
# the resampling bound


@dataclass
class ResamplingBound:
    lhs: Fraction
    bound: object  # Fraction or math.inf
    holds: bool

    def to_json(self):
        return {
            "lhs": str(self.lhs),
            "bound": "inf" if self.bound == math.inf else str(self.bound),
            "holds": self.holds,
        }


def resampling_bound(model: SumModel, n: int, L, delta, delta_prime) -> ResamplingBound:
    """Exact comparison of P(X_1 >= delta | S_n <= L) against the
    swap-two-variables upper bound

        L / ( P(X_1 <= delta - delta') * sum_{k=2..n} E[X_k 1{X_k <= delta'}] ).

    A zero denominator makes the bound vacuous (+inf, holds trivially).
    """
    delta = _fr(delta)
    dp = _fr(delta_prime)
    if not (0 < dp <= delta):
        raise ValueError("need 0 < delta' <= delta")
    L = _fr(L)
    law = conditional_law(model, n, L, j=1)
    lhs = law.prob_x1_geq(delta)
    x1 = model.var_at(1)
    p_small = x1.prob_at_most(delta - dp)
    tail_mean = sum((model.var_at(k).mean_below(dp) for k in range(2, n + 1)), Fraction(0))
    denom = p_small * tail_mean
    if denom == 0:
        return ResamplingBound(lhs=lhs, bound=math.inf, holds=True)
    bound = L / denom
    return ResamplingBound(lhs=lhs, bound=bound, holds=lhs <= bound)


# ---------------------------------------------------------------------------
# trivial-limit criteria


@dataclass
class TrivialLimitReport:
    """Evidence for or against the trivial limiting conditional law.

    ``diverges_at_delta_prime`` answers whether the truncated-mean series at
    the user's cutoff diverges; ``gap`` is the largest cutoff at which every
    variable has no mass strictly between its infimum and infimum + gap, so
    checking divergence at the gap cutoff suffices for the small-threshold
    events (for finitely supported variables the literal every-cutoff
    condition can never hold, only the gap-weakened form can).
    """

    delta_prime: Fraction
    partial_sums: list
    diverges_at_delta_prime: bool
    inf_sum: object  # Fraction or math.inf
    inf_sum_finite: bool
    gap: object
    diverges_at_gap: bool
    predicted_trivial: bool
    notes: str

    def to_json(self):
        return {
            "delta_prime": str(self.delta_prime),
            "partial_sums": [str(s) for s in self.partial_sums],
            "diverges_at_delta_prime": self.diverges_at_delta_prime,
            "inf_sum": "inf" if self.inf_sum == math.inf else str(self.inf_sum),
            "inf_sum_finite": self.inf_sum_finite,
            "gap": None if self.gap is None else str(self.gap),
            "diverges_at_gap": self.diverges_at_gap,
            "predicted_trivial": self.predicted_trivial,
            "notes": self.notes,
        }


def _tail_series_diverges(model: SumModel, cutoff: Fraction) -> bool:
    """Whether sum_k E[X_k 1{X_k <= cutoff}] diverges, for decidable tails."""
    tail = model.tail
    if tail is None:
        return False
    if isinstance(tail, IIDTail):
        return tail.var.mean_below(cutoff) > 0
    if isinstance(tail, IndexedTail) and tail.kind == "linear":
        return False  # terms vanish once the index exceeds the cutoff
    if isinstance(tail, IndexedTail) and tail.kind == "blocks":
        # eventually-constant level: divergence is decided by the final block
        last_level = 2 if (len(tail.rblocks) - 1) % 2 == 0 else 3
        return Fraction(last_level) <= cutoff and tail.zero_prob < 1
    raise UndecidableTailError(f"tail {tail!r} is outside the decidable family")


def _tail_inf_sum(model: SumModel, horizon: int) -> object:
    """sum_k I_k over head and tail; math.inf when the tail infimum is
    positive (IID) so the small-sum event eventually empties."""
    total = sum((v.min_value for v in model.head), Fraction(0))
    tail = model.tail
    if tail is None:
        return total
    if isinstance(tail, IIDTail):
        return math.inf if tail.var.min_value > 0 else total
    if isinstance(tail, IndexedTail) and tail.kind in ("linear", "blocks"):
        return total  # all tail infima are zero
    raise UndecidableTailError(f"tail {tail!r} is outside the decidable family")


def _model_gap(model: SumModel, horizon: int = 64):
    """inf over variables of (first support point above the infimum minus
    the infimum); None when some variable is a point mass."""
    gaps = []
    for i, var in enumerate(model.head, start=1):
        gaps.append(var.gap_above_min())
    tail = model.tail
    if isinstance(tail, IIDTail):
        gaps.append(tail.var.gap_above_min())
    elif isinstance(tail, IndexedTail) and tail.kind == "linear":
        gaps.append(Fraction(2))  # indices start at 2; inf over k of k
    elif isinstance(tail, IndexedTail) and tail.kind == "blocks":
        gaps.append(Fraction(2))
    elif tail is not None:
        raise UndecidableTailError(f"tail {tail!r} is outside the decidable family")
    if any(g is None for g in gaps):
        return None
    return min(gaps)


def trivial_limit_check(model: SumModel, delta_prime, K: int = 50) -> TrivialLimitReport:
    """Decide the truncated-mean divergence and infimum-sum conditions for
    the supported tail families, with partial sums up to K as evidence."""
    dp = _fr(delta_prime)
    partial = []
    acc = Fraction(0)
    for k in range(1, K + 1):
        acc += model.var_at(k).mean_below(dp)
        partial.append(acc)
    diverges = _tail_series_diverges(model, dp)
    inf_sum = _tail_inf_sum(model, K)
    finite = inf_sum != math.inf
    gap = _model_gap(model)
    div_gap = _tail_series_diverges(model, gap) if gap is not None else False
    predicted = finite and (diverges or div_gap)
    notes = (
        "finite supports cannot satisfy the every-cutoff condition literally; "
        "the gap-weakened form decides the small-threshold events"
    )
    return TrivialLimitReport(
        delta_prime=dp,
        partial_sums=partial,
        diverges_at_delta_prime=diverges,
        inf_sum=inf_sum,
        inf_sum_finite=finite,
        gap=gap,
        diverges_at_gap=div_gap,
        predicted_trivial=predicted,
        notes=notes,
    )


# ---------------------------------------------------------------------------
# the closed-form limit through the conditioned-positive tail


@dataclass
class GeneralParityResult:
    kstar: int
    limit: Fraction

    def to_json(self):
        return {"kstar": self.kstar, "limit": str(self.limit)}


def general_parity_limit(x1: DiscreteVar, tail: DiscreteVar, L, delta) -> GeneralParityResult:
    """The limit of P(X_1 > min(X_1) + delta | S_n <= L) as n grows, for an
    i.i.d. tail with an atom at zero.

    Conditioning on which tail variables are positive turns the limit into
    a conditional probability against the sum of ``kstar`` independent
    copies of the tail conditioned positive, where ``kstar`` is the largest
    feasible number of positive terms.  It is computed here by support
    convolution rather than by formula, so any finite-support tail works.
    """
    L = _fr(L)
    delta = _fr(delta)
    if tail.prob_positive == 0:
        raise ValueError("tail must have positive mass above zero")
    if tail.min_value != 0:
        raise ValueError("tail support must include zero")
    chi = tail.positive_part()
    i1 = x1.min_value
    room = L - i1
    if room < chi.min_value:
        raise ValueError("L too small: no positive tail term fits")

    sums = {Fraction(0)}
    kstar = 0
    while True:
        nxt = set()
        for s in sums:
            for v in chi.values:
                t = s + v
                if t <= room:
                    nxt.add(t)
        if not nxt:
            break
        kstar += 1
        sums = nxt

    # exact law of the kstar-fold conditioned-positive sum, truncated at L
    chi_sum, d = sum_distribution([chi] * kstar, L)
    num = Fraction(0)
    den = Fraction(0)
    cdf = list(itertools.accumulate(chi_sum))
    m = len(chi_sum) - 1
    for v, p in x1.support:
        s = int(v * d)
        if s > m:
            continue
        mass = p * cdf[m - s]
        den += mass
        if v > i1 + delta:
            num += mass
    if den == 0:
        raise EmptyConditioningError("infeasible conditioning at kstar")
    return GeneralParityResult(kstar=kstar, limit=num / den)


def convergence_to_limit_probe(x1: DiscreteVar, tail: DiscreteVar, L, delta, n_list) -> list:
    """Exact P(X_1 > min(X_1) + delta | S_n <= L) along n_list (i.i.d. tail),
    computed in one incremental DP sweep."""
    model = SumModel(head=(x1,), tail=IIDTail(tail))
    return probe_first_variable(model, L, delta, n_list)


def probe_first_variable(model: SumModel, L, delta, n_list) -> list:
    """Exact P(X_1 > min(X_1) + delta | S_n <= L) along increasing n for any
    model; one DP sweep with snapshots."""
    L = _fr(L)
    delta = _fr(delta)
    ns = sorted(set(int(n) for n in n_list))
    if ns[0] < 1:
        raise ValueError("n must be >= 1")
    n_max = ns[-1]
    model_vars = model.vars_up_to(n_max)
    d, m = _grid(model_vars, L, None)
    x1 = model_vars[0]
    i1 = x1.min_value

    def snapshot(tail_pmf):
        cdf = list(itertools.accumulate(tail_pmf))
        num = Fraction(0)
        den = Fraction(0)
        for v, p in x1.support:
            s = int(v * d)
            if s > m:
                continue
            mass = p * cdf[m - s]
            den += mass
            if v > i1 + delta:
                num += mass
        if den == 0:
            raise EmptyConditioningError("conditioning event has probability zero")
        return num / den

    out = []
    tail_pmf = [Fraction(0)] * (m + 1)
    tail_pmf[0] = Fraction(1)
    want = set(ns)
    if 1 in want:
        out.append(snapshot(tail_pmf))
    for i in range(2, n_max + 1):
        tail_pmf = _convolve(tail_pmf, model_vars[i - 1], d, m)
        if i in want:
            out.append(snapshot(tail_pmf))
    return out


def oscillation_example(rblocks, n_list, L=4, delta=Fraction(1, 2)) -> list:
    """Exact P(X_1 = 1 | S_n <= L) along n_list for the block-built model;
    rapidly growing blocks make the values oscillate instead of settling."""
    model = oscillation_model(rblocks)
    return probe_first_variable(model, L, delta, n_list)
