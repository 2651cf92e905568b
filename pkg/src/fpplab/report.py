"""Monte Carlo estimate records with Wilson confidence intervals."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

Z95 = 1.959963984540054


def wilson_interval(successes: int, trials: int, z: float = Z95) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion.

    Behaves sensibly at small counts and at the 0/1 endpoints, which is why
    it is used for every proportion reported by this package.
    """
    if trials <= 0:
        return (0.0, 1.0)
    phat = successes / trials
    z2 = z * z
    denom = 1.0 + z2 / trials
    centre = phat + z2 / (2.0 * trials)
    half = z * math.sqrt(phat * (1.0 - phat) / trials + z2 / (4.0 * trials * trials))
    return ((centre - half) / denom, (centre + half) / denom)


@dataclass
class EstimateReport:
    """One Monte Carlo estimate: what was estimated, with what precision.

    ``successes`` is set for plain proportions; ``extra`` carries
    estimator-specific diagnostics (acceptance rates, per-scale traces, ...).
    """

    quantity: str
    params: dict
    estimate: float
    ci_lo: float
    ci_hi: float
    samples: int
    seed: int | None = None
    successes: int | None = None
    extra: dict = field(default_factory=dict)

    @classmethod
    def from_counts(cls, quantity, params, successes, trials, seed=None, **extra):
        lo, hi = wilson_interval(successes, trials)
        return cls(
            quantity=quantity,
            params=dict(params),
            estimate=successes / trials if trials else float("nan"),
            ci_lo=lo,
            ci_hi=hi,
            samples=trials,
            seed=seed,
            successes=successes,
            extra=dict(extra),
        )

    @property
    def stderr(self) -> float:
        p = self.estimate
        if self.samples <= 0 or not (0.0 <= p <= 1.0):
            return float("nan")
        return math.sqrt(max(p * (1.0 - p), 0.0) / self.samples)

    def to_json(self) -> dict:
        out = {
            "quantity": self.quantity,
            "params": self.params,
            "estimate": self.estimate,
            "ci_lo": self.ci_lo,
            "ci_hi": self.ci_hi,
            "samples": self.samples,
            "seed": self.seed,
        }
        if self.successes is not None:
            out["successes"] = self.successes
        if self.extra:
            out["extra"] = self.extra
        return out
