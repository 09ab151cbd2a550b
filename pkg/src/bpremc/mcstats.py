"""Mergeable Monte Carlo accumulators.

Estimates carry their raw weighted sums so that partial results from
disjoint streams can be merged associatively:

    (n, sum_w, sum_w2, sum_wh, sum_w2h, sum_w2h2)

covers plain means (w == 1), self-normalized weighted means and their
delta-method standard errors, and effective sample sizes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np


def _ranges_disjoint(a, b) -> bool:
    for da, lo_a, hi_a in a:
        for db, lo_b, hi_b in b:
            if da == db and lo_a < hi_b and lo_b < hi_a:
                return False
    return True


@dataclass(frozen=True)
class MCEstimate:
    """Point estimate with standard error and merge support.

    ``streams`` records provenance as (domain, chunk_lo, chunk_hi) half-open
    ranges under ``seed``; merging requires disjoint ranges.  A structural
    estimate (known exactly, zero variance) sets ``structural=True``.
    """

    n: int
    sum_w: float
    sum_w2: float
    sum_wh: float
    sum_w2h: float
    sum_w2h2: float
    seed: int = 0
    streams: tuple = ()
    structural: bool = False
    structural_value: float = 0.0
    flags: tuple = ()

    @classmethod
    def from_values(cls, h, w=None, seed=0, streams=(), flags=()):
        h = np.asarray(h, dtype=np.float64)
        if w is None:
            n = h.size
            return cls(
                n=int(n),
                sum_w=float(n),
                sum_w2=float(n),
                sum_wh=float(np.sum(h)),
                sum_w2h=float(np.sum(h)),
                sum_w2h2=float(np.sum(h * h)),
                seed=seed,
                streams=tuple(streams),
                flags=tuple(flags),
            )
        w = np.asarray(w, dtype=np.float64)
        return cls(
            n=int(h.size),
            sum_w=float(np.sum(w)),
            sum_w2=float(np.sum(w * w)),
            sum_wh=float(np.sum(w * h)),
            sum_w2h=float(np.sum(w * w * h)),
            sum_w2h2=float(np.sum(w * w * h * h)),
            seed=seed,
            streams=tuple(streams),
            flags=tuple(flags),
        )

    @classmethod
    def exact(cls, value, seed=0):
        """A structural estimate: known exactly, zero variance."""
        return cls(
            n=0, sum_w=0.0, sum_w2=0.0, sum_wh=0.0, sum_w2h=0.0, sum_w2h2=0.0,
            seed=seed, structural=True, structural_value=float(value),
        )

    @property
    def value(self) -> float:
        if self.structural:
            return self.structural_value
        if self.sum_w == 0.0:
            return 0.0
        return self.sum_wh / self.sum_w

    @property
    def std_error(self) -> float:
        if self.structural or self.sum_w == 0.0:
            return 0.0
        m = self.value
        var_num = self.sum_w2h2 - 2.0 * m * self.sum_w2h + m * m * self.sum_w2
        if var_num < 0.0:  # rounding
            var_num = 0.0
        return math.sqrt(var_num) / self.sum_w

    @property
    def ess(self) -> float:
        if self.structural or self.sum_w2 == 0.0:
            return 0.0
        return self.sum_w * self.sum_w / self.sum_w2

    @property
    def samples(self) -> int:
        return self.n

    def with_flags(self, *flags):
        return replace(self, flags=self.flags + tuple(flags))

    def merge(self, other: "MCEstimate") -> "MCEstimate":
        if self.structural or other.structural:
            raise ValueError("structural estimates do not merge")
        if self.seed != other.seed:
            raise ValueError("cannot merge estimates from different seeds")
        if not _ranges_disjoint(self.streams, other.streams):
            raise ValueError("stream ranges overlap")
        return MCEstimate(
            n=self.n + other.n,
            sum_w=self.sum_w + other.sum_w,
            sum_w2=self.sum_w2 + other.sum_w2,
            sum_wh=self.sum_wh + other.sum_wh,
            sum_w2h=self.sum_w2h + other.sum_w2h,
            sum_w2h2=self.sum_w2h2 + other.sum_w2h2,
            seed=self.seed,
            streams=self.streams + other.streams,
            flags=self.flags + other.flags,
        )

    def scaled(self, factor: float) -> "MCEstimate":
        """Estimate of factor * H (exact constant scaling)."""
        if self.structural:
            return MCEstimate.structural(self.structural_value * factor, self.seed)
        return replace(
            self,
            sum_wh=self.sum_wh * factor,
            sum_w2h=self.sum_w2h * factor,
            sum_w2h2=self.sum_w2h2 * factor * factor,
        )

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "std_error": self.std_error,
            "samples": self.samples,
            "ess": self.ess,
            "seed": self.seed,
            "streams": [list(r) for r in self.streams],
            "structural": self.structural,
            "flags": list(self.flags),
        }


def merge_all(estimates) -> MCEstimate:
    estimates = list(estimates)
    if not estimates:
        raise ValueError("nothing to merge")
    acc = estimates[0]
    for e in estimates[1:]:
        acc = acc.merge(e)
    return acc


def combined_se(*estimates) -> float:
    """Standard error of a difference/sum of independent estimates."""
    return math.sqrt(sum(e.std_error ** 2 for e in estimates))


@dataclass(frozen=True)
class PairedSums:
    """Mergeable sums for a ratio estimator mean(a)/mean(b) on shared paths."""

    n: int = 0
    sa: float = 0.0
    sb: float = 0.0
    saa: float = 0.0
    sbb: float = 0.0
    sab: float = 0.0

    @classmethod
    def from_values(cls, a, b):
        a = np.asarray(a, dtype=np.float64)
        b = np.asarray(b, dtype=np.float64)
        return cls(
            n=int(a.size),
            sa=float(np.sum(a)),
            sb=float(np.sum(b)),
            saa=float(np.sum(a * a)),
            sbb=float(np.sum(b * b)),
            sab=float(np.sum(a * b)),
        )

    def merge(self, other: "PairedSums") -> "PairedSums":
        return PairedSums(
            n=self.n + other.n,
            sa=self.sa + other.sa,
            sb=self.sb + other.sb,
            saa=self.saa + other.saa,
            sbb=self.sbb + other.sbb,
            sab=self.sab + other.sab,
        )

    def ratio(self) -> tuple[float, float]:
        """(mean(a)/mean(b), delta-method SE); (0, inf) on empty denominator."""
        if self.n == 0 or self.sb == 0.0:
            return 0.0, math.inf
        ma = self.sa / self.n
        mb = self.sb / self.n
        r = ma / mb
        va = self.saa / self.n - ma * ma
        vb = self.sbb / self.n - mb * mb
        cab = self.sab / self.n - ma * mb
        var_r = (va - 2.0 * r * cab + r * r * vb) / (mb * mb) / self.n
        return r, math.sqrt(max(var_r, 0.0))

    def mean_a(self) -> tuple[float, float]:
        if self.n == 0:
            return 0.0, math.inf
        m = self.sa / self.n
        v = max(self.saa / self.n - m * m, 0.0)
        return m, math.sqrt(v / self.n)

    def mean_b(self) -> tuple[float, float]:
        if self.n == 0:
            return 0.0, math.inf
        m = self.sb / self.n
        v = max(self.sbb / self.n - m * m, 0.0)
        return m, math.sqrt(v / self.n)
