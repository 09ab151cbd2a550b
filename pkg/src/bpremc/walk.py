"""Associated random walk machinery.

Renewal functions of the walk are estimated by truncated-series Monte
Carlo on shared path ensembles:

    U(x)  = 1{x>=0} + sum_n P(S_n >= -x, M_n < 0),   x >= 0 grid,
    V(-z) = 1{z>0}  + sum_n P(S_n <  z, L_n >= 0),   z >= 0 grid.

A path contributes to the series only while it has not broken its
constraint (stayed strictly negative for U, nonnegative for V), so paths
are killed at the first violation and the per-path series contribution is
a running histogram against the grid.  One ensemble serves every grid
point and every series term; per-point confidence intervals are exact,
cross-point correlation is a recorded caveat of the shared-path design.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .mcstats import MCEstimate
from .stable import StableParams
from .streams import (
    DEFAULT_CHUNK,
    DOMAIN_LOCAL_PROB,
    DOMAIN_MINUS_SAMPLE,
    DOMAIN_PLUS_SAMPLE,
    DOMAIN_SMALL_DEVIATION,
    DOMAIN_TABLE_U,
    DOMAIN_TABLE_V,
    DOMAIN_TABLE_V_STRICT,
    StreamFamily,
    plan_chunks,
    run_chunks,
)


class BudgetError(RuntimeError):
    """The path budget produced no usable events."""


class RangeError(ValueError):
    """A query fell outside the tabulated grid."""


# ---------------------------------------------------------------------------
# path functionals


@dataclass(frozen=True)
class WalkPath:
    """A realized walk: increments, prefix sums and cached functionals."""

    increments: np.ndarray
    prefix: np.ndarray  # S_1..S_n

    @classmethod
    def from_increments(cls, increments) -> "WalkPath":
        inc = np.asarray(increments, dtype=np.float64)
        if inc.ndim != 1 or inc.size == 0:
            raise ValueError("increments must be a non-empty 1-d array")
        return cls(increments=inc, prefix=np.cumsum(inc))

    @property
    def minimum(self) -> float:
        return float(self.prefix.min())

    @property
    def maximum(self) -> float:
        return float(self.prefix.max())

    @property
    def min_epoch(self) -> int:
        """First index attaining min(0, L_n); 0 when the walk never dips below 0."""
        if self.minimum >= 0.0:
            return 0
        return int(np.argmin(self.prefix)) + 1


def functionals(path: WalkPath) -> tuple[float, float, int]:
    """(L_n, M_n, tau_n) in one pass; ties broken toward the smallest index."""
    return path.minimum, path.maximum, path.min_epoch


# ---------------------------------------------------------------------------
# renewal tables


def _interp_extend(grid: np.ndarray, vals: np.ndarray, x: np.ndarray):
    """Linear interpolation with linear extension beyond the last node.

    Returns (values, n_clipped) where n_clipped counts lookups beyond the
    grid that used the extension.
    """
    x = np.asarray(x, dtype=np.float64)
    out = np.interp(x, grid, vals)
    over = x > grid[-1]
    n_clipped = int(np.count_nonzero(over))
    if n_clipped:
        slope = (vals[-1] - vals[-2]) / (grid[-1] - grid[-2])
        out = np.where(over, vals[-1] + slope * (x - grid[-1]), out)
    return out, n_clipped


def _pava_nondecreasing(y: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Weighted pool-adjacent-violators: closest nondecreasing sequence."""
    vals: list[float] = []
    wts: list[float] = []
    cnt: list[int] = []
    for yi, wi in zip(y, w):
        vals.append(float(yi))
        wts.append(float(wi))
        cnt.append(1)
        while len(vals) > 1 and vals[-2] > vals[-1]:
            v2, w2, c2 = vals.pop(), wts.pop(), cnt.pop()
            v1, w1, c1 = vals.pop(), wts.pop(), cnt.pop()
            tot = w1 + w2
            vals.append((v1 * w1 + v2 * w2) / tot)
            wts.append(tot)
            cnt.append(c1 + c2)
    out = np.empty(len(y))
    i = 0
    for v, c in zip(vals, cnt):
        out[i : i + c] = v
        i += c
    return out


@dataclass
class RenewalTable:
    """Grid-based Monte Carlo estimate of a renewal function.

    ``kind`` is "U" (abscissae x >= 0, values U(x)) or "V" (abscissae
    z >= 0, values V(-z)).  Raw and isotonic values are both stored; the
    structural rows (U(0)=1, V(-0)=0) are exact with zero variance.
    """

    kind: str
    abscissae: np.ndarray
    raw: np.ndarray
    std_error: np.ndarray
    isotonic: np.ndarray
    n_terms: int
    paths: int
    seed: int
    model_key: str
    strict: bool = False
    tail_diagnostics: dict = field(default_factory=dict)

    def structural_mask(self) -> np.ndarray:
        return self.abscissae == 0.0

    def value_at(self, x):
        """Isotonic value with linear extension beyond the grid (flagged)."""
        vals, clipped = _interp_extend(self.abscissae, self.isotonic, x)
        return vals, clipped

    def se_at(self, x):
        se, _ = _interp_extend(self.abscissae, self.std_error, x)
        return np.abs(se)

    def point_estimates(self):
        out = []
        for i in range(self.abscissae.size):
            if self.abscissae[i] == 0.0:
                out.append(MCEstimate.exact(self.raw[i], seed=self.seed))
            else:
                est = MCEstimate(
                    n=self.paths, sum_w=float(self.paths), sum_w2=float(self.paths),
                    sum_wh=self.raw[i] * self.paths,
                    sum_w2h=self.raw[i] * self.paths,
                    sum_w2h2=(self.std_error[i] ** 2 * self.paths + self.raw[i] ** 2) * self.paths,
                    seed=self.seed,
                )
                out.append(est)
        return out

    def to_csv(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("abscissa,raw_estimate,std_error,isotonic_estimate,n_terms,paths\n")
            for i in range(self.abscissae.size):
                fh.write(
                    f"{self.abscissae[i]!r},{self.raw[i]!r},{self.std_error[i]!r},"
                    f"{self.isotonic[i]!r},{self.n_terms},{self.paths}\n"
                )

    def sidecar(self) -> dict:
        return {
            "kind": self.kind,
            "strict": self.strict,
            "model_key": self.model_key,
            "seed": self.seed,
            "n_terms": self.n_terms,
            "paths": self.paths,
            "shared_paths_note": "grid points share one path ensemble; CIs are per-point only",
            "tail_diagnostics": self.tail_diagnostics,
        }

    def to_json(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.sidecar(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def from_files(cls, csv_path, json_path) -> "RenewalTable":
        data = np.genfromtxt(csv_path, delimiter=",", skip_header=1)
        data = np.atleast_2d(data)
        with open(json_path, "r", encoding="utf-8") as fh:
            meta = json.load(fh)
        return cls(
            kind=meta["kind"],
            abscissae=data[:, 0].copy(),
            raw=data[:, 1].copy(),
            std_error=data[:, 2].copy(),
            isotonic=data[:, 3].copy(),
            n_terms=int(meta["n_terms"]),
            paths=int(meta["paths"]),
            seed=int(meta["seed"]),
            model_key=meta["model_key"],
            strict=bool(meta.get("strict", False)),
            tail_diagnostics=meta.get("tail_diagnostics", {}),
        )


def _renewal_chunk(alpha, beta, c, grid, n_max, count, seed, domain, chunk, descending, strict):
    params = StableParams(alpha, beta, c)
    rng = StreamFamily(seed, domain).generator(chunk)
    n_grid = grid.size
    counts = np.zeros((count, n_grid + 1), dtype=np.int32)
    rows = np.arange(count)
    s = np.zeros(count)
    mid_hist = np.zeros(n_grid + 1, dtype=np.int64)
    last_hist = np.zeros(n_grid + 1, dtype=np.int64)
    mid_n = max(1, n_max // 2)
    for n in range(1, n_max + 1):
        if rows.size == 0:
            break
        s = s + params.sample(rows.size, rng)
        if descending:
            ok = s < 0.0
        elif strict:
            ok = s > 0.0
        else:
            ok = s >= 0.0
        rows = rows[ok]
        s = s[ok]
        if rows.size == 0:
            break
        if descending:
            pos = np.searchsorted(grid, -s, side="left")
        else:
            pos = np.searchsorted(grid, s, side="right")
        counts[rows, pos] += 1
        if n == mid_n:
            mid_hist += np.bincount(pos, minlength=n_grid + 1)
        if n == n_max:
            last_hist += np.bincount(pos, minlength=n_grid + 1)
    cum = np.cumsum(counts, axis=1, dtype=np.int64)[:, :n_grid]
    sum_c = cum.sum(axis=0)
    sum_c2 = np.einsum("ij,ij->j", cum, cum)
    return count, sum_c, sum_c2, np.cumsum(mid_hist)[:n_grid], np.cumsum(last_hist)[:n_grid]


def _build_renewal_table(params, grid, n_max, paths, streams, descending, strict,
                         workers, chunk_size):
    grid = np.asarray(grid, dtype=np.float64)
    if grid.ndim != 1 or grid.size < 2:
        raise ValueError("grid must be a 1-d array with at least two points")
    if np.any(grid < 0.0) or np.any(np.diff(grid) <= 0.0):
        raise ValueError("grid must be nonnegative and strictly increasing")
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    chunks = plan_chunks(paths, chunk_size)
    args = [
        (params.alpha, params.beta, params.c, grid, n_max, cnt,
         streams.seed, streams.domain, cid, descending, strict)
        for cid, cnt in chunks
    ]
    n_tot = 0
    s1 = np.zeros(grid.size)
    s2 = np.zeros(grid.size)
    mid = np.zeros(grid.size)
    last = np.zeros(grid.size)
    for count, c1, c2, m_h, l_h in run_chunks(_renewal_chunk, args, workers):
        n_tot += count
        s1 += c1
        s2 += c2
        mid += m_h
        last += l_h
    mean = s1 / n_tot
    var = np.maximum(s2 / n_tot - mean**2, 0.0)
    se = np.sqrt(var / n_tot)
    indicator = np.ones(grid.size) if descending else (grid > 0.0).astype(np.float64)
    raw = indicator + mean
    with np.errstate(divide="ignore"):
        weights = 1.0 / np.maximum(se, 1e-300) ** 2
    weights = np.minimum(weights, 1e30)
    weights[grid == 0.0] = 1e30
    iso = _pava_nondecreasing(raw, weights)
    iso[grid == 0.0] = raw[grid == 0.0]
    term_mid = mid / n_tot
    term_last = last / n_tot
    with np.errstate(divide="ignore", invalid="ignore"):
        decay = np.where(term_last > 0.0, term_mid / term_last, np.inf)
        exponent = np.log(decay) / math.log(max(n_max / max(1, n_max // 2), 1.0 + 1e-9))
        tail = np.where(
            exponent > 1.0, term_last * n_max / (exponent - 1.0), np.inf
        )
    diagnostics = {
        "last_term": term_last.tolist(),
        "mid_term": term_mid.tolist(),
        "fitted_decay_exponent": np.where(np.isfinite(exponent), exponent, -1.0).tolist(),
        "tail_extrapolation": np.where(np.isfinite(tail), tail, -1.0).tolist(),
        "note": "tail extrapolation is a fitted heuristic, not part of the estimate",
    }
    return RenewalTable(
        kind="U" if descending else "V",
        abscissae=grid,
        raw=raw,
        std_error=se,
        isotonic=iso,
        n_terms=n_max,
        paths=n_tot,
        seed=streams.seed,
        model_key=params.model_key(),
        strict=strict,
        tail_diagnostics=diagnostics,
    )


def estimate_u(params: StableParams, x_grid, n_max: int = 512, paths: int = 1_000_000,
               streams: StreamFamily | None = None, seed: int = 0,
               workers: int = 1, chunk_size: int = DEFAULT_CHUNK) -> RenewalTable:
    """Tabulate U(x) = 1 + sum_{n<=n_max} P(S_n >= -x, M_n < 0) on x_grid."""
    streams = streams or StreamFamily(seed, DOMAIN_TABLE_U)
    return _build_renewal_table(params, x_grid, n_max, paths, streams,
                                descending=True, strict=False,
                                workers=workers, chunk_size=chunk_size)


def estimate_v(params: StableParams, z_grid, n_max: int = 512, paths: int = 1_000_000,
               streams: StreamFamily | None = None, seed: int = 0, strict: bool = False,
               workers: int = 1, chunk_size: int = DEFAULT_CHUNK) -> RenewalTable:
    """Tabulate V(-z) = 1{z>0} + sum_{n<=n_max} P(S_n < z, L_n >= 0) on z_grid.

    With ``strict=True`` the constraint is L_n > 0; under an absolutely
    continuous increment law both variants estimate the same function.
    """
    streams = streams or StreamFamily(seed, DOMAIN_TABLE_V_STRICT if strict else DOMAIN_TABLE_V)
    return _build_renewal_table(params, z_grid, n_max, paths, streams,
                                descending=False, strict=strict,
                                workers=workers, chunk_size=chunk_size)


def integral_v(table: RenewalTable, y: float) -> float:
    """Trapezoidal integral of the isotonic V(-z) estimate over [0, y].

    The unit jump of V at 0+ is integrated exactly (it contributes y);
    the continuous part max(V-1, 0) is integrated by the trapezoid rule
    on the grid.  No extrapolation: y must lie inside the grid.
    """
    if table.kind != "V":
        raise ValueError("integral_v needs a V table")
    grid = table.abscissae
    if y < 0.0 or y > grid[-1]:
        raise RangeError(f"y={y} outside tabulated range [0, {grid[-1]}]")
    if y == 0.0:
        return 0.0
    r = np.maximum(table.isotonic - 1.0, 0.0)
    r[grid == 0.0] = 0.0
    idx = np.searchsorted(grid, y, side="right")
    xs = np.append(grid[:idx], y)
    ys = np.append(r[:idx], np.interp(y, grid, r))
    return float(y + np.trapezoid(ys, xs))


def integral_v_se(table: RenewalTable, y: float) -> float:
    """Conservative SE of integral_v: grid points share paths, so their
    errors are treated as perfectly correlated and integrate linearly."""
    grid = table.abscissae
    if y <= 0.0:
        return 0.0
    idx = np.searchsorted(grid, y, side="right")
    xs = np.append(grid[:idx], y)
    ys = np.append(table.std_error[:idx], np.interp(y, grid, table.std_error))
    return float(np.trapezoid(ys, xs))


# ---------------------------------------------------------------------------
# small-deviation probabilities


def _terminal_chunk(alpha, beta, c, n, count, seed, domain, chunk):
    params = StableParams(alpha, beta, c)
    rng = StreamFamily(seed, domain).generator(chunk)
    s = np.zeros(count)
    for _ in range(n):
        if s.size == 0:
            break
        s = s + params.sample(s.size, rng)
        s = s[s >= 0.0]
    return count, s


def terminal_values(params: StableParams, n: int, paths: int,
                    streams: StreamFamily, workers: int = 1,
                    chunk_size: int = DEFAULT_CHUNK):
    """S_n values of paths with L_n >= 0, plus the total path count.

    Shared backend of ``prob_small_deviation`` and ``local_probability``;
    calling both on the same streams makes partition additivity exact.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    chunks = plan_chunks(paths, chunk_size)
    args = [(params.alpha, params.beta, params.c, n, cnt,
             streams.seed, streams.domain, cid) for cid, cnt in chunks]
    total = 0
    values = []
    for count, surv in run_chunks(_terminal_chunk, args, workers):
        total += count
        values.append(surv)
    return np.concatenate(values) if values else np.empty(0), total


def _indicator_estimate(k: int, n: int, seed: int, streams: StreamFamily, n_chunks: int) -> MCEstimate:
    return MCEstimate(
        n=n, sum_w=float(n), sum_w2=float(n), sum_wh=float(k),
        sum_w2h=float(k), sum_w2h2=float(k), seed=seed,
        streams=((streams.domain, 0, n_chunks),),
    )


def prob_small_deviation(params: StableParams, n: int, x: float, paths: int,
                         streams: StreamFamily | None = None, seed: int = 0,
                         workers: int = 1, chunk_size: int = DEFAULT_CHUNK) -> MCEstimate:
    """Monte Carlo estimate of P(S_n <= x, L_n >= 0) with Wald SE."""
    if x <= 0.0:
        raise ValueError("x must be positive")
    streams = streams or StreamFamily(seed, DOMAIN_SMALL_DEVIATION)
    values, total = terminal_values(params, n, paths, streams, workers, chunk_size)
    k = int(np.count_nonzero(values <= x))
    est = _indicator_estimate(k, total, streams.seed, streams, len(plan_chunks(paths, chunk_size)))
    if k == 0:
        est = est.with_flags("zero_successes:increase_budget")
    return est


def local_probability(params: StableParams, n: int, y: float, delta: float, paths: int,
                      streams: StreamFamily | None = None, seed: int = 0,
                      workers: int = 1, chunk_size: int = DEFAULT_CHUNK) -> MCEstimate:
    """Monte Carlo estimate of P(S_n in [y, y+delta), L_n >= 0)."""
    if y < 0.0 or delta <= 0.0:
        raise ValueError("need y >= 0 and delta > 0")
    streams = streams or StreamFamily(seed, DOMAIN_LOCAL_PROB)
    values, total = terminal_values(params, n, paths, streams, workers, chunk_size)
    k = int(np.count_nonzero((values >= y) & (values < y + delta)))
    est = _indicator_estimate(k, total, streams.seed, streams, len(plan_chunks(paths, chunk_size)))
    if k == 0:
        est = est.with_flags("zero_successes:increase_budget")
    return est


def prob_stay_nonneg(params: StableParams, n: int, paths: int,
                     streams: StreamFamily, workers: int = 1,
                     chunk_size: int = DEFAULT_CHUNK) -> MCEstimate:
    """P(L_n >= 0) by direct Monte Carlo."""
    values, total = terminal_values(params, n, paths, streams, workers, chunk_size)
    return _indicator_estimate(values.size, total, streams.seed, streams,
                               len(plan_chunks(paths, chunk_size)))


def _endpoint_chunk(alpha, beta, c, n, count, seed, domain, chunk):
    params = StableParams(alpha, beta, c)
    rng = StreamFamily(seed, domain).generator(chunk)
    s = np.zeros(count)
    for _ in range(n):
        s += params.sample(count, rng)
    return s


def walk_endpoint_values(params: StableParams, n: int, paths: int,
                         streams: StreamFamily, workers: int = 1,
                         chunk_size: int = DEFAULT_CHUNK) -> np.ndarray:
    """Unconstrained S_n values (used for the positivity limit and scaling checks)."""
    chunks = plan_chunks(paths, chunk_size)
    args = [(params.alpha, params.beta, params.c, n, cnt,
             streams.seed, streams.domain, cid) for cid, cnt in chunks]
    return np.concatenate(run_chunks(_endpoint_chunk, args, workers))


# ---------------------------------------------------------------------------
# h-transform weighted path sampling


@dataclass
class PlusSample:
    """Weighted sample targeting the walk conditioned to stay nonnegative.

    Paths carry weight w = U(S_m) 1{L_m >= 0}; expectations under the
    conditioned law are self-normalized weighted means.  ``raw_weight``
    estimates E[w] over all simulated paths, which the harmonicity
    identity pins at U(0) = 1.
    """

    m: int
    weights: np.ndarray
    end_values: np.ndarray
    total_paths: int
    raw_weight: MCEstimate
    clipped: int
    prefixes: np.ndarray | None = None

    def expectation(self, h_values: np.ndarray) -> MCEstimate:
        """Self-normalized weighted expectation over surviving paths."""
        if self.weights.size == 0 or float(np.sum(self.weights)) == 0.0:
            raise BudgetError("all h-transform weights are zero; increase the budget")
        return MCEstimate.from_values(h_values, w=self.weights,
                                      seed=self.raw_weight.seed,
                                      streams=self.raw_weight.streams)


def _plus_chunk(alpha, beta, c, m, grid, vals, count, seed, domain, chunk,
                keep_paths, descending):
    params = StableParams(alpha, beta, c)
    rng = StreamFamily(seed, domain).generator(chunk)
    rows = np.arange(count)
    s = np.zeros(count)
    prefixes = np.zeros((count, m)) if keep_paths else None
    for n in range(m):
        if rows.size == 0:
            break
        s = s + params.sample(rows.size, rng)
        if keep_paths:
            prefixes[rows, n] = s
        ok = (s < 0.0) if descending else (s >= 0.0)
        rows = rows[ok]
        s = s[ok]
    lookup = -s if descending else s
    weights, clipped = _interp_extend(grid, vals, lookup)
    weights = np.maximum(weights, 0.0)
    kept = prefixes[rows] if keep_paths else None
    return count, rows.size, s, weights, clipped, kept


def _weighted_sample(params, m, table, paths, streams, workers, chunk_size,
                     keep_paths, descending) -> PlusSample:
    if m < 1:
        raise ValueError("m must be >= 1")
    if keep_paths and paths * m > (1 << 27):
        raise ValueError("keep_paths would exceed the memory guard")
    chunks = plan_chunks(paths, chunk_size)
    args = [(params.alpha, params.beta, params.c, m, table.abscissae, table.isotonic,
             cnt, streams.seed, streams.domain, cid, keep_paths, descending)
            for cid, cnt in chunks]
    total = 0
    clipped = 0
    ends, wts, prefs = [], [], []
    for count, n_surv, s, w, nclip, kept in run_chunks(_plus_chunk, args, workers):
        total += count
        clipped += nclip
        ends.append(s)
        wts.append(w)
        if keep_paths:
            prefs.append(kept)
    weights = np.concatenate(wts) if wts else np.empty(0)
    end_values = np.concatenate(ends) if ends else np.empty(0)
    if weights.size == 0 or float(np.sum(weights)) == 0.0:
        raise BudgetError("all h-transform weights are zero; increase the budget")
    padded = np.zeros(total)
    padded[: weights.size] = weights  # dead paths carry weight 0
    raw = MCEstimate.from_values(padded, seed=streams.seed,
                                 streams=((streams.domain, 0, len(chunks)),))
    if clipped:
        raw = raw.with_flags(f"grid_extension_used:{clipped}")
    return PlusSample(
        m=m, weights=weights, end_values=end_values, total_paths=total,
        raw_weight=raw, clipped=clipped,
        prefixes=np.concatenate(prefs) if keep_paths and prefs else None,
    )


def simulate_plus(params: StableParams, m: int, u_table: RenewalTable, paths: int,
                  streams: StreamFamily | None = None, seed: int = 0,
                  workers: int = 1, chunk_size: int = DEFAULT_CHUNK,
                  keep_paths: bool = False) -> PlusSample:
    """Sample paths weighted by U(S_m) 1{L_m >= 0} (conditioning to stay >= 0)."""
    streams = streams or StreamFamily(seed, DOMAIN_PLUS_SAMPLE)
    return _weighted_sample(params, m, u_table, paths, streams, workers,
                            chunk_size, keep_paths, descending=False)


def simulate_minus(params: StableParams, m: int, v_table: RenewalTable, paths: int,
                   streams: StreamFamily | None = None, seed: int = 0,
                   workers: int = 1, chunk_size: int = DEFAULT_CHUNK,
                   keep_paths: bool = False) -> PlusSample:
    """Sample paths weighted by V(S_m) 1{M_m < 0} (conditioning to stay < 0).

    Exercised by tests only; the main pipeline needs the nonnegative
    conditioning.
    """
    streams = streams or StreamFamily(seed, DOMAIN_MINUS_SAMPLE)
    return _weighted_sample(params, m, v_table, paths, streams, workers,
                            chunk_size, keep_paths, descending=True)


# ---------------------------------------------------------------------------
# harmonicity spot checks


def harmonicity_gap(params: StableParams, table: RenewalTable, x: float,
                    draws: int, streams: StreamFamily) -> dict:
    """Compare E[h(x+X); constraint] against h(x) for a renewal table.

    For U (x >= 0): E[U(x+X); x+X >= 0] = U(x).
    For V (x <= 0): E[V(x+X); x+X < 0] = V(x), valid for strictly
    negative x under the right-continuous normalization V(0) = 0.
    Returns both sides, their merged standard error and the z-score.
    """
    descending = table.kind == "U"
    if descending and x < 0.0:
        raise ValueError("U harmonicity needs x >= 0")
    if not descending and x >= 0.0:
        raise ValueError("V harmonicity needs x < 0")
    est = None
    lookup_se = 0.0
    for chunk, count in plan_chunks(draws):
        rng = streams.generator(chunk)
        shifted = x + params.sample(count, rng)
        if descending:
            mask = shifted >= 0.0
            vals, _ = table.value_at(np.where(mask, shifted, 0.0))
        else:
            mask = shifted < 0.0
            vals, _ = table.value_at(np.where(mask, -shifted, 0.0))
        h = np.where(mask, vals, 0.0)
        lookup_se = max(lookup_se, float(np.mean(table.se_at(np.abs(shifted)))))
        part = MCEstimate.from_values(h, seed=streams.seed,
                                      streams=((streams.domain, chunk, chunk + 1),))
        est = part if est is None else est.merge(part)
    rhs, _ = table.value_at(abs(x) if not descending else x)
    rhs_se = float(table.se_at(abs(x) if not descending else x))
    merged = math.sqrt(est.std_error**2 + rhs_se**2 + lookup_se**2)
    gap = est.value - float(rhs)
    return {
        "x": x,
        "lhs": est.value,
        "lhs_se": est.std_error,
        "rhs": float(rhs),
        "rhs_se": rhs_se,
        "merged_se": merged,
        "z": gap / merged if merged > 0 else math.inf,
    }
