"""Composite estimators for the survival asymptotics in a low walk regime.

The target is the joint event {population alive at n, S_n <= phi(n)} and
its limit decomposition over the epoch of the walk minimum:

    theta(j) = sum_k P(Z_j = k, tau_j = j) E+[1 - F_inf(0)^k],

with E+ the expectation under the walk conditioned to stay nonnegative.
Every estimator here is Rao-Blackwellized over the branching randomness
where the family allows it: the indicator of survival is replaced by the
quenched survival probability computed from the environment.

Composition order note: for linear-fractional families the streaming
closed form gives the true forward composition together with the walk
minima, so any event may be coupled with the survival value.  For other
families a streamed composition is reversed in time; that is legitimate
only for events measurable in S_n alone (exchangeability), so estimators
that couple survival with path minima store the environment instead and
are intended for moderate n.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .branching import LFSurvivalStream, survival_power_complement
from .mcstats import MCEstimate, PairedSums
from .offspring import EnvironmentModel, make_family
from .stable import StableParams
from .streams import (
    DEFAULT_CHUNK,
    DOMAIN_CONDITIONED,
    DOMAIN_JOINT,
    DOMAIN_SURVIVAL,
    DOMAIN_THETA_PLUS,
    DOMAIN_THETA_POPULATION,
    StreamFamily,
    plan_chunks,
    run_chunks,
)
from .walk import RenewalTable, _interp_extend, integral_v, integral_v_se


@dataclass(frozen=True)
class ValueWithError:
    """A derived quantity with a propagated standard error."""

    value: float
    std_error: float
    samples: int = 0
    flags: tuple = ()

    def to_dict(self):
        return {
            "value": self.value,
            "std_error": self.std_error,
            "samples": self.samples,
            "flags": list(self.flags),
        }


@dataclass(frozen=True)
class PhiSpec:
    """Admissible deviation level phi(n).

    ``power``: phi(n) = gamma * n^eta with 0 < eta < 1/alpha, so that
    phi(n) -> infinity while phi(n) = o(n^{1/alpha}).
    ``log``: phi(n) = gamma * log(1+n); the shift keeps inf_n phi(n) > 0,
    which the conditioned-functional limit requires.
    """

    form: str = "power"
    gamma: float = 1.0
    eta: float = 0.4

    def __post_init__(self):
        if self.form not in ("power", "log"):
            raise ValueError("phi form must be 'power' or 'log'")
        if self.gamma <= 0.0:
            raise ValueError("gamma must be positive")
        if self.form == "power" and not 0.0 < self.eta:
            raise ValueError("eta must be positive")

    def validate_for(self, alpha: float):
        if self.form == "power" and not self.eta < 1.0 / alpha:
            raise ValueError(
                f"phi(n)=gamma*n^{self.eta} is not o(a_n) for alpha={alpha}"
            )

    def __call__(self, n: int) -> float:
        if self.form == "power":
            return self.gamma * float(n) ** self.eta
        return self.gamma * math.log1p(float(n))


def _family_spec(model: EnvironmentModel):
    return (model.stable.alpha, model.stable.beta, model.stable.c,
            model.family_name, model.family_shape)


def _population_step(fam, z, means, cap, rng):
    """One exact generation for alive paths, capped at ``cap``.

    When z * mean exceeds 50 * cap the draw lands above the cap except on
    an event of probability exp(-Omega(cap)), so the step is resolved
    deterministically; everything else is sampled exactly.  Keeps the
    convolution draws inside the generator's safe numeric range.
    """
    z_next = np.zeros_like(z)
    alive = z > 0
    if not np.any(alive):
        return z_next, 0
    with np.errstate(over="ignore"):  # inf products land in the shortcut branch
        surely_over = alive & (z * means > 50.0 * cap)
    z_next[surely_over] = cap
    todo = alive & ~surely_over
    if np.any(todo):
        z_next[todo] = fam.sample_sum(z[todo], means[todo], rng)
    capped = int(np.count_nonzero(z_next > cap)) + int(np.count_nonzero(surely_over))
    return np.minimum(z_next, cap), capped


def _rebuild(spec):
    alpha, beta, c, fam_name, fam_shape = spec
    params = StableParams(alpha, beta, c)
    fam = make_family(fam_name, fam_shape)
    return params, fam


# ---------------------------------------------------------------------------
# joint probability P(Z_n > 0, S_n <= phi(n))


def _joint_chunk(spec, n, phi_val, count, seed, domain, chunk):
    params, fam = _rebuild(spec)
    rng = StreamFamily(seed, domain).generator(chunk)
    if fam.is_linear_fractional:
        stream = LFSurvivalStream(count)
        for _ in range(n):
            x = params.sample(count, rng)
            stream.update(x, fam.log_r(x))
        surv = stream.survival()
        s = stream.s
    else:
        # streamed composition is time-reversed; valid here because the
        # event depends on S_n only
        s = np.zeros(count)
        u = np.ones(count)
        for _ in range(n):
            x = params.sample(count, rng)
            s += x
            u = fam.survival_map(u, np.exp(x))
        surv = u
    h = np.where(s <= phi_val, surv, 0.0)
    return count, float(np.sum(h)), float(np.sum(h * h))


def joint_probability(model: EnvironmentModel, n: int, phi: PhiSpec, paths: int,
                      streams: StreamFamily | None = None, seed: int = 0,
                      workers: int = 1, chunk_size: int = 1 << 20) -> MCEstimate:
    """Rao-Blackwellized estimate of P(Z_n > 0, S_n <= phi(n)).

    Averages (1 - F_{0,n}(0)) 1{S_n <= phi(n)} over simulated
    environments; the survival factor and the indicator use the same draw.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    phi.validate_for(model.stable.alpha)
    streams = streams or StreamFamily(seed, DOMAIN_JOINT)
    chunks = plan_chunks(paths, chunk_size)
    spec = _family_spec(model)
    args = [(spec, n, phi(n), cnt, streams.seed, streams.domain, cid)
            for cid, cnt in chunks]
    n_tot, sh, sh2 = 0, 0.0, 0.0
    for count, s1, s2 in run_chunks(_joint_chunk, args, workers):
        n_tot += count
        sh += s1
        sh2 += s2
    est = MCEstimate(n=n_tot, sum_w=float(n_tot), sum_w2=float(n_tot),
                     sum_wh=sh, sum_w2h=sh, sum_w2h2=sh2, seed=streams.seed,
                     streams=((streams.domain, 0, len(chunks)),))
    if sh == 0.0:
        est = est.with_flags("zero_effective_successes:increase_budget")
    return est


# ---------------------------------------------------------------------------
# unconditional survival ratio r_n = P(Z_n > 0) / P(L_n >= 0)


def _survival_ratio_chunk(spec, n, count, seed, domain, chunk):
    params, fam = _rebuild(spec)
    rng = StreamFamily(seed, domain).generator(chunk)
    alive = np.ones(count, dtype=bool)
    if fam.is_linear_fractional:
        stream = LFSurvivalStream(count)
        for _ in range(n):
            x = params.sample(count, rng)
            stream.update(x, fam.log_r(x))
            alive &= stream.s >= 0.0
        surv = stream.survival()
    else:
        s = np.zeros(count)
        u = np.ones(count)
        for _ in range(n):
            x = params.sample(count, rng)
            s += x
            alive &= s >= 0.0
            u = fam.survival_map(u, np.exp(x))
        surv = u
    return PairedSums.from_values(surv, alive.astype(np.float64))


@dataclass
class RatioRow:
    n: int
    numerator: ValueWithError
    denominator: ValueWithError
    ratio: ValueWithError

    def to_dict(self):
        return {
            "n": self.n,
            "numerator": self.numerator.to_dict(),
            "denominator": self.denominator.to_dict(),
            "ratio": self.ratio.to_dict(),
        }


@dataclass
class SurvivalReport:
    """Ratios P(Z_n>0)/P(L_n>=0) across n, with a flatness statistic."""

    rows: list[RatioRow]
    flatness: float

    def to_dict(self):
        return {"rows": [r.to_dict() for r in self.rows], "flatness": self.flatness}


def verify_survival(model: EnvironmentModel, n_list, paths: int,
                    streams: StreamFamily | None = None, seed: int = 0,
                    workers: int = 1, chunk_size: int = 1 << 20) -> SurvivalReport:
    """Tabulate r_n = P(Z_n>0)/P(L_n>=0) on shared paths for each n."""
    if not n_list:
        raise ValueError("n_list must be nonempty")
    streams = streams or StreamFamily(seed, DOMAIN_SURVIVAL)
    spec = _family_spec(model)
    rows = []
    for idx, n in enumerate(n_list):
        fam_streams = streams.child(idx)
        chunks = plan_chunks(paths, chunk_size)
        args = [(spec, n, cnt, fam_streams.seed, fam_streams.domain, cid)
                for cid, cnt in chunks]
        acc = PairedSums()
        for part in run_chunks(_survival_ratio_chunk, args, workers):
            acc = acc.merge(part)
        num, num_se = acc.mean_a()
        den, den_se = acc.mean_b()
        r, r_se = acc.ratio()
        rows.append(RatioRow(
            n=n,
            numerator=ValueWithError(num, num_se, acc.n),
            denominator=ValueWithError(den, den_se, acc.n),
            ratio=ValueWithError(r, r_se, acc.n),
        ))
    ratios = [row.ratio.value for row in rows]
    flatness = max(ratios) / min(ratios) if min(ratios) > 0 else math.inf
    return SurvivalReport(rows=rows, flatness=flatness)


# ---------------------------------------------------------------------------
# conditioned survival ratio (limit E+[1 - F_inf(0)^k])


def _conditioned_chunk(spec, n, phi_val, k_pow, count, seed, domain, chunk):
    params, fam = _rebuild(spec)
    if not fam.is_linear_fractional:
        raise ValueError("conditioned ratio streaming needs a linear-fractional family")
    rng = StreamFamily(seed, domain).generator(chunk)
    stream = LFSurvivalStream(count)
    for _ in range(n):
        if stream.s.size == 0:
            break
        x = params.sample(stream.s.size, rng)
        stream.update(x, fam.log_r(x))
        stream.compress(stream.s >= 0.0)
    in_window = stream.s <= phi_val
    h = survival_power_complement(stream.log_survival(), k_pow)
    hw = np.where(in_window, h, 0.0)
    w = in_window.astype(np.float64)
    n_eff = stream.s.size
    return (count, int(np.sum(in_window)), float(np.sum(hw)),
            float(np.sum(hw * hw)), n_eff)


def conditioned_ratio(model: EnvironmentModel, n: int, phi: PhiSpec, k: int,
                      paths: int, streams: StreamFamily | None = None,
                      seed: int = 0, workers: int = 1,
                      chunk_size: int = 1 << 20) -> MCEstimate:
    """E[H_n; S_n<=phi(n), L_n>=0] / P(S_n<=phi(n), L_n>=0), H_n = 1-F_{0,n}(0)^k.

    A self-normalized weighted mean with indicator weights; its delta
    standard error is the MCEstimate one.  Converges to the conditioned
    limit E+[1 - F_inf(0)^k].
    """
    if n < 1 or k < 1:
        raise ValueError("need n >= 1 and k >= 1")
    phi.validate_for(model.stable.alpha)
    streams = streams or StreamFamily(seed, DOMAIN_CONDITIONED)
    chunks = plan_chunks(paths, chunk_size)
    spec = _family_spec(model)
    args = [(spec, n, phi(n), k, cnt, streams.seed, streams.domain, cid)
            for cid, cnt in chunks]
    n_tot, sw, swh, swh2 = 0, 0.0, 0.0, 0.0
    for count, c_w, s1, s2, _ in run_chunks(_conditioned_chunk, args, workers):
        n_tot += count
        sw += c_w
        swh += s1
        swh2 += s2
    est = MCEstimate(n=n_tot, sum_w=sw, sum_w2=sw, sum_wh=swh,
                     sum_w2h=swh, sum_w2h2=swh2, seed=streams.seed,
                     streams=((streams.domain, 0, len(chunks)),))
    if sw == 0.0:
        est = est.with_flags("zero_denominator_successes:increase_budget")
    return est


# ---------------------------------------------------------------------------
# conditioned survival factors E+[1 - F_inf(0)^k] via U-weighted paths


def _theta_plus_chunk(spec, m_list, k_max, grid, vals, count, seed, domain, chunk):
    params, fam = _rebuild(spec)
    if not fam.is_linear_fractional:
        raise ValueError("the U-weighted survival factor needs a linear-fractional family")
    rng = StreamFamily(seed, domain).generator(chunk)
    stream = LFSurvivalStream(count)
    m_set = set(m_list)
    ks = np.arange(1, k_max + 1)
    out = {}
    clipped = 0
    for step in range(1, max(m_list) + 1):
        if stream.s.size == 0:
            break
        x = params.sample(stream.s.size, rng)
        stream.update(x, fam.log_r(x))
        stream.compress(stream.s >= 0.0)
        if step in m_set:
            w, nclip = _interp_extend(grid, vals, stream.s)
            w = np.maximum(w, 0.0)
            clipped += nclip
            h = survival_power_complement(stream.log_survival()[:, None], ks[None, :])
            wh = w[:, None] * h
            out[step] = (
                float(np.sum(w)), float(np.sum(w * w)),
                np.sum(wh, axis=0), np.sum(w[:, None] * wh, axis=0),
                np.sum(wh * wh, axis=0),
            )
    for m in m_list:
        if m not in out:
            out[m] = (0.0, 0.0, np.zeros(k_max), np.zeros(k_max), np.zeros(k_max))
    return count, clipped, out


@dataclass
class PlusSurvivalFactors:
    """E+[1 - F_inf(0)^k] for k = 1..k_max, with the horizon ladder trace."""

    factors: list[MCEstimate]
    m_used: int
    converged: bool
    trace: dict  # m -> list of factor values
    clipped: int

    def factor(self, k: int) -> MCEstimate:
        return self.factors[k - 1]


def plus_survival_factors(model: EnvironmentModel, u_table: RenewalTable,
                          k_max: int = 32, m_max: int = 512, m_tol: float = 1e-3,
                          paths: int = 200_000,
                          streams: StreamFamily | None = None, seed: int = 0,
                          workers: int = 1, chunk_size: int = DEFAULT_CHUNK) -> PlusSurvivalFactors:
    """Estimate E+[1 - F_inf(0)^k] by U(S_m)-weighted environments.

    The quenched survival complement 1 - F_{0,m}(0)^k decreases to its
    limit as the horizon m grows, so the ladder of doubling horizons is a
    monotone approximation scheme; the run reports the first horizon whose
    step change is below ``m_tol`` and flags a budget hit otherwise.
    """
    m_list = [16]
    while m_list[-1] < m_max:
        m_list.append(min(m_list[-1] * 2, m_max))
    chunks = plan_chunks(paths, chunk_size)
    streams = streams or StreamFamily(seed, DOMAIN_THETA_PLUS)
    spec = _family_spec(model)
    args = [(spec, tuple(m_list), k_max, u_table.abscissae, u_table.isotonic,
             cnt, streams.seed, streams.domain, cid) for cid, cnt in chunks]
    agg = {m: [0.0, 0.0, np.zeros(k_max), np.zeros(k_max), np.zeros(k_max)] for m in m_list}
    n_tot = 0
    clipped = 0
    for count, nclip, out in run_chunks(_theta_plus_chunk, args, workers):
        n_tot += count
        clipped += nclip
        for m in m_list:
            sw, sw2, swh, sw2h, sw2h2 = out[m]
            agg[m][0] += sw
            agg[m][1] += sw2
            agg[m][2] += swh
            agg[m][3] += sw2h
            agg[m][4] += sw2h2
    trace = {}
    ests = {}
    for m in m_list:
        sw, sw2, swh, sw2h, sw2h2 = agg[m]
        row = []
        for ki in range(k_max):
            row.append(MCEstimate(
                n=n_tot, sum_w=sw, sum_w2=sw2, sum_wh=float(swh[ki]),
                sum_w2h=float(sw2h[ki]), sum_w2h2=float(sw2h2[ki]),
                seed=streams.seed, streams=((streams.domain, 0, len(chunks)),),
            ))
        ests[m] = row
        trace[m] = [e.value for e in row]
    m_used = m_list[-1]
    converged = False
    for prev, cur in zip(m_list, m_list[1:]):
        gap = max(abs(a - b) for a, b in zip(trace[prev], trace[cur]))
        if gap < m_tol:
            m_used = cur
            converged = True
            break
    factors = ests[m_used]
    if not converged:
        factors = [e.with_flags("horizon_budget_hit") for e in factors]
    return PlusSurvivalFactors(factors=factors, m_used=m_used,
                               converged=converged, trace=trace, clipped=clipped)


# ---------------------------------------------------------------------------
# theta(j) and theta


def _theta_population_chunk(spec, j, k_max, cap, count, seed, domain, chunk):
    params, fam = _rebuild(spec)
    rng = StreamFamily(seed, domain).generator(chunk)
    s = np.zeros(count)
    prev_min = np.zeros(count)  # min(0, S_1..S_{t-1})
    z = np.ones(count, dtype=np.int64)
    for t in range(1, j + 1):
        x = params.sample(count, rng)
        means = np.exp(np.minimum(x, 700.0))
        z, _ = _population_step(fam, z, means, cap, rng)
        s += x
        if t < j:
            prev_min = np.minimum(prev_min, s)
    tau_hit = s < prev_min
    hist = np.zeros(k_max + 2, dtype=np.int64)
    zt = z[tau_hit]
    hist_k = np.bincount(np.minimum(zt, k_max + 1), minlength=k_max + 2)
    hist[: hist_k.size] += hist_k
    return count, hist


@dataclass
class ThetaTerm:
    j: int
    estimate: ValueWithError
    tau_prob: ValueWithError
    tail_mass: float
    m_used: int
    plus_converged: bool

    def to_dict(self):
        return {
            "j": self.j,
            "estimate": self.estimate.to_dict(),
            "tau_prob": self.tau_prob.to_dict(),
            "truncation_tail_mass": self.tail_mass,
            "m_used": self.m_used,
            "plus_converged": self.plus_converged,
        }


def _theta_term_from_hist(j, n_tot, hist, factors: PlusSurvivalFactors, seed) -> ThetaTerm:
    k_max = len(factors.factors)
    p_k = hist[1 : k_max + 1] / n_tot
    e_k = np.array([factors.factor(k).value for k in range(1, k_max + 1)])
    e_se = np.array([factors.factor(k).std_error for k in range(1, k_max + 1)])
    value = float(np.sum(p_k * e_k))
    # per-path variance of the plug-in value (histogram carries it exactly)
    second = float(np.sum(hist[1 : k_max + 1] / n_tot * e_k * e_k))
    var_pop = max(second - value * value, 0.0)
    se_pop = math.sqrt(var_pop / n_tot)
    # conditioned-factor errors are strongly correlated across k (shared
    # paths, monotone in k); combine them linearly as a conservative bound
    se_plus = float(np.sum(p_k * e_se))
    se = math.sqrt(se_pop**2 + se_plus**2)
    tau_n = int(np.sum(hist))
    tau_p = tau_n / n_tot
    tau_se = math.sqrt(max(tau_p * (1.0 - tau_p), 0.0) / n_tot)
    tail = float(hist[k_max + 1]) / n_tot
    flags = ()
    if tau_n == 0:
        flags = ("no_minimum_epoch_events:increase_budget",)
    return ThetaTerm(
        j=j,
        estimate=ValueWithError(value, se, n_tot, flags),
        tau_prob=ValueWithError(tau_p, tau_se, n_tot),
        tail_mass=tail,
        m_used=factors.m_used,
        plus_converged=factors.converged,
    )


def estimate_theta_j(model: EnvironmentModel, j: int, u_table: RenewalTable,
                     k_max: int = 32, m_max: int = 512, m_tol: float = 1e-3,
                     paths_population: int = 500_000, paths_plus: int = 200_000,
                     cap: int = 1_000_000,
                     streams: StreamFamily | None = None, seed: int = 0,
                     workers: int = 1,
                     factors: PlusSurvivalFactors | None = None) -> ThetaTerm:
    """theta(j) = sum_k P(Z_j=k, tau_j=j) E+[1 - F_inf(0)^k], truncated at k_max.

    Factor (i) simulates j environment steps plus the population; factor
    (ii) is the U-weighted conditioned survival factor (shared across j,
    pass ``factors`` to reuse).  The omitted k > k_max mass is bounded by
    the reported P(Z_j > k_max, tau_j = j).
    """
    if j < 0:
        raise ValueError("j must be >= 0")
    streams = streams or StreamFamily(seed, DOMAIN_THETA_POPULATION).child(j)
    if factors is None:
        factors = plus_survival_factors(
            model, u_table, k_max=k_max, m_max=m_max, m_tol=m_tol,
            paths=paths_plus, seed=seed, workers=workers,
        )
    if j == 0:
        f1 = factors.factor(1)
        return ThetaTerm(
            j=0,
            estimate=ValueWithError(f1.value, f1.std_error, f1.samples),
            tau_prob=ValueWithError(1.0, 0.0, 0, ("structural",)),
            tail_mass=0.0,
            m_used=factors.m_used,
            plus_converged=factors.converged,
        )
    chunks = plan_chunks(paths_population, DEFAULT_CHUNK)
    spec = _family_spec(model)
    args = [(spec, j, k_max, cap, cnt, streams.seed, streams.domain, cid)
            for cid, cnt in chunks]
    n_tot = 0
    hist = np.zeros(k_max + 2, dtype=np.int64)
    for count, h in run_chunks(_theta_population_chunk, args, workers):
        n_tot += count
        hist += h
    return _theta_term_from_hist(j, n_tot, hist, factors, streams.seed)


@dataclass
class ThetaEstimate:
    """Truncated series sum_{j<=J} theta(j) with a fitted tail heuristic."""

    terms: list[ThetaTerm]
    value: float
    std_error: float
    tail_heuristic: float
    tail_exponent: float
    k_max: int
    j_max: int

    @property
    def partial_sums(self) -> list[float]:
        out = []
        acc = 0.0
        for t in self.terms:
            acc += t.estimate.value
            out.append(acc)
        return out

    def to_dict(self):
        return {
            "value": self.value,
            "std_error": self.std_error,
            "tail_heuristic": self.tail_heuristic,
            "tail_exponent": self.tail_exponent,
            "k_max": self.k_max,
            "j_max": self.j_max,
            "partial_sums": self.partial_sums,
            "terms": [t.to_dict() for t in self.terms],
        }


def estimate_theta(model: EnvironmentModel, u_table: RenewalTable,
                   j_max: int = 8, k_max: int = 32, m_max: int = 512,
                   m_tol: float = 1e-3, paths_population: int = 500_000,
                   paths_plus: int = 200_000, cap: int = 1_000_000,
                   streams: StreamFamily | None = None, seed: int = 0,
                   workers: int = 1) -> ThetaEstimate:
    """Sum of theta(j) over j = 0..j_max.

    The conditioned survival factors do not depend on j and are computed
    once.  Per-j standard errors combine in quadrature (disjoint streams);
    the reported tail heuristic fits a power decay to theta(j) over the
    upper half of the range and extrapolates past j_max.
    """
    if j_max < 0:
        raise ValueError("j_max must be >= 0")
    streams = streams or StreamFamily(seed, DOMAIN_THETA_POPULATION)
    factors = plus_survival_factors(
        model, u_table, k_max=k_max, m_max=m_max, m_tol=m_tol,
        paths=paths_plus, streams=streams.child(10_000), seed=seed, workers=workers,
    )
    terms = []
    for j in range(j_max + 1):
        terms.append(estimate_theta_j(
            model, j, u_table, k_max=k_max, paths_population=paths_population,
            cap=cap, streams=streams.child(j), seed=seed, workers=workers,
            factors=factors,
        ))
    value = sum(t.estimate.value for t in terms)
    se = math.sqrt(sum(t.estimate.std_error ** 2 for t in terms))
    js = np.array([t.j for t in terms if t.j >= max(2, j_max // 2)], dtype=np.float64)
    vals = np.array([t.estimate.value for t in terms if t.j >= max(2, j_max // 2)])
    tail = math.inf
    slope = math.nan
    if js.size >= 2 and np.all(vals > 0.0):
        coef = np.polyfit(np.log(js), np.log(vals), 1)
        slope = -float(coef[0])
        if slope > 1.0:
            c0 = math.exp(float(coef[1]))
            tail = c0 * j_max ** (1.0 - slope) / (slope - 1.0)
    return ThetaEstimate(terms=terms, value=value, std_error=se,
                         tail_heuristic=tail, tail_exponent=slope,
                         k_max=k_max, j_max=j_max)


# ---------------------------------------------------------------------------
# ratio-stabilization reports for the limit theorems


@dataclass
class TheoremRow:
    n: int
    phi_n: float
    joint: ValueWithError
    denominator: ValueWithError
    ratio: ValueWithError

    def to_dict(self):
        return {
            "n": self.n,
            "phi_n": self.phi_n,
            "joint": self.joint.to_dict(),
            "denominator": self.denominator.to_dict(),
            "ratio": self.ratio.to_dict(),
        }


@dataclass
class TheoremReport:
    rows: list[TheoremRow]
    flatness: float
    mean_ratio: ValueWithError
    theta: ThetaEstimate | None
    gap_z: float  # |mean ratio - theta| in merged standard errors

    def to_dict(self):
        return {
            "rows": [r.to_dict() for r in self.rows],
            "flatness": self.flatness,
            "mean_ratio": self.mean_ratio.to_dict(),
            "theta": self.theta.to_dict() if self.theta else None,
            "gap_z": self.gap_z,
        }


def verify_theorem(model: EnvironmentModel, n_list, phi: PhiSpec,
                   v_table: RenewalTable, theta: ThetaEstimate | None,
                   paths: int, streams: StreamFamily | None = None,
                   seed: int = 0, workers: int = 1,
                   chunk_size: int = 1 << 20) -> TheoremReport:
    """Ratios r_n = P(Z_n>0, S_n<=phi(n)) / (g(0) b_n int_0^phi(n) V(-z) dz).

    The limit statement makes r_n stabilize at the minimum-epoch series
    constant; the report carries per-n ratios with errors, the flatness
    statistic, and the gap to the independently estimated constant.
    """
    phi.validate_for(model.stable.alpha)
    streams = streams or StreamFamily(seed, DOMAIN_JOINT)
    g0 = model.stable.density_at_zero()
    rows = []
    rel_den_sq_common = 0.0
    for idx, n in enumerate(n_list):
        est = joint_probability(model, n, phi, paths, streams=streams.child(idx),
                                workers=workers, chunk_size=chunk_size)
        _, b_n = model.stable.normalizers(n)
        phi_n = phi(n)
        iv = integral_v(v_table, phi_n)
        iv_se = integral_v_se(v_table, phi_n)
        den = g0 * b_n * iv
        den_se = g0 * b_n * iv_se
        r = est.value / den if den > 0 else math.inf
        rel = math.hypot(est.std_error / est.value if est.value > 0 else math.inf,
                         den_se / den if den > 0 else math.inf)
        rows.append(TheoremRow(
            n=n, phi_n=phi_n,
            joint=ValueWithError(est.value, est.std_error, est.samples, est.flags),
            denominator=ValueWithError(den, den_se),
            ratio=ValueWithError(r, abs(r) * rel, est.samples),
        ))
        rel_den_sq_common = max(rel_den_sq_common, (den_se / den) ** 2 if den > 0 else math.inf)
    ratios = [row.ratio.value for row in rows]
    flatness = max(ratios) / min(ratios) if min(ratios) > 0 else math.inf
    rbar = float(np.mean(ratios))
    # independent numerator noise averages down; the shared V-table error
    # is common to every denominator and enters once
    num_var = sum((row.joint.std_error / row.joint.value * row.ratio.value) ** 2
                  for row in rows) / len(rows) ** 2
    rbar_se = math.sqrt(num_var + rel_den_sq_common * rbar**2)
    mean_ratio = ValueWithError(rbar, rbar_se, len(rows))
    gap_z = math.inf
    if theta is not None:
        merged = math.hypot(rbar_se, theta.std_error)
        gap_z = abs(rbar - theta.value) / merged if merged > 0 else math.inf
    return TheoremReport(rows=rows, flatness=flatness, mean_ratio=mean_ratio,
                         theta=theta, gap_z=gap_z)


# ---------------------------------------------------------------------------
# tower-property check (direct population simulation vs pgf estimator)


def _tower_chunk(spec, n, phi_val, cap, count, seed, domain, chunk):
    params, fam = _rebuild(spec)
    if not fam.is_linear_fractional:
        raise ValueError("the streaming tower check needs a linear-fractional family")
    rng = StreamFamily(seed, domain).generator(chunk)
    stream = LFSurvivalStream(count)
    z = np.ones(count, dtype=np.int64)
    capped = 0
    for _ in range(n):
        x = params.sample(count, rng)
        stream.update(x, fam.log_r(x))
        means = np.exp(np.minimum(x, 700.0))
        z, ncap = _population_step(fam, z, means, cap, rng)
        capped += ncap
    window = stream.s <= phi_val
    rb = np.where(window, stream.survival(), 0.0)
    direct = (window & (z > 0)).astype(np.float64)
    return PairedSums.from_values(rb, direct), capped


@dataclass
class TowerCheck:
    rb: ValueWithError
    direct: ValueWithError
    diff_z: float
    rb_variance: float
    direct_variance: float
    capped_paths: int

    def to_dict(self):
        return {
            "rao_blackwellized": self.rb.to_dict(),
            "direct": self.direct.to_dict(),
            "difference_z": self.diff_z,
            "rb_variance": self.rb_variance,
            "direct_variance": self.direct_variance,
            "capped_paths": self.capped_paths,
        }


def tower_check(model: EnvironmentModel, n: int, phi: PhiSpec, paths: int,
                cap: int = 1_000_000, streams: StreamFamily | None = None,
                seed: int = 0, workers: int = 1) -> TowerCheck:
    """Direct-simulation vs pgf-based estimators of P(Z_n>0, S_n<=phi(n)).

    Both run on the same environments, so the difference has conditional
    mean zero path by path; its z-score uses the paired variance.  The
    pgf estimator is the conditional expectation of the direct indicator,
    hence never higher variance.
    """
    streams = streams or StreamFamily(seed, DOMAIN_SURVIVAL).child(7_000 + n)
    chunks = plan_chunks(paths, DEFAULT_CHUNK)
    spec = _family_spec(model)
    args = [(spec, n, phi(n), cap, cnt, streams.seed, streams.domain, cid)
            for cid, cnt in chunks]
    acc = PairedSums()
    capped = 0
    for part, ncap in run_chunks(_tower_chunk, args, workers):
        acc = acc.merge(part)
        capped += ncap
    rb, rb_se = acc.mean_a()
    direct, direct_se = acc.mean_b()
    # paired difference: var(a-b) = var(a) + var(b) - 2 cov(a,b)
    va = acc.saa / acc.n - rb * rb
    vb = acc.sbb / acc.n - direct * direct
    cab = acc.sab / acc.n - rb * direct
    diff_se = math.sqrt(max(va + vb - 2.0 * cab, 0.0) / acc.n)
    diff_z = abs(rb - direct) / diff_se if diff_se > 0 else 0.0
    return TowerCheck(
        rb=ValueWithError(rb, rb_se, acc.n),
        direct=ValueWithError(direct, direct_se, acc.n),
        diff_z=diff_z,
        rb_variance=max(va, 0.0),
        direct_variance=max(vb, 0.0),
        capped_paths=capped,
    )
