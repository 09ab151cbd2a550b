"""Generating-function iteration and population simulation.

The quenched survival probability after n generations is 1 - F_{0,n}(0)
with F_{0,n}(s) = F_1(F_2(...F_n(s)...)).  Double precision loses the
complement near extinction, so every composition is also available as a
complement map u -> 1 - F(1 - u); iterating the complement preserves the
relative precision of small survival probabilities.

For geometric and linear-fractional environments the complement maps are
Moebius maps u -> m u / (1 + r u), closed under composition:

    1 / (1 - F_{0,n}(0)) = e^{-S_n} + sum_{k=1..n} r_k e^{-S_k},

with S_k the prefix sums of the log-means.  ``LFSurvivalStream`` evaluates
this in log space in one forward pass; it is the fast path behind all
large-scale estimators and the oracle for the generic iteration.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .offspring import OffspringLaw


@dataclass
class GenFnState:
    """State of a running pgf composition (value plus optional Moebius form)."""

    s: float
    mobius: np.ndarray | None = None
    steps: int = 0

    def apply(self, law: OffspringLaw):
        self.s = float(np.clip(law.pgf(self.s), 0.0, 1.0))
        if self.mobius is not None:
            m = law.mobius()
            if m is None:
                self.mobius = None
            else:
                a, b, c, d = m
                self.mobius = np.array([[a, b], [c, d]]) @ self.mobius
        self.steps += 1


def mobius_eval(mat: np.ndarray, s: float) -> float:
    num = mat[0, 0] * s + mat[0, 1]
    den = mat[1, 0] * s + mat[1, 1]
    if den == 0.0:
        raise ZeroDivisionError("degenerate Moebius map")
    return num / den


def compose_mobius(env, k: int, n: int) -> np.ndarray:
    """Moebius matrix of F_{k,n} for a linear-fractional environment slice.

    F_{k,n} = F_{k+1} o ... o F_n, so matrices multiply left to right.
    """
    _check_indices(env, k, n)
    mat = np.eye(2)
    for law in env[k:n]:
        m = law.mobius()
        if m is None:
            raise ValueError("environment law is not linear-fractional")
        a, b, c, d = m
        mat = mat @ np.array([[a, b], [c, d]])
    return mat


def _check_indices(env, k: int, n: int):
    if not 0 <= k <= n <= len(env):
        raise IndexError(f"need 0 <= k <= n <= len(env); got k={k}, n={n}, len={len(env)}")


def iterate_pgf(env, k: int, n: int, s: float) -> float:
    """F_{k,n}(s) by right-to-left composition; F_{n,n}(s) = s exactly."""
    _check_indices(env, k, n)
    if not 0.0 <= s <= 1.0:
        raise ValueError("s must lie in [0, 1]")
    val = s
    for i in range(n - 1, k - 1, -1):
        val = float(np.clip(env[i].pgf(val), 0.0, 1.0))
    return val


def survival_prob_quenched(env, n: int) -> float:
    """Quenched survival probability 1 - F_{0,n}(0).

    Computed through the complement maps so that values far below machine
    epsilon relative to 1 keep their relative precision.
    """
    _check_indices(env, 0, n)
    u = 1.0
    for i in range(n - 1, -1, -1):
        u = float(env[i].survival_map(u))
    return u


class LFSurvivalStream:
    """Forward streaming survival for linear-fractional environments.

    Maintains per-path (S_n, T_n) with T_n = log sum_{k<=n} r_k e^{-S_k};
    then log(1 - F_{0,n}(0)) = -logaddexp(-S_n, T_n).  One O(paths) update
    per generation, no stored environment.
    """

    def __init__(self, n_paths: int):
        self.s = np.zeros(n_paths)
        self.t = np.full(n_paths, -np.inf)

    def update(self, x: np.ndarray, log_r: np.ndarray):
        self.s += x
        self.t = np.logaddexp(self.t, log_r - self.s)

    def log_survival(self) -> np.ndarray:
        return -np.logaddexp(-self.s, self.t)

    def survival(self) -> np.ndarray:
        return np.exp(self.log_survival())

    def compress(self, keep: np.ndarray):
        self.s = self.s[keep]
        self.t = self.t[keep]


def survival_power_complement(log_survival: np.ndarray, k) -> np.ndarray:
    """1 - F_{0,n}(0)^k from log(1 - F_{0,n}(0)), stable for tiny survival.

    F^k = (1 - surv)^k, so 1 - F^k = -expm1(k * log1p(-surv)).
    """
    surv = np.exp(log_survival)
    with np.errstate(divide="ignore"):  # surv rounding to 1.0 gives the exact limit 1
        return -np.expm1(np.asarray(k) * np.log1p(-np.minimum(surv, 1.0)))


def simulate_population(env, z0: int, rng, cap: int = 1_000_000):
    """Exact conditional population trajectory given the environment.

    Given Z_{t-1} = z the next generation is a sum of z iid offspring
    draws, sampled through the family's closed-form convolution.  If the
    population exceeds ``cap`` the trajectory is truncated there and the
    status reports "survived-at-cap".

    Returns (trajectory ndarray of length len(env)+1, status) with status
    one of "extinct", "alive", "survived-at-cap".
    """
    if z0 < 1:
        raise ValueError("z0 must be >= 1")
    if cap < z0:
        raise ValueError("cap must be >= z0")
    traj = np.zeros(len(env) + 1, dtype=np.int64)
    traj[0] = z0
    z = z0
    for t, law in enumerate(env, start=1):
        if z == 0:
            break
        z = int(law.sample_sum(np.int64(z), rng))
        if z > cap:
            traj[t:] = cap
            return traj, "survived-at-cap"
        traj[t] = z
    return traj, ("alive" if z > 0 else "extinct")
