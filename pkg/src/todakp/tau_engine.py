"""Heat-hierarchy basis, tau functions and the KP field, in log-stabilized form."""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations
from typing import Iterable, Sequence, Union

import mpmath
import numpy as np
from scipy.special import logsumexp

from .errors import OrderRangeError, SizeError
from .soliton_data import SolitonData, reciprocal_weights

MAX_TIMES = 8
MAX_N = 20
EXTENDED_DPS = 40
PRECISIONS = ("standard", "extended-test")


@dataclass(frozen=True)
class TimeVector:
    """Hierarchy times (t_1, t_2, ...); entries past the end are zero."""

    times: tuple[float, ...] = (0.0,)

    def __post_init__(self):
        if len(self.times) == 0:
            object.__setattr__(self, "times", (0.0,))
        if len(self.times) > MAX_TIMES:
            raise SizeError(f"at most {MAX_TIMES} hierarchy times are supported")
        if not all(math.isfinite(x) for x in self.times):
            raise SizeError("times must be finite")

    @property
    def M(self) -> int:
        return len(self.times)

    def padded(self, m: int) -> np.ndarray:
        out = np.zeros(max(m, self.M))
        out[: self.M] = self.times
        return out

    def __neg__(self) -> "TimeVector":
        return TimeVector(tuple(-x for x in self.times))

    def __add__(self, other) -> "TimeVector":
        other = as_time(other)
        m = max(self.M, other.M)
        return TimeVector(tuple(float(x) for x in self.padded(m) + other.padded(m)))

    def shifted(self, index: int, h: float) -> "TimeVector":
        """Move t_index (1-based) by h."""
        v = self.padded(index)
        v[index - 1] += h
        return TimeVector(tuple(float(x) for x in v))

    def norm_inf(self) -> float:
        return max(abs(x) for x in self.times)


TimeLike = Union[TimeVector, Sequence[float], float, None]


def as_time(t: TimeLike) -> TimeVector:
    if isinstance(t, TimeVector):
        return t
    if t is None:
        return TimeVector()
    if np.isscalar(t):
        return TimeVector((float(t),))
    return TimeVector(tuple(float(x) for x in t))


@dataclass(frozen=True)
class TauValue:
    log_magnitude: float
    sign: int = 1

    @property
    def value(self) -> float:
        return self.sign * math.exp(self.log_magnitude) if self.sign else 0.0


@dataclass(frozen=True)
class HeatBasisSample:
    """mu_i = exp(log_scale) * mu_scaled[i]; likewise for the dual basis."""

    theta: np.ndarray
    log_E: np.ndarray
    log_scale: float
    mu_scaled: np.ndarray
    log_scale_hat: float
    mu_hat_scaled: np.ndarray

    @property
    def mu(self) -> np.ndarray:
        return math.exp(self.log_scale) * self.mu_scaled

    @property
    def mu_hat(self) -> np.ndarray:
        return math.exp(self.log_scale_hat) * self.mu_hat_scaled


def phases(kappa: np.ndarray, t: TimeLike) -> np.ndarray:
    """theta(kappa_j; t) = sum_i kappa_j^i t_i."""
    tv = as_time(t).times
    kappa = np.asarray(kappa, dtype=float)
    powers = kappa[..., None] ** np.arange(1, len(tv) + 1)
    return powers @ np.asarray(tv)


def heat_basis(data: SolitonData, t: TimeLike, order: int) -> HeatBasisSample:
    if order < 0:
        raise OrderRangeError("order must be non-negative")
    t = as_time(t)
    kap = data.kappa_array
    theta = phases(kap, t)
    powers = kap[None, :] ** np.arange(order + 1)[:, None]

    m = theta.max()
    mu = powers @ (data.a_array * np.exp(theta - m))

    # dual basis: reciprocal-alpha weights evaluated at -t
    dual = reciprocal_weights(data)
    theta_hat = -theta
    mh = theta_hat.max()
    mu_hat = powers @ (dual.a_array * np.exp(theta_hat - mh))
    return HeatBasisSample(theta, theta.copy(), float(m), mu, float(mh), mu_hat)


def _check_order(data: SolitonData, k: int) -> None:
    if data.n > MAX_N:
        raise SizeError(f"subset enumeration is capped at n = {MAX_N}")
    if not (0 <= k <= data.n):
        raise OrderRangeError(f"k must lie in [0, {data.n}], got {k}")


@lru_cache(maxsize=512)
def _subset_table(data: SolitonData, k: int):
    """Index array, log coefficients and phase sums s_I for all k-subsets."""
    n = data.n
    idx = np.array(list(combinations(range(n), k)), dtype=int).reshape(math.comb(n, k), k)
    kap = data.kappa_array
    loga = np.log(data.a_array)
    logc = loga[idx].sum(axis=1)
    for r, s in combinations(range(k), 2):
        logc = logc + 2.0 * np.log(kap[idx[:, s]] - kap[idx[:, r]])
    s_sum = kap[idx].sum(axis=1)
    for arr in (idx, logc, s_sum):
        arr.setflags(write=False)
    return idx, logc, s_sum


def _log_terms(data: SolitonData, k: int, theta: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Log of each Cauchy-Binet term; theta has shape (..., n)."""
    idx, logc, s_sum = _subset_table(data, k)
    return logc + theta[..., idx].sum(axis=-1), s_sum


def log_tau_cumulants(data: SolitonData, k: int, t: TimeLike, order: int = 2):
    """log tau_k(t) and the first ``order`` x-derivatives of log tau_k.

    The x-derivatives of log tau are the cumulants of the phase sums s_I under
    the normalized term weights.
    """
    _check_order(data, k)
    theta = phases(data.kappa_array, t)
    logs, s = _log_terms(data, k, theta)
    lt = float(logsumexp(logs))
    w = np.exp(logs - lt)
    cum = _weighted_cumulants(w, s, order)
    return lt, cum


def _weighted_cumulants(w: np.ndarray, s: np.ndarray, order: int) -> np.ndarray:
    out = np.zeros(order)
    if order == 0:
        return out
    mean = float(w @ s)
    out[0] = mean
    if order == 1:
        return out
    c = s - mean
    # central moments m_0..m_order, then the moment-to-cumulant recursion
    m = np.array([float(w @ c**p) for p in range(order + 1)])
    m[1] = 0.0
    kc = np.zeros(order + 1)
    for p in range(2, order + 1):
        kc[p] = m[p] - sum(math.comb(p - 1, i - 1) * kc[i] * m[p - i] for i in range(2, p - 1))
    out[1:] = kc[2:]
    return out


def tau(data: SolitonData, k: int, t: TimeLike) -> TauValue:
    lt, _ = log_tau_cumulants(data, k, t, order=0)
    return TauValue(lt, 1)


def log_tau_all(data: SolitonData, t: TimeLike, order: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """log tau_k and cumulants for every k = 0..n; shapes (n+1,), (n+1, order)."""
    n = data.n
    logs = np.zeros(n + 1)
    cums = np.zeros((n + 1, order))
    for k in range(n + 1):
        logs[k], cums[k] = log_tau_cumulants(data, k, t, order)
    return logs, cums


def log_tau_all_mp(data: SolitonData, t: TimeLike, dps: int = EXTENDED_DPS):
    """Extended-precision log tau_k and d/dx log tau_k for k = 0..n (mpf lists)."""
    tv = as_time(t).times
    with mpmath.workdps(dps):
        kap = [mpmath.mpf(x) for x in data.kappa]
        a = [mpmath.mpf(x) for x in data.a]
        theta = [mpmath.fsum(kj ** (i + 1) * mpmath.mpf(ti) for i, ti in enumerate(tv)) for kj in kap]
        logs, means = [], []
        for k in range(data.n + 1):
            terms, weighted = [], []
            for I in combinations(range(data.n), k):
                v = mpmath.exp(mpmath.fsum(theta[i] for i in I))
                for i in I:
                    v *= a[i]
                for r, s in combinations(I, 2):
                    v *= (kap[s] - kap[r]) ** 2
                terms.append(v)
                weighted.append(v * mpmath.fsum(kap[i] for i in I))
            total = mpmath.fsum(terms)
            logs.append(mpmath.log(total))
            means.append(mpmath.fsum(weighted) / total)
        return logs, means


def _grid_times(grid, base: TimeLike = None) -> np.ndarray:
    g = np.atleast_2d(np.asarray(grid, dtype=float))
    if g.shape[-1] != 3:
        raise SizeError("grid points must be (x, y, t3) triples")
    b = as_time(base).padded(3)
    out = np.tile(b, (g.shape[0], 1))
    out[:, :3] += g
    return out


def kp_field(data: SolitonData, k: int, grid: Iterable, base: TimeLike = None) -> np.ndarray:
    """u = 2 d^2/dx^2 log tau_k at each (x, y, t3) grid point.

    ``base`` supplies higher times (t4, ...) and is added to each point.
    Evaluated as twice the weighted variance of the phase sums.
    """
    _check_order(data, k)
    times = _grid_times(grid, base)
    kap = data.kappa_array
    powers = kap[:, None] ** np.arange(1, times.shape[1] + 1)[None, :]
    theta = times @ powers.T  # (P, n)
    logs, s = _log_terms(data, k, theta)
    lt = logsumexp(logs, axis=-1, keepdims=True)
    w = np.exp(logs - lt)
    mean = w @ s
    c = s[None, :] - mean[:, None]
    var = np.einsum("pc,pc->p", w, c * c)
    return 2.0 * var
