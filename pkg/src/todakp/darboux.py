"""Darboux operators and dressed KP wavefunctions on the two sheets of the curve."""
from __future__ import annotations

import math
from dataclasses import dataclass

import mpmath
import numpy as np

from .errors import KernelViolationError, OrderRangeError, PoleError
from .soliton_data import SolitonData
from .tau_engine import EXTENDED_DPS, TimeLike, TimeVector, as_time, log_tau_all, log_tau_all_mp, phases
from .toda_core import (
    diagonal_jets,
    evaluate_minors,
    jacobi_entries_mp,
    jacobi_matrix,
    minor_polynomials,
    node_minors,
    principal_spectrum,
)

KERNEL_TOL = 1e-8
POLE_TOL = 1e-12


@dataclass(frozen=True)
class DarbouxOperator:
    """D = d^k - w_1 d^(k-1) - ... - w_k, with d the x-derivative."""

    k: int
    w: tuple[float, ...]
    t: TimeVector
    kernel_residual: float = 0.0

    def symbol(self, zeta):
        """zeta^k - w_1 zeta^(k-1) - ... - w_k."""
        z = np.asarray(zeta, dtype=float)
        out = z**self.k
        for i, wi in enumerate(self.w, start=1):
            out = out - wi * z ** (self.k - i)
        return out

    def coefficients(self) -> np.ndarray:
        """Symbol coefficients, lowest degree first."""
        return np.concatenate((-np.asarray(self.w[::-1]), [1.0]))


@dataclass(frozen=True)
class CurvePoint:
    sheet: str  # "plus" or "minus"
    zeta: float = 0.0
    is_infinity: bool = False

    def __post_init__(self):
        if self.sheet not in ("plus", "minus"):
            raise ValueError(f"sheet must be 'plus' or 'minus', got {self.sheet!r}")

    def sigma(self) -> "CurvePoint":
        return CurvePoint("minus" if self.sheet == "plus" else "plus", self.zeta, self.is_infinity)


@dataclass(frozen=True)
class WaveValue:
    """Value stored as sign * exp(log_abs); at_pole marks a probed pole."""

    log_abs: float
    sign: int
    at: CurvePoint
    t: TimeVector
    k: int
    at_pole: bool = False

    @property
    def value(self) -> float:
        if self.sign == 0:
            return 0.0
        return self.sign * math.exp(self.log_abs)


def _check_k(data: SolitonData, k: int, lo: int) -> None:
    if not (lo <= k <= data.n - 1):
        raise OrderRangeError(f"k must lie in [{lo}, {data.n - 1}], got {k}")


def kernel_residual(data: SolitonData, op: DarbouxOperator) -> float:
    """max_i |D mu_i| against the size of its terms before cancellation.

    D E_j = symbol(kappa_j) E_j, and each symbol value is scaled by
    sum_m |c_m| |kappa_j|^m, the magnitude it is computed from.
    """
    kap = data.kappa_array
    theta = phases(kap, op.t)
    E = data.a_array * np.exp(theta - theta.max())
    coeffs = op.coefficients()
    sym_scale = np.abs(kap)[:, None] ** np.arange(op.k + 1) @ np.abs(coeffs)
    worst = 0.0
    for i in range(op.k):
        v = kap**i * op.symbol(kap) * E
        scale = np.sum(np.abs(kap**i) * sym_scale * E)
        if scale > 0:
            worst = max(worst, abs(math.fsum(v)) / scale)
    return worst


def darboux_operator(data: SolitonData, k: int, t: TimeLike = None) -> DarbouxOperator:
    """Order-k operator whose symbol is the leading minor hatDelta_k(zeta; t)."""
    _check_k(data, k, 1)
    t = as_time(t)
    coeffs = minor_polynomials(jacobi_matrix(data, t)).delta_hat[k]
    w = tuple(float(-coeffs[k - i]) for i in range(1, k + 1))
    op = DarbouxOperator(k, w, t)
    res = kernel_residual(data, op)
    if res > KERNEL_TOL:
        raise KernelViolationError(f"Darboux operator misses the kernel condition by {res:.3e}")
    return DarbouxOperator(k, w, t, res)


def ladder_coefficients(data: SolitonData, k: int, t: TimeLike = None) -> np.ndarray:
    """Symbol of (d - b_k)(d - b_{k-1})...(d - b_1), lowest degree first.

    Coefficients are carried as x-jets (derivative values) so that the
    composition with variable coefficients is exact up to truncation.
    """
    _check_k(data, k, 0)
    jets = diagonal_jets(data, as_time(t), max(k, 1))
    N = jets.shape[1]
    binom = np.array([[math.comb(m, i) for i in range(N)] for m in range(N)], dtype=float)

    def mul(f, g):
        out = np.zeros(N)
        for m in range(N):
            out[m] = np.sum(binom[m, : m + 1] * f[: m + 1] * g[m::-1])
        return out

    poly = np.zeros((1, N))
    poly[0, 0] = 1.0
    for j in range(k):
        bj = jets[j]
        nxt = np.zeros((poly.shape[0] + 1, N))
        nxt[1:] += poly
        for d in range(poly.shape[0]):
            nxt[d] -= mul(bj, poly[d])
            nxt[d, :-1] += poly[d, 1:]
        poly = nxt
    return poly[:, 0]


def _log_abs_sign(x: float) -> tuple[float, int]:
    if x == 0:
        return -math.inf, 0
    return math.log(abs(x)), 1 if x > 0 else -1


def _near(z: float, roots: np.ndarray, span: float) -> float | None:
    if len(roots) == 0:
        return None
    i = int(np.argmin(np.abs(roots - z)))
    return float(roots[i]) if abs(roots[i] - z) <= POLE_TOL * max(span, 1.0) else None


def _pole(point: float, at: CurvePoint, t, k, numerator: float, probe: bool) -> WaveValue:
    if not probe:
        raise PoleError(point)
    return WaveValue(math.inf, 1 if numerator >= 0 else -1, at, t, k, at_pole=True)


def _node_minors_mp(data: SolitonData, k: int, t: TimeVector):
    """hatDelta_k(kappa_j; t) at every node in extended precision."""
    a, b = jacobi_entries_mp(data, t)
    return _minors_mp(a, b, [mpmath.mpf(x) for x in data.kappa])[1][k]


def dressed_minus_numerator(
    data: SolitonData, k: int, zetas, t: TimeLike, precision: str = "standard"
) -> list[tuple[float, int]]:
    """D^(k) applied to the vacuum Gamma_- numerator, as (log |value|, sign) per zeta.

    The value is sum_j a_j E_j hatDelta_k(kappa_j; t) prod_{s != j}(zeta - kappa_s).
    """
    t = as_time(t)
    zetas = np.atleast_1d(np.asarray(zetas, dtype=float))
    out = []
    if precision == "extended-test":
        with mpmath.workdps(EXTENDED_DPS):
            H = _node_minors_mp(data, k, t)
            kap = [mpmath.mpf(x) for x in data.kappa]
            weights = []
            for j in range(data.n):
                theta = mpmath.fsum(kap[j] ** (i + 1) * mpmath.mpf(ti) for i, ti in enumerate(t.times))
                weights.append(mpmath.mpf(data.a[j]) * mpmath.exp(theta) * H[j])
            for zeta in zetas:
                z = mpmath.mpf(float(zeta))
                total = mpmath.mpf(0)
                for j in range(data.n):
                    term = weights[j]
                    for s in range(data.n):
                        if s != j:
                            term *= z - kap[s]
                    total += term
                if total == 0:
                    out.append((-math.inf, 0))
                else:
                    out.append((float(mpmath.log(abs(total))), 1 if total > 0 else -1))
        return out
    kap = data.kappa_array
    theta = phases(kap, t)
    m = float(theta.max())
    _, H = evaluate_minors(jacobi_matrix(data, t), kap)
    weights = data.a_array * np.exp(theta - m) * H[k]
    for zeta in zetas:
        diff = zeta - kap
        prods = np.array([np.prod(np.delete(diff, j)) for j in range(data.n)])
        la, s = _log_abs_sign(math.fsum(weights * prods))
        out.append((la + m, s))
    return out


def minus_sheet_profile(
    data: SolitonData, k: int, zetas, t: TimeLike, precision: str = "standard"
) -> np.ndarray:
    """Normalized dressed minus-sheet values at several points, via the dressing route."""
    now = dressed_minus_numerator(data, k, zetas, t, precision)
    ref = dressed_minus_numerator(data, k, zetas, TimeVector(), precision)
    return np.array([s * s0 * math.exp(l - l0) for (l, s), (l0, s0) in zip(now, ref)])


def wavefunction(
    data: SolitonData,
    k: int,
    p: CurvePoint,
    t: TimeLike = None,
    normalized: bool = False,
    probe: bool = False,
    route: str = "closed",
    precision: str = "standard",
) -> WaveValue:
    """Darboux-dressed wavefunction of order k at a point of either sheet.

    ``route="dressing"`` evaluates the minus sheet by applying the Darboux
    operator to the vacuum wavefunction term by term instead of the closed form;
    that sum cancels heavily, so ``precision="extended-test"`` is offered for it.
    """
    _check_k(data, k, 0)
    t = as_time(t)
    n = data.n
    span = data.span
    z = p.zeta
    state_t = jacobi_matrix(data, t)
    state_0 = jacobi_matrix(data, 0.0)

    if p.sheet == "plus":
        if p.is_infinity:
            raise ValueError("the plus-sheet infinity carries the essential singularity")
        _, H = evaluate_minors(state_t, z)
        theta = float(phases(np.array([z]), t)[0])
        la, s = _log_abs_sign(float(H[k]))
        if normalized:
            _, H0 = evaluate_minors(state_0, z)
            pole = _near(z, principal_spectrum(state_0, "leading", k), span)
            if pole is not None:
                return _pole(pole, p, t, k, float(H[k]), probe)
            l0, s0 = _log_abs_sign(float(H0[k]))
            la, s = la - l0, s * s0
        return WaveValue(la + theta, s, p, t, k)

    logs, _ = log_tau_all(data, t, 0)
    log_ratio = float(logs[k + 1] - logs[k])
    if p.is_infinity:
        if normalized:
            logs0, _ = log_tau_all(data, 0.0, 0)
            return WaveValue(log_ratio - float(logs0[k + 1] - logs0[k]), 1, p, t, k)
        if k == 0:
            return WaveValue(log_ratio, 1, p, t, k)
        return WaveValue(-math.inf, 0, p, t, k)

    if route == "dressing":
        lv, sv = dressed_minus_numerator(data, k, z, t, precision)[0]
        if normalized:
            l0, s0 = dressed_minus_numerator(data, k, z, TimeVector(), precision)[0]
            pole = _near(z, principal_spectrum(state_0, "trailing", n - k - 1), span)
            if pole is not None or s0 == 0:
                return _pole(pole if pole is not None else z, p, t, k, sv, probe)
            return WaveValue(lv - l0, sv * s0, p, t, k)
        D0, _ = evaluate_minors(state_0, z)
        pole = _near(z, principal_spectrum(state_0, "trailing", n - 1), span)
        if pole is not None:
            return _pole(pole, p, t, k, sv, probe)
        ld, sd = _log_abs_sign(float(D0[n - 1]))
        return WaveValue(lv - ld, sv * sd, p, t, k)
    if route != "closed":
        raise ValueError(f"unknown route {route!r}")

    D, _ = evaluate_minors(state_t, z)
    D0, _ = evaluate_minors(state_0, z)
    num = float(D[n - k - 1])
    if normalized:
        logs0, _ = log_tau_all(data, 0.0, 0)
        pole = _near(z, principal_spectrum(state_0, "trailing", n - k - 1), span)
        if pole is not None:
            return _pole(pole, p, t, k, num, probe)
        la, s = _log_abs_sign(num / float(D0[n - k - 1]))
        return WaveValue(la + log_ratio - float(logs0[k + 1] - logs0[k]), s, p, t, k)
    pole = _near(z, principal_spectrum(state_0, "trailing", n - 1), span)
    if pole is not None:
        return _pole(pole, p, t, k, num, probe)
    la, s = _log_abs_sign(num / float(D0[n - 1]))
    return WaveValue(la + log_ratio, s, p, t, k)


def _minors_mp(a, b, zetas):
    """Trailing and leading minors at each zeta as mpf lists indexed [level][point]."""
    n = len(b)
    D = [[mpmath.mpf(1)] * len(zetas)]
    H = [[mpmath.mpf(1)] * len(zetas)]
    for j in range(n):
        Dn, Hn = [], []
        for p, z in enumerate(zetas):
            dv = (z - b[n - 1 - j]) * D[j][p]
            hv = (z - b[j]) * H[j][p]
            if j > 0:
                dv -= a[n - 1 - j] * D[j - 1][p]
                hv -= a[j - 1] * H[j - 1][p]
            Dn.append(dv)
            Hn.append(hv)
        D.append(Dn)
        H.append(Hn)
    return D, H


def _gluing_sides_mp(data: SolitonData, k: int, t: TimeVector):
    n = data.n
    with mpmath.workdps(EXTENDED_DPS):
        zs = [mpmath.mpf(x) for x in data.kappa]
        a, b = jacobi_entries_mp(data, t)
        a0, b0 = jacobi_entries_mp(data, 0.0)
        logs, _ = log_tau_all_mp(data, t)
        D, H = _minors_mp(a, b, zs)
        D0, _ = _minors_mp(a0, b0, zs)
        plus, minus = [], []
        for p, z in enumerate(zs):
            theta = mpmath.fsum(z ** (i + 1) * mpmath.mpf(ti) for i, ti in enumerate(t.times))
            plus.append(float(H[k][p]))
            minus.append(float(mpmath.exp(logs[k + 1] - logs[k] - theta) * D[n - k - 1][p] / D0[n - 1][p]))
    return np.array(plus), np.array(minus)


def gluing_residual(data: SolitonData, k: int, t: TimeLike = None, precision: str = "standard") -> float:
    """Largest relative mismatch between the two sheets at the nodes kappa_j.

    Both sides are divided by E_j. The denominator is floored at 1e-10 times
    the largest plus-sheet node value so that nodes where both sides vanish
    (divisor collisions) do not produce 0/0. Node values near a divisor point
    are taken from the tau expansions, which keep small node values accurate;
    ``extended-test`` evaluates both sides with mpmath instead.
    """
    _check_k(data, k, 0)
    t = as_time(t)
    n = data.n
    kap = data.kappa_array
    if precision == "extended-test":
        plus, minus = _gluing_sides_mp(data, k, t)
    else:
        theta = phases(kap, t)
        D, H = node_minors(data, t)
        D0, _ = node_minors(data, 0.0)
        logs, _ = log_tau_all(data, t, 0)
        plus = H[k]
        minus = np.exp(logs[k + 1] - logs[k] - theta) * D[n - k - 1] / D0[n - 1]
    floor = 1e-10 * np.max(np.abs(plus))
    den = np.maximum(np.maximum(np.abs(plus), np.abs(minus)), floor)
    return float(np.max(np.abs(plus - minus) / den))
