"""Space-time inversion duality between Gr(k, n) and Gr(n-k, n) solitons."""
from __future__ import annotations

import math
from dataclasses import dataclass

import mpmath
import numpy as np

from .divisor_lab import Divisor, _levels, _prod, collision_tolerance, compatible_divisor, make_divisor
from .errors import DualityViolationError, OrderRangeError
from .soliton_data import SolitonData, reciprocal_weights
from .tau_engine import EXTENDED_DPS, TimeLike, as_time, kp_field, log_tau_all, phases
from .toda_core import jacobi_matrix, spectral_residues

DUAL_TOL = 1e-9


@dataclass(frozen=True)
class DualPair:
    primal: SolitonData
    dual: SolitonData
    k: int
    scale_constant: float  # C_k in tau_dual^(n-k)(t) = C_k tau^(k)(-t) prod E_j(t)


def dual_data(data: SolitonData, check_tol: float = DUAL_TOL) -> SolitonData:
    """Weights with reciprocal alpha coordinates, checked against the leading-minor residues."""
    dual = reciprocal_weights(data)
    _, residues = spectral_residues(jacobi_matrix(data, 0.0), data.kappa)
    # weights sum to 1; tiny weights make a per-entry relative test meaningless
    err = float(np.max(np.abs(residues - dual.a_array)))
    if err > check_tol:
        raise DualityViolationError(f"dual weights disagree with minor residues by {err:.3e}")
    return dual


def _check_k(data: SolitonData, k: int) -> None:
    if not (1 <= k <= data.n - 1):
        raise OrderRangeError(f"k must lie in [1, {data.n - 1}], got {k}")


def dual_pair(data: SolitonData, k: int) -> DualPair:
    _check_k(data, k)
    dual = dual_data(data)
    lp, _ = log_tau_all(data, 0.0, 0)
    ld, _ = log_tau_all(dual, 0.0, 0)
    return DualPair(data, dual, k, math.exp(ld[data.n - k] - lp[k]))


def product_law_values(data: SolitonData, dual: SolitonData | None = None) -> np.ndarray:
    """a_j ahat_j prod_{m != j} (kappa_j - kappa_m)^2; constant in j."""
    dual = dual or dual_data(data)
    kap = data.kappa_array
    diff = kap[:, None] - kap[None, :]
    np.fill_diagonal(diff, 1.0)
    return data.a_array * dual.a_array * diff.prod(axis=1) ** 2


def printed_product_law_values(data: SolitonData, dual: SolitonData | None = None) -> np.ndarray:
    """a_j ahat_j prod over pairs avoiding j of (kappa_l - kappa_i)^2, i.e. the -2 exponent moved across."""
    dual = dual or dual_data(data)
    kap = data.kappa_array
    n = data.n
    out = np.empty(n)
    for j in range(n):
        rest = np.delete(kap, j)
        v = 1.0
        for i in range(len(rest)):
            for l in range(i + 1, len(rest)):
                v *= (rest[l] - rest[i]) ** -2
        out[j] = data.a[j] * dual.a[j] / v
    return out


def spread(values: np.ndarray) -> float:
    """(max - min) / max |value|."""
    v = np.asarray(values, dtype=float)
    return float(np.ptp(v) / np.max(np.abs(v)))


def dual_divisor(data: SolitonData, k: int, tol: float = DUAL_TOL) -> Divisor:
    """Dual (n-k)-divisor obtained by swapping the sheets of the primal (k-1)-divisor."""
    _check_k(data, k)
    prev = compatible_divisor(data, k - 1, 0.0)
    sigma_route = make_divisor(data.kappa, prev.deltas, prev.gammas)
    direct = compatible_divisor(dual_data(data), data.n - k, 0.0)
    err = divisor_distance(sigma_route, direct)
    if err > tol * max(1.0, data.span):
        raise DualityViolationError(f"dual divisor routes differ by {err:.3e}")
    return sigma_route


def divisor_distance(d1: Divisor, d2: Divisor) -> float:
    if len(d1.gammas) != len(d2.gammas) or len(d1.deltas) != len(d2.deltas):
        return math.inf
    g = np.abs(np.subtract(d1.gammas, d2.gammas))
    d = np.abs(np.subtract(d1.deltas, d2.deltas))
    return float(max(g.max(initial=0.0), d.max(initial=0.0)))


def const_ratios(
    data: SolitonData, k: int, substitute_collisions: bool = False, precision: str = "standard"
) -> dict[int, float]:
    """Ratio of primal k- and dual (n-k)-divisor products at each node (0-based keys).

    Nodes that coincide with a divisor point are skipped unless
    ``substitute_collisions`` is set, in which case each colliding gamma/delta
    factor pair is replaced by -1. ``extended-test`` computes the divisor
    points with mpmath, since points close to a node make the products
    ill-conditioned.
    """
    _check_k(data, k)
    n = data.n
    kap = data.kappa_array
    tol = collision_tolerance(kap)
    dual = dual_data(data)
    _, _, lp = _levels(data, 0.0, precision)
    _, _, ld = _levels(dual, 0.0, precision)
    divisors = (lp[k], ld[n - k])
    out = {}
    with mpmath.workdps(EXTENDED_DPS):
        for j in range(n):
            kj = mpmath.mpf(kap[j]) if precision == "extended-test" else kap[j]
            sign = 1.0
            num, den = 1, 1
            for g, d in divisors:
                gc = [abs(kj - p) < tol for p in g]
                dc = [abs(kj - p) < tol for p in d]
                if any(gc) or any(dc):
                    if not substitute_collisions:
                        break
                    g = [p for p, c in zip(g, gc) if not c]
                    d = [p for p, c in zip(d, dc) if not c]
                    sign = -sign
                num = num * _prod(kj - p for p in g)
                den = den * _prod(kj - p for p in d)
            else:
                out[j] = float(sign * num / den)
    return out


def duality_residuals(data: SolitonData, k: int, t: TimeLike = None, grid=None) -> dict:
    """Field, tau and Toda-reflection residuals between data at t and its dual at -t.

    Grid points (x, y, t3) are added to t. Keys: "field", "tau", "toda".
    """
    _check_k(data, k)
    n = data.n
    t = as_time(t)
    pair = dual_pair(data, k)
    dual = pair.dual
    if grid is None:
        grid = np.zeros((1, 3))
    grid = np.atleast_2d(np.asarray(grid, dtype=float))

    u_dual = kp_field(dual, n - k, grid, t)
    u_primal = kp_field(data, k, -grid, -t)
    field = float(np.max(np.abs(u_dual - u_primal)))

    log_c = math.log(pair.scale_constant)
    kap = data.kappa_array
    tau_res = 0.0
    base = as_time(t).padded(3)
    for pt in grid:
        tv = base.copy()
        tv[:3] += pt
        ld, _ = log_tau_all(dual, tv, 0)
        lp, _ = log_tau_all(data, -tv, 0)
        rhs = log_c + lp[k] + float(np.sum(phases(kap, tv)))
        tau_res = max(tau_res, abs(ld[n - k] - rhs))

    sd = jacobi_matrix(dual, t)
    sp = jacobi_matrix(data, -t)
    # a_dual,(n-k) = a_(k)(-t) for every k, i.e. the reversed sequence; same for b
    toda = max(
        float(np.max(np.abs(sd.a - sp.a[::-1]), initial=0.0)),
        float(np.max(np.abs(sd.b - sp.b[::-1]))),
    )
    return {"field": field, "tau": tau_res, "toda": toda}
