"""Divisors on the two sheets: extraction, oval bookkeeping, inversion and identities."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import mpmath
import numpy as np

from .errors import (
    AnchorUnavailableError,
    DivisorConsistencyError,
    InvalidDivisorError,
    OrderRangeError,
    SizeError,
)
from .soliton_data import SolitonData, make_soliton_data, rref_coefficients
from .tau_engine import EXTENDED_DPS, TimeLike, TimeVector, as_time, log_tau_all, log_tau_all_mp, phases
from .toda_core import TodaState, jacobi_entries_mp, jacobi_matrix, principal_spectrum

COLLISION_TOL = 1e-9


@dataclass(frozen=True)
class OvalAssignment:
    """Occupancy of the finite ovals [kappa_r, kappa_{r+1}], r = 1..n-1.

    ``before`` counts a point sitting on a node in both adjacent ovals.
    """

    before: tuple[int, ...]
    after: tuple[int, ...]


@dataclass(frozen=True)
class Divisor:
    """k points on the plus sheet and n-k-1 on the minus sheet.

    Oval indices are 1-based; collisions hold (node, gamma, delta) 0-based indices.
    """

    gammas: tuple[float, ...]
    deltas: tuple[float, ...]
    k: int
    t: TimeVector
    gamma_ovals: tuple[int, ...]
    delta_ovals: tuple[int, ...]
    generic: bool
    collisions: tuple[tuple[int, int, int], ...]
    assignment: OvalAssignment = field(compare=False)

    def oval_of(self, sheet: str, index: int) -> int:
        return (self.gamma_ovals if sheet == "plus" else self.delta_ovals)[index]

    def points(self) -> list[tuple[str, float, int]]:
        """(sheet, zeta, oval) for every point, sorted by oval."""
        out = [("plus", g, o) for g, o in zip(self.gammas, self.gamma_ovals)]
        out += [("minus", d, o) for d, o in zip(self.deltas, self.delta_ovals)]
        return sorted(out, key=lambda p: (p[2], p[0]))


def collision_tolerance(kappa: Sequence[float]) -> float:
    return COLLISION_TOL * (kappa[-1] - kappa[0])


def _classify(kappa: np.ndarray, z: float, tol: float) -> tuple[int | None, int | None]:
    """(node index if within tol of a node, 0-based oval index if strictly inside one)."""
    j = int(np.argmin(np.abs(kappa - z)))
    if abs(kappa[j] - z) < tol:
        return j, None
    r = int(np.searchsorted(kappa, z)) - 1
    if r < 0 or r >= len(kappa) - 1:
        return None, None
    return None, r


def make_divisor(kappa: Sequence[float], gammas: Sequence[float], deltas: Sequence[float], t: TimeLike = None) -> Divisor:
    """Assign points to ovals with the counting rule and check occupancy.

    A gamma and a delta sitting on the same interior node form a collision;
    the gamma copy goes to the left oval and the delta copy to the right one.
    """
    kap = np.asarray(kappa, dtype=float)
    n = len(kap)
    g = np.sort(np.asarray(gammas, dtype=float))
    d = np.sort(np.asarray(deltas, dtype=float))
    k = len(g)
    if k + len(d) != n - 1:
        raise DivisorConsistencyError(f"need n-1 = {n - 1} points, got {k + len(d)}")
    tol = collision_tolerance(kap)

    before = np.zeros(n - 1, dtype=int)
    g_ov = [-1] * k
    d_ov = [-1] * len(d)
    g_node, d_node = {}, {}
    for sheet, pts, ov, nodes in (("plus", g, g_ov, g_node), ("minus", d, d_ov, d_node)):
        for i, z in enumerate(pts):
            j, r = _classify(kap, z, tol)
            if j is not None and (j == 0 or j == n - 1):
                # points approach an outer node exponentially in t but never reach it
                r = 0 if j == 0 else n - 2
                ov[i] = r
                before[r] += 1
            elif j is not None:
                if j in nodes:
                    raise DivisorConsistencyError(f"two {sheet} points collide at node {j}")
                nodes[j] = i
                before[j - 1] += 1
                before[j] += 1
            elif r is None:
                raise DivisorConsistencyError(f"{sheet} point {z!r} lies outside [kappa_1, kappa_n]")
            else:
                ov[i] = r
                before[r] += 1

    collisions = []
    for j in sorted(set(g_node) | set(d_node)):
        gi, di = g_node.get(j), d_node.get(j)
        if gi is not None and di is not None:
            g_ov[gi], d_ov[di] = j - 1, j
            collisions.append((j, gi, di))
        else:
            # lone point on a node: give it whichever neighbouring oval is free
            taken = set(g_ov) | set(d_ov)
            choice = j - 1 if j - 1 not in taken else j
            if gi is not None:
                g_ov[gi] = choice
            else:
                d_ov[di] = choice

    after = np.zeros(n - 1, dtype=int)
    for o in g_ov + d_ov:
        after[o] += 1
    if np.any(after != 1):
        raise DivisorConsistencyError(f"oval occupancy {after.tolist()} violates the one-point-per-oval rule")
    return Divisor(
        tuple(float(x) for x in g),
        tuple(float(x) for x in d),
        k,
        as_time(t),
        tuple(o + 1 for o in g_ov),
        tuple(o + 1 for o in d_ov),
        not collisions,
        tuple(collisions),
        OvalAssignment(tuple(before.tolist()), tuple(after.tolist())),
    )


def vacuum_divisor(data: SolitonData, t: TimeLike = None) -> np.ndarray:
    """Spectrum of the symmetrized Jacobi matrix with its first row and column removed."""
    state = jacobi_matrix(data, t)
    return principal_spectrum(state, "trailing", data.n - 1)


def _divisor_points(state: TodaState, k: int) -> tuple[np.ndarray, np.ndarray]:
    n = state.n
    return principal_spectrum(state, "leading", k), principal_spectrum(state, "trailing", n - k - 1)


def compatible_divisor(data: SolitonData, k: int, t: TimeLike = None) -> Divisor:
    """k-compatible divisor; k = 0 gives the vacuum divisor on the minus sheet."""
    if not (0 <= k <= data.n - 1):
        raise OrderRangeError(f"k must lie in [0, {data.n - 1}], got {k}")
    t = as_time(t)
    gam, del_ = _divisor_points(jacobi_matrix(data, t), k)
    return make_divisor(data.kappa, gam, del_, t)


def invert_divisor(kappa: Sequence[float], d: Divisor) -> SolitonData:
    """Normalized weights whose k-compatible divisor at t = 0 is ``d``.

    For a collision at node j the coinciding gamma and delta factors are
    replaced by -1 (limit of gamma + eps, delta - eps).
    """
    kap = np.asarray(kappa, dtype=float)
    n = len(kap)
    if len(d.gammas) + len(d.deltas) != n - 1:
        raise SizeError("divisor size does not match the number of phases")
    skip = {j: (gi, di) for j, gi, di in d.collisions}
    w = np.array([float(x) for x in inverse_weights(kap, d.gammas, d.deltas, skip)])
    if np.any(~np.isfinite(w)) or np.any(w <= 0):
        raise InvalidDivisorError(f"divisor gives non-positive weights {w.tolist()}")
    return make_soliton_data(kap, w)


def inverse_weights(kappa, gammas, deltas, skip=None) -> list:
    """Un-normalized weights from divisor points; works on floats or mpmath numbers.

    ``skip`` maps a node index to the (gamma, delta) indices colliding there.
    """
    skip = skip or {}
    n = len(kappa)
    out = []
    for j in range(n):
        kj = kappa[j]
        base = _prod(kj - kappa[m] for m in range(n) if m != j)
        if j in skip:
            gi, di = skip[j]
            num = -_prod(kj - x for i, x in enumerate(deltas) if i != di)
            den = _prod(kj - x for i, x in enumerate(gammas) if i != gi) * base
        else:
            num = _prod(kj - x for x in deltas)
            den = _prod(kj - x for x in gammas) * base
        out.append(num / den)
    return out


def _rel(x: float, y: float, scale: float = 0.0) -> float:
    den = max(abs(x), abs(y), scale)
    return abs(x - y) / den if den > 0 else 0.0


def divisor_identity_residuals(
    data: SolitonData, k: int, t: TimeLike = None, probes=None, precision: str = "standard"
) -> dict:
    """Relative residuals of the divisor identities at time t.

    Keys: "recursion" (divisor k against k-1 and the Jacobi entry a_k),
    "vacuum_relation" (vacuum divisor, k-divisor and prod a_s at every node),
    "tau1" (tau_1 from the vacuum divisor for every anchor) and, when k = n-1,
    "rref" (the n-1 relations between RREF coefficients and the gammas,
    weighted by E_i(t) and E_{i+1}(t)).
    """
    n = data.n
    if not (1 <= k <= n - 1):
        raise OrderRangeError(f"k must lie in [1, {n - 1}], got {k}")
    t = as_time(t)
    kap = data.kappa_array
    ext = precision == "extended-test"
    a, _, levels = _levels(data, t, precision)
    _, _, levels0 = _levels(data, 0.0, precision)
    gk, dk = levels[k]
    gk1, dk1 = levels[k - 1]
    b_t = levels[0][1]
    b_0 = levels0[0][1]
    if probes is None:
        probes = np.concatenate(((kap[:-1] + kap[1:]) / 2, [kap[-1] + 1.0]))
    theta = phases(kap, t)

    with mpmath.workdps(EXTENDED_DPS):
        num = mpmath.mpf if ext else float
        log = mpmath.log if ext else math.log
        nodes = [num(x) for x in kap]

        rec = 0.0
        for z in np.atleast_1d(probes):
            z = num(z)
            lhs = _prod(z - x for x in nodes)
            t1 = _prod(z - p for p in gk) * _prod(z - p for p in dk1)
            t2 = a[k - 1] * _prod(z - p for p in gk1) * _prod(z - p for p in dk)
            rec = max(rec, _rel(lhs, t1 - t2, max(abs(t1), abs(t2))))

        pk = _prod(a[:k])
        vac = 0.0
        for z in nodes:
            t1 = _prod(z - p for p in b_t) * _prod(z - p for p in gk)
            t2 = pk * _prod(z - p for p in dk)
            vac = max(vac, _rel(t1, t2))

        if ext:
            logs, _ = log_tau_all_mp(data, t)
        else:
            logs, _ = log_tau_all(data, t, 0)
        tau1 = 0.0
        for l, z in enumerate(nodes):
            log_rhs = num(theta[l]) if not ext else mpmath.fsum(z ** (i + 1) * mpmath.mpf(ti) for i, ti in enumerate(t.times))
            log_rhs = log_rhs + sum(log(abs(z - p)) for p in b_0) - sum(log(abs(z - p)) for p in b_t)
            tau1 = max(tau1, abs(float(mpmath.expm1(logs[1] - log_rhs))))

        out = {"recursion": float(rec), "vacuum_relation": float(vac), "tau1": tau1, "rref": None}
        if k == n - 1:
            x = np.append(rref_coefficients(data, n - 1)[:, 0], 1.0)
            r = 0.0
            for i in range(n - 1):
                # kernel element x_{i+1} E_i + x_i E_{i+1}; the E factors are 1 at t = 0
                t1 = x[i + 1] * _prod(nodes[i] - p for p in gk)
                t2 = x[i] * _prod(nodes[i + 1] - p for p in gk) * math.exp(theta[i + 1] - theta[i])
                r = max(r, float(abs(t1 + t2) / max(abs(t1), abs(t2))))
            out["rref"] = r
    return out


def _all_levels(state: TodaState):
    n = state.n
    return [_divisor_points(state, k) for k in range(n)]


def _block_spectrum_mp(a, b, lo: int, hi: int) -> list:
    """Sorted eigenvalues of the symmetrized block on indices lo..hi-1."""
    m = hi - lo
    if m <= 0:
        return []
    M = mpmath.zeros(m, m)
    for i in range(m):
        M[i, i] = b[lo + i]
        if i + 1 < m:
            M[i, i + 1] = M[i + 1, i] = mpmath.sqrt(a[lo + i])
    return sorted(mpmath.eigsy(M, eigvals_only=True))


def _levels_mp(data: SolitonData, t: TimeLike):
    """Extended-precision (a, b) and (gammas, deltas) for every level k = 0..n-1."""
    n = data.n
    a, b = jacobi_entries_mp(data, t)
    with mpmath.workdps(EXTENDED_DPS):
        levels = [(_block_spectrum_mp(a, b, 0, k), _block_spectrum_mp(a, b, k + 1, n)) for k in range(n)]
    return a, b, levels


def _levels(data: SolitonData, t: TimeLike, precision: str):
    if precision == "extended-test":
        return _levels_mp(data, t)
    state = jacobi_matrix(data, t)
    return list(state.a), list(state.b), _all_levels(state)


def _prod(values):
    out = 1
    for v in values:
        out = out * v
    return out


def toda_from_divisor_flow(
    data: SolitonData, anchor_j: int, t: TimeLike = None, h: float | None = None, precision: str = "standard"
) -> TodaState:
    """Jacobi entries rebuilt from the divisors of every level and their x-velocities.

    ``anchor_j`` is 1-based. If the anchor node coincides with a divisor point
    the nearest non-colliding node is used instead. Divisor points close to a
    node make the velocity quotients ill-conditioned in binary64; the
    ``extended-test`` precision computes the points with mpmath.
    """
    n = data.n
    if not (1 <= anchor_j <= n):
        raise OrderRangeError(f"anchor must lie in [1, {n}]")
    t = as_time(t)
    if h is None:
        h = 1e-5 * max(1.0, t.norm_inf())
    tp, tm = t.shifted(1, h), t.shifted(1, -h)
    step = tp.times[0] - tm.times[0]
    kap = data.kappa_array
    tol = collision_tolerance(kap)
    _, _, levels = _levels(data, t, precision)
    _, _, plus = _levels(data, tp, precision)
    _, _, minus = _levels(data, tm, precision)

    def clear(j):
        return all(abs(kap[j] - p) >= tol for lvl in levels for pts in lvl for p in pts)

    order = sorted(range(n), key=lambda j: (abs(j - (anchor_j - 1)), j))
    usable = [j for j in order if clear(j)]
    if not usable:
        raise AnchorUnavailableError("every node collides with a divisor point")
    j = usable[0]

    with mpmath.workdps(EXTENDED_DPS):
        kj = mpmath.mpf(kap[j]) if precision == "extended-test" else kap[j]
        a = []
        for k in range(1, n):
            gk, dk = levels[k]
            gk1, dk1 = levels[k - 1]
            num = _prod(kj - p for p in gk) * _prod(kj - p for p in dk1)
            den = _prod(kj - p for p in gk1) * _prod(kj - p for p in dk)
            a.append(float(num / den))
        b = []
        for k in range(1, n + 1):
            g, d = levels[k - 1]
            pg, pd = plus[k - 1]
            mg, md = minus[k - 1]
            val = kj
            for x, xp, xm in zip(d, pd, md):
                val = val + (xp - xm) / step / (kj - x)
            for x, xp, xm in zip(g, pg, mg):
                val = val - (xp - xm) / step / (kj - x)
            b.append(float(val))
    return TodaState(tuple(a), tuple(b), t)


def sample_divisor(kappa: Sequence[float], k: int, rng: np.random.Generator, collide: bool = False) -> Divisor:
    """Random k-compatible divisor at t = 0: one point per finite oval.

    With ``collide`` (needs 1 <= k <= n-2) a gamma and a delta are placed on a
    common interior node, filling the two ovals next to it.
    """
    kap = np.asarray(kappa, dtype=float)
    n = len(kap)
    ovals = list(range(n - 1))
    gammas, deltas = [], []
    if collide:
        if not (1 <= k <= n - 2):
            raise OrderRangeError("a collision needs 1 <= k <= n-2")
        m = int(rng.integers(1, n - 1))
        gammas.append(kap[m])
        deltas.append(kap[m])
        ovals.remove(m - 1)
        ovals.remove(m)
        n_gamma = k - 1
    else:
        n_gamma = k
    chosen = set(rng.choice(ovals, size=n_gamma, replace=False).tolist()) if n_gamma else set()
    for r in ovals:
        z = kap[r] + rng.uniform(0.05, 0.95) * (kap[r + 1] - kap[r])
        (gammas if r in chosen else deltas).append(z)
    return make_divisor(kap, gammas, deltas)
