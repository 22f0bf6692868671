"""Jacobi matrices of the finite Toda hierarchy and everything built on their minors."""
from __future__ import annotations

import math
from dataclasses import dataclass

import mpmath
import numpy as np
from numpy.polynomial import polynomial as P
from scipy.linalg import eigh_tridiagonal, expm
from scipy.special import logsumexp

from .errors import DegenerateFlowError, SpectrumMismatchError
from .soliton_data import SolitonData, reciprocal_weights
from .tau_engine import (
    EXTENDED_DPS,
    PRECISIONS,
    TimeLike,
    TimeVector,
    _log_terms,
    _subset_table,
    as_time,
    log_tau_all,
    log_tau_all_mp,
    log_tau_cumulants,
    phases,
)


@dataclass(frozen=True)
class TodaState:
    """Super-diagonal a (positive), diagonal b, unit sub-diagonal."""

    a_offdiag: tuple[float, ...]
    b_diag: tuple[float, ...]
    t: TimeVector = TimeVector()

    @property
    def n(self) -> int:
        return len(self.b_diag)

    @property
    def a(self) -> np.ndarray:
        return np.array(self.a_offdiag, dtype=float)

    @property
    def b(self) -> np.ndarray:
        return np.array(self.b_diag, dtype=float)

    def matrix(self) -> np.ndarray:
        return np.diag(self.b) + np.diag(self.a, 1) + np.diag(np.ones(self.n - 1), -1)

    def symmetrizer(self) -> np.ndarray:
        """Diagonal of c = diag(1, sqrt(a1), sqrt(a1 a2), ...)."""
        return np.concatenate(([1.0], np.sqrt(np.cumprod(self.a))))

    def spectrum(self) -> np.ndarray:
        return principal_spectrum(self, "leading", self.n)

    def entries(self) -> np.ndarray:
        return np.concatenate((self.a, self.b))


def state_from_matrix(A: np.ndarray, t: TimeLike = None) -> TodaState:
    return TodaState(tuple(np.diag(A, 1).tolist()), tuple(np.diag(A).tolist()), as_time(t))


def principal_spectrum(state: TodaState, which: str, size: int) -> np.ndarray:
    """Eigenvalues of the leading or trailing size x size block of the symmetrized matrix."""
    if size <= 0:
        return np.zeros(0)
    b = state.b
    off = np.sqrt(state.a)
    if which == "leading":
        d, e = b[:size], off[: size - 1]
    elif which == "trailing":
        d, e = b[state.n - size :], off[state.n - size :]
    else:
        raise ValueError(which)
    if size == 1:
        return d.copy()
    return eigh_tridiagonal(d, e, eigvals_only=True)


def _jacobi_from_logs(logs, means):
    n = len(logs) - 1
    a = [math.exp(logs[k - 1] + logs[k + 1] - 2 * logs[k]) for k in range(1, n)]
    b = [means[k] - means[k - 1] for k in range(1, n + 1)]
    return a, b


def jacobi_entries_mp(data: SolitonData, t: TimeLike, dps: int = EXTENDED_DPS):
    """(a, b) as mpf lists, for finite differences free of binary64 rounding."""
    logs, means = log_tau_all_mp(data, t, dps)
    with mpmath.workdps(dps):
        n = data.n
        a = [mpmath.exp(logs[k - 1] + logs[k + 1] - 2 * logs[k]) for k in range(1, n)]
        b = [means[k] - means[k - 1] for k in range(1, n + 1)]
    return a, b


def jacobi_matrix(data: SolitonData, t: TimeLike = None, precision: str = "standard") -> TodaState:
    """Toda state at time t from ratios and x-derivatives of the tau functions."""
    t = as_time(t)
    if precision not in PRECISIONS:
        raise ValueError(f"unknown precision profile {precision!r}")
    if precision == "extended-test":
        a, b = jacobi_entries_mp(data, t)
        return TodaState(tuple(float(x) for x in a), tuple(float(x) for x in b), t)
    logs, cums = log_tau_all(data, t, 1)
    a, b = _jacobi_from_logs(logs, cums[:, 0])
    return TodaState(tuple(a), tuple(b), t)


def diagonal_jets(data: SolitonData, t: TimeLike, order: int) -> np.ndarray:
    """Taylor data of b_k in x: row k-1 holds d^m b_k / dx^m for m = 0..order."""
    n = data.n
    c = np.zeros((n + 1, order + 1))
    for k in range(n + 1):
        _, c[k] = log_tau_cumulants(data, k, t, order + 1)
    return c[1:] - c[:-1]


@dataclass(frozen=True)
class MinorPolys:
    """Coefficient arrays (lowest degree first) of the trailing and leading minors."""

    delta: tuple[np.ndarray, ...]
    delta_hat: tuple[np.ndarray, ...]
    identity_residual: float

    def eval_delta(self, j: int, zeta):
        return P.polyval(zeta, self.delta[j])

    def eval_delta_hat(self, j: int, zeta):
        return P.polyval(zeta, self.delta_hat[j])


def _recurrence_coeffs(b_seq, a_seq):
    """Monic polys p_0..p_n with p_{j+1} = (z - b_seq[j]) p_j - a_seq[j-1] p_{j-1}."""
    polys = [np.array([1.0])]
    for j, bj in enumerate(b_seq):
        nxt = P.polymulx(polys[-1]) - bj * np.pad(polys[-1], (0, 1))
        if j > 0:
            nxt = nxt - a_seq[j - 1] * np.pad(polys[-2], (0, 2))
        polys.append(nxt)
    return polys


def evaluate_minors(state: TodaState, zeta):
    """Values of Delta_j and hat-Delta_j, j = 0..n, by the three-term recurrences."""
    z = np.asarray(zeta, dtype=float)
    b, a = state.b, state.a
    n = state.n
    D = np.empty((n + 1,) + z.shape)
    H = np.empty_like(D)
    D[0] = 1.0
    H[0] = 1.0
    D[1] = z - b[n - 1]
    H[1] = z - b[0]
    for j in range(1, n):
        D[j + 1] = (z - b[n - 1 - j]) * D[j] - a[n - 1 - j] * D[j - 1]
        H[j + 1] = (z - b[j]) * H[j] - a[j - 1] * H[j - 1]
    return D, H


def third_identity_residual(state: TodaState, zeta) -> float:
    """max_j |Delta_n - (Delta_{n-j} hatDelta_j - a_j Delta_{n-j-1} hatDelta_{j-1})|, relative."""
    D, H = evaluate_minors(state, zeta)
    n = state.n
    a = state.a
    worst = 0.0
    for j in range(1, n):
        t1 = D[n - j] * H[j]
        t2 = a[j - 1] * D[n - j - 1] * H[j - 1]
        scale = np.maximum(np.maximum(np.abs(t1), np.abs(t2)), np.abs(D[n]))
        worst = max(worst, float(np.max(np.abs(D[n] - (t1 - t2)) / scale)))
    return worst


def _leading_at(data: SolitonData, t: TimeLike, zeta: np.ndarray) -> np.ndarray:
    """hatDelta_j(zeta; t) = sum_I W_I prod_{i in I} (zeta - kappa_i), W_I the normalized tau_j terms."""
    n = data.n
    kap = data.kappa_array
    theta = phases(kap, t)
    out = np.empty((n + 1, len(zeta)))
    for j in range(n + 1):
        logs, _ = _log_terms(data, j, theta)
        idx, _, _ = _subset_table(data, j)
        w = np.exp(logs - logsumexp(logs))
        out[j] = np.prod(zeta[:, None, None] - kap[idx][None, :, :], axis=2) @ w
    return out


def node_minors(data: SolitonData, t: TimeLike = None) -> tuple[np.ndarray, np.ndarray]:
    """Delta_j(kappa_l; t) and hatDelta_j(kappa_l; t), shape (n+1, n), from tau expansions.

    Subsets containing kappa_l drop out exactly, so small node values keep
    their relative accuracy; the recurrence loses it to cancellation. The
    trailing minors are the leading minors of the reciprocal weights at -t.
    """
    t = as_time(t)
    kap = data.kappa_array
    H = _leading_at(data, t, kap)
    D = _leading_at(reciprocal_weights(data), -t, kap)
    return D, H


def minor_identity_residuals(state: TodaState, zeta) -> dict:
    """Recurrence values of the trailing and leading minors against direct
    determinants of the corresponding blocks, plus the third identity."""
    z = np.atleast_1d(np.asarray(zeta, dtype=float))
    D, H = evaluate_minors(state, z)
    A = state.matrix()
    n = state.n
    I = np.eye(n)
    out = {"trailing": 0.0, "leading": 0.0}
    for p, zp in enumerate(z):
        M = zp * I - A
        for j in range(1, n + 1):
            for key, block, val in (("trailing", M[n - j :, n - j :], D[j, p]), ("leading", M[:j, :j], H[j, p])):
                det = np.linalg.det(block)
                scale = max(abs(det), float(np.prod(np.abs(np.diag(block)))), 1e-300)
                out[key] = max(out[key], abs(det - val) / scale)
    out["third"] = third_identity_residual(state, z)
    return out


def probe_points(kappa) -> np.ndarray:
    k = np.asarray(kappa, dtype=float)
    return np.concatenate(((k[:-1] + k[1:]) / 2, [k[-1] + 1.0]))


def minor_polynomials(state: TodaState) -> MinorPolys:
    b, a = state.b, state.a
    delta = _recurrence_coeffs(b[::-1], a[::-1])
    delta_hat = _recurrence_coeffs(b, a)
    res = third_identity_residual(state, probe_points(np.sort(state.spectrum())))
    return MinorPolys(tuple(delta), tuple(delta_hat), res)


def reflect(state: TodaState) -> TodaState:
    """Reflection through the anti-diagonal: reverse both diagonals."""
    return TodaState(state.a_offdiag[::-1], state.b_diag[::-1], state.t)


def _lu_lower_unit_upper(psi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """psi = L U with L lower triangular, U unit upper triangular, no pivoting."""
    n = psi.shape[0]
    L = np.zeros_like(psi)
    U = np.eye(n)
    scale = np.max(np.abs(psi))
    for j in range(n):
        L[j:, j] = psi[j:, j] - L[j:, :j] @ U[:j, j]
        piv = L[j, j]
        if not np.isfinite(piv) or abs(piv) <= n * np.finfo(float).eps * scale:
            raise DegenerateFlowError(j + 1)
        U[j, j + 1 :] = (psi[j, j + 1 :] - L[j, :j] @ U[:j, j + 1 :]) / piv
    return L, U


def bruhat_flow(state0: TodaState, t: TimeLike) -> TodaState:
    """Toda state at time t by factoring exp(sum_j A0^j t_j)."""
    t = as_time(t)
    A0 = state0.matrix()
    gen = np.zeros_like(A0)
    Ap = np.eye(state0.n)
    for tj in t.times:
        Ap = Ap @ A0
        gen += tj * Ap
    psi = expm(gen)
    L, _ = _lu_lower_unit_upper(psi)
    A = np.linalg.solve(L, A0 @ L)
    return state_from_matrix(A, t)


def hamiltonians(A: np.ndarray, count: int) -> np.ndarray:
    """H_j = tr(A^(j+1)) / (j+1) for j = 1..count."""
    out = np.empty(count)
    Ap = A
    for j in range(1, count + 1):
        Ap = Ap @ A
        out[j - 1] = np.trace(Ap) / (j + 1)
    return out


def _state_difference(data, t, flow_index, h, precision):
    tp, tm = t.shifted(flow_index, h), t.shifted(flow_index, -h)
    # the rounded shifted times, not 2h, are the true step
    step = tp.times[flow_index - 1] - tm.times[flow_index - 1]
    if precision == "extended-test":
        with mpmath.workdps(EXTENDED_DPS):
            ap, bp = jacobi_entries_mp(data, tp)
            am, bm = jacobi_entries_mp(data, tm)
            da = [float((x - y) / step) for x, y in zip(ap, am)]
            db = [float((x - y) / step) for x, y in zip(bp, bm)]
    else:
        sp, sm = jacobi_matrix(data, tp), jacobi_matrix(data, tm)
        da = (sp.a - sm.a) / step
        db = (sp.b - sm.b) / step
    n = data.n
    return np.diag(db) + np.diag(da, 1) if n > 1 else np.diag(db)


def lax_residual(data: SolitonData, t: TimeLike, flow_index: int, h: float, precision: str = "standard") -> float:
    """Frobenius norm of the central-difference derivative minus [B_j, A]."""
    t = as_time(t)
    A = jacobi_matrix(data, t, precision).matrix()
    dA = _state_difference(data, t, flow_index, h, precision)
    B = np.triu(np.linalg.matrix_power(A, flow_index), 1)
    return float(np.linalg.norm(dA - (B @ A - A @ B)))


def hamiltonian_drift(data: SolitonData, times) -> float:
    """max over j <= n and the given times of |H_j(t) - H_j(0)| / max(1, |H_j(0)|)."""
    n = data.n
    H0 = hamiltonians(jacobi_matrix(data, 0.0).matrix(), n)
    worst = 0.0
    for t in times:
        H = hamiltonians(jacobi_matrix(data, t).matrix(), n)
        worst = max(worst, float(np.max(np.abs(H - H0) / np.maximum(1.0, np.abs(H0)))))
    return worst


def flow_invariant_residuals(
    data: SolitonData, t: TimeLike, flow_index: int, h: float, precision: str = "standard"
) -> dict:
    if h <= 0:
        raise ValueError("h must be positive")
    if flow_index < 1:
        raise ValueError("flow_index must be >= 1")
    t = as_time(t)
    r1 = lax_residual(data, t, flow_index, h, precision)
    r2 = lax_residual(data, t, flow_index, h / 2, precision)
    return {
        "lax_residual": r1,
        "richardson_ratio": r1 / r2 if r2 > 0 else math.inf,
        "hamiltonian_drift": hamiltonian_drift(data, [t]),
    }


def first_flow_residual(data: SolitonData, t: TimeLike, h: float = 1e-5, precision: str = "standard") -> float:
    """Finite-difference d a_k/dt1 and d b_k/dt1 against the first Toda flow."""
    t = as_time(t)
    s = jacobi_matrix(data, t, precision)
    dA = _state_difference(data, t, 1, h, precision)
    a, b = s.a, s.b
    a_ext = np.concatenate(([0.0], a, [0.0]))
    ra = np.abs(np.diag(dA, 1) - a * (b[1:] - b[:-1]))
    rb = np.abs(np.diag(dA) - (a_ext[1:] - a_ext[:-1]))
    return float(max(ra.max(initial=0.0), rb.max()))


def spectral_residues(state: TodaState, kappa, tol: float = 1e-9) -> tuple[np.ndarray, np.ndarray]:
    """Residues of Delta_{n-1}/Delta_n and hatDelta_{n-1}/Delta_n at each kappa_l."""
    kap = np.asarray(kappa, dtype=float)
    spec = np.sort(state.spectrum())
    span = kap[-1] - kap[0]
    if len(spec) != len(kap) or np.max(np.abs(spec - kap)) > tol * max(span, 1.0):
        raise SpectrumMismatchError("state spectrum does not match the given phases")
    D, H = evaluate_minors(state, kap)
    n = len(kap)
    diff = kap[:, None] - kap[None, :]
    np.fill_diagonal(diff, 1.0)
    den = diff.prod(axis=1)
    return D[n - 1] / den, H[n - 1] / den


@dataclass(frozen=True)
class BAVectorPair:
    psi: np.ndarray
    psi_sigma: np.ndarray
    zeta: float
    t: TimeVector


def ba_vectors(data: SolitonData, zeta: float, t: TimeLike = None) -> BAVectorPair:
    """Toda Baker-Akhiezer vectors on both sheets in the symmetrized representation.

    psi_j = exp(theta/2) hatDelta_j / c_j and
    psi_sigma_j = exp(-theta/2) (tau_{j+1}/tau_j) Delta_{n-j-1}(t) / (c_j Delta_{n-1}(0)).
    """
    t = as_time(t)
    n = data.n
    logs, cums = log_tau_all(data, t, 1)
    a, b = _jacobi_from_logs(logs, cums[:, 0])
    state = TodaState(tuple(a), tuple(b), t)
    state0 = jacobi_matrix(data, 0.0)
    c = state.symmetrizer()
    theta = float(phases(np.array([zeta]), t)[0])
    D, H = evaluate_minors(state, zeta)
    D0, _ = evaluate_minors(state0, zeta)
    psi = math.exp(theta / 2) * H[:n] / c
    ratio = np.exp(logs[1:] - logs[:-1])  # tau_{j+1}/tau_j, j = 0..n-1
    psi_sigma = math.exp(-theta / 2) * ratio * D[n - 1 :: -1][:n] / (c * D0[n - 1])
    return BAVectorPair(psi, psi_sigma, float(zeta), t)
