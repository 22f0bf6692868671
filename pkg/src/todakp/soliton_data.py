"""Soliton data: phases, positive weights, and their Grassmannian representatives."""
from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations
from typing import Sequence

import numpy as np

from .errors import OrderRangeError, OrderingError, PositivityError, SizeError

GAP_FLOOR = 1e-9


@dataclass(frozen=True)
class SolitonData:
    """Strictly increasing phases ``kappa`` and normalized positive weights ``a``."""

    kappa: tuple[float, ...]
    a: tuple[float, ...]

    def __post_init__(self):
        _check(self.kappa, self.a)
        s = math.fsum(self.a)
        if abs(s - 1.0) > 4 * len(self.a) * np.finfo(float).eps:
            raise PositivityError(f"weights must be normalized, sum is {s!r}")

    @property
    def n(self) -> int:
        return len(self.kappa)

    @property
    def kappa_array(self) -> np.ndarray:
        return np.array(self.kappa, dtype=float)

    @property
    def a_array(self) -> np.ndarray:
        return np.array(self.a, dtype=float)

    @property
    def span(self) -> float:
        return self.kappa[-1] - self.kappa[0]


@dataclass(frozen=True)
class AlphaVector:
    """Projective alpha coordinates, scaled so that the first entry is 1."""

    alpha: tuple[float, ...]

    def __post_init__(self):
        if any(not (x > 0) for x in self.alpha):
            raise PositivityError("alpha coordinates must be positive")


@dataclass(frozen=True)
class GrassmannRep:
    rows: int
    cols: int
    entries: np.ndarray
    form: str  # "vandermonde-weighted" or "rref"


def _check(kappa: Sequence[float], weights: Sequence[float]) -> None:
    if len(kappa) != len(weights):
        raise SizeError(f"{len(kappa)} phases but {len(weights)} weights")
    if len(kappa) < 2:
        raise SizeError("need at least two phases")
    k = np.asarray(kappa, dtype=float)
    w = np.asarray(weights, dtype=float)
    if not (np.all(np.isfinite(k)) and np.all(np.isfinite(w))):
        raise SizeError("phases and weights must be finite")
    gaps = np.diff(k)
    if np.any(gaps <= 0):
        raise OrderingError("phases must be strictly increasing")
    if np.min(gaps) < GAP_FLOOR * (k[-1] - k[0]):
        raise OrderingError("phase gap below the degeneracy floor")
    if np.any(w <= 0):
        raise PositivityError("all weights must be positive")


def make_soliton_data(kappa: Sequence[float], weights: Sequence[float]) -> SolitonData:
    """Validate phases and weights and normalize the weights to sum 1."""
    _check(kappa, weights)
    w = np.asarray(weights, dtype=float)
    s = math.fsum(w)
    return SolitonData(tuple(float(x) for x in kappa), tuple(float(x) for x in w / s))


def _signed_products(kappa: np.ndarray) -> np.ndarray:
    """prod_{m != j} (kappa_j - kappa_m) for each j."""
    diff = kappa[:, None] - kappa[None, :]
    np.fill_diagonal(diff, 1.0)
    return diff.prod(axis=1)


def alpha_coordinates(data: SolitonData) -> AlphaVector:
    k = data.kappa_array
    n = data.n
    signs = (-1.0) ** (n - 1 - np.arange(n))
    alpha = signs * data.a_array * _signed_products(k)
    return AlphaVector(tuple(float(x) for x in alpha / alpha[0]))


def from_alpha(kappa: Sequence[float], alpha: AlphaVector) -> SolitonData:
    k = np.asarray(kappa, dtype=float)
    n = len(k)
    if len(alpha.alpha) != n:
        raise SizeError("alpha vector length differs from the number of phases")
    signs = (-1.0) ** (n - 1 - np.arange(n))
    a = signs * np.asarray(alpha.alpha) / _signed_products(k)
    return make_soliton_data(k, a)


def reciprocal_weights(data: SolitonData) -> SolitonData:
    """Weights whose alpha coordinates are the reciprocals of those of ``data``."""
    alpha = alpha_coordinates(data).alpha
    return from_alpha(data.kappa, AlphaVector(tuple(1.0 / x for x in alpha)))


def _check_rank(data: SolitonData, k: int) -> None:
    if not (1 <= k <= data.n - 1):
        raise OrderRangeError(f"k must lie in [1, {data.n - 1}], got {k}")


def maximal_minors(data: SolitonData, k: int) -> dict[tuple[int, ...], float]:
    """All k x k minors of the representative matrix, by the product formula.

    Keys are 0-based column tuples.
    """
    _check_rank(data, k)
    kap, a = data.kappa, data.a
    out = {}
    for cols in combinations(range(data.n), k):
        v = math.prod(a[c] for c in cols)
        for r, s in combinations(cols, 2):
            v *= kap[s] - kap[r]
        out[cols] = v
    return out


def representative_matrix(data: SolitonData, k: int) -> GrassmannRep:
    _check_rank(data, k)
    kap = data.kappa_array
    entries = data.a_array[None, :] * kap[None, :] ** np.arange(k)[:, None]
    minors = maximal_minors(data, k)
    if min(minors.values()) <= 0:
        raise PositivityError("representative matrix is not totally positive")
    entries.setflags(write=False)
    return GrassmannRep(k, data.n, entries, "vandermonde-weighted")


def rref_matrix(data: SolitonData, k: int) -> GrassmannRep:
    """Reduced row echelon form of the representative matrix, in closed form.

    Entry (r, c) for a non-pivot column c is (a_c / a_r) times the Lagrange
    basis polynomial on the pivot phases, evaluated at kappa_c.
    """
    _check_rank(data, k)
    kap = data.kappa_array
    a = data.a_array
    n = data.n
    out = np.zeros((k, n))
    out[:, :k] = np.eye(k)
    nodes = kap[:k]
    for r in range(k):
        others = np.delete(nodes, r)
        num = np.prod(kap[k:, None] - others[None, :], axis=1)
        den = np.prod(nodes[r] - others)
        out[r, k:] = a[k:] / a[r] * num / den
    out.setflags(write=False)
    return GrassmannRep(k, n, out, "rref")


def rref_coefficients(data: SolitonData, k: int) -> np.ndarray:
    """De-signed tail of the RREF: X[r, j] = (-1)^(k-1-r) * RREF[r, k+j] > 0 (0-based r)."""
    tail = rref_matrix(data, k).entries[:, k:]
    signs = (-1.0) ** (k - 1 - np.arange(k))
    return signs[:, None] * tail
