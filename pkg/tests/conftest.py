from fractions import Fraction
from itertools import combinations

import numpy as np
import pytest
from hypothesis import strategies as st

from todakp import make_soliton_data


@pytest.fixture
def worked():
    """K = {0,1,2}, a = (1/2, 1/4, 1/4)."""
    return make_soliton_data([0, 1, 2], [2, 1, 1])


@pytest.fixture
def uniform3():
    return make_soliton_data([0, 1, 2], [1, 1, 1])


def exact_tau0(kappa, a, k):
    """tau_k(0) = sum over k-subsets of prod a_i prod (kappa_s - kappa_r)^2, in fractions."""
    kap = [Fraction(x) for x in kappa]
    w = [Fraction(x) for x in a]
    total = Fraction(0)
    for I in combinations(range(len(kap)), k):
        v = Fraction(1)
        for i in I:
            v *= w[i]
        for r, s in combinations(I, 2):
            v *= (kap[s] - kap[r]) ** 2
        total += v
    return total


def exact_mean0(kappa, a, k):
    """x-derivative of log tau_k at 0, i.e. the weighted mean of the phase sums."""
    kap = [Fraction(x) for x in kappa]
    w = [Fraction(x) for x in a]
    num = Fraction(0)
    for I in combinations(range(len(kap)), k):
        v = Fraction(1)
        for i in I:
            v *= w[i]
        for r, s in combinations(I, 2):
            v *= (kap[s] - kap[r]) ** 2
        num += v * sum(kap[i] for i in I)
    return num / exact_tau0(kappa, a, k)


def exact_jacobi0(kappa, a):
    n = len(kappa)
    tau = [exact_tau0(kappa, a, k) for k in range(n + 1)]
    mean = [exact_mean0(kappa, a, k) if k else Fraction(0) for k in range(n + 1)]
    aa = [tau[k - 1] * tau[k + 1] / tau[k] ** 2 for k in range(1, n)]
    bb = [mean[k] - mean[k - 1] for k in range(1, n + 1)]
    return aa, bb


@st.composite
def soliton_data(draw, n_min=2, n_max=6, gap=0.1):
    """Sorted phases in [-2, 2] with a relative gap floor and weights in [0.05, 1]."""
    n = draw(st.integers(n_min, n_max))
    kap = draw(
        st.lists(st.floats(-2, 2, allow_nan=False), min_size=n, max_size=n).filter(
            lambda v: np.min(np.diff(np.sort(v))) > gap * (max(v) - min(v)) and max(v) - min(v) > 0.2
        )
    )
    w = draw(st.lists(st.floats(0.05, 1.0), min_size=n, max_size=n))
    return make_soliton_data(sorted(kap), w)


times = st.lists(st.floats(-1, 1, allow_nan=False), min_size=1, max_size=3)
