"""Explicit adoption-curve formulas.

All functions broadcast over ``t`` and return ``numpy`` arrays (or floats
for scalar input).  Differences ``1 - exp(-x)`` are formed with ``expm1``
so that values near ``t = 0`` keep full relative precision.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "SingularCoefficient",
    "RatePair",
    "bass_formula",
    "f_1d",
    "f_complete_m2",
    "f_complete_m3",
    "f_m2_pq_special",
    "interadoption_cdf_hom_complete",
    "SINGULAR_RTOL",
]

SINGULAR_RTOL = 1e-9


class SingularCoefficient(ZeroDivisionError):
    """A coefficient denominator of a closed form is (nearly) zero."""


@dataclass(frozen=True)
class RatePair:
    """External rate ``p`` and internal rate ``q`` of a homogeneous model."""

    p: float
    q: float

    def __post_init__(self) -> None:
        if not self.p > 0:
            raise ValueError("p must be positive")
        if not self.q >= 0:
            raise ValueError("q must be nonnegative")


def _rise(rate, t):
    """``1 - exp(-rate * t)``."""
    return -np.expm1(-np.multiply(rate, t))


def _as_output(x, t):
    return float(x) if np.ndim(t) == 0 else np.asarray(x, dtype=np.float64)


def _diff(a: float, b: float) -> float:
    """``a - b``, refusing values that vanish relative to ``max(|a|, |b|)``."""
    d = a - b
    if abs(d) <= SINGULAR_RTOL * max(abs(a), abs(b)):
        raise SingularCoefficient(f"singular denominator {a!r} - {b!r}")
    return d


def bass_formula(t, p: float, q: float):
    """Adoption fraction of the compartmental Bass model.

    ``f(t) = (1 - exp(-(p+q)t)) / (1 + (q/p) exp(-(p+q)t))``.

    Examples
    --------
    >>> round(bass_formula(1.0, 0.1, 0.4), 4)
    0.1148
    """
    if not p > 0:
        raise ZeroDivisionError("the Bass formula needs p > 0")
    t = np.asarray(t, dtype=np.float64)
    e = np.exp(-(p + q) * t)
    return _as_output(_rise(p + q, t) / (1.0 + (q / p) * e), t)


def f_1d(t, p: float, q: float):
    """Adoption fraction on an infinite homogeneous circle.

    ``f(t) = 1 - exp(-(p+q)t + q(1 - exp(-pt))/p)``.
    """
    if not p > 0:
        raise ZeroDivisionError("f_1d needs p > 0")
    t = np.asarray(t, dtype=np.float64)
    x = -(p + q) * t - q * np.expm1(-p * t) / p
    return _as_output(-np.expm1(x), t)


def f_complete_m2(t, p1: float, p2: float, q12: float, q21: float):
    """Exact adoption fraction of a general two-node network.

    ``q12`` is the push of node 1 on node 2 and ``q21`` that of node 2 on
    node 1.

    A node that receives no push adopts at its own rate alone, so its term
    is ``1 - exp(-p_j t)`` even where the general coefficients read 0/0.

    Raises
    ------
    SingularCoefficient
        When ``p2`` is too close to ``q21`` or ``p1`` to ``q12`` and the push
        in question is nonzero.
    """
    t = np.asarray(t, dtype=np.float64)
    p = (p1, p2)
    qin = (q21, q12)  # push received by node j from the other node
    ptot = p1 + p2
    f = np.zeros_like(t)
    for j in range(2):
        other = p[1 - j]
        if qin[j] == 0.0:
            f = f + _rise(p[j], t)
            continue
        den = _diff(other, qin[j])
        a = other / den
        b = qin[j] / den
        f = f + a * _rise(p[j] + qin[j], t) - b * _rise(ptot, t)
    return _as_output(0.5 * f, t)


def f_complete_m3(t, p, q):
    """Exact adoption fraction of a general three-node network.

    Parameters
    ----------
    t : float or array_like
    p : sequence of 3 floats
    q : 3x3 array_like
        ``q[i][j]`` is the push of node ``i`` on node ``j`` (0-based).

    Raises
    ------
    SingularCoefficient
        When any coefficient denominator vanishes within tolerance.
    """
    t = np.asarray(t, dtype=np.float64)
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != (3,) or q.shape != (3, 3):
        raise ValueError("need p of length 3 and a 3x3 q")

    # 1-based cyclic accessors
    def P(i):
        return float(p[(i - 1) % 3])

    def Q(i, j):
        return float(q[(i - 1) % 3, (j - 1) % 3])

    ptot = float(p.sum())
    f = np.zeros_like(t)
    for j in (1, 2, 3):
        A1 = (Q(j - 1, j) + Q(j + 2, j + 1)) / _diff(P(j - 1), Q(j - 1, j) + Q(j + 2, j + 1))
        A2 = (Q(j - 2, j - 1) + Q(j + 1, j)) / _diff(P(j + 1), Q(j - 2, j - 1) + Q(j + 1, j))
        D1 = _diff(P(j + 1) + Q(j + 2, j + 1), Q(j + 1, j))
        D2 = _diff(P(j - 1) + Q(j - 2, j - 1), Q(j - 1, j))
        D3 = _diff(P(j + 1) + P(j - 1), Q(j - 1, j) + Q(j + 1, j))
        D4 = _diff(P(j) + Q(j - 1, j), Q(j, j + 1))
        c = (Q(j + 1, j) * A1 + Q(j - 1, j) * A2) / D3
        a = 1.0 + (1.0 + A1) * Q(j + 1, j) / D1 + (1.0 + A2) * Q(j - 1, j) / D2 - c
        b = (1.0 + A1) * (Q(j + 1, j) / D1 + Q(j, j + 1) / D4)
        e1 = P(j) + Q(j - 1, j) + Q(j + 1, j)
        e2 = P(j) + P(j + 1) + Q(j - 1, j) + Q(j + 2, j + 1)
        f = f + a * _rise(e1, t) - b * _rise(e2, t) + c * _rise(ptot, t)
    return _as_output(f / 3.0, t)


def f_m2_pq_special(t, p: float, q: float):
    """Curves of the two-node networks with equal mean rates.

    Network A is homogeneous with rates ``(p, q)`` at both nodes.  Network B
    gives node 1 external rate ``2p`` and no in-influence, and node 2 no
    external rate and in-influence ``2q``.

    Returns
    -------
    (f_het, f_hom)
        Curves of networks B and A.  When ``p`` equals ``q`` (within the
        singularity tolerance) both are ``1 - (1 + pt) exp(-2pt)``.
    """
    if not (p > 0 and q > 0):
        raise ValueError("p and q must be positive")
    t = np.asarray(t, dtype=np.float64)
    if abs(p - q) <= SINGULAR_RTOL * max(p, q):
        r = 2.0 * p
        # 1 - (1 + rt/2) e^{-rt}
        same = _rise(r, t) - p * t * np.exp(-r * t)
        return _as_output(same, t), _as_output(same, t)
    c1 = (2 * q - p) / (2 * (q - p))
    f_het = c1 * _rise(2 * p, t) + (1.0 - c1) * _rise(2 * q, t)
    h1 = p / (p - q)
    f_hom = h1 * _rise(p + q, t) + (1.0 - h1) * _rise(2 * p, t)
    return _as_output(f_het, t), _as_output(f_hom, t)


def interadoption_cdf_hom_complete(m: int, p: float, q: float, k: int, tau):
    """CDF of the time between adoptions ``k - 1`` and ``k``.

    On the homogeneous complete network the ``k``-th step has constant
    rate ``(m - k + 1)(p + (k - 1) q / (m - 1))``.
    """
    if not 1 <= k <= m:
        raise ValueError("k must satisfy 1 <= k <= m")
    if p < 0 or q < 0:
        raise ValueError("rates must be nonnegative")
    push = (k - 1) * q / (m - 1) if m > 1 else 0.0
    rate = (m - k + 1) * (p + push)
    tau = np.asarray(tau, dtype=np.float64)
    return _as_output(_rise(rate, tau), tau)
