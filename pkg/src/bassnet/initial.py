"""Derivatives of the adoption curve at ``t = 0``.

Closed forms for general, mildly heterogeneous and Cartesian networks,
plus finite-difference estimates from the exact master solution used to
verify them.
"""

from __future__ import annotations

import decimal
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .network import MildHetSpec, Network

__all__ = [
    "InitialDerivatives",
    "derivatives_general",
    "derivatives_mild_het",
    "derivatives_cartesian",
    "cartesian_limit_d3",
    "finite_difference_derivatives",
    "master_fd_derivatives",
]


@dataclass(frozen=True)
class InitialDerivatives:
    """``f'(0)``, ``f''(0)`` and, where a formula exists, ``f'''(0)``."""

    d1: float
    d2: float
    d3: float | None = None


def derivatives_general(net: Network) -> InitialDerivatives:
    """Initial slope and curvature of an arbitrary network.

    ``f'(0) = mean(p)`` and ``f''(0) = (sum_i p_i q^i - sum_i p_i^2) / m``
    with ``q^i`` the out-influence of node ``i``.
    """
    p = np.asarray(net.p)
    m = net.m
    d1 = float(p.sum() / m)
    d2 = float((p @ net.out_influences - p @ p) / m)
    return InitialDerivatives(d1, d2)


def derivatives_mild_het(spec: MildHetSpec) -> InitialDerivatives:
    """Initial derivatives of a mildly heterogeneous complete network.

    The third derivative is returned only when ``p`` is uniform.

    Examples
    --------
    >>> d = derivatives_mild_het(MildHetSpec.homogeneous(3, 0.1, 0.4))
    >>> round(d.d2, 12), round(d.d3, 12)
    (0.03, -0.015)
    """
    p = np.asarray(spec.p)
    qn = np.asarray(spec.q_node)
    m = spec.m
    if m < 2:
        raise ValueError("mild heterogeneity needs m >= 2")
    sq = float(qn.sum())
    d1 = float(p.sum() / m)
    d2 = float((sq * p.sum() - qn @ p) / (m * (m - 1)) - (p @ p) / m)
    d3 = None
    if np.all(p == p[0]):
        pp = float(p[0])
        k = (m - 1) ** 2
        d3 = pp ** 3 + (pp / m) * ((m - 2) / k * sq ** 2 - (2 * m - 3) / k * float(qn @ qn)
                                   - 4 * pp * sq)
    return InitialDerivatives(d1, d2, d3)


def derivatives_cartesian(d: int, p: float, q: float) -> InitialDerivatives:
    """Initial derivatives on the infinite ``d``-dimensional lattice.

    ``f'''(0) = p (p^2 - 4pq + (d-1)/d q^2)``, increasing in ``d``.
    """
    if d < 1:
        raise ValueError("dimension must be >= 1")
    if not p > 0 or q < 0:
        raise ValueError("need p > 0 and q >= 0")
    d3 = p * (p * p - 4 * p * q + (d - 1) / d * q * q)
    return InitialDerivatives(p, p * (q - p), d3)


def cartesian_limit_d3(p: float, q: float) -> float:
    """Large-dimension limit ``p (p^2 - 4pq + q^2)`` of the lattice ``f'''(0)``."""
    return p * (p * p - 4 * p * q + q * q)


# ---------------------------------------------------- finite differences
# integer weights and denominators of one-sided stencils with O(h^2) error
_STENCILS = {
    1: ((-3, 4, -1), 2, 1),
    2: ((2, -5, 4, -1), 1, 2),
    3: ((-5, 18, -24, 14, -3), 2, 3),
}


def finite_difference_derivatives(
    f: Callable[[Sequence], Sequence],
    hs: Sequence = (1e-3, 5e-4),
    orders: Sequence[int] = (1, 2, 3),
) -> dict:
    """One-sided Richardson-extrapolated derivatives of ``f`` at 0.

    Each stencil has second-order error, so estimates at ``h`` and ``h/2``
    combine as ``(4 D(h/2) - D(h)) / 3``.  Arithmetic follows the number
    type returned by ``f``, so a :class:`decimal.Decimal` valued ``f``
    with Decimal steps is differenced without rounding to double.

    Parameters
    ----------
    f : callable
        Maps a sequence of times ``t >= 0`` to values.
    hs : (h, h/2)
        The two step sizes.
    """
    h1, h2 = hs
    if abs(float(h2) - float(h1) / 2) > 1e-15 * float(h1):
        raise ValueError("Richardson extrapolation expects steps h and h/2")
    out = {}
    for order in orders:
        weights, den, power = _STENCILS[order]
        est = []
        for h in (h1, h2):
            vals = list(f([h * k for k in range(len(weights))]))
            num = sum(w * v for w, v in zip(weights, vals))
            est.append(num / (den * h ** power))
        out[order] = (4 * est[1] - est[0]) / 3
    return out


def master_fd_derivatives(net: Network, hs: Sequence[float] = (1e-3, 5e-4),
                          digits: int = 50) -> InitialDerivatives:
    """Finite-difference derivatives of the exact master curve at 0.

    The curve is the analytic master solution evaluated in ``digits``-digit
    decimal arithmetic, so the differences are limited by truncation error
    only.

    Raises
    ------
    bassnet.master.DegenerateExponents
        When the analytic backend cannot represent the network.
    """
    from .master import high_precision_curve

    f = high_precision_curve(net, digits)
    steps = [decimal.Decimal(repr(float(h))) for h in hs]
    with decimal.localcontext(decimal.Context(prec=digits)):
        d = finite_difference_derivatives(f, steps)
    return InitialDerivatives(float(d[1]), float(d[2]), float(d[3]))
