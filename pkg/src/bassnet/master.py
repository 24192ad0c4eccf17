"""Exact expected adoption from the master equations.

The probability that every node of a set ``S`` is still a nonadopter,
written ``[S](t)``, obeys a linear system that couples ``S`` only to the
sets ``S + {l}`` one element larger::

    d[S]/dt = -a_S [S] + sum_{l not in S} w_l(S) [S + {l}],
    w_l(S) = sum_{i in S} q[l][i],
    a_S    = sum_{i in S} p_i + sum_{l not in S} w_l(S).

The full set decays as ``exp(-sum(p) t)``.  The expected adoption fraction
is ``f = 1 - mean_k [{k}]``.

Two backends solve the general system.  ``ANALYTIC`` substitutes sums of
exponentials from the full set down to singletons.  ``NUMERIC`` integrates
the complements ``1 - [S]`` with an adaptive Runge-Kutta pair.  Circles use
specialised solvers whose state count is polynomial in ``m``.
"""

from __future__ import annotations

import decimal
import enum
from dataclasses import dataclass
from typing import Iterable

import numpy as np
from scipy.linalg import solve_triangular

from . import _ode
from .closedform import f_1d
from .curves import AdoptionCurve, check_grid
from .network import Network, NetworkError, Structure, build_one_sided_circle

__all__ = [
    "Backend",
    "DegenerateExponents",
    "CapExceeded",
    "ExpSumFunction",
    "SubsetProbabilities",
    "solve_general_master",
    "solve_onesided_circle",
    "solve_twosided_circle",
    "convert_two_sided_to_one_sided",
    "solve_block_and_alternating_circles",
    "solve_master",
    "high_precision_curve",
    "DEGENERACY_RTOL",
    "CANCELLATION_LIMIT",
]

DEGENERACY_RTOL = 1e-9
CANCELLATION_LIMIT = 1e6
NUMERIC_CAP = 16
ANALYTIC_CAP = 12
TWO_SIDED_CAP = 100


class DegenerateExponents(ArithmeticError):
    """Two exponents on a dependency chain coincide, or coefficients blow up."""


class CapExceeded(ValueError):
    """The requested network is larger than the solver's state-space cap."""


class Backend(str, enum.Enum):
    ANALYTIC = "analytic"
    NUMERIC = "numeric"
    AUTO = "auto"


# ------------------------------------------------------------- exp sums
@dataclass(frozen=True, eq=False)
class ExpSumFunction:
    """``g(t) = sum_i c_i exp(lambda_i t)`` with every ``lambda_i <= 0``."""

    coefficients: np.ndarray
    exponents: np.ndarray

    def __post_init__(self) -> None:
        c = np.asarray(self.coefficients, dtype=np.float64).ravel()
        lam = np.asarray(self.exponents, dtype=np.float64).ravel()
        if c.shape != lam.shape:
            raise ValueError("coefficients and exponents must have equal length")
        if np.any(lam > 0):
            raise ValueError("exponents must be nonpositive")
        object.__setattr__(self, "coefficients", c)
        object.__setattr__(self, "exponents", lam)

    @property
    def initial_value(self) -> float:
        return float(self.coefficients.sum())

    def __call__(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=np.float64)
        return np.exp(np.multiply.outer(t, self.exponents)) @ self.coefficients

    def drop(self, t) -> np.ndarray:
        """``g(0) - g(t)``, accurate for small ``t``."""
        t = np.asarray(t, dtype=np.float64)
        return -(np.expm1(np.multiply.outer(t, self.exponents)) @ self.coefficients)

    def derivative(self, order: int = 1) -> "ExpSumFunction":
        return ExpSumFunction(self.coefficients * self.exponents ** order, self.exponents)

    def __len__(self) -> int:
        return int(self.coefficients.size)


def _check_cancellation(coef: np.ndarray) -> None:
    if not np.all(np.isfinite(coef)) or np.max(np.abs(coef), initial=0.0) > CANCELLATION_LIMIT:
        raise DegenerateExponents("exponential-sum coefficients exceed the cancellation limit")


def _resonant(a: float, rates: np.ndarray) -> bool:
    scale = np.maximum(np.abs(rates), abs(a))
    return bool(np.any(np.abs(a - rates) <= DEGENERACY_RTOL * scale))


# -------------------------------------------------------- subset tables
def _subset_tables(net: Network):
    """Per-mask ``sum p``, ``a_S`` and the push weights ``w_l(S)``."""
    m = net.m
    n = 1 << m
    masks = np.arange(n, dtype=np.int64)
    bits = ((masks[:, None] >> np.arange(m)) & 1).astype(np.float64)  # (n, m)
    psum = bits @ net.p
    q = net.q_dense()
    w = bits @ q.T  # w[S, l] = sum_{i in S} q[l][i]
    w *= 1.0 - bits  # only l outside S pushes S
    a = psum + w.sum(axis=1)
    return masks, bits, psum, w, a


class SubsetProbabilities:
    """Trajectories ``[S](t)`` of every nonadopter set on a grid.

    Sets are bitmasks with bit ``i`` standing for node ``i``.  Trajectories
    are materialised on demand.

    Examples
    --------
    >>> from bassnet.network import build_complete, MildHetSpec
    >>> net = build_complete(MildHetSpec.homogeneous(2, 0.1, 0.3))
    >>> _, sp = solve_general_master(net, [0.0, 1.0])
    >>> round(float(sp[[0, 1]][1]), 12) == round(float(np.exp(-0.2)), 12)
    True
    """

    def __init__(self, grid: np.ndarray, m: int, *, values: np.ndarray | None = None,
                 functions: dict[int, ExpSumFunction] | None = None) -> None:
        self.grid = grid
        self.m = m
        self._values = values
        self._functions = functions

    @staticmethod
    def mask_of(nodes: int | Iterable[int]) -> int:
        if isinstance(nodes, (int, np.integer)):
            return int(nodes)
        mask = 0
        for i in nodes:
            mask |= 1 << int(i)
        return mask

    def __getitem__(self, nodes: int | Iterable[int]) -> np.ndarray:
        """Trajectory of a set given as a bitmask or an iterable of nodes."""
        mask = self.mask_of(nodes)
        if not 0 < mask < (1 << self.m):
            raise KeyError(mask)
        if self._values is not None:
            return self._values[:, mask]
        g = self._functions[mask]
        return 1.0 - g.drop(self.grid)

    def function(self, nodes) -> ExpSumFunction:
        """Exponential-sum form of ``[S]`` (analytic backend only)."""
        if self._functions is None:
            raise LookupError("numeric solutions carry no exponential sums")
        return self._functions[self.mask_of(nodes)]

    def to_array(self) -> np.ndarray:
        """Array shaped ``(len(grid), 2**m)``; column 0 (empty set) is 1."""
        if self._values is not None:
            return self._values.copy()
        out = np.ones((self.grid.size, 1 << self.m))
        for mask in range(1, 1 << self.m):
            out[:, mask] = self[mask]
        return out

    @property
    def backend(self) -> Backend:
        return Backend.NUMERIC if self._values is not None else Backend.ANALYTIC


def _analytic_functions(net: Network) -> dict[int, ExpSumFunction]:
    m = net.m
    masks, bits, psum, w, a = _subset_tables(net)
    size = bits.sum(axis=1).astype(np.int64)
    full = (1 << m) - 1
    # rates r_i >= 0 with [S](t) = sum c_i exp(-r_i t)
    rates: dict[int, np.ndarray] = {full: np.array([a[full]])}
    coefs: dict[int, np.ndarray] = {full: np.array([1.0])}
    for mask in masks[np.argsort(-size, kind="stable")]:
        mask = int(mask)
        if mask in (0, full):
            continue
        rs, cs = [], []
        for l in np.flatnonzero(w[mask] > 0):
            sup = mask | (1 << int(l))
            rs.append(rates[sup])
            cs.append(w[mask, l] * coefs[sup])
        a_s = a[mask]
        if not rs:
            rates[mask], coefs[mask] = np.array([a_s]), np.array([1.0])
            continue
        r_all = np.concatenate(rs)
        uniq, inv = np.unique(r_all, return_inverse=True)
        forcing = np.bincount(inv, weights=np.concatenate(cs), minlength=uniq.size)
        if _resonant(a_s, uniq):
            raise DegenerateExponents(f"resonant exponent at subset {mask:#x}")
        part = forcing / (a_s - uniq)
        c = np.concatenate([[1.0 - part.sum()], part])
        _check_cancellation(c)
        rates[mask] = np.concatenate([[a_s], uniq])
        coefs[mask] = c
    return {k: ExpSumFunction(coefs[k], -rates[k]) for k in rates}


def high_precision_curve(net: Network, digits: int = 50):
    """Analytic ``f(t)`` evaluated in ``digits``-digit decimal arithmetic.

    Runs the same backward substitution as the analytic backend with
    :mod:`decimal` numbers, starting from the exact binary values of the
    rates.  Meant for finite differences at very small ``t``, where double
    precision coefficients lose too many digits to cancellation.

    Returns
    -------
    callable
        Maps a sequence of times (floats or Decimals) to a list of Decimals.
    """
    if net.m > ANALYTIC_CAP:
        raise CapExceeded(f"m={net.m} exceeds the analytic cap of {ANALYTIC_CAP}")
    ctx = decimal.Context(prec=digits)
    D = ctx.create_decimal_from_float
    m = net.m
    p = [D(float(x)) for x in net.p]
    qd = net.q_dense()
    q = [[D(float(qd[i, j])) for j in range(m)] for i in range(m)]
    full = (1 << m) - 1
    tol = D(DEGENERACY_RTOL)
    terms: dict[int, dict[decimal.Decimal, decimal.Decimal]] = {}
    for mask in sorted(range(1, full + 1), key=lambda s: -bin(s).count("1")):
        members = [i for i in range(m) if mask >> i & 1]
        psum = sum((p[i] for i in members), D(0))
        pushes = []
        for l in range(m):
            if mask >> l & 1:
                continue
            w = sum((q[l][i] for i in members), D(0))
            if w != 0:
                pushes.append((l, w))
        a = ctx.add(psum, sum((w for _, w in pushes), D(0)))
        if mask == full or not pushes:
            terms[mask] = {a: D(1)}
            continue
        forcing: dict[decimal.Decimal, decimal.Decimal] = {}
        for l, w in pushes:
            for r, c in terms[mask | (1 << l)].items():
                forcing[r] = ctx.add(forcing.get(r, D(0)), ctx.multiply(w, c))
        out = {}
        for r, c in forcing.items():
            gap = ctx.subtract(a, r)
            if abs(gap) <= tol * max(abs(a), abs(r)):
                raise DegenerateExponents(f"resonant exponent at subset {mask:#x}")
            out[r] = ctx.divide(c, gap)
        out[a] = ctx.subtract(D(1), sum(out.values(), D(0)))
        terms[mask] = out
    merged: dict[decimal.Decimal, decimal.Decimal] = {}
    for k in range(m):
        for r, c in terms[1 << k].items():
            merged[r] = ctx.add(merged.get(r, D(0)), c)
    inv_m = ctx.divide(D(1), D(m))

    def f(times):
        vals = []
        for t in times:
            t = t if isinstance(t, decimal.Decimal) else D(float(t))
            acc = D(0)
            for r, c in merged.items():
                acc = ctx.add(acc, ctx.multiply(c, ctx.subtract(D(1), ctx.exp(-r * t))))
            vals.append(ctx.multiply(acc, inv_m))
        return vals

    return f


def _numeric_values(net: Network, grid: np.ndarray) -> np.ndarray:
    m = net.m
    masks, bits, psum, w, a = _subset_tables(net)
    sup = [masks | (1 << l) for l in range(m)]
    wl = [np.ascontiguousarray(w[:, l]) for l in range(m)]

    def rhs(t, c):
        dc = psum - a * c
        for l in range(m):
            dc += wl[l] * c[sup[l]]
        return dc

    comp = _ode.integrate(rhs, np.zeros(masks.size), grid)
    return 1.0 - comp


def _curve_from_singletons(grid, singles: np.ndarray, exact_drop: np.ndarray | None = None):
    f = exact_drop if exact_drop is not None else 1.0 - singles.mean(axis=1)
    return AdoptionCurve(grid, f)


def solve_general_master(
    net: Network,
    grid,
    backend: Backend | str = Backend.AUTO,
    *,
    cap: int | None = None,
) -> tuple[AdoptionCurve, SubsetProbabilities]:
    """Solve the full ``2**m - 1`` state master system.

    Parameters
    ----------
    net : Network
        Any network.
    grid : array_like
        Time grid starting at 0.
    backend : {"analytic", "numeric", "auto"}
        ``auto`` tries the analytic backend and falls back to the numeric one
        on :class:`DegenerateExponents` or when ``m`` exceeds the analytic cap.
    cap : int, optional
        Largest admissible ``m`` (default 12 analytic, 16 numeric).

    Returns
    -------
    AdoptionCurve, SubsetProbabilities

    Raises
    ------
    CapExceeded
    DegenerateExponents
        Only with ``backend="analytic"``.
    """
    grid = check_grid(grid)
    backend = Backend(backend)
    m = net.m
    if backend is Backend.AUTO:
        if m <= (cap or ANALYTIC_CAP):
            try:
                return solve_general_master(net, grid, Backend.ANALYTIC, cap=cap)
            except DegenerateExponents:
                pass
        return solve_general_master(net, grid, Backend.NUMERIC, cap=cap)
    limit = cap or (ANALYTIC_CAP if backend is Backend.ANALYTIC else NUMERIC_CAP)
    if m > limit:
        raise CapExceeded(f"m={m} exceeds the {backend.value} cap of {limit}")
    if backend is Backend.ANALYTIC:
        funcs = _analytic_functions(net)
        rs = np.concatenate([-funcs[1 << k].exponents for k in range(m)])
        cs = np.concatenate([funcs[1 << k].coefficients for k in range(m)]) / m
        f = ExpSumFunction(cs, -rs).drop(grid)
        return AdoptionCurve(grid, f), SubsetProbabilities(grid, m, functions=funcs)
    values = _numeric_values(net, grid)
    singles = values[:, [1 << k for k in range(m)]]
    f = (1.0 - singles).mean(axis=1)
    return AdoptionCurve(grid, f), SubsetProbabilities(grid, m, values=values)


# -------------------------------------------------------------- circles
def _chain_eigen_solution(r: np.ndarray, e: np.ndarray) -> ExpSumFunction:
    """First component of ``y' = A y``, ``y(0) = 1`` for bidiagonal ``A``.

    ``A`` has diagonal ``-r`` and superdiagonal ``e``.  The eigenvector of
    eigenvalue ``-r_k`` has ``v_k(k) = 1`` and
    ``v_k(n) = e_n v_k(n+1) / (r_n - r_k)`` for ``n < k``; the weights ``c``
    solve ``sum_k c_k v_k = 1``.
    """
    M = r.size
    rs = np.sort(r)
    if np.any(np.diff(rs) <= DEGENERACY_RTOL * np.abs(rs[1:])):
        raise DegenerateExponents("repeated eigenvalue on a circle chain")
    diff = r[:, None] - r[None, :]
    V = np.eye(M)
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(1, M):
            ratio = e[:k] / diff[:k, k]
            V[:k, k] = np.cumprod(ratio[::-1])[::-1]
        if not np.all(np.isfinite(V)):
            raise DegenerateExponents("eigenvector overflow")
        c = solve_triangular(V, np.ones(M), lower=False, unit_diagonal=True)
    coef = c * V[0]
    _check_cancellation(coef)
    _check_cancellation(c)
    return ExpSumFunction(coef, -r)


def _onesided_chain(p: np.ndarray, q_in: np.ndarray, j: int) -> tuple[np.ndarray, np.ndarray]:
    """Rates and couplings of the chain ``{j-k+1, ..., j}``, ``k = 1..M``."""
    M = p.size
    start = (j - np.arange(M)) % M  # leftmost node of the length-(k+1) arc
    psum = np.cumsum(p[start])
    r = psum + q_in[start]
    r[-1] = psum[-1]
    return r, q_in[start[:-1]]


def _arc_rates(p: np.ndarray):
    """``P[L-1, s]`` = sum of ``p`` over the arc of length ``L`` starting at ``s``."""
    M = p.size
    ext = np.concatenate([[0.0], np.cumsum(np.concatenate([p, p]))])
    s = np.arange(M)
    L = np.arange(1, M)[:, None]
    return ext[s[None, :] + L] - ext[s[None, :]]


def _arc_system(p: np.ndarray, ql: np.ndarray, qr: np.ndarray, grid: np.ndarray) -> np.ndarray:
    """Solve for every arc probability and return ``[{j}](t)`` per node.

    The probability that the arc ``s, s+1, ..., s+L-1`` consists only of
    nonadopters couples to the arcs one node longer on either side.
    ``ql[s]`` is the push from ``s-1`` into ``s`` and ``qr[e]`` the push
    from ``e+1`` into ``e``.  For a one-sided circle ``qr`` is zero.
    """
    M = p.size
    P = _arc_rates(p)  # (M-1, M)
    ends = (np.arange(M)[None, :] + np.arange(M - 1)[:, None]) % M
    QL = np.broadcast_to(ql, (M - 1, M))
    QR = qr[ends]
    rate = P + QL + QR
    ptot = float(p.sum())
    n = (M - 1) * M

    # Scaled form Z = exp(rate t) [arc]: the Jacobian becomes nilpotent, so
    # the step size no longer shrinks with the fast decay of long arcs.
    rate_sup = np.vstack([np.roll(rate[1:], 1, axis=1), np.full((1, M), ptot)])
    rate_sup_r = np.vstack([rate[1:], np.full((1, M), ptot)])
    dl = rate - rate_sup
    dr = rate - rate_sup_r
    if max(dl.max(), dr.max()) * grid[-1] < 600.0:
        def rhs_z(t, z):
            zz = z.reshape(M - 1, M)
            out = np.empty_like(zz)
            left = np.vstack([np.roll(zz[1:], 1, axis=1), np.ones((1, M))])
            right = np.vstack([zz[1:], np.ones((1, M))])
            out[:] = QL * np.exp(dl * t) * left + QR * np.exp(dr * t) * right
            return out.ravel()

        z = _ode.integrate(rhs_z, np.ones(n), grid)
        return np.exp(-np.multiply.outer(grid, rate[0])) * z[:, :M]

    def rhs(t, y):
        c = y[:n].reshape(M - 1, M)
        full = y[n]
        dc = P - rate * c
        # longer arcs: (s-1, L+1) on the left, (s, L+1) on the right
        dc[:-1] += QL[:-1] * np.roll(c[1:], 1, axis=1) + QR[:-1] * c[1:]
        dc[-1] += (QL[-1] + QR[-1]) * full
        out = np.empty_like(y)
        out[:n] = dc.ravel()
        out[n] = ptot * (1.0 - full)
        return out

    comp = _ode.integrate(rhs, np.zeros(n + 1), grid)
    return 1.0 - comp[:, :M]


def _require(net: Network, tag: Structure) -> None:
    if net.structure is not tag:
        raise NetworkError(f"expected a {tag.value} network, got {net.structure.value}")


def _circle_neighbour_rates(net: Network) -> tuple[np.ndarray, np.ndarray]:
    m = net.m
    q = net.q_dense()
    j = np.arange(m)
    return q[(j - 1) % m, j], q[(j + 1) % m, j]


def solve_onesided_circle(net: Network, grid) -> AdoptionCurve:
    """Expected adoption on a one-sided circle.

    Each node's survival ``[{j}](t)`` is the first component of an
    ``m``-state bidiagonal chain, solved through its eigen-decomposition.
    Chains with repeated or nearly cancelling eigenvalues are solved
    numerically instead.
    """
    _require(net, Structure.ONE_SIDED_CIRCLE)
    grid = check_grid(grid)
    m = net.m
    p = np.asarray(net.p)
    q_in, _ = _circle_neighbour_rates(net)
    drops = np.empty((grid.size, m))
    failed = []
    for j in range(m):
        try:
            g = _chain_eigen_solution(*_onesided_chain(p, q_in, j))
        except DegenerateExponents:
            failed.append(j)
            continue
        drops[:, j] = g.drop(grid)
    if failed:
        singles = _arc_system(p, q_in, np.zeros(m), grid)
        drops[:, failed] = 1.0 - singles[:, failed]
    return AdoptionCurve(grid, drops.mean(axis=1))


def solve_twosided_circle(net: Network, grid, *, cap: int = TWO_SIDED_CAP) -> AdoptionCurve:
    """Expected adoption on a two-sided circle.

    No general closed form exists, so the nonadopter-arc system is
    integrated numerically.  Every state of the per-node systems is an arc
    of consecutive nonadopters, so one shared system of ``m(m-1) + 1`` arcs
    serves all nodes at once.
    """
    _require(net, Structure.TWO_SIDED_CIRCLE)
    if net.m > cap:
        raise CapExceeded(f"m={net.m} exceeds the two-sided cap of {cap}")
    grid = check_grid(grid)
    ql, qr = _circle_neighbour_rates(net)
    singles = _arc_system(np.asarray(net.p), ql, qr, grid)
    return AdoptionCurve(grid, (1.0 - singles).mean(axis=1))


def convert_two_sided_to_one_sided(net: Network) -> Network:
    """One-sided circle whose node ``j`` receives ``q_left[j] + q_right[j]``."""
    _require(net, Structure.TWO_SIDED_CIRCLE)
    return build_one_sided_circle(net.p, net.in_influence,
                                  allow_uninfluenced=net.allow_uninfluenced)


def solve_block_and_alternating_circles(
    t_grid, p1: float, p2: float, q: float
) -> tuple[AdoptionCurve, AdoptionCurve]:
    """Large-circle limits for two placements of the same two node types.

    Curve A places the ``p1`` nodes in one half of the circle and the
    ``p2`` nodes in the other; curve B alternates them.

    Returns
    -------
    (AdoptionCurve, AdoptionCurve)
        Curves A and B.
    """
    if min(p1, p2, q) <= 0:
        raise ValueError("rates must be positive")
    grid = check_grid(t_grid)
    f_a = 0.5 * (f_1d(grid, p1, q) + f_1d(grid, p2, q))

    def rhs(t, y):
        return np.array([q * np.exp(-p1 * t) * y[1], q * np.exp(-p2 * t) * y[0]])

    uv = _ode.integrate(rhs, np.ones(2), grid, atol=1e-10, rtol=1e-10)
    u, v = uv[:, 0], uv[:, 1]
    # 1 - f_B = e^{-qt} (e^{-p2 t} U + e^{-p1 t} V) / 2, written as a drop
    # from 1 so that small t keeps full relative precision
    su = np.exp(-(q + p2) * grid) * u
    sv = np.exp(-(q + p1) * grid) * v
    f_b = 1.0 - 0.5 * (su + sv)
    return AdoptionCurve(grid, f_a), AdoptionCurve(grid, f_b)


def solve_master(net: Network, grid, backend: Backend | str = Backend.AUTO) -> AdoptionCurve:
    """Dispatch on the structure tag to the cheapest exact solver."""
    if net.structure is Structure.ONE_SIDED_CIRCLE:
        return solve_onesided_circle(net, grid)
    if net.structure is Structure.TWO_SIDED_CIRCLE:
        return solve_twosided_circle(net, grid)
    return solve_general_master(net, grid, backend)[0]
