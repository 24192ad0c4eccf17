"""Partial orders, inter-adoption-time CDFs and dominance verdicts."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .curves import AdoptionCurve, CdfCurve, CdfSource, check_grid
from .network import Network

__all__ = [
    "Relation",
    "VerdictKind",
    "Crossing",
    "DominanceVerdict",
    "nodewise_edgewise_compare",
    "bruteforce_interadoption_cdfs",
    "first_adopter_weights",
    "check_cdf_dominance",
    "compare_adoption_curves",
    "BRUTEFORCE_CAP",
]

BRUTEFORCE_CAP = 8


class Relation(str, enum.Enum):
    """Node-wise and edge-wise order between networks ``A`` and ``B``.

    ``A_PRECEQ_B`` means every rate of ``A`` is at most the matching rate
    of ``B``.  :func:`nodewise_edgewise_compare` reports the strongest
    relation that holds, so it returns ``EQUAL`` or ``A_PREC_B`` rather
    than ``A_PRECEQ_B``; use :attr:`a_preceq_b` for the weak order.
    """

    EQUAL = "Equal"
    A_PRECEQ_B = "A<=B"
    A_PREC_B = "A<B"
    B_PRECEQ_A = "B<=A"
    B_PREC_A = "B<A"
    INCOMPARABLE = "Incomparable"

    @property
    def a_preceq_b(self) -> bool:
        return self in (Relation.EQUAL, Relation.A_PRECEQ_B, Relation.A_PREC_B)

    @property
    def b_preceq_a(self) -> bool:
        return self in (Relation.EQUAL, Relation.B_PRECEQ_A, Relation.B_PREC_A)


class VerdictKind(str, enum.Enum):
    FIRST_BELOW = "FirstBelow"
    EQUAL = "Equal"
    SECOND_BELOW = "SecondBelow"
    CROSSING = "Crossing"


@dataclass(frozen=True)
class Crossing:
    """Sign change of ``first - second`` between grid points ``lo`` and ``hi``.

    ``k`` is the inter-adoption index for CDF verdicts and ``None`` for
    adoption curves.  ``rising`` is True when the difference goes from
    negative to positive.
    """

    lo: float
    hi: float
    rising: bool
    k: int | None = None


@dataclass(frozen=True)
class DominanceVerdict:
    """Outcome of a pointwise comparison of ``first`` against ``second``.

    Attributes
    ----------
    kind : VerdictKind
    tol : float
        Tolerance under which differences count as ties.
    crossings : tuple of Crossing
        Bracketing grid intervals of every sign change.
    max_gap : float
        Largest ``|first - second|`` over the grid.
    strict_steps : tuple of int
        For CDF verdicts, the indices ``k`` whose CDFs differ beyond the
        margin somewhere.
    independence_assumed : bool
        CDF dominance implies ordered adoption curves only for independent
        inter-adoption times, which holds on complete networks.
    """

    kind: VerdictKind
    tol: float
    crossings: tuple[Crossing, ...] = ()
    max_gap: float = 0.0
    strict_steps: tuple[int, ...] = ()
    independence_assumed: bool = True
    notes: tuple[str, ...] = field(default=())

    @property
    def n_sign_changes(self) -> int:
        return len(self.crossings)


# ------------------------------------------------------------ partial order
def nodewise_edgewise_compare(a: Network, b: Network) -> Relation:
    """Compare every ``p_j`` and every ``q[i][j]`` of two networks.

    Examples
    --------
    >>> from bassnet.network import build_complete, MildHetSpec
    >>> a = build_complete(MildHetSpec.homogeneous(3, 0.1, 0.4))
    >>> b = build_complete(MildHetSpec([0.1, 0.2, 0.1], [0.4, 0.4, 0.4]))
    >>> nodewise_edgewise_compare(a, b).value
    'A<B'
    """
    if a.m != b.m:
        raise ValueError("networks must have the same number of nodes")
    da = np.concatenate([a.p, a.q_dense().ravel()])
    db = np.concatenate([b.p, b.q_dense().ravel()])
    below = np.any(da < db)
    above = np.any(da > db)
    if below and above:
        return Relation.INCOMPARABLE
    if below:
        return Relation.A_PREC_B
    if above:
        return Relation.B_PREC_A
    return Relation.EQUAL


# --------------------------------------------------------- brute force CDFs
def first_adopter_weights(net: Network) -> np.ndarray:
    """Probability ``p_k / sum(p)`` that node ``k`` adopts first."""
    p = np.asarray(net.p)
    total = p.sum()
    if total <= 0:
        raise ValueError("no node can adopt first when every p_j is zero")
    return p / total


def _adopter_set_weights(net: Network):
    """Probability of reaching each adopter set and its total exit rate."""
    m = net.m
    n = 1 << m
    masks = np.arange(n, dtype=np.int64)
    bits = ((masks[:, None] >> np.arange(m)) & 1).astype(np.float64)
    # hazard of node j given adopted set S: p_j + sum_{k in S} q[k][j]
    lam = net.p[None, :] + bits @ net.q_dense()
    lam *= 1.0 - bits
    total = lam.sum(axis=1)
    prob = np.zeros(n)
    prob[0] = 1.0
    size = bits.sum(axis=1).astype(np.int64)
    for s in np.argsort(size, kind="stable"):
        if prob[s] == 0.0 or total[s] <= 0.0:
            continue
        for j in np.flatnonzero(lam[s] > 0):
            prob[s | (1 << int(j))] += prob[s] * lam[s, j] / total[s]
    return prob, total, size


def bruteforce_interadoption_cdfs(net: Network, tau_grid, *,
                                  cap: int = BRUTEFORCE_CAP) -> list[CdfCurve]:
    """Exact CDFs of the inter-adoption times ``t_1, ..., t_m``.

    Given the adopter set ``S`` reached after ``k - 1`` adoptions, the next
    gap is exponential with the total hazard ``Lambda(S)``.  The CDF of
    ``t_k`` is therefore a mixture over the sets of size ``k - 1``, weighted
    by the probability of reaching them.  Sets with ``Lambda = 0`` are
    absorbing and contribute no mass, so such CDFs stay below 1.

    Returns
    -------
    list of CdfCurve
        Entry ``k - 1`` is the CDF of ``t_k``.
    """
    if net.m > cap:
        raise ValueError(f"m={net.m} exceeds the brute-force cap of {cap}")
    tau = check_grid(tau_grid, start_at_zero=False)
    prob, total, size = _adopter_set_weights(net)
    rise = -np.expm1(-np.multiply.outer(total, tau))  # (2^m, n_tau)
    curves = []
    for k in range(1, net.m + 1):
        sel = size == k - 1
        curves.append(CdfCurve(tau, prob[sel] @ rise[sel], CdfSource.BRUTEFORCE))
    return curves


# ----------------------------------------------------------------- verdicts
def _margin(a: CdfCurve, b: CdfCurve, tol: float) -> np.ndarray:
    """Per-point tie margin: ``tol``, widened to 3 binomial SE for samples."""
    var = np.zeros_like(a.values)
    for c in (a, b):
        if c.source is CdfSource.EMPIRICAL and c.n_samples:
            var = var + c.values * (1.0 - c.values) / c.n_samples
    return np.maximum(tol, 3.0 * np.sqrt(var))


def _crossings(x: np.ndarray, diff: np.ndarray, margin, k: int | None) -> list[Crossing]:
    sign = np.where(diff > margin, 1, np.where(diff < -margin, -1, 0))
    idx = np.flatnonzero(sign)
    out = []
    for i0, i1 in zip(idx[:-1], idx[1:]):
        if sign[i0] != sign[i1]:
            out.append(Crossing(float(x[i0]), float(x[i1]), bool(sign[i1] > 0), k))
    return out


def _classify(diffs, margins) -> VerdictKind:
    below = any(np.any(d < -m) for d, m in zip(diffs, margins))
    above = any(np.any(d > m) for d, m in zip(diffs, margins))
    if below and above:
        return VerdictKind.CROSSING
    if below:
        return VerdictKind.FIRST_BELOW
    if above:
        return VerdictKind.SECOND_BELOW
    return VerdictKind.EQUAL


def check_cdf_dominance(a_cdfs: Sequence[CdfCurve], b_cdfs: Sequence[CdfCurve],
                        tol: float = 1e-12, *, independent: bool = True) -> DominanceVerdict:
    """Test ``F_k^A <= F_k^B`` for every ``k`` and grid point.

    ``FIRST_BELOW`` means A's inter-adoption times are stochastically
    larger: every CDF of A lies on or below B's and at least one is strictly
    below somewhere.  Empirical curves get a 3 binomial SE margin.

    Parameters
    ----------
    a_cdfs, b_cdfs : sequences of CdfCurve
        CDFs of ``t_1, ..., t_m`` on a common grid.
    tol : float
        Tie tolerance for exact curves.
    independent : bool
        Whether the caller knows the inter-adoption times are independent.
    """
    if len(a_cdfs) != len(b_cdfs):
        raise ValueError("CDF lists must have equal length")
    diffs, margins, crossings, strict = [], [], [], []
    for k, (ca, cb) in enumerate(zip(a_cdfs, b_cdfs), start=1):
        if ca.tau.shape != cb.tau.shape or not np.array_equal(ca.tau, cb.tau):
            raise ValueError("CDF grids differ")
        d = ca.values - cb.values
        mg = _margin(ca, cb, tol)
        diffs.append(d)
        margins.append(mg)
        crossings.extend(_crossings(ca.tau, d, mg, k))
        if np.any(np.abs(d) > mg):
            strict.append(k)
    kind = _classify(diffs, margins)
    gap = max((float(np.max(np.abs(d))) for d in diffs), default=0.0)
    notes = () if independent else ("inter-adoption times may be dependent",)
    return DominanceVerdict(kind, tol, tuple(crossings), gap, tuple(strict), independent, notes)


def compare_adoption_curves(fa: AdoptionCurve, fb: AdoptionCurve,
                            tol: float = 1e-12) -> DominanceVerdict:
    """Pointwise comparison of two adoption curves on the same grid.

    ``FIRST_BELOW`` means ``fa <= fb`` everywhere with a strict gap
    somewhere.  Sign changes of ``fa - fb`` are reported as bracketing grid
    intervals; differences within the tie margin never start a crossing.
    The margin is ``tol``, widened to 3 combined standard errors where
    either curve is a Monte Carlo estimate.
    """
    if fa.grid.shape != fb.grid.shape or not np.array_equal(fa.grid, fb.grid):
        raise ValueError("curves must share a grid")
    d = fa.f - fb.f
    var = np.zeros_like(d)
    for c in (fa, fb):
        if c.standard_error is not None:
            var = var + c.standard_error ** 2
    margin = np.maximum(tol, 3.0 * np.sqrt(var))
    kind = _classify([d], [margin])
    crossings = tuple(_crossings(fa.grid, d, margin, None))
    return DominanceVerdict(kind, tol, crossings, float(np.max(np.abs(d))))
