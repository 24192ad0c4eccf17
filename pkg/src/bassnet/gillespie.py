"""Exact event-driven Monte Carlo for the discrete Bass model.

Between adoptions every nonadopter ``j`` has the constant hazard
``p_j + sum_{adopted k} q[k][j]``, so realizations are sampled exactly by
the Gillespie direct method.

Two exact samplers are available.  The default ``threshold`` scheme
gives every node an ``Exp(1)`` threshold on its integrated hazard, which
couples runs that share a seed node by node.  The ``direct`` scheme draws
the waiting time and the adopter from the total rate.

Random numbers come from a counter-based SplitMix64 stream keyed by
``(seed, realization index)``.  Realization ``r`` is therefore the same
regardless of how realizations are scheduled over threads, and all
Monte Carlo reductions are done in integer arithmetic in realization
order, which makes estimates bitwise reproducible.
"""

from __future__ import annotations

import os
import warnings
from dataclasses import dataclass

import numba
import numpy as np
from numba import njit, prange

from .curves import AdoptionCurve, CdfCurve, CdfSource, check_grid
from .network import Network

# numba falls back to another threading layer by itself; the notice is noise
warnings.filterwarnings("ignore", message="The TBB threading layer", category=numba.NumbaWarning)

__all__ = [
    "RealizationRecord",
    "EmpiricalCdfSet",
    "simulate_realization",
    "estimate_adoption_curve",
    "estimate_interadoption_cdfs",
    "set_threads",
]

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_KAHAN_MIN_M = 10_000
_BLOCK = 256


def set_threads(n: int | None = None) -> int:
    """Set the number of simulation threads.

    Defaults to the ``BASSNET_THREADS`` environment variable.  Results do
    not depend on this setting.
    """
    if n is None:
        env = os.environ.get("BASSNET_THREADS")
        if not env:
            return numba.get_num_threads()
        n = int(env)
    n = max(1, min(int(n), numba.config.NUMBA_NUM_THREADS))
    numba.set_num_threads(n)
    return n


# ------------------------------------------------------------------- RNG
@njit(cache=True, inline="always")
def _mix(z):
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


@njit(cache=True, inline="always")
def _stream_key(seed, index):
    return _mix(_mix(seed ^ _GOLDEN) + (index + np.uint64(1)) * _GOLDEN)


@njit(cache=True, inline="always")
def _uniform(key, counter):
    """Uniform draw in (0, 1] from position ``counter`` of a stream."""
    x = _mix(key + (counter + np.uint64(1)) * _GOLDEN)
    return (np.float64(x >> np.uint64(11)) + 1.0) * (1.0 / 9007199254740992.0)


# ---------------------------------------------------------------- kernel
DIRECT = 0
THRESHOLD = 1


@njit(cache=True)
def _remove_and_record(node, chosen, pending, n_pending, adopted, lam, t, k, times, ids,
                       out_ptr, out_dst, out_rate):
    pending[chosen] = pending[n_pending - 1]
    adopted[node] = True
    times[k] = t
    ids[k] = node
    for e in range(out_ptr[node], out_ptr[node + 1]):
        j = out_dst[e]
        if not adopted[j]:
            lam[j] += out_rate[e]


@njit(cache=True)
def _simulate_one(p, out_ptr, out_dst, out_rate, horizon, key, method, times, ids):
    """Fill ``times``/``ids`` and return ``(K, truncated)``.

    ``DIRECT`` draws the waiting time from ``Exp(Lambda)`` and the adopter
    with probability ``lambda_j / Lambda``.  ``THRESHOLD`` gives each node
    an ``Exp(1)`` threshold on its integrated hazard; the next adopter is
    the node that exhausts its threshold first.  Both sample the same
    process exactly.  The threshold form couples runs with common random
    numbers node by node, so realizations change smoothly with the rates.
    """
    m = p.shape[0]
    lam = p.copy()
    adopted = np.zeros(m, dtype=np.bool_)
    pending = np.arange(m)
    n_pending = m
    t = 0.0
    k = 0
    if method == THRESHOLD:
        rem = np.empty(m)
        for j in range(m):
            rem[j] = -np.log(_uniform(key, np.uint64(j)))
        while n_pending > 0:
            best = np.inf
            chosen = -1
            for ii in range(n_pending):
                j = pending[ii]
                if lam[j] > 0.0:
                    w = rem[j] / lam[j]
                    if w < best:
                        best = w
                        chosen = ii
            if chosen < 0:
                return k, True
            if t + best > horizon:
                return k, True
            t += best
            for ii in range(n_pending):
                j = pending[ii]
                rem[j] = max(rem[j] - lam[j] * best, 0.0)
            node = pending[chosen]
            _remove_and_record(node, chosen, pending, n_pending, adopted, lam, t, k,
                               times, ids, out_ptr, out_dst, out_rate)
            n_pending -= 1
            k += 1
        return k, False

    kahan = m >= _KAHAN_MIN_M
    counter = np.uint64(0)
    while n_pending > 0:
        total = 0.0
        comp = 0.0
        for ii in range(n_pending):
            v = lam[pending[ii]]
            if kahan:
                y = v - comp
                s = total + y
                comp = (s - total) - y
                total = s
            else:
                total += v
        if total <= 0.0:
            return k, True
        u = _uniform(key, counter)
        counter += np.uint64(1)
        t += -np.log(u) / total
        if t > horizon:
            return k, True
        target = _uniform(key, counter) * total
        counter += np.uint64(1)
        acc = 0.0
        chosen = -1
        last_pos = -1
        for ii in range(n_pending):
            v = lam[pending[ii]]
            if v > 0.0:
                last_pos = ii
                acc += v
                if acc >= target:
                    chosen = ii
                    break
        if chosen < 0:
            chosen = last_pos  # rounding left target just above the sum
        node = pending[chosen]
        _remove_and_record(node, chosen, pending, n_pending, adopted, lam, t, k,
                           times, ids, out_ptr, out_dst, out_rate)
        n_pending -= 1
        k += 1
    return k, False


@njit(cache=True, parallel=True)
def _simulate_block(p, out_ptr, out_dst, out_rate, horizon, seed, first, count, method,
                    times, ids, n_events, truncated):
    for b in prange(count):
        key = _stream_key(seed, np.uint64(first + b))
        k, tr = _simulate_one(p, out_ptr, out_dst, out_rate, horizon, key, method,
                              times[b], ids[b])
        n_events[b] = k
        truncated[b] = tr


@njit(cache=True)
def _accumulate_counts(times, n_events, count, grid, s1, s2):
    for b in range(count):
        k = n_events[b]
        row = times[b]
        idx = 0
        for g in range(grid.shape[0]):
            while idx < k and row[idx] <= grid[g]:
                idx += 1
            s1[g] += idx
            s2[g] += idx * idx


@njit(cache=True)
def _accumulate_cdfs(times, n_events, count, tau, hist, reached):
    """Histogram of inter-adoption gaps per step ``k`` over ``tau`` bins."""
    nt = tau.shape[0]
    for b in range(count):
        prev = 0.0
        for k in range(n_events[b]):
            gap = times[b, k] - prev
            prev = times[b, k]
            reached[k] += 1
            # first grid index with tau >= gap; gaps beyond the grid are
            # counted as reached but never enter the histogram
            lo = 0
            hi = nt
            while lo < hi:
                mid = (lo + hi) // 2
                if tau[mid] < gap:
                    lo = mid + 1
                else:
                    hi = mid
            if lo < nt:
                hist[k, lo] += 1


def _net_arrays(net: Network):
    ptr, dst, rate = net.out_csr
    return (np.ascontiguousarray(net.p), np.ascontiguousarray(ptr),
            np.ascontiguousarray(dst), np.ascontiguousarray(rate))


def _seed64(seed: int) -> np.uint64:
    if seed < 0 or seed >= 2 ** 64:
        raise ValueError("seed must be a 64-bit unsigned integer")
    return np.uint64(seed)


def _method_code(method: str) -> int:
    try:
        return {"threshold": THRESHOLD, "direct": DIRECT}[method]
    except KeyError:
        raise ValueError(f"unknown sampling method {method!r}") from None


def _blocks(net: Network, n: int, seed: int, horizon: float, method: str):
    """Yield ``(count, times, n_events, truncated)`` per block of realizations."""
    arrays = _net_arrays(net)
    m = net.m
    size = min(_BLOCK, n)
    times = np.empty((size, m))
    ids = np.empty((size, m), dtype=np.int64)
    n_events = np.empty(size, dtype=np.int64)
    trunc = np.empty(size, dtype=np.bool_)
    s = _seed64(seed)
    code = _method_code(method)
    for first in range(0, n, size):
        count = min(size, n - first)
        _simulate_block(*arrays, float(horizon), s, first, count, code, times, ids, n_events,
                        trunc)
        yield count, times, ids, n_events, trunc


# ---------------------------------------------------------------- public
@dataclass(frozen=True, eq=False)
class RealizationRecord:
    """One sampled trajectory.

    Attributes
    ----------
    adoption_times : ndarray
        Nondecreasing event times ``T_1 <= ... <= T_K``.
    adopter_ids : ndarray of int
        Node adopting at each event.
    truncated : bool
        True when the run stopped before everyone adopted, either because
        the total rate vanished or the horizon was reached.
    """

    adoption_times: np.ndarray
    adopter_ids: np.ndarray
    truncated: bool

    @property
    def interadoption_times(self) -> np.ndarray:
        """Gaps ``t_k = T_k - T_{k-1}`` with ``T_0 = 0``."""
        return np.diff(self.adoption_times, prepend=0.0)


@dataclass(frozen=True, eq=False)
class EmpiricalCdfSet:
    """Empirical CDFs of the inter-adoption times ``t_1, ..., t_m``.

    ``curves[k - 1]`` estimates the CDF of ``t_k`` from the
    ``sample_counts[k - 1]`` realizations that reached adoption ``k``.
    """

    tau_grid: np.ndarray
    curves: np.ndarray
    sample_counts: np.ndarray
    n_realizations: int

    def curve(self, k: int) -> CdfCurve:
        """CDF of ``t_k`` (1-based ``k``) as a :class:`CdfCurve`."""
        return CdfCurve(self.tau_grid, self.curves[k - 1], CdfSource.EMPIRICAL,
                        int(self.sample_counts[k - 1]))


def simulate_realization(net: Network, seed: int, horizon: float | None = None,
                         *, index: int = 0, method: str = "threshold") -> RealizationRecord:
    """Sample one trajectory.

    Parameters
    ----------
    net : Network
    seed : int
        64-bit seed.
    horizon : float, optional
        Stop once the next event would come after this time.
    index : int
        Realization index within the seed's family of streams.
        :func:`estimate_adoption_curve` uses indices ``0 .. n-1``.
    method : {"threshold", "direct"}
        Exact sampling scheme, see the module notes.
    """
    p, ptr, dst, rate = _net_arrays(net)
    m = net.m
    times = np.empty((1, m))
    ids = np.empty((1, m), dtype=np.int64)
    n_events = np.empty(1, dtype=np.int64)
    trunc = np.empty(1, dtype=np.bool_)
    h = np.inf if horizon is None else float(horizon)
    _simulate_block(p, ptr, dst, rate, h, _seed64(seed), index, 1, _method_code(method),
                    times, ids, n_events, trunc)
    k = int(n_events[0])
    return RealizationRecord(times[0, :k].copy(), ids[0, :k].copy(), bool(trunc[0]))


def estimate_adoption_curve(net: Network, grid, n_realizations: int, seed: int,
                            *, method: str = "threshold") -> AdoptionCurve:
    """Monte Carlo estimate of ``f(t)`` with a 95% normal confidence band.

    Realizations stop at the last grid time, which does not bias the
    estimate on the grid.
    """
    if n_realizations < 1:
        raise ValueError("need at least one realization")
    grid = check_grid(grid)
    s1 = np.zeros(grid.size, dtype=np.int64)
    s2 = np.zeros(grid.size, dtype=np.int64)
    for count, times, _, n_events, _ in _blocks(net, n_realizations, seed, grid[-1], method):
        _accumulate_counts(times, n_events, count, grid, s1, s2)
    n = n_realizations
    m = net.m
    mean = s1 / n
    if n > 1:
        # exact integer sums keep the variance free of cancellation error
        num = [int(a) * n - int(b) * int(b) for a, b in zip(s2, s1)]
        var = np.array([x / (n * (n - 1)) for x in num], dtype=np.float64)
        ci = 1.96 * np.sqrt(var / n) / m
    else:
        ci = np.zeros(grid.size)
    return AdoptionCurve(grid, mean / m, ci, n)


def estimate_interadoption_cdfs(net: Network, tau_grid, n_realizations: int,
                                seed: int, *, method: str = "threshold") -> EmpiricalCdfSet:
    """Empirical CDF of every inter-adoption time on ``tau_grid``.

    Realizations that stop before adoption ``k`` do not contribute to
    ``F_k``; ``sample_counts`` records how many did.
    """
    if n_realizations < 1:
        raise ValueError("need at least one realization")
    tau = check_grid(tau_grid, start_at_zero=False)
    m = net.m
    hist = np.zeros((m, tau.size), dtype=np.int64)
    reached = np.zeros(m, dtype=np.int64)
    for count, times, _, n_events, _ in _blocks(net, n_realizations, seed, np.inf, method):
        _accumulate_cdfs(times, n_events, count, tau, hist, reached)
    with np.errstate(invalid="ignore", divide="ignore"):
        curves = np.cumsum(hist, axis=1) / reached[:, None]
    curves[reached == 0] = 0.0
    return EmpiricalCdfSet(tau, curves, reached, n_realizations)
