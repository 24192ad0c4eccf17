"""Adaptive Dormand-Prince 5(4) integrator for linear master systems.

Steps are clipped so that every requested output time is hit exactly, so
the returned samples carry only the local truncation error of the method
and no interpolation error.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

__all__ = ["integrate", "ATOL", "RTOL"]

ATOL = 1e-10
RTOL = 1e-9

_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B = np.array(_A[6] + [0.0])
_E = np.array([71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40])

_SAFETY = 0.9
_MIN_FACTOR = 0.2
_MAX_FACTOR = 5.0


def _initial_step(rhs, t0, y0, f0, atol, rtol) -> float:
    scale = atol + rtol * np.abs(y0)
    d0 = np.sqrt(np.mean((y0 / scale) ** 2))
    d1 = np.sqrt(np.mean((f0 / scale) ** 2))
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    y1 = y0 + h0 * f0
    f1 = rhs(t0 + h0, y1)
    d2 = np.sqrt(np.mean(((f1 - f0) / scale) ** 2)) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** 0.2
    return min(100 * h0, h1)


def integrate(
    rhs: Callable[[float, np.ndarray], np.ndarray],
    y0: np.ndarray,
    t_out: np.ndarray,
    *,
    atol: float = ATOL,
    rtol: float = RTOL,
    max_steps: int = 10_000_000,
) -> np.ndarray:
    """Integrate ``y' = rhs(t, y)`` and sample the solution at ``t_out``.

    Parameters
    ----------
    rhs : callable
        Right-hand side returning a new array shaped like ``y``.
    y0 : ndarray
        State at ``t_out[0]``.
    t_out : ndarray
        Strictly increasing output times.
    atol, rtol : float
        Per-component error tolerances of the embedded estimate.

    Returns
    -------
    ndarray, shape (len(t_out),) + y0.shape
    """
    t_out = np.asarray(t_out, dtype=np.float64)
    y = np.array(y0, dtype=np.float64)
    out = np.empty((t_out.size,) + y.shape)
    out[0] = y
    if t_out.size == 1:
        return out
    t = float(t_out[0])
    k = [None] * 7
    k[0] = rhs(t, y)
    h = _initial_step(rhs, t, y, k[0], atol, rtol)
    steps = 0
    for n in range(1, t_out.size):
        target = float(t_out[n])
        while t < target:
            clipped = t + h >= target
            h_try = target - t if clipped else h
            for s in range(1, 7):
                ys = y.copy()
                for r, a in enumerate(_A[s]):
                    if a != 0.0:
                        ys += (h_try * a) * k[r]
                k[s] = rhs(t + _C[s] * h_try, ys)
            y_new = ys  # stage 7 argument is the 5th order solution
            err = h_try * sum(e * kk for e, kk in zip(_E, k) if e != 0.0)
            scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
            err_norm = float(np.sqrt(np.mean((err / scale) ** 2)))
            steps += 1
            if steps > max_steps:
                raise RuntimeError("step limit exceeded")
            if err_norm <= 1.0:
                t = target if clipped else t + h_try
                y = y_new
                k[0] = k[6]
                factor = _MAX_FACTOR if err_norm == 0 else min(
                    _MAX_FACTOR, _SAFETY * err_norm ** -0.2)
                # a clipped step says nothing about the natural step size
                if not clipped or h_try >= h:
                    h = h_try * factor
                else:
                    h = max(h, h_try * factor)
            else:
                h = h_try * max(_MIN_FACTOR, _SAFETY * err_norm ** -0.2)
                if h < 1e-14 * max(1.0, abs(t)):
                    raise RuntimeError("step size underflow")
        out[n] = y
    return out
