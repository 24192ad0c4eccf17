"""Result containers shared by the solvers."""

from __future__ import annotations

import enum
import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "AdoptionCurve",
    "CdfCurve",
    "CdfSource",
    "time_grid",
    "check_grid",
    "write_curve_csv",
    "read_curve_csv",
    "curve_to_json",
]

_MONO_TOL = 1e-9


def time_grid(t_max: float, n_points: int) -> np.ndarray:
    """Uniform grid ``0 = t_0 < ... < t_{n-1} = t_max``."""
    if t_max <= 0 or n_points < 2:
        raise ValueError("need t_max > 0 and at least two grid points")
    return np.linspace(0.0, float(t_max), int(n_points))


def check_grid(grid, *, start_at_zero: bool = True) -> np.ndarray:
    """Validate a strictly increasing time grid and return it as an array."""
    g = np.asarray(grid, dtype=np.float64).ravel()
    if g.size < 1 or not np.all(np.isfinite(g)):
        raise ValueError("grid must be a non-empty finite vector")
    if np.any(np.diff(g) <= 0):
        raise ValueError("grid must be strictly increasing")
    if start_at_zero and g[0] != 0.0:
        raise ValueError("grid must start at 0")
    if g[0] < 0:
        raise ValueError("grid must be nonnegative")
    return g


@dataclass(frozen=True, eq=False)
class AdoptionCurve:
    """Expected adoption fraction ``f(t)`` sampled on a grid.

    Attributes
    ----------
    grid : ndarray
        Time points, starting at 0.
    f : ndarray
        Adoption fraction at each grid point.
    ci_half_width : ndarray or None
        Half-width of the 95% normal confidence band, Monte Carlo only.
    n_realizations : int or None
        Sample count, ``None`` for exact (deterministic) curves.
    """

    grid: np.ndarray
    f: np.ndarray
    ci_half_width: np.ndarray | None = None
    n_realizations: int | None = None

    def __post_init__(self) -> None:
        g = check_grid(self.grid)
        f = np.asarray(self.f, dtype=np.float64).ravel()
        if f.shape != g.shape:
            raise ValueError("f must match the grid")
        if abs(f[0]) > _MONO_TOL:
            raise ValueError("f(0) must be 0")
        if np.any(f < -_MONO_TOL) or np.any(f > 1 + _MONO_TOL):
            raise ValueError("f must lie in [0, 1]")
        if np.any(np.diff(f) < -_MONO_TOL):
            raise ValueError("f must be nondecreasing")
        object.__setattr__(self, "grid", g)
        object.__setattr__(self, "f", f)
        if self.ci_half_width is not None:
            ci = np.asarray(self.ci_half_width, dtype=np.float64).ravel()
            if ci.shape != g.shape:
                raise ValueError("ci_half_width must match the grid")
            object.__setattr__(self, "ci_half_width", ci)

    @property
    def exact(self) -> bool:
        return self.n_realizations is None

    @property
    def standard_error(self) -> np.ndarray | None:
        """Standard error of the Monte Carlo mean, ``ci_half_width / 1.96``."""
        if self.ci_half_width is None:
            return None
        return self.ci_half_width / 1.96

    def at(self, t) -> np.ndarray:
        """Linear interpolation of ``f`` at ``t``."""
        return np.interp(t, self.grid, self.f)


class CdfSource(str, enum.Enum):
    ANALYTIC = "analytic"
    BRUTEFORCE = "bruteforce"
    EMPIRICAL = "empirical"


@dataclass(frozen=True, eq=False)
class CdfCurve:
    """Cumulative distribution of an inter-adoption time on a ``tau`` grid.

    ``n_samples`` is set for empirical curves and is used to size the
    binomial noise margin in dominance tests.
    """

    tau: np.ndarray
    values: np.ndarray
    source: CdfSource = CdfSource.ANALYTIC
    n_samples: int | None = None

    def __post_init__(self) -> None:
        tau = check_grid(self.tau, start_at_zero=False)
        v = np.asarray(self.values, dtype=np.float64).ravel()
        if v.shape != tau.shape:
            raise ValueError("values must match tau")
        if np.any(v < -_MONO_TOL) or np.any(v > 1 + _MONO_TOL):
            raise ValueError("CDF values must lie in [0, 1]")
        if np.any(np.diff(v) < -_MONO_TOL):
            raise ValueError("CDF must be nondecreasing")
        object.__setattr__(self, "tau", tau)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "source", CdfSource(self.source))


# ------------------------------------------------------------------- I/O
def _fmt(x: float) -> str:
    return "%.17g" % x


def write_curve_csv(path: str | Path, curve: AdoptionCurve) -> None:
    """Write columns ``t, f`` and, for Monte Carlo curves, ``ci_half_width``.

    Values carry 17 significant digits so that doubles round-trip exactly.
    """
    cols = [curve.grid, curve.f]
    header = ["t", "f"]
    if curve.ci_half_width is not None:
        cols.append(curve.ci_half_width)
        header.append("ci_half_width")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in zip(*cols):
            w.writerow([_fmt(x) for x in row])


def read_curve_csv(path: str | Path, n_realizations: int | None = None) -> AdoptionCurve:
    """Inverse of :func:`write_curve_csv`."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], np.array(rows[1:], dtype=np.float64).reshape(-1, len(rows[0]))
    if header[:2] != ["t", "f"]:
        raise ValueError(f"unexpected CSV header {header!r}")
    ci = body[:, 2] if "ci_half_width" in header else None
    return AdoptionCurve(body[:, 0], body[:, 1], ci, n_realizations)


def curve_to_json(curve: AdoptionCurve) -> dict:
    """Plain-list dictionary form of a curve."""
    doc = {"t": curve.grid.tolist(), "f": curve.f.tolist()}
    if curve.ci_half_width is not None:
        doc["ci_half_width"] = curve.ci_half_width.tolist()
        doc["n_realizations"] = curve.n_realizations
    return doc
