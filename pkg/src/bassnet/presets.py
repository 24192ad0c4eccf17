"""Reproducible experiment presets.

Each preset builds its networks, computes curves with the exact solvers
and, where the networks are large, with Monte Carlo, then checks the
qualitative claims it illustrates.  Results are returned as a
:class:`PresetResult` and written by :func:`write_preset`.

Axis ranges are chosen so that the slowest curve of a preset exceeds
``f = 0.95`` at ``t_max`` (see :func:`auto_t_max`), except where a fixed
window is part of the claim being checked.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .closedform import SingularCoefficient, f_1d, f_complete_m2, f_m2_pq_special
from .curves import AdoptionCurve, time_grid, write_curve_csv
from .dominance import VerdictKind, compare_adoption_curves
from .gillespie import estimate_adoption_curve
from .initial import cartesian_limit_d3, derivatives_cartesian, master_fd_derivatives
from .master import (
    convert_two_sided_to_one_sided,
    solve_block_and_alternating_circles,
    solve_master,
)
from .network import (
    MildHetSpec,
    Network,
    build_cartesian_torus,
    build_complete,
    build_custom,
    build_one_sided_circle,
    build_two_sided_circle,
    shift_p,
)

__all__ = [
    "Assertion",
    "PresetResult",
    "PRESETS",
    "run_preset",
    "write_preset",
    "auto_t_max",
    "truncated_normal_sample",
]

TARGET_LEVEL = 0.95


@dataclass(frozen=True)
class Assertion:
    name: str
    passed: bool
    detail: str = ""


@dataclass
class PresetResult:
    """Curves, tables and checked claims of one preset run.

    Attributes
    ----------
    tables : dict
        Maps a name to ``(header, rows)`` for non-curve outputs.
    values : dict
        JSON-serialisable scalars such as fitted coefficients.
    """

    name: str
    seed: int
    params: dict
    curves: dict[str, AdoptionCurve] = field(default_factory=dict)
    tables: dict[str, tuple[list[str], list[list[float]]]] = field(default_factory=dict)
    assertions: list[Assertion] = field(default_factory=list)
    values: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(a.passed for a in self.assertions)

    def check(self, name: str, passed, detail: str = "") -> None:
        self.assertions.append(Assertion(name, bool(passed), detail))


# ------------------------------------------------------------------ helpers
def auto_t_max(curves: list[Callable[[float], float]], start: float = 5.0,
               level: float = TARGET_LEVEL, step: float = 5.0) -> float:
    """Smallest multiple of ``step`` at or above ``start`` where every curve exceeds ``level``."""
    t = max(step, math.ceil(start / step) * step)
    while min(float(c(t)) for c in curves) <= level:
        t += step
        if t > 1e5:
            raise RuntimeError("curves never reach the target level")
    return t


def truncated_normal_sample(m: int, seed: int, bound: float = 1.9) -> np.ndarray:
    """Centred standard-normal draws restricted to ``|h| <= bound``."""
    rng = np.random.default_rng(seed)
    out = np.empty(0)
    while out.size < m:
        h = rng.standard_normal(2 * m)
        out = np.concatenate([out, h[np.abs(h) <= bound]])
    h = out[:m]
    return h - h.mean()


def _interior(x: np.ndarray) -> np.ndarray:
    return x[1:]


def _max_se_excess(mc: AdoptionCurve, exact: np.ndarray) -> float:
    """Largest ``|mc - exact|`` in units of the standard error (0/0 counts as 0)."""
    d = np.abs(mc.f - exact)
    se = mc.standard_error
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(d == 0.0, 0.0, d / se)
    return float(np.max(z))


def _verdict_detail(v) -> str:
    return f"{v.kind.value}, {v.n_sign_changes} sign change(s), max gap {v.max_gap:.3g}"


def _realizations(n: int | None, default: int) -> int:
    if n is None:
        return default
    if n < 1:
        raise ValueError("realizations must be >= 1")
    return int(n)


# ------------------------------------------------------------------ presets
def fig_m2pq(seed: int, realizations: int | None = None) -> PresetResult:
    """Two-node networks with equal mean rates and ``p`` in ``{q/2, q, 2q}``.

    The heterogeneous network is above its homogeneous counterpart for
    ``p < q``, identical for ``p = q`` and below for ``p > q``.
    """
    q = 0.2
    res = PresetResult("fig_m2pq", seed, {"q": q, "p": [q / 2, q, 2 * q], "n_points": 200})
    for label, p in (("p_half_q", q / 2), ("p_eq_q", q), ("p_twice_q", 2 * q)):
        t_max = auto_t_max([lambda t, p=p: min(f_m2_pq_special(t, p, q))])
        grid = time_grid(t_max, 200)
        het, hom = f_m2_pq_special(grid, p, q)
        net_a = build_complete(MildHetSpec.homogeneous(2, p, q))
        net_b = build_custom([2 * p, 0.0], [(0, 1, 2 * q)], allow_uninfluenced=True)
        ma = solve_master(net_a, grid).f
        mb = solve_master(net_b, grid).f
        try:
            gb = f_complete_m2(grid, 2 * p, 0.0, 2 * q, 0.0)
        except SingularCoefficient:
            gb = het  # p = q: only the limit form applies
        res.curves[f"f_het_{label}"] = AdoptionCurve(grid, het)
        res.curves[f"f_hom_{label}"] = AdoptionCurve(grid, hom)
        err = max(np.max(np.abs(ma - hom)), np.max(np.abs(mb - het)), np.max(np.abs(gb - het)))
        res.check(f"{label}: closed forms agree with master", err <= 1e-8, f"max error {err:.3g}")
        d = _interior(het - hom)
        if p < q:
            res.check(f"{label}: heterogeneous above", np.all(d > 0), f"min diff {d.min():.3g}")
        elif p > q:
            res.check(f"{label}: heterogeneous below", np.all(d < 0), f"max diff {d.max():.3g}")
        else:
            res.check(f"{label}: curves equal", np.max(np.abs(d)) <= 1e-12,
                      f"max |diff| {np.max(np.abs(d)):.3g}")
        res.values[f"t_max_{label}"] = t_max
    return res


def abc_networks(p: float = 0.05, q: float = 0.15, dp: float = 0.15) -> dict[str, Network]:
    """Networks A, B and their shifted versions A', B' of the dominance flip."""
    a = build_complete(MildHetSpec.homogeneous(2, p, q))
    b = build_custom([2 * p, 0.0], [(0, 1, 2 * q)], allow_uninfluenced=True)
    return {"A": a, "B": b, "A_prime": shift_p(a, dp), "B_prime": shift_p(b, dp)}


def fig_abc_counter(seed: int, realizations: int | None = None) -> PresetResult:
    """Raising every ``p`` by the same amount can reverse the order of two curves.

    The window ``(0, 60]`` is fixed because the claim is a single sign
    change on it.
    """
    p, q, dp, t_max = 0.05, 0.15, 0.15, 60.0
    res = PresetResult("fig_abc_counter", seed,
                       {"p": p, "q": q, "delta_p": dp, "t_max": t_max, "n_points": 601})
    grid = time_grid(t_max, 601)
    nets = abc_networks(p, q, dp)
    for key, net in nets.items():
        res.curves[f"f_{key}"] = solve_master(net, grid)
    cf = {
        "A": f_complete_m2(grid, p, p, q, q),
        "B": f_complete_m2(grid, 2 * p, 0.0, 2 * q, 0.0),
        "A_prime": f_complete_m2(grid, p + dp, p + dp, q, q),
        "B_prime": f_complete_m2(grid, 2 * p + dp, dp, 2 * q, 0.0),
    }
    err = max(float(np.max(np.abs(cf[k] - res.curves[f"f_{k}"].f))) for k in cf)
    res.check("closed forms agree with master", err <= 1e-8, f"max error {err:.3g}")
    v = compare_adoption_curves(res.curves["f_A"], res.curves["f_B"])
    res.check("A below B", v.kind is VerdictKind.FIRST_BELOW, _verdict_detail(v))
    v = compare_adoption_curves(res.curves["f_A_prime"], res.curves["f_B_prime"])
    ok = (v.kind is VerdictKind.CROSSING and v.n_sign_changes == 1 and v.crossings[0].rising)
    res.check("A' - B' changes sign once, from negative to positive", ok, _verdict_detail(v))
    if v.crossings:
        res.values["crossing_interval"] = [v.crossings[0].lo, v.crossings[0].hi]
    slowest = min(c.f[-1] for c in res.curves.values())
    res.check("slowest curve exceeds 0.95 at t_max", slowest > TARGET_LEVEL, f"{slowest:.4f}")
    return res


def block_circle(p_types, m: int, q: float, pattern: str | list[int]) -> Network:
    """One-sided circle mixing node types with external rates ``p_types``.

    ``pattern="block"`` gives each type a contiguous arc of ``m / k``
    nodes.  A list of type indices is repeated cyclically around the circle.
    """
    k = len(p_types)
    if m % k:
        raise ValueError("m must be a multiple of the number of types")
    idx = np.arange(m)
    if pattern == "block":
        types = idx // (m // k)
    else:
        types = np.asarray(pattern)[idx % len(pattern)]
    return build_one_sided_circle(np.asarray(p_types, dtype=np.float64)[types], np.full(m, q))


def fig_order(seed: int, realizations: int | None = None) -> PresetResult:
    """Two node types on a circle: contiguous halves adopt slower than alternation."""
    p1, p2, q, m = 0.4, 0.1, 0.2, 1000
    n = _realizations(realizations, 1000)
    t_max = auto_t_max([lambda t: 0.5 * (f_1d(t, p1, q) + f_1d(t, p2, q))])
    grid = time_grid(t_max, 61)
    res = PresetResult("fig_order", seed, {"p1": p1, "p2": p2, "q": q, "m": m,
                                           "realizations": n, "t_max": t_max, "n_points": 61})
    fa, fb = solve_block_and_alternating_circles(grid, p1, p2, q)
    res.curves["f_A_analytic"], res.curves["f_B_analytic"] = fa, fb
    d = _interior(fa.f - fb.f)
    res.check("analytic f_A < f_B on (0, t_max]", np.all(d < 0), f"max diff {d.max():.3g}")
    mc_a = estimate_adoption_curve(block_circle((p1, p2), m, q, "block"), grid, n, seed)
    mc_b = estimate_adoption_curve(block_circle((p1, p2), m, q, [0, 1]), grid, n, seed)
    res.curves["f_A_mc"], res.curves["f_B_mc"] = mc_a, mc_b
    for key, mc, ex in (("A", mc_a, fa), ("B", mc_b, fb)):
        z = _max_se_excess(mc, ex.f)
        res.check(f"Monte Carlo {key} within 3 SE of analytic", z <= 3.0, f"max |z| {z:.2f}")
    v = compare_adoption_curves(mc_a, mc_b)
    res.check("Monte Carlo f_A below f_B", v.kind is VerdictKind.FIRST_BELOW, _verdict_detail(v))
    return res


def fig_order_m3(seed: int, realizations: int | None = None) -> PresetResult:
    """Three node types on a circle: blocks, then two cyclic interleavings."""
    p, q, m = (0.5, 0.2, 0.01), 0.2, 900
    n = _realizations(realizations, 1000)
    t_max = auto_t_max([lambda t: float(np.mean([f_1d(t, pk, q) for pk in p]))])
    grid = time_grid(t_max, 61)
    res = PresetResult("fig_order_m3", seed, {"p": list(p), "q": q, "m": m,
                                              "realizations": n, "t_max": t_max, "n_points": 61})
    layouts = {"A": "block", "B": [0, 1, 2], "C": [0, 2, 1]}
    for key, pattern in layouts.items():
        res.curves[f"f_{key}_mc"] = estimate_adoption_curve(
            block_circle(p, m, q, pattern), grid, n, seed)
    for lo, hi in (("A", "B"), ("B", "C")):
        v = compare_adoption_curves(res.curves[f"f_{lo}_mc"], res.curves[f"f_{hi}_mc"])
        res.check(f"f_{lo} below f_{hi} (3 SE)", v.kind is VerdictKind.FIRST_BELOW,
                  _verdict_detail(v))
    slowest = min(c.f[-1] for c in res.curves.values())
    res.check("slowest curve exceeds 0.95 at t_max", slowest > TARGET_LEVEL, f"{slowest:.4f}")
    return res


EPSILONS = tuple(round(0.05 * k, 2) for k in range(11))


def fig_variance(seed: int, realizations: int | None = None) -> PresetResult:
    """Slowdown from mild ``q`` heterogeneity grows like ``eps^2``.

    ``q_j = q (1 + eps h_j)`` with ``h`` drawn by
    :func:`truncated_normal_sample` from the run seed.  All ``eps`` share
    the Monte Carlo seed, so their estimates use common random numbers.
    """
    m, p, q, t_obs = 1000, 0.01, 0.4, 15.0
    n = _realizations(realizations, 2000)
    res = PresetResult("fig_variance", seed, {"m": m, "p": p, "q": q, "t": t_obs,
                                              "realizations": n, "epsilons": list(EPSILONS)})
    h = truncated_normal_sample(m, seed)
    grid = time_grid(t_obs, 16)
    rows, f_end, ci_end = [], [], []
    for eps in EPSILONS:
        net = build_complete(MildHetSpec(np.full(m, p), q * (1.0 + eps * h)))
        c = estimate_adoption_curve(net, grid, n, seed)
        f_end.append(c.f[-1])
        ci_end.append(c.ci_half_width[-1])
        rows.append([eps, c.f[-1], c.ci_half_width[-1]])
    res.tables["f_het_at_t"] = (["eps", "f", "ci_half_width"], rows)
    eps = np.asarray(EPSILONS)
    f_end = np.asarray(f_end)
    gap = f_end[0] - f_end[1:]
    res.check("heterogeneous below homogeneous for every eps > 0", np.all(gap > 0),
              f"min gap {gap.min():.3g}")
    slope = float("nan")
    if np.all(gap > 0):
        slope = float(np.polyfit(np.log(eps[1:]), np.log(gap), 1)[0])
    res.check("log-log slope of the gap is 2.0 +- 0.3", abs(slope - 2.0) <= 0.3,
              f"slope {slope:.3f}")
    design = np.column_stack([np.ones_like(eps), eps ** 2])
    (c0, c2), *_ = np.linalg.lstsq(design, f_end, rcond=None)
    res.values.update(slope=slope, quadratic_intercept=float(c0), quadratic_coefficient=float(c2))
    res.check("quadratic coefficient is negative", c2 < 0, f"{c2:.4f}")
    res.check("quadratic coefficient within a factor 10 of 0.36", 0.036 <= -c2 <= 3.6,
              f"{c2:.4f}")
    return res


def dim_dominance(seed: int, realizations: int | None = None) -> PresetResult:
    """Lattice ``f'''(0)`` grows with the dimension toward its limit."""
    p, q = 0.1, 0.4
    dims = range(1, 6)
    res = PresetResult("dim_dominance", seed, {"p": p, "q": q, "dimensions": list(dims)})
    d3 = [derivatives_cartesian(d, p, q).d3 for d in dims]
    limit = cartesian_limit_d3(p, q)
    res.tables["d3_by_dimension"] = (["D", "d3"], [[d, v] for d, v in zip(dims, d3)]
                                     + [[math.inf, limit]])
    res.values.update(d3=d3, limit=limit)
    res.check("d3 strictly increasing in D", np.all(np.diff(d3) > 0))
    gaps = [limit - v for v in d3]
    res.check("d3 below the limit by at most q^2 p / D",
              all(0 < g <= q * q * p / d * (1 + 1e-12) for d, g in zip(dims, gaps)))
    # finite tori with incommensurate rates, so the analytic master applies
    pt, qt = 0.13, 0.47
    for d in (1, 2):
        est = master_fd_derivatives(build_cartesian_torus(d, 3, pt, qt))
        ref = derivatives_cartesian(d, pt, qt)
        rel = max(abs(est.d1 / ref.d1 - 1), abs(est.d2 / ref.d2 - 1), abs(est.d3 / ref.d3 - 1))
        res.check(f"torus d={d} finite differences match the lattice formulas", rel <= 1e-4,
                  f"max relative error {rel:.3g}")
    return res


def lemma_circles(p: float, q: float) -> dict[str, Network]:
    """The two three-node circles whose one- and two-sided curves order oppositely."""
    upper = build_two_sided_circle([p, 0, 0], [q, 0, 0], [0, 0, q], allow_uninfluenced=True)
    lower = build_two_sided_circle([p, 0, 0], [0, 0, q], [0, q, 0], allow_uninfluenced=True)
    return {"two_sided_above": upper, "two_sided_below": lower}


def circle_equivalence(seed: int, realizations: int | None = None) -> PresetResult:
    """Homogeneous one- and two-sided circles coincide; heterogeneous ones need not."""
    p, q = 0.1, 0.4
    ms = range(3, 11)
    t_max = auto_t_max([lambda t: f_1d(t, p, q)], start=10.0)
    grid = time_grid(t_max, 101)
    res = PresetResult("circle_equivalence", seed, {"p": p, "q": q, "m": list(ms),
                                                    "t_max": t_max, "n_points": 101})
    worst = 0.0
    for m in ms:
        one = solve_master(build_one_sided_circle(np.full(m, p), np.full(m, q)), grid)
        two = solve_master(build_two_sided_circle(np.full(m, p), np.full(m, q / 2),
                                                  np.full(m, q / 2)), grid)
        res.curves[f"one_sided_m{m}"], res.curves[f"two_sided_m{m}"] = one, two
        worst = max(worst, float(np.max(np.abs(one.f - two.f))))
    res.check("homogeneous one- and two-sided circles agree to 1e-8", worst <= 1e-8,
              f"max |diff| {worst:.3g}")
    for key, net in lemma_circles(p, q).items():
        two = solve_master(net, grid)
        one = solve_master(convert_two_sided_to_one_sided(net), grid)
        res.curves[f"{key}_two"], res.curves[f"{key}_one"] = two, one
        d = _interior(two.f - one.f)
        ok = np.all(d > 0) if key == "two_sided_above" else np.all(d < 0)
        res.check(f"{key}: strict at every interior grid point", ok,
                  f"diff range [{d.min():.3g}, {d.max():.3g}]")
    return res


PRESETS: dict[str, Callable[..., PresetResult]] = {
    "fig_m2pq": fig_m2pq,
    "fig_abc_counter": fig_abc_counter,
    "fig_order": fig_order,
    "fig_order_m3": fig_order_m3,
    "fig_variance": fig_variance,
    "dim_dominance": dim_dominance,
    "circle_equivalence": circle_equivalence,
}


def run_preset(name: str, seed: int, realizations: int | None = None) -> PresetResult:
    """Run a preset by name.

    Raises
    ------
    KeyError
        For an unknown preset name.
    """
    if name not in PRESETS:
        raise KeyError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
    return PRESETS[name](seed, realizations)


def _fmt(x: float) -> str:
    return "%.17g" % x


def write_preset(result: PresetResult, out_dir: str | Path) -> list[Path]:
    """Write every curve and table as CSV plus ``summary.json``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = []
    for key, curve in result.curves.items():
        path = out / f"{key}.csv"
        write_curve_csv(path, curve)
        files.append(path)
    for key, (header, rows) in result.tables.items():
        path = out / f"{key}.csv"
        lines = [",".join(header)] + [",".join(_fmt(float(x)) for x in r) for r in rows]
        path.write_text("\n".join(lines) + "\n")
        files.append(path)
    summary = {
        "preset": result.name,
        "seed": result.seed,
        "params": result.params,
        "passed": result.passed,
        "assertions": [{"name": a.name, "passed": a.passed, "detail": a.detail}
                       for a in result.assertions],
        "values": result.values,
        "files": [p.name for p in files],
    }
    path = out / "summary.json"
    path.write_text(json.dumps(summary, indent=1, default=float) + "\n")
    files.append(path)
    return files
