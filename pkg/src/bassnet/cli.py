"""Command line entry point.

Commands
--------
``bassnet run --config FILE``
    Solve one scenario and write its curve, plus a comparison verdict when
    the scenario names a comparison target.
``bassnet preset NAME --seed N --out DIR``
    Run an experiment preset and write its curves and ``summary.json``.
``bassnet validate --config FILE``
    Parse and validate a scenario without solving it.

Exit codes are 0 on success, 1 for usage or configuration errors, 2 when a
preset assertion fails and 3 when the chosen solver cannot handle the
network.

A scenario is one JSON document::

    {
      "network": {... network JSON ...},      # or "network_file": "net.json"
      "solver": {"kind": "master", "backend": "auto"},
      "grid": {"t_max": 30, "n_points": 301},
      "compare": "homogeneous_counterpart",   # optional, or a network document
      "output": "out/curve.csv",
      "format": "csv"
    }

Solver kinds are ``monte_carlo`` (keys ``n``, ``seed``, optional
``method``), ``master`` (optional ``backend``) and ``closed_form`` (two or
three nodes, falling back to the master solver where a coefficient is
singular).  Relative ``network_file`` paths are resolved against the
config file's directory; ``output`` is resolved against the working
directory.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict, dataclass
from pathlib import Path

from .closedform import SingularCoefficient, f_complete_m2, f_complete_m3
from .curves import AdoptionCurve, curve_to_json, time_grid, write_curve_csv
from .dominance import DominanceVerdict, compare_adoption_curves
from .gillespie import estimate_adoption_curve, set_threads
from .master import Backend, CapExceeded, DegenerateExponents, solve_master
from .network import (
    Network,
    NetworkError,
    homogeneous_counterpart,
    load_network,
    network_from_json,
)
from .presets import PRESETS, run_preset, write_preset

__all__ = ["ScenarioConfig", "ConfigError", "CapabilityError", "load_config",
           "run_scenario", "main"]

EXIT_OK, EXIT_CONFIG, EXIT_ASSERTION, EXIT_CAPABILITY = 0, 1, 2, 3

SOLVER_KINDS = ("monte_carlo", "master", "closed_form")
FORMATS = ("csv", "json")


class ConfigError(ValueError):
    """The scenario document is malformed or inconsistent."""


class CapabilityError(RuntimeError):
    """The chosen solver cannot handle the network."""


@dataclass(frozen=True)
class ScenarioConfig:
    """A validated scenario.

    ``compare`` is ``None``, the string ``"homogeneous_counterpart"`` or a
    :class:`Network`.
    """

    network: Network
    solver: dict
    t_max: float
    n_points: int
    output: Path
    format: str = "csv"
    compare: Network | str | None = None
    tol: float = 1e-12


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise ConfigError(msg)


def _parse_solver(doc) -> dict:
    _require(isinstance(doc, dict), "solver must be an object")
    kind = doc.get("kind")
    _require(kind in SOLVER_KINDS, f"solver.kind must be one of {SOLVER_KINDS}")
    if kind == "monte_carlo":
        n, seed = doc.get("n"), doc.get("seed")
        _require(isinstance(n, int) and n >= 1, "monte_carlo needs an integer n >= 1")
        _require(isinstance(seed, int) and 0 <= seed < 2 ** 64,
                 "monte_carlo needs a 64-bit unsigned integer seed")
        method = doc.get("method", "threshold")
        _require(method in ("threshold", "direct"), "method must be threshold or direct")
        return {"kind": kind, "n": n, "seed": seed, "method": method}
    if kind == "master":
        backend = doc.get("backend", "auto")
        try:
            Backend(backend)
        except ValueError:
            raise ConfigError(f"unknown master backend {backend!r}") from None
        return {"kind": kind, "backend": backend}
    return {"kind": kind}


def _parse_network(doc, base: Path, what: str) -> Network:
    try:
        if isinstance(doc, dict):
            return network_from_json(doc)
        if isinstance(doc, str):
            path = Path(doc)
            return load_network(path if path.is_absolute() else base / path)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read {what}: {exc}") from exc
    except NetworkError as exc:
        raise ConfigError(f"invalid {what}: {exc}") from exc
    raise ConfigError(f"{what} must be an object or a file path")


def parse_config(doc, base: Path = Path(".")) -> ScenarioConfig:
    """Validate a scenario document.

    Raises
    ------
    ConfigError
        On any structural or value error, including an invalid network.
    """
    _require(isinstance(doc, dict), "config must be a JSON object")
    has_inline, has_file = "network" in doc, "network_file" in doc
    _require(has_inline != has_file, "give exactly one of network and network_file")
    net = _parse_network(doc["network"] if has_inline else doc["network_file"], base,
                         "network")
    solver = _parse_solver(doc.get("solver"))
    grid = doc.get("grid")
    _require(isinstance(grid, dict), "grid must be an object with t_max and n_points")
    t_max, n_points = grid.get("t_max"), grid.get("n_points")
    _require(isinstance(t_max, (int, float)) and not isinstance(t_max, bool) and t_max > 0,
             "grid.t_max must be a positive number")
    _require(isinstance(n_points, int) and n_points >= 2, "grid.n_points must be an integer >= 2")
    output = doc.get("output")
    _require(isinstance(output, str) and output, "output must be a path")
    fmt = doc.get("format", "csv")
    _require(fmt in FORMATS, f"format must be one of {FORMATS}")
    compare = doc.get("compare")
    if compare is not None and compare != "homogeneous_counterpart":
        compare = _parse_network(compare, base, "comparison network")
        _require(compare.m == net.m or solver["kind"] != "closed_form",
                 "closed_form comparison needs equal node counts")
    tol = doc.get("tol", 1e-12)
    _require(isinstance(tol, (int, float)) and tol >= 0, "tol must be a nonnegative number")
    return ScenarioConfig(net, solver, float(t_max), n_points, Path(output), fmt, compare,
                          float(tol))


def load_config(path: str | Path) -> ScenarioConfig:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    return parse_config(doc, path.parent)


def _closed_form(net: Network, grid) -> AdoptionCurve:
    """Two- and three-node closed forms; singular coefficients fall back to master."""
    q = net.q_dense()
    if net.m not in (2, 3):
        raise CapabilityError(f"closed forms cover m = 2 and 3, not m = {net.m}")
    try:
        if net.m == 2:
            f = f_complete_m2(grid, net.p[0], net.p[1], q[0, 1], q[1, 0])
        else:
            f = f_complete_m3(grid, net.p, q)
    except SingularCoefficient as exc:
        print(f"note: {exc}; using the master solver", file=sys.stderr)
        return solve_master(net, grid)
    return AdoptionCurve(grid, f)


def solve(net: Network, solver: dict, grid) -> AdoptionCurve:
    """Apply a parsed solver choice.

    Raises
    ------
    CapabilityError
        When the network is beyond the solver's cap or the exponents are
        degenerate for an explicitly requested analytic backend.
    """
    kind = solver["kind"]
    try:
        if kind == "monte_carlo":
            return estimate_adoption_curve(net, grid, solver["n"], solver["seed"],
                                           method=solver["method"])
        if kind == "master":
            return solve_master(net, grid, solver["backend"])
        return _closed_form(net, grid)
    except (CapExceeded, DegenerateExponents) as exc:
        raise CapabilityError(str(exc)) from exc


def _verdict_json(v: DominanceVerdict) -> dict:
    doc = asdict(v)
    doc["kind"] = v.kind.value
    doc["n_sign_changes"] = v.n_sign_changes
    return doc


def run_scenario(cfg: ScenarioConfig) -> list[Path]:
    """Solve a scenario and write its outputs; returns the written paths."""
    grid = time_grid(cfg.t_max, cfg.n_points)
    curve = solve(cfg.network, cfg.solver, grid)
    other = verdict = None
    if cfg.compare is not None:
        if cfg.compare == "homogeneous_counterpart":
            try:
                target = homogeneous_counterpart(cfg.network)
            except NetworkError as exc:
                raise ConfigError(str(exc)) from exc
        else:
            target = cfg.compare
        other = solve(target, cfg.solver, grid)
        verdict = compare_adoption_curves(curve, other, cfg.tol)
    out = cfg.output
    out.parent.mkdir(parents=True, exist_ok=True)
    written = [out]
    if cfg.format == "json":
        doc = {"curve": curve_to_json(curve)}
        if verdict is not None:
            doc["compare_curve"] = curve_to_json(other)
            doc["verdict"] = _verdict_json(verdict)
        out.write_text(json.dumps(doc, indent=1) + "\n")
        return written
    write_curve_csv(out, curve)
    if verdict is not None:
        cmp_path = out.with_name(out.stem + "_compare" + out.suffix)
        write_curve_csv(cmp_path, other)
        v_path = out.with_name(out.stem + "_verdict.json")
        v_path.write_text(json.dumps(_verdict_json(verdict), indent=1) + "\n")
        written += [cmp_path, v_path]
    return written


def _seed(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be a 64-bit unsigned integer")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bassnet",
                                     description="Bass diffusion on heterogeneous networks.")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="solve a scenario config")
    run.add_argument("--config", required=True)
    val = sub.add_parser("validate", help="validate a scenario config")
    val.add_argument("--config", required=True)
    pre = sub.add_parser("preset", help="run an experiment preset")
    pre.add_argument("name", choices=sorted(PRESETS))
    pre.add_argument("--seed", type=_seed, default=0)
    pre.add_argument("--out", required=True)
    pre.add_argument("--realizations", type=int, default=None,
                     help="override the Monte Carlo sample size")
    return parser


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    set_threads()
    try:
        if args.command == "validate":
            cfg = load_config(args.config)
            print(f"ok: m={cfg.network.m}, solver={cfg.solver['kind']}")
            return EXIT_OK
        if args.command == "run":
            for path in run_scenario(load_config(args.config)):
                print(path)
            return EXIT_OK
        result = run_preset(args.name, args.seed, args.realizations)
        write_preset(result, args.out)
        for a in result.assertions:
            print(f"{'PASS' if a.passed else 'FAIL'}  {a.name}  {a.detail}".rstrip())
        return EXIT_OK if result.passed else EXIT_ASSERTION
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CapabilityError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_CAPABILITY
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
