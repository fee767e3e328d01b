"""Command-line entry point.

Exit codes: 0 success, 1 validation or diagnostic failure, 2 usage or parse error.
"""
from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import formats
from .diagnostics import (convex_order_test, crossing_test, fit_report,
                          martingale_test)
from .errors import DomainError, ParseError, ValidationError
from .extremal import extremal_chain
from .localvol import dupire_sigma, euler_simulate
from .marginals import validate_cp
from .metric import metric_d
from .scenarios import SCENARIOS, build_scenario
from .skorokhod import simulate

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
MAX_PROBES = 60
MAX_PAIRS = 10_000


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(f"{self.prog}: {message}")


def _float_list(text: str) -> tuple[float, ...]:
    """Comma-separated numbers, sorted and deduplicated."""
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated number list: {text!r}") from None
    if not vals or not all(np.isfinite(vals)):
        raise argparse.ArgumentTypeError(f"need finite numbers: {text!r}")
    return tuple(sorted(set(vals)))


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be positive: {text!r}")
    return v


def _seed(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 0:
        raise argparse.ArgumentTypeError("seed must be non-negative")
    return v


@dataclass(frozen=True)
class RunConfig:
    subcommand: str
    inputs: tuple[str, ...] = ()
    seed: int | None = None
    n_paths: int | None = None
    times: tuple[float, ...] = ()
    levels: tuple[float, ...] = ()
    tol: float | None = None
    out: str | None = None
    extra: dict = field(default_factory=dict)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="martfit", description="Fit martingales to marginal distributions.")
    sub = p.add_subparsers(dest="subcommand", required=True, parser_class=_Parser)

    s = sub.add_parser("validate", help="check a marginal file for call-surface admissibility")
    s.add_argument("marginals")

    s = sub.add_parser("interpolate", help="interpolated marginal or calls at time t")
    s.add_argument("marginals")
    s.add_argument("--at", type=float, required=True, dest="at")
    s.add_argument("--x", type=_float_list, help="comma-separated levels; prints calls")

    s = sub.add_parser("simulate", help="sample exact martingale paths")
    s.add_argument("marginals")
    s.add_argument("--paths", type=_positive_int, required=True)
    s.add_argument("--seed", type=_seed, required=True)
    s.add_argument("--times", type=_float_list, required=True)
    s.add_argument("--out")

    s = sub.add_parser("diagnose", help="simulate and run the statistical and crossing checks")
    s.add_argument("marginals")
    s.add_argument("--paths", type=_positive_int, required=True)
    s.add_argument("--seed", type=_seed, required=True)
    s.add_argument("--pairs", type=_positive_int, help=f"crossing pairs (default min(paths, {MAX_PAIRS}))")
    s.add_argument("--csv", action="store_true", help="emit the report as CSV")

    s = sub.add_parser("metric", help="capped sup distance between two surfaces")
    s.add_argument("marginals_a")
    s.add_argument("marginals_b")
    s.add_argument("--tol", type=float, default=1e-3)

    s = sub.add_parser("localvol", help="extract local volatility from a gridded call surface")
    s.add_argument("grid")
    s.add_argument("--out")
    s.add_argument("--curvature-floor", type=float, default=1e-8)
    s.add_argument("--cap", type=float, default=1e3)
    s.add_argument("--simulate", action="store_true", help="run the Euler scheme instead")
    s.add_argument("--initial", help="marginal file; its first marginal starts the Euler paths")
    s.add_argument("--paths", type=_positive_int)
    s.add_argument("--seed", type=_seed)
    s.add_argument("--times", type=_float_list)
    s.add_argument("--dt", type=float, default=1e-3)

    s = sub.add_parser("scenario", help="emit a built-in marginal file")
    s.add_argument("name", nargs="?")
    s.add_argument("--list", action="store_true")
    s.add_argument("--out")
    return p


def _config(ns: argparse.Namespace) -> RunConfig:
    cmd = ns.subcommand
    inputs = tuple(getattr(ns, k) for k in ("marginals", "marginals_a", "marginals_b", "grid")
                   if getattr(ns, k, None))
    times = getattr(ns, "times", None) or ((ns.at,) if cmd == "interpolate" else ())
    return RunConfig(cmd, inputs, getattr(ns, "seed", None), getattr(ns, "paths", None),
                     tuple(times), tuple(getattr(ns, "x", None) or ()), getattr(ns, "tol", None),
                     getattr(ns, "out", None), {k: v for k, v in vars(ns).items()})


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _load_valid(path: str):
    surface = formats.read_marginals(path)
    report = validate_cp(surface)
    if not report.valid:
        raise ValidationError("; ".join(report.violations))
    return surface


def _cmd_validate(cfg: RunConfig) -> int:
    surface = formats.read_marginals(cfg.inputs[0])
    report = validate_cp(surface)
    if report.valid:
        print(f"valid: {len(surface)} marginals")
        return EXIT_OK
    for v in report.violations:
        print(v, file=sys.stderr)
    return EXIT_FAIL


def _cmd_interpolate(cfg: RunConfig) -> int:
    chain = extremal_chain(_load_valid(cfg.inputs[0]))
    t = cfg.times[0]
    if cfg.levels:
        vals = np.atleast_1d(chain(t, np.array(cfg.levels)))
        lines = ["x,call"] + [f"{formats.fmt(x)},{formats.fmt(v)}" for x, v in zip(cfg.levels, vals)]
        _emit("\n".join(lines) + "\n", None)
    else:
        m = chain.marginal_at(t)
        _emit(f"marginal {formats.fmt(t)}\n"
              + "".join(f"atom {formats.fmt(x)} {formats.fmt(w)}\n" for x, w in m.atoms), None)
    return EXIT_OK


def _cmd_simulate(cfg: RunConfig) -> int:
    surface = _load_valid(cfg.inputs[0])
    lo, hi = float(surface.times[0]), float(surface.times[-1])
    bad = [t for t in cfg.times if not lo <= t <= hi]
    if bad:
        raise DomainError(f"query times {bad} outside [{lo}, {hi}]")
    ens = simulate(surface, cfg.n_paths, cfg.seed)
    _emit(formats.format_paths(ens.matrix(cfg.times), cfg.times), cfg.out)
    return EXIT_OK


def _probe_plan(surface) -> dict[float, list[float]]:
    """Grid times and interval midpoints, with five levels spread over the support."""
    times = list(surface.times)
    times += [0.5 * (a + b) for a, b in zip(surface.times[:-1], surface.times[1:])]
    times = sorted(times)
    lo, hi = surface.support()
    levels = list(np.linspace(lo, hi, 5)) if hi > lo else [lo]
    per = max(1, MAX_PROBES // len(levels))
    if len(times) > per:
        times = [times[int(i)] for i in np.linspace(0, len(times) - 1, per)]
    return {float(t): [float(x) for x in levels] for t in times}


def _cmd_diagnose(cfg: RunConfig) -> int:
    surface = _load_valid(cfg.inputs[0])
    probes = _probe_plan(surface)
    times = sorted(probes)
    paths = simulate(surface, cfg.n_paths, cfg.seed).matrix(times)
    report = fit_report(paths, times, surface, probes)
    levels = next(iter(probes.values()))
    if len(times) > 1:
        report += martingale_test(paths, times, times[0], times[-1], levels)
        report += convex_order_test(paths, times, levels)
    pairs = cfg.extra.get("pairs") or min(cfg.n_paths, MAX_PAIRS)
    report += crossing_test(surface, pairs, cfg.seed + 1)
    _emit(report.to_csv() if cfg.extra.get("csv") else report.to_text(), None)
    return EXIT_OK if report.passed else EXIT_FAIL


def _cmd_metric(cfg: RunConfig) -> int:
    a, b = (_load_valid(p) for p in cfg.inputs[:2])
    if not cfg.tol or not cfg.tol > 0:
        raise DomainError("--tol must be positive")
    print(formats.fmt(round(metric_d(a, b, cfg.tol), 12)))
    return EXIT_OK


def _cmd_localvol(cfg: RunConfig) -> int:
    x = cfg.extra
    grid = formats.read_gridded(cfg.inputs[0])
    vol = dupire_sigma(grid, x["curvature_floor"], x["cap"])
    n_masked = int(vol.mask.sum())
    print(f"masked {n_masked} of {vol.mask.size} cells ({vol.n_capped} capped)", file=sys.stderr)
    if not x["simulate"]:
        _emit(formats.format_localvol(vol), cfg.out)
        return EXIT_OK
    missing = [k for k in ("initial", "paths", "seed", "times") if x.get(k) is None]
    if missing:
        raise _UsageError("localvol --simulate needs " + ", ".join("--" + k for k in missing))
    initial = formats.read_marginals(x["initial"]).marginals[0]
    paths = euler_simulate(vol, initial, cfg.n_paths, cfg.seed, cfg.times, x["dt"])
    _emit(formats.format_paths(paths, cfg.times), cfg.out)
    return EXIT_OK


def _cmd_scenario(cfg: RunConfig) -> int:
    name = cfg.extra.get("name")
    if cfg.extra.get("list") or not name:
        for key, (desc, _) in SCENARIOS.items():
            print(f"{key:10s} {desc}")
        return EXIT_OK if cfg.extra.get("list") else EXIT_USAGE
    surface = build_scenario(name)
    _emit(formats.format_marginals(surface, header=f"scenario {name}: {SCENARIOS[name][0]}"),
          cfg.out)
    return EXIT_OK


_COMMANDS = {
    "validate": _cmd_validate,
    "interpolate": _cmd_interpolate,
    "simulate": _cmd_simulate,
    "diagnose": _cmd_diagnose,
    "metric": _cmd_metric,
    "localvol": _cmd_localvol,
    "scenario": _cmd_scenario,
}


_LIST_FLAGS = ("--x", "--times")


def _join_lists(argv: Sequence[str]) -> list[str]:
    """Attach list values to their flag so a leading minus is not read as an option."""
    out, it = [], iter(argv)
    for tok in it:
        if tok in _LIST_FLAGS:
            nxt = next(it, None)
            out.append(tok if nxt is None else f"{tok}={nxt}")
        else:
            out.append(tok)
    return out


def run(argv: Sequence[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        ns = build_parser().parse_args(_join_lists(argv))
        cfg = _config(ns)
        return _COMMANDS[cfg.subcommand](cfg)
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    except _UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValidationError as exc:
        print(f"invalid: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except DomainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def main() -> None:
    sys.exit(run())
