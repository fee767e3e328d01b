"""Statistical and exact checks on simulated paths.

Every check carries a statistic, a threshold and a pass flag with
``passed == (|stat| <= thresh)``.  Statistical checks use 4 standard errors,
which keeps the false-failure rate of a report with up to 60 probes near 0.4%.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import DomainError, ParseError, ValidationError
from .extremal import extremal_chain
from .formats import fmt
from .marginals import CallSurface, validate_cp
from .skorokhod import PathSample, TransitionBarrier, simulate

Z_THRESH = 4.0
_FIELDS = ("name", "stat", "thresh", "pass", "n", "stderr")


@dataclass(frozen=True)
class Check:
    name: str
    stat: float
    thresh: float
    n: int = 0
    stderr: float = 0.0

    def __post_init__(self):
        if not self.name or any(c.isspace() or c == "," for c in self.name):
            raise DomainError(f"check name {self.name!r} must be non-empty without spaces or commas")

    @property
    def passed(self) -> bool:
        return bool(abs(self.stat) <= self.thresh)


@dataclass(frozen=True)
class DiagnosticsReport:
    checks: tuple[Check, ...] = ()

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def __add__(self, other: "DiagnosticsReport") -> "DiagnosticsReport":
        return DiagnosticsReport(self.checks + other.checks)

    def __getitem__(self, name: str) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def failures(self) -> list[Check]:
        return [c for c in self.checks if not c.passed]

    def to_text(self) -> str:
        return "".join(f"check {c.name} stat {fmt(c.stat)} thresh {fmt(c.thresh)} "
                       f"pass {int(c.passed)} n {c.n} stderr {fmt(c.stderr)}\n"
                       for c in self.checks)

    @classmethod
    def from_text(cls, text: str) -> "DiagnosticsReport":
        checks = []
        for lineno, line in enumerate(text.splitlines(), start=1):
            parts = line.split()
            if not parts:
                continue
            if parts[0] != "check" or len(parts) % 2 != 0:
                raise ParseError(f"line {lineno}: expected 'check <name> stat <v> ...'")
            kv = dict(zip(parts[2::2], parts[3::2]))
            try:
                c = Check(parts[1], float(kv["stat"]), float(kv["thresh"]),
                          int(kv.get("n", 0)), float(kv.get("stderr", 0.0)))
            except (KeyError, ValueError) as exc:
                raise ParseError(f"line {lineno}: {exc}") from None
            if "pass" in kv and int(kv["pass"]) != int(c.passed):
                raise ParseError(f"line {lineno}: pass flag disagrees with stat and thresh")
            checks.append(c)
        return cls(tuple(checks))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(_FIELDS)
        for c in self.checks:
            w.writerow([c.name, fmt(c.stat), fmt(c.thresh), int(c.passed), c.n, fmt(c.stderr)])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "DiagnosticsReport":
        rows = list(csv.DictReader(io.StringIO(text)))
        try:
            return cls(tuple(Check(r["name"], float(r["stat"]), float(r["thresh"]),
                                   int(r["n"]), float(r["stderr"])) for r in rows))
        except (KeyError, ValueError, TypeError) as exc:
            raise ParseError(f"report CSV: {exc}") from None


def _z(mean: float, se: float) -> float:
    if se > 0:
        return mean / se
    return 0.0 if mean == 0 else math.copysign(math.inf, mean)


def _mean_se(v: np.ndarray) -> tuple[float, float]:
    n = v.size
    if n == 0:
        raise DomainError("no samples")
    m = float(v.mean())
    se = float(v.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return m, se


def empirical_call(samples, x: float) -> tuple[float, float]:
    """Sample mean of (X - x)_+ and its standard error."""
    s = np.asarray(samples, dtype=float).reshape(-1)
    return _mean_se(np.maximum(s - float(x), 0.0))


def _column(times: Sequence[float], t: float) -> int:
    times = [float(q) for q in times]
    try:
        return times.index(float(t))
    except ValueError:
        raise DomainError(f"time {t} is not a column of the path matrix {times}") from None


def _check_shape(paths: np.ndarray, times: Sequence[float]) -> np.ndarray:
    paths = np.asarray(paths, dtype=float)
    if paths.ndim != 2 or paths.shape[1] != len(times):
        raise DomainError(f"path matrix shape {paths.shape} does not match {len(times)} times")
    return paths


def martingale_test(paths, times: Sequence[float], s: float, t: float,
                    cuts: Sequence[float]) -> DiagnosticsReport:
    """z-statistics of mean((X_t - X_s) 1{X_s <= c}), zero for a martingale."""
    paths = _check_shape(paths, times)
    if not float(s) < float(t):
        raise DomainError("martingale test needs s < t")
    xs, xt = paths[:, _column(times, s)], paths[:, _column(times, t)]
    checks = []
    for c in cuts:
        m, se = _mean_se((xt - xs) * (xs <= c))
        checks.append(Check(f"martingale_s{fmt(s)}_t{fmt(t)}_c{fmt(c)}", _z(m, se), Z_THRESH,
                            xs.size, se))
    return DiagnosticsReport(tuple(checks))


def convex_order_test(paths, times: Sequence[float], levels: Sequence[float]) -> DiagnosticsReport:
    """Empirical calls must not decrease between consecutive columns.

    The statistic is the largest paired z of C_s(x) - C_t(x) over ``levels``;
    only positive values count against the order.
    """
    paths = _check_shape(paths, times)
    checks = []
    for j in range(len(times) - 1):
        worst, worst_se = 0.0, 0.0
        for x in levels:
            d = np.maximum(paths[:, j] - x, 0.0) - np.maximum(paths[:, j + 1] - x, 0.0)
            m, se = _mean_se(d)
            z = max(_z(m, se), 0.0)
            if z >= worst:
                worst, worst_se = z, se
        checks.append(Check(f"convex_order_{fmt(times[j])}_{fmt(times[j + 1])}", worst,
                            Z_THRESH, paths.shape[0], worst_se))
    return DiagnosticsReport(tuple(checks))


def fit_report(paths, times: Sequence[float], surface: CallSurface,
               probes: Mapping[float, Sequence[float]]) -> DiagnosticsReport:
    """Residuals |empirical call - interpolated call| / stderr at each probe (t, x)."""
    paths = _check_shape(paths, times)
    target = extremal_chain(surface)
    lo, hi = float(surface.times[0]), float(surface.times[-1])
    checks = []
    for t, levels in probes.items():
        if not lo <= float(t) <= hi:
            raise DomainError(f"probe time {t} outside [{lo}, {hi}]")
        col = paths[:, _column(times, t)]
        for x in levels:
            est, se = empirical_call(col, x)
            diff = est - float(target(t, x))
            if se == 0 and abs(diff) <= 1e-12:
                diff = 0.0
            checks.append(Check(f"fit_t{fmt(t)}_x{fmt(x)}", _z(diff, se), Z_THRESH,
                                col.size, se))
    return DiagnosticsReport(tuple(checks))


# -- almost-continuity --------------------------------------------------------
#
# Within one interval every path rides the common ceiling max(x0, alpha(u(t)))
# until its jump time T and then sits at its landing level.  Between event
# times (either path's T or a jump of alpha) both paths are continuous, so a
# change of order there forces a meeting.  A crossing without meeting is thus
# a strict sign reversal between the left limits and the values at an event.

def _alpha_vec(barrier: TransitionBarrier, u: np.ndarray, left: bool) -> np.ndarray:
    out = np.full(u.shape, -np.inf)
    pos = u > 0
    out[pos] = barrier.functions.alpha_many(u[pos], strict=left)
    return out


def _state(barrier: TransitionBarrier, x0, land, jump, tau, left: bool) -> np.ndarray:
    u = np.clip((tau - barrier.t0) / (barrier.t1 - barrier.t0), 0.0, 1.0)
    ceil = _alpha_vec(barrier, u, left)
    riding = tau <= jump if left else tau < jump
    return np.where(riding, np.maximum(x0, ceil), land)


def _reversals(barrier: TransitionBarrier, y, z) -> np.ndarray:
    """Boolean per pair: some event shows a strict reversal. ``y``, ``z`` are
    (start, landing, jump_time) array triples."""
    n = np.broadcast(*y, *z).shape
    taus = [np.broadcast_to(y[2], n), np.broadcast_to(z[2], n)]
    bf = barrier.functions
    for u, _, _ in bf.jumps:
        taus.append(np.full(n, barrier.t0 + (barrier.t1 - barrier.t0) * u))
    taus.append(np.full(n, barrier.t1))
    bad = np.zeros(n, dtype=bool)
    for tau in taus:
        live = tau > barrier.t0
        if not live.any():
            continue
        dl = _state(barrier, *y, tau, True) - _state(barrier, *z, tau, True)
        dv = _state(barrier, *y, tau, False) - _state(barrier, *z, tau, False)
        bad |= live & (dl * dv < 0)
    return bad


def pair_crosses(barrier: TransitionBarrier, y: PathSample, z: PathSample) -> bool:
    """Whether two closed-form paths swap order within the interval without meeting."""
    def triple(p):
        return (np.array([p.start]), np.array([p.landing]), np.array([p.jump_time]))
    return bool(_reversals(barrier, triple(y), triple(z))[0])


def crossing_test(surface: CallSurface, n_pairs: int, seed: int,
                  threads: int | None = None) -> DiagnosticsReport:
    """Count independent path pairs that cross without meeting; must be 0."""
    report = validate_cp(surface)
    if not report.valid:
        raise ValidationError("invalid call surface: " + "; ".join(report.violations))
    if n_pairs < 1:
        raise DomainError("n_pairs must be positive")
    ens = simulate(surface, 2 * n_pairs, seed, threads)
    bad = np.zeros(n_pairs, dtype=bool)
    for k, bar in enumerate(ens.barriers):
        y = (ens.x0[k, :n_pairs], ens.land[k, :n_pairs], ens.jump_time[k, :n_pairs])
        z = (ens.x0[k, n_pairs:], ens.land[k, n_pairs:], ens.jump_time[k, n_pairs:])
        bad |= _reversals(bar, y, z)
    return DiagnosticsReport((Check("crossing", float(bad.sum()), 0.0, n_pairs, 0.0),))
