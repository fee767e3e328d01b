"""Text and CSV formats.

Marginal files hold blocks::

    # comment
    marginal 0
    atom 0 1
    marginal 1
    atom -1 0.5
    atom 1 0.5

Gridded surfaces are CSV with the level lattice in the first row and the time
lattice in the first column.  Numbers are written with 17 significant digits.
"""
from __future__ import annotations

import csv
import io
import math
from decimal import Decimal, InvalidOperation
from pathlib import Path
from typing import Sequence, Union

import numpy as np

from .errors import ParseError, ValidationError
from .marginals import CallSurface, GriddedSurface, MarginalDistribution

PathLike = Union[str, Path]


def fmt(x: float) -> str:
    if isinstance(x, float) and math.isnan(x):
        return "NaN"
    return format(float(x), ".17g")


def _number(tok: str, lineno: int) -> float:
    try:
        d = Decimal(tok)
    except InvalidOperation:
        raise ParseError(f"line {lineno}: not a number: {tok!r}") from None
    if not d.is_finite():
        raise ParseError(f"line {lineno}: non-finite number {tok!r}")
    return float(d)


def parse_marginals(text: str) -> CallSurface:
    """Parse the block format into a CallSurface.

    Syntax problems raise ``ParseError``; well-formed but inadmissible
    content (bad weights, unordered times) raises ``ValidationError`` naming
    the offending block.
    """
    blocks: list[tuple[float, int, list[tuple[float, float]]]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if parts[0] == "marginal":
            if len(parts) != 2:
                raise ParseError(f"line {lineno}: expected 'marginal <t>'")
            blocks.append((_number(parts[1], lineno), lineno, []))
        elif parts[0] == "atom":
            if len(parts) != 3:
                raise ParseError(f"line {lineno}: expected 'atom <x> <w>'")
            if not blocks:
                raise ParseError(f"line {lineno}: atom before any marginal block")
            blocks[-1][2].append((_number(parts[1], lineno), _number(parts[2], lineno)))
        else:
            raise ParseError(f"line {lineno}: unknown keyword {parts[0]!r}")
    if not blocks:
        raise ParseError("no marginal blocks")

    times, dists = [], []
    for k, (t, lineno, atoms) in enumerate(blocks, start=1):
        label = f"block {k} (marginal {fmt(t)}, line {lineno})"
        if times and t <= times[-1]:
            raise ValidationError(f"{label}: times must be strictly increasing")
        if not atoms:
            raise ValidationError(f"{label}: no atoms")
        if any(w <= 0 for _, w in atoms):
            raise ValidationError(f"{label}: non-positive weight")
        try:
            dists.append(MarginalDistribution.from_atoms(atoms))
        except ValidationError as exc:
            raise ValidationError(f"{label}: {exc}") from None
        times.append(t)
    return CallSurface(np.array(times), tuple(dists))


def read_marginals(path: PathLike) -> CallSurface:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from None
    return parse_marginals(text)


def format_marginals(surface: CallSurface, header: str | None = None) -> str:
    out = []
    if header:
        out.extend(f"# {line}" for line in header.splitlines())
    for t, m in zip(surface.times, surface.marginals):
        out.append(f"marginal {fmt(t)}")
        out.extend(f"atom {fmt(x)} {fmt(w)}" for x, w in m.atoms)
    return "\n".join(out) + "\n"


def write_marginals(surface: CallSurface, path: PathLike, header: str | None = None) -> None:
    Path(path).write_text(format_marginals(surface, header), encoding="utf-8")


def _grid_rows(times, levels, values, corner: str) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([corner] + [fmt(x) for x in levels])
    for t, row in zip(times, values):
        w.writerow([fmt(t)] + [fmt(v) for v in row])
    return buf.getvalue()


def format_gridded(surface: GriddedSurface) -> str:
    return _grid_rows(surface.times, surface.levels, surface.values, "t")


def format_localvol(vol) -> str:
    return _grid_rows(vol.times, vol.levels, vol.sigma, "t")


def parse_gridded(text: str) -> GriddedSurface:
    rows = [r for r in csv.reader(io.StringIO(text)) if r and any(c.strip() for c in r)]
    if len(rows) < 2:
        raise ParseError("gridded CSV needs a level row and at least one time row")
    try:
        levels = [float(c) for c in rows[0][1:]]
        times, body = [], []
        for i, r in enumerate(rows[1:], start=2):
            if len(r) != len(levels) + 1:
                raise ParseError(f"row {i}: expected {len(levels) + 1} cells, got {len(r)}")
            times.append(float(r[0]))
            body.append([float(c) for c in r[1:]])
    except ValueError as exc:
        raise ParseError(f"gridded CSV: {exc}") from None
    return GriddedSurface(np.array(times), np.array(levels), np.array(body))


def read_gridded(path: PathLike) -> GriddedSurface:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from None
    return parse_gridded(text)


def format_paths(matrix: np.ndarray, times: Sequence[float]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["path"] + [fmt(t) for t in times])
    for i, row in enumerate(np.asarray(matrix)):
        w.writerow([str(i)] + [fmt(v) for v in row])
    return buf.getvalue()


def parse_paths(text: str) -> tuple[np.ndarray, list[float]]:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or rows[0][:1] != ["path"]:
        raise ParseError("path CSV must start with a 'path' header")
    times = [float(c) for c in rows[0][1:]]
    body = np.array([[float(c) for c in r[1:]] for r in rows[1:] if r], dtype=float)
    return body.reshape(-1, len(times)), times
