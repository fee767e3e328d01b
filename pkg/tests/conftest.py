from __future__ import annotations

import numpy as np
import pytest
from hypothesis import strategies as st

from martfit import MarginalDistribution as M
from martfit import build_scenario


def random_pair(rng: np.random.Generator, grid: bool = False) -> tuple[M, M]:
    """Random lower law with 1-5 atoms and a mean-preserving spread of it.

    Each lower atom a is split into l <= a <= r with the two-point weights that
    keep the mean (left unsplit with probability 0.2), so the pair is in
    convex order by construction.  Supports stay in [-5, 5] and the upper
    law has at most 10 atoms.  ``grid`` puts atoms on a quarter lattice to
    produce coincident atoms and tangencies.
    """
    k = int(rng.integers(1, 6))
    if grid:
        pos = np.unique(rng.integers(-12, 13, size=k) / 4)
    else:
        pos = np.unique(rng.uniform(-3, 3, size=k))
    w = rng.dirichlet(np.ones(pos.size))
    lower = M(pos, w / w.sum())
    atoms = []
    for a, wa in zip(pos, lower.weights):
        if rng.random() < 0.2:
            atoms.append((a, wa))
            continue
        if grid:
            lo = rng.integers(-20, int(np.floor(a * 4)) + 1) / 4
            hi = rng.integers(int(np.ceil(a * 4)), 21) / 4
        else:
            lo, hi = rng.uniform(-5, a), rng.uniform(a, 5)
        if hi == lo:
            atoms.append((a, wa))
            continue
        atoms += [(lo, wa * (hi - a) / (hi - lo)), (hi, wa * (a - lo) / (hi - lo))]
    upper = M.from_atoms(atoms)
    return lower, upper


@st.composite
def pairs(draw):
    seed = draw(st.integers(0, 2**32 - 1))
    grid = draw(st.booleans())
    return random_pair(np.random.default_rng(seed), grid)


@pytest.fixture
def pair_a():
    return build_scenario("pair-a")


@pytest.fixture
def pair_b():
    return build_scenario("pair-b")


# -- acceptance summary -------------------------------------------------------

ACCEPTANCE: dict[int, str] = {}


def record(criterion: int, ok: bool, detail: str) -> None:
    """Store and print the pass/fail line for one acceptance criterion."""
    line = f"criterion {criterion:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE[criterion] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[k])
