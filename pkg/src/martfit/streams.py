"""Counter-based uniform streams and worker-count handling.

Every random number is addressed by (seed, domain, a, b, index): the Philox
key encodes (seed, domain, a, b) and the counter position is the path index.
Any chunk of paths can therefore be generated independently, so results do
not depend on how paths are split between workers.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from numpy.random import Generator, Philox

from .errors import DomainError

INIT = 1
TRANSITION = 2
EULER = 3

_MASK64 = (1 << 64) - 1
_FIELD = 1 << 28
CHUNK = 8192  # multiple of 4: Philox advances in blocks of four 64-bit words


def _key(seed: int, domain: int, a: int, b: int) -> list[int]:
    if not (0 <= a < _FIELD and 0 <= b < _FIELD):
        raise DomainError(f"stream indices out of range: {a}, {b}")
    return [int(seed) & _MASK64, (domain << 56) | (a << 28) | b]


def uniforms(seed: int, domain: int, a: int, b: int, start: int, count: int) -> np.ndarray:
    """Uniforms on [0, 1) at stream positions start .. start+count-1."""
    bg = Philox(key=_key(seed, domain, a, b))
    if start >= 4:
        bg.advance(start // 4)
    skip = start % 4
    return Generator(bg).random(count + skip)[skip:]


def open_uniforms(seed: int, domain: int, a: int, b: int, start: int, count: int) -> np.ndarray:
    """Uniforms on (0, 1]."""
    return 1.0 - uniforms(seed, domain, a, b, start, count)


def worker_count() -> int:
    """Worker cap from MARTFIT_THREADS, defaulting to the CPU count."""
    raw = os.environ.get("MARTFIT_THREADS")
    if raw is None or raw.strip() == "":
        return max(1, os.cpu_count() or 1)
    try:
        n = int(raw)
    except ValueError:
        raise DomainError(f"MARTFIT_THREADS must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise DomainError(f"MARTFIT_THREADS must be a positive integer, got {raw!r}")
    return n


def chunks(n: int, size: int = CHUNK) -> list[tuple[int, int]]:
    return [(lo, min(n, lo + size)) for lo in range(0, n, size)]


def map_chunks(fn, n: int, threads: int | None = None) -> list:
    """Apply ``fn(lo, hi)`` over path chunks; results come back in chunk order."""
    spans = chunks(n)
    threads = worker_count() if threads is None else threads
    if threads <= 1 or len(spans) <= 1:
        return [fn(lo, hi) for lo, hi in spans]
    with ThreadPoolExecutor(max_workers=min(threads, len(spans))) as pool:
        return list(pool.map(lambda span: fn(*span), spans))
