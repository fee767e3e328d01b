from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from martfit import DomainError
from martfit import streams


class TestUniforms:
    @given(st.integers(0, 2**40), st.integers(0, 100), st.integers(1, 50))
    def test_any_window_matches_full_stream(self, seed, start, count):
        full = streams.uniforms(seed, streams.TRANSITION, 1, 2, 0, start + count)
        part = streams.uniforms(seed, streams.TRANSITION, 1, 2, start, count)
        assert np.array_equal(full[start:], part)

    def test_streams_are_distinct(self):
        a = streams.uniforms(1, streams.TRANSITION, 0, 0, 0, 8)
        for other in [(2, streams.TRANSITION, 0, 0), (1, streams.INIT, 0, 0),
                      (1, streams.TRANSITION, 1, 0), (1, streams.TRANSITION, 0, 1)]:
            assert not np.array_equal(a, streams.uniforms(*other, 0, 8))

    def test_open_interval(self):
        u = streams.open_uniforms(3, streams.INIT, 0, 0, 0, 10_000)
        assert u.min() > 0.0 and u.max() <= 1.0

    def test_index_range(self):
        with pytest.raises(DomainError):
            streams.uniforms(0, streams.INIT, 1 << 28, 0, 0, 1)


class TestWorkers:
    def test_env(self, monkeypatch):
        monkeypatch.setenv("MARTFIT_THREADS", "3")
        assert streams.worker_count() == 3
        monkeypatch.setenv("MARTFIT_THREADS", "")
        assert streams.worker_count() >= 1
        for bad in ("0", "-2", "many"):
            monkeypatch.setenv("MARTFIT_THREADS", bad)
            with pytest.raises(DomainError):
                streams.worker_count()

    def test_map_chunks_order(self):
        n = 3 * streams.CHUNK + 5
        out = streams.map_chunks(lambda lo, hi: (lo, hi), n, threads=4)
        assert out == streams.chunks(n)
        assert out[-1][1] == n
