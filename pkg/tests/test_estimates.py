"""Estimate containers: moment algebra against direct numpy computation."""

import numpy as np
import pytest

from edwards1d.estimates import MCEstimate, StreamingMoments, combined_se, \
    within_se


def test_from_samples_matches_numpy():
    rng = np.random.default_rng(42)
    x = rng.normal(2.0, 3.0, size=5000)
    est = MCEstimate.from_samples(x, seed=7)
    assert est.n == 5000
    assert abs(est.mean - x.mean()) < 1e-14
    assert abs(est.stderr - x.std(ddof=1) / np.sqrt(5000)) < 1e-14


def test_scaled_and_plus_algebra():
    a = MCEstimate(2.0, 0.3, 100, 0)
    b = MCEstimate(-1.0, 0.4, 100, 0)
    s = a.scaled(-2.0)
    assert s.mean == -4.0 and abs(s.stderr - 0.6) < 1e-15
    c = a.plus(b)
    assert c.mean == 1.0
    assert abs(c.stderr - np.hypot(0.3, 0.4)) < 1e-15


def test_combined_and_within():
    a = MCEstimate(1.0, 0.1, 10, 0)
    b = MCEstimate(1.25, 0.05, 10, 0)
    assert abs(combined_se(a, b) - np.hypot(0.1, 0.05)) < 1e-15
    assert within_se(a, b, k=3.0)
    assert not within_se(a, b, k=2.0)
    # extra deterministic budget loosens the comparison
    assert within_se(a, MCEstimate(2.0, 0.05, 10, 0), k=3.0, extra=0.7)


def test_streaming_matches_two_pass():
    rng = np.random.default_rng(3)
    x = rng.exponential(1.0, size=10_000)
    sm = StreamingMoments()
    for chunk in np.array_split(x, 13):
        sm.add_chunk(chunk)
    est = sm.estimate(seed=1)
    assert est.n == x.size
    assert abs(est.mean - x.mean()) < 1e-12
    assert abs(est.stderr - x.std(ddof=1) / np.sqrt(x.size)) < 1e-12


def test_streaming_chunking_invariance():
    rng = np.random.default_rng(4)
    x = rng.normal(size=4096)
    one = StreamingMoments()
    one.add_chunk(x)
    many = StreamingMoments()
    for chunk in np.array_split(x, 37):
        many.add_chunk(chunk)
    ea, eb = one.estimate(0), many.estimate(0)
    assert abs(ea.mean - eb.mean) < 1e-13
    assert abs(ea.stderr - eb.stderr) < 1e-13


def test_stderr_shrinks_like_root_n():
    # 1/sqrt(n) law: quadrupling n should halve the stderr within 10%
    rng = np.random.default_rng(11)
    x = rng.normal(size=40_000)
    small = MCEstimate.from_samples(x[:10_000], 0)
    large = MCEstimate.from_samples(x, 0)
    assert small.stderr / large.stderr == pytest.approx(2.0, rel=0.10)
