import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from monkeywalk.process import (BrownianMotion, GenericRW, HeavyTailedRW, LazySRW, ergodic_profile,
                                evolve_run, position_at, process_from_dict, sample_limit,
                                stable_scale)
from monkeywalk.stats import ks_one_sample, ks_two_sample


def lazy_step_law(d, p):
    """Exact one-step law of the lazy walk as {displacement tuple: Fraction}."""
    p = Fraction(p)
    law = {(0,) * d: p}
    for j in range(d):
        for s in (1, -1):
            e = [0] * d
            e[j] = s
            law[tuple(e)] = (1 - p) / (2 * d)
    return law


def convolve(a, b):
    out = {}
    for x, p in a.items():
        for y, q in b.items():
            z = tuple(i + j for i, j in zip(x, y))
            out[z] = out.get(z, 0) + p * q
    return out


def test_lazy_one_step_law():
    rng = np.random.default_rng(0)
    rec = [evolve_run(LazySRW(1, 0.5), [0.0], 1, rng).endpoint[0] for _ in range(40_000)]
    vals, cnt = np.unique(rec, return_counts=True)
    assert list(vals) == [-1, 0, 1]
    assert cnt / cnt.sum() == pytest.approx([0.25, 0.5, 0.25], abs=0.01)


@pytest.mark.parametrize("d,p", [(1, 0.5), (2, 0.3), (3, 0.5)])
def test_lazy_per_coordinate_variance(d, p):
    law = lazy_step_law(d, Fraction(p).limit_denominator())
    var = sum(q * x[0] ** 2 for x, q in law.items())
    assert float(var) == pytest.approx((1 - p) / d)
    assert ergodic_profile(LazySRW(d, p)).scale ** 2 == pytest.approx((1 - p) / d)


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_lazy_endpoint_law_matches_enumeration(n):
    # exact n-fold convolution in rationals against the O(1) displacement sampler
    m = LazySRW(2, 0.5)
    law = {(0, 0): Fraction(1)}
    for _ in range(n):
        law = convolve(law, lazy_step_law(2, Fraction(1, 2)))
    assert sum(law.values()) == 1
    rng = np.random.default_rng(n)
    x = m.displacement(rng, n, size=200_000).astype(int)
    keys, cnt = np.unique(x, axis=0, return_counts=True)
    emp = {tuple(k): c / len(x) for k, c in zip(keys, cnt)}
    tv = 0.5 * sum(abs(emp.get(k, 0) - float(law.get(k, 0))) for k in set(emp) | set(law))
    assert tv < 1e-2
    # and the replayed increments of a run
    ends = np.array([evolve_run(m, [0, 0], n, rng).endpoint for _ in range(20_000)]).astype(int)
    keys, cnt = np.unique(ends, axis=0, return_counts=True)
    emp = {tuple(k): c / len(ends) for k, c in zip(keys, cnt)}
    tv = 0.5 * sum(abs(emp.get(k, 0) - float(law.get(k, 0))) for k in set(emp) | set(law))
    assert tv < 2e-2


def test_brownian_endpoint_moments():
    rng = np.random.default_rng(1)
    m = BrownianMotion(1, 0.0)
    x = m.displacement(rng, 3.0, size=100_000)[:, 0]
    assert abs(x.mean()) < 0.02 * math.sqrt(3)
    assert x.var() == pytest.approx(3.0, rel=0.02)


def test_skeleton_starts_at_zero():
    rng = np.random.default_rng(2)
    for m, L in [(LazySRW(2), 5), (BrownianMotion(1), 2.5), (HeavyTailedRW(1.5), 3)]:
        rec = evolve_run(m, np.zeros(m.d), L, rng)
        assert rec.skeleton[0][0] == 0.0


def test_evolve_run_rejects_bad_duration():
    rng = np.random.default_rng(0)
    with pytest.raises(ValueError):
        evolve_run(LazySRW(1), [0.0], 0, rng)
    with pytest.raises(ValueError):
        evolve_run(LazySRW(1), [0.0], 1.5, rng)


def test_position_at_offset_zero_is_start():
    rng = np.random.default_rng(3)
    for m in [LazySRW(1), BrownianMotion(2)]:
        start = np.arange(m.d, dtype=float) + 7
        rec = evolve_run(m, start, 4, rng)
        assert np.array_equal(position_at(m, rec, 0, rng), start)


def test_position_at_out_of_range():
    rng = np.random.default_rng(3)
    rec = evolve_run(LazySRW(1), [0.0], 4, rng)
    with pytest.raises(ValueError):
        position_at(LazySRW(1), rec, 4, rng)


def test_replay_determinism():
    m = LazySRW(1)
    a = evolve_run(m, [0.0], 50, np.random.default_rng(9))
    b = evolve_run(m, [0.0], 50, np.random.default_rng(9))
    late_then_early = (position_at(m, a, 30), position_at(m, a, 10))
    early = position_at(m, b, 10)
    assert np.array_equal(late_then_early[1], early)
    assert np.array_equal(position_at(m, a, 30), late_then_early[0])
    # the replayed path ends where the run ends
    assert np.array_equal(a._path[-1], a.endpoint)


def test_brownian_bridge_midpoint_law():
    # skeleton {(0,0),(4,0)}, query at 2: Normal(0, 2*2/4) = Normal(0, 1)
    m = BrownianMotion(1)
    rng = np.random.default_rng(4)
    vals = []
    for _ in range(20_000):
        rec = evolve_run(m, [0.0], 4.0, rng)
        rec.endpoint = np.zeros(1)
        vals.append(position_at(m, rec, 2.0, rng)[0])
    assert ks_one_sample(np.array(vals), stats.norm.cdf).pvalue > 1e-3


def test_bridge_consistency_with_two_step_simulation():
    m = BrownianMotion(1, 0.5)
    rng = np.random.default_rng(5)
    n = 20_000
    mid, end = np.empty(n), np.empty(n)
    for i in range(n):
        rec = evolve_run(m, [0.0], 3.0, rng)
        mid[i] = position_at(m, rec, 1.0, rng)[0]
        end[i] = rec.endpoint[0]
        # repeated query returns the inserted skeleton point
        assert position_at(m, rec, 1.0, rng)[0] == mid[i]
    direct_mid = 0.5 * 1.0 + rng.standard_normal(n)
    direct_end = direct_mid + 0.5 * 2.0 + math.sqrt(2.0) * rng.standard_normal(n)
    assert ks_two_sample(mid, direct_mid).statistic < 0.02
    assert ks_two_sample(end, direct_end).statistic < 0.02
    assert ks_two_sample(end - mid, direct_end - direct_mid).statistic < 0.02


def test_ergodic_profiles():
    p = ergodic_profile(GenericRW(1, 0.0, 1.0))
    assert float(p.a(100)) == pytest.approx(10.0)
    assert float(p.b(100)) == 0.0
    assert float(p.f(3.0)) == 1.0 and float(p.g(3.0)) == 0.0
    p = ergodic_profile(GenericRW(1, 0.3, 2.0))
    assert float(p.g(1.0)) == pytest.approx(0.15)
    assert float(ergodic_profile(BrownianMotion(1, 2.0)).b(5.0)) == 10.0
    p = ergodic_profile(HeavyTailedRW(1.5))
    assert float(p.a(1000.0)) == pytest.approx(100.0)
    assert float(p.g(2.0)) == 0.0


def test_sample_limit_normal():
    rng = np.random.default_rng(6)
    x = sample_limit(ergodic_profile(LazySRW(1)), rng, 10 ** 6)
    assert abs(x.mean()) < 3e-3
    y = sample_limit(ergodic_profile(LazySRW(2)), rng, 10 ** 6)
    assert y.shape == (10 ** 6, 2)
    assert abs(np.corrcoef(y.T)[0, 1]) < 0.01


def test_sample_limit_stable_tail():
    rng = np.random.default_rng(7)
    x = np.abs(sample_limit(ergodic_profile(HeavyTailedRW(1.5)), rng, 2 * 10 ** 6))
    u = np.logspace(1, 3, 9)
    tail = np.array([(x > v).mean() for v in u])
    slope = np.polyfit(np.log(u), np.log(tail), 1)[0]
    assert slope == pytest.approx(-1.5, rel=0.10)


def test_stable_scale_against_scipy():
    # n^(-2/3) times a sum of n Pareto steps vs the scaled stable law
    rng = np.random.default_rng(8)
    m = HeavyTailedRW(1.5)
    x = m.displacement(rng, 2000, size=4000)[:, 0] / 2000 ** (1 / 1.5)
    sig = stable_scale(1.5)
    res = ks_one_sample(x, lambda v: stats.levy_stable.cdf(v / sig, 1.5, 0.0))
    assert res.pvalue > 1e-3


def test_process_from_dict_roundtrip():
    for m in [LazySRW(2, 0.3), GenericRW(1, 0.3, 1.0), HeavyTailedRW(1.5), BrownianMotion(2, 0.1)]:
        assert process_from_dict(m.to_dict()) == m
    with pytest.raises(ValueError):
        process_from_dict({"family": "nope"})


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 4), st.floats(0.05, 0.95), st.integers(1, 60), st.integers(0, 2 ** 32))
def test_lazy_increments_are_unit_steps(d, p, n, seed):
    inc = LazySRW(d, p).increments(np.random.default_rng(seed), n)
    assert inc.shape == (n, d)
    assert np.all(np.abs(inc).sum(axis=1) <= 1)
