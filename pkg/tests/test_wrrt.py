import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from monkeywalk.kernel import Deterministic, Geometric, Mu1, Mu2, moment_summary, scaling_s
from monkeywalk.stats import ks_one_sample, ks_two_sample
from monkeywalk.wrrt import (Wrrt, bernoulli_height_law, bernoulli_height_sampler, build,
                             build_batch, coupled_pair_sampler, coupled_tree_batch, enumerate_law,
                             height_law_enumerated, increasing_trees, law_to_json, lca_heights,
                             profile, run_weights, sample_weight_proportional, time_change_sample,
                             time_change_slow, tree_codes, tree_probability)


def brute_tree_law(w, n):
    """Independent oracle: multiply attachment probabilities along every
    parent sequence with exact rational arithmetic where possible."""
    from fractions import Fraction
    w = [Fraction(x).limit_denominator(10 ** 12) for x in w]
    out = {}
    for par in itertools.product(*[range(i) for i in range(1, n)]):
        p = Fraction(1)
        for i, j in enumerate(par, start=1):
            p *= w[j] / sum(w[:i])
        out[par] = p
    return out


# ---------------------------------------------------------------------------
# build

@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(0.01, 100), min_size=1, max_size=40), st.integers(0, 2 ** 32))
def test_build_is_increasing(w, seed):
    t = build(w, len(w), np.random.default_rng(seed))
    assert t.is_increasing()
    assert len(t) == len(w)


def test_random_recursive_tree_third_node():
    par = build_batch(np.ones(3), 3, np.random.default_rng(0), 200_000)
    assert np.mean(par[:, 1] == 0) == pytest.approx(0.5, abs=0.005)
    law = enumerate_law(np.ones(3), 3)
    assert law[((0, 0), ())] == pytest.approx(0.5)


def test_dominant_weight():
    w = [1.0, 1e6, 1.0]
    par = build_batch(w, 3, np.random.default_rng(1), 100_000)
    assert np.mean(par[:, 1] == 1) == pytest.approx(1e6 / (1 + 1e6), abs=1e-4)


def test_build_matches_enumeration_n4():
    w = np.ones(4)
    law = enumerate_law(w, 4)
    par = build_batch(w, 4, np.random.default_rng(2), 10 ** 6)
    trees = sorted(t for t, _ in law)
    codes = tree_codes(np.array(trees))
    freq = np.bincount(np.searchsorted(codes, tree_codes(par)), minlength=len(trees)) / len(par)
    assert np.max(np.abs(freq - [law[(t, ())] for t in trees])) < 0.01


def test_build_rejects_bad_weights():
    rng = np.random.default_rng(0)
    with pytest.raises(ValueError):
        build([1.0, -1.0], 2, rng)
    with pytest.raises(ValueError):
        build([1.0, 0.0, 1.0], 3, rng)
    # leading zeros are the startup convention
    t = build([0.0, 0.0, 1.0, 1.0], 4, rng)
    assert t.is_increasing()


def test_leading_zero_weights_attach_uniformly():
    par = build_batch([0.0, 0.0, 1.0], 3, np.random.default_rng(3), 100_000)
    assert np.mean(par[:, 1] == 0) == pytest.approx(0.5, abs=0.01)


# ---------------------------------------------------------------------------
# weight-proportional node, profile

def test_weight_proportional_examples():
    rng = np.random.default_rng(4)
    t = build([1.0, 2.0, 3.0], 3, rng)
    x = sample_weight_proportional(t, rng, 10 ** 6)
    assert np.bincount(x, minlength=3) / 1e6 == pytest.approx([1 / 6, 1 / 3, 1 / 2], abs=0.005 / 2)
    t = build([1.0, 1.0, 1.0], 3, rng)
    x = sample_weight_proportional(t, rng, 10 ** 6)
    assert np.bincount(x, minlength=3) / 1e6 == pytest.approx([1 / 3] * 3, abs=0.005 / 3)


def test_profile_small_trees():
    t = Wrrt(np.array([-1]), np.array([2.0]), np.array([2.0]))
    h, m = profile(t)
    assert list(h) == [0] and list(m) == [1.0]
    t = Wrrt(np.array([-1, 0]), np.array([1.0, 3.0]), np.array([1.0, 4.0]))
    h, m = profile(t)
    assert list(m) == pytest.approx([0.25, 0.75])


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0.01, 10), min_size=1, max_size=30), st.integers(0, 2 ** 32))
def test_profile_is_probability(w, seed):
    _, m = profile(build(w, len(w), np.random.default_rng(seed)))
    assert m.sum() == pytest.approx(1.0)
    assert np.all(m >= 0)


# ---------------------------------------------------------------------------
# Bernoulli height decomposition

def test_bernoulli_height_examples():
    assert bernoulli_height_law(np.ones(3), 3) == pytest.approx([1 / 3, 1 / 2, 1 / 6])
    assert height_law_enumerated(np.ones(3), 3) == pytest.approx([1 / 3, 1 / 2, 1 / 6])
    w = [2.0, 5.0]
    assert bernoulli_height_law(w, 2)[1] == pytest.approx(5 / 7)


@pytest.mark.parametrize("n", [2, 3, 4, 5, 6])
@pytest.mark.parametrize("w", [np.ones(6), 0.5 ** np.arange(6), np.r_[1.0, np.full(5, 0.05)],
                               np.array([0.3, 2.0, 0.7, 5.0, 1.1, 0.2])])
def test_height_law_equivalence(w, n):
    a = height_law_enumerated(w, n)
    b = bernoulli_height_law(w, n)
    assert 0.5 * np.abs(a - b).sum() < 1e-10


def test_bernoulli_sampler_vs_law():
    w = 0.7 ** np.arange(6)
    rng = np.random.default_rng(5)
    h = np.array([bernoulli_height_sampler(w, 6, rng)[0] for _ in range(100_000)])
    assert np.bincount(h, minlength=6) / 1e5 == pytest.approx(bernoulli_height_law(w, 6), abs=0.005)
    _, flags = bernoulli_height_sampler(w, 6, rng)
    assert flags[0]


def test_bernoulli_heights_vs_built_trees_large_n():
    rng = np.random.default_rng(6)
    n = 1000
    w = rng.exponential(size=n)
    direct = []
    for _ in range(2000):
        t = build(w, n, rng)
        direct.append(t.heights()[sample_weight_proportional(t, rng)])
    bern = [bernoulli_height_sampler(w, n, rng)[0] for _ in range(2000)]
    assert ks_two_sample(direct, bern).pvalue > 1e-3


# ---------------------------------------------------------------------------
# pair coupling

def test_coupled_marginals_match_single_node_law():
    rng = np.random.default_rng(7)
    n = 1000
    w = rng.exponential(size=n)
    f = np.zeros(n)
    s = [coupled_pair_sampler(w, n, f, rng) for _ in range(3000)]
    hu = [x.height_u for x in s]
    hv = [x.height_v for x in s]
    ref = [bernoulli_height_sampler(w, n, rng)[0] for _ in range(3000)]
    assert ks_two_sample(hu, ref).pvalue > 1e-3
    assert ks_two_sample(hv, ref).pvalue > 1e-3
    assert all(x.lca_height <= min(x.height_u, x.height_v) for x in s)


@pytest.mark.parametrize("n", [3, 4])
def test_coupled_joint_law_small(n):
    w = np.array([1.0, 0.5, 2.0, 0.8, 1.3])[:n]
    law = enumerate_law(w, n, marks=2)
    par, u, v = coupled_tree_batch(w, n, np.random.default_rng(8), 400_000)
    keys = {k: i for i, k in enumerate(sorted(law))}
    idx = [keys[(tuple(p), (a, b))] for p, a, b in zip(par.tolist(), u.tolist(), v.tolist())]
    freq = np.bincount(idx, minlength=len(keys)) / len(idx)
    prob = np.array([law[k] for k in sorted(law)])
    assert np.max(np.abs(freq - prob)) < 0.01


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(0.01, 10), min_size=2, max_size=30), st.integers(0, 2 ** 32))
def test_phi_monotone_along_ancestry(w, seed):
    rng = np.random.default_rng(seed)
    n = len(w)
    f = rng.random(n)
    s = coupled_pair_sampler(w, n, f, rng)
    assert s.phi_lca <= s.phi_u + 1e-12 and s.phi_lca <= s.phi_v + 1e-12
    assert s.lca_height <= min(s.height_u, s.height_v)
    assert s.phi_u == pytest.approx(f[0] + f[1:][s.b[1:]].sum())
    t = build(w, n, rng)
    for node in range(n):
        anc = t.ancestors(node)
        phi = np.cumsum(f[anc[::-1]])
        assert np.all(np.diff(phi) >= 0)


def test_lca_stabilizes():
    # mu1(1,1) with geometric runs: W_i = L_i
    rng = np.random.default_rng(9)
    w = rng.geometric(0.5, size=10_000).astype(float)
    h = lca_heights(w, [100, 1000, 10_000], rng, 2000)
    assert np.mean(h[:, 1] != h[:, 2]) < 0.05


# ---------------------------------------------------------------------------
# enumeration oracle

def test_enumeration_examples():
    assert enumerate_law([1.0, 1.0], 2) == {((0,), ()): 1.0}
    w = [2.0, 3.0, 1.0]
    law = enumerate_law(w, 3)
    assert law[((0, 0), ())] == pytest.approx(2 / 5)
    assert law[((0, 1), ())] == pytest.approx(3 / 5)
    law = enumerate_law(np.ones(4), 4)
    assert len(law) == 6
    assert math.fsum(law.values()) == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(ValueError):
        enumerate_law(np.ones(7), 7)


@pytest.mark.parametrize("n", [2, 3, 4, 5, 6])
def test_enumeration_vs_rational_oracle(n):
    w = [0.3, 2.0, 0.7, 5.0, 1.1, 0.2]
    law = enumerate_law(w, n)
    ref = brute_tree_law(w, n)
    assert len(law) == len(ref) == math.factorial(n - 1)
    for t, p in ref.items():
        assert law[(t, ())] == pytest.approx(float(p), rel=1e-12)
    assert abs(math.fsum(law.values()) - 1) < 1e-12


def test_marked_law_sums_to_one():
    law = enumerate_law(0.5 ** np.arange(5), 5, marks=2)
    assert abs(math.fsum(law.values()) - 1) < 1e-12
    assert len(law) == 24 * 25


def test_increasing_trees_count_and_json():
    assert len(increasing_trees(5)) == 24
    j = law_to_json(enumerate_law(np.ones(3), 3, marks=1))
    assert "0,1|2" in j
    assert tree_probability(np.ones(3), (0, 1)) == pytest.approx(0.5)


# ---------------------------------------------------------------------------
# time change

def test_time_change_degenerate_runs():
    rng = np.random.default_rng(10)
    for method in ("forward", "backward"):
        for t in [1, 7, 100]:
            assert time_change_sample(Mu1(1, 1), Deterministic(1), t, rng, "discrete", method) == 0.0


def test_time_change_mean_geometric():
    rng = np.random.default_rng(11)
    t = 1e6
    s = np.array([time_change_sample(Mu1(1, 1), Geometric(0.5), t, rng, "continuous", "backward")
                  for _ in range(10_000)])
    assert s.mean() == pytest.approx(1.5 * math.log(t), rel=0.10)
    assert 1.5 * math.log(t) == pytest.approx(20.72, abs=0.01)


def test_time_change_standardized_trend_mu2():
    k, rl = Mu2(1, 0.4), Geometric(0.5)
    ms = moment_summary(rl, k, "continuous")
    rng = np.random.default_rng(12)
    d = []
    for t in [1e4, 1e6, 1e8]:
        s = np.array([time_change_sample(k, rl, t, rng, "continuous", "backward") for _ in range(4000)])
        z = (s - ms.kappa2 * scaling_s(k, t)) / math.sqrt(ms.kappa3 * scaling_s(k, t))
        d.append(ks_one_sample(z, stats.norm.cdf).statistic)
    assert d[0] > d[1] > d[2]


@pytest.mark.parametrize("axis", ["discrete", "continuous"])
def test_time_change_fast_vs_slow(axis):
    k, rl, t = Mu1(1, 1), Geometric(0.5), 1e4
    rng = np.random.default_rng(13)
    fast = [time_change_sample(k, rl, t, rng, axis, "forward") for _ in range(4000)]
    slow = [time_change_slow(k, rl, t, rng, axis) for _ in range(4000)]
    assert ks_two_sample(fast, slow).pvalue > 1e-3


def test_time_change_forward_vs_backward_mu2():
    k, rl, t = Mu2(1, 0.4), Geometric(0.5), 3e4
    rng = np.random.default_rng(14)
    a = [time_change_sample(k, rl, t, rng, "discrete", "forward") for _ in range(5000)]
    b = [time_change_sample(k, rl, t, rng, "discrete", "backward") for _ in range(5000)]
    assert ks_two_sample(a, b).pvalue > 1e-3


def test_run_weights_uniform_kernel():
    T, w = run_weights(Mu1(1, 1), np.array([3.0, 2.0, 4.0]), "continuous")
    assert list(T) == [0, 3, 5, 9]
    # mu1 vanishes on [0, 1): the first run only carries mass on [1, 3)
    assert w == pytest.approx(np.array([2.0, 2.0, 4.0]) / 4.0)
