"""Empirical distributions, Kolmogorov-Smirnov statistics and the limit law
f(Omega) Gamma + g(Omega) of the monkey walk."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .process import sample_limit


@dataclass
class EmpiricalSample:
    values: np.ndarray
    weights: np.ndarray | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.size == 0:
            raise ValueError("empty sample")
        if self.weights is not None:
            w = np.asarray(self.weights, dtype=float)
            if w.shape != self.values.shape[:1] or np.any(w < 0) or not w.sum() > 0:
                raise ValueError("weights must be nonnegative, not all zero, one per value")
            self.weights = w / w.sum()
        self._sorted = None

    def __len__(self):
        return len(self.values)

    def sorted(self):
        """(distinct values, cumulative mass at each) for 1-d samples."""
        if self._sorted is None:
            order = np.argsort(self.values, kind="mergesort")
            v = self.values[order]
            w = (np.full(len(v), 1.0 / len(v)) if self.weights is None else self.weights[order])
            last = np.r_[v[1:] != v[:-1], True]
            self._sorted = (v[last], np.cumsum(w)[last])
        return self._sorted

    def cdf(self, x):
        v, c = self.sorted()
        i = np.searchsorted(v, x, side="right")
        return np.where(i > 0, c[np.maximum(i - 1, 0)], 0.0)

    def mean(self):
        return float(np.average(self.values, weights=self.weights, axis=0)) if self.values.ndim == 1 \
            else np.average(self.values, weights=self.weights, axis=0)

    def sample(self, rng, size=None):
        p = None if self.weights is None else self.weights
        idx = rng.choice(len(self.values), size=size, p=p)
        return self.values[idx]


@dataclass(frozen=True)
class KsResult:
    statistic: float
    n: int
    m: int | None
    pvalue: float

    def to_dict(self):
        return {"D": self.statistic, "n": self.n, "m": self.m, "p": self.pvalue}


def _as_values(x):
    return x.values if isinstance(x, EmpiricalSample) else np.asarray(x, dtype=float)


def kolmogorov_distance(sample, cdf):
    """sup_x |F_sample(x) - cdf(x)| for a (possibly weighted, possibly atomic)
    sample against a continuous cdf; both sides of every atom are checked."""
    s = sample if isinstance(sample, EmpiricalSample) else EmpiricalSample(sample)
    v, c = s.sorted()
    f = np.asarray(cdf(v), dtype=float)
    before = np.r_[0.0, c[:-1]]
    return float(max(np.max(np.abs(c - f)), np.max(np.abs(f - before))))


def ks_one_sample(sample, cdf):
    x = _as_values(sample)
    if x.size == 0:
        raise ValueError("empty sample")
    d = kolmogorov_distance(EmpiricalSample(x), cdf)
    return KsResult(d, x.size, None, float(special.kolmogorov(math.sqrt(x.size) * d)))


def ks_two_sample(a, b):
    """Two-sample KS statistic by a merge scan over the pooled sample."""
    x = np.sort(_as_values(a))
    y = np.sort(_as_values(b))
    if x.size == 0 or y.size == 0:
        raise ValueError("empty sample")
    pooled = np.concatenate((x, y))
    fx = np.searchsorted(x, pooled, side="right") / x.size
    fy = np.searchsorted(y, pooled, side="right") / y.size
    d = float(np.max(np.abs(fx - fy)))
    en = math.sqrt(x.size * y.size / (x.size + y.size))
    return KsResult(d, x.size, y.size, float(special.kolmogorov(en * d)))


def ks_critical(n, m=None, level=0.01):
    """Asymptotic critical value of the (two-sample) KS statistic."""
    c = float(special.kolmogi(level))
    en = n if m is None else n * m / (n + m)
    return c / math.sqrt(en)


def limit_mixture_sampler(profile, moments, rng, size=None):
    """f(Omega) Gamma + g(Omega) with Omega ~ N(0, kappa3/kappa2) and Gamma ~ gamma
    independent.  Only the first coordinate is returned in d > 1."""
    omega = rng.normal(0.0, math.sqrt(moments.kappa3 / moments.kappa2), size=size)
    gam = sample_limit(profile, rng, size)
    if profile.d > 1:
        gam = gam[..., 0]
    return profile.f(omega) * gam + profile.g(omega)


def standardize(x, profile, moments, s):
    """(x - b_{kappa2 s}) / a_{kappa2 s}."""
    tau = moments.kappa2 * s
    return (np.asarray(x, dtype=float) - profile.b(tau)) / profile.a(tau)
