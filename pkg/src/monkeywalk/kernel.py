"""Memory kernels, run-length laws and the closed-form weight arithmetic.

Two kernel families are supported::

    mu1(x) = (alpha / x) log(x)^(alpha - 1) exp(beta log(x)^alpha)     x >= 1
    mu2(x) = gamma delta x^(delta - 1) exp(gamma x^delta)

with cumulative mass ``mubar(x) = int_0^x mu``.  On the discrete time axis
integrals are sums, ``mubar(x) = sum_{k < x} mu(k)``.

mu2 overflows double precision once ``gamma x^delta`` exceeds ~709, so
everything the samplers touch is carried in log space.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy import integrate

AXES = ("discrete", "continuous")


def check_axis(axis):
    if axis not in AXES:
        raise ValueError(f"unknown time axis {axis!r}")
    return axis


# ---------------------------------------------------------------------------
# kernels

@dataclass(frozen=True)
class Mu1:
    alpha: float
    beta: float = 1.0
    family = "mu1"

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if not self.beta >= 0:
            raise ValueError("beta must be nonnegative")

    def to_dict(self):
        return {"family": "mu1", "alpha": float(self.alpha), "beta": float(self.beta)}


@dataclass(frozen=True)
class Mu2:
    gamma: float
    delta: float
    family = "mu2"

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")
        if not 0 < self.delta <= 0.5:
            raise ValueError("delta out of (0,1/2]")

    def to_dict(self):
        return {"family": "mu2", "gamma": float(self.gamma), "delta": float(self.delta)}


def kernel_from_dict(d):
    fam = d.get("family")
    if fam == "mu1":
        return Mu1(float(d.get("alpha", 1.0)), float(d.get("beta", 1.0)))
    if fam == "mu2":
        return Mu2(float(d.get("gamma", 1.0)), float(d.get("delta", 0.5)))
    raise ValueError(f"unknown kernel family {fam!r}")


def _log_mu_cont(kernel, x):
    """log mu(x) from the continuous formula, -inf outside the support."""
    x = np.asarray(x, dtype=float)
    out = np.full(x.shape, -np.inf)
    if isinstance(kernel, Mu1):
        a, b = kernel.alpha, kernel.beta
        pos = x > 1
        lx = np.log(x[pos])
        out[pos] = math.log(a) - lx + (a - 1) * np.log(lx) + b * lx ** a
        at1 = x == 1
        if a == 1:
            out[at1] = 0.0
        elif a < 1:
            out[at1] = np.inf
    else:
        g, d = kernel.gamma, kernel.delta
        pos = x > 0
        xp = x[pos]
        out[pos] = math.log(g * d) + (d - 1) * np.log(xp) + g * xp ** d
        out[x == 0] = np.inf
    return out


def _log_mu_disc(kernel, k):
    """log mu(k) on integer times with the conventions mu(0) = 0 and, for
    mu1 with alpha < 1, mu(1) clamped to the formula at x = e."""
    k = np.asarray(k, dtype=float)
    out = _log_mu_cont(kernel, k)
    out[k < 1] = -np.inf
    if isinstance(kernel, Mu1) and kernel.alpha < 1:
        a, b = kernel.alpha, kernel.beta
        out[k == 1] = math.log(a) - 1.0 + b
    return out


def log_kernel_value(kernel, x, axis="continuous"):
    check_axis(axis)
    f = _log_mu_disc if axis == "discrete" else _log_mu_cont
    out = f(kernel, x)
    return out if np.ndim(x) else float(out)


def kernel_value(kernel, x, axis="continuous"):
    """mu(x).  mu1 vanishes on [0, 1)."""
    check_axis(axis)
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ValueError("time must be nonnegative")
    with np.errstate(over="ignore"):
        out = np.exp(log_kernel_value(kernel, x, axis))
    return out if out.ndim else float(out)


def _log_expm1(y):
    # log(e^y - 1) for y >= 0, -inf at 0
    y = np.asarray(y, dtype=float)
    with np.errstate(divide="ignore"):
        return y + np.log(-np.expm1(-y))


def _log_exprel(z):
    """log(expm1(z) / z) for z >= 0, accurate for tiny z."""
    z = np.asarray(z, dtype=float)
    small = z < 1e-5
    with np.errstate(divide="ignore", invalid="ignore"):
        big = _log_expm1(z) - np.log(z)
    return np.where(small, np.log1p(z / 2 + z * z / 6), big)


def _log_mubar_cont(kernel, x):
    x = np.asarray(x, dtype=float)
    if isinstance(kernel, Mu1):
        lx = np.log(np.maximum(x, 1.0))
        a, b = kernel.alpha, kernel.beta
        with np.errstate(divide="ignore"):
            if b == 0:
                return a * np.log(lx)
            # log(expm1(b u) / b) = log u + log exprel(b u), u = log(x)^a
            return a * np.log(lx) + _log_exprel(b * lx ** a)
    return _log_expm1(kernel.gamma * np.maximum(x, 0.0) ** kernel.delta)


def _inverse_log_cont(kernel, ly):
    """Algebraic inverse of the closed-form mubar, argument in log space."""
    ly = np.asarray(ly, dtype=float)
    if isinstance(kernel, Mu1):
        a, b = kernel.alpha, kernel.beta
        if b == 0:
            lx = np.exp(ly / a)
        else:
            # u = log1p(b y) / b, by series when b y is tiny
            lz = ly + math.log(b)
            with np.errstate(over="ignore", invalid="ignore"):
                z = np.exp(np.minimum(lz, 0.0))
                u = np.where(lz < math.log(1e-5), np.exp(ly) * (1 - z / 2 + z * z / 3),
                             np.logaddexp(0.0, lz) / b)
            lx = u ** (1.0 / a)
        return np.exp(lx)
    return (np.logaddexp(0.0, ly) / kernel.gamma) ** (1.0 / kernel.delta)


class DiscreteTable:
    """Cached partial sums of mu over integer times.

    ``cum[x] = sum_{k<x} mu(k)`` is accumulated sequentially, so it equals the
    literal left-to-right sum.  ``log_cum`` is the overflow-safe twin used by
    the samplers.
    """

    def __init__(self, kernel):
        self.kernel = kernel
        self.log_mu = np.empty(0)
        self.cum = np.zeros(1)
        self.log_cum = np.full(1, -np.inf)

    @property
    def size(self):
        return len(self.log_mu)

    def ensure(self, n):
        """Make sure cum[0..n] is available."""
        n = int(n)
        if n <= self.size:
            return self
        new = max(n, 2 * self.size, 1024)
        k = np.arange(self.size, new, dtype=float)
        lm = _log_mu_disc(self.kernel, k)
        with np.errstate(over="ignore"):
            cum = np.cumsum(np.concatenate(([self.cum[-1]], np.exp(lm))))
        lcum = np.logaddexp.accumulate(np.concatenate(([self.log_cum[-1]], lm)))
        self.log_mu = np.concatenate((self.log_mu, lm))
        self.cum = np.concatenate((self.cum[:-1], cum))
        self.log_cum = np.concatenate((self.log_cum[:-1], lcum))
        return self


_TABLES: dict = {}


def discrete_table(kernel, n=0):
    tab = _TABLES.get(kernel)
    if tab is None:
        tab = _TABLES[kernel] = DiscreteTable(kernel)
    return tab.ensure(n)


def _as_index(x):
    x = np.asarray(x, dtype=float)
    return np.ceil(x).astype(np.int64)


def log_kernel_cumulative(kernel, x, axis="continuous"):
    """log mubar(x); -inf where mubar vanishes."""
    check_axis(axis)
    if axis == "continuous":
        out = _log_mubar_cont(kernel, x)
    else:
        idx = _as_index(x)
        tab = discrete_table(kernel, int(np.max(idx, initial=0)))
        out = tab.log_cum[idx]
    return out if np.ndim(x) else float(out)


def kernel_cumulative(kernel, x, axis="continuous"):
    """mubar(x) = int_0^x mu (a sum over k < x on the discrete axis)."""
    check_axis(axis)
    xa = np.asarray(x, dtype=float)
    if np.any(xa < 0):
        raise ValueError("time must be nonnegative")
    if axis == "discrete":
        idx = _as_index(xa)
        out = discrete_table(kernel, int(np.max(idx, initial=0))).cum[idx]
    elif isinstance(kernel, Mu1):
        lx = np.log(np.maximum(xa, 1.0))
        a, b = kernel.alpha, kernel.beta
        u = lx ** a
        z = b * u
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            out = np.where(z < 1e-5, u * (1 + z / 2 + z * z / 6), np.expm1(z) / b)
    else:
        with np.errstate(over="ignore"):
            out = np.expm1(kernel.gamma * xa ** kernel.delta)
    return out if np.ndim(x) else float(out)


def support_edge(kernel, axis="continuous"):
    """Smallest time at which mubar starts to grow."""
    if axis == "discrete" or isinstance(kernel, Mu1):
        return 1.0
    return 0.0


def kernel_cumulative_inverse(kernel, y, axis="continuous"):
    """Continuous: the x in the support with mubar(x) = y.
    Discrete: the smallest integer x >= support edge with mubar(x) >= y."""
    check_axis(axis)
    ya = np.asarray(y, dtype=float)
    if np.any(ya < 0):
        raise ValueError("y must be nonnegative")
    with np.errstate(divide="ignore"):
        ly = np.log(ya)
    if axis == "continuous":
        out = _inverse_log_cont(kernel, ly)
    else:
        out = _discrete_inverse_log(kernel, ly)
    return out if out.ndim else float(out)


def _discrete_inverse_log(kernel, ly):
    ly = np.atleast_1d(np.asarray(ly, dtype=float))
    tab = discrete_table(kernel)
    while np.any(ly > tab.log_cum[-1]):
        tab.ensure(max(2 * tab.size, 1024))
    out = np.searchsorted(tab.log_cum, ly, side="left").astype(float)
    return np.maximum(out, 1.0)


def scaling_s(kernel, x):
    """The deterministic clock s(x)."""
    x = np.asarray(x, dtype=float)
    if isinstance(kernel, Mu1):
        if kernel.beta == 0:
            if np.any(x <= math.e):
                raise ValueError("s(x) for mu1 with beta=0 needs x > e")
            out = kernel.alpha * np.log(np.log(x))
        else:
            if np.any(x <= 1):
                raise ValueError("s(x) for mu1 needs x > 1")
            # log mubar(x) grows like beta log(x)^alpha, hence the factor beta
            out = kernel.beta * np.log(x) ** kernel.alpha
    else:
        if np.any(x <= 0):
            raise ValueError("s(x) needs x > 0")
        out = kernel.gamma * x ** kernel.delta
    return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# run-length laws

@dataclass(frozen=True)
class Geometric:
    q: float
    family = "geometric"
    integer = True
    finite_eighth_moment = True

    def __post_init__(self):
        if not 0 < self.q < 1:
            raise ValueError("q must lie in (0,1)")

    def moment(self, i):
        q = self.q
        return {1: 1 / q, 2: (2 - q) / q**2, 3: (q * q - 6 * q + 6) / q**3}[i]

    def sample(self, rng, size=None):
        out = rng.geometric(self.q, size=size)
        return float(out) if size is None else out.astype(float)

    def to_dict(self):
        return {"family": "geometric", "q": float(self.q)}


@dataclass(frozen=True)
class Deterministic:
    c: float
    family = "deterministic"
    finite_eighth_moment = True

    def __post_init__(self):
        if not self.c > 0:
            raise ValueError("c must be positive")

    @property
    def integer(self):
        return float(self.c).is_integer()

    def moment(self, i):
        return float(self.c) ** i

    def sample(self, rng, size=None):
        if size is None:
            return float(self.c)
        return np.full(size, float(self.c))

    def to_dict(self):
        return {"family": "deterministic", "c": float(self.c)}


@dataclass(frozen=True)
class DiscreteUniform:
    k: int
    family = "discrete_uniform"
    integer = True
    finite_eighth_moment = True

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 1:
            raise ValueError("k must be a positive integer")

    def moment(self, i):
        j = np.arange(1, int(self.k) + 1, dtype=float)
        return float(np.mean(j**i))

    def sample(self, rng, size=None):
        out = rng.integers(1, int(self.k) + 1, size=size)
        return float(out) if size is None else out.astype(float)

    def to_dict(self):
        return {"family": "discrete_uniform", "k": int(self.k)}


@dataclass(frozen=True)
class Exponential:
    rate: float
    family = "exponential"
    integer = False
    finite_eighth_moment = True

    def __post_init__(self):
        if not self.rate > 0:
            raise ValueError("rate must be positive")

    def moment(self, i):
        return math.factorial(i) / self.rate**i

    def sample(self, rng, size=None):
        return rng.exponential(1 / self.rate, size=size)

    def to_dict(self):
        return {"family": "exponential", "rate": float(self.rate)}


def runlen_from_dict(d):
    fam = d.get("family")
    if fam == "geometric":
        return Geometric(float(d["q"]))
    if fam == "deterministic":
        return Deterministic(float(d["c"]))
    if fam == "discrete_uniform":
        return DiscreteUniform(int(d["k"]))
    if fam == "exponential":
        return Exponential(float(d["rate"]))
    raise ValueError(f"unknown run-length family {fam!r}")


def check_runlen_axis(dist, axis):
    if axis == "discrete" and not dist.integer:
        raise ValueError(f"{dist.family} run lengths need integer values on the discrete axis")


def sample_run_length(dist, rng, size=None):
    return dist.sample(rng, size)


# ---------------------------------------------------------------------------
# moment summaries

@dataclass(frozen=True)
class MomentSummary:
    kappa2: float
    kappa3: float
    hat_kappa2: float
    hat_kappa3: float
    mean: float
    axis: str = "continuous"


def offset_moment(dist, ell, axis="continuous"):
    """E[int_0^L u^(ell-1) du] (a sum over k < L on the discrete axis)."""
    m = dist.moment
    if axis == "continuous":
        return m(ell) / ell
    if ell == 2:
        return (m(2) - m(1)) / 2
    if ell == 3:
        return (2 * m(3) - 3 * m(2) + m(1)) / 6
    raise ValueError("ell must be 2 or 3")


def moment_summary(dist, kernel, axis="continuous"):
    """kappa_i = E L^i / (i E L) and the mu2-adjusted hat versions.

    On the discrete axis the within-run offset F is uniform on {0,..,L-1}
    rather than [0, L), and ``axis="discrete"`` returns the constants that
    actually govern the discrete process: E[sum_{k<L} k^(i-1)] / E L.
    """
    check_axis(axis)
    el = dist.moment(1)
    k2 = offset_moment(dist, 2, axis) / el
    k3 = offset_moment(dist, 3, axis) / el
    if isinstance(kernel, Mu2):
        f = el ** kernel.delta
        return MomentSummary(k2, k3, k2 * f, k3 * f, el, axis)
    return MomentSummary(k2, k3, k2, k3, el, axis)


def branch_scale(dist, kernel):
    """Mean height of a weight-proportional node is this times s(n)."""
    if isinstance(kernel, Mu2):
        return dist.moment(1) ** kernel.delta
    return 1.0


# ---------------------------------------------------------------------------
# weights and the two relocation stages

def log_run_weight(kernel, t_prev, run_len, axis="continuous"):
    a = log_kernel_cumulative(kernel, t_prev, axis)
    b = log_kernel_cumulative(kernel, np.asarray(t_prev) + run_len, axis)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(b > a, b + np.log(-np.expm1(np.minimum(a - b, 0.0))), -np.inf)
    return out if out.ndim else float(out)


def run_weight(kernel, t_prev, run_len, axis="continuous"):
    """W = mubar(t_prev + L) - mubar(t_prev); 0 for runs inside the zero region."""
    if np.any(np.asarray(run_len) <= 0):
        raise ValueError("run_len must be positive")
    if axis == "discrete":
        a = kernel_cumulative(kernel, t_prev, axis)
        b = kernel_cumulative(kernel, np.asarray(t_prev) + run_len, axis)
        if np.all(np.isfinite(b)):
            return b - a
    with np.errstate(over="ignore"):
        return np.exp(log_run_weight(kernel, t_prev, run_len, axis))


def within_run_quantile(kernel, t_prev, run_len, u, axis="continuous"):
    """Offset F in [0, L) with P(F <= x) proportional to mubar(t_prev + x) - mubar(t_prev)."""
    check_axis(axis)
    lw = log_run_weight(kernel, t_prev, run_len, axis)
    if lw == -np.inf:
        raise ValueError("run has zero weight")
    if axis == "discrete":
        k = np.arange(int(t_prev), int(t_prev + run_len), dtype=float)
        lm = _log_mu_disc(kernel, k)
        w = np.exp(lm - lm.max())
        c = np.cumsum(w)
        return float(min(np.searchsorted(c, u * c[-1], side="right"), len(k) - 1))
    la = log_kernel_cumulative(kernel, t_prev, axis)
    with np.errstate(divide="ignore"):
        ly = np.logaddexp(la, math.log(u) + lw) if u > 0 else la
    if ly == -np.inf:
        x = support_edge(kernel, axis)
    else:
        x = float(_inverse_log_cont(kernel, ly))
    return float(min(max(x - t_prev, 0.0), np.nextafter(run_len, 0)))


def sample_within_run(kernel, t_prev, run_len, rng, axis="continuous"):
    return within_run_quantile(kernel, t_prev, run_len, rng.random(), axis)


def relocation_quantile(kernel, t_now, u, axis="continuous"):
    """R in [0, t_now) with P(R <= x) = mubar(x) / mubar(t_now).

    On the discrete axis P(R = k) is proportional to mu(k) for k < t_now.
    """
    check_axis(axis)
    lt = log_kernel_cumulative(kernel, t_now, axis)
    if lt == -np.inf:
        raise ValueError("no kernel mass before t_now")
    with np.errstate(divide="ignore"):
        ly = math.log(u) + lt if u > 0 else -np.inf
    if axis == "discrete":
        tab = discrete_table(kernel, int(math.ceil(t_now)))
        return float(np.searchsorted(tab.log_cum, ly, side="right") - 1)
    if ly == -np.inf:
        return support_edge(kernel, axis)
    return float(min(_inverse_log_cont(kernel, ly), np.nextafter(t_now, 0)))


def sample_relocation_time(kernel, t_now, rng, axis="continuous"):
    return relocation_quantile(kernel, t_now, rng.random(), axis)


# ---------------------------------------------------------------------------
# within-run moment diagnostic

class MomentDiagnostic(NamedTuple):
    lhs: float
    approx: float
    bound: float
    relative_error: float


def _log_mu_ratio_m1(kernel, T, u):
    # log mu(T+u) - log mu(T), cancellation-free
    a, b = kernel.alpha, kernel.beta
    lT = math.log(T)
    r = math.log1p(u / T)
    out = -r + (a - 1) * math.log1p(r / lT)
    if b:
        out += b * lT**a * math.expm1(a * math.log1p(r / lT))
    return out


def _log_mu_ratio_m2(kernel, T, u):
    g, d = kernel.gamma, kernel.delta
    r = math.log1p(u / T)
    return (d - 1) * r + g * T**d * math.expm1(d * r)


def run_moment_diagnostic(kernel, t_prev, run_len, ell):
    """Compare W E[F^(ell-1)] = int_0^L u^(ell-1) mu(T+u) du with mu(T) L^ell / ell.

    ``bound`` is |lhs - approx| / mu(T) rescaled by the expected error
    envelope (L^(ell+1) (log T)^(a-1) / T for mu1, L^(ell+1) / T^(1-delta)
    for mu2); it should stay bounded as T grows.
    """
    if ell < 2:
        raise ValueError("ell must be >= 2")
    T, L = float(t_prev), float(run_len)
    if T <= 1:
        raise ValueError("t_prev must exceed 1")
    ratio = _log_mu_ratio_m1 if isinstance(kernel, Mu1) else _log_mu_ratio_m2
    # int u^(ell-1) (mu(T+u)/mu(T) - 1) du
    if isinstance(kernel, Mu1) and kernel.alpha == 1 and kernel.beta == 1:
        dev = 0.0   # mu is constant past 1: the integrand is pure roundoff
    else:
        dev, _ = integrate.quad(lambda u: u ** (ell - 1) * math.expm1(ratio(kernel, T, u)),
                                0.0, L, epsabs=1e-22 * L**ell, epsrel=1e-13, limit=200)
    base = L**ell / ell
    mu_t = float(kernel_value(kernel, T))
    if isinstance(kernel, Mu1):
        at = max(1.0, kernel.alpha)
        env = L ** (ell + 1) * math.log(T) ** (at - 1) / T
    else:
        env = L ** (ell + 1) / T ** (1 - kernel.delta)
    with np.errstate(over="ignore"):
        lhs, approx = mu_t * (base + dev), mu_t * base
    return MomentDiagnostic(lhs, approx, abs(dev) / env, abs(dev) / base)
