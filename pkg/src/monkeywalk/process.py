"""Underlying Markov processes, lazily revealed runs and ergodic profiles."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special, stats

_SEED_BOUND = 2**63


def _broadcast(n, size, dtype=float):
    n = np.asarray(n, dtype=dtype)
    if size is not None:
        n = np.broadcast_to(n, (size,) if np.isscalar(size) else tuple(size))
    return n


# ---------------------------------------------------------------------------
# models

@dataclass(frozen=True)
class LazySRW:
    """Stay with probability p_lazy, else step +-1 in a uniform coordinate."""
    d: int = 1
    p_lazy: float = 0.5
    family = "lazy_srw"
    axis = "discrete"
    lattice = True
    span = 1.0

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("dimension must be >= 1")
        if not 0 < self.p_lazy < 1:
            raise ValueError("p_lazy must lie in (0,1)")

    def increments(self, rng, n):
        u = rng.random(n)
        j = rng.integers(0, 2 * self.d, size=n)
        out = np.zeros((n, self.d))
        mv = np.flatnonzero(u >= self.p_lazy)
        out[mv, j[mv] // 2] = np.where(j[mv] % 2 == 0, 1.0, -1.0)
        return out

    def displacement(self, rng, n, size=None):
        """Z(n) - Z(0) in O(1)."""
        n = _broadcast(n, size, np.int64)
        m = rng.binomial(n, 1 - self.p_lazy)
        if self.d == 1:
            out = np.asarray(2 * rng.binomial(m, 0.5) - m, dtype=float)
            return out[..., None]
        cnt = rng.multinomial(m, np.full(2 * self.d, 1 / (2 * self.d)))
        return np.asarray(cnt[..., 0::2] - cnt[..., 1::2], dtype=float)

    def to_dict(self):
        return {"family": self.family, "d": self.d, "p_lazy": self.p_lazy}


@dataclass(frozen=True)
class GenericRW:
    """i.i.d. coordinates with mean ``mean`` and sd ``sd``.

    ``law="two_point"`` puts mass 1/2 on mean +- sd (a lattice walk when both
    atoms are integers), ``law="normal"`` uses Gaussian increments.
    """
    d: int = 1
    mean: float = 0.0
    sd: float = 1.0
    law: str = "normal"
    family = "generic_rw"
    axis = "discrete"

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("dimension must be >= 1")
        if not self.sd > 0:
            raise ValueError("sd must be positive")
        if self.law not in ("normal", "two_point"):
            raise ValueError(f"unknown increment law {self.law!r}")

    @property
    def lattice(self):
        return self.law == "two_point" and float(self.mean + self.sd).is_integer() \
            and float(self.mean - self.sd).is_integer()

    @property
    def span(self):
        """Lattice spacing of the positions (None for a non-lattice walk)."""
        return 2.0 * self.sd if self.lattice else None

    def increments(self, rng, n):
        if self.law == "normal":
            return rng.normal(self.mean, self.sd, size=(n, self.d))
        s = rng.integers(0, 2, size=(n, self.d)) * 2 - 1
        return self.mean + self.sd * s

    def displacement(self, rng, n, size=None):
        n = _broadcast(n, size)
        shape = n.shape + (self.d,)
        nn = np.broadcast_to(n[..., None], shape)
        if self.law == "normal":
            return nn * self.mean + np.sqrt(nn) * self.sd * rng.standard_normal(shape)
        k = rng.binomial(nn.astype(np.int64), 0.5)
        return nn * self.mean + self.sd * (2 * k - nn)

    def to_dict(self):
        return {"family": self.family, "d": self.d, "mean": self.mean, "sd": self.sd, "law": self.law}


@dataclass(frozen=True)
class HeavyTailedRW:
    """Symmetric Pareto steps, P(|D| > u) = u^-omega for u >= 1."""
    omega: float = 1.5
    d = 1
    family = "heavy_tailed_rw"
    axis = "discrete"
    lattice = False

    def __post_init__(self):
        if not (0 < self.omega < 2) or self.omega == 1:
            raise ValueError("omega must lie in (0,1) or (1,2)")

    def increments(self, rng, n):
        mag = (1.0 - rng.random(n)) ** (-1.0 / self.omega)
        sgn = rng.integers(0, 2, size=n) * 2 - 1
        return (sgn * mag)[:, None]

    def displacement(self, rng, n, size=None):
        n = _broadcast(n, size, np.int64)
        flat = n.ravel()
        tot = int(flat.sum())
        steps = self.increments(rng, tot)[:, 0]
        ends = np.cumsum(flat)
        cs = np.concatenate(([0.0], np.cumsum(steps)))
        out = cs[ends] - cs[ends - flat]
        return out.reshape(n.shape)[..., None]

    def to_dict(self):
        return {"family": self.family, "omega": self.omega}


@dataclass(frozen=True)
class BrownianMotion:
    d: int = 1
    drift: float = 0.0
    family = "brownian"
    axis = "continuous"
    lattice = False

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("dimension must be >= 1")

    def displacement(self, rng, dt, size=None):
        dt = _broadcast(dt, size)
        shape = dt.shape + (self.d,)
        dd = np.broadcast_to(dt[..., None], shape)
        return self.drift * dd + np.sqrt(dd) * rng.standard_normal(shape)

    def to_dict(self):
        return {"family": self.family, "d": self.d, "drift": self.drift}


def process_from_dict(d):
    fam = d.get("family")
    if fam == "lazy_srw":
        return LazySRW(int(d.get("d", 1)), float(d.get("p_lazy", 0.5)))
    if fam == "generic_rw":
        return GenericRW(int(d.get("d", 1)), float(d.get("mean", 0.0)), float(d.get("sd", 1.0)),
                         d.get("law", "normal"))
    if fam == "heavy_tailed_rw":
        return HeavyTailedRW(float(d.get("omega", 1.5)))
    if fam == "brownian":
        return BrownianMotion(int(d.get("d", 1)), float(d.get("drift", 0.0)))
    raise ValueError(f"unknown process family {fam!r}")


def check_model_axis(model, axis):
    if model.axis != axis:
        if model.axis == "continuous":
            raise ValueError("Brownian motion needs the continuous time axis")
        raise ValueError("discrete-time walks need the discrete time axis")


def displacement(model, duration, rng, size=None):
    """Sample Z(duration) - Z(0) without materializing the path."""
    return model.displacement(rng, duration, size)


# ---------------------------------------------------------------------------
# runs

@dataclass
class RunRecord:
    start_time: float
    duration: float
    start: np.ndarray
    endpoint: np.ndarray
    seed: int | None = None
    offsets: list = field(default_factory=list)
    positions: list = field(default_factory=list)
    _path: np.ndarray | None = None

    @property
    def skeleton(self):
        return list(zip(self.offsets, self.positions))


def evolve_run(model, start, duration, rng):
    if not duration > 0:
        raise ValueError("duration must be positive")
    start = np.asarray(start, dtype=float).reshape(model.d)
    if model.axis == "continuous":
        end = start + model.displacement(rng, float(duration))
        return RunRecord(0.0, float(duration), start, end, None, [0.0], [start])
    if not float(duration).is_integer():
        raise ValueError("discrete walks need integer run lengths")
    seed = int(rng.integers(_SEED_BOUND))
    inc = model.increments(np.random.default_rng(seed), int(duration))
    end = start + inc.sum(axis=0)
    return RunRecord(0.0, float(duration), start, end, seed, [0.0], [start])


def position_at(model, record, offset, rng=None):
    """Process value ``offset`` time units into the run, consistent with every
    earlier query on the same record."""
    if not 0 <= offset < record.duration:
        raise ValueError("offset out of range")
    if offset == 0:
        return record.start
    if model.axis == "discrete":
        if record._path is None:
            inc = model.increments(np.random.default_rng(record.seed), int(record.duration))
            record._path = record.start + np.concatenate((np.zeros((1, model.d)), np.cumsum(inc, axis=0)))
        return record._path[int(offset)]
    offs = record.offsets
    i = int(np.searchsorted(offs, offset))
    if i < len(offs) and offs[i] == offset:
        return record.positions[i]
    a, xa = offs[i - 1], record.positions[i - 1]
    if i < len(offs):
        b, xb = offs[i], record.positions[i]
    else:
        b, xb = record.duration, record.endpoint
    # Brownian bridge between the neighbouring skeleton points; drift cancels
    w = (offset - a) / (b - a)
    var = (offset - a) * (b - offset) / (b - a)
    x = xa + w * (xb - xa) + math.sqrt(var) * rng.standard_normal(model.d)
    offs.insert(i, float(offset))
    record.positions.insert(i, x)
    return x


# ---------------------------------------------------------------------------
# ergodic profiles

@dataclass(frozen=True)
class ErgodicProfile:
    """(a_t, b_t)-ergodicity data: (Z(t) - b_t) / a_t -> law, with
    a_t = scale * t^exponent and b_t = drift * t."""
    scale: float
    exponent: float
    drift: float
    law: str = "normal"
    omega: float = 2.0
    stable_scale: float = 1.0
    d: int = 1
    lattice: bool = False

    def a(self, t):
        return self.scale * np.asarray(t, dtype=float) ** self.exponent

    def b(self, t):
        return self.drift * np.asarray(t, dtype=float)

    def f(self, x):
        return np.ones_like(np.asarray(x, dtype=float))

    def g(self, x):
        if self.law != "normal":
            return np.zeros_like(np.asarray(x, dtype=float))
        return self.drift * np.asarray(x, dtype=float) / self.scale

    def density(self, x):
        """Density of the one-dimensional limit law."""
        if self.law == "normal":
            return stats.norm.pdf(x)
        return stats.levy_stable.pdf(np.asarray(x) / self.stable_scale, self.omega, 0.0) / self.stable_scale

    def cdf(self, x):
        if self.law == "normal":
            return stats.norm.cdf(x)
        return stats.levy_stable.cdf(np.asarray(x) / self.stable_scale, self.omega, 0.0)


def stable_scale(omega):
    """Scale of the symmetric stable limit of n^(-1/omega) times a sum of
    steps with P(|D| > u) = u^-omega."""
    c = (1 - omega) / (special.gamma(2 - omega) * math.cos(math.pi * omega / 2))
    return (1.0 / c) ** (1.0 / omega)


def ergodic_profile(model):
    if isinstance(model, LazySRW):
        sig = math.sqrt((1 - model.p_lazy) / model.d)
        return ErgodicProfile(sig, 0.5, 0.0, d=model.d, lattice=True)
    if isinstance(model, GenericRW):
        return ErgodicProfile(model.sd, 0.5, model.mean, d=model.d, lattice=model.lattice)
    if isinstance(model, HeavyTailedRW):
        return ErgodicProfile(1.0, 1.0 / model.omega, 0.0, "stable", model.omega,
                              stable_scale(model.omega))
    if isinstance(model, BrownianMotion):
        return ErgodicProfile(1.0, 0.5, model.drift, d=model.d)
    raise TypeError(f"no profile for {model!r}")


def sample_stable(rng, omega, size=None):
    """Symmetric omega-stable draws with characteristic function exp(-|t|^omega)
    (Chambers-Mallows-Stuck)."""
    v = rng.uniform(-math.pi / 2, math.pi / 2, size=size)
    w = rng.standard_exponential(size=size)
    if omega == 1:
        return np.tan(v)
    return (np.sin(omega * v) / np.cos(v) ** (1 / omega)
            * (np.cos((1 - omega) * v) / w) ** ((1 - omega) / omega))


def sample_limit(profile, rng, size=None):
    """Draw from the limit law of (Z(t) - b_t) / a_t."""
    if profile.law == "normal":
        shape = (() if size is None else (size,) if np.isscalar(size) else tuple(size))
        out = rng.standard_normal(shape + ((profile.d,) if profile.d > 1 else ()))
    else:
        out = profile.stable_scale * sample_stable(rng, profile.omega, size)
    return out if np.ndim(out) else float(out)
