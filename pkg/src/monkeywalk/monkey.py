"""The monkey process: runs of an underlying walk glued together by
relocations to past times chosen with density proportional to mu.

Two families of simulators live here.

* ``simulate`` is the reference implementation: runs are kept as lazily
  revealed ``RunRecord`` objects and relocation picks a run through a
  Fenwick tree over run weights, then an offset inside that run.
* ``sample_positions`` / ``sample_path`` / ``sample_time_change`` call the
  compiled engines in ``_engines`` and are what the experiments use at
  large horizons.
"""
from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field

import numpy as np

from . import _engines
from ._flat import kernel_codes, kernel_table, process_codes, runlen_codes
from .kernel import (DiscreteUniform, check_axis, check_runlen_axis, log_kernel_cumulative,
                     log_kernel_value, log_run_weight, within_run_quantile)
from .parallel import map_replicas
from .process import check_model_axis, evolve_run, position_at
from .stats import EmpiricalSample
from .wrrt import time_change_sample


@dataclass(frozen=True)
class MonkeyModel:
    kernel: object
    runlen: object
    process: object
    axis: str = "discrete"
    x0: tuple | None = None

    def __post_init__(self):
        check_axis(self.axis)
        check_model_axis(self.process, self.axis)
        check_runlen_axis(self.runlen, self.axis)
        if self.x0 is not None and len(self.x0) != self.process.d:
            raise ValueError("x0 has the wrong dimension")

    @property
    def d(self):
        return self.process.d

    def start(self):
        return np.zeros(self.d) if self.x0 is None else np.asarray(self.x0, dtype=float)

    def to_dict(self):
        return {"axis": self.axis, "kernel": self.kernel.to_dict(), "runlen": self.runlen.to_dict(),
                "process": self.process.to_dict(),
                "x0": None if self.x0 is None else [float(v) for v in self.x0]}


# ---------------------------------------------------------------------------
# compiled samplers, one replica per call

def sample_path(model, horizon, rng):
    """X(0), ..., X(horizon) on the discrete axis, shape (horizon + 1, d)."""
    if model.axis != "discrete":
        raise ValueError("full paths are only available on the discrete axis")
    kc, ka, kb = kernel_codes(model.kernel)
    rc, rp = runlen_codes(model.runlen)
    pc, d, p1, p2 = process_codes(model.process)
    lin, tab = kernel_table(model.kernel, model.axis, horizon)
    return _engines.path_engine(rng, int(horizon), model.start(), lin, kc, ka, kb, tab, rc, rp, pc, d, p1, p2)


def sample_probes(model, probes, rng, method="auto"):
    """Positions at the (sorted) probe times for one replica, shape (m, d)."""
    probes = np.asarray(probes, dtype=float)
    if np.any(np.diff(probes) <= 0) or probes[0] < 0:
        raise ValueError("probe times must be nonnegative and strictly increasing")
    horizon = float(probes[-1])
    method = _pick_method(model, method)
    if method == "path":
        path = sample_path(model, horizon, rng)
        return path[probes.astype(np.int64)]
    if method == "sweep":
        kc, ka, kb = kernel_codes(model.kernel)
        rc, rp = runlen_codes(model.runlen)
        pc, d, p1, p2 = process_codes(model.process)
        lin, tab = kernel_table(model.kernel, model.axis, horizon)
        return _engines.sweep_engine(rng, probes, model.start(), model.axis == "discrete", lin, kc, ka, kb,
                                     tab, rc, rp, model.runlen.moment(1), pc, d, p1, p2)
    if method == "timechange":
        return np.stack([model.start() + model.process.displacement(rng, sample_time_change(model, p, rng))
                         for p in probes])
    if method == "reference":
        return simulate(model, horizon, probes, rng).positions
    raise ValueError(f"unknown method {method!r}")


def _pick_method(model, method):
    return "sweep" if method == "auto" else method


def sample_time_change(model, t, rng, method="auto"):
    """One draw of S(t), the random time with X(t) equal in law to Z(S(t))."""
    if method == "auto":
        method = "forward" if isinstance(model.runlen, DiscreteUniform) else "backward"
    return time_change_sample(model.kernel, model.runlen, t, rng, model.axis, method)


def _positions_task(payload, rng):
    model, probes, method = payload
    return sample_probes(model, probes, rng, method)


def sample_positions(model, probes, replicas, seed, workers=1, method="auto"):
    """Positions at the probe times for many replicas, shape (replicas, m, d)."""
    res = map_replicas(_positions_task, (model, np.asarray(probes, dtype=float), method),
                       replicas, seed, workers)
    return np.stack(res)


def _time_change_task(payload, rng):
    model, times, method = payload
    return np.array([sample_time_change(model, t, rng, method) for t in times])


def sample_time_changes(model, times, replicas, seed, workers=1, method="auto"):
    """S(t) for each t in ``times`` (independent draws), shape (replicas, len(times))."""
    res = map_replicas(_time_change_task, (model, np.atleast_1d(np.asarray(times, dtype=float)), method),
                       replicas, seed, workers)
    return np.stack(res)


def _composed_task(payload, rng):
    model, times, method = payload
    s = np.array([sample_time_change(model, t, rng, method) for t in times])
    return model.start() + model.process.displacement(rng, s)


def sample_composed(model, times, replicas, seed, workers=1, method="auto"):
    """Z(S(t)) draws, shape (replicas, len(times), d)."""
    res = map_replicas(_composed_task, (model, np.atleast_1d(np.asarray(times, dtype=float)), method),
                       replicas, seed, workers)
    return np.stack(res)


# ---------------------------------------------------------------------------
# reference simulator

class Fenwick:
    """Append-only binary indexed tree over nonnegative weights."""

    def __init__(self):
        self.tree = [0.0]
        self.vals = []

    def __len__(self):
        return len(self.vals)

    def append(self, w):
        self.vals.append(float(w))
        i = len(self.vals)
        s = float(w)
        low = i & -i
        j = i - 1
        while j > i - low:
            s += self.tree[j]
            j -= j & -j
        self.tree.append(s)

    def prefix(self, i):
        """Sum of the first i weights."""
        s = 0.0
        while i > 0:
            s += self.tree[i]
            i -= i & -i
        return s

    @property
    def total(self):
        return self.prefix(len(self.vals))

    def select(self, target):
        """Smallest 0-based index whose inclusive prefix sum exceeds target."""
        n = len(self.vals)
        pos = 0
        step = 1 << n.bit_length()
        while step:
            nxt = pos + step
            if nxt <= n and self.tree[nxt] <= target:
                pos = nxt
                target -= self.tree[nxt]
            step >>= 1
        return min(pos, n - 1)

    def rebuild(self, vals):
        self.tree = [0.0]
        self.vals = []
        for v in vals:
            self.append(v)


@dataclass
class Relocation:
    n: int
    time: float
    target: float
    run: int
    position: np.ndarray


@dataclass
class Trajectory:
    model: MonkeyModel
    times: list = field(default_factory=lambda: [0.0])
    runs: list = field(default_factory=list)
    log_weights: list = field(default_factory=list)
    log_cumulative: list = field(default_factory=lambda: [-math.inf])
    relocations: list = field(default_factory=list)
    index: Fenwick = field(default_factory=Fenwick)
    log_scale: float = 0.0

    def add_run(self, record):
        lw = float(log_run_weight(self.model.kernel, record.start_time, record.duration, self.model.axis))
        self.runs.append(record)
        self.log_weights.append(lw)
        self.log_cumulative.append(float(np.logaddexp(self.log_cumulative[-1], lw)))
        self.times.append(record.start_time + record.duration)
        if lw - self.log_scale > 600:
            # keep the index in range; weights e^-600 below the top are negligible
            self.log_scale = lw
            self.index.rebuild(np.exp(np.asarray(self.log_weights) - self.log_scale))
        else:
            self.index.append(math.exp(lw - self.log_scale))

    def run_at(self, time):
        """Index of the run covering ``time``."""
        return bisect.bisect_right(self.times, time) - 1

    def position(self, time, rng):
        i = self.run_at(time)
        rec = self.runs[i]
        return position_at(self.model.process, rec, time - rec.start_time, rng)

    def summary(self):
        ends = [r.endpoint for r in self.runs] + [r.position for r in self.relocations]
        return {"runs": len(self.runs), "relocations": len(self.relocations),
                "log_final_S": self.log_cumulative[len(self.relocations)] if self.relocations else None,
                "max_abs_x": float(max(np.max(np.abs(e)) for e in ends)) if ends else 0.0}


@dataclass
class SimulationResult:
    probes: np.ndarray
    positions: np.ndarray
    trajectory: Trajectory


def relocate(traj, t_now, rng):
    """Two-stage relocation draw: a run with probability W_i / S_n, then an
    offset inside it."""
    m = traj.model
    n = len(traj.runs)
    if traj.log_cumulative[n] == -math.inf:
        r = rng.random() * t_now
        if m.axis == "discrete":
            r = math.floor(r)
        return float(r), traj.run_at(r)
    i = traj.index.select(rng.random() * traj.index.total)
    rec = traj.runs[i]
    f = within_run_quantile(m.kernel, rec.start_time, rec.duration, rng.random(), m.axis)
    return rec.start_time + f, i


def simulate(model, horizon, probes=None, rng=None):
    """Simulate up to ``horizon`` and report positions at the probe times."""
    if not horizon > 0:
        raise ValueError("horizon must be positive")
    rng = np.random.default_rng() if rng is None else rng
    probes = np.asarray([] if probes is None else probes, dtype=float)
    if probes.size and (np.any(np.diff(probes) <= 0) or probes[-1] > horizon or probes[0] < 0):
        raise ValueError("probes must be increasing and inside [0, horizon]")
    traj = Trajectory(model)
    x = model.start()
    t = 0.0
    while True:
        L = float(model.runlen.sample(rng))
        rec = evolve_run(model.process, x, L, rng)
        rec.start_time = t
        traj.add_run(rec)
        t += L
        if t > horizon:
            break
        r, i = relocate(traj, t, rng)
        x = traj.position(r, rng)
        traj.relocations.append(Relocation(len(traj.relocations) + 1, t, r, i, x))
    pos = np.array([traj.position(p, rng) for p in probes]).reshape(len(probes), model.d)
    return SimulationResult(probes, pos, traj)


def occupation_measure(traj, t, rng=None, bins=None, h=0.25):
    """Weighted occupation measure pi_t = mubar(t)^-1 int_0^t mu(s) delta_{X(s)} ds.

    Discrete axis: exact atoms.  Continuous axis: every run is cut into cells
    of width min(h, duration / 8), each cell carrying its exact kernel mass
    at the position of its left end.  ``bins`` (1-d edges) turns the atoms
    into a histogram.
    """
    m = traj.model
    if t > traj.times[-1]:
        raise ValueError("t beyond the simulated horizon")
    vals, wts = [], []
    for rec in traj.runs:
        if rec.start_time >= t:
            break
        end = min(rec.start_time + rec.duration, t)
        if m.axis == "discrete":
            s = np.arange(rec.start_time, end)
            lw = log_kernel_value(m.kernel, s, "discrete")
        else:
            step = min(h, rec.duration / 8)
            s = np.arange(rec.start_time, end, step)
            edges = np.minimum(np.append(s, s[-1] + step), end)
            lc = log_kernel_cumulative(m.kernel, edges, "continuous")
            with np.errstate(invalid="ignore", divide="ignore"):
                lw = np.where(lc[1:] > lc[:-1], lc[1:] + np.log(-np.expm1(lc[:-1] - lc[1:])), -np.inf)
        for si, wi in zip(s, lw):
            if wi > -np.inf:
                vals.append(position_at(m.process, rec, si - rec.start_time, rng))
                wts.append(wi)
    if not wts:
        raise ValueError("no kernel mass before t")
    vals = np.array(vals).reshape(len(vals), m.d)
    wts = np.exp(np.asarray(wts) - max(wts))
    wts = wts / wts.sum()
    if bins is not None:
        hist, _ = np.histogram(vals[:, 0], bins=bins, weights=wts)
        return hist
    return EmpiricalSample(vals[:, 0] if m.d == 1 else vals, wts)


def occupation_from_path(model, path, t):
    """pi_t of a discrete path (first coordinate): atoms X(s), s < t, with
    mass mu(s) / mubar(t)."""
    t = int(t)
    lw = log_kernel_value(model.kernel, np.arange(t), "discrete")
    keep = np.isfinite(lw)
    if not keep.any():
        raise ValueError("no kernel mass before t")
    x = path[:t, 0][keep]
    w = np.exp(lw[keep] - lw[keep].max())
    vals, inv = np.unique(x, return_inverse=True)
    mass = np.bincount(inv, weights=w)
    return EmpiricalSample(vals, mass)
