"""Monte Carlo experiments that check the limit theorems.

Every experiment is a pure function of (model, parameters, seed) and returns
an ``ExperimentReport``: one row of statistics per t (or n) and a dict of
named verdicts.  Replica i always uses the stream keyed by (seed, i), and
auxiliary draws (limit-law samples) use keys >= 2^32.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import norm

from . import __version__
from .kernel import DiscreteUniform, Mu2, branch_scale, moment_summary, scaling_s
from .monkey import (occupation_from_path, occupation_measure, sample_composed, sample_path,
                     sample_positions, sample_probes, simulate)
from .parallel import aux_rng, map_replicas
from .process import BrownianMotion, LazySRW, ergodic_profile
from .stats import (EmpiricalSample, kolmogorov_distance, ks_critical, ks_one_sample,
                    ks_two_sample, limit_mixture_sampler, standardize)
from .wrrt import (Wrrt, _attach, build_batch, enumerate_law, run_weights, time_change_sample,
                   tree_codes)


@dataclass
class ExperimentReport:
    name: str
    config: dict
    seed: int
    rows: list = field(default_factory=list)
    verdicts: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)
    samples: dict = field(default_factory=dict)

    @property
    def passed(self):
        return all(self.verdicts.values())

    def to_dict(self):
        return {"experiment": self.name, "passed": self.passed, "verdicts": self.verdicts,
                "rows": self.rows, "notes": self.notes,
                "provenance": {"package": "monkeywalk", "version": __version__,
                               "seed": self.seed, "config": self.config}}

    def columns(self):
        cols = []
        for r in self.rows:
            for k in r:
                if k not in cols:
                    cols.append(k)
        return cols

    def to_text(self):
        cols = self.columns()
        cells = [[_fmt(r.get(c)) for c in cols] for r in self.rows]
        width = [max([len(c)] + [len(row[i]) for row in cells]) for i, c in enumerate(cols)]
        lines = [f"{self.name}  seed={self.seed}",
                 "  ".join(c.rjust(w) for c, w in zip(cols, width))]
        lines += ["  ".join(v.rjust(w) for v, w in zip(row, width)) for row in cells]
        lines += [f"{k}: {'PASS' if v else 'FAIL'}" for k, v in self.verdicts.items()]
        lines += self.notes
        return "\n".join(lines)


def _fmt(v):
    if v is None:
        return "-"
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


def strictly_decreasing(x):
    x = np.asarray(x, dtype=float)
    return bool(x.size >= 2 and np.all(np.diff(x) < 0))


def _common(model):
    ms = moment_summary(model.runlen, model.kernel, model.axis)
    return ms, ergodic_profile(model.process)


def _limit_variance(profile, ms):
    """Var(f(Omega) Gamma + g(Omega)) for a normal limit, None otherwise."""
    if profile.law != "normal":
        return None
    c = profile.drift / profile.scale
    return 1.0 + c * c * ms.kappa3 / ms.kappa2


# ---------------------------------------------------------------------------
# central limit theorem

def clt_experiment(model, t_grid, replicas, seed, workers=1, limit_draws=None, level=0.01,
                   assert_ks=None, method="auto"):
    """Standardize X(t) by (a, b) at kappa2 s(t) and compare with f(Omega) Gamma + g(Omega).

    Verdicts: the KS distance decreases along the grid, and (``assert_ks``,
    default on for mu2 where s(t) has hundreds of summands) the two-sample
    statistic at the largest t stays below the ``level`` critical value.

    For lattice walks the raw statistic has a floor of about half the largest
    atom of X(t).  ``D_jitter`` (X(t) plus a uniform offset over one lattice
    cell) is reported next to it for information; verdicts use the raw D.
    """
    t_grid = np.asarray(sorted(t_grid), dtype=float)
    ms, prof = _common(model)
    degenerate = ms.kappa2 == 0
    if degenerate:
        # unit runs on the discrete axis: X(t) = X(0), kappa2 = 0.  Standardize
        # with the continuous-axis constants so the sample sits at one point.
        ms = moment_summary(model.runlen, model.kernel, "continuous")
    x = sample_positions(model, t_grid, replicas, seed, workers, method)[:, :, 0]
    m = limit_draws or replicas
    vlim = _limit_variance(prof, ms)
    rep = ExperimentReport("clt", _echo(model, t_grid=t_grid, replicas=replicas,
                                        limit_draws=m, level=level), seed)
    for k, t in enumerate(t_grid):
        s = scaling_s(model.kernel, t)
        tau = ms.kappa2 * s
        z = standardize(x[:, k], prof, ms, s)
        lim = limit_mixture_sampler(prof, ms, aux_rng(seed, k), m)
        ks = ks_two_sample(z, lim)
        span = getattr(model.process, "span", None)
        dj = None
        if span and model.d == 1:
            u = aux_rng(seed, 1000 + k).random(replicas) - 0.5
            dj = ks_two_sample(standardize(x[:, k] + span * u, prof, ms, s), lim).statistic
        rep.rows.append({
            "t": float(t), "s": float(s), "tau": float(tau),
            "mean": float(x[:, k].mean()), "mean_pred": float(prof.b(tau)),
            "var": float(x[:, k].var(ddof=1)),
            "var_pred": None if vlim is None else float(prof.a(tau) ** 2 * vlim),
            "D": ks.statistic, "p": ks.pvalue, "D_crit": ks_critical(replicas, m, level),
            "D_jitter": dj})
        rep.samples[float(t)] = (z, lim)
    D = [r["D"] for r in rep.rows]
    if degenerate:
        rep.notes.append("unit runs: the walk never moves, no verdicts")
        return rep
    if len(D) >= 2:
        rep.verdicts["ks_trend"] = strictly_decreasing(D)
    if assert_ks is None:
        assert_ks = isinstance(model.kernel, Mu2)
    if assert_ks:
        rep.verdicts["ks_below_critical"] = D[-1] < rep.rows[-1]["D_crit"]
    return rep


# ---------------------------------------------------------------------------
# ergodic transfer

def transfer_experiment(model, t, replicas, seed, workers=1, level=0.01, method="auto"):
    """Raw X(t) against raw Z(round(kappa2 s(t))): no limit law needed."""
    ms, _ = _common(model)
    s = scaling_s(model.kernel, t)
    n = ms.kappa2 * s
    if model.axis == "discrete":
        n = float(round(n))
    x = sample_positions(model, [t], replicas, seed, workers, method)[:, 0, 0]
    z = model.start()[0] + model.process.displacement(aux_rng(seed, 0), n, size=replicas)[:, 0]
    ks = ks_two_sample(x, z)
    crit = ks_critical(replicas, replicas, level)
    rep = ExperimentReport("transfer", _echo(model, t=float(t), replicas=replicas, level=level), seed)
    rep.rows.append({"t": float(t), "s": float(s), "z_time": float(n), "D": ks.statistic,
                     "p": ks.pvalue, "D_crit": crit})
    rep.samples[float(t)] = (x, z)
    if t >= 1e3:
        rep.verdicts["ks_below_critical"] = ks.statistic < crit
    else:
        rep.notes.append("t < 1e3: preasymptotic, reported without a verdict")
    return rep


# ---------------------------------------------------------------------------
# local limit theorem

def llt_experiment(model, t_grid, replicas, seed, workers=1, omega_draws=100_000, method="auto"):
    """sup_m a^d |P(X(t) = m) - a^-d psi((m - b) / a)| with
    psi(x) = E phi(x - g(Omega)) by Monte Carlo over common Omega draws.

    ``noise_sd`` is the binomial standard error of a^d P(X(t) = m) at the
    mode.  It grows like a^(d/2), so at fixed replicas the sup statistic
    levels off at a few noise_sd once the true discrepancy falls below it.
    """
    if not getattr(model.process, "lattice", False):
        raise ValueError("the local limit theorem needs a lattice walk")
    ms, prof = _common(model)
    if prof.law != "normal":
        raise ValueError("the local limit theorem needs f = 1 and a normal limit")
    t_grid = np.asarray(sorted(t_grid), dtype=float)
    x = sample_positions(model, t_grid, replicas, seed, workers, method)
    omega = aux_rng(seed, 0).normal(0.0, math.sqrt(ms.kappa3 / ms.kappa2), size=omega_draws)
    g = prof.g(omega)
    d = model.d
    rep = ExperimentReport("llt", _echo(model, t_grid=t_grid, replicas=replicas,
                                        omega_draws=omega_draws), seed)
    for k, t in enumerate(t_grid):
        tau = ms.kappa2 * scaling_s(model.kernel, t)
        a, b = float(prof.a(tau)), float(prof.b(tau))
        sites, counts = np.unique(x[:, k, :], axis=0, return_counts=True)
        # include the lattice neighbours of the occupied window
        lo = sites.min(axis=0) - 1
        hi = sites.max(axis=0) + 1
        grid = np.stack(np.meshgrid(*[np.arange(l, h + 1) for l, h in zip(lo, hi)],
                                    indexing="ij"), -1).reshape(-1, d)
        freq = np.zeros(len(grid))
        idx = np.ravel_multi_index((sites - lo).T.astype(np.int64), tuple((hi - lo + 1).astype(np.int64)))
        freq[idx] = counts / replicas
        u = (grid - b) / a
        psi = _psi(u, g)
        disc = np.abs(a ** d * freq - psi)
        # standard error of a^d freq at the mode: the sampling floor of sup_scaled
        noise = math.sqrt(a ** d * float(psi.max()) / replicas)
        rep.rows.append({"t": float(t), "a": a, "sites": int(len(sites)),
                         "freq_sum": float(freq.sum()), "sup_scaled": float(disc.max()),
                         "noise_sd": noise})
    sup = [r["sup_scaled"] for r in rep.rows]
    if len(sup) >= 2:
        rep.verdicts["sup_trend"] = strictly_decreasing(sup)
    return rep


def _psi(u, g, chunk=512):
    """E prod_j phi(u_j - g(Omega)) for every row of u."""
    out = np.empty(len(u))
    c = 1.0 / math.sqrt(2 * math.pi)
    for i in range(0, len(u), chunk):
        blk = u[i:i + chunk]
        e = -0.5 * ((blk[:, None, :] - g[None, :, None]) ** 2).sum(-1)
        out[i:i + chunk] = c ** u.shape[1] * np.exp(e).mean(axis=1)
    return out


# ---------------------------------------------------------------------------
# occupation measure

def _occupation_task(payload, rng):
    model, t_grid, h = payload
    if model.axis == "discrete":
        path = sample_path(model, t_grid[-1], rng)
        return [occupation_from_path(model, path, t) for t in t_grid]
    res = simulate(model, t_grid[-1], None, rng)
    return [occupation_measure(res.trajectory, t, rng, h=h) for t in t_grid]


def occupation_experiment(model, t_grid, replicas, seed, workers=1, eps=0.1,
                          limit_draws=1_000_000, h=0.25):
    """Kolmogorov distance between the rescaled pi_t of each replica and
    pi_infinity, the law of f(Omega) Gamma + g(Omega)."""
    if isinstance(model.kernel, Mu2) and model.kernel.delta >= 0.5:
        raise ValueError("the occupation theorem needs delta < 1/2")
    ms, prof = _common(model)
    t_grid = np.asarray(sorted(t_grid), dtype=float)
    if prof.law == "normal" and prof.drift == 0:
        cdf = prof.cdf
    else:
        ref = EmpiricalSample(limit_mixture_sampler(prof, ms, aux_rng(seed, 0), limit_draws))
        cdf = ref.cdf
    occ = map_replicas(_occupation_task, (model, t_grid, h), replicas, seed, workers)
    rep = ExperimentReport("occupation", _echo(model, t_grid=t_grid, replicas=replicas, eps=eps,
                                               h=h), seed)
    for k, t in enumerate(t_grid):
        tau = ms.kappa2 * scaling_s(model.kernel, t)
        a, b = float(prof.a(tau)), float(prof.b(tau))
        dist = np.array([kolmogorov_distance(EmpiricalSample((o[k].values - b) / a, o[k].weights), cdf)
                         for o in occ])
        rep.rows.append({"t": float(t), "a": a, "mean_dist": float(dist.mean()),
                         "median_dist": float(np.median(dist)),
                         "frac_above_eps": float(np.mean(dist > eps))})
    md = [r["mean_dist"] for r in rep.rows]
    if len(md) >= 2:
        rep.verdicts["mean_dist_trend"] = strictly_decreasing(md)
    return rep


# ---------------------------------------------------------------------------
# recurrence

def _windows(horizon):
    """Dyadic windows [2^k, 2^(k+1)) up to horizon, then [horizon/2, horizon]."""
    out = []
    k = 0
    while 2 ** (k + 1) <= horizon:
        out.append((2 ** k, 2 ** (k + 1) - 1))
        k += 1
    return out


def _recurrence_task(payload, rng):
    model, horizon, eta, h = payload
    if model.axis == "discrete":
        path = sample_path(model, horizon, rng)
        hit = np.flatnonzero(np.all(path == 0, axis=1))
        times = hit.astype(float)
    else:
        grid = np.arange(h, horizon + h / 2, h)
        x = sample_probes(model, grid, rng)
        times = grid[np.linalg.norm(x, axis=1) <= eta]
    return times[times > 0]


def recurrence_experiment(model, horizon, replicas, seed, workers=1, eta=1.0, h=1.0,
                          late_threshold=None):
    """Visits to 0 (lattice) or to the eta-ball (BM, on a time grid of step h)
    per dyadic window, and returns in the late window [horizon/2, horizon]."""
    if not isinstance(model.process, (LazySRW, BrownianMotion)):
        raise ValueError("recurrence is defined for the lazy walk or Brownian motion")
    if model.x0 is not None and np.any(np.asarray(model.x0) != 0):
        raise ValueError("recurrence needs X(0) = 0")
    visits = map_replicas(_recurrence_task, (model, int(horizon), eta, h), replicas, seed, workers)
    rep = ExperimentReport("recurrence", _echo(model, horizon=int(horizon), replicas=replicas,
                                               eta=eta, h=h), seed)
    for lo, hi in _windows(horizon):
        c = np.array([np.count_nonzero((v >= lo) & (v <= hi)) for v in visits])
        rep.rows.append({"window_lo": lo, "window_hi": hi, "median_visits": float(np.median(c)),
                         "mean_visits": float(c.mean()), "frac_any": float(np.mean(c > 0))})
    late = np.array([np.any(v >= horizon / 2) for v in visits])
    last = np.array([v[-1] if v.size else 0.0 for v in visits])
    total = np.array([v.size for v in visits])
    rep.rows.append({"window_lo": horizon / 2, "window_hi": float(horizon),
                     "frac_any": float(late.mean()), "median_visits": float(np.median(total)),
                     "median_last_visit": float(np.median(last))})
    rep.samples["late_return"] = late
    rep.samples["last_visit"] = last
    if late_threshold is not None:
        kind, thr = late_threshold
        f = float(late.mean())
        rep.verdicts[f"late_returns_{kind}"] = f >= thr if kind == "at_least" else f <= thr
    return rep


# ---------------------------------------------------------------------------
# WRRT profile

def _profile_task(payload, rng):
    kernel, runlen, n_grid, axis = payload
    n = int(n_grid[-1])
    lengths = np.asarray(runlen.sample(rng, n), dtype=float)
    _, w = run_weights(kernel, lengths, axis)
    cum = np.cumsum(w)
    par = np.r_[-1, _attach(cum, rng.random(n - 1))].astype(np.int64)
    tree = Wrrt(par, w, cum)
    h = tree.heights()
    out = []
    for m in n_grid:
        m = int(m)
        hm, wm = h[:m], w[:m]
        out.append((np.bincount(hm, weights=wm) / wm.sum()))
    return out


def profile_experiment(kernel, runlen, n_grid, replicas, seed, workers=1, axis="discrete",
                       mean_tol=0.10):
    """Weighted height profile of the W-WRRT against N(0,1) after centering
    by c s(n) and scaling by sqrt(c s(n)); c = (EL)^delta for mu2, 1 for mu1."""
    if isinstance(kernel, Mu2) and kernel.delta >= 0.5:
        raise ValueError("the profile theorem needs delta < 1/2")
    n_grid = np.asarray(sorted(int(n) for n in n_grid))
    c = branch_scale(runlen, kernel)
    profs = map_replicas(_profile_task, (kernel, runlen, n_grid, axis), replicas, seed, workers)
    rep = ExperimentReport("profile", {"axis": axis, "kernel": kernel.to_dict(),
                                       "runlen": runlen.to_dict(), "n_grid": n_grid.tolist(),
                                       "replicas": replicas, "branch_scale": c}, seed)
    for k, n in enumerate(n_grid):
        s = c * scaling_s(kernel, n)
        dist, means = [], []
        for p in profs:
            mass = p[k]
            hts = np.arange(mass.size)
            keep = mass > 0
            dist.append(kolmogorov_distance(EmpiricalSample((hts[keep] - s) / math.sqrt(s), mass[keep]),
                                            norm.cdf))
            means.append(float(hts @ mass))
        rep.rows.append({"n": int(n), "s": float(s), "mean_ks": float(np.mean(dist)),
                         "mean_height": float(np.mean(means)),
                         "mean_over_s": float(np.mean(means) / s)})
        width = max(p[k].size for p in profs)
        rep.samples[int(n)] = np.mean([np.pad(p[k], (0, width - p[k].size)) for p in profs], axis=0)
    ks = [r["mean_ks"] for r in rep.rows]
    if len(ks) >= 2:
        rep.verdicts["ks_trend"] = strictly_decreasing(ks)
    rep.verdicts["mean_ratio"] = abs(rep.rows[-1]["mean_over_s"] - 1) <= mean_tol
    return rep


# ---------------------------------------------------------------------------
# time change

def _tc_task(payload, rng):
    kernel, runlen, t_grid, axis, method = payload
    return np.array([time_change_sample(kernel, runlen, t, rng, axis, method) for t in t_grid])


def timechange_experiment(model, t_grid, replicas, seed, workers=1, method="auto",
                          compare_direct=True, level=0.01):
    """S(t) against kappa2 s(t), its standardized law against N(0,1), and
    (``compare_direct``) the identity X(t) = Z(S(t)) in law at the largest t."""
    t_grid = np.asarray(sorted(t_grid), dtype=float)
    ms, _ = _common(model)
    if method == "auto":
        method = "forward" if isinstance(model.runlen, DiscreteUniform) else "backward"
    S = np.stack(map_replicas(_tc_task, (model.kernel, model.runlen, t_grid, model.axis, method),
                              replicas, seed, workers))
    rep = ExperimentReport("timechange", _echo(model, t_grid=t_grid, replicas=replicas,
                                               method=method, level=level), seed)
    for k, t in enumerate(t_grid):
        s = scaling_s(model.kernel, t)
        z = (S[:, k] - ms.kappa2 * s) / math.sqrt(ms.kappa3 * s)
        ks = ks_one_sample(z, norm.cdf)
        rep.rows.append({"t": float(t), "s": float(s), "mean_S": float(S[:, k].mean()),
                         "kappa2_s": float(ms.kappa2 * s), "var_S": float(S[:, k].var(ddof=1)),
                         "kappa3_s": float(ms.kappa3 * s), "D_normal": ks.statistic})
    rep.samples["S"] = S
    if compare_direct:
        t = float(t_grid[-1])
        x = sample_positions(model, [t], replicas, seed + 1, workers)[:, 0, 0]
        zs = sample_composed(model, [t], replicas, seed + 2, workers, method)[:, 0, 0]
        ks = ks_two_sample(x, zs)
        crit = ks_critical(replicas, replicas, level)
        rep.rows.append({"t": t, "D_direct_vs_composed": ks.statistic, "p": ks.pvalue, "D_crit": crit})
        rep.samples["direct"] = x
        rep.samples["composed"] = zs
        rep.verdicts["direct_equals_composed"] = ks.statistic < crit
    return rep


# ---------------------------------------------------------------------------
# plain simulation and the WRRT enumeration oracle

def _simulate_task(payload, rng):
    model, t_grid = payload
    res = simulate(model, t_grid[-1], t_grid, rng)
    return res.positions, res.trajectory.summary()


def simulate_experiment(model, t_grid, replicas, seed, workers=1, method="auto"):
    """Positions at the probe times; per-t mean and variance of each coordinate.

    ``method="reference"`` (the default up to t = 1e5) runs the reference
    simulator and also keeps its per-replica trajectory summaries.
    """
    t_grid = np.asarray(sorted(t_grid), dtype=float)
    if method == "auto":
        method = "reference" if t_grid[-1] <= 1e5 else "sweep"
    if method == "reference":
        out = map_replicas(_simulate_task, (model, t_grid), replicas, seed, workers)
        x = np.stack([o[0] for o in out])
        summaries = [o[1] for o in out]
    else:
        x = sample_positions(model, t_grid, replicas, seed, workers, method)
        summaries = None
    rep = ExperimentReport("simulate", _echo(model, t_grid=t_grid, replicas=replicas,
                                             method=method), seed)
    for k, t in enumerate(t_grid):
        row = {"t": float(t)}
        for j in range(model.d):
            row[f"mean_x{j + 1}"] = float(x[:, k, j].mean())
            row[f"var_x{j + 1}"] = float(x[:, k, j].var(ddof=1)) if replicas > 1 else None
        rep.rows.append(row)
    rep.samples["positions"] = x
    if summaries is not None:
        rep.samples["summaries"] = summaries
    return rep


WEIGHT_FAMILIES = {
    "constant": lambda n: np.ones(n),
    "geometric": lambda n: 0.5 ** np.arange(n),
    "dominant": lambda n: np.r_[1.0, np.full(n - 1, 0.05)],
}


def oracle_weights(family_or_list, n):
    if isinstance(family_or_list, str):
        if family_or_list not in WEIGHT_FAMILIES:
            raise ValueError(f"unknown weight family {family_or_list!r}")
        return WEIGHT_FAMILIES[family_or_list](n)
    return np.asarray(family_or_list, dtype=float)[:n]


def wrrt_oracle_experiment(weights, n, replicas, seed, tol=0.01, sum_tol=1e-12):
    """Exact tree law by enumeration; with ``replicas`` > 0 also the
    empirical frequencies of ``replicas`` built trees against it."""
    w = oracle_weights(weights, n)
    law = enumerate_law(w, n)
    trees = sorted(t for t, _ in law)
    prob = np.array([law[(t, ())] for t in trees])
    rep = ExperimentReport("wrrt-oracle", {"n": int(n), "weights": w.tolist(),
                                           "replicas": int(replicas), "tol": tol}, seed)
    freq = None
    if replicas > 0:
        par = build_batch(w, n, aux_rng(seed, 0), replicas)
        codes = tree_codes(np.array(trees, dtype=np.int64).reshape(len(trees), n - 1))
        hit = np.bincount(np.searchsorted(codes, tree_codes(par)), minlength=len(trees))
        freq = hit / replicas
    for k, t in enumerate(trees):
        row = {"tree": ",".join(map(str, t)) or "-", "probability": float(prob[k])}
        if freq is not None:
            row["empirical"] = float(freq[k])
            row["abs_diff"] = float(abs(freq[k] - prob[k]))
        rep.rows.append(row)
    total = float(math.fsum(prob))
    rep.notes.append(f"trees={len(trees)} sum={total!r}")
    rep.verdicts["sums_to_one"] = abs(total - 1) <= sum_tol
    if freq is not None:
        rep.verdicts["empirical_within_tol"] = bool(np.max(np.abs(freq - prob)) <= tol)
    return rep


def _echo(model, **kw):
    out = model.to_dict()
    for k, v in kw.items():
        out[k] = v.tolist() if isinstance(v, np.ndarray) else v
    return out
