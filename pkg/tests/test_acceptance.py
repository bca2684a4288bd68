"""The fourteen acceptance criteria at their stated scales and tolerances.

Each ``criterion_*`` function returns (passed, detail).  Under pytest every
criterion is one test and the session ends with one PASS/FAIL line per
criterion; ``python tests/test_acceptance.py [ids]`` prints the same lines
without pytest.
"""
import math
import os
import sys
import time

import numpy as np
import pytest
from scipy import integrate

from monkeywalk import cli
from monkeywalk.config import apply_overrides, load_config
from monkeywalk.experiments import WEIGHT_FAMILIES
from monkeywalk.kernel import (Geometric, Mu1, Mu2, kernel_cumulative, kernel_cumulative_inverse,
                               kernel_value, moment_summary, run_moment_diagnostic, scaling_s)
from monkeywalk.parallel import default_workers
from monkeywalk.wrrt import (bernoulli_height_law, coupled_tree_batch, enumerate_law,
                             height_law_enumerated, tree_codes)

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
CONFIGS = os.path.join(ROOT, "configs")
WORKERS = default_workers()

RESULTS = {}


def run_config(name, **overrides):
    cfg = apply_overrides(load_config(os.path.join(CONFIGS, name)), **overrides)
    return cli.run_experiment(cfg, WORKERS)


def family_weights(n):
    return {k: f(n) for k, f in WEIGHT_FAMILIES.items()}


# ---------------------------------------------------------------------------

def criterion_1():
    """WRRT law: 1e6 built trees per (n, weights) within 0.01 of the enumerated law."""
    worst_diff, worst_sum = 0.0, 0.0
    ok = True
    for fam in WEIGHT_FAMILIES:
        for n in range(2, 7):
            rep = run_config("wrrt_oracle.json", n=n, weights=fam)
            ok &= rep.passed
            worst_diff = max(worst_diff, max(r["abs_diff"] for r in rep.rows))
            worst_sum = max(worst_sum, abs(math.fsum(r["probability"] for r in rep.rows) - 1))
    return ok, f"max |freq - prob| = {worst_diff:.2e}, max |sum - 1| = {worst_sum:.1e}"


def criterion_2():
    """Enumerated height law equals the independent Bernoulli sum law."""
    tv = max(0.5 * np.abs(height_law_enumerated(w, n) - bernoulli_height_law(w, n)).sum()
             for n in range(2, 7) for w in family_weights(n).values())
    return tv < 1e-10, f"max TV = {tv:.2e}"


def criterion_3():
    """Coupled (tree, u, v) frequencies over 1e6 runs against the product law."""
    rng = np.random.default_rng(3)
    worst = 0.0
    for n in range(2, 6):
        for w in family_weights(n).values():
            law = enumerate_law(w, n, marks=2)
            keys = list(law)
            code = (tree_codes(np.array([k[0] for k in keys], dtype=np.int64).reshape(len(keys), n - 1))
                    * n + [k[1][0] for k in keys]) * n + [k[1][1] for k in keys]
            order = np.argsort(code)
            code = code[order]
            prob = np.array([law[keys[i]] for i in order])
            par, u, v = coupled_tree_batch(w, n, rng, 10 ** 6)
            got = (tree_codes(par) * n + u) * n + v
            idx = np.searchsorted(code, got)
            assert np.array_equal(code[idx], got)
            freq = np.bincount(idx, minlength=len(code)) / 10 ** 6
            worst = max(worst, float(np.max(np.abs(freq - prob))))
    return worst < 0.01, f"max |freq - prob| = {worst:.2e}"


def criterion_4():
    """X(t) and Z(S(t)) agree in law at t = 1e4 (1e4 vs 1e4, 1% level)."""
    rep = run_config("timechange_srw.json")
    row = rep.rows[-1]
    ok = row["D_direct_vs_composed"] < row["D_crit"]
    return ok, f"D = {row['D_direct_vs_composed']:.4f}, critical {row['D_crit']:.4f}"


def criterion_5():
    """Var X(t) within 15% of 1.5 log t at t = 1e6 (Geometric(1/2) runs)."""
    rep = run_config("variance_bm.json")
    k2 = moment_summary(Geometric(0.5), Mu1(1, 1), "continuous").kappa2
    pred = 1.5 * math.log(1e6)
    var = rep.rows[0]["var_x1"]
    ok = k2 == 1.5 and abs(var / pred - 1) < 0.15
    return ok, f"var = {var:.3f}, target {pred:.3f}, ratio {var / pred:.4f}"


def criterion_6():
    """Standardized X(t) vs the limit mixture under mu2: KS D < 0.05."""
    rep = run_config("sharp_clt_mu2.json")
    row = rep.rows[-1]
    return row["D"] < 0.05, f"D = {row['D']:.4f}, s(t) = {row['s']:.1f}"


def criterion_7():
    """Drift case: mean X(t) within 10% of mu kappa2 s(t)."""
    cfg = load_config(os.path.join(CONFIGS, "drift_mean.json"))
    rep = cli.run_experiment(cfg, WORKERS)
    m = cfg.model()
    pred = 0.3 * moment_summary(m.runlen, m.kernel, m.axis).kappa2 * scaling_s(m.kernel, 1e6)
    mean = rep.rows[0]["mean_x1"]
    return abs(mean / pred - 1) < 0.10, f"mean = {mean:.3f}, target {pred:.3f}, ratio {mean / pred:.4f}"


def criterion_8():
    """Heavy tails: X(t) vs Z(round(kappa2 log t)) below the 1% critical value."""
    rep = run_config("heavy_transfer.json")
    row = rep.rows[0]
    return row["D"] < row["D_crit"], f"D = {row['D']:.4f}, critical {row['D_crit']:.4f}, " \
                                     f"Z time {row['z_time']:.0f}"


def criterion_9():
    """LLT: scaled sup-discrepancy strictly decreasing over t = 1e4, 1e5, 1e6."""
    rep = run_config("llt_srw_mu2.json")
    sup = [r["sup_scaled"] for r in rep.rows]
    return rep.verdicts["sup_trend"], "sup_scaled = " + ", ".join(f"{v:.5f}" for v in sup)


def criterion_10():
    """Occupation measure: mean Kolmogorov distance decreasing over t = 1e3..1e6."""
    rep = run_config("occupation_srw.json")
    md = [r["mean_dist"] for r in rep.rows]
    return rep.verdicts["mean_dist_trend"], "mean_dist = " + ", ".join(f"{v:.4f}" for v in md)


def criterion_11():
    """Recurrence: late returns for >= 50% in d = 3 and <= 10% in d = 5."""
    r3 = run_config("recurrence_d3.json")
    r5 = run_config("recurrence_d5.json")
    f3, f5 = r3.rows[-1]["frac_any"], r5.rows[-1]["frac_any"]
    return r3.passed and r5.passed, f"late-return fraction d=3: {f3:.3f}, d=5: {f5:.3f}"


def criterion_12():
    """Profile: KS decreasing over n = 1e3..1e5 and mean / log n within 10% at 1e5."""
    rep = run_config("profile_mu1.json")
    ks = ", ".join(f"{r['mean_ks']:.4f}" for r in rep.rows)
    return rep.passed, f"mean_ks = {ks}; mean/log n = {rep.rows[-1]['mean_over_s']:.4f}"


def _quad_mubar(k, x):
    lo = 1.0 if isinstance(k, Mu1) else 0.0
    pts = [p for p in (math.e, 10.0, 100.0) if lo < p < x]
    val, _ = integrate.quad(lambda s: kernel_value(k, s), lo, x, points=pts or None,
                            epsabs=0, epsrel=1e-12, limit=500)
    return val


def criterion_13():
    """Kernel analytics: quadrature, inverse round-trip, diagnostic monotonicity."""
    kernels = [Mu1(1, 1), Mu1(2, 0), Mu1(0.5, 1), Mu1(1.5, 0.5), Mu2(1, 0.5), Mu2(2, 0.25)]
    xs = [1.5, 3.0, 10.0, 50.0, 200.0]
    qerr = max(abs(kernel_cumulative(k, x) / _quad_mubar(k, x) - 1) for k in kernels for x in xs)
    rerr = 0.0
    for k in kernels:
        for x in [1.5, 3.0, 10.0, 1e3, 1e4, 1e5]:
            y = kernel_cumulative(k, x)
            rerr = max(rerr, abs(kernel_cumulative_inverse(k, y) / x - 1))
    mono = True
    for k in [Mu1(2, 1), Mu1(0.5, 1), Mu1(1.5, 0.5), Mu2(1, 0.4), Mu2(2, 0.5)]:
        for ell in (2, 3):
            e = [run_moment_diagnostic(k, t, 3.0, ell).relative_error for t in [1e3, 1e4, 1e5, 1e6]]
            mono &= bool(np.all(np.diff(e) < 0))
    ok = qerr < 1e-8 and rerr < 1e-10 and mono
    return ok, f"quadrature rel err {qerr:.1e} over 30 cases, round-trip {rerr:.1e}, monotone {mono}"


def criterion_14(tmp=None):
    """Byte-identical outputs across reruns and across 1 vs 4 workers."""
    import tempfile
    base = tmp or tempfile.mkdtemp()
    cfg = os.path.join(CONFIGS, "timechange_srw.json")
    dirs = []
    for tag, w in [("w1", 1), ("w1b", 1), ("w4", 4)]:
        d = os.path.join(base, tag)
        cli.main(["run", "timechange", "--config", cfg, "--workers", str(w), "--out", d])
        dirs.append(d)
    files = sorted(f for f in os.listdir(dirs[0]) if f.endswith((".csv", ".json")))
    same = all(open(os.path.join(dirs[0], f), "rb").read() == open(os.path.join(d, f), "rb").read()
               for d in dirs[1:] for f in files)
    return same and len(files) >= 3, f"compared {', '.join(files)} across 3 runs"


CRITERIA = {i: globals()[f"criterion_{i}"] for i in range(1, 15)}


def _record(i, ok, detail, secs):
    RESULTS[i] = (ok, detail, secs)
    return ok


@pytest.mark.parametrize("i", list(CRITERIA), ids=[f"C{i}" for i in CRITERIA])
def test_criterion(i, tmp_path):
    t0 = time.perf_counter()
    ok, detail = CRITERIA[i](tmp_path) if i == 14 else CRITERIA[i]()
    _record(i, ok, detail, time.perf_counter() - t0)
    print(f"C{i}: {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, detail


def summary_line(i):
    ok, detail, secs = RESULTS[i]
    return f"C{i:<2} {'PASS' if ok else 'FAIL'}  ({secs:6.1f} s)  {CRITERIA[i].__doc__.strip()}  [{detail}]"


def summary_lines():
    return [summary_line(i) for i in sorted(RESULTS)]


if __name__ == "__main__":
    ids = [int(a.lstrip("Cc")) for a in sys.argv[1:]] or list(CRITERIA)
    for i in ids:
        t0 = time.perf_counter()
        _record(i, *CRITERIA[i](), time.perf_counter() - t0)
        print(summary_line(i), flush=True)
