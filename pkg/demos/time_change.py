"""X(t) against Z(S(t)) for the lazy walk with a uniform memory kernel.

    python demos/time_change.py [t] [replicas]
"""
import sys

import numpy as np

from monkeywalk.kernel import Geometric, Mu1, moment_summary, scaling_s
from monkeywalk.monkey import MonkeyModel, sample_composed, sample_positions, sample_time_changes
from monkeywalk.process import LazySRW
from monkeywalk.stats import ks_critical, ks_two_sample

t = float(sys.argv[1]) if len(sys.argv) > 1 else 1e4
reps = int(sys.argv[2]) if len(sys.argv) > 2 else 4000

model = MonkeyModel(Mu1(1, 1), Geometric(0.5), LazySRW(1))
ms = moment_summary(model.runlen, model.kernel, model.axis)

S = sample_time_changes(model, [t], reps, seed=1)[:, 0]
print(f"S(t): mean {S.mean():.2f} vs kappa2 s(t) = {ms.kappa2 * scaling_s(model.kernel, t):.2f}")

x = sample_positions(model, [t], reps, seed=2)[:, 0, 0]
z = sample_composed(model, [t], reps, seed=3)[:, 0, 0]
res = ks_two_sample(x, z)
print(f"X(t) vs Z(S(t)): D = {res.statistic:.4f} (1% critical {ks_critical(reps, reps):.4f})")
print(f"Var X(t) = {x.var():.3f}, sigma^2 kappa2 log t = {0.5 * ms.kappa2 * np.log(t):.3f}")
