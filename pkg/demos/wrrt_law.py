"""Exact law of a small weighted random recursive tree against built trees,
and the height of a weight-proportional node as a sum of Bernoullis.

    python demos/wrrt_law.py [n]
"""
import sys

import numpy as np

from monkeywalk.wrrt import (bernoulli_height_law, build_batch, enumerate_law,
                             height_law_enumerated, tree_codes)

n = int(sys.argv[1]) if len(sys.argv) > 1 else 4
w = np.r_[1.0, np.full(n - 1, 0.05)]

law = enumerate_law(w, n)
trees = sorted(t for t, _ in law)
par = build_batch(w, n, np.random.default_rng(0), 200_000)
codes = tree_codes(np.array(trees).reshape(len(trees), n - 1))
freq = np.bincount(np.searchsorted(codes, tree_codes(par)), minlength=len(trees)) / len(par)
print("tree        exact    built")
for t, f in zip(trees, freq):
    print(f"{','.join(map(str, t)):<10} {law[(t, ())]:.5f}  {f:.5f}")

print("height law (enumerated):", np.round(height_law_enumerated(w, n), 6))
print("height law (Bernoulli): ", np.round(bernoulli_height_law(w, n), 6))
