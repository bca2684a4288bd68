"""Weighted random recursive trees (WRRTs).

Node i (0-based; node 0 is the root) attaches to an earlier node j with
probability w_j / (w_0 + ... + w_{i-1}).  The branching structure of the
monkey walk is such a tree with the run weights W_i as node weights, and
the time change S(t) with X(t) = Z(S(t)) in law is a sum of within-run
offsets along the branch of a weight-proportional node.

Zero-weight nodes are allowed (the startup window of mu1) but are never
selected while some earlier weight is positive; a node whose predecessors
all have weight zero picks its parent uniformly.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from . import _engines
from ._flat import kernel_codes, kernel_table, runlen_codes
from .kernel import (DiscreteUniform, check_axis, check_runlen_axis, log_run_weight,
                     within_run_quantile)


def _weights(weights, n=None):
    w = np.asarray(weights, dtype=float)
    if w.ndim != 1 or w.size == 0:
        raise ValueError("weights must be a nonempty vector")
    if n is not None:
        if n < 1:
            raise ValueError("n must be >= 1")
        if n > w.size:
            raise ValueError(f"need {n} weights, got {w.size}")
        w = w[:n]
    if np.any(~np.isfinite(w)) or np.any(w < 0):
        raise ValueError("weights must be finite and nonnegative")
    pos = np.flatnonzero(w > 0)
    if pos.size and np.any(w[pos[0]:] <= 0):
        raise ValueError("only leading weights may be zero")
    return w


@dataclass
class Wrrt:
    parent: np.ndarray      # parent[0] = -1
    weights: np.ndarray
    cum: np.ndarray         # cum[i] = w_0 + ... + w_i

    def __len__(self):
        return len(self.parent)

    def heights(self):
        return _engines.tree_heights(self.parent)

    def ancestors(self, node):
        """Path from ``node`` up to the root, node first."""
        out = [int(node)]
        while self.parent[out[-1]] >= 0:
            out.append(int(self.parent[out[-1]]))
        return out

    def is_increasing(self):
        return bool(self.parent[0] == -1 and np.all(self.parent[1:] < np.arange(1, len(self))))


def _attach(cum, u):
    """Parents for nodes 1..n-1 from uniforms u (one per node, last axis)."""
    n = cum.size
    prev = cum[:-1]
    y = u * prev
    p = np.searchsorted(cum, y, side="right")
    # no positive weight yet: uniform over earlier nodes
    zero = prev <= 0
    if np.any(zero):
        k = np.arange(1, n)
        p = np.where(zero, np.floor(u * k).astype(np.int64), p)
    return p


def build(weights, n, rng):
    """One n-node w-WRRT."""
    w = _weights(weights, n)
    cum = np.cumsum(w)
    parent = np.empty(n, np.int64)
    parent[0] = -1
    parent[1:] = _attach(cum, rng.random(n - 1))
    return Wrrt(parent, w, cum)


def build_batch(weights, n, rng, size):
    """Parent arrays of ``size`` independent trees, shape (size, n - 1)
    (entry k is the parent of node k + 1)."""
    w = _weights(weights, n)
    cum = np.cumsum(w)
    return _attach(cum, rng.random((size, n - 1))).astype(np.int64)


def sample_weight_proportional(tree, rng, size=None):
    tot = tree.cum[-1]
    if not tot > 0:
        raise ValueError("zero total weight")
    u = rng.random(size)
    return np.searchsorted(tree.cum, u * tot, side="right")


def profile(tree):
    """Weighted height histogram: (heights 0..H, mass at each)."""
    h = tree.heights()
    w = tree.weights
    if not w.sum() > 0:
        raise ValueError("zero total weight")
    mass = np.bincount(h, weights=w) / w.sum()
    return np.arange(mass.size), mass


def bernoulli_params(weights, n=None):
    """w_i / s_i, with 0 for zero-weight nodes and 1 for the root."""
    w = _weights(weights, n)
    s = np.cumsum(w)
    with np.errstate(invalid="ignore", divide="ignore"):
        p = np.where(s > 0, w / s, 0.0)
    p[0] = 1.0
    return p


def bernoulli_height_sampler(weights, n, rng):
    """(height, ancestor flags) of a weight-proportional node in T_n, drawn
    as independent B_i ~ Bernoulli(w_i / s_i); B_0 = 1 is the root."""
    p = bernoulli_params(weights, n)
    b = rng.random(p.size) < p
    b[0] = True
    return int(b[1:].sum()), b


def bernoulli_height_law(weights, n):
    """Exact law of sum_{i>=1} B_i by convolution."""
    p = bernoulli_params(weights, n)
    law = np.array([1.0])
    for q in p[1:]:
        law = np.convolve(law, [1 - q, q])
    return law


# ---------------------------------------------------------------------------
# coupling of a tree with two independent weight-proportional nodes

@dataclass
class CoupledPairSample:
    height_u: int
    height_v: int
    lca_height: int
    phi_u: float
    phi_v: float
    phi_lca: float
    b: np.ndarray
    b_prime: np.ndarray


def coupled_pair_sampler(weights, n, f, rng):
    """Run the four-case coupling for n nodes with offsets f (f[i] is added
    for every ancestor i).  Heights and Phi values are tracked without
    building the tree; the LCA is the node of the last (1,1) event."""
    p = bernoulli_params(weights, n)
    f = np.asarray(f, dtype=float)
    if f.size < n:
        raise ValueError("need one offset per node")
    b = rng.random(n) < p
    bp = rng.random(n) < p
    b[0] = bp[0] = True
    hu = hv = hl = 0
    pu = pv = pl = f[0]
    for i in range(1, n):
        if b[i] and bp[i]:
            hu += 1
            pu += f[i]
            hv, pv, hl, pl = hu, pu, hu, pu
        elif b[i]:
            hu += 1
            pu += f[i]
        elif bp[i]:
            hv += 1
            pv += f[i]
    return CoupledPairSample(hu, hv, hl, pu, pv, pl, b, bp)


def coupled_tree_batch(weights, n, rng, size):
    """Trees and marked nodes from the coupling, vectorized over ``size``.

    Returns (parents of shape (size, n - 1), u, v).
    """
    w = _weights(weights, n)
    if w[0] <= 0:
        raise ValueError("the coupling needs a positive root weight")
    cum = np.cumsum(w)
    p = w / cum
    u = np.zeros(size, np.int64)
    v = np.zeros(size, np.int64)
    par = np.empty((size, n - 1), np.int64)
    for i in range(1, n):
        bu = rng.random(size) < p[i]
        bv = rng.random(size) < p[i]
        U = np.searchsorted(cum, rng.random(size) * cum[i - 1], side="right")
        par[:, i - 1] = np.where(bu, u, np.where(bv, v, U))
        u = np.where(bu, i, u)
        v = np.where(bv, i, v)
    return par, u, v


def lca_heights(weights, n_grid, rng, size):
    """Height of the LCA of the coupled pair at every n in ``n_grid``,
    shape (size, len(n_grid))."""
    n_grid = np.asarray(n_grid, dtype=np.int64)
    p = bernoulli_params(weights, int(n_grid.max()))
    out = np.empty((size, n_grid.size), np.int64)
    for r in range(size):
        b = rng.random(p.size) < p
        bp = rng.random(p.size) < p
        b[0] = bp[0] = True
        h = np.cumsum(b) - 1
        both = np.flatnonzero(b & bp)
        # last (1,1) event before each n
        k = np.searchsorted(both, n_grid, side="left") - 1
        out[r] = h[both[k]]
    return out


# ---------------------------------------------------------------------------
# exact law of small trees

def increasing_trees(n):
    """All parent sequences (p_1, ..., p_{n-1}) with p_i < i."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return list(itertools.product(*[range(i) for i in range(1, n)]))


def tree_probability(weights, parents):
    w = np.asarray(weights, dtype=float)
    s = np.cumsum(w)
    out = 1.0
    for i, p in enumerate(parents, start=1):
        out *= w[p] / s[i - 1]
    return out


def enumerate_law(weights, n, marks=0):
    """Exact table {(parents, marked nodes): probability} for the n-node
    w-WRRT together with ``marks`` independent weight-proportional nodes."""
    if n > 6:
        raise ValueError("enumeration is limited to n <= 6")
    if marks not in (0, 1, 2):
        raise ValueError("marks must be 0, 1 or 2")
    w = _weights(weights, n)
    if np.any(w <= 0):
        raise ValueError("enumeration needs positive weights")
    q = w / w.sum()
    law = {}
    for t in increasing_trees(n):
        pt = tree_probability(w, t)
        for m in itertools.product(range(n), repeat=marks):
            law[(t, m)] = pt * float(np.prod(q[list(m)])) if m else pt
    return law


def height_law_enumerated(weights, n):
    """Law of the height of a weight-proportional node, by enumeration."""
    law = enumerate_law(weights, n, marks=1)
    out = np.zeros(n)
    for (t, (j,)), pr in law.items():
        par = np.array((-1,) + t)
        out[_engines.tree_heights(par)[j]] += pr
    return out


def law_to_json(law):
    """String keys 'p1,...,p_{n-1}|m1,m2' for a JSON probability table."""
    return {",".join(map(str, t)) + ("|" + ",".join(map(str, m)) if m else ""): p
            for (t, m), p in law.items()}


def tree_codes(parents):
    """Mixed-radix integer code of parent arrays (last axis)."""
    parents = np.asarray(parents, dtype=np.int64)
    code = np.zeros(parents.shape[:-1], np.int64)
    for i in range(parents.shape[-1]):
        code = code * (i + 1) + parents[..., i]
    return code


# ---------------------------------------------------------------------------
# the time change S(t)

def time_change_sample(kernel, runlen, t, rng, axis="discrete", method="forward"):
    """One draw of S(t).

    ``forward`` draws the run lengths up to t, flags every completed run with
    an independent B_i ~ Bernoulli(W_i / S_i), adds a within-run offset for
    each flagged run and finally A(t) = t - T_N(t).  ``backward`` follows the
    ancestry of the current run by drawing relocation targets and the last
    renewal before them; it needs geometric, deterministic or exponential
    run lengths.
    """
    check_axis(axis)
    check_runlen_axis(runlen, axis)
    if not t > 0:
        raise ValueError("t must be positive")
    kc, ka, kb = kernel_codes(kernel)
    rc, rp = runlen_codes(runlen)
    lin, tab = kernel_table(kernel, axis, t)
    disc = axis == "discrete"
    if method == "forward":
        return _engines.timechange_forward(rng, float(t), disc, lin, kc, ka, kb, tab, rc, rp)
    if method == "backward":
        if isinstance(runlen, DiscreteUniform):
            raise ValueError("the backward sampler needs memoryless or periodic run lengths")
        return _engines.timechange_backward(rng, float(t), disc, lin, kc, ka, kb, tab, rc, rp)
    raise ValueError(f"unknown method {method!r}")


def run_weights(kernel, lengths, axis="discrete"):
    """Run boundaries and run weights rescaled by their maximum."""
    T = np.concatenate(([0.0], np.cumsum(lengths)))
    lw = np.asarray(log_run_weight(kernel, T[:-1], np.asarray(lengths, dtype=float), axis))
    top = lw.max()
    w = np.exp(lw - top) if np.isfinite(top) else np.zeros_like(lw)
    return T, w


def time_change_slow(kernel, runlen, t, rng, axis="discrete"):
    """S(t) through an explicit tree: build the WRRT of the completed runs,
    pick a weight-proportional node and add the offsets of its ancestors."""
    chunk = int(t / runlen.moment(1)) + 16
    draws = np.empty(0)
    while draws.sum() <= t:
        draws = np.r_[draws, np.asarray(runlen.sample(rng, chunk), dtype=float)]
    ends = np.cumsum(draws)
    n = int(np.searchsorted(ends, t, side="right"))
    if n == 0:
        return float(t)
    lengths = draws[:n].tolist()
    T = float(ends[n - 1])
    bounds, w = run_weights(kernel, lengths, axis)
    n = len(lengths)
    tree = Wrrt(np.r_[-1, _attach(np.cumsum(w), rng.random(n - 1))].astype(np.int64), w, np.cumsum(w))
    if tree.cum[-1] > 0:
        node = int(sample_weight_proportional(tree, rng))
    else:
        node = int(np.floor(rng.random() * n))
    phi = 0.0
    for i in tree.ancestors(node):
        u = rng.random()
        if w[i] > 0:
            phi += float(within_run_quantile(kernel, bounds[i], lengths[i], u, axis))
        else:
            # zero-weight startup run: uniform offset, as in the simulators
            phi += math.floor(u * lengths[i]) if axis == "discrete" else u * lengths[i]
    return phi + (t - T)
