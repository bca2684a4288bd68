"""Compiled inner loops.

Everything here takes a ``np.random.Generator`` and plain scalars/arrays so
that one replica is one call.  Model objects are flattened by ``monkey.Spec``.

Codes
  kernel  0 mu1(a=alpha, b=beta)     1 mu2(a=gamma, b=delta)
  runlen  0 geometric(q)  1 deterministic(c)  2 discrete_uniform(k)  3 exponential(rate)
  process 0 lazy_srw(p1=p_lazy)  1 normal(p1=mean, p2=sd)  2 two_point(p1=mean, p2=sd)
          3 heavy_tailed(p1=omega)  4 brownian(p1=drift)
"""
import math

import numpy as np
from numba import njit

NINF = -np.inf


@njit(cache=True)
def _lae(x, y):
    if x == NINF:
        return y
    if y == NINF:
        return x
    m = max(x, y)
    return m + math.log1p(math.exp(-abs(x - y)))


@njit(cache=True)
def log_mubar_cont(kcode, a, b, x):
    if kcode == 0:
        if x <= 1.0:
            return NINF
        lx = math.log(x)
        if b == 0.0:
            return a * math.log(lx)
        u = lx**a
        y = b * u
        if y < 1e-5:
            return math.log(u) + math.log1p(y / 2 + y * y / 6)
        return y + math.log(-math.expm1(-y)) - math.log(b)
    if x <= 0.0:
        return NINF
    y = a * x**b
    return y + math.log(-math.expm1(-y))


@njit(cache=True)
def inv_log_cont(kcode, a, b, ly):
    if kcode == 0:
        if b == 0.0:
            lx = math.exp(ly / a)
        else:
            lz = ly + math.log(b)
            if lz < math.log(1e-5):
                z = math.exp(lz)
                lx = (math.exp(ly) * (1 - z / 2 + z * z / 3)) ** (1.0 / a)
            else:
                lx = (_lae(0.0, lz) / b) ** (1.0 / a)
        return math.exp(lx)
    return (_lae(0.0, ly) / a) ** (1.0 / b)


@njit(cache=True)
def mubar_lin(kcode, a, b, x):
    """mubar(x) in linear space (caller guarantees no overflow)."""
    if kcode == 0:
        if x <= 1.0:
            return 0.0
        if b == 0.0:
            return math.log(x) ** a
        if a == 1.0 and b == 1.0:
            return x - 1.0
        u = math.log(x) ** a
        z = b * u
        if z < 1e-5:
            return u * (1 + z / 2 + z * z / 6)
        return math.expm1(z) / b
    if x <= 0.0:
        return 0.0
    return math.expm1(a * x**b)


@njit(cache=True)
def inv_lin(kcode, a, b, y):
    if kcode == 0:
        if b == 0.0:
            return math.exp(y ** (1.0 / a))
        if a == 1.0 and b == 1.0:
            return 1.0 + y
        z = b * y
        if z < 1e-5:
            u = y * (1 - z / 2 + z * z / 3)
        else:
            u = math.log1p(z) / b
        return math.exp(u ** (1.0 / a))
    return (math.log1p(y) / a) ** (1.0 / b)


def linear_safe(kcode, a, b, horizon):
    """True when mubar stays far from overflow up to ``horizon``."""
    return float(log_mubar_cont(kcode, a, b, float(horizon) * 1.5 + 10.0)) < 650.0


@njit(cache=True)
def _search_le(table, y, lo_b, hi_b, guess):
    """Largest k in [lo_b, hi_b) with table[k] <= y, given table[lo_b] <= y < table[hi_b].
    Gallops from ``guess`` and then bisects."""
    g = min(max(guess, lo_b), hi_b - 1)
    if table[g] <= y:
        lo = g
        hi = hi_b
        step = 1
        while lo + step < hi_b:
            if table[lo + step] > y:
                hi = lo + step
                break
            lo += step
            step *= 2
    else:
        hi = g
        lo = lo_b
        step = 1
        while hi - step > lo_b:
            if table[hi - step] <= y:
                lo = hi - step
                break
            hi -= step
            step *= 2
    while hi - lo > 1:
        mid = (lo + hi) >> 1
        if table[mid] <= y:
            lo = mid
        else:
            hi = mid
    return lo


@njit(cache=True)
def relocate(disc, lin, kcode, a, b, table, tau, u):
    """Relocation time in [0, tau) with density proportional to mu.

    ``table`` holds the discrete partial sums, linear when ``lin`` else logs.
    """
    if disc:
        n = int(tau)
        if lin:
            tot = table[n]
            if tot == 0.0:
                return math.floor(u * tau)
            y = u * tot
            guess = int(inv_lin(kcode, a, b, y))
        else:
            lt = table[n]
            if lt == NINF:
                return math.floor(u * tau)
            if u <= 0.0:
                y = NINF
                guess = 0
            else:
                y = math.log(u) + lt
                guess = int(inv_log_cont(kcode, a, b, y))
        return float(_search_le(table, y, 0, n, guess))
    if lin:
        tot = mubar_lin(kcode, a, b, tau)
        if tot == 0.0:
            return u * tau
        r = inv_lin(kcode, a, b, u * tot)
    else:
        lt = log_mubar_cont(kcode, a, b, tau)
        if lt == NINF:
            return u * tau
        if u <= 0.0:
            return 1.0 if kcode == 0 else 0.0
        r = inv_log_cont(kcode, a, b, math.log(u) + lt)
    if r >= tau:
        r = tau * (1.0 - 1e-16)
    return r


@njit(cache=True)
def within_run(disc, lin, kcode, a, b, table, t0, L, u):
    """Offset in [0, L) with density proportional to mu(t0 + .)."""
    if disc:
        i0 = int(t0)
        i1 = i0 + int(L)
        la = table[i0]
        lb = table[i1]
        if lb == la:
            return math.floor(u * L)
        if lin:
            y = la + u * (lb - la)
        elif u > 0.0:
            y = _lae(la, math.log(u) + lb + math.log(-math.expm1(la - lb)))
        else:
            y = la
        return float(_search_le(table, y, i0, i1, i0) - i0)
    if lin:
        la = mubar_lin(kcode, a, b, t0)
        lb = mubar_lin(kcode, a, b, t0 + L)
        if lb == la:
            return u * L
        y = la + u * (lb - la)
        x = inv_lin(kcode, a, b, y) if y > 0.0 else (1.0 if kcode == 0 else 0.0)
    else:
        la = log_mubar_cont(kcode, a, b, t0)
        lb = log_mubar_cont(kcode, a, b, t0 + L)
        if lb == la:
            return u * L
        lw = lb + math.log(-math.expm1(la - lb))
        y = _lae(la, math.log(u) + lw) if u > 0.0 else la
        x = inv_log_cont(kcode, a, b, y) if y > NINF else (1.0 if kcode == 0 else 0.0)
    f = x - t0
    if f < 0.0:
        f = 0.0
    if f >= L:
        f = L * (1.0 - 1e-16)
    return f


@njit(cache=True)
def geometric(gen, q):
    """Geometric(q) on {1, 2, ...} by inversion (numba's sampler is slow)."""
    if q == 0.5:
        # the binary exponent of a uniform draw is geometric
        return 1.0 - math.frexp(gen.random())[1]
    return math.floor(math.log1p(-gen.random()) / math.log1p(-q)) + 1.0


@njit(cache=True)
def draw_runlen(gen, rcode, rp):
    if rcode == 0:
        return geometric(gen, rp)
    if rcode == 1:
        return rp
    if rcode == 2:
        return float(gen.integers(1, int(rp) + 1))
    return gen.standard_exponential() / rp


@njit(cache=True)
def last_renewal(gen, rcode, rp, x):
    """Last renewal point <= x for memoryless or periodic renewal sets."""
    if rcode == 0:
        r = math.floor(x) - (geometric(gen, rp) - 1.0)
        return max(r, 0.0)
    if rcode == 1:
        return rp * math.floor(x / rp)
    r = x - gen.standard_exponential() / rp
    return max(r, 0.0)


@njit(cache=True)
def add_displacement(gen, pcode, d, p1, p2, dt, pos):
    """pos += Z(dt) - Z(0)."""
    if pcode == 0:
        m = gen.binomial(int(dt), 1.0 - p1)
        rem = m
        for j in range(d):
            mj = rem if j == d - 1 else gen.binomial(rem, 1.0 / (d - j))
            rem -= mj
            k = gen.binomial(mj, 0.5)
            pos[j] += 2 * k - mj
    elif pcode == 1:
        s = math.sqrt(dt) * p2
        for j in range(d):
            pos[j] += dt * p1 + s * gen.standard_normal()
    elif pcode == 2:
        n = int(dt)
        for j in range(d):
            k = gen.binomial(n, 0.5)
            pos[j] += n * p1 + p2 * (2 * k - n)
    elif pcode == 3:
        e = -1.0 / p1
        acc = 0.0
        for _ in range(int(dt)):
            u = gen.random()
            if u < 0.5:
                acc -= (1.0 - 2.0 * u) ** e
            else:
                acc += (2.0 - 2.0 * u) ** e
        pos[0] += acc
    else:
        s = math.sqrt(dt)
        for j in range(d):
            pos[j] += dt * p1 + s * gen.standard_normal()


@njit(cache=True)
def _step(gen, pcode, d, p1, p2, prev, out):
    for j in range(d):
        out[j] = prev[j]
    if pcode == 0:
        u = gen.random()
        if u >= p1:
            k = int((u - p1) / (1.0 - p1) * 2 * d)
            if k >= 2 * d:
                k = 2 * d - 1
            out[k >> 1] += 1.0 if (k & 1) == 0 else -1.0
    elif pcode == 1:
        for j in range(d):
            out[j] += p1 + p2 * gen.standard_normal()
    elif pcode == 2:
        for j in range(d):
            out[j] += p1 + (p2 if gen.random() < 0.5 else -p2)
    else:
        u = gen.random()
        e = -1.0 / p1
        if u < 0.5:
            out[0] -= (1.0 - 2.0 * u) ** e
        else:
            out[0] += (2.0 - 2.0 * u) ** e


@njit(cache=True)
def path_engine(gen, horizon, x0, lin, kcode, a, b, table, rcode, rp, pcode, d, p1, p2):
    """Full discrete-time path X(0..horizon) of one replica."""
    H = int(horizon)
    X = np.empty((H + 1, d))
    X[0, :] = x0
    t = 0
    nrel = 0
    while True:
        end = t + int(draw_runlen(gen, rcode, rp))
        stop = min(end, H + 1)
        if pcode == 0 and d == 1:
            # hot loop for the one-dimensional lazy walk
            q = 0.5 * (1.0 + p1)
            x = X[t, 0]
            for s in range(t + 1, stop):
                u = gen.random()
                if u >= p1:
                    x += 1.0 if u >= q else -1.0
                X[s, 0] = x
        else:
            for s in range(t + 1, stop):
                _step(gen, pcode, d, p1, p2, X[s - 1], X[s])
        if end > H:
            break
        r = int(relocate(True, lin, kcode, a, b, table, float(end), gen.random()))
        X[end, :] = X[r, :]
        nrel += 1
        t = end
    return X


@njit(cache=True)
def _fill_runs(gen, T, n, horizon, rcode, rp):
    # one loop per law: calling draw_runlen here costs more than the draw
    cap = T.shape[0] - 1
    if rcode == 1:
        while T[n] <= horizon and n < cap:
            T[n + 1] = T[n] + rp
            n += 1
    elif rcode == 0 and rp == 0.5:
        while T[n] <= horizon and n < cap:
            T[n + 1] = T[n] + (1.0 - math.frexp(gen.random())[1])
            n += 1
    elif rcode == 0:
        lq = math.log1p(-rp)
        while T[n] <= horizon and n < cap:
            T[n + 1] = T[n] + (math.floor(math.log1p(-gen.random()) / lq) + 1.0)
            n += 1
    elif rcode == 2:
        k = int(rp)
        while T[n] <= horizon and n < cap:
            T[n + 1] = T[n] + float(gen.integers(1, k + 1))
            n += 1
    else:
        while T[n] <= horizon and n < cap:
            T[n + 1] = T[n] + gen.standard_exponential() / rp
            n += 1
    return n


@njit(cache=True)
def _run_times(gen, horizon, rcode, rp, mean_len):
    """T_0 = 0 < T_1 < ... < T_n with T_{n-1} <= horizon < T_n."""
    T = np.empty(int(horizon / mean_len * 1.2) + 1024)
    T[0] = 0.0
    n = _fill_runs(gen, T, 0, horizon, rcode, rp)
    while T[n] <= horizon:
        T2 = np.empty(2 * T.shape[0])
        T2[: T.shape[0]] = T
        T = T2
        n = _fill_runs(gen, T, n, horizon, rcode, rp)
    return T[: n + 1]


@njit(cache=True)
def sweep_engine(gen, probes, x0, disc, lin, kcode, a, b, table, rcode, rp, mean_len,
                 pcode, d, p1, p2):
    """Positions at the probe times of one replica.

    Every run length up to the last probe is drawn.  A probe inside run i
    depends on the past only through V_i = X(R_{i-1}), which lies in an
    earlier run, and so on back to run 1; only the relocations on these
    ancestry chains are drawn, and the path is revealed at just those
    times, in time order, with O(1) displacement draws.  Relocation times
    and path pieces nobody looks at are independent of what is observed, so
    leaving them undrawn does not change the law.
    """
    m = probes.shape[0]
    H = probes[m - 1]
    T = _run_times(gen, H, rcode, rp, mean_len)
    n = T.shape[0] - 1          # runs 1..n, run i covers [T[i-1], T[i])
    nrel = n - 1                # relocation j happens at T[j+1] and starts run j+2
    R = np.full(max(nrel, 1), -1.0)
    nq = m
    for k in range(m):
        i = np.searchsorted(T, probes[k], side="right")
        while i >= 2 and R[i - 2] < 0.0:
            r = relocate(disc, lin, kcode, a, b, table, T[i - 1], gen.random())
            R[i - 2] = r
            nq += 1
            i = np.searchsorted(T, r, side="right")
    qt = np.empty(nq)
    qid = np.empty(nq, np.int64)
    c = 0
    for j in range(nrel):
        if R[j] >= 0.0:
            qt[c] = R[j]
            qid[c] = j
            c += 1
    for k in range(m):
        qt[c] = probes[k]
        qid[c] = nrel + k
        c += 1
    order = np.argsort(qt, kind="mergesort")
    vpos = {}
    out = np.empty((m, d))
    cur = np.empty(d)
    run = -1
    prev = 0.0
    for o in range(nq):
        q = order[o]
        tq = qt[q]
        i = np.searchsorted(T, tq, side="right")
        if i != run:
            run = i
            if i == 1:
                for j in range(d):
                    cur[j] = x0[j]
            else:
                v = vpos[i - 2]
                for j in range(d):
                    cur[j] = v[j]
            prev = T[i - 1]
        dt = tq - prev
        if dt > 0.0:
            add_displacement(gen, pcode, d, p1, p2, dt, cur)
            prev = tq
        if qid[q] < nrel:
            vpos[qid[q]] = cur.copy()
        else:
            for j in range(d):
                out[qid[q] - nrel, j] = cur[j]
    return out


@njit(cache=True)
def timechange_backward(gen, t, disc, lin, kcode, a, b, table, rcode, rp):
    """S(t) by walking the ancestry of the current run backwards.

    Needs a renewal set whose last point before any x can be drawn directly
    (geometric, deterministic, exponential).  Cost is the number of ancestors.
    """
    tau = last_renewal(gen, rcode, rp, t)
    s = t - tau
    while tau > 0.0:
        r = relocate(disc, lin, kcode, a, b, table, tau, gen.random())
        rho = last_renewal(gen, rcode, rp, r)
        s += r - rho
        tau = rho
    return s


@njit(cache=True)
def timechange_forward(gen, t, disc, lin, kcode, a, b, table, rcode, rp):
    """S(t) = sum_i B_i F_i + A(t) with independent B_i ~ Bernoulli(W_i / S_i)."""
    t0 = 0.0
    lprev = 0.0 if lin else NINF
    s = 0.0
    first = True
    while True:
        L = draw_runlen(gen, rcode, rp)
        t1 = t0 + L
        if t1 > t:
            return s + (t - t0)
        if disc:
            lcur = table[int(t1)]
        elif lin:
            lcur = mubar_lin(kcode, a, b, t1)
        else:
            lcur = log_mubar_cont(kcode, a, b, t1)
        if first:
            take = True
            first = False
        elif lin:
            take = lcur > 0.0 and gen.random() * lcur < lcur - lprev
        elif lcur == NINF:
            take = False
        else:
            take = gen.random() < -math.expm1(lprev - lcur)
        if take:
            s += within_run(disc, lin, kcode, a, b, table, t0, L, gen.random())
        lprev = lcur
        t0 = t1


@njit(cache=True)
def tree_heights(parent):
    """Heights in an increasing tree given parent indices (root has -1)."""
    n = parent.shape[0]
    h = np.zeros(n, np.int64)
    for i in range(1, n):
        h[i] = h[parent[i]] + 1
    return h
