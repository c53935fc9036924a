"""Compiled hot loops: offspring sampling, arena expansion, and the walk stepper.

All kernels take explicit ``numpy.random.Generator`` objects and mutate
preallocated arrays; the Python wrappers in :mod:`branchwalk.tree` and
:mod:`branchwalk.walk` own allocation, growth, and error reporting. Kernels
that can outgrow a buffer are resumable: they park their loop state in the
``state`` vector and return a status code telling the wrapper what to grow.
"""

from __future__ import annotations

import numpy as np
from numba import njit

# resumable-kernel status codes
OK = 0
NEED_ARENA = 1
NEED_RETURNS = 2
NEED_VISITED = 3
CAP = 4

#: free arena slots guaranteed before any expansion; an offspring draw above
#: this is treated as a resource violation (probability < 1e-700 for shipped laws)
KID_HEADROOM = 4096

# state-vector slots for the walk kernel
S_POS = 0
S_STEPS = 1
S_SIZE = 2
S_NVISITED = 3
S_NRETURNS = 4
S_GHOST = 5
S_MAXCOUNT = 6
S_MAXDEPTH = 7
S_BARRIER_HIT = 8
S_BARRIER_STEP = 9
STATE_LEN = 10


@njit(cache=True, nogil=True)
def sample_offspring(rng, kind, param):
    """One draw of the offspring count N. kind: 0 const, 1 geometric, 2 poisson."""
    if kind == 0:
        return np.int64(param)
    if kind == 1:
        # P(N=k) = (1-r) r^k via exact inversion
        r = param
        u1 = 1.0 - rng.random()  # in (0, 1]
        return np.int64(np.log(u1) / np.log(r))
    # poisson by sequential inversion; desk-scale means only
    m = param
    pk = np.exp(-m)
    acc = pk
    k = np.int64(0)
    uu = rng.random()
    while uu > acc and k < 100000:
        k += 1
        pk *= m / k
        acc += pk
    return k


@njit(cache=True, nogil=True)
def sample_atom(rng, vals, cdf):
    """One displacement draw by CDF inversion over the atom list."""
    uu = rng.random()
    j = 0
    while uu > cdf[j]:
        j += 1
    return vals[j]


@njit(cache=True, nogil=True)
def expand_vertex(rng, off_kind, off_param, vals, cdf,
                  parent, depth, V, wpar, lam, U, wchild,
                  cumV, cumC, ratio, cstart, nch,
                  x, size):
    """Sample x's children into the arena tail. Returns the new size, or -1
    when the draw exceeds the guaranteed headroom.

    Consumes 1 + N draws from ``rng`` (offspring count, then one atom per
    child), independent of arena layout, so streams never depend on growth
    scheduling.
    """
    n = sample_offspring(rng, off_kind, off_param)
    if size + n > parent.shape[0]:
        return np.int64(-1)
    s = 0.0
    base = size
    for i in range(n):
        a = sample_atom(rng, vals, cdf)
        w = np.exp(-a)
        s += w
        c = base + i
        parent[c] = x
        depth[c] = depth[x] + 1
        V[c] = V[x] + a
        # compensated running sum of e^{V} along the path
        y = np.exp(V[c]) - cumC[x]
        t = cumV[x] + y
        cumC[c] = (t - cumV[x]) - y
        cumV[c] = t
        ratio[c] = 1.0 + w * ratio[x]
        wchild[c] = w
        wpar[c] = np.nan
        lam[c] = np.nan
        U[c] = np.nan
        cstart[c] = -1
        nch[c] = 0
    inv = 1.0 / (1.0 + s)
    for i in range(n):
        wchild[base + i] *= inv
    lam[x] = s
    wpar[x] = inv
    U[x] = V[x] - np.log1p(s)
    cstart[x] = base
    nch[x] = np.int32(n)
    return size + n


@njit(cache=True, nogil=True)
def expand_many(rng, off_kind, off_param, vals, cdf,
                parent, depth, V, wpar, lam, U, wchild,
                cumV, cumC, ratio, cstart, nch,
                ids, start_idx, size):
    """Expand ids[start_idx:] until headroom runs out.

    Returns (new_size, next_idx); next_idx == ids.size means all done, and
    new_size == -1 signals a headroom violation inside expand_vertex.
    """
    i = start_idx
    while i < ids.shape[0]:
        x = ids[i]
        if cstart[x] < 0:
            if size + KID_HEADROOM > parent.shape[0]:
                return size, i
            size = expand_vertex(rng, off_kind, off_param, vals, cdf,
                                 parent, depth, V, wpar, lam, U, wchild,
                                 cumV, cumC, ratio, cstart, nch, x, size)
            if size < 0:
                return np.int64(-1), i
        i += 1
    return size, i


@njit(cache=True, nogil=True)
def walk_kernel(walk_rng, tree_rng, off_kind, off_param, vals, cdf,
                parent, depth, V, wpar, lam, U, wchild,
                cumV, cumC, ratio, cstart, nch,
                L, AC, visited, returns, state,
                stop_steps, stop_returns, thresh):
    """Advance the biased walk until a stop condition or a buffer limit.

    One uniform from ``walk_rng`` per step taken from a tree vertex; the
    ghost-to-root move is deterministic and draw-free. Expansion draws come
    from ``tree_rng``. ``thresh <= 0`` disables barrier bookkeeping.
    Stop conditions: total steps reaching ``stop_steps`` (if >= 0) or root
    return count reaching ``stop_returns`` (if >= 0).
    """
    while True:
        if stop_steps >= 0 and state[S_STEPS] >= stop_steps:
            return OK
        if stop_returns >= 0 and state[S_NRETURNS] >= stop_returns:
            return OK
        # conservative buffer checks so a step never half-commits
        if state[S_NVISITED] + 1 > visited.shape[0]:
            return NEED_VISITED
        if state[S_NRETURNS] + 1 > returns.shape[0]:
            return NEED_RETURNS
        pos = state[S_POS]
        if pos < 0:
            nxt = np.int64(0)  # ghost moves to the root with probability 1
        else:
            if cstart[pos] < 0:
                if state[S_SIZE] + KID_HEADROOM > parent.shape[0]:
                    return NEED_ARENA
                newsize = expand_vertex(
                    tree_rng, off_kind, off_param, vals, cdf,
                    parent, depth, V, wpar, lam, U, wchild,
                    cumV, cumC, ratio, cstart, nch,
                    pos, state[S_SIZE])
                if newsize < 0:
                    return CAP
                state[S_SIZE] = newsize
            r = walk_rng.random()
            if r < wpar[pos] or nch[pos] == 0:
                nxt = parent[pos]
            else:
                acc = wpar[pos]
                c0 = cstart[pos]
                n = nch[pos]
                nxt = c0 + n - 1  # rounding fallback: last child
                for i in range(n):
                    acc += wchild[c0 + i]
                    if r < acc:
                        nxt = c0 + i
                        break
            if nxt >= 0 and parent[nxt] == pos:
                # first entry into nxt this run is always a down-move, so the
                # ancestor-crossing flag is in place before it is ever read
                if AC[pos] != 0 or (thresh > 0.0 and ratio[pos] > thresh):
                    AC[nxt] = 1
                else:
                    AC[nxt] = 0
        state[S_POS] = nxt
        state[S_STEPS] += 1
        if nxt < 0:
            state[S_GHOST] += 1
        else:
            cnt = L[nxt] + 1
            L[nxt] = cnt
            if cnt == 1:
                visited[state[S_NVISITED]] = nxt
                state[S_NVISITED] += 1
            if cnt > state[S_MAXCOUNT]:
                state[S_MAXCOUNT] = cnt
            if depth[nxt] > state[S_MAXDEPTH]:
                state[S_MAXDEPTH] = np.int64(depth[nxt])
            if nxt == 0:
                returns[state[S_NRETURNS]] = state[S_STEPS]
                state[S_NRETURNS] += 1
            if thresh > 0.0 and AC[nxt] == 0 and ratio[nxt] > thresh:
                if state[S_BARRIER_HIT] == 0:
                    state[S_BARRIER_HIT] = 1
                    state[S_BARRIER_STEP] = state[S_STEPS]


# ---------------------------------------------------------------------------
# tilted-walk kernels
# ---------------------------------------------------------------------------


@njit(cache=True, nogil=True)
def persistence_kernel(rng, vals, cdf, alpha, kmax, trials, out):
    """First time the tilted walk drops below -alpha, clipped at kmax + 1."""
    for t in range(trials):
        s = 0.0
        hit = np.int64(kmax + 1)
        for i in range(1, kmax + 1):
            s += sample_atom(rng, vals, cdf)
            if s < -alpha:
                hit = np.int64(i)
                break
        out[t] = hit


@njit(cache=True, nogil=True)
def spine_stats_kernel(rng, vals, cdf, k, trials, smax, smin, sdrop, ladders):
    """Per-path running max/min, worst drop from the running max, and the
    number of strict records above the full history (ladder epochs)."""
    for t in range(trials):
        s = 0.0
        record = 0.0  # records compare against all history including S_0 = 0
        nlad = np.int64(0)
        mx = -np.inf  # running max over steps 1..i
        mn = np.inf
        worst = 0.0
        for i in range(1, k + 1):
            s += sample_atom(rng, vals, cdf)
            if s > record:
                record = s
                nlad += 1
            if s > mx:
                mx = s
            if s < mn:
                mn = s
            drop = mx - s
            if drop > worst:
                worst = drop
        smax[t] = mx
        smin[t] = mn
        sdrop[t] = worst
        ladders[t] = nlad


@njit(cache=True, nogil=True)
def e38_kernel(rng, vals, cdf, b, lam, cap, trials, out, trunc):
    """Per-trial sum over l < tau_lambda of e^{-b (lam - drop_l)}.

    drop_0 = 0 by convention; for l >= 1 the drop is measured against the
    running max over steps 1..l. Paths are cut at ``cap`` steps with the
    truncation flagged.
    """
    for t in range(trials):
        acc = np.exp(-b * lam)  # l = 0 term; the drop at zero is zero
        s = 0.0
        mx = -np.inf
        cut = np.uint8(0)
        l = 0
        while True:
            s += sample_atom(rng, vals, cdf)
            l += 1
            if s > mx:
                mx = s
            drop = mx - s
            if drop > lam:
                break
            acc += np.exp(-b * (lam - drop))
            if l >= cap:
                cut = np.uint8(1)
                break
        out[t] = acc
        trunc[t] = cut


@njit(cache=True, nogil=True)
def ahz_kernel(rng, vals, cdf, b, lam, cap, trials, out, trunc):
    """Per-trial sum of e^{-b S_l} over l before the first ladder epoch,
    killed once the path has gone below -lam."""
    for t in range(trials):
        s = 0.0
        acc = 0.0
        cut = np.uint8(0)
        l = 0
        while True:
            if s > 0.0 or s < -lam:
                break
            acc += np.exp(-b * s)
            if l >= cap:
                cut = np.uint8(1)
                break
            s += sample_atom(rng, vals, cdf)
            l += 1
        out[t] = acc
        trunc[t] = cut


# ---------------------------------------------------------------------------
# two-sided mean-offspring identity kernels
# ---------------------------------------------------------------------------


@njit(cache=True, nogil=True)
def g_eval(g_id, last, minpath, lam_val):
    """Built-in path functionals; see spine.G_LIBRARY."""
    if g_id == 0:
        return 1.0
    if g_id == 1:
        return np.exp(-last)
    if g_id == 2:
        if minpath >= -1.0:
            return min(lam_val, 5.0)
        return 0.0
    if g_id == 3:
        if last <= 1.0:
            return 1.0
        return 0.0
    if g_id == 4:
        return min(lam_val, 3.0)
    # g_id == 5: generation sums of it are the derivative martingale
    return last * np.exp(-last)


@njit(cache=True, nogil=True)
def m2o_lhs_kernel(rng, off_kind, off_param, vals, cdf, n, g_id, need_lambda,
                   trials, vprev, mprev, vcur, mcur):
    """Sum of g over generation n of fresh trees, accumulated over trials.

    Streams one generation at a time keeping only (V, min-so-far) per vertex.
    Returns (total, total of squares, completed trials, overflowed trials);
    an overflowing trial is dropped whole so partial sums never leak in.
    """
    cap = vprev.shape[0]
    total = 0.0
    total2 = 0.0
    done = np.int64(0)
    overflow = np.int64(0)
    for t in range(trials):
        vprev[0] = 0.0
        mprev[0] = np.inf
        cnt = np.int64(1)
        bad = False
        for _level in range(n):
            nxt = np.int64(0)
            for i in range(cnt):
                nkids = sample_offspring(rng, off_kind, off_param)
                for _j in range(nkids):
                    a = sample_atom(rng, vals, cdf)
                    if nxt >= cap:
                        bad = True
                        break
                    v = vprev[i] + a
                    vcur[nxt] = v
                    mm = mprev[i]
                    if v < mm:
                        mm = v
                    mcur[nxt] = mm
                    nxt += 1
                if bad:
                    break
            if bad:
                break
            tmpv = vprev; vprev = vcur; vcur = tmpv
            tmpm = mprev; mprev = mcur; mcur = tmpm
            cnt = nxt
            if cnt == 0:
                break
        if bad:
            overflow += 1
            continue
        tsum = 0.0
        for i in range(cnt):
            lam_val = 0.0
            if need_lambda:
                nk = sample_offspring(rng, off_kind, off_param)
                for _j in range(nk):
                    lam_val += np.exp(-sample_atom(rng, vals, cdf))
            tsum += g_eval(g_id, vprev[i], mprev[i], lam_val)
        total += tsum
        total2 += tsum * tsum
        done += 1
    return total, total2, done, overflow


@njit(cache=True, nogil=True)
def m2o_rhs_kernel(rng, off_kind, off_param, vals, cdf, tvals, tcdf,
                   n, g_id, need_lambda, inner, trials):
    """E[e^{S_n} G(path)] side: tilted n-step path, independent inner samples
    of the one-generation mass for the last g argument."""
    total = 0.0
    total2 = 0.0
    for t in range(trials):
        s = 0.0
        smin = np.inf
        for _i in range(n):
            s += sample_atom(rng, tvals, tcdf)
            if s < smin:
                smin = s
        gacc = 0.0
        for _r in range(inner):
            lam_val = 0.0
            if need_lambda:
                nk = sample_offspring(rng, off_kind, off_param)
                for _j in range(nk):
                    lam_val += np.exp(-sample_atom(rng, vals, cdf))
            gacc += g_eval(g_id, s, smin, lam_val)
        val = np.exp(s) * gacc / inner
        total += val
        total2 += val * val
    return total, total2
