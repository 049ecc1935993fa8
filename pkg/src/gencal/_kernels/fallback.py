"""Pure-numpy implementations of the hot kernels.

These are the reference semantics; ``_core.pyx`` reimplements the same
algorithms in C for speed.  Both flavours consume the splitmix64 stream
in the identical order, so integer results (random draws, subsample
indices, tree structures) agree between them.

Random stream
-------------
The generator is splitmix64 used in counter mode: output ``i`` of the
stream seeded with ``s`` is ``mix64(s + (i + 1) * GOLDEN)``.  This makes
every block of the stream addressable without materializing state, which
is what lets the numpy flavour vectorize exactly.

Poisson draws consume the stream in regime order: all elements with
``lam < 10`` first (one uniform each, inverted-cdf search), then the
``lam >= 10`` elements in element order (transformed-rejection, two
uniforms per attempt).  ``exp(-lam)`` and ``log(lam)`` are taken as
inputs so both kernel flavours see bit-identical intermediates.
"""

import math

import numpy as np

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_U53 = 1.0 / 9007199254740992.0  # 2**-53

# inverted-cdf search is capped; for lam < 10 the cap is unreachable in
# practice but protects against a uniform landing above the rounded cdf
INVERSION_CAP = 200


def raw64(seed, start, n):
    """Raw 64-bit outputs ``start .. start+n-1`` of the stream."""
    ctr = np.arange(start + 1, start + n + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        x = np.uint64(seed) + ctr * GOLDEN
        z = (x ^ (x >> np.uint64(30))) * _MIX1
        z = (z ^ (z >> np.uint64(27))) * _MIX2
        return z ^ (z >> np.uint64(31))


def uniforms(seed, start, n):
    """n doubles in [0, 1); consumes n stream positions."""
    return (raw64(seed, start, n) >> np.uint64(11)).astype(np.float64) * _U53


def normals(seed, start, n):
    """n standard normals via Box-Muller; consumes 2*ceil(n/2) positions."""
    pairs = (n + 1) // 2
    r = raw64(seed, start, 2 * pairs)
    u1 = ((r[0::2] >> np.uint64(11)) + np.uint64(1)).astype(np.float64) * _U53
    u2 = (r[1::2] >> np.uint64(11)).astype(np.float64) * _U53
    rad = np.sqrt(-2.0 * np.log(u1))
    ang = (2.0 * math.pi) * u2
    out = np.empty(2 * pairs)
    out[0::2] = rad * np.cos(ang)
    out[1::2] = rad * np.sin(ang)
    return out[:n], 2 * pairs


def _poisson_ptrs_one(lam, loglam, seed, ctr):
    """One transformed-rejection draw for lam >= 10; returns (k, ctr)."""
    b = 0.931 + 2.53 * math.sqrt(lam)
    a = -0.059 + 0.02483 * b
    inv_alpha = 1.1239 + 1.1328 / (b - 3.4)
    v_r = 0.9277 - 3.6224 / (b - 2.0)
    while True:
        pair = raw64(seed, ctr, 2)
        ctr += 2
        u = float(pair[0] >> np.uint64(11)) * _U53 - 0.5
        v = float(pair[1] >> np.uint64(11)) * _U53
        us = 0.5 - abs(u)
        kf = math.floor((2.0 * a / us + b) * u + lam + 0.43)
        if us >= 0.07 and v <= v_r:
            return int(kf), ctr
        if kf < 0.0 or (us < 0.013 and v > us):
            continue
        if v <= 0.0 or kf > 4.0e18:
            continue
        if (math.log(v) + math.log(inv_alpha) - math.log(a / (us * us) + b)
                <= kf * loglam - lam - math.lgamma(kf + 1.0)):
            return int(kf), ctr


def poisson(seed, start, lam, pexp, loglam):
    """Poisson draws for each lam; returns (draws, consumed).

    lam, pexp = exp(-lam) and loglam = log(lam) must be aligned arrays.
    """
    lam = np.asarray(lam, dtype=np.float64)
    n = lam.shape[0]
    out = np.zeros(n, dtype=np.int64)
    small = lam < 10.0
    n_small = int(np.count_nonzero(small))

    if n_small:
        u = uniforms(seed, start, n_small)
        lam_s = lam[small]
        p = pexp[small].copy()
        s = p.copy()
        k = np.zeros(n_small, dtype=np.int64)
        active = u > s
        j = 0
        while j < INVERSION_CAP and active.any():
            j += 1
            p[active] *= lam_s[active] / j
            s[active] += p[active]
            k[active] = j
            active &= u > s
        out[small] = k

    ctr = start + n_small
    if n_small < n:
        large_idx = np.nonzero(~small)[0]
        for i in large_idx:
            k, ctr = _poisson_ptrs_one(float(lam[i]), float(loglam[i]), seed, ctr)
            out[i] = k
    return out, ctr - start


def fisher_yates_take(seed, start, n, k):
    """First k entries of a seeded Fisher-Yates shuffle of range(n).

    Consumes exactly k stream positions; the result is a uniform sample
    without replacement (a full permutation when k == n).
    """
    u = uniforms(seed, start, k)
    a = np.arange(n, dtype=np.int64)
    for i in range(k):
        j = i + int(u[i] * (n - i))
        a[i], a[j] = a[j], a[i]
    return a[:k].copy(), k


def grow_tree(x, grad, order, depth, min_node):
    """Grow one depth-limited regression tree on squared-error gain.

    x: (m, p) feature block, grad: (m,) targets, order: (p, m) per-feature
    stable argsort of x.  A node at level < depth splits on the candidate
    maximizing ``SL^2/nL + SR^2/nR - S^2/n`` (strictly positive, both
    children >= min_node); candidates are scanned feature-ascending then
    position-ascending and the first strict maximum wins.  Thresholds are
    midpoints of adjacent distinct values.

    Returns (feature, threshold, left, right, node_of_row); leaves have
    feature == -1.
    """
    m, p = x.shape
    feature = [-1]
    threshold = [0.0]
    left = [-1]
    right = [-1]
    node_of_row = np.zeros(m, dtype=np.int32)

    active = [0]  # splittable nodes at the current level
    for _level in range(depth):
        if not active:
            break
        best = {nd: (0.0, -1, 0.0) for nd in active}  # gain, feat, thr
        for f in range(p):
            rows = order[f]
            nd_sorted = node_of_row[rows]
            for nd in active:
                sel = rows[nd_sorted == nd]
                cnt = sel.shape[0]
                if cnt < 2 * min_node:
                    continue
                vals = x[sel, f]
                gs = np.cumsum(grad[sel])
                total = gs[-1]
                base = total * total / cnt
                n_l = np.arange(1, cnt, dtype=np.float64)
                s_l = gs[:-1]
                s_r = total - s_l
                gain = s_l * s_l / n_l + s_r * s_r / (cnt - n_l) - base
                ok = (vals[:-1] != vals[1:]) & (n_l >= min_node) & (cnt - n_l >= min_node)
                gain = np.where(ok, gain, -np.inf)
                if not ok.any():
                    continue
                pos = int(np.argmax(gain))
                g = float(gain[pos])
                if g > best[nd][0]:
                    best[nd] = (g, f, 0.5 * (vals[pos] + vals[pos + 1]))
        nxt = []
        for nd in active:
            g, f, thr = best[nd]
            if f < 0:
                continue
            li, ri = len(feature), len(feature) + 1
            feature += [-1, -1]
            threshold += [0.0, 0.0]
            left += [-1, -1]
            right += [-1, -1]
            feature[nd] = f
            threshold[nd] = thr
            left[nd] = li
            right[nd] = ri
            mask = node_of_row == nd
            go_left = mask & (x[:, f] <= thr)
            node_of_row[go_left] = li
            node_of_row[mask & ~go_left] = ri
            nxt += [li, ri]
        active = nxt

    return (np.asarray(feature, dtype=np.int32), np.asarray(threshold),
            np.asarray(left, dtype=np.int32), np.asarray(right, dtype=np.int32),
            node_of_row)


def apply_tree(feature, threshold, left, right, x):
    """Leaf node index for each row of x."""
    n = x.shape[0]
    node = np.zeros(n, dtype=np.int32)
    pending = feature[node] >= 0
    while pending.any():
        idx = np.nonzero(pending)[0]
        nd = node[idx]
        f = feature[nd]
        goes_left = x[idx, f] <= threshold[nd]
        node[idx] = np.where(goes_left, left[nd], right[nd])
        pending[idx] = feature[node[idx]] >= 0
    return node
