"""Numba kernels for tree growing, margin prediction, and the path-dependent
SHAP recursion. Single-threaded and nogil: parallelism happens one level up,
one bootstrap run per worker thread.
"""

from __future__ import annotations

import numpy as np
from numba import njit

LOGISTIC = 0
SQUARED_ERROR = 1


@njit(cache=True, nogil=True)
def _grow_tree(Xt, sorted_idx, g, h, node_of_row, max_depth, lam,
               min_child_weight, min_gain, learning_rate):
    """Level-wise exact greedy tree construction (second-order gain).

    Xt is the transposed (p, n) feature matrix; sorted_idx[f] holds row
    indices in ascending order of feature f (stable sort, fixed once per
    training set). node_of_row is scratch: on return it maps every row to
    its leaf. Returns flat node arrays trimmed to the built size.
    """
    p, n = Xt.shape
    max_nodes = 2 ** (max_depth + 1)
    feature = np.full(max_nodes, -1, np.int32)
    threshold = np.zeros(max_nodes, np.float64)
    left = np.full(max_nodes, -1, np.int32)
    right = np.full(max_nodes, -1, np.int32)
    value = np.zeros(max_nodes, np.float64)
    cover = np.zeros(max_nodes, np.float64)
    gain = np.zeros(max_nodes, np.float64)
    node_g = np.zeros(max_nodes, np.float64)
    node_h = np.zeros(max_nodes, np.float64)

    G0 = 0.0
    H0 = 0.0
    for i in range(n):
        node_of_row[i] = 0
        G0 += g[i]
        H0 += h[i]
    node_g[0] = G0
    node_h[0] = H0
    cover[0] = H0
    n_nodes = 1

    active = np.empty(max_nodes, np.int32)
    active[0] = 0
    n_active = 1

    slot_of_node = np.full(max_nodes, -1, np.int32)
    best_gain = np.empty(max_nodes, np.float64)
    best_feat = np.full(max_nodes, -1, np.int32)
    best_thr = np.empty(max_nodes, np.float64)
    best_gl = np.empty(max_nodes, np.float64)
    best_hl = np.empty(max_nodes, np.float64)
    run_g = np.empty(max_nodes, np.float64)
    run_h = np.empty(max_nodes, np.float64)
    prev_val = np.empty(max_nodes, np.float64)
    seen = np.empty(max_nodes, np.uint8)

    for _depth in range(max_depth):
        if n_active == 0:
            break
        for s in range(n_active):
            nd = active[s]
            slot_of_node[nd] = s
            best_gain[s] = min_gain
            best_feat[s] = -1
        # Features are scanned in ascending index and thresholds in ascending
        # value with a strict > comparison, so equal-gain ties resolve to the
        # lowest feature index, then the lowest threshold.
        for f in range(p):
            for s in range(n_active):
                run_g[s] = 0.0
                run_h[s] = 0.0
                seen[s] = 0
            for k in range(n):
                i = sorted_idx[f, k]
                nd = node_of_row[i]
                s = slot_of_node[nd]
                if s < 0:
                    continue
                v = Xt[f, i]
                if seen[s] == 1 and v > prev_val[s]:
                    hl = run_h[s]
                    hr = node_h[nd] - hl
                    if hl >= min_child_weight and hr >= min_child_weight:
                        gl = run_g[s]
                        gr = node_g[nd] - gl
                        gt = node_g[nd]
                        ht = node_h[nd]
                        cand = 0.5 * (gl * gl / (hl + lam) + gr * gr / (hr + lam)
                                      - gt * gt / (ht + lam))
                        if cand > best_gain[s]:
                            best_gain[s] = cand
                            best_feat[s] = f
                            best_thr[s] = 0.5 * (prev_val[s] + v)
                            best_gl[s] = gl
                            best_hl[s] = hl
                run_g[s] += g[i]
                run_h[s] += h[i]
                prev_val[s] = v
                seen[s] = 1
        next_active = np.empty(max_nodes, np.int32)
        n_next = 0
        for s in range(n_active):
            nd = active[s]
            if best_feat[s] >= 0:
                lc = n_nodes
                rc = n_nodes + 1
                n_nodes += 2
                feature[nd] = best_feat[s]
                threshold[nd] = best_thr[s]
                left[nd] = lc
                right[nd] = rc
                gain[nd] = best_gain[s]
                node_g[lc] = best_gl[s]
                node_h[lc] = best_hl[s]
                cover[lc] = best_hl[s]
                node_g[rc] = node_g[nd] - best_gl[s]
                node_h[rc] = node_h[nd] - best_hl[s]
                cover[rc] = node_h[nd] - best_hl[s]
                next_active[n_next] = lc
                next_active[n_next + 1] = rc
                n_next += 2
            else:
                denom = node_h[nd] + lam
                value[nd] = 0.0 if denom <= 0.0 else -node_g[nd] / denom * learning_rate
            slot_of_node[nd] = -1
        for i in range(n):
            nd = node_of_row[i]
            lc = left[nd]
            if lc >= 0:
                if Xt[feature[nd], i] < threshold[nd]:
                    node_of_row[i] = lc
                else:
                    node_of_row[i] = right[nd]
        active = next_active
        n_active = n_next

    for s in range(n_active):
        nd = active[s]
        denom = node_h[nd] + lam
        value[nd] = 0.0 if denom <= 0.0 else -node_g[nd] / denom * learning_rate

    return (feature[:n_nodes], threshold[:n_nodes], left[:n_nodes], right[:n_nodes],
            value[:n_nodes], cover[:n_nodes], gain[:n_nodes])


@njit(cache=True, nogil=True)
def _sigmoid(m):
    if m >= 0.0:
        return 1.0 / (1.0 + np.exp(-m))
    e = np.exp(m)
    return e / (1.0 + e)


@njit(cache=True, nogil=True)
def _boost(Xt, sorted_idx, y, base_score, objective, num_rounds, max_depth, lam,
           min_child_weight, min_gain, learning_rate):
    """Run the full boosting loop; returns per-tree node arrays, the final
    training margins, and the per-round training loss curve."""
    p, n = Xt.shape
    margins = np.full(n, base_score)
    g = np.empty(n, np.float64)
    h = np.empty(n, np.float64)
    node_of_row = np.empty(n, np.int32)
    loss_curve = np.empty(num_rounds, np.float64)

    feats = []
    thrs = []
    lefts = []
    rights = []
    vals = []
    covs = []
    gains = []
    for r in range(num_rounds):
        if objective == LOGISTIC:
            for i in range(n):
                pr = _sigmoid(margins[i])
                g[i] = pr - y[i]
                h[i] = pr * (1.0 - pr)
        else:
            for i in range(n):
                g[i] = margins[i] - y[i]
                h[i] = 1.0
        fe, th, le, ri, va, co, ga = _grow_tree(
            Xt, sorted_idx, g, h, node_of_row, max_depth, lam, min_child_weight,
            min_gain, learning_rate)
        for i in range(n):
            margins[i] += va[node_of_row[i]]
        loss = 0.0
        if objective == LOGISTIC:
            for i in range(n):
                pr = _sigmoid(margins[i])
                # clamp avoids log(0) for saturated predictions
                pr = min(max(pr, 1e-15), 1.0 - 1e-15)
                loss -= y[i] * np.log(pr) + (1.0 - y[i]) * np.log(1.0 - pr)
        else:
            for i in range(n):
                dlt = margins[i] - y[i]
                loss += 0.5 * dlt * dlt
        loss_curve[r] = loss / n
        feats.append(fe)
        thrs.append(th)
        lefts.append(le)
        rights.append(ri)
        vals.append(va)
        covs.append(co)
        gains.append(ga)
    return feats, thrs, lefts, rights, vals, covs, gains, margins, loss_curve


@njit(cache=True, nogil=True)
def _predict_margins(tree_off, feature, threshold, left, right, value,
                     base_score, X):
    m = X.shape[0]
    T = tree_off.shape[0] - 1
    out = np.full(m, base_score)
    for r in range(m):
        for t in range(T):
            a = tree_off[t]
            nd = a
            while left[nd] >= 0:
                if X[r, feature[nd]] < threshold[nd]:
                    nd = a + left[nd]
                else:
                    nd = a + right[nd]
            out[r] += value[nd]
    return out


@njit(cache=True, nogil=True)
def _shap_one_tree(feature, threshold, left, right, value, cover, x, phi, maxd):
    """Path-dependent SHAP for a single tree, accumulated into phi.

    Iterative depth-first version of the unique-path recursion: each frame
    copies its parent's path slice, extends it with the incoming (cover-ratio,
    followed-by-x) fractions, and unwinds on feature revisits. Leaf deposits
    use the unwound permutation-weight sums.
    """
    cap = (maxd + 2) * (maxd + 3) // 2 + 4
    pf = np.empty(cap, np.int32)
    pz = np.empty(cap, np.float64)
    po = np.empty(cap, np.float64)
    pw = np.empty(cap, np.float64)

    smax = 4 * (maxd + 4)
    st_node = np.empty(smax, np.int32)
    st_ud = np.empty(smax, np.int32)
    st_poff = np.empty(smax, np.int32)
    st_moff = np.empty(smax, np.int32)
    st_pz = np.empty(smax, np.float64)
    st_po = np.empty(smax, np.float64)
    st_pfeat = np.empty(smax, np.int32)

    st_node[0] = 0
    st_ud[0] = 0
    st_poff[0] = 0
    st_moff[0] = 0
    st_pz[0] = 1.0
    st_po[0] = 1.0
    st_pfeat[0] = -1
    top = 1
    while top > 0:
        top -= 1
        node = st_node[top]
        ud = st_ud[top]
        poff = st_poff[top]
        off = st_moff[top]
        pzero = st_pz[top]
        pone = st_po[top]
        pfeat = st_pfeat[top]

        for i in range(ud):
            pf[off + i] = pf[poff + i]
            pz[off + i] = pz[poff + i]
            po[off + i] = po[poff + i]
            pw[off + i] = pw[poff + i]
        pf[off + ud] = pfeat
        pz[off + ud] = pzero
        po[off + ud] = pone
        pw[off + ud] = 1.0 if ud == 0 else 0.0
        for i in range(ud - 1, -1, -1):
            pw[off + i + 1] += pone * pw[off + i] * (i + 1) / (ud + 1)
            pw[off + i] = pzero * pw[off + i] * (ud - i) / (ud + 1)

        if left[node] < 0:
            leaf_v = value[node]
            for i in range(1, ud + 1):
                one_fr = po[off + i]
                zero_fr = pz[off + i]
                next_one = pw[off + ud]
                total = 0.0
                if one_fr != 0.0:
                    for j in range(ud - 1, -1, -1):
                        tmp = next_one * (ud + 1) / ((j + 1) * one_fr)
                        total += tmp
                        next_one = pw[off + j] - tmp * zero_fr * (ud - j) / (ud + 1)
                else:
                    for j in range(ud - 1, -1, -1):
                        total += pw[off + j] * (ud + 1) / (zero_fr * (ud - j))
                phi[pf[off + i]] += total * (po[off + i] - pz[off + i]) * leaf_v
        else:
            split_f = feature[node]
            if x[split_f] < threshold[node]:
                hot = left[node]
                cold = right[node]
            else:
                hot = right[node]
                cold = left[node]
            w = cover[node]
            hot_zf = cover[hot] / w
            cold_zf = cover[cold] / w
            iz = 1.0
            io = 1.0
            k = -1
            for idx in range(ud + 1):
                if pf[off + idx] == split_f:
                    k = idx
                    break
            if k >= 0:
                iz = pz[off + k]
                io = po[off + k]
                one_fr = po[off + k]
                zero_fr = pz[off + k]
                next_one = pw[off + ud]
                for j in range(ud - 1, -1, -1):
                    if one_fr != 0.0:
                        tmp = pw[off + j]
                        pw[off + j] = next_one * (ud + 1) / ((j + 1) * one_fr)
                        next_one = tmp - pw[off + j] * zero_fr * (ud - j) / (ud + 1)
                    else:
                        pw[off + j] = pw[off + j] * (ud + 1) / (zero_fr * (ud - j))
                for j in range(k, ud):
                    pf[off + j] = pf[off + j + 1]
                    pz[off + j] = pz[off + j + 1]
                    po[off + j] = po[off + j + 1]
                ud -= 1
            child_off = off + ud + 1
            st_node[top] = cold
            st_ud[top] = ud + 1
            st_poff[top] = off
            st_moff[top] = child_off
            st_pz[top] = cold_zf * iz
            st_po[top] = 0.0
            st_pfeat[top] = split_f
            top += 1
            st_node[top] = hot
            st_ud[top] = ud + 1
            st_poff[top] = off
            st_moff[top] = child_off
            st_pz[top] = hot_zf * iz
            st_po[top] = io
            st_pfeat[top] = split_f
            top += 1


@njit(cache=True, nogil=True)
def _shap_matrix(tree_off, feature, threshold, left, right, value, cover, X, maxd):
    """Per-instance SHAP values for every row of X, summed over trees."""
    m, p = X.shape
    T = tree_off.shape[0] - 1
    phi = np.zeros((m, p), np.float64)
    for r in range(m):
        for t in range(T):
            a = tree_off[t]
            b = tree_off[t + 1]
            _shap_one_tree(feature[a:b], threshold[a:b], left[a:b], right[a:b],
                           value[a:b], cover[a:b], X[r], phi[r], maxd)
    return phi
