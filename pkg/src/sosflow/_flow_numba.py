"""Compiled engine for the submodular flow solver.

A mirror of the reference engine in :mod:`sosflow.flow` operating on
flattened arrays so numba can compile it.  Scan orders, tie-breaking,
queue disciplines and floating-point operation order are identical to
the reference engine; the test suite asserts that both engines return
the same labeling, flow value and statistics.

State is threaded through top-level jitted functions as tuples of
arrays (closures would be re-inlined at every call site, which blows
up compile time).  Groups:

    net   = (ck, toff, cmembers, moff, inc_off, inc_clique, inc_pos)
    res   = (tables, cs, ct)
    tr    = (tree, dist, parent_node, parent_clique, cursor, in_orphan,
             first_child, next_sib, prev_sib, hiwater_s, hiwater_t)
    qs    = (queue_s, queue_t, next_s, next_t, orph)
    pth   = (path_kind, path_x, path_t, path_h, touched, mvec)

Scalar state lives in ``sc`` (int64) and ``fsc`` (float64) arrays; see
the slot constants.  Kernel error codes (the wrapper raises
FlowInvariantError for them): 1 = distance label decreased,
2 = residual table went negative, 3 = zero-bottleneck augmenting path,
4 = node in both trees at init, 5 = internal queue overflow.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from .energy import K_MAX

_FREE, _S, _T = 0, 1, 2
RESIDUAL_TOL = 1e-10
NONNEG_TOL = -1e-9

# sc slots
_ERR, _DS, _DT, _GROW_S, _GROW_T, _LEN_QS, _LEN_QT, _LEN_NS, _LEN_NT, \
    _ORPH_HEAD, _ORPH_CNT, _LAST_LEN, _CUR_ARC, _NV = range(14)


def _build_sep_tables():
    """Masks separating bit p from bit q, per clique size, in ascending
    order; frozen into the jitted code as constants."""
    masks = np.zeros((K_MAX + 1, K_MAX, K_MAX, 1 << (K_MAX - 1)),
                     dtype=np.int64)
    counts = np.zeros((K_MAX + 1, K_MAX, K_MAX), dtype=np.int64)
    for k in range(1, K_MAX + 1):
        for p in range(k):
            for q in range(k):
                if p == q:
                    continue
                z = 0
                for m in range(1 << k):
                    if (m >> p) & 1 and not (m >> q) & 1:
                        masks[k, p, q, z] = m
                        z += 1
                counts[k, p, q] = z
    return masks, counts


_SEPM, _SEPC = _build_sep_tables()


@njit(cache=True, nogil=True, inline="always")
def _cap(net, res, stats, ci, p, q):
    ck, toff = net[0], net[1]
    tables = res[0]
    stats[2] += 1
    best = np.inf
    base = toff[ci]
    k = ck[ci]
    for z in range(_SEPC[k, p, q]):
        v = tables[base + _SEPM[k, p, q, z]]
        if v < best:
            best = v
    return best


@njit(cache=True, nogil=True)
def _link(tr, sc, v, parent, which):
    first_child, next_sib, prev_sib = tr[6], tr[7], tr[8]
    slot = parent
    if parent < 0:
        slot = sc[_NV] if which == _S else sc[_NV] + 1
    head = first_child[slot]
    next_sib[v] = head
    prev_sib[v] = -1
    if head >= 0:
        prev_sib[head] = v
    first_child[slot] = v


@njit(cache=True, nogil=True)
def _unlink(tr, sc, v):
    tree, parent_node = tr[0], tr[2]
    first_child, next_sib, prev_sib = tr[6], tr[7], tr[8]
    parent = parent_node[v]
    slot = parent
    if parent < 0:
        slot = sc[_NV] if tree[v] == _S else sc[_NV] + 1
    nxt = next_sib[v]
    prv = prev_sib[v]
    if prv >= 0:
        next_sib[prv] = nxt
    elif first_child[slot] == v:
        first_child[slot] = nxt
    if nxt >= 0:
        prev_sib[nxt] = prv
    next_sib[v] = -1
    prev_sib[v] = -1


@njit(cache=True, nogil=True)
def _attach(tr, sc, v, which, d, pnode, pclique):
    tree, dist, parent_node, parent_clique = tr[0], tr[1], tr[2], tr[3]
    hiwater_s, hiwater_t = tr[9], tr[10]
    tree[v] = which
    if which == _S:
        if d < hiwater_s[v]:
            sc[_ERR] = 1
            return
        hiwater_s[v] = d
    else:
        if d < hiwater_t[v]:
            sc[_ERR] = 1
            return
        hiwater_t[v] = d
    dist[v] = d
    parent_node[v] = pnode
    parent_clique[v] = pclique
    _link(tr, sc, v, pnode, which)


@njit(cache=True, nogil=True)
def _orphan(tr, qs, sc, v):
    parent_node, parent_clique, in_orphan = tr[2], tr[3], tr[5]
    orph = qs[4]
    if in_orphan[v]:
        return
    _unlink(tr, sc, v)
    parent_node[v] = -2
    parent_clique[v] = -2
    in_orphan[v] = 1
    ocap = orph.shape[0]
    if sc[_ORPH_CNT] >= ocap:
        sc[_ERR] = 5
        return
    orph[(sc[_ORPH_HEAD] + sc[_ORPH_CNT]) % ocap] = v
    sc[_ORPH_CNT] += 1


@njit(cache=True, nogil=True)
def _free(tr, qs, sc, v):
    tree, cursor, first_child, next_sib = tr[0], tr[4], tr[6], tr[7]
    w = first_child[v]
    while w >= 0:
        nxt = next_sib[w]
        _orphan(tr, qs, sc, w)
        w = nxt
    tree[v] = _FREE
    cursor[v] = 0


@njit(cache=True, nogil=True)
def _requeue(qs, sc, v, d, which):
    queue_s, queue_t, next_s, next_t = qs[0], qs[1], qs[2], qs[3]
    if which == _S:
        if d == sc[_DS]:
            if sc[_LEN_QS] >= queue_s.shape[0]:
                sc[_ERR] = 5
                return
            queue_s[sc[_LEN_QS]] = v
            sc[_LEN_QS] += 1
        elif sc[_GROW_S] == 1 and d == sc[_DS] + 1:
            if sc[_LEN_NS] >= next_s.shape[0]:
                sc[_ERR] = 5
                return
            next_s[sc[_LEN_NS]] = v
            sc[_LEN_NS] += 1
    else:
        if d == sc[_DT]:
            if sc[_LEN_QT] >= queue_t.shape[0]:
                sc[_ERR] = 5
                return
            queue_t[sc[_LEN_QT]] = v
            sc[_LEN_QT] += 1
        elif sc[_GROW_T] == 1 and d == sc[_DT] + 1:
            if sc[_LEN_NT] >= next_t.shape[0]:
                sc[_ERR] = 5
                return
            next_t[sc[_LEN_NT]] = v
            sc[_LEN_NT] += 1


@njit(cache=True, nogil=True)
def _adopt(net, res, tr, qs, stats, sc, v):
    ck, cmembers, moff = net[0], net[2], net[3]
    inc_off, inc_clique, inc_pos = net[4], net[5], net[6]
    cs, ct = res[1], res[2]
    tree, dist, cursor, in_orphan = tr[0], tr[1], tr[4], tr[5]
    first_child, next_sib = tr[6], tr[7]
    tol = RESIDUAL_TOL

    stats[1] += 1
    in_orphan[v] = 0
    which = tree[v]
    d = dist[v]

    # same-level rescan; slot 0 is the terminal arc
    start = cursor[v] if sc[_CUR_ARC] == 1 else 0
    if start == 0 and d == 1:
        ok = cs[v] > tol if which == _S else ct[v] > tol
        if ok:
            _attach(tr, sc, v, which, 1, -1, -1)
            cursor[v] = 0
            return
    idx = 0
    for ii in range(inc_off[v], inc_off[v + 1]):
        ci = inc_clique[ii]
        pos = inc_pos[ii]
        k = ck[ci]
        for q in range(k):
            if q == pos:
                continue
            idx += 1
            if idx < start:
                continue
            u = cmembers[moff[ci] + q]
            if tree[u] != which or dist[u] != d - 1:
                continue
            if which == _S:
                c = _cap(net, res, stats, ci, q, pos)
            else:
                c = _cap(net, res, stats, ci, pos, q)
            if c > tol:
                _attach(tr, sc, v, which, d, u, ci)
                cursor[v] = idx
                return

    # relabel to lowest candidate distance, ties to lowest node index
    best_d = np.int64(-1)
    best_u = np.int64(-1)
    best_ci = np.int64(-1)
    ok = cs[v] > tol if which == _S else ct[v] > tol
    if ok:
        best_d = 0
    for ii in range(inc_off[v], inc_off[v + 1]):
        ci = inc_clique[ii]
        pos = inc_pos[ii]
        k = ck[ci]
        for q in range(k):
            if q == pos:
                continue
            u = cmembers[moff[ci] + q]
            if tree[u] != which:
                continue
            du = dist[u]
            if best_d >= 0 and (du > best_d or (du == best_d and u >= best_u)):
                continue
            if which == _S:
                c = _cap(net, res, stats, ci, q, pos)
            else:
                c = _cap(net, res, stats, ci, pos, q)
            if c > tol:
                best_d = du
                best_u = u
                best_ci = ci

    limit = sc[_DS] + sc[_GROW_S] if which == _S else sc[_DT] + sc[_GROW_T]
    if best_d < 0 or best_d + 1 > limit:
        _free(tr, qs, sc, v)
        return
    newd = best_d + 1
    if newd < d:
        sc[_ERR] = 1
        return
    if newd != d:
        w = first_child[v]
        while w >= 0:
            nxt = next_sib[w]
            _orphan(tr, qs, sc, w)
            w = nxt
    cursor[v] = 0
    _attach(tr, sc, v, which, newd, best_u, best_ci)
    if newd != d:
        _requeue(qs, sc, v, newd, which)


@njit(cache=True, nogil=True)
def _drain(net, res, tr, qs, stats, sc):
    orph = qs[4]
    ocap = orph.shape[0]
    while sc[_ORPH_CNT] > 0 and sc[_ERR] == 0:
        v = orph[sc[_ORPH_HEAD]]
        sc[_ORPH_HEAD] = (sc[_ORPH_HEAD] + 1) % ocap
        sc[_ORPH_CNT] -= 1
        _adopt(net, res, tr, qs, stats, sc, v)


@njit(cache=True, nogil=True)
def _augment(net, res, tr, qs, pth, stats, fsc, sc, ia, ib, ci0, pos0, q0,
             kind):
    """Augment along the tree path through the contact.

    kind 0: clique contact arc (ia in S) -> (ib in T) via clique ci0
    kind 1: sink contact, path s..ia + (ia, t)
    kind 2: source contact, path (s, ia) + ia..t
    """
    ck, cmembers, moff = net[0], net[2], net[3]
    toff = net[1]
    tables, cs, ct = res[0], res[1], res[2]
    tree, parent_node, parent_clique, in_orphan = tr[0], tr[2], tr[3], tr[5]
    path_kind, path_x, path_t, path_h, touched, mvec = \
        pth[0], pth[1], pth[2], pth[3], pth[4], pth[5]
    tol = RESIDUAL_TOL

    plen = 0
    if kind != 2:
        a = ia
        while parent_clique[a] >= 0:
            ciq = parent_clique[a]
            pn = parent_node[a]
            tp = -1
            hp = -1
            for p in range(ck[ciq]):
                m = cmembers[moff[ciq] + p]
                if m == pn:
                    tp = p
                if m == a:
                    hp = p
            path_kind[plen] = 2
            path_x[plen] = ciq
            path_t[plen] = tp
            path_h[plen] = hp
            plen += 1
            a = pn
        path_kind[plen] = 0
        path_x[plen] = a
        plen += 1
        lo = 0
        hi = plen - 1
        while lo < hi:
            path_kind[lo], path_kind[hi] = path_kind[hi], path_kind[lo]
            path_x[lo], path_x[hi] = path_x[hi], path_x[lo]
            path_t[lo], path_t[hi] = path_t[hi], path_t[lo]
            path_h[lo], path_h[hi] = path_h[hi], path_h[lo]
            lo += 1
            hi -= 1
    if kind == 0:
        path_kind[plen] = 2
        path_x[plen] = ci0
        path_t[plen] = pos0
        path_h[plen] = q0
        plen += 1
    elif kind == 1:
        path_kind[plen] = 1
        path_x[plen] = ia
        plen += 1
    else:
        path_kind[plen] = 0
        path_x[plen] = ia
        plen += 1
    if kind != 1:
        b = ib if kind == 0 else ia
        while parent_clique[b] >= 0:
            ciq = parent_clique[b]
            pn = parent_node[b]
            tp = -1
            hp = -1
            for p in range(ck[ciq]):
                m = cmembers[moff[ciq] + p]
                if m == b:
                    tp = p
                if m == pn:
                    hp = p
            path_kind[plen] = 2
            path_x[plen] = ciq
            path_t[plen] = tp
            path_h[plen] = hp
            plen += 1
            b = pn
        path_kind[plen] = 1
        path_x[plen] = b
        plen += 1

    if plen < sc[_LAST_LEN]:
        sc[_ERR] = 1
        return
    sc[_LAST_LEN] = plen
    if plen > stats[3]:
        stats[3] = plen

    # bottleneck: group clique arcs by clique (first-appearance order);
    # a clique crossed several times caps the push at
    # min table[mask] / m[mask] over masks with positive net sign m
    ntouch = 0
    delta = np.inf
    for e in range(plen):
        if path_kind[e] == 0:
            c = cs[path_x[e]]
            if c < delta:
                delta = c
        elif path_kind[e] == 1:
            c = ct[path_x[e]]
            if c < delta:
                delta = c
        else:
            ciq = path_x[e]
            seen = False
            for z in range(ntouch):
                if touched[z] == ciq:
                    seen = True
                    break
            if not seen:
                touched[ntouch] = ciq
                ntouch += 1
    for z in range(ntouch):
        ciq = touched[z]
        k = ck[ciq]
        for mask in range(1 << k):
            mvec[mask] = 0.0
        for e in range(plen):
            if path_kind[e] == 2 and path_x[e] == ciq:
                tp = path_t[e]
                hp = path_h[e]
                for mask in range(1 << k):
                    tin = (mask >> tp) & 1
                    hin = (mask >> hp) & 1
                    if tin == 1 and hin == 0:
                        mvec[mask] += 1.0
                    elif hin == 1 and tin == 0:
                        mvec[mask] -= 1.0
        stats[2] += 1
        base = toff[ciq]
        for mask in range(1 << k):
            if mvec[mask] > 0.0:
                c = tables[base + mask] / mvec[mask]
                if c < delta:
                    delta = c
    if not delta > 0.0:
        sc[_ERR] = 3
        return

    for e in range(plen):
        if path_kind[e] == 0:
            cs[path_x[e]] -= delta
        elif path_kind[e] == 1:
            ct[path_x[e]] -= delta
    for z in range(ntouch):
        ciq = touched[z]
        k = ck[ciq]
        for mask in range(1 << k):
            mvec[mask] = 0.0
        for e in range(plen):
            if path_kind[e] == 2 and path_x[e] == ciq:
                tp = path_t[e]
                hp = path_h[e]
                for mask in range(1 << k):
                    tin = (mask >> tp) & 1
                    hin = (mask >> hp) & 1
                    if tin == 1 and hin == 0:
                        mvec[mask] += 1.0
                    elif hin == 1 and tin == 0:
                        mvec[mask] -= 1.0
        base = toff[ciq]
        for mask in range(1 << k):
            tables[base + mask] += (-delta) * mvec[mask]
            if tables[base + mask] < NONNEG_TOL:
                sc[_ERR] = 2
                return
    fsc[0] += delta
    stats[0] += 1

    # orphan saturated tree arcs: terminal arcs in path order, then
    # every member of each touched clique
    for e in range(plen):
        if path_kind[e] == 0:
            a2 = path_x[e]
            if (tree[a2] == _S and parent_clique[a2] == -1
                    and in_orphan[a2] == 0 and cs[a2] <= tol):
                _orphan(tr, qs, sc, a2)
        elif path_kind[e] == 1:
            b2 = path_x[e]
            if (tree[b2] == _T and parent_clique[b2] == -1
                    and in_orphan[b2] == 0 and ct[b2] <= tol):
                _orphan(tr, qs, sc, b2)
    for z in range(ntouch):
        ciq = touched[z]
        k = ck[ciq]
        for pos in range(k):
            w = cmembers[moff[ciq] + pos]
            if in_orphan[w] == 1 or parent_clique[w] != ciq:
                continue
            pn = parent_node[w]
            pp = -1
            for p in range(k):
                if cmembers[moff[ciq] + p] == pn:
                    pp = p
                    break
            if tree[w] == _S:
                if _cap(net, res, stats, ciq, pp, pos) <= tol:
                    _orphan(tr, qs, sc, w)
            elif tree[w] == _T:
                if _cap(net, res, stats, ciq, pos, pp) <= tol:
                    _orphan(tr, qs, sc, w)
    _drain(net, res, tr, qs, stats, sc)


@njit(cache=True, nogil=True)
def _kernel(n, net, res, use_current_arc):
    ck, cmembers, moff = net[0], net[2], net[3]
    inc_off, inc_clique, inc_pos = net[4], net[5], net[6]
    cs, ct = res[1], res[2]
    tol = RESIDUAL_TOL

    tree = np.zeros(n, dtype=np.int8)
    dist = np.zeros(n, dtype=np.int64)
    parent_node = np.full(n, -2, dtype=np.int64)
    parent_clique = np.full(n, -2, dtype=np.int64)
    cursor = np.zeros(n, dtype=np.int64)
    in_orphan = np.zeros(n, dtype=np.uint8)
    first_child = np.full(n + 2, -1, dtype=np.int64)
    next_sib = np.full(n, -1, dtype=np.int64)
    prev_sib = np.full(n, -1, dtype=np.int64)
    hiwater_s = np.zeros(n, dtype=np.int64)
    hiwater_t = np.zeros(n, dtype=np.int64)
    tr = (tree, dist, parent_node, parent_clique, cursor, in_orphan,
          first_child, next_sib, prev_sib, hiwater_s, hiwater_t)

    stats = np.zeros(4, dtype=np.int64)
    fsc = np.zeros(1, dtype=np.float64)
    sc = np.zeros(14, dtype=np.int64)
    sc[_DS] = 1
    sc[_DT] = 1
    sc[_CUR_ARC] = 1 if use_current_arc else 0
    sc[_NV] = n

    qcap = 4 * n + 16
    qs = (np.empty(qcap, dtype=np.int64), np.empty(qcap, dtype=np.int64),
          np.empty(qcap, dtype=np.int64), np.empty(qcap, dtype=np.int64),
          np.empty(n + 1, dtype=np.int64))
    queue_s, queue_t, next_s, next_t = qs[0], qs[1], qs[2], qs[3]

    pcap = 2 * n + 8
    pth = (np.empty(pcap, dtype=np.int8), np.empty(pcap, dtype=np.int64),
           np.empty(pcap, dtype=np.int64), np.empty(pcap, dtype=np.int64),
           np.empty(pcap, dtype=np.int64),
           np.zeros(1 << K_MAX, dtype=np.float64))

    for i in range(n):
        if cs[i] > tol:
            _attach(tr, sc, i, _S, 1, -1, -1)
            queue_s[sc[_LEN_QS]] = i
            sc[_LEN_QS] += 1
    for i in range(n):
        if ct[i] > tol:
            if tree[i] != _FREE:
                sc[_ERR] = 4
            else:
                _attach(tr, sc, i, _T, 1, -1, -1)
                queue_t[sc[_LEN_QT]] = i
                sc[_LEN_QT] += 1

    while sc[_LEN_QS] > 0 and sc[_LEN_QT] > 0 and sc[_ERR] == 0:
        # forward pass
        sc[_GROW_S] = 1
        sc[_LEN_NS] = 0
        qi = 0
        while qi < sc[_LEN_QS] and sc[_ERR] == 0:
            i = queue_s[qi]
            qi += 1
            if tree[i] != _S or dist[i] != sc[_DS]:
                continue
            dead = False
            while ct[i] > tol and sc[_ERR] == 0:
                if tree[i] != _S or dist[i] != sc[_DS]:
                    dead = True
                    break
                _augment(net, res, tr, qs, pth, stats, fsc, sc,
                         i, -1, -1, -1, -1, 1)
            if dead or sc[_ERR] != 0:
                continue
            for ii in range(inc_off[i], inc_off[i + 1]):
                if dead:
                    break
                ci = inc_clique[ii]
                pos = inc_pos[ii]
                k = ck[ci]
                for q in range(k):
                    if q == pos or dead or sc[_ERR] != 0:
                        continue
                    j = cmembers[moff[ci] + q]
                    while sc[_ERR] == 0:
                        if tree[i] != _S or dist[i] != sc[_DS]:
                            dead = True
                            break
                        if _cap(net, res, stats, ci, pos, q) <= tol:
                            break
                        tj = tree[j]
                        if tj == _FREE:
                            _attach(tr, sc, j, _S, sc[_DS] + 1, i, ci)
                            if sc[_LEN_NS] >= next_s.shape[0]:
                                sc[_ERR] = 5
                            else:
                                next_s[sc[_LEN_NS]] = j
                                sc[_LEN_NS] += 1
                            break
                        elif tj == _S:
                            break
                        else:
                            _augment(net, res, tr, qs, pth, stats, fsc, sc,
                                     i, j, ci, pos, q, 0)
        sc[_GROW_S] = 0
        for z in range(sc[_LEN_NS]):
            queue_s[z] = next_s[z]
        sc[_LEN_QS] = sc[_LEN_NS]
        sc[_LEN_NS] = 0
        sc[_DS] += 1
        if sc[_LEN_QS] == 0 or sc[_ERR] != 0:
            break
        # reverse pass
        sc[_GROW_T] = 1
        sc[_LEN_NT] = 0
        qi = 0
        while qi < sc[_LEN_QT] and sc[_ERR] == 0:
            j = queue_t[qi]
            qi += 1
            if tree[j] != _T or dist[j] != sc[_DT]:
                continue
            dead = False
            while cs[j] > tol and sc[_ERR] == 0:
                if tree[j] != _T or dist[j] != sc[_DT]:
                    dead = True
                    break
                _augment(net, res, tr, qs, pth, stats, fsc, sc,
                         j, -1, -1, -1, -1, 2)
            if dead or sc[_ERR] != 0:
                continue
            for ii in range(inc_off[j], inc_off[j + 1]):
                if dead:
                    break
                ci = inc_clique[ii]
                pos = inc_pos[ii]
                k = ck[ci]
                for q in range(k):
                    if q == pos or dead or sc[_ERR] != 0:
                        continue
                    u = cmembers[moff[ci] + q]
                    while sc[_ERR] == 0:
                        if tree[j] != _T or dist[j] != sc[_DT]:
                            dead = True
                            break
                        if _cap(net, res, stats, ci, q, pos) <= tol:
                            break
                        tu = tree[u]
                        if tu == _FREE:
                            _attach(tr, sc, u, _T, sc[_DT] + 1, j, ci)
                            if sc[_LEN_NT] >= next_t.shape[0]:
                                sc[_ERR] = 5
                            else:
                                next_t[sc[_LEN_NT]] = u
                                sc[_LEN_NT] += 1
                            break
                        elif tu == _T:
                            break
                        else:
                            _augment(net, res, tr, qs, pth, stats, fsc, sc,
                                     u, j, ci, q, pos, 0)
        sc[_GROW_T] = 0
        for z in range(sc[_LEN_NT]):
            queue_t[z] = next_t[z]
        sc[_LEN_QT] = sc[_LEN_NT]
        sc[_LEN_NT] = 0
        sc[_DT] += 1
        if sc[_LEN_QT] == 0:
            break

    # reachability from s through residual arcs
    seen = np.zeros(n, dtype=np.uint8)
    bfs = np.empty(n, dtype=np.int64)
    bl = 0
    for i in range(n):
        if cs[i] > tol:
            seen[i] = 1
            bfs[bl] = i
            bl += 1
    bi = 0
    while bi < bl:
        i = bfs[bi]
        bi += 1
        for ii in range(inc_off[i], inc_off[i + 1]):
            ci = inc_clique[ii]
            pos = inc_pos[ii]
            k = ck[ci]
            for q in range(k):
                if q == pos:
                    continue
                j = cmembers[moff[ci] + q]
                if seen[j]:
                    continue
                if _cap(net, res, stats, ci, pos, q) > tol:
                    seen[j] = 1
                    bfs[bl] = j
                    bl += 1
    return seen, fsc[0], stats, sc[_ERR]


def solve(net, current_arc: bool):
    """Run the compiled kernel on a FlowNetwork, mutating its residuals."""
    from .flow import FlowInvariantError, FlowStats

    n = net.num_vars
    ncl = len(net.cliques)
    ck = np.fromiter((cl.k for cl in net.cliques), dtype=np.int64,
                     count=ncl)
    moff = np.zeros(ncl + 1, dtype=np.int64)
    toff = np.zeros(ncl + 1, dtype=np.int64)
    np.cumsum(ck, out=moff[1:])
    np.cumsum(1 << ck.astype(np.int64), out=toff[1:])
    cmembers = np.empty(moff[-1], dtype=np.int64)
    tables = np.empty(toff[-1], dtype=np.float64)
    if ncl:
        if ck.min() == ck.max():
            # uniform clique size: one reshape each
            k = int(ck[0])
            cmembers[:] = np.asarray(
                [cl.members for cl in net.cliques],
                dtype=np.int64).reshape(-1)
            tables[:] = np.stack(
                [cl.table for cl in net.cliques]).reshape(-1)
        else:
            for i, cl in enumerate(net.cliques):
                cmembers[moff[i]:moff[i + 1]] = cl.members
                tables[toff[i]:toff[i + 1]] = cl.table
    # incidence lists, ordered by (node, clique index, position)
    owner = np.repeat(np.arange(ncl, dtype=np.int64), ck) \
        if ncl else np.zeros(0, dtype=np.int64)
    posidx = (np.arange(moff[-1], dtype=np.int64) - moff[owner]) \
        if ncl else np.zeros(0, dtype=np.int64)
    order = np.argsort(cmembers, kind="stable")
    inc_clique = owner[order]
    inc_pos = posidx[order]
    counts = np.bincount(cmembers, minlength=n) \
        if ncl else np.zeros(n, dtype=np.int64)
    inc_off = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(counts, out=inc_off[1:])

    net_pack = (ck, toff[:-1].copy(), cmembers, moff[:-1].copy(),
                inc_off, inc_clique, inc_pos)
    res_pack = (tables, net.cs, net.ct)
    seen, flow, stats_arr, err = _kernel(n, net_pack, res_pack,
                                         bool(current_arc))

    msgs = {
        1: "distance label decreased (compiled engine)",
        2: "residual table went negative (compiled engine)",
        3: "zero-bottleneck augmenting path (compiled engine)",
        4: "node has both source and sink residual",
        5: "internal queue overflow (compiled engine)",
    }
    if err:
        raise FlowInvariantError(msgs.get(int(err), f"kernel error {err}"))

    for i, cl in enumerate(net.cliques):
        cl.table[:] = tables[toff[i]:toff[i + 1]]
    stats = FlowStats(augmentations=int(stats_arr[0]),
                      adoptions=int(stats_arr[1]),
                      capacity_evals=int(stats_arr[2]),
                      max_path_len=int(stats_arr[3]))
    return seen.astype(np.uint8), float(flow), stats
