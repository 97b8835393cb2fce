"""Exact sum-of-submodular minimization by maximum submodular flow.

The network has a node per variable plus a source s and sink t.
Source and sink arcs carry plain residual capacities derived from the
unary costs.  Each clique C contributes an arc (i, j) for every
ordered pair of distinct members, whose residual capacity is induced
by a residual clique table  cap(i, j) = min { fbar_C(S) : i in S,
j not in S }.  Pushing delta units of flow on (i, j) updates the whole
table: entries separating i from j drop by delta, entries separating
j from i rise by delta, so capacities of the other arcs in the same
clique move too.  All tables stay entrywise nonnegative.

A maximum flow is found with an incremental breadth-first search
(IBFS) strategy: bidirectional shortest-path trees grown from s and t
one level at a time, augmenting on contact, with orphan adoption after
saturating pushes.  When no augmenting path remains, the set of nodes
reachable from s through residual arcs is a global minimizer of the
energy (labeling reachable nodes 1).

Two engines implement the identical algorithm: a pure-Python reference
(this module) and a compiled fast path (:mod:`sosflow._flow_numba`).
They follow the same scan orders and therefore produce identical
results, including search statistics; the test suite asserts this.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from functools import lru_cache
from typing import NamedTuple

import numpy as np

from .energy import SoSEnergy, is_submodular

__all__ = [
    "RESIDUAL_TOL",
    "SourceArc",
    "SinkArc",
    "CliqueArc",
    "FlowNetwork",
    "FlowState",
    "MinCutResult",
    "FlowError",
    "FlowInvariantError",
    "build_network",
    "residual_capacity",
    "push_flow",
    "minimize",
    "dump_result",
]

# Residual capacities at or below this are treated as saturated.
# Integer-valued instances never get near it.
RESIDUAL_TOL = 1e-10

# Entrywise lower bound the residual tables must respect at all times.
NONNEG_TOL = -1e-9

_FREE, _S, _T = 0, 1, 2


class FlowError(ValueError):
    """Invalid input to the flow solver (e.g. a non-submodular clique)."""


class FlowInvariantError(AssertionError):
    """An internal solver invariant was violated; indicates a bug."""


class SourceArc(NamedTuple):
    node: int


class SinkArc(NamedTuple):
    node: int


class CliqueArc(NamedTuple):
    clique: int
    tail: int
    head: int


@lru_cache(maxsize=None)
def _sep_masks(k: int, p: int, q: int) -> np.ndarray:
    """Masks over a size-k clique with bit p set and bit q clear."""
    masks = np.arange(1 << k)
    keep = ((masks >> p) & 1).astype(bool) & ~((masks >> q) & 1).astype(bool)
    return masks[keep]


@lru_cache(maxsize=None)
def _arc_sign(k: int, p: int, q: int) -> np.ndarray:
    """Per-mask coefficient of a push on arc (p, q): +1 / -1 / 0."""
    masks = np.arange(1 << k)
    pin = (masks >> p) & 1
    qin = (masks >> q) & 1
    return (pin * (1 - qin) - qin * (1 - pin)).astype(np.int8)


class _Clique:
    """Residual clique state; position lookup built on first use."""

    __slots__ = ("members", "table", "table0", "_pos")

    def __init__(self, members, table, table0):
        self.members = members
        self.table = table
        self.table0 = table0
        self._pos = None

    @property
    def pos(self) -> dict[int, int]:
        if self._pos is None:
            self._pos = {v: p for p, v in enumerate(self.members)}
        return self._pos

    @property
    def k(self) -> int:
        return len(self.members)


@dataclass
class FlowNetwork:
    """Residual network: source/sink residuals plus residual clique tables."""

    num_vars: int
    cliques: list[_Clique]
    cs: np.ndarray    # residual capacity of (s, i)
    ct: np.ndarray    # residual capacity of (i, t)
    cs0: np.ndarray
    ct0: np.ndarray
    offset: float


def build_network(energy: SoSEnergy, tol: float = 1e-9) -> FlowNetwork:
    """Reparameterize an energy into a submodular flow network.

    Every clique table is split into a constant (its value on the empty
    set), a modular part taken from a greedy base-polytope vertex, and
    a nonnegative remainder that becomes the residual table.  The
    remainder vanishes on both the empty set and the full clique; this
    grounding is what ties the min cut to the energy minimum, since
    pairwise pushes leave those two entries untouched.  The modular
    part is folded into the unary costs, which are then themselves
    reparameterized: a variable with folded costs (c0, c1) gets source
    residual max(c0 - c1, 0) and sink residual max(c1 - c0, 0), with
    min(c0, c1) accumulated into the offset (labeling a node 1 puts it
    on the source side).  For every labeling S:

        energy(S) = offset + sum_{i not in S} cs[i]
                    + sum_{i in S} ct[i] + sum_C table_C[S & C]

    Raises :class:`FlowError` for cliques that fail the submodularity
    check beyond ``tol``, reporting the worst inequality.
    """
    n = energy.num_vars
    unary = energy.unary.copy()
    offset = 0.0

    # Grounding depends only on the table values; shared tables (weight
    # tying materializes one table per clique type) are processed once,
    # and the per-clique modular folds accumulate vectorized per group.
    cache: dict[bytes, tuple[np.ndarray, np.ndarray, float]] = {}
    fold_members: dict[bytes, list] = {}
    cliques: list[_Clique] = []
    for ci, cf in enumerate(energy.cliques):
        k = cf.size
        key = cf.table.tobytes()
        hit = cache.get(key)
        if hit is None:
            ok, violations = is_submodular(cf, tol)
            if not ok:
                worst = max(violations, key=lambda v: v.amount)
                raise FlowError(
                    f"clique {ci} (members {cf.members}) is not submodular: "
                    f"adding members at positions {worst.pos_i},{worst.pos_j} "
                    f"to base mask {worst.base_mask:#x} violates the "
                    f"exchange inequality by {worst.amount:g}")
            base = float(cf.table[0])
            # Greedy base-polytope vertex in member order: y_p is the
            # gain of adding member p to the prefix of earlier members.
            prefix = 0
            y = np.zeros(k)
            for p in range(k):
                y[p] = cf.table[prefix | (1 << p)] - cf.table[prefix]
                prefix |= 1 << p
            table = np.empty(1 << k)
            for mask in range(1 << k):
                ymask = sum(y[p] for p in range(k) if (mask >> p) & 1)
                table[mask] = cf.table[mask] - base - ymask
            if table.min() < NONNEG_TOL:
                raise FlowError(
                    f"clique {ci}: greedy grounding produced a negative "
                    f"residual ({table.min():g}); table is not submodular "
                    f"within tolerance")
            table[0] = 0.0
            table[(1 << k) - 1] = 0.0
            table.setflags(write=False)
            hit = (table, y, base)
            cache[key] = hit
            fold_members[key] = []
        table0, y, base = hit
        offset += base
        fold_members[key].append(cf.members)
        cliques.append(_Clique(cf.members, table0.copy(), table0))

    for key, member_rows in fold_members.items():
        y = cache[key][1]
        rows = np.asarray(member_rows, dtype=np.int64)
        np.add.at(unary[:, 1], rows.reshape(-1),
                  np.tile(y, rows.shape[0]))

    cs = np.maximum(unary[:, 0] - unary[:, 1], 0.0)
    ct = np.maximum(unary[:, 1] - unary[:, 0], 0.0)
    if n:
        offset += float(np.minimum(unary[:, 0], unary[:, 1]).sum())
    return FlowNetwork(n, cliques, cs, ct, cs.copy(), ct.copy(), offset)


@dataclass
class FlowStats:
    augmentations: int = 0
    adoptions: int = 0
    capacity_evals: int = 0
    max_path_len: int = 0


@dataclass
class FlowState:
    """A network together with the search state of one solver run."""

    net: FlowNetwork
    current_arc: bool = True
    flow: float = 0.0
    stats: FlowStats = field(default_factory=FlowStats)

    def __post_init__(self):
        n = self.net.num_vars
        # Incidence: for each node, (clique index, member position) pairs
        # in clique order; fixes all scan orders.
        self.node_cliques: list[list[tuple[int, int]]] = [[] for _ in range(n)]
        for ci, cl in enumerate(self.net.cliques):
            for p, v in enumerate(cl.members):
                self.node_cliques[v].append((ci, p))
        self.tree = np.zeros(n, dtype=np.int8)
        self.dist = np.zeros(n, dtype=np.int64)
        self.parent_node = np.full(n, -1, dtype=np.int64)   # -1: s or t
        self.parent_clique = np.full(n, -1, dtype=np.int64)  # -1: s/t arc
        self.cursor = np.zeros(n, dtype=np.int64)
        self.in_orphan = np.zeros(n, dtype=bool)
        # Children as intrusive doubly-linked lists; slots n and n+1 act
        # as the roots s and t.
        self.first_child = np.full(n + 2, -1, dtype=np.int64)
        self.next_sib = np.full(n, -1, dtype=np.int64)
        self.prev_sib = np.full(n, -1, dtype=np.int64)
        self.orphans: deque[int] = deque()
        # Monotone high-water marks for the distance labels.
        self.hiwater_s = np.zeros(n, dtype=np.int64)
        self.hiwater_t = np.zeros(n, dtype=np.int64)
        self.last_path_len = 0


def residual_capacity(state: FlowState, arc) -> float:
    """Residual capacity of an arc in the current state."""
    net = state.net
    if isinstance(arc, SourceArc):
        return float(net.cs[arc.node])
    if isinstance(arc, SinkArc):
        return float(net.ct[arc.node])
    cl = net.cliques[arc.clique]
    try:
        p, q = cl.pos[arc.tail], cl.pos[arc.head]
    except KeyError:
        raise FlowError(
            f"arc endpoints ({arc.tail}, {arc.head}) not both members of "
            f"clique {arc.clique} {cl.members}") from None
    if p == q:
        raise FlowError("arc endpoints must be distinct")
    state.stats.capacity_evals += 1
    return float(cl.table[_sep_masks(cl.k, p, q)].min())


def push_flow(state: FlowState, arc, delta: float) -> None:
    """Push ``delta`` units of flow along a single arc.

    ``delta`` must be positive and at most the arc's residual capacity;
    otherwise the push would drive a residual negative and is rejected.
    """
    if not delta > 0:
        raise FlowError(f"push amount must be positive, got {delta}")
    cap = residual_capacity(state, arc)
    if delta > cap + 1e-12:
        raise FlowError(
            f"push of {delta} exceeds residual capacity {cap} on {arc}")
    net = state.net
    if isinstance(arc, SourceArc):
        net.cs[arc.node] -= delta
    elif isinstance(arc, SinkArc):
        net.ct[arc.node] -= delta
    else:
        cl = net.cliques[arc.clique]
        p, q = cl.pos[arc.tail], cl.pos[arc.head]
        cl.table += (-delta) * _arc_sign(cl.k, p, q)
        if cl.table.min() < NONNEG_TOL:
            raise FlowInvariantError(
                f"residual table of clique {arc.clique} went negative")


@dataclass
class MinCutResult:
    """Outcome of a solve: the minimum, a minimizer, and run statistics."""

    value: float
    labeling: np.ndarray
    flow: float
    offset: float
    stats: FlowStats


def dump_result(result: MinCutResult) -> str:
    """Render a result in the line-oriented text form."""
    bits = "".join(str(int(b)) for b in result.labeling)
    s = result.stats
    return (
        f"min {result.value!r}\n"
        f"set {bits}\n"
        f"stats augmentations={s.augmentations} adoptions={s.adoptions} "
        f"capeval={s.capacity_evals}\n"
    )


class _PySolver:
    """Reference engine.  Mirrors the compiled engine operation for
    operation so that results and statistics agree exactly."""

    def __init__(self, state: FlowState):
        self.st = state
        self.net = state.net
        self.n = self.net.num_vars
        self.use_current_arc = state.current_arc
        self.growing_s = False
        self.growing_t = False
        self.queue_s: list[int] = []
        self.queue_t: list[int] = []
        self.next_s: list[int] = []
        self.next_t: list[int] = []
        self.d_s = 1
        self.d_t = 1

    # -- capacity ------------------------------------------------------

    def cap(self, ci: int, p: int, q: int) -> float:
        self.st.stats.capacity_evals += 1
        cl = self.net.cliques[ci]
        return float(cl.table[_sep_masks(cl.k, p, q)].min())

    # -- tree maintenance ----------------------------------------------

    def _link(self, v: int, parent: int) -> None:
        st = self.st
        slot = parent if parent >= 0 else (
            self.n if st.tree[v] == _S else self.n + 1)
        head = st.first_child[slot]
        st.next_sib[v] = head
        st.prev_sib[v] = -1
        if head >= 0:
            st.prev_sib[head] = v
        st.first_child[slot] = v

    def _unlink(self, v: int) -> None:
        st = self.st
        parent = st.parent_node[v]
        slot = parent if parent >= 0 else (
            self.n if st.tree[v] == _S else self.n + 1)
        nxt, prv = st.next_sib[v], st.prev_sib[v]
        if prv >= 0:
            st.next_sib[prv] = nxt
        elif st.first_child[slot] == v:
            st.first_child[slot] = nxt
        if nxt >= 0:
            st.prev_sib[nxt] = prv
        st.next_sib[v] = -1
        st.prev_sib[v] = -1

    def _set_dist(self, v: int, d: int, which: int) -> None:
        st = self.st
        hw = st.hiwater_s if which == _S else st.hiwater_t
        if d < hw[v]:
            raise FlowInvariantError(
                f"distance label of node {v} decreased from {hw[v]} to {d}")
        hw[v] = d
        st.dist[v] = d

    def _attach(self, v: int, which: int, d: int, pnode: int, pclique: int):
        st = self.st
        st.tree[v] = which
        self._set_dist(v, d, which)
        st.parent_node[v] = pnode
        st.parent_clique[v] = pclique
        self._link(v, pnode)

    def _orphan(self, v: int) -> None:
        st = self.st
        if st.in_orphan[v]:
            return
        self._unlink(v)
        st.parent_node[v] = -2
        st.parent_clique[v] = -2
        st.in_orphan[v] = True
        st.orphans.append(v)

    def _free(self, v: int) -> None:
        st = self.st
        w = st.first_child[v]
        while w >= 0:
            nxt = st.next_sib[w]
            self._orphan(w)
            w = nxt
        st.tree[v] = _FREE
        st.cursor[v] = 0

    # -- adoption --------------------------------------------------------

    def _cands(self, v: int) -> list[tuple[int, int, int, int]]:
        """Clique arcs incident to v as (clique, v_pos, other_pos, other)."""
        out = []
        for ci, pos in self.st.node_cliques[v]:
            cl = self.net.cliques[ci]
            for q in range(cl.k):
                if q != pos:
                    out.append((ci, pos, q, cl.members[q]))
        return out

    def _limit(self, which: int) -> int:
        if which == _S:
            return self.d_s + (1 if self.growing_s else 0)
        return self.d_t + (1 if self.growing_t else 0)

    def _requeue(self, v: int, d: int, which: int) -> None:
        if which == _S:
            if d == self.d_s:
                self.queue_s.append(v)
            elif self.growing_s and d == self.d_s + 1:
                self.next_s.append(v)
        else:
            if d == self.d_t:
                self.queue_t.append(v)
            elif self.growing_t and d == self.d_t + 1:
                self.next_t.append(v)

    def _adopt(self, v: int) -> None:
        """Find a new parent for an orphan, relabel it, or drop it.

        First a same-level rescan over the candidate parent arcs
        (terminal arc at slot 0, then clique arcs in incidence order),
        resuming from the node's arc cursor when the current-arc
        heuristic is on.  Failing that, relabel to one plus the lowest
        candidate distance (ties to the lowest node index), orphaning
        the node's children; if even that exceeds the tree's explored
        depth, the node leaves the tree.

        Pending orphans remain tree members and stay eligible as
        parents: excluding them lets a relabel overshoot past a peer
        that re-adopts at its old level, leaving a residual arc whose
        head sits more than one level below its tail.  A node linked
        under a pending orphan is simply re-orphaned if that orphan
        later relabels or leaves the tree.
        """
        st = self.st
        net = self.net
        st.stats.adoptions += 1
        st.in_orphan[v] = False
        which = int(st.tree[v])
        d = int(st.dist[v])
        tol = RESIDUAL_TOL
        cands = self._cands(v)

        start = int(st.cursor[v]) if self.use_current_arc else 0
        for idx in range(start, len(cands) + 1):
            if idx == 0:
                if d != 1:
                    continue
                ok = net.cs[v] > tol if which == _S else net.ct[v] > tol
                if not ok:
                    continue
                self._attach(v, which, 1, -1, -1)
                st.cursor[v] = 0
                return
            ci, pos, q, u = cands[idx - 1]
            if st.tree[u] != which or st.dist[u] != d - 1:
                continue
            cap = self.cap(ci, q, pos) if which == _S else self.cap(ci, pos, q)
            if cap > tol:
                self._attach(v, which, d, u, ci)
                st.cursor[v] = idx
                return

        best_d, best_u, best_ci = -1, -1, -1
        ok = net.cs[v] > tol if which == _S else net.ct[v] > tol
        if ok:
            best_d = 0
        for ci, pos, q, u in cands:
            if st.tree[u] != which:
                continue
            du = int(st.dist[u])
            if best_d >= 0 and (du, u) >= (best_d, best_u):
                continue
            cap = self.cap(ci, q, pos) if which == _S else self.cap(ci, pos, q)
            if cap > tol:
                best_d, best_u, best_ci = du, u, ci

        if best_d < 0 or best_d + 1 > self._limit(which):
            self._free(v)
            return

        newd = best_d + 1
        if newd < d:
            raise FlowInvariantError(
                f"relabel would decrease node {v} from {d} to {newd}")
        if newd != d:
            w = st.first_child[v]
            while w >= 0:
                nxt = st.next_sib[w]
                self._orphan(w)
                w = nxt
        st.cursor[v] = 0
        self._attach(v, which, newd, best_u, best_ci)
        if newd != d:
            self._requeue(v, newd, which)

    def _drain_orphans(self) -> None:
        st = self.st
        while st.orphans:
            self._adopt(st.orphans.popleft())

    # -- augmentation ----------------------------------------------------

    def _tree_path_up(self, v: int) -> list:
        """Arcs from s to v along S-tree parent pointers."""
        st = self.st
        arcs = []
        a = v
        while st.parent_clique[a] >= 0:
            arcs.append(CliqueArc(int(st.parent_clique[a]),
                                  int(st.parent_node[a]), a))
            a = int(st.parent_node[a])
        arcs.append(SourceArc(a))
        arcs.reverse()
        return arcs

    def _tree_path_down(self, v: int) -> list:
        """Arcs from v to t along T-tree parent pointers."""
        st = self.st
        arcs = []
        b = v
        while st.parent_clique[b] >= 0:
            arcs.append(CliqueArc(int(st.parent_clique[b]),
                                  b, int(st.parent_node[b])))
            b = int(st.parent_node[b])
        arcs.append(SinkArc(b))
        return arcs

    def _augment(self, arcs: list) -> None:
        st = self.st
        net = self.net
        if len(arcs) < st.last_path_len:
            raise FlowInvariantError(
                f"augmenting path length decreased: {len(arcs)} after "
                f"{st.last_path_len}")
        st.last_path_len = len(arcs)
        st.stats.max_path_len = max(st.stats.max_path_len, len(arcs))

        # Group clique arcs: a path may cross one clique several times,
        # and simultaneous pushes interact through the shared table.  The
        # feasible bottleneck is min table[S] / m[S] over subsets with a
        # positive net coefficient m[S].
        clique_order: list[int] = []
        mvecs: dict[int, np.ndarray] = {}
        delta = np.inf
        for arc in arcs:
            if isinstance(arc, SourceArc):
                delta = min(delta, float(net.cs[arc.node]))
            elif isinstance(arc, SinkArc):
                delta = min(delta, float(net.ct[arc.node]))
            else:
                cl = net.cliques[arc.clique]
                if arc.clique not in mvecs:
                    clique_order.append(arc.clique)
                    mvecs[arc.clique] = np.zeros(1 << cl.k, dtype=np.int8)
                p, q = cl.pos[arc.tail], cl.pos[arc.head]
                mvecs[arc.clique] += _arc_sign(cl.k, p, q)
        for ci in clique_order:
            st.stats.capacity_evals += 1
            cl = net.cliques[ci]
            m = mvecs[ci]
            pos_mask = m > 0
            delta = min(delta, float((cl.table[pos_mask] / m[pos_mask]).min()))
        if not delta > 0:
            raise FlowInvariantError("augmenting path with zero bottleneck")

        for arc in arcs:
            if isinstance(arc, SourceArc):
                net.cs[arc.node] -= delta
            elif isinstance(arc, SinkArc):
                net.ct[arc.node] -= delta
        for ci in clique_order:
            cl = net.cliques[ci]
            cl.table += (-delta) * mvecs[ci]
            if cl.table.min() < NONNEG_TOL:
                raise FlowInvariantError(
                    f"residual table of clique {ci} went negative")
        self.st.flow += delta
        st.stats.augmentations += 1

        # Saturated parent arcs orphan their subtrees: terminal arcs
        # first in path order, then every member of each touched clique.
        tol = RESIDUAL_TOL
        for arc in arcs:
            if isinstance(arc, SourceArc):
                a = arc.node
                if (st.tree[a] == _S and st.parent_clique[a] == -1
                        and not st.in_orphan[a] and net.cs[a] <= tol):
                    self._orphan(a)
            elif isinstance(arc, SinkArc):
                b = arc.node
                if (st.tree[b] == _T and st.parent_clique[b] == -1
                        and not st.in_orphan[b] and net.ct[b] <= tol):
                    self._orphan(b)
        for ci in clique_order:
            cl = net.cliques[ci]
            for pos, w in enumerate(cl.members):
                if st.in_orphan[w] or st.parent_clique[w] != ci:
                    continue
                pp = cl.pos[int(st.parent_node[w])]
                if st.tree[w] == _S:
                    if self.cap(ci, pp, pos) <= tol:
                        self._orphan(w)
                elif st.tree[w] == _T:
                    if self.cap(ci, pos, pp) <= tol:
                        self._orphan(w)
        self._drain_orphans()

    # -- growth passes ---------------------------------------------------

    def _scan_s(self, i: int) -> None:
        st, net, tol = self.st, self.net, RESIDUAL_TOL
        while net.ct[i] > tol:
            if st.tree[i] != _S or st.dist[i] != self.d_s:
                return
            self._augment(self._tree_path_up(i) + [SinkArc(i)])
        for ci, pos in st.node_cliques[i]:
            cl = net.cliques[ci]
            for q in range(cl.k):
                if q == pos:
                    continue
                j = cl.members[q]
                while True:
                    if st.tree[i] != _S or st.dist[i] != self.d_s:
                        return
                    if self.cap(ci, pos, q) <= tol:
                        break
                    tj = st.tree[j]
                    if tj == _FREE:
                        self._attach(j, _S, self.d_s + 1, i, ci)
                        self.next_s.append(j)
                        break
                    if tj == _S:
                        break
                    self._augment(self._tree_path_up(i)
                                  + [CliqueArc(ci, i, j)]
                                  + self._tree_path_down(j))

    def _scan_t(self, j: int) -> None:
        st, net, tol = self.st, self.net, RESIDUAL_TOL
        while net.cs[j] > tol:
            if st.tree[j] != _T or st.dist[j] != self.d_t:
                return
            self._augment([SourceArc(j)] + self._tree_path_down(j))
        for ci, pos in st.node_cliques[j]:
            cl = net.cliques[ci]
            for q in range(cl.k):
                if q == pos:
                    continue
                u = cl.members[q]
                while True:
                    if st.tree[j] != _T or st.dist[j] != self.d_t:
                        return
                    if self.cap(ci, q, pos) <= tol:
                        break
                    tu = st.tree[u]
                    if tu == _FREE:
                        self._attach(u, _T, self.d_t + 1, j, ci)
                        self.next_t.append(u)
                        break
                    if tu == _T:
                        break
                    self._augment(self._tree_path_up(u)
                                  + [CliqueArc(ci, u, j)]
                                  + self._tree_path_down(j))

    def _forward_pass(self) -> None:
        self.growing_s = True
        self.next_s = []
        idx = 0
        while idx < len(self.queue_s):
            i = self.queue_s[idx]
            idx += 1
            if self.st.tree[i] == _S and self.st.dist[i] == self.d_s:
                self._scan_s(i)
        self.growing_s = False
        self.queue_s = self.next_s
        self.d_s += 1

    def _reverse_pass(self) -> None:
        self.growing_t = True
        self.next_t = []
        idx = 0
        while idx < len(self.queue_t):
            j = self.queue_t[idx]
            idx += 1
            if self.st.tree[j] == _T and self.st.dist[j] == self.d_t:
                self._scan_t(j)
        self.growing_t = False
        self.queue_t = self.next_t
        self.d_t += 1

    # -- top level ---------------------------------------------------------

    def run(self) -> None:
        st, net, tol = self.st, self.net, RESIDUAL_TOL
        for i in range(self.n):
            if net.cs[i] > tol:
                self._attach(i, _S, 1, -1, -1)
                self.queue_s.append(i)
        for i in range(self.n):
            if net.ct[i] > tol:
                if st.tree[i] != _FREE:
                    raise FlowInvariantError(
                        "node has both source and sink residual after "
                        "reparameterization")
                self._attach(i, _T, 1, -1, -1)
                self.queue_t.append(i)
        while True:
            if not self.queue_s or not self.queue_t:
                break
            self._forward_pass()
            if not self.queue_s:
                break
            self._reverse_pass()

    def reachable_from_source(self) -> np.ndarray:
        net, tol = self.net, RESIDUAL_TOL
        seen = np.zeros(self.n, dtype=bool)
        q: deque[int] = deque()
        for i in range(self.n):
            if net.cs[i] > tol:
                seen[i] = True
                q.append(i)
        while q:
            i = q.popleft()
            for ci, pos in self.st.node_cliques[i]:
                cl = net.cliques[ci]
                for qq in range(cl.k):
                    j = cl.members[qq]
                    if qq == pos or seen[j]:
                        continue
                    if self.cap(ci, pos, qq) > tol:
                        seen[j] = True
                        q.append(j)
        return seen


def _cut_value(net: FlowNetwork, labeling: np.ndarray) -> float:
    value = net.offset
    if net.num_vars:
        inside = labeling.astype(bool)
        value += float(net.cs0[~inside].sum()) + float(net.ct0[inside].sum())
    for cl in net.cliques:
        mask = 0
        for p, v in enumerate(cl.members):
            if labeling[v]:
                mask |= 1 << p
        value += float(cl.table0[mask])
    return value


def minimize(
    energy: SoSEnergy,
    engine: str = "auto",
    current_arc: bool = True,
    submodularity_tol: float = 1e-9,
) -> MinCutResult:
    """Globally minimize a sum-of-submodular energy.

    Returns the minimum value (cut value plus the reparameterization
    offset), one minimizing labeling (variables reachable from the
    source in the final residual network, labeled 1), the total flow
    pushed, and search statistics.

    ``engine`` selects the implementation: "python" (reference),
    "numba" (compiled), or "auto" (compiled when available).  Both
    produce identical results.
    """
    net = build_network(energy, tol=submodularity_tol)
    if engine not in ("auto", "python", "numba"):
        raise ValueError(f"unknown engine {engine!r}")
    use_numba = engine == "numba"
    if engine == "auto":
        try:
            from . import _flow_numba  # noqa: F401
            use_numba = True
        except ImportError:
            use_numba = False

    if use_numba:
        from . import _flow_numba
        labeling, flow, stats = _flow_numba.solve(net, current_arc)
    else:
        state = FlowState(net, current_arc=current_arc)
        solver = _PySolver(state)
        solver.run()
        labeling = solver.reachable_from_source().astype(np.uint8)
        flow = state.flow
        stats = state.stats

    value = _cut_value(net, labeling)
    return MinCutResult(value=value, labeling=labeling, flow=flow,
                        offset=net.offset, stats=stats)
