"""Multi-label energies whose expansion moves stay sum-of-submodular.

A clique's multi-label cost decomposes per label: f_C(y_C) is the sum
over labels l of g_l applied to the members currently taking l.  When
every g_l is submodular, the binary subproblem of an expansion move
(any subset of variables may switch to the proposal label) is again
sum-of-submodular, because g(T | S) and g(T \\ S) inherit
submodularity; so each move is solved exactly by the flow solver and
the move energies decrease monotonically.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

from . import flow
from .energy import CliqueFunction, FormatError, SoSEnergy, is_submodular

__all__ = [
    "LabelCliqueSet",
    "MultiLabelEnergy",
    "evaluate_multilabel",
    "expansion_subproblem",
    "alpha_expansion",
    "pn_potts",
    "dump_multilabel",
    "load_multilabel",
]


@dataclass
class LabelCliqueSet:
    """Per-label submodular tables sharing one member tuple."""

    members: tuple[int, ...]
    tables: list[np.ndarray]    # one table of size 2^k per label

    def __post_init__(self):
        self.members = tuple(int(v) for v in self.members)
        k = len(self.members)
        fixed = []
        for ell, t in enumerate(self.tables):
            t = np.asarray(t, dtype=np.float64)
            if t.shape != (1 << k,):
                raise ValueError(
                    f"label {ell}: table has shape {t.shape}, expected "
                    f"({1 << k},)")
            fixed.append(t)
        self.tables = fixed

    @property
    def size(self) -> int:
        return len(self.members)


@dataclass
class MultiLabelEnergy:
    num_vars: int
    num_labels: int
    unary: np.ndarray                       # (num_vars, num_labels)
    cliques: list[LabelCliqueSet] = field(default_factory=list)

    def __post_init__(self):
        self.unary = np.asarray(self.unary, dtype=np.float64)
        if self.unary.shape != (self.num_vars, self.num_labels):
            raise ValueError(
                f"unary has shape {self.unary.shape}, expected "
                f"({self.num_vars}, {self.num_labels})")
        for cl in self.cliques:
            if len(cl.tables) != self.num_labels:
                raise ValueError("clique needs one table per label")
            if max(cl.members) >= self.num_vars:
                raise ValueError("clique member out of range")

    def check_submodular(self, tol: float = 1e-9) -> None:
        for ci, cl in enumerate(self.cliques):
            for ell, t in enumerate(cl.tables):
                ok, violations = is_submodular(
                    CliqueFunction(cl.members, t), tol)
                if not ok:
                    worst = max(v.amount for v in violations)
                    raise ValueError(
                        f"clique {ci}, label {ell}: table violates "
                        f"submodularity by {worst:g}")


def _label_masks(cl: LabelCliqueSet, y: np.ndarray, num_labels: int):
    """Mask of members taking each label, in the clique's bit order."""
    masks = [0] * num_labels
    for p, v in enumerate(cl.members):
        masks[int(y[v])] |= 1 << p
    return masks


def evaluate_multilabel(e: MultiLabelEnergy, y) -> float:
    y = np.asarray(y, dtype=np.int64)
    if y.shape != (e.num_vars,):
        raise ValueError("labeling has wrong length")
    if len(y) and (y.min() < 0 or y.max() >= e.num_labels):
        raise ValueError("label out of range")
    total = float(e.unary[np.arange(e.num_vars), y].sum()) \
        if e.num_vars else 0.0
    for cl in e.cliques:
        for ell, mask in enumerate(_label_masks(cl, y, e.num_labels)):
            total += float(cl.tables[ell][mask])
    return total


def expansion_subproblem(e: MultiLabelEnergy, y, alpha: int) -> SoSEnergy:
    """Binary energy of the move 'variables in S switch to alpha'.

    The switch energy per clique is g_alpha(C_alpha | S) plus, for the
    other labels, g_l(C_l \\ S); both restrictions preserve
    submodularity, so the result is a valid flow-solver input.
    """
    y = np.asarray(y, dtype=np.int64)
    if not 0 <= alpha < e.num_labels:
        raise ValueError(f"label {alpha} out of range")
    unary = np.stack([e.unary[np.arange(e.num_vars), y],
                      e.unary[:, alpha]], axis=1) \
        if e.num_vars else np.zeros((0, 2))
    cliques = []
    for cl in e.cliques:
        k = cl.size
        masks = _label_masks(cl, y, e.num_labels)
        table = np.zeros(1 << k)
        for switch in range(1 << k):
            v = cl.tables[alpha][masks[alpha] | switch]
            for ell in range(e.num_labels):
                if ell != alpha:
                    v += cl.tables[ell][masks[ell] & ~switch]
            table[switch] = v
        cliques.append(CliqueFunction(cl.members, table))
    return SoSEnergy(e.num_vars, unary, cliques)


def alpha_expansion(e: MultiLabelEnergy, y0, rel_tol: float = 1e-9,
                    **solver_kw):
    """Cycle expansion moves over labels in ascending order until a
    full cycle brings no strict improvement.  Returns the labeling and
    the (strictly decreasing) trace of accepted energies."""
    y = np.asarray(y0, dtype=np.int64).copy()
    current = evaluate_multilabel(e, y)
    trace = [current]
    scale = 1.0 + abs(current)
    improved = True
    while improved:
        improved = False
        for alpha in range(e.num_labels):
            sub = expansion_subproblem(e, y, alpha)
            res = flow.minimize(sub, **solver_kw)
            if res.value < current - rel_tol * scale:
                y[res.labeling.astype(bool)] = alpha
                current = evaluate_multilabel(e, y)
                trace.append(current)
                improved = True
    return y, trace


def pn_potts(members, label_costs, cost_max: float) -> LabelCliqueSet:
    """Uniformity potential: cost_l when every member takes label l,
    cost_max otherwise, encoded as per-label tables with a single
    nonpositive entry on the full set (offset by -cost_max overall)."""
    label_costs = np.asarray(label_costs, dtype=np.float64)
    if np.any(label_costs > cost_max):
        bad = int(np.argmax(label_costs))
        raise ValueError(
            f"label {bad} cost {label_costs[bad]} exceeds cost_max "
            f"{cost_max}; the encoding would not be submodular")
    k = len(members)
    tables = []
    for ell in range(len(label_costs)):
        t = np.zeros(1 << k)
        t[(1 << k) - 1] = label_costs[ell] - cost_max
        tables.append(t)
    return LabelCliqueSet(tuple(members), tables)


# ----------------------------------------------------------------------
# Training wiring: the same cutting-plane loop as the binary case, with
# one weight block per (clique type, label) and expansion-move
# separation.  Moves are exact but the overall multi-label argmin is
# not, so instances flag their separation as approximate and training
# reports carry the flag.
# ----------------------------------------------------------------------

from .learn import CliqueType, FeatureSchema


def multilabel_schema(base_types, num_labels: int,
                      unary_names) -> FeatureSchema:
    """One block per (type, label), named '<type>:l<label>'."""
    types = []
    for name, k in base_types:
        for ell in range(num_labels):
            types.append(CliqueType(f"{name}:l{ell}", k))
    return FeatureSchema(types, list(unary_names))


@dataclass
class MultiLabelInstance:
    """Training instance over a multi-label ground truth.

    ``members``/``phi`` are per base type; ``unary_feats`` has shape
    (num_vars, num_labels, U) so label costs are feature dots.
    """

    num_vars: int
    num_labels: int
    members: list[np.ndarray]
    phi: list[np.ndarray]
    unary_feats: np.ndarray

    approximate_separation = True

    def __post_init__(self):
        if self.unary_feats.shape[:2] != (self.num_vars, self.num_labels):
            raise ValueError("unary_feats must be (vars, labels, features)")
        for ph in self.phi:
            if len(ph) and ph.min() < 0:
                raise ValueError("negative data term")

    def psi(self, schema: FeatureSchema, y) -> np.ndarray:
        y = np.asarray(y, dtype=np.int64)
        out = np.zeros(schema.dim)
        L = self.num_labels
        for b, (mem, ph) in enumerate(zip(self.members, self.phi)):
            for row, p in zip(mem, ph):
                for ell in range(L):
                    mask = 0
                    for pos, v in enumerate(row):
                        if y[v] == ell:
                            mask |= 1 << pos
                    t = b * L + ell
                    out[schema._offsets[t] + mask] += p
        idx = np.arange(self.num_vars)
        out[schema.unary_block] = self.unary_feats[idx, y].sum(axis=0)
        return out

    def materialize(self, schema: FeatureSchema, w) -> MultiLabelEnergy:
        wu = w[schema.unary_block]
        unary = self.unary_feats @ wu
        L = self.num_labels
        cliques = []
        for b, (mem, ph) in enumerate(zip(self.members, self.phi)):
            for row, p in zip(mem, ph):
                tables = [w[schema.block(b * L + ell)] * float(p)
                          for ell in range(L)]
                cliques.append(LabelCliqueSet(tuple(int(v) for v in row),
                                              tables))
        return MultiLabelEnergy(self.num_vars, L, unary, cliques)

    def separate(self, schema, w, y, loss_weight, **solver_kw):
        y = np.asarray(y, dtype=np.int64)
        e = self.materialize(schema, w)
        lw = np.broadcast_to(np.asarray(loss_weight, dtype=np.float64),
                             (self.num_vars,))
        e.unary = e.unary - lw[:, None]
        e.unary[np.arange(self.num_vars), y] += lw
        yhat, trace = alpha_expansion(e, e.unary.argmin(axis=1),
                                      **solver_kw)
        return yhat, trace[-1]

    def predict(self, schema, w, **solver_kw):
        e = self.materialize(schema, w)
        yhat, _ = alpha_expansion(e, e.unary.argmin(axis=1), **solver_kw)
        return yhat


# ----------------------------------------------------------------------
# Text format: the binary energy format plus a 'labels' record, unary
# records carrying one cost per label, and per-label 'gclique' records.
# ----------------------------------------------------------------------

def dump_multilabel(e: MultiLabelEnergy) -> str:
    out = io.StringIO()
    out.write("sos 1\n")
    out.write(f"vars {e.num_vars}\n")
    out.write(f"labels {e.num_labels}\n")
    for i in range(e.num_vars):
        costs = " ".join(repr(float(v)) for v in e.unary[i])
        out.write(f"unary {i} {costs}\n")
    for cl in e.cliques:
        mem = " ".join(str(v) for v in cl.members)
        for ell, t in enumerate(cl.tables):
            vals = " ".join(repr(float(v)) for v in t)
            out.write(f"gclique {ell} {cl.size} {mem} {vals}\n")
    return out.getvalue()


def load_multilabel(text: str) -> MultiLabelEnergy:
    num_vars = None
    num_labels = None
    unary = None
    pending: dict[tuple[int, ...], dict[int, np.ndarray]] = {}
    order: list[tuple[int, ...]] = []
    lineno = 0
    for raw in text.splitlines():
        lineno += 1
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tok = line.split()
        try:
            if tok[0] == "sos":
                continue
            if tok[0] == "vars":
                num_vars = int(tok[1])
            elif tok[0] == "labels":
                num_labels = int(tok[1])
                if num_vars is None:
                    raise FormatError("labels before vars")
                unary = np.zeros((num_vars, num_labels))
            elif tok[0] == "unary":
                if unary is None:
                    raise FormatError("unary before labels")
                i = int(tok[1])
                vals = [float(v) for v in tok[2:]]
                if len(vals) != num_labels:
                    raise FormatError(
                        f"unary needs {num_labels} costs, got {len(vals)}")
                unary[i] = vals
            elif tok[0] == "gclique":
                if num_labels is None:
                    raise FormatError("gclique before labels")
                ell = int(tok[1])
                k = int(tok[2])
                members = tuple(int(v) for v in tok[3:3 + k])
                vals = [float(v) for v in tok[3 + k:3 + k + (1 << k)]]
                if len(vals) != (1 << k):
                    raise FormatError(
                        f"gclique table needs {1 << k} values")
                if members not in pending:
                    pending[members] = {}
                    order.append(members)
                pending[members][ell] = np.array(vals)
            else:
                raise FormatError(f"unknown record {tok[0]!r}")
        except (IndexError, ValueError) as exc:
            raise FormatError(f"line {lineno}: {exc}") from None
    if num_vars is None or num_labels is None:
        raise FormatError("missing 'vars' or 'labels' record")
    cliques = []
    for members in order:
        tabs = pending[members]
        tables = []
        for ell in range(num_labels):
            tables.append(tabs.get(ell, np.zeros(1 << len(members))))
        cliques.append(LabelCliqueSet(members, tables))
    return MultiLabelEnergy(num_vars, num_labels, unary, cliques)
