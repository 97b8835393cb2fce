"""Large-margin learning of sum-of-submodular energies.

A model is a weight vector laid out by a :class:`FeatureSchema`: one
block of 2^k weights per clique *type* (a group of cliques tying their
table to the same parameters, each instance scaled by a nonnegative
data term Phi), followed by one block of unary-feature weights.  The
joint feature map ``psi`` is built so that ``w . psi(x, y)`` equals the
energy of labeling y under the materialized model, which makes the
margin constraints of the training QP linear in w.

Training runs the single-slack cutting-plane scheme: solve the QP over
the current working set (margin rows averaged over all examples) plus
the submodularity inequalities on every clique-type block, call the
separation oracle per example (exact minimization of energy minus
loss, via the flow solver), add the averaged most-violated row, and
stop once the new row is violated by at most the current slack plus
the precision target.  Keeping the blocks submodular is what makes
separation exact, so the oracle never silently degrades.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import flow
from .energy import CliqueFunction, SoSEnergy, is_submodular
from .qp import QPSolution, QuadraticProgram, solve as qp_solve

__all__ = [
    "CliqueType",
    "FeatureSchema",
    "Instance",
    "TrainConfig",
    "TrainResult",
    "TrainingError",
    "psi",
    "materialize_energy",
    "hamming_loss",
    "loss_augmented_inference",
    "add_submodularity_rows",
    "train",
    "predict",
]


class TrainingError(RuntimeError):
    pass


@dataclass(frozen=True)
class CliqueType:
    """A shared-parameter group of cliques of a fixed size."""
    name: str
    size: int


@dataclass
class FeatureSchema:
    """Weight layout: per-type subset blocks, then unary feature weights."""

    clique_types: list[CliqueType]
    unary_names: list[str]

    def __post_init__(self):
        offs = []
        off = 0
        for ct in self.clique_types:
            offs.append(off)
            off += 1 << ct.size
        self._offsets = offs
        self._unary_off = off

    @property
    def dim(self) -> int:
        return self._unary_off + len(self.unary_names)

    @property
    def num_unary(self) -> int:
        return len(self.unary_names)

    def block(self, t: int) -> slice:
        return slice(self._offsets[t],
                     self._offsets[t] + (1 << self.clique_types[t].size))

    @property
    def unary_block(self) -> slice:
        return slice(self._unary_off, self.dim)

    def type_index(self, name: str) -> int:
        for t, ct in enumerate(self.clique_types):
            if ct.name == name:
                return t
        raise KeyError(name)


@dataclass
class Instance:
    """One prediction problem: variables, typed cliques and unary features.

    ``members[t]`` is an (m_t, k_t) integer array of clique member ids
    for type t; ``phi[t]`` the matching nonnegative data terms.
    ``unary0``/``unary1`` hold per-variable feature vectors for labels
    0 and 1, so label costs are ``unary0 @ w_u`` and ``unary1 @ w_u``.
    """

    num_vars: int
    members: list[np.ndarray]
    phi: list[np.ndarray]
    unary0: np.ndarray
    unary1: np.ndarray

    def __post_init__(self):
        for t, (mem, ph) in enumerate(zip(self.members, self.phi)):
            if len(mem) != len(ph):
                raise ValueError(f"type {t}: members/phi length mismatch")
            if len(ph) and ph.min() < 0:
                raise ValueError(
                    f"type {t}: negative data term {ph.min()}; the "
                    f"submodularity guarantee needs Phi >= 0")
            if len(mem) and mem.max() >= self.num_vars:
                raise ValueError(f"type {t}: member out of range")

    # the hooks the cutting-plane loop uses; multi-label instances
    # provide their own versions
    approximate_separation = False

    def psi(self, schema: FeatureSchema, y: np.ndarray) -> np.ndarray:
        return psi(schema, self, y)

    def separate(self, schema, w, y, loss_weight, **solver_kw):
        return loss_augmented_inference(schema, w, self, y, loss_weight,
                                        **solver_kw)

    def predict(self, schema, w, **solver_kw):
        return predict(schema, w, self, **solver_kw)

    # unary layout hooks (overridable for compact storage layouts)
    def unary_psi(self, y: np.ndarray) -> np.ndarray:
        on = y.astype(bool)
        return self.unary0[~on].sum(axis=0) + self.unary1[on].sum(axis=0)

    def unary_costs(self, wu: np.ndarray) -> np.ndarray:
        return np.stack([self.unary0 @ wu, self.unary1 @ wu], axis=1)


def _bitvals(k: int) -> np.ndarray:
    return 1 << np.arange(k, dtype=np.int64)


def psi(schema: FeatureSchema, x: Instance, y) -> np.ndarray:
    """Joint feature vector with w . psi(x, y) = materialized energy."""
    y = np.asarray(y, dtype=np.int64)
    if y.shape != (x.num_vars,):
        raise ValueError("labeling has wrong length")
    out = np.zeros(schema.dim)
    for t, ct in enumerate(schema.clique_types):
        mem = x.members[t]
        if not len(mem):
            continue
        masks = (y[mem] * _bitvals(ct.size)).sum(axis=1)
        np.add.at(out, schema._offsets[t] + masks, x.phi[t])
    out[schema.unary_block] = x.unary_psi(y)
    return out


def materialize_energy(schema: FeatureSchema, w, x: Instance) -> SoSEnergy:
    """Instantiate the energy w induces on one problem instance."""
    w = np.asarray(w, dtype=np.float64)
    if w.shape != (schema.dim,):
        raise ValueError(f"weights have shape {w.shape}, expected "
                         f"({schema.dim},)")
    wu = w[schema.unary_block]
    unary = x.unary_costs(wu)
    cliques = []
    for t, ct in enumerate(schema.clique_types):
        block = w[schema.block(t)]
        phi_t = x.phi[t]
        if len(phi_t) and (phi_t == 1.0).all():
            # indicator data terms share one table object
            shared = block.copy()
            shared.setflags(write=False)
            for mem in x.members[t]:
                cliques.append(CliqueFunction.trusted(
                    tuple(int(v) for v in mem), shared))
        else:
            for mem, ph in zip(x.members[t], phi_t):
                cliques.append(CliqueFunction.trusted(
                    tuple(int(v) for v in mem), block * float(ph)))
    return SoSEnergy(x.num_vars, unary, cliques)


def hamming_loss(y, yhat) -> float:
    """Number of disagreeing variables."""
    y = np.asarray(y)
    yhat = np.asarray(yhat)
    if y.shape != yhat.shape:
        raise ValueError("labelings have different lengths")
    return float(np.count_nonzero(y != yhat))


def loss_augmented_inference(schema, w, x: Instance, y, loss_weight=1.0,
                             **solver_kw):
    """argmin over labelings of energy(w, x, yhat) - loss_weight * Hamming.

    The loss factors over variables, so it is absorbed into the unary
    costs (the label disagreeing with y gets a discount) and the
    minimization stays exact.
    """
    y = np.asarray(y, dtype=np.int64)
    energy = materialize_energy(schema, w, x)
    lw = np.broadcast_to(np.asarray(loss_weight, dtype=np.float64),
                         (x.num_vars,))
    idx = np.arange(x.num_vars)
    energy.unary[idx, 1 - y] -= lw
    res = flow.minimize(energy, **solver_kw)
    return res.labeling, res.value


def predict(schema, w, x: Instance, **solver_kw) -> np.ndarray:
    """Minimize the materialized energy; ties resolve to the labeling
    whose 1-set is the source-reachable set of the final flow."""
    return flow.minimize(materialize_energy(schema, w, x),
                         **solver_kw).labeling


def add_submodularity_rows(qp: QuadraticProgram,
                           schema: FeatureSchema) -> int:
    """Elementary exchange inequalities on every clique-type block:
    w[A+i] + w[A+j] - w[A+i+j] - w[A] >= 0.  Returns the row count."""
    added = 0
    for t, ct in enumerate(schema.clique_types):
        k = ct.size
        off = schema._offsets[t]
        for p in range(k):
            for q in range(p + 1, k):
                bi, bj = 1 << p, 1 << q
                for a in range(1 << k):
                    if a & (bi | bj):
                        continue
                    row = np.zeros(qp.dim)
                    row[off + (a | bi)] += 1.0
                    row[off + (a | bj)] += 1.0
                    row[off + (a | bi | bj)] -= 1.0
                    row[off + a] -= 1.0
                    qp.add_row(row, 0.0)
                    added += 1
    return added


@dataclass
class TrainConfig:
    c_reg: float = 10.0
    eps: float = 0.01
    loss: str = "per_pixel"        # or "unit"
    qp_tol: float = 1e-8
    max_rows: int = 1000
    threads: int = 1
    engine: str = "auto"
    current_arc: bool = True
    submodularity_tol: float = 1e-6
    audit_materializations: bool = True

    def __post_init__(self):
        if self.c_reg <= 0 or self.eps <= 0:
            raise ValueError("c_reg and eps must be positive")
        if self.loss not in ("per_pixel", "unit"):
            raise ValueError(f"unknown loss mode {self.loss!r}")


@dataclass
class IterationRecord:
    iteration: int
    objective: float
    xi: float
    violation: float
    wall_s: float


@dataclass
class TrainResult:
    w: np.ndarray
    xi: float
    iterations: int
    history: list[IterationRecord]
    converged: bool
    approximate_separation: bool


def _loss_weight(cfg: TrainConfig, x) -> float:
    return 1.0 / x.num_vars if cfg.loss == "per_pixel" else 1.0


def train(schema: FeatureSchema, examples, cfg: TrainConfig | None = None,
          callback=None) -> TrainResult:
    """Single-slack cutting-plane training over (instance, labeling)
    pairs.  Raises  :class:`TrainingError` if the QP fails or the
    working set hits the row cap before the precision target."""
    cfg = cfg or TrainConfig()
    if not examples:
        raise TrainingError("empty training set")
    n = len(examples)
    for x, y in examples:
        if np.asarray(y).shape != (x.num_vars,):
            raise TrainingError("ground-truth labeling has wrong length")

    qp = QuadraticProgram(schema.dim, [cfg.c_reg])
    add_submodularity_rows(qp, schema)
    psi_true = [x.psi(schema, y) for x, y in examples]
    solver_kw = dict(engine=cfg.engine, current_arc=cfg.current_arc,
                     submodularity_tol=cfg.submodularity_tol)

    approx = any(getattr(x, "approximate_separation", False)
                 for x, _ in examples)
    history: list[IterationRecord] = []
    warm: QPSolution | None = None
    t0 = time.perf_counter()
    converged = False

    if cfg.threads > 1:
        from concurrent.futures import ThreadPoolExecutor
        pool = ThreadPoolExecutor(max_workers=cfg.threads)
    else:
        pool = None

    try:
        for iteration in range(1, cfg.max_rows + 1):
            try:
                sol = qp_solve(qp, tol=cfg.qp_tol, warm=warm)
            except Exception as exc:
                raise TrainingError(f"QP solve failed: {exc}") from exc
            w = sol.w
            xi = float(sol.xi[0])

            if cfg.audit_materializations:
                _audit_blocks(schema, w)

            def sep(item):
                x, y = item
                yhat, _ = x.separate(schema, w, y, _loss_weight(cfg, x),
                                     **solver_kw)
                return yhat
            if pool is not None:
                yhats = list(pool.map(sep, examples))
            else:
                yhats = [sep(item) for item in examples]

            row = np.zeros(schema.dim)
            rhs = 0.0
            for (x, y), psi_y, yhat in zip(examples, psi_true, yhats):
                row += x.psi(schema, yhat) - psi_y
                rhs += _loss_weight(cfg, x) * hamming_loss(y, yhat)
            row /= n
            rhs /= n

            violation = rhs - float(row @ w)
            history.append(IterationRecord(
                iteration, sol.objective, xi, violation,
                time.perf_counter() - t0))
            if callback is not None:
                callback(history[-1])
            if violation <= xi + cfg.eps:
                converged = True
                break
            qp.add_row(row, rhs, slack=0)
            warm = sol
        if not converged:
            raise TrainingError(
                f"working set reached {cfg.max_rows} rows before the "
                f"precision target")
    finally:
        if pool is not None:
            pool.shutdown()

    return TrainResult(w=w, xi=xi, iterations=len(history),
                       history=history, converged=converged,
                       approximate_separation=approx)


def _audit_blocks(schema: FeatureSchema, w, tol: float = 1e-6) -> None:
    """Every clique-type block must satisfy the exchange inequalities;
    a violation here means the QP solution is unusable for exact
    separation."""
    for t, ct in enumerate(schema.clique_types):
        block = w[schema.block(t)]
        ok, violations = is_submodular(
            CliqueFunction(tuple(range(ct.size)), block), tol)
        if not ok:
            worst = max(v.amount for v in violations)
            raise TrainingError(
                f"clique type {ct.name!r} violates submodularity by "
                f"{worst:g} after the QP solve")
