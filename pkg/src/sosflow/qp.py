"""Dense convex quadratic programming for large-margin training.

Problems have the shape

    minimize    0.5 ||w||^2  +  c . xi
    subject to  Gw . w  +  Gxi . xi  >=  h        (one row per constraint)
                xi >= 0

with w the quadratic block and xi a small vector of slack variables
with positive linear costs.  Rows are margin constraints (touching
exactly one slack with coefficient one) or homogeneous rows in w only
(the submodularity inequalities of the learned clique tables).  The
slack nonnegativity rows are installed automatically and occupy the
first ``num_slacks`` row slots.

The solver is a primal active-set method.  The working-set equality
subproblem is solved in the null space of the active rows; directions
with zero reduced curvature (pure slack moves) are handled as linear
descent rays, which always hit a blocking row because every slack has
positive cost and a nonnegativity row.  Warm starts reuse the previous
point and working set, so re-solves after adding a cutting plane are
cheap.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

__all__ = [
    "QuadraticProgram",
    "QPSolution",
    "QPNonConvergence",
    "solve",
]


class QPNonConvergence(RuntimeError):
    """Iteration cap reached; carries the best iterate found."""

    def __init__(self, message: str, solution: "QPSolution"):
        super().__init__(message)
        self.solution = solution


@dataclass
class QuadraticProgram:
    """Objective 0.5||w||^2 + c.xi with inequality rows G z >= h."""

    dim: int
    lin_costs: np.ndarray

    def __post_init__(self):
        self.dim = int(self.dim)
        self.lin_costs = np.atleast_1d(
            np.asarray(self.lin_costs, dtype=np.float64))
        if self.dim < 0:
            raise ValueError("dim must be >= 0")
        if np.any(self.lin_costs <= 0):
            raise ValueError("slack costs must be positive")
        ns = self.num_slacks
        self._gw: list[np.ndarray] = []
        self._gxi: list[np.ndarray] = []
        self._h: list[float] = []
        self._keys: dict[bytes, int] = {}
        # slack nonnegativity rows first; row index = slack index
        for s in range(ns):
            gxi = np.zeros(ns)
            gxi[s] = 1.0
            self._push(np.zeros(self.dim), gxi, 0.0)

    @property
    def num_slacks(self) -> int:
        return self.lin_costs.shape[0]

    @property
    def num_rows(self) -> int:
        return len(self._h)

    def _push(self, gw, gxi, h) -> int:
        key = gw.tobytes() + gxi.tobytes() + np.float64(h).tobytes()
        found = self._keys.get(key)
        if found is not None:
            return found
        idx = len(self._h)
        self._keys[key] = idx
        self._gw.append(gw)
        self._gxi.append(gxi)
        self._h.append(float(h))
        return idx

    def add_row(self, gw, h: float, slack: int | None = None) -> int:
        """Add a constraint gw.w [+ xi_slack] >= h; exact duplicates are
        dropped.  Returns the row index (existing index for duplicates).
        """
        gw = np.asarray(gw, dtype=np.float64).copy()
        if gw.shape != (self.dim,):
            raise ValueError(f"row has shape {gw.shape}, expected "
                             f"({self.dim},)")
        gxi = np.zeros(self.num_slacks)
        if slack is not None:
            gxi[slack] = 1.0
        return self._push(gw, gxi, h)

    def matrices(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        gw = np.array(self._gw) if self._gw else \
            np.zeros((0, self.dim))
        gxi = np.array(self._gxi) if self._gxi else \
            np.zeros((0, self.num_slacks))
        return gw, gxi, np.array(self._h)

    def objective(self, w, xi) -> float:
        return 0.5 * float(w @ w) + float(self.lin_costs @ np.atleast_1d(xi))

    def dump(self) -> str:
        """Debug text dump of all rows, for failure reproduction."""
        gw, gxi, h = self.matrices()
        lines = [f"qp dim={self.dim} slacks={self.num_slacks} "
                 f"costs={' '.join(repr(float(c)) for c in self.lin_costs)}"]
        for r in range(self.num_rows):
            coeffs = " ".join(repr(float(v)) for v in gw[r])
            xis = " ".join(repr(float(v)) for v in gxi[r])
            lines.append(f"row {r}: w[{coeffs}] xi[{xis}] >= {h[r]!r}")
        return "\n".join(lines) + "\n"


@dataclass
class QPSolution:
    w: np.ndarray
    xi: np.ndarray
    lam: np.ndarray
    objective: float
    iterations: int
    primal_violation: float
    stationarity: float
    comp_slack: float
    converged: bool
    working_set: list[int] = field(default_factory=list)

    @property
    def z(self) -> np.ndarray:
        return np.concatenate([self.w, self.xi])


def _feasible_start(qp: QuadraticProgram, G, h, z0):
    """Start point: given z0 (or zero), clamp slacks at zero and lift
    each slack until every row touching it holds.  Rows with positive
    slack coefficients only improve as slacks rise, so one pass is
    enough."""
    n, ns = qp.dim, qp.num_slacks
    if z0 is not None:
        z = np.asarray(z0, dtype=np.float64).copy()
        if z.shape != (n + ns,):
            raise ValueError("z0 has wrong shape")
        z[n:] = np.maximum(z[n:], 0.0)
    else:
        z = np.zeros(n + ns)
    resid = h - G @ z if G.shape[0] else np.zeros(0)
    for s in range(ns):
        touched = G[:, n + s] == 1.0
        if touched.any():
            need = float(resid[touched].max(initial=0.0))
            if need > 0:
                z[n + s] += need
    resid = h - G @ z if G.shape[0] else np.zeros(0)
    bad = np.nonzero(resid > 1e-12)[0]
    if len(bad):
        raise ValueError(
            f"row {bad[0]} is violated at the start point and touches "
            f"no slack; pass a feasible z0")
    return z


def solve(
    qp: QuadraticProgram,
    tol: float = 1e-6,
    warm: QPSolution | None = None,
    z0=None,
    max_iter: int | None = None,
) -> QPSolution:
    """Primal active-set solve to KKT residuals below ``tol`` (scaled).

    Raises :class:`QPNonConvergence` with the best iterate attached if
    the iteration cap (default 50 * (dim + rows)) is reached.
    """
    n, ns = qp.dim, qp.num_slacks
    gw, gxi, h = qp.matrices()
    G = np.hstack([gw, gxi])
    nrows = G.shape[0]
    if max_iter is None:
        max_iter = 50 * (n + ns + nrows)

    if warm is not None:
        z = _feasible_start(qp, G, h, np.concatenate([warm.w, warm.xi]))
        # keep only rows still active at the lifted start point
        act = np.abs(G @ z - h) <= 1e-10 * (1.0 + np.abs(h))
        W = [r for r in warm.working_set if r < nrows and act[r]]
    else:
        z = _feasible_start(qp, G, h, z0)
        W = []

    g_lin = np.concatenate([np.zeros(n), qp.lin_costs])
    scale = 1.0 + float(np.abs(h).max()) if nrows else 1.0

    def grad_at(z):
        return np.concatenate([z[:n], np.zeros(ns)]) + g_lin

    it = 0
    while True:
        it += 1
        if it > max_iter:
            sol = _finish(qp, G, h, z, W, it - 1, tol, scale,
                          converged=False)
            raise QPNonConvergence(
                f"active-set did not converge in {max_iter} iterations",
                sol)
        grad = grad_at(z)
        A = G[W] if W else np.zeros((0, n + ns))
        Z = scipy.linalg.null_space(A) if W else np.eye(n + ns)
        d = None
        linear_ray = None
        if Z.shape[1]:
            Zw = Z[:n, :]
            hred = Zw.T @ Zw
            gred = Z.T @ grad
            vals, vecs = np.linalg.eigh(hred)
            eps0 = 1e-12 * max(1.0, float(vals[-1]) if len(vals) else 1.0)
            for jj in range(len(vals)):
                if vals[jj] <= eps0 and abs(vecs[:, jj] @ gred) > 1e-10:
                    v = vecs[:, jj]
                    if v @ gred > 0:
                        v = -v
                    linear_ray = Z @ v
                    break
            if linear_ray is None:
                y = np.zeros(Z.shape[1])
                for jj in range(len(vals)):
                    if vals[jj] > eps0:
                        y += (-(vecs[:, jj] @ gred) / vals[jj]) * vecs[:, jj]
                d = Z @ y
        else:
            d = np.zeros(n + ns)

        if linear_ray is not None:
            step = linear_ray
            gd = G @ step
            cand = [r for r in range(nrows)
                    if r not in W and gd[r] < -1e-12]
            if not cand:
                raise RuntimeError(
                    "unbounded descent ray in a bounded QP; "
                    "slack costs must be positive")
            alphas = (G[cand] @ z - h[cand]) / (-gd[cand])
            jbest = int(np.argmin(alphas))
            z = z + max(0.0, float(alphas[jbest])) * step
            W.append(cand[jbest])
            continue

        if float(np.abs(d).max(initial=0.0)) <= tol * (1.0 + float(np.abs(z).max(initial=0.0))):
            # candidate optimum on the current face: check multipliers
            lamW, *_ = np.linalg.lstsq(A.T, grad, rcond=None) \
                if W else (np.zeros(0),)
            if not W or float(lamW.min(initial=0.0)) >= -tol * scale:
                lam = np.zeros(nrows)
                for r, lv in zip(W, np.atleast_1d(lamW)):
                    lam[r] += lv
                return _finish(qp, G, h, z, W, it, tol, scale,
                               converged=True, lam=lam)
            worst = int(np.argmin(lamW))
            W.pop(worst)
            continue

        gd = G @ d
        cand = [r for r in range(nrows) if r not in W and gd[r] < -1e-12]
        alpha = 1.0
        blocker = -1
        if cand:
            slacks = G[cand] @ z - h[cand]
            ratios = slacks / (-gd[cand])
            jbest = int(np.argmin(ratios))
            if ratios[jbest] < 1.0:
                alpha = max(0.0, float(ratios[jbest]))
                blocker = cand[jbest]
        z = z + alpha * d
        if blocker >= 0:
            W.append(blocker)


def _finish(qp, G, h, z, W, iterations, tol, scale, converged, lam=None):
    n, ns = qp.dim, qp.num_slacks
    nrows = G.shape[0]
    grad = np.concatenate([z[:n], np.zeros(ns)]) + \
        np.concatenate([np.zeros(n), qp.lin_costs])
    if lam is None:
        A = G[W] if W else np.zeros((0, n + ns))
        lamW, *_ = np.linalg.lstsq(A.T, grad, rcond=None) \
            if W else (np.zeros(0),)
        lam = np.zeros(nrows)
        for r, lv in zip(W, np.atleast_1d(lamW)):
            lam[r] += lv
    resid = G @ z - h if nrows else np.zeros(0)
    primal = float(np.maximum(-resid, 0.0).max(initial=0.0))
    stat = float(np.abs(grad - G.T @ lam).max(initial=0.0))
    comp = float(np.abs(lam * resid).max(initial=0.0))
    return QPSolution(
        w=z[:n].copy(),
        xi=z[n:].copy(),
        lam=lam,
        objective=qp.objective(z[:n], z[n:]),
        iterations=iterations,
        primal_violation=primal,
        stationarity=stat,
        comp_slack=comp,
        converged=converged,
        working_set=list(W),
    )
