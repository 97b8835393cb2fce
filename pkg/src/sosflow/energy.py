"""Sum-of-submodular (SoS) energy functions over binary labelings.

An energy assigns a real cost to every subset S of a base set of
variables V = {0, ..., n-1} (equivalently to every 0/1 labeling, with
S = the set of variables labeled 1).  It decomposes as

    f(S) = sum_i unary_i(S) + sum_C f_C(S & C)

where each clique function f_C is given explicitly as a table of
2^|C| values.  When every f_C is submodular the energy can be
minimized exactly by the solver in :mod:`sosflow.flow`; this module
provides the representation, evaluation, submodularity checking, and
a brute-force minimizer that serves as the test oracle for everything
built on top.

Subset <-> bit-mask convention (fixed globally, also used by the text
format and by serialized models): bit p of a mask is set iff the p-th
member of the clique, in the clique's stored member order, is in the
subset.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "K_MAX",
    "BRUTE_FORCE_MAX_VARS",
    "CliqueFunction",
    "SoSEnergy",
    "SubmodularityViolation",
    "evaluate",
    "is_submodular",
    "brute_force_minimize",
    "shift_to_nonnegative",
    "dump_sos",
    "load_sos",
]

# Hard cap on clique size: tables, flow arc scans and learned weight
# blocks are all O(2^k) or worse, so k is kept small by construction.
K_MAX = 6

# Guard for the exhaustive minimizer (2^n labelings).
BRUTE_FORCE_MAX_VARS = 24


@dataclass(frozen=True)
class CliqueFunction:
    """A set function on a clique, stored as a dense table.

    ``members`` lists the clique's variables in the order that fixes
    the bit-position convention; ``table[b]`` is the value on the
    subset encoded by mask ``b``.
    """

    members: tuple[int, ...]
    table: np.ndarray

    def __post_init__(self):
        members = tuple(int(v) for v in self.members)
        object.__setattr__(self, "members", members)
        k = len(members)
        if not 1 <= k <= K_MAX:
            raise ValueError(f"clique size {k} outside 1..{K_MAX}")
        if len(set(members)) != k:
            raise ValueError("clique members must be distinct")
        if any(v < 0 for v in members):
            raise ValueError("clique members must be non-negative")
        table = np.asarray(self.table, dtype=np.float64)
        if table.shape != (1 << k,):
            raise ValueError(
                f"table has shape {table.shape}, expected ({1 << k},)")
        if not np.all(np.isfinite(table)):
            raise ValueError("table entries must be finite")
        object.__setattr__(self, "table", table)

    @property
    def size(self) -> int:
        return len(self.members)

    @classmethod
    def trusted(cls, members: tuple[int, ...],
                table: np.ndarray) -> "CliqueFunction":
        """Constructor without validation, for hot paths that build
        very many cliques from already-checked pieces (materializing a
        model instantiates one table per image patch)."""
        self = cls.__new__(cls)
        object.__setattr__(self, "members", members)
        object.__setattr__(self, "table", table)
        return self

    def restrict_mask(self, labeling: np.ndarray) -> int:
        """Mask of the labeling's 1-set intersected with the clique."""
        m = 0
        for p, v in enumerate(self.members):
            if labeling[v]:
                m |= 1 << p
        return m


@dataclass
class SoSEnergy:
    """Unary costs plus a collection of clique functions.

    ``unary`` has shape (num_vars, 2): column 0 is the cost of
    labeling a variable 0, column 1 the cost of labeling it 1.
    """

    num_vars: int
    unary: np.ndarray
    cliques: list[CliqueFunction] = field(default_factory=list)

    def __post_init__(self):
        self.num_vars = int(self.num_vars)
        if self.num_vars < 0:
            raise ValueError("num_vars must be >= 0")
        self.unary = np.asarray(self.unary, dtype=np.float64)
        if self.unary.shape != (self.num_vars, 2):
            raise ValueError(
                f"unary has shape {self.unary.shape}, "
                f"expected ({self.num_vars}, 2)")
        for cf in self.cliques:
            if max(cf.members) >= self.num_vars:
                raise ValueError(
                    f"clique member {max(cf.members)} out of range "
                    f"for {self.num_vars} variables")

    def check_labeling(self, labeling) -> np.ndarray:
        y = np.asarray(labeling)
        if y.shape != (self.num_vars,):
            raise ValueError(
                f"labeling has shape {y.shape}, expected ({self.num_vars},)")
        return y.astype(np.uint8)


def evaluate(energy: SoSEnergy, labeling) -> float:
    """Energy value of a 0/1 labeling: unary sum plus clique table sums."""
    y = energy.check_labeling(labeling)
    total = float(energy.unary[np.arange(energy.num_vars), y].sum()) \
        if energy.num_vars else 0.0
    for cf in energy.cliques:
        total += float(cf.table[cf.restrict_mask(y)])
    return total


@dataclass(frozen=True)
class SubmodularityViolation:
    """One failed elementary inequality: f(A+i) + f(A+j) >= f(A+i+j) + f(A).

    ``base_mask`` encodes A (a subset of the clique excluding positions
    i and j); ``pos_i``/``pos_j`` are member positions; ``amount`` is
    how far the inequality is violated (positive).
    """

    base_mask: int
    pos_i: int
    pos_j: int
    amount: float


def is_submodular(
    f: CliqueFunction, tol: float = 1e-9
) -> tuple[bool, list[SubmodularityViolation]]:
    """Check all elementary submodularity inequalities of a clique table.

    The elementary family (over pairs of added elements i != j and all
    bases A disjoint from them) is equivalent to the full definition
    f(A|B) + f(A&B) <= f(A) + f(B); there are k(k-1)/2 * 2^(k-2) of
    them instead of 4^k pairs.  Returns (ok, violations) where each
    violation is reported with its base subset, the two positions and
    the violation amount.
    """
    t = f.table
    k = f.size
    violations: list[SubmodularityViolation] = []
    for p in range(k):
        for q in range(p + 1, k):
            bi, bj = 1 << p, 1 << q
            for a in range(1 << k):
                if a & (bi | bj):
                    continue
                gap = t[a | bi] + t[a | bj] - t[a | bi | bj] - t[a]
                if gap < -tol:
                    violations.append(
                        SubmodularityViolation(a, p, q, float(-gap)))
    return (not violations), violations


def shift_to_nonnegative(f: CliqueFunction) -> tuple[CliqueFunction, float]:
    """Subtract the table minimum so all entries are >= 0.

    Returns the shifted clique function and the (possibly negative)
    offset that was removed; adding the offset back reinstates the
    original values, and minimizers of any energy containing the
    clique are unchanged.
    """
    offset = float(f.table.min())
    return CliqueFunction(f.members, f.table - offset), offset


def _clique_submasks(cf: CliqueFunction, masks: np.ndarray) -> np.ndarray:
    """Masks of ``cf`` induced by global labeling masks (vectorized)."""
    sub = np.zeros(masks.shape, dtype=np.int64)
    for p, v in enumerate(cf.members):
        sub |= ((masks >> v) & 1) << p
    return sub


def brute_force_minimize(energy: SoSEnergy) -> tuple[float, np.ndarray]:
    """Exhaustive minimizer over all 2^n labelings.

    The reference oracle for the flow solver: exact, and deterministic
    about ties (the minimizing subset with the smallest mask value wins,
    where variable 0 is the least significant bit).  Refuses instances
    with more than BRUTE_FORCE_MAX_VARS variables.
    """
    n = energy.num_vars
    if n > BRUTE_FORCE_MAX_VARS:
        raise ValueError(
            f"{n} variables exceeds brute-force cap {BRUTE_FORCE_MAX_VARS}")
    if n == 0:
        return 0.0, np.zeros(0, dtype=np.uint8)

    best_val = np.inf
    best_mask = 0
    chunk = 1 << min(n, 16)
    base_cost = energy.unary[:, 0].sum()
    delta = energy.unary[:, 1] - energy.unary[:, 0]
    for start in range(0, 1 << n, chunk):
        masks = np.arange(start, start + chunk, dtype=np.int64)
        bits = ((masks[:, None] >> np.arange(n)) & 1).astype(np.float64)
        vals = base_cost + bits @ delta
        for cf in energy.cliques:
            vals += cf.table[_clique_submasks(cf, masks)]
        j = int(np.argmin(vals))  # first minimum = smallest mask
        if vals[j] < best_val:
            best_val = float(vals[j])
            best_mask = int(masks[j])
    out = ((best_mask >> np.arange(n)) & 1).astype(np.uint8)
    return best_val, out


# ----------------------------------------------------------------------
# Text format
#
#   sos 1
#   vars N
#   unary I C0 C1            (one line per variable)
#   clique K V0 ... V(K-1) T0 ... T(2^K-1)
#
# Whitespace-separated decimals, '#' starts a comment.  Floats are
# written with repr() so any double round-trips exactly.
# ----------------------------------------------------------------------

def dump_sos(energy: SoSEnergy) -> str:
    """Serialize an energy to the line-oriented text format."""
    out = io.StringIO()
    out.write("sos 1\n")
    out.write(f"vars {energy.num_vars}\n")
    for i in range(energy.num_vars):
        c0, c1 = float(energy.unary[i, 0]), float(energy.unary[i, 1])
        out.write(f"unary {i} {c0!r} {c1!r}\n")
    for cf in energy.cliques:
        vals = " ".join(repr(float(v)) for v in cf.table)
        mem = " ".join(str(v) for v in cf.members)
        out.write(f"clique {cf.size} {mem} {vals}\n")
    return out.getvalue()


def _tokens(text: str):
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if line:
            yield lineno, line.split()


class FormatError(ValueError):
    """Malformed text input (energy files, manifests, model files)."""


def load_sos(text: str) -> SoSEnergy:
    """Parse the text format produced by :func:`dump_sos`."""
    lines = _tokens(text)
    try:
        _, header = next(lines)
    except StopIteration:
        raise FormatError("empty input") from None
    if header != ["sos", "1"]:
        raise FormatError(f"bad header {' '.join(header)!r}, expected 'sos 1'")

    num_vars = None
    unary = None
    cliques: list[CliqueFunction] = []
    for lineno, tok in lines:
        kind = tok[0]
        try:
            if kind == "vars":
                num_vars = int(tok[1])
                unary = np.zeros((num_vars, 2))
            elif kind == "unary":
                if unary is None:
                    raise FormatError("unary before vars")
                i = int(tok[1])
                unary[i, 0] = float(tok[2])
                unary[i, 1] = float(tok[3])
            elif kind == "clique":
                k = int(tok[1])
                members = tuple(int(v) for v in tok[2:2 + k])
                table = [float(v) for v in tok[2 + k:2 + k + (1 << k)]]
                if len(table) != (1 << k):
                    raise FormatError(
                        f"clique table needs {1 << k} values, got {len(table)}")
                cliques.append(CliqueFunction(members, np.array(table)))
            else:
                raise FormatError(f"unknown record {kind!r}")
        except (IndexError, ValueError) as exc:
            if isinstance(exc, FormatError):
                raise FormatError(f"line {lineno}: {exc}") from None
            raise FormatError(f"line {lineno}: {exc}") from None
    if num_vars is None:
        raise FormatError("missing 'vars' record")
    return SoSEnergy(num_vars, unary, cliques)
