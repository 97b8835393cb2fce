"""Shared generators for random test instances.

Random clique tables are built as nonnegative combinations of known
submodular atoms (cut terms, coverage terms, concave-of-cardinality,
plus an arbitrary modular part), so they are submodular by
construction and integer-valued where tests need exact arithmetic.
"""

import numpy as np
import pytest

from sosflow.energy import CliqueFunction, SoSEnergy


def random_submodular_table(rng: np.random.Generator, k: int) -> np.ndarray:
    """Random integer submodular table on the subsets of a size-k clique."""
    n = 1 << k
    masks = np.arange(n)
    bits = ((masks[:, None] >> np.arange(k)) & 1).astype(np.int64)
    popcnt = bits.sum(axis=1)

    table = bits @ rng.integers(-5, 6, size=k)
    for p in range(k):
        for q in range(p + 1, k):
            sep = ((masks >> p) & 1) ^ ((masks >> q) & 1)
            table = table + rng.integers(0, 4) * sep
    for _ in range(int(rng.integers(1, k + 2))):
        cover = int(rng.integers(1, n))
        hit = (masks & cover) != 0
        if rng.integers(0, 2):
            hit = ((~masks) & cover) != 0  # reflected coverage
        table = table + rng.integers(0, 5) * hit
    incs = np.sort(rng.integers(-3, 4, size=k))[::-1]
    card_term = np.concatenate([[0], np.cumsum(incs)])
    table = table + card_term[popcnt]
    return table.astype(np.float64)


def random_energy(rng: np.random.Generator, num_vars: int, num_cliques: int,
                  max_k: int = 4, unary_lo: int = -10, unary_hi: int = 11,
                  integer: bool = True) -> SoSEnergy:
    """Random submodular-by-construction energy on a small variable set."""
    unary = rng.integers(unary_lo, unary_hi, size=(num_vars, 2)).astype(float)
    if not integer:
        unary = unary + rng.random((num_vars, 2))
    cliques = []
    for _ in range(num_cliques):
        k = min(int(rng.integers(2, max_k + 1)), num_vars)
        members = tuple(int(v) for v in
                        rng.choice(num_vars, size=k, replace=False))
        cliques.append(CliqueFunction(members,
                                      random_submodular_table(rng, k)))
    return SoSEnergy(num_vars, unary, cliques)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
