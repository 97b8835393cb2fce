import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sosflow.energy import (
    CliqueFunction,
    FormatError,
    SoSEnergy,
    brute_force_minimize,
    dump_sos,
    evaluate,
    is_submodular,
    load_sos,
    shift_to_nonnegative,
)

from conftest import random_energy, random_submodular_table


def reference_evaluate(energy, labeling):
    """Independent re-summation walking the definition term by term."""
    y = np.asarray(labeling)
    total = 0.0
    for i in range(energy.num_vars):
        total += energy.unary[i, int(y[i])]
    for cf in energy.cliques:
        subset = [v for v in cf.members if y[v]]
        mask = 0
        for p, v in enumerate(cf.members):
            if v in subset:
                mask |= 1 << p
        total += cf.table[mask]
    return total


class TestEvaluate:
    def test_zero_energy(self, rng):
        e = SoSEnergy(4, np.zeros((4, 2)),
                      [CliqueFunction((0, 1, 2), np.zeros(8))])
        for _ in range(4):
            y = rng.integers(0, 2, size=4)
            assert evaluate(e, y) == 0.0

    def test_unary_sum(self):
        n = 5
        e = SoSEnergy(n, np.tile([0.0, 1.0], (n, 1)))
        assert evaluate(e, np.zeros(n, dtype=int)) == 0.0
        assert evaluate(e, np.ones(n, dtype=int)) == n

    def test_matches_reference_on_random_instances(self, rng):
        for _ in range(50):
            e = random_energy(rng, 8, 5, integer=False)
            y = rng.integers(0, 2, size=8)
            assert evaluate(e, y) == pytest.approx(
                reference_evaluate(e, y), abs=1e-9)

    def test_dimension_mismatch_rejected(self):
        e = SoSEnergy(3, np.zeros((3, 2)))
        with pytest.raises(ValueError):
            evaluate(e, np.zeros(4, dtype=int))

    def test_linear_in_tables(self, rng):
        members = (0, 1, 2)
        t1 = rng.random(8)
        t2 = rng.random(8)
        a, b = 2.5, -1.25
        y = rng.integers(0, 2, size=3)
        unary = rng.random((3, 2))
        e1 = SoSEnergy(3, unary, [CliqueFunction(members, t1)])
        e2 = SoSEnergy(3, unary * 0, [CliqueFunction(members, t2)])
        e12 = SoSEnergy(3, a * unary,
                        [CliqueFunction(members, a * t1 + b * t2)])
        assert evaluate(e12, y) == pytest.approx(
            a * evaluate(e1, y) + b * evaluate(e2, y), rel=1e-12)


class TestIsSubmodular:
    def test_coverage_like_pair_table(self):
        f = CliqueFunction((3, 7), np.array([0.0, 1.0, 1.0, 1.0]))
        ok, violations = is_submodular(f)
        assert ok and violations == []

    def test_supermodular_pair_detected(self):
        f = CliqueFunction((3, 7), np.array([0.0, 0.0, 0.0, 1.0]))
        ok, violations = is_submodular(f)
        assert not ok
        (v,) = violations
        assert (v.base_mask, v.pos_i, v.pos_j) == (0, 0, 1)
        assert v.amount == pytest.approx(1.0)

    def exhaustive_pairwise_check(self, table, k, tol=1e-9):
        """Directly test f(A|B) + f(A&B) <= f(A) + f(B) on all pairs."""
        for a in range(1 << k):
            for b in range(1 << k):
                if table[a | b] + table[a & b] > table[a] + table[b] + tol:
                    return False
        return True

    def test_agrees_with_full_definition(self, rng):
        hits = {True: 0, False: 0}
        for trial in range(300):
            if trial % 2:
                table = rng.integers(-3, 4, size=16).astype(float)
            else:
                table = random_submodular_table(rng, 4)
                table[int(rng.integers(0, 16))] += rng.integers(0, 3)
            f = CliqueFunction((0, 1, 2, 3), table)
            ok, _ = is_submodular(f)
            assert ok == self.exhaustive_pairwise_check(table, 4)
            hits[ok] += 1
        assert hits[True] > 0 and hits[False] > 0

    def test_random_constructions_are_submodular(self, rng):
        for k in (2, 3, 4, 5, 6):
            for _ in range(20):
                f = CliqueFunction(tuple(range(k)),
                                   random_submodular_table(rng, k))
                ok, violations = is_submodular(f)
                assert ok, violations


class TestShiftToNonnegative:
    def test_already_nonnegative(self):
        f = CliqueFunction((0, 1), np.array([0.0, 1.0, 1.0, 1.0]))
        g, off = shift_to_nonnegative(f)
        assert off == 0.0
        np.testing.assert_array_equal(g.table, f.table)

    def test_negative_minimum(self):
        f = CliqueFunction((0, 1), np.array([-2.0, 0.0, 0.0, 1.0]))
        g, off = shift_to_nonnegative(f)
        assert off == -2.0
        np.testing.assert_array_equal(g.table, [0.0, 2.0, 2.0, 3.0])

    def test_min_is_zero(self, rng):
        for _ in range(20):
            f = CliqueFunction((0, 1, 2), rng.normal(size=8))
            g, off = shift_to_nonnegative(f)
            assert g.table.min() == 0.0
            np.testing.assert_allclose(g.table + off, f.table)


class TestBruteForce:
    def test_zero_energy(self):
        e = SoSEnergy(3, np.zeros((3, 2)))
        val, y = brute_force_minimize(e)
        assert val == 0.0
        np.testing.assert_array_equal(y, [0, 0, 0])

    def test_single_variable(self):
        e = SoSEnergy(1, np.array([[5.0, 3.0]]))
        val, y = brute_force_minimize(e)
        assert val == 3.0
        np.testing.assert_array_equal(y, [1])

    def test_returned_value_matches_evaluate(self, rng):
        for _ in range(20):
            e = random_energy(rng, 10, 6)
            val, y = brute_force_minimize(e)
            assert evaluate(e, y) == val

    def test_tie_break_smallest_mask(self):
        e = SoSEnergy(2, np.zeros((2, 2)))  # everything ties at 0
        _, y = brute_force_minimize(e)
        np.testing.assert_array_equal(y, [0, 0])

    def test_too_many_vars_rejected(self):
        e = SoSEnergy(25, np.zeros((25, 2)))
        with pytest.raises(ValueError):
            brute_force_minimize(e)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_lattice_inequality_property(seed):
    """f(S&T) + f(S|T) <= f(S) + f(T) for submodular-by-construction
    energies with modular unaries."""
    r = np.random.default_rng(seed)
    e = random_energy(r, 7, 4, integer=False)
    s = r.integers(0, 2, size=7)
    t = r.integers(0, 2, size=7)
    lhs = evaluate(e, s & t) + evaluate(e, s | t)
    rhs = evaluate(e, s) + evaluate(e, t)
    scale = 1.0 + abs(rhs)
    assert lhs <= rhs + 1e-9 * scale


class TestTextFormat:
    def test_round_trip(self, rng):
        e = random_energy(rng, 6, 4, integer=False)
        text = dump_sos(e)
        e2 = load_sos(text)
        assert e2.num_vars == e.num_vars
        np.testing.assert_array_equal(e2.unary, e.unary)
        assert len(e2.cliques) == len(e.cliques)
        for a, b in zip(e.cliques, e2.cliques):
            assert a.members == b.members
            np.testing.assert_array_equal(a.table, b.table)

    def test_comments_and_whitespace(self):
        text = """
        # a comment
        sos 1
        vars 2
        unary 0 1.5 -2.25   # trailing comment
        unary 1 0 0
        clique 2 0 1 0 1 1 3
        """
        e = load_sos(text)
        assert e.num_vars == 2
        assert e.unary[0, 1] == -2.25
        assert e.cliques[0].table[3] == 3

    def test_awkward_decimals_round_trip(self):
        vals = [0.1, 1 / 3, 2**-40, 123456789.123456, -9.87e-300]
        e = SoSEnergy(1, np.array([[vals[0], vals[1]]]),
                      [CliqueFunction((0,), np.array(vals[2:4]))])
        e2 = load_sos(dump_sos(e))
        np.testing.assert_array_equal(e2.unary, e.unary)
        np.testing.assert_array_equal(e2.cliques[0].table, e.cliques[0].table)

    def test_bad_header(self):
        with pytest.raises(FormatError):
            load_sos("nope 1\nvars 0\n")

    def test_short_clique_table(self):
        with pytest.raises(FormatError):
            load_sos("sos 1\nvars 2\nclique 2 0 1 0 1 1\n")
