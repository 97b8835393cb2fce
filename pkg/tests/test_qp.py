import numpy as np
import pytest

from sosflow.qp import QPNonConvergence, QPSolution, QuadraticProgram, solve

from reference_qp import project_simplex, solve_reference


def random_qp(rng, dim, n_margin, n_homog, slack_cost=10.0):
    """Margin rows with bounded coefficients plus homogeneous rows."""
    qp = QuadraticProgram(dim, [slack_cost])
    for _ in range(n_margin):
        qp.add_row(rng.normal(size=dim), float(rng.uniform(-1, 2)), slack=0)
    for _ in range(n_homog):
        qp.add_row(rng.normal(size=dim), 0.0)
    return qp


class TestTextbookCases:
    def test_scalar_bound(self):
        # minimize w^2/2 subject to w >= 1: solution w = 1, multiplier 1
        qp = QuadraticProgram(1, [1.0])
        r = qp.add_row(np.array([1.0]), 1.0)
        sol = solve(qp, z0=np.array([2.0, 0.0]))
        assert sol.w[0] == pytest.approx(1.0, abs=1e-9)
        assert sol.lam[r] == pytest.approx(1.0, abs=1e-9)
        assert sol.xi[0] == pytest.approx(0.0, abs=1e-12)

    def test_margin_row_with_cheap_violation(self):
        # minimize ||w||^2/2 + 10 xi subject to w_0 + xi >= 2:
        # by hand, w = (2, 0, 0), xi = 0 since the multiplier 2 <= 10
        qp = QuadraticProgram(3, [10.0])
        qp.add_row(np.array([1.0, 0.0, 0.0]), 2.0, slack=0)
        sol = solve(qp)
        np.testing.assert_allclose(sol.w, [2.0, 0.0, 0.0], atol=1e-9)
        assert sol.xi[0] == pytest.approx(0.0, abs=1e-9)
        assert sol.objective == pytest.approx(2.0, abs=1e-8)

    def test_slack_activates_when_cost_small(self):
        # same but cost 1 < multiplier: w* = (1,0), xi* = 1
        qp = QuadraticProgram(2, [1.0])
        qp.add_row(np.array([1.0, 0.0]), 2.0, slack=0)
        sol = solve(qp)
        np.testing.assert_allclose(sol.w, [1.0, 0.0], atol=1e-8)
        assert sol.xi[0] == pytest.approx(1.0, abs=1e-8)

    def test_kkt_residuals_small(self):
        qp = QuadraticProgram(3, [10.0])
        qp.add_row(np.array([1.0, 1.0, 0.0]), 1.0, slack=0)
        qp.add_row(np.array([0.0, 1.0, -1.0]), 0.5, slack=0)
        sol = solve(qp, tol=1e-8)
        assert sol.primal_violation <= 1e-8
        assert sol.stationarity <= 1e-6
        assert sol.comp_slack <= 1e-6
        assert sol.lam.min() >= -1e-8


class TestAgainstReference:
    def test_random_qps_match_reference(self, rng):
        for trial in range(60):
            dim = int(rng.integers(1, 21))
            qp = random_qp(rng, dim, int(rng.integers(1, 12)),
                           int(rng.integers(0, 8)),
                           slack_cost=float(rng.uniform(0.5, 20)))
            sol = solve(qp)
            primal, dual, _ = solve_reference(qp, iterations=4000)
            scale = 1.0 + abs(sol.objective)
            # reference sandwiches the optimum; active-set must sit inside
            assert sol.objective <= primal + 1e-5 * scale, trial
            assert sol.objective >= dual - 1e-5 * scale, trial

    def test_duality_gap_small(self, rng):
        for _ in range(10):
            qp = random_qp(rng, 8, 6, 4)
            sol = solve(qp)
            gw, gxi, h = qp.matrices()
            dual = -0.5 * float(sol.w @ sol.w) + float(h @ sol.lam)
            gap = abs(sol.objective - dual)
            assert gap <= 1e-6 * (1.0 + abs(sol.objective))


class TestStructure:
    def test_monotone_under_row_addition(self, rng):
        qp = QuadraticProgram(6, [5.0])
        prev = solve(qp).objective
        for _ in range(15):
            qp.add_row(rng.normal(size=6), float(rng.uniform(0, 1.5)),
                       slack=0)
            cur = solve(qp).objective
            assert cur >= prev - 1e-9
            prev = cur

    def test_row_permutation_invariant(self, rng):
        rows = [(rng.normal(size=5), float(rng.uniform(-1, 1.5)))
                for _ in range(10)]
        qp1 = QuadraticProgram(5, [3.0])
        for gw, h in rows:
            qp1.add_row(gw, h, slack=0)
        qp2 = QuadraticProgram(5, [3.0])
        for gw, h in reversed(rows):
            qp2.add_row(gw, h, slack=0)
        s1, s2 = solve(qp1), solve(qp2)
        assert s1.objective == pytest.approx(s2.objective, rel=1e-8,
                                             abs=1e-10)

    def test_duplicate_rows_dropped(self):
        qp = QuadraticProgram(2, [1.0])
        r1 = qp.add_row(np.array([1.0, 0.0]), 1.0, slack=0)
        r2 = qp.add_row(np.array([1.0, 0.0]), 1.0, slack=0)
        assert r1 == r2
        assert qp.num_rows == 2  # the nonneg row plus one margin row

    def test_warm_start_converges_fast(self, rng):
        qp = random_qp(rng, 10, 8, 5)
        sol = solve(qp)
        qp.add_row(rng.normal(size=10), 1.0, slack=0)
        warm = solve(qp, warm=sol)
        cold = solve(qp)
        assert warm.objective == pytest.approx(cold.objective, rel=1e-6,
                                               abs=1e-8)
        assert warm.iterations <= cold.iterations + 5

    def test_nonconvergence_reports_best_iterate(self, rng):
        qp = random_qp(rng, 8, 10, 0)
        with pytest.raises(QPNonConvergence) as exc:
            solve(qp, max_iter=2)
        assert isinstance(exc.value.solution, QPSolution)
        assert not exc.value.solution.converged

    def test_dump_round_trips_values(self):
        qp = QuadraticProgram(2, [2.5])
        qp.add_row(np.array([0.25, -1.0 / 3.0]), 0.125, slack=0)
        text = qp.dump()
        assert "0.25" in text and repr(-1.0 / 3.0) in text


class TestSimplexProjection:
    def test_matches_brute_force(self, rng):
        for _ in range(50):
            v = rng.normal(size=6)
            total = float(rng.uniform(0.5, 3.0))
            p = project_simplex(v, total)
            assert p.min() >= 0
            assert p.sum() == pytest.approx(total, abs=1e-9)
            # optimality: directional check against random feasible points
            for _ in range(20):
                q = rng.random(6)
                q = q / q.sum() * total
                assert np.linalg.norm(v - p) <= np.linalg.norm(v - q) + 1e-9
