"""Cost polynomials: pinned values, asymptotics, and crossover against a scan."""
import numpy as np
import pytest

from lrkf.complexity import (
    BoundaryPoint,
    CostQuery,
    boundary_curve,
    crossover_rank,
    flops_if,
    flops_kf,
    flops_lkf,
)


def crossover_scan(n, p, s):
    """Exhaustive-scan oracle for the crossover rank."""
    budget = flops_kf(CostQuery(n=n, p=p))
    best = 0
    for r in range(1, n + 1):
        if flops_lkf(CostQuery(n=n, p=p, r=r, s=s)) <= budget:
            best = r
        else:
            break  # the cost is increasing in r
    return best


class TestPinnedValues:
    def test_kf_unit_dimensions(self):
        assert flops_kf(CostQuery(n=1, p=1)) == 16.0

    def test_if_unit_dimensions(self):
        assert flops_if(CostQuery(n=1, p=1)) == 15.0

    def test_kf_10_4(self):
        assert flops_kf(CostQuery(n=10, p=4)) == 6617.0

    def test_if_10_4(self):
        assert flops_if(CostQuery(n=10, p=4)) == 9885.0

    def test_lkf_10_6_4_4(self):
        assert flops_lkf(CostQuery(n=10, p=4, r=6, s=4)) == 16923.0


class TestAsymptotics:
    def test_kf_cubic_scaling(self):
        n = 20_000
        ratio = flops_kf(CostQuery(n=2 * n, p=3)) / flops_kf(CostQuery(n=n, p=3))
        assert ratio == pytest.approx(8.0, rel=1e-3)

    def test_if_exceeds_kf_for_large_n(self):
        q = CostQuery(n=5000, p=10)
        assert flops_if(q) > flops_kf(q)  # leading 50/6 > 4

    def test_lkf_vanishes_relative_to_kf_at_fixed_rank(self):
        ratios = [
            flops_lkf(CostQuery(n=n, p=100, r=20, s=4)) / flops_kf(CostQuery(n=n, p=100))
            for n in (10**3, 10**4, 10**5, 10**6)
        ]
        assert all(np.diff(ratios) < 0)
        assert ratios[-1] < 1e-3

    def test_large_system_small_rank_is_cheaper(self):
        assert flops_lkf(CostQuery(n=1000, p=100, r=20, s=4)) < flops_kf(
            CostQuery(n=1000, p=100)
        )


class TestCrossover:
    @pytest.mark.parametrize(
        "n,p,s",
        [(10, 4, 4), (10, 150, 4), (50, 10, 4), (200, 40, 2), (500, 100, 8), (1000, 10, 4)],
    )
    def test_bisection_matches_scan(self, n, p, s):
        assert crossover_rank(n, p, s) == crossover_scan(n, p, s)

    def test_asymptotic_fraction(self):
        # the quadratic-in-r terms matter when r grows with n: for s = 4 the
        # boundary sits near 0.2831 n, well below the 4 n / (4 + s) envelope
        for p in (10, 40, 100, 150):
            r_star = crossover_rank(10**5, p, 4)
            assert r_star == pytest.approx(0.28313 * 10**5, rel=1e-3)
            assert r_star < 4 * 10**5 / (4 + 4) + 1  # envelope still holds

    def test_envelope_bound(self):
        for n in (100, 316, 1000, 3162, 10000):
            for p in (10, 100):
                assert crossover_rank(n, p, 4) < 4 * n / (4 + 4) + 1

    def test_rank_zero_possible(self):
        # tiny n with a heavy subspace-integration burden
        assert crossover_rank(2, 1, 200) == crossover_scan(2, 1, 200)

    def test_more_outputs_widen_the_advantage_region(self):
        # the full filter carries a p^3 term, the low-rank one only p^2, so
        # the crossover rank grows (weakly) with p at fixed n
        for n in (50, 200, 1000):
            r_by_p = [crossover_rank(n, p, 4) for p in (10, 40, 100, 150)]
            assert all(np.diff(r_by_p) >= 0)


class TestBoundaryCurve:
    def test_single_point(self):
        points = boundary_curve(10, 4, [100])
        assert len(points) == 1
        assert isinstance(points[0], BoundaryPoint)
        assert points[0].n == 100
        assert points[0].r_star == crossover_scan(100, 10, 4)

    def test_curve_ordering_across_p(self):
        grid = [10, 100, 1000, 10000]
        low_p = boundary_curve(10, 4, grid)
        high_p = boundary_curve(150, 4, grid)
        for lo, hi in zip(low_p, high_p):
            assert lo.r_star <= hi.r_star

    def test_fraction_approaches_limit(self):
        grid = [10**3, 10**4, 10**5, 10**6]
        points = boundary_curve(40, 4, grid)
        fractions = [pt.r_star / pt.n for pt in points]
        assert fractions[-1] == pytest.approx(0.28313, rel=1e-3)

    def test_rejects_empty_grid(self):
        with pytest.raises(ValueError, match="nonempty"):
            boundary_curve(10, 4, [])


class TestValidation:
    def test_query_bounds(self):
        with pytest.raises(ValueError):
            CostQuery(n=0, p=1)
        with pytest.raises(ValueError):
            CostQuery(n=4, p=1, r=5)
        with pytest.raises(ValueError):
            CostQuery(n=4, p=1, r=2, s=0)

    def test_lkf_requires_rank_and_substeps(self):
        with pytest.raises(ValueError, match="r and s"):
            flops_lkf(CostQuery(n=4, p=2))
