import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from windlq.coefficients import (
    CoefficientSurface,
    SurfaceError,
    cp_opt,
    default_surface,
    eval_cp,
    eval_ct,
    load_surface,
    optimal_point,
    partial_cp,
    partial_ct,
    save_surface,
)

# Exhaustive-scan maximum of the bundled default surface, frozen as a fixture.
DEFAULT_CP_OPT = 0.4798667835096843


def small_surface():
    lam = np.array([1.0, 2.0, 4.0])
    th = np.array([0.0, 0.1, 0.3])
    cp = np.array([
        [0.2, 0.4, 0.1],
        [0.5, 0.45, 0.2],
        [0.3, 0.25, 0.05],
    ])
    ct = 2.0 * cp
    return CoefficientSurface(lam, th, cp, ct)


class TestConstruction:
    def test_non_monotone_grid_rejected(self):
        with pytest.raises(SurfaceError, match="strictly increasing"):
            CoefficientSurface(
                np.array([1.0, 1.0, 2.0]), np.array([0.0, 0.1]),
                np.zeros((3, 2)), np.zeros((3, 2)),
            )

    def test_short_grid_rejected(self):
        with pytest.raises(SurfaceError):
            CoefficientSurface(
                np.array([1.0]), np.array([0.0, 0.1]),
                np.zeros((1, 2)), np.zeros((1, 2)),
            )

    def test_cp_out_of_range_rejected(self):
        cp = np.zeros((2, 2))
        cp[0, 0] = 1.2
        with pytest.raises(SurfaceError, match=r"\[0, 1\]"):
            CoefficientSurface(
                np.array([1.0, 2.0]), np.array([0.0, 0.1]), cp, np.zeros((2, 2))
            )

    def test_negative_ct_rejected(self):
        ct = np.zeros((2, 2))
        ct[1, 1] = -0.1
        with pytest.raises(SurfaceError, match="non-negative"):
            CoefficientSurface(
                np.array([1.0, 2.0]), np.array([0.0, 0.1]), np.zeros((2, 2)), ct
            )

    def test_shape_mismatch_rejected(self):
        with pytest.raises(SurfaceError, match="shape"):
            CoefficientSurface(
                np.array([1.0, 2.0]), np.array([0.0, 0.1]),
                np.zeros((3, 2)), np.zeros((3, 2)),
            )


class TestEval:
    def test_node_identity(self):
        surf = small_surface()
        for i, lam in enumerate(surf.lambda_grid):
            for j, th in enumerate(surf.theta_grid):
                assert eval_cp(surf, lam, th) == surf.cp_values[i, j]
                assert eval_ct(surf, lam, th) == surf.ct_values[i, j]

    def test_constant_cell_center(self):
        lam = np.array([0.0, 1.0])
        th = np.array([0.0, 1.0])
        c = 0.37
        surf = CoefficientSurface(lam, th, np.full((2, 2), c), np.full((2, 2), c))
        assert eval_cp(surf, 0.5, 0.5) == pytest.approx(c, abs=1e-15)

    def test_edge_midpoint_cp(self):
        # corners 0.2 and 0.4 along the lambda edge at theta = 0
        lam = np.array([0.0, 1.0])
        th = np.array([0.0, 1.0])
        cp = np.array([[0.2, 0.0], [0.4, 0.0]])
        surf = CoefficientSurface(lam, th, cp, np.zeros((2, 2)))
        assert eval_cp(surf, 0.5, 0.0) == pytest.approx(0.3, abs=1e-15)

    def test_edge_midpoint_ct(self):
        lam = np.array([0.0, 1.0])
        th = np.array([0.0, 1.0])
        ct = np.array([[0.6, 0.6], [1.0, 1.0]])
        surf = CoefficientSurface(lam, th, np.zeros((2, 2)), ct)
        assert eval_ct(surf, 0.5, 0.7) == pytest.approx(0.8, abs=1e-15)

    def test_constant_ct_everywhere(self):
        lam = np.array([0.0, 1.0, 2.0])
        th = np.array([0.0, 1.0])
        surf = CoefficientSurface(lam, th, np.zeros((3, 2)), np.full((3, 2), 0.9))
        for q in (0.0, 0.3, 1.5, 2.0):
            assert eval_ct(surf, q, 0.5) == pytest.approx(0.9, abs=1e-15)

    def test_clamping_outside_box(self, surface):
        lo = eval_cp(surface, surface.lambda_grid[0] - 5.0, -1.0)
        assert lo == eval_cp(surface, surface.lambda_grid[0], surface.theta_grid[0])
        hi = eval_cp(surface, 99.0, 99.0)
        assert hi == eval_cp(surface, surface.lambda_grid[-1], surface.theta_grid[-1])

    def test_continuity_across_interior_edges(self, surface):
        lam = surface.lambda_grid
        th = surface.theta_grid
        eps_l = 1e-9 * (lam[1] - lam[0])
        eps_t = 1e-9 * (th[1] - th[0])
        mid_t = 0.5 * (th[3] + th[4])
        for li in lam[1:-1]:
            a = eval_cp(surface, li - eps_l, mid_t)
            b = eval_cp(surface, li + eps_l, mid_t)
            assert abs(a - b) <= 1e-9
        mid_l = 0.5 * (lam[5] + lam[6])
        for tj in th[1:-1]:
            a = eval_cp(surface, mid_l, tj - eps_t)
            b = eval_cp(surface, mid_l, tj + eps_t)
            assert abs(a - b) <= 1e-9


class TestPartials:
    def test_constant_cell_gradient_zero(self):
        lam = np.array([0.0, 1.0])
        th = np.array([0.0, 1.0])
        surf = CoefficientSurface(lam, th, np.full((2, 2), 0.5), np.zeros((2, 2)))
        assert partial_cp(surf, 0.4, 0.6) == (0.0, 0.0)

    def test_separable_affine_cell(self):
        lam = np.array([0.0, 2.0])
        th = np.array([0.0, 1.0])
        cp = np.array([[0.1, 0.1], [0.5, 0.5]])  # slope 0.2 in lambda only
        surf = CoefficientSurface(lam, th, cp, np.zeros((2, 2)))
        dl, dt = partial_cp(surf, 1.0, 0.5)
        assert dl == pytest.approx(0.2, abs=1e-15)
        assert dt == pytest.approx(0.0, abs=1e-15)

    @pytest.mark.parametrize("which", ["cp", "ct"])
    def test_matches_central_differences(self, surface, which):
        ev = eval_cp if which == "cp" else eval_ct
        grad = partial_cp if which == "cp" else partial_ct
        rng = np.random.default_rng(42)
        lam = surface.lambda_grid
        th = surface.theta_grid
        hl = 1e-6 * (lam[1] - lam[0])
        ht = 1e-6 * (th[1] - th[0])
        for _ in range(100):
            i = rng.integers(0, lam.size - 1)
            j = rng.integers(0, th.size - 1)
            # strictly inside a cell, away from the edges by > the FD step
            x = lam[i] + (0.1 + 0.8 * rng.random()) * (lam[i + 1] - lam[i])
            y = th[j] + (0.1 + 0.8 * rng.random()) * (th[j + 1] - th[j])
            dl, dt = grad(surface, x, y)
            fd_l = (ev(surface, x + hl, y) - ev(surface, x - hl, y)) / (2 * hl)
            fd_t = (ev(surface, x, y + ht) - ev(surface, x, y - ht)) / (2 * ht)
            assert dl == pytest.approx(fd_l, rel=1e-6, abs=1e-9)
            assert dt == pytest.approx(fd_t, rel=1e-6, abs=1e-9)

    def test_kink_uses_larger_lambda_cell(self):
        lam = np.array([0.0, 1.0, 2.0])
        th = np.array([0.0, 1.0])
        cp = np.array([[0.0, 0.0], [0.2, 0.2], [0.8, 0.8]])
        surf = CoefficientSurface(lam, th, cp, np.zeros((3, 2)))
        dl, _ = partial_cp(surf, 1.0, 0.5)  # on the interior grid line
        assert dl == pytest.approx(0.6, abs=1e-15)  # right cell slope, not 0.2

    def test_kink_at_upper_boundary_uses_last_cell(self):
        lam = np.array([0.0, 1.0, 2.0])
        th = np.array([0.0, 1.0])
        cp = np.array([[0.0, 0.0], [0.2, 0.2], [0.8, 0.8]])
        surf = CoefficientSurface(lam, th, cp, np.zeros((3, 2)))
        dl, _ = partial_cp(surf, 2.0, 0.5)
        assert dl == pytest.approx(0.6, abs=1e-15)


class TestCpOpt:
    def test_all_equal(self):
        lam = np.array([0.0, 1.0])
        th = np.array([0.0, 1.0])
        surf = CoefficientSurface(lam, th, np.full((2, 2), 0.45), np.zeros((2, 2)))
        assert cp_opt(surf) == 0.45

    def test_single_raised_node(self):
        lam = np.array([0.0, 1.0, 2.0])
        th = np.array([0.0, 1.0])
        cp = np.full((3, 2), 0.45)
        cp[1, 0] = 0.48
        surf = CoefficientSurface(lam, th, cp, np.zeros((3, 2)))
        assert cp_opt(surf) == 0.48
        assert optimal_point(surf) == (1.0, 0.0, 0.48)

    def test_default_surface_matches_exhaustive_scan(self, surface):
        scan = max(
            float(surface.cp_values[i, j])
            for i in range(surface.lambda_grid.size)
            for j in range(surface.theta_grid.size)
        )
        assert cp_opt(surface) == scan
        assert cp_opt(surface) == pytest.approx(DEFAULT_CP_OPT, abs=1e-15)

    def test_dense_random_sample_never_exceeds(self, surface):
        rng = np.random.default_rng(7)
        lam = rng.uniform(surface.lambda_grid[0], surface.lambda_grid[-1], 10_000)
        th = rng.uniform(surface.theta_grid[0], surface.theta_grid[-1], 10_000)
        best = max(eval_cp(surface, float(a), float(b)) for a, b in zip(lam, th))
        assert best <= cp_opt(surface) + 1e-12


class TestDefaultSurface:
    def test_invariants(self, surface):
        assert np.all(np.diff(surface.lambda_grid) > 0)
        assert np.all(np.diff(surface.theta_grid) > 0)
        assert surface.cp_values.min() >= 0.0
        assert surface.cp_values.max() <= 1.0
        assert surface.ct_values.min() >= 0.0
        assert surface.cp_values.shape == (40, 40)

    def test_grid_extent(self, surface):
        assert surface.lambda_bounds == (1.0, 15.0)
        assert surface.theta_bounds[0] == 0.0
        assert surface.theta_bounds[1] == pytest.approx(math.radians(30.0))

    def test_ct_momentum_consistency(self, surface):
        # ct = 4a(1-a) with 4a(1-a)^2 = cp implies ct >= cp wherever cp > 0
        assert np.all(surface.ct_values >= surface.cp_values - 1e-12)


class TestSerialization:
    def test_round_trip_identical(self, surface, tmp_path):
        cp_path = tmp_path / "cp.csv"
        ct_path = tmp_path / "ct.csv"
        save_surface(surface, cp_path, ct_path)
        back = load_surface(cp_path, ct_path)
        assert np.array_equal(back.lambda_grid, surface.lambda_grid)
        assert np.array_equal(back.theta_grid, surface.theta_grid)
        assert np.array_equal(back.cp_values, surface.cp_values)
        assert np.array_equal(back.ct_values, surface.ct_values)

    def test_out_of_range_sample_rejected(self, tmp_path):
        cp_path = tmp_path / "cp.csv"
        ct_path = tmp_path / "ct.csv"
        cp_path.write_text("lambda\\theta,0,1\n1,0.5,1.2\n2,0.5,0.5\n")
        ct_path.write_text("lambda\\theta,0,1\n1,0.5,0.5\n2,0.5,0.5\n")
        with pytest.raises(SurfaceError, match=r"\[0, 1\]"):
            load_surface(cp_path, ct_path)

    def test_missing_header_rejected(self, tmp_path):
        cp_path = tmp_path / "cp.csv"
        ct_path = tmp_path / "ct.csv"
        cp_path.write_text("nope,0,1\n1,0.5,0.5\n")
        ct_path.write_text("lambda\\theta,0,1\n1,0.5,0.5\n")
        with pytest.raises(SurfaceError, match="header"):
            load_surface(cp_path, ct_path)

    def test_grid_mismatch_rejected(self, tmp_path):
        cp_path = tmp_path / "cp.csv"
        ct_path = tmp_path / "ct.csv"
        cp_path.write_text("lambda\\theta,0,1\n1,0.5,0.5\n2,0.5,0.5\n")
        ct_path.write_text("lambda\\theta,0,2\n1,0.5,0.5\n2,0.5,0.5\n")
        with pytest.raises(SurfaceError, match="different grids"):
            load_surface(cp_path, ct_path)


@given(
    x=st.floats(min_value=0.0, max_value=1.0),
    y=st.floats(min_value=0.0, max_value=1.0),
    corners=st.lists(
        st.floats(min_value=0.0, max_value=1.0), min_size=4, max_size=4
    ),
)
@settings(max_examples=200, deadline=None)
def test_interpolant_bounded_by_corners(x, y, corners):
    lam = np.array([0.0, 1.0])
    th = np.array([0.0, 1.0])
    cp = np.array(corners).reshape(2, 2)
    surf = CoefficientSurface(lam, th, cp, np.zeros((2, 2)))
    val = eval_cp(surf, x, y)
    assert min(corners) - 1e-12 <= val <= max(corners) + 1e-12
