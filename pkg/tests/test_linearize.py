import numpy as np
import pytest
from oracles import finite_difference_jacobian

from windlq.control import desired_speed
from windlq.equilibrium import compute_equilibrium, input_scales, state_scales
from windlq.linearize import (
    SPARSITY,
    controllability_check,
    linearize,
    scale_model,
    unscale_gain,
)
from windlq.turbine import ExternalInput, b_matrix


@pytest.fixture(scope="module")
def model(params, surface, eq_region3):
    return linearize(params, surface, eq_region3)


def equilibria_sample(params, surface, table):
    """Interior region-3 equilibria spread over wind speed and power."""
    out = []
    for v in np.linspace(10.5, 16.5, 5):
        for frac in (0.7, 1.0):
            p_d = frac * params.p_rated
            w = ExternalInput(v=float(v), omega_d=desired_speed(table, p_d), p_d=p_d)
            out.append(compute_equilibrium(params, surface, w))
    return out


class TestFixedEntries:
    def test_exact_constants(self, params, model):
        a = model.a
        assert a[0, 6] == -params.n_g ** 2 / params.j_t
        assert a[1, 2] == 1.0
        assert a[2, 1] == -params.k_t / params.m_t
        assert a[2, 2] == -params.d_t / params.m_t
        assert a[3, 0] == -1.0

    def test_power_row_entries(self, params, model, eq_region3):
        a = model.a
        assert a[4, 0] == -params.eta * eq_region3.x_s.m_g
        assert a[4, 6] == -params.eta * eq_region3.x_s.omega

    def test_b_is_constant_input_map(self, model):
        assert np.array_equal(model.b, b_matrix())


class TestSparsity:
    def test_zero_outside_pattern(self, model):
        for i in range(7):
            for j in range(7):
                if (i, j) not in SPARSITY:
                    assert model.a[i, j] == 0.0, (i, j)

    def test_rows_6_7_zero(self, model):
        assert np.all(model.a[5] == 0.0)
        assert np.all(model.a[6] == 0.0)


class TestFiniteDifferenceOracle:
    def test_all_entries_at_many_equilibria(self, params, surface, table):
        eqs = equilibria_sample(params, surface, table)
        assert len(eqs) >= 10
        for eq in eqs:
            a = linearize(params, surface, eq).a
            fd = finite_difference_jacobian(params, surface, eq)
            err = np.abs(a - fd)
            tol = 1e-4 * np.abs(fd) + 1e-8
            assert np.all(err <= tol), (
                f"v={eq.w_s.v}: worst entry "
                f"{np.unravel_index(np.argmax(err - tol), err.shape)}"
            )


class TestScaling:
    def test_similarity_preserves_eigenvalues(self, params, model):
        sx = state_scales(params)
        su = input_scales(params)
        a_s, b_s = scale_model(model.a, model.b, sx, su)
        ev_raw = np.sort_complex(np.linalg.eigvals(model.a))
        ev_scaled = np.sort_complex(np.linalg.eigvals(a_s))
        assert np.allclose(ev_raw, ev_scaled, rtol=1e-9, atol=1e-12)

    def test_gain_unscaling_round_trip(self, params):
        sx = state_scales(params)
        su = input_scales(params)
        rng = np.random.default_rng(0)
        k_scaled = rng.normal(size=(2, 7))
        k_phys = unscale_gain(k_scaled, sx, su)
        # applying the physical gain to a physical state equals applying
        # the scaled gain to the scaled state, scaled back to inputs
        x = rng.normal(size=7)
        assert np.allclose(k_phys @ x, su * (k_scaled @ (x / sx)), rtol=1e-12)

    def test_scale_model_consistency(self, params, model):
        sx = state_scales(params)
        su = input_scales(params)
        a_s, b_s = scale_model(model.a, model.b, sx, su)
        assert np.allclose(np.diag(1 / sx) @ model.a @ np.diag(sx), a_s)
        assert np.allclose(np.diag(1 / sx) @ model.b @ np.diag(su), b_s)


class TestControllability:
    def test_zero_dynamics_rank_two(self):
        ok, rank = controllability_check(np.zeros((7, 7)), b_matrix())
        assert not ok
        assert rank == 2

    def test_region3_fixture_controllable(self, model):
        ok, rank = controllability_check(model)
        assert ok
        assert rank == 7

    def test_verdict_invariant_to_scalar_scaling(self, model):
        ok1, r1 = controllability_check(model.a, model.b)
        ok2, r2 = controllability_check(2.0 * model.a, model.b)
        assert (ok1, r1) == (ok2, r2)

    def test_classic_uncontrollable_pair(self):
        a = np.diag([-1.0, -2.0])
        b = np.array([[1.0], [0.0]])  # second mode unreachable
        ok, rank = controllability_check(a, b)
        assert not ok
        assert rank == 1
