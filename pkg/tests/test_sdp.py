import json

import numpy as np
import pytest

from windlq.sdp import (
    ConeProgram,
    SdpBlock,
    SdpInfeasibleError,
    solve,
)


def scalar_geq(c0, coeff):
    """1x1 block: c0 + coeff*z >= 0."""
    return SdpBlock(np.array([[float(c0)]]), np.array([[[float(coeff)]]]))


class TestToyPrograms:
    def test_scalar_lower_bound(self):
        prog = ConeProgram(c=np.array([1.0]), blocks=[scalar_geq(-1.0, 1.0)])
        sol = solve(prog, gap_tol=1e-10)
        assert sol.z[0] == pytest.approx(1.0, abs=1e-8)
        assert sol.gap <= 1e-10

    def test_min_trace_above_identity(self):
        basis = [
            np.array([[1.0, 0.0], [0.0, 0.0]]),
            np.array([[0.0, 1.0], [1.0, 0.0]]),
            np.array([[0.0, 0.0], [0.0, 1.0]]),
        ]
        prog = ConeProgram(
            c=np.array([1.0, 0.0, 1.0]),
            blocks=[SdpBlock(-np.eye(2), np.array(basis))],
        )
        sol = solve(prog, gap_tol=1e-10)
        assert sol.objective == pytest.approx(2.0, abs=1e-8)
        assert sol.z[0] == pytest.approx(1.0, abs=1e-7)
        assert sol.z[2] == pytest.approx(1.0, abs=1e-7)

    def test_linear_program_corner(self):
        # minimize -x-y subject to x+y <= 1, x >= 0, y >= 0
        prog = ConeProgram(
            c=np.array([-1.0, -1.0]),
            blocks=[
                SdpBlock(np.array([[1.0]]), np.array([[[-1.0]], [[-1.0]]])),
                SdpBlock(np.array([[0.0]]), np.array([[[1.0]], [[0.0]]])),
                SdpBlock(np.array([[0.0]]), np.array([[[0.0]], [[1.0]]])),
            ],
        )
        sol = solve(prog, gap_tol=1e-10)
        assert sol.objective == pytest.approx(-1.0, abs=1e-8)

    def test_infeasible_detected(self):
        prog = ConeProgram(
            c=np.array([0.0]),
            blocks=[scalar_geq(-1.0, 1.0), scalar_geq(-1.0, -1.0)],
        )
        with pytest.raises(SdpInfeasibleError):
            solve(prog)

    def test_solution_strictly_feasible(self):
        rng = np.random.default_rng(1)
        m = 4
        f0 = -np.eye(m)
        fk = []
        for _ in range(6):
            s = rng.normal(size=(m, m))
            fk.append(s + s.T)
        fk.append(np.eye(m))  # a feasibility direction
        prog = ConeProgram(c=rng.normal(size=7), blocks=[SdpBlock(f0, np.array(fk))])
        sol = solve(prog, gap_tol=1e-8)
        g = prog.blocks[0].evaluate(sol.z)
        assert np.linalg.eigvalsh(g)[0] > 0.0


class TestSerialization:
    def test_round_trip_lossless(self):
        rng = np.random.default_rng(2)
        s = rng.normal(size=(3, 3))
        prog = ConeProgram(
            c=rng.normal(size=2),
            blocks=[
                SdpBlock(np.eye(3), np.array([s + s.T, np.eye(3)])),
                SdpBlock(np.array([[0.5]]), np.array([[[-1.0]], [[0.25]]])),
            ],
        )
        data = json.loads(json.dumps(prog.to_dict()))
        back = ConeProgram.from_dict(data)
        assert np.array_equal(back.c, prog.c)
        assert len(back.blocks) == len(prog.blocks)
        for b1, b2 in zip(back.blocks, prog.blocks):
            assert np.array_equal(b1.f0, b2.f0)
            assert np.array_equal(b1.fk, b2.fk)

    def test_dimension_validation(self):
        with pytest.raises(ValueError):
            SdpBlock(np.zeros((2, 3)), np.zeros((1, 2, 2)))
        with pytest.raises(ValueError):
            ConeProgram(c=np.zeros(2), blocks=[scalar_geq(0.0, 1.0)])


class TestAgainstEigenvalueOracle:
    def test_max_eigenvalue_bound(self):
        # minimize t subject to t*I - S >= 0 gives the top eigenvalue of S
        rng = np.random.default_rng(3)
        s = rng.normal(size=(5, 5))
        s = 0.5 * (s + s.T)
        prog = ConeProgram(
            c=np.array([1.0]),
            blocks=[SdpBlock(-s, np.eye(5)[None, :, :])],
        )
        sol = solve(prog, gap_tol=1e-10)
        lam_max = float(np.linalg.eigvalsh(s)[-1])
        assert sol.objective == pytest.approx(lam_max, abs=1e-7)
