import numpy as np
import pytest

from lagmig.linsolve import (
    ConvergenceError,
    DDMConfig,
    LayerOperator,
    cg_solve,
    ddm_solve,
)
from lagmig.stencil import Layout2D


def ramp_problem(nx=64, ny=64, eta=2500.0, cmin=1200.0, cmax=4800.0, seed=0):
    """Strongly diagonally dominant layer with a diagonal velocity ramp."""
    rng = np.random.default_rng(seed)
    layout = Layout2D(nx, ny, 25.0, 25.0)
    gamma, beta, dz = 0.6, 0.3, 12.5
    xg, yg = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
    c = cmin + (cmax - cmin) * (xg + yg) / (nx + ny - 2) + rng.uniform(-20, 20, (nx, ny))
    diag = eta**2 / (4 * c**2 * gamma + c * beta * eta * dz)
    rhs = rng.standard_normal((nx, ny))
    return LayerOperator(layout, diag), rhs


def dense_matrix(op):
    n = op.layout.npoints
    a = np.empty((n, n))
    basis = np.zeros((op.layout.nx, op.layout.ny))
    for col in range(n):
        basis.ravel()[col] = 1.0
        a[:, col] = op.apply(basis).ravel()
        basis.ravel()[col] = 0.0
    return a


class TestLayerOperator:
    def test_diag_must_be_positive(self):
        layout = Layout2D(16, 16, 1.0, 1.0)
        with pytest.raises(ValueError):
            LayerOperator(layout, np.zeros((16, 16)))

    def test_spd_spot_check(self):
        rng = np.random.default_rng(1)
        layout = Layout2D(20, 20, 5.0, 5.0)
        op = LayerOperator(layout, rng.uniform(0.05, 0.4, (20, 20)))
        for _ in range(20):
            u = rng.standard_normal((20, 20))
            assert np.vdot(u, op.apply(u)) > 0


class TestCG:
    def test_identity_operator_single_iteration(self):
        # huge spacings switch the stencil term off: A ~ diag = 1
        layout = Layout2D(16, 16, 1e9, 1e9)
        op = LayerOperator(layout, np.ones((16, 16)))
        rhs = np.random.default_rng(2).standard_normal((16, 16))
        sol, iters = cg_solve(op, rhs)
        assert iters == 1
        np.testing.assert_allclose(sol, rhs, atol=1e-12)

    def test_zero_rhs(self):
        op, _ = ramp_problem(32, 32)
        sol, iters = cg_solve(op, np.zeros((32, 32)))
        assert iters == 0 and np.all(sol == 0.0)

    def test_matches_dense_solve(self):
        rng = np.random.default_rng(3)
        layout = Layout2D(32, 32, 12.0, 12.0)
        op = LayerOperator(layout, rng.uniform(0.02, 0.3, (32, 32)))
        rhs = rng.standard_normal((32, 32))
        sol, _ = cg_solve(op, rhs, eps=1e-10)
        ref = np.linalg.solve(dense_matrix(op), rhs.ravel()).reshape(32, 32)
        assert np.linalg.norm(sol - ref) / np.linalg.norm(ref) < 1e-5

    def test_dominant_regime_iteration_budget(self):
        op, rhs = ramp_problem()
        _, iters = cg_solve(op, rhs, eps=1e-6)
        assert iters <= 40

    def test_residual_history_non_divergent(self):
        op, rhs = ramp_problem(48, 48)
        _, iters, hist = cg_solve(op, rhs, eps=1e-10, return_history=True)
        assert len(hist) == iters
        running_min = np.minimum.accumulate(hist)
        assert np.all(hist <= 10.0 * np.maximum(running_min, 1e-300))
        assert hist[-1] <= 1e-10

    def test_nonconvergence_reports_residual(self):
        op, rhs = ramp_problem(32, 32)
        with pytest.raises(ConvergenceError, match="relative residual"):
            cg_solve(op, rhs, eps=1e-12, maxiter=2)

    def test_nonfinite_rhs_rejected(self):
        op, rhs = ramp_problem(32, 32)
        rhs[0, 0] = np.inf
        with pytest.raises(ValueError):
            cg_solve(op, rhs)


class TestDDM:
    def test_config_validation(self):
        with pytest.raises(ValueError):
            DDMConfig(0, 1)
        with pytest.raises(ValueError):
            DDMConfig(2, 2, buffer=-1)

    def test_single_subdomain_identical_to_cg(self):
        op, rhs = ramp_problem(32, 32)
        ref, it_ref = cg_solve(op, rhs, eps=1e-6)
        sol, it = ddm_solve(op, rhs, DDMConfig(1, 1, 0), eps=1e-6)
        np.testing.assert_array_equal(sol, ref)
        assert it == it_ref

    def test_matches_global_solve(self):
        op, rhs = ramp_problem()
        ref, _ = cg_solve(op, rhs, eps=1e-6)
        sol, _ = ddm_solve(op, rhs, DDMConfig(2, 2, 8), eps=1e-6)
        assert np.linalg.norm(sol - ref) / np.linalg.norm(ref) < 1e-4

    def test_error_decreases_with_buffer(self):
        op, rhs = ramp_problem()
        ref, _ = cg_solve(op, rhs, eps=1e-10)
        errs = []
        for buf in (4, 8, 16):
            sol, _ = ddm_solve(op, rhs, DDMConfig(2, 2, buf), eps=1e-10)
            errs.append(np.linalg.norm(sol - ref) / np.linalg.norm(ref))
        assert errs[0] > errs[1] > errs[2]

    def test_iteration_reduction_on_contrast(self):
        op, rhs = ramp_problem()  # 4x velocity contrast across the layer
        _, it_global = cg_solve(op, rhs, eps=1e-6)
        _, it_sub = ddm_solve(op, rhs, DDMConfig(2, 2, 8), eps=1e-6)
        assert it_sub <= 0.8 * it_global

    def test_too_many_subdomains_rejected(self):
        op, rhs = ramp_problem(16, 16)
        with pytest.raises(ValueError):
            ddm_solve(op, rhs, DDMConfig(32, 1, 2))
