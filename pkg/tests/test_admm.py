import math
from types import SimpleNamespace

import numpy as np
import pytest

from oracles import dense_x_step, ista_lasso, lasso_objective, random_instance
from wingsc.admm import (
    AdmmConfig,
    NumericalFailureError,
    SolverState,
    objective_value,
    solve,
    update_alpha,
    update_duals,
    update_x,
    update_z,
)
from wingsc.wing import WeightParams, WeightState, WingParams, wing_penalty


def state_for(m, n, **kw):
    st = SolverState.initial(m, n)
    for k, v in kw.items():
        if k == "w":
            st.weights = WeightState(np.asarray(v, dtype=float), 1.0)
        else:
            setattr(st, k, np.asarray(v, dtype=float))
    return st


class TestConfig:
    @pytest.mark.parametrize(
        "kw", [{"lam": 0}, {"rho1": -1}, {"rho2": 0}, {"tol": 0}, {"max_iter": 0}, {"max_iter": 2.5}]
    )
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            AdmmConfig(**kw)


class TestUpdateX:
    def test_zero_rhs(self):
        st = state_for(2, 2)
        np.testing.assert_array_equal(update_x(st, np.eye(2), np.zeros(2), AdmmConfig(rho1=1, rho2=1)), 0)

    def test_identity_algebra(self):
        st = state_for(2, 2)
        x = update_x(st, np.eye(2), np.array([2.0, 2.0]), AdmmConfig(rho1=1, rho2=1))
        np.testing.assert_allclose(x, [1.0, 1.0], rtol=1e-14)

    @pytest.mark.parametrize("seed", range(5))
    def test_matches_dense_solve(self, seed):
        rng = np.random.default_rng(seed)
        A, y = random_instance(rng, 6, 10)
        w = rng.uniform(0.05, 1, 6)
        z, u1 = rng.normal(size=6), rng.normal(size=6)
        alpha, u2 = rng.normal(size=10), rng.normal(size=10)
        cfg = AdmmConfig(rho1=rng.uniform(0.5, 5), rho2=rng.uniform(0.5, 5))
        st = state_for(6, 10, w=w, z=z, u1=u1, alpha=alpha, u2=u2)
        x = update_x(st, A, y, cfg)
        ref, M, rhs = dense_x_step(A, y, w, z, u1, alpha, u2, cfg.rho1, cfg.rho2)
        np.testing.assert_allclose(x, ref, rtol=1e-10, atol=1e-10)
        assert np.linalg.norm(M @ x - rhs) / np.linalg.norm(rhs) < 1e-8

    def test_subproblem_gradient_vanishes(self):
        rng = np.random.default_rng(11)
        A, y = random_instance(rng, 15, 25)
        w = rng.uniform(0.1, 1, 15)
        st = state_for(15, 25, w=w, z=rng.normal(size=15), u1=rng.normal(size=15),
                       alpha=rng.normal(size=25), u2=rng.normal(size=25))
        cfg = AdmmConfig(rho1=2.0, rho2=0.5)
        x = update_x(st, A, y, cfg)
        # gradient of rho1/2 ||W(Ax-y) - z + u1||^2 + rho2/2 ||alpha - x + u2||^2
        grad = cfg.rho1 * A.T @ (w * (w * (A @ x - y) - st.z + st.u1)) - cfg.rho2 * (st.alpha - x + st.u2)
        rhs_norm = np.linalg.norm(dense_x_step(A, y, w, st.z, st.u1, st.alpha, st.u2, 2.0, 0.5)[2])
        assert np.linalg.norm(grad) < 1e-6 * (1 + rhs_norm)

    def test_nonfinite_weights_fail(self):
        st = state_for(2, 2, w=[np.nan, 1.0])
        with pytest.raises(NumericalFailureError):
            update_x(st, np.eye(2), np.ones(2), AdmmConfig())


class TestUpdateZ:
    def test_dead_zone(self):
        st = state_for(3, 3)
        for mode in ("wcsc", "src_lasso"):
            np.testing.assert_array_equal(update_z(st, np.eye(3), np.zeros(3), AdmmConfig(), mode), 0)
        st.z = np.full(3, 100.0)
        np.testing.assert_array_equal(update_z(st, np.eye(3), np.zeros(3), AdmmConfig(), "wcsc"), 0)

    def test_linear_branch(self):
        # v = W(Ax - y) + u1 with x = y = 0 reduces to u1
        st = state_for(2, 2, u1=[1.0, -0.1], z=[20.0, 0.0])
        cfg = AdmmConfig(rho1=2.0, wing=WingParams(10, 2))
        np.testing.assert_allclose(update_z(st, np.eye(2), np.zeros(2), cfg), [0.5, 0.0])

    def test_log_branch(self):
        st = state_for(1, 1, u1=[2.5], z=[-3.0])
        cfg = AdmmConfig(rho1=1.0, wing=WingParams(10, 2))
        # threshold 10 / (1 * (2 + 3)) = 2
        np.testing.assert_allclose(update_z(st, np.eye(1), np.zeros(1), cfg), [0.5], rtol=1e-15)

    def test_uses_weighted_residual(self):
        st = state_for(2, 2, w=[0.5, 2.0], x=[1.0, 1.0], z=[50.0, 0.0])
        y = np.array([-3.0, 4.0])
        cfg = AdmmConfig(rho1=1.0)
        # v = [0.5 * 4, 2 * (-3)] = [2, -6], threshold 1
        np.testing.assert_allclose(update_z(st, np.eye(2), y, cfg), [1.0, -5.0])

    def test_quadratic_prox(self):
        st = state_for(2, 2, u1=[3.0, -1.0])
        cfg = AdmmConfig(rho1=2.0)
        np.testing.assert_allclose(update_z(st, np.eye(2), np.zeros(2), cfg, "src_lasso"), [2.0, -2 / 3])


class TestUpdateAlpha:
    def test_equal_inputs(self):
        st = state_for(1, 3, x=[1.0, -2.0, 3.0], u2=[1.0, -2.0, 3.0])
        np.testing.assert_array_equal(update_alpha(st, AdmmConfig()), 0)

    def test_no_shrinkage_at_zero_lambda(self):
        # AdmmConfig forbids lam = 0; the update only reads lam and rho2
        st = state_for(1, 3, x=[1.0, -2.0, 0.5], u2=[0.25, 0.0, -0.5])
        out = update_alpha(st, SimpleNamespace(lam=0.0, rho2=1.0))
        np.testing.assert_array_equal(out, st.x - st.u2)

    def test_example(self):
        st = state_for(1, 3, x=[3.0, -1.0, 0.5])
        np.testing.assert_array_equal(update_alpha(st, AdmmConfig(lam=2.0, rho2=1.0)), [1.0, 0.0, 0.0])


class TestUpdateDuals:
    def test_feasible_point(self):
        rng = np.random.default_rng(0)
        A, y = random_instance(rng, 4, 3)
        x = rng.normal(size=3)
        w = rng.uniform(0.2, 1, 4)
        st = state_for(4, 3, x=x, alpha=x, z=w * (A @ x - y), w=w, u1=[1, 2, 3, 4], u2=[5, 6, 7])
        u1, u2 = update_duals(st, A, y)
        np.testing.assert_allclose(u1, [1, 2, 3, 4], atol=1e-14)
        np.testing.assert_array_equal(u2, [5, 6, 7])

    def test_example(self):
        st = state_for(2, 2, x=[1.0, 1.0])
        u1, _ = update_duals(st, np.eye(2), np.zeros(2))
        np.testing.assert_array_equal(u1, [1.0, 1.0])

    def test_random_matches_formula(self):
        rng = np.random.default_rng(5)
        A, y = random_instance(rng, 5, 7)
        vals = dict(x=rng.normal(size=7), z=rng.normal(size=5), alpha=rng.normal(size=7),
                    u1=rng.normal(size=5), u2=rng.normal(size=7), w=rng.uniform(0, 1, 5))
        st = state_for(5, 7, **vals)
        u1, u2 = update_duals(st, A, y)
        W = np.diag(vals["w"])
        np.testing.assert_allclose(u1, vals["u1"] + W.T @ (A @ vals["x"] - y) - vals["z"], rtol=1e-13)
        np.testing.assert_allclose(u2, vals["u2"] + vals["alpha"] - vals["x"], rtol=1e-13)


class TestObjective:
    def test_zero(self):
        assert objective_value(np.eye(3), np.zeros(3), np.zeros(3), AdmmConfig()) == 0

    def test_lasso_example(self):
        val = objective_value(np.eye(2), [1.0, 0.0], [1.0, 0.0], AdmmConfig(lam=1.0), "src_lasso")
        assert val == 1.0

    def test_recomposed(self):
        rng = np.random.default_rng(2)
        A, y = random_instance(rng, 8, 12)
        x = rng.normal(size=12)
        w = rng.uniform(0, 1, 8)
        cfg = AdmmConfig(lam=0.3, wing=WingParams(3, 1))
        expected = wing_penalty(w * (A @ x - y), cfg.wing) + 0.3 * np.abs(x).sum()
        assert objective_value(A, y, x, cfg, "wwcsc", w) == pytest.approx(expected, rel=1e-14)
        assert objective_value(A, y, x, cfg, "src_lasso") == pytest.approx(lasso_objective(A, y, x, 0.3))

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            objective_value(np.eye(3), np.zeros(2), np.zeros(3), AdmmConfig())


class TestSolve:
    def test_atom_recovery(self):
        rng = np.random.default_rng(4)
        A, _ = random_instance(rng, 20, 30)
        j = 17
        y = A[:, j].copy()
        cfg = AdmmConfig(lam=0.05, rho1=10, rho2=10, max_iter=3000, tol=1e-8)
        for mode in ("src_lasso", "wcsc"):
            res = solve(A, y, cfg, mode=mode)
            assert np.argmax(np.abs(res.x_hat)) == j
        res = solve(A, y, cfg, mode="src_lasso")
        e_j = np.eye(30)[j]
        assert objective_value(A, y, res.x_hat, cfg, "src_lasso") <= objective_value(A, y, e_j, cfg, "src_lasso")

    def test_full_shrinkage(self):
        rng = np.random.default_rng(8)
        A, y = random_instance(rng, 10, 20)
        lam = 2 * np.abs(A.T @ y).max()
        res = solve(A, y, AdmmConfig(lam=lam, rho1=1, rho2=1, tol=1e-10, max_iter=5000), mode="src_lasso")
        np.testing.assert_allclose(res.x_hat, 0, atol=1e-8)

    @pytest.mark.parametrize("seed", range(5))
    def test_lasso_matches_ista(self, seed):
        rng = np.random.default_rng(100 + seed)
        A, y = random_instance(rng, 20, 50)
        lam = 0.1 * np.abs(A.T @ y).max()
        res = solve(A, y, AdmmConfig(lam=lam, rho1=1, rho2=1, tol=1e-10, max_iter=20000), mode="src_lasso")
        f_ista = lasso_objective(A, y, ista_lasso(A, y, lam), lam)
        f_admm = lasso_objective(A, y, res.x_hat, lam)
        assert abs(f_admm - f_ista) / max(1.0, f_ista) < 1e-4

    @pytest.mark.parametrize("mode", ["src_lasso", "wcsc", "wwcsc"])
    def test_deterministic(self, mode):
        rng = np.random.default_rng(1)
        A, y = random_instance(rng, 12, 20)
        cfg = AdmmConfig(weight=WeightParams(), max_iter=50)
        r1, r2 = solve(A, y, cfg, mode), solve(A, y, cfg, mode)
        assert r1.x_hat.tobytes() == r2.x_hat.tobytes()
        assert r1.objective_trace == r2.objective_trace
        assert r1.relative_change_trace == r2.relative_change_trace
        assert r1.final_weights.tobytes() == r2.final_weights.tobytes()

    @pytest.mark.parametrize("mode", ["src_lasso", "wcsc", "wwcsc"])
    def test_trace_contract(self, mode):
        rng = np.random.default_rng(3)
        A, y = random_instance(rng, 10, 15)
        for max_iter, tol in ((5, 1e-4), (5000, 1e-3)):
            res = solve(A, y, AdmmConfig(weight=WeightParams(), max_iter=max_iter, tol=tol), mode)
            assert len(res.relative_change_trace) == len(res.objective_trace) == res.iterations
            assert res.converged == (res.relative_change_trace[-1] < tol)
            assert res.converged or res.iterations == max_iter
        # the first step starts from x = 0 and is never a convergence test
        assert math.isinf(res.relative_change_trace[0])

    def test_wwcsc_weight_coupling(self):
        rng = np.random.default_rng(9)
        A, y = random_instance(rng, 30, 40)
        y[:6] += 5.0
        violations = []

        def check(k, st):
            e2 = st.residual**2
            w, d = st.weights.weights, st.weights.delta
            violations.extend(np.flatnonzero((e2 > d) & (w >= 0.5)))
            violations.extend(np.flatnonzero((e2 < d) & (w <= 0.5)))

        solve(A, y, AdmmConfig(weight=WeightParams(q=2, tau=0.7), max_iter=200), "wwcsc", callback=check)
        assert violations == []

    def test_wwcsc_downweights_outliers(self):
        rng = np.random.default_rng(12)
        A, _ = random_instance(rng, 40, 20)
        y = A @ np.where(rng.uniform(size=20) < 0.2, 1.0, 0.0)
        bad = np.arange(6)
        y[bad] += 3.0
        res = solve(A, y, AdmmConfig(weight=WeightParams(q=2, tau=0.7), rho1=10, rho2=10), "wwcsc")
        assert res.final_weights[bad].max() < 0.5
        assert np.median(np.delete(res.final_weights, bad)) > 0.5

    def test_feasibility_trend(self):
        for seed in range(10):
            rng = np.random.default_rng(200 + seed)
            A, y = random_instance(rng, 20, 50)
            primal = []

            def track(k, st, A=A, y=y):
                w = st.weights.weights
                primal.append((np.linalg.norm(w * (A @ st.x - y) - st.z), np.linalg.norm(st.alpha - st.x)))

            solve(A, y, AdmmConfig(weight=WeightParams(), max_iter=100, tol=1e-12), "wwcsc", callback=track)
            first, last = np.mean(primal[:10], axis=0), np.mean(primal[-10:], axis=0)
            assert np.all(last <= first)

    def test_linsolve_check(self):
        rng = np.random.default_rng(6)
        A, y = random_instance(rng, 30, 60)
        res = solve(A, y, AdmmConfig(weight=WeightParams(), max_iter=40), "wwcsc", linsolve_check=True)
        assert len(res.linsolve_residuals) == res.iterations
        assert max(res.linsolve_residuals) < 1e-8

    def test_default_mode_follows_weight(self):
        rng = np.random.default_rng(0)
        A, y = random_instance(rng, 6, 8)
        assert np.all(solve(A, y, AdmmConfig(max_iter=5)).final_weights == 1)
        assert not np.all(solve(A, y, AdmmConfig(weight=WeightParams(), max_iter=5)).final_weights == 1)

    def test_degenerate_threshold_falls_back_to_uniform(self):
        # exact fit on most pixels: the tau-quantile residual is exactly zero
        A = np.eye(4)
        y = np.zeros(4)
        res = solve(A, y, AdmmConfig(weight=WeightParams(tau=0.5), max_iter=3), "wwcsc")
        np.testing.assert_array_equal(res.final_weights, 1.0)

    @pytest.mark.parametrize(
        "A,y,mode,exc",
        [
            (np.eye(3), np.zeros(2), "wcsc", ValueError),
            (np.zeros((3, 0)), np.zeros(3), "wcsc", ValueError),
            (np.array([[np.nan]]), np.zeros(1), "wcsc", ValueError),
            (np.eye(2), np.array([np.inf, 0]), "wcsc", ValueError),
            (np.eye(2), np.zeros(2), "bogus", ValueError),
            (np.eye(2), np.zeros(2), "wwcsc", ValueError),
        ],
    )
    def test_rejects_bad_input(self, A, y, mode, exc):
        with pytest.raises(exc):
            solve(A, y, AdmmConfig(), mode)
