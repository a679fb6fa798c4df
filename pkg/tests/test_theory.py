import numpy as np
import pytest

from dln.errors import ContractViolationError, NumericalError
from dln.linalg import make_rng
from dln.theory import (
    FlowParams,
    FlowState,
    OracleReport,
    RecursionParams,
    RecursionState,
    default_flow_dt,
    dominance_witness,
    fit_times,
    flow_integrate,
    flow_series,
    gated_flow_series,
    implied_singular_values,
    initial_state,
    recursion_step,
    run_recursion,
    spectral_lower_bound,
    stable_step_bound,
    verify_against_training,
)


def logistic_closed_form(sigma0, target, t):
    # separable solution of sigma' = -2 sigma (sigma - target) for depth 2
    e = np.exp(2.0 * target * t)
    return target * sigma0 * e / (target + sigma0 * (e - 1.0))


class TestRecursionStep:
    def test_hand_value_lambda(self):
        params = RecursionParams(L=3, eta=10.0, eps=1e-3, sigma_star=np.array([2.0]))
        s1 = recursion_step(initial_state(params))
        # 1e-3 * (1 - 10 * (1e-9 - 2) * 1e-3)
        assert s1.lam[0] == pytest.approx(1.01999999999e-3, rel=1e-12)

    def test_hand_value_beta(self):
        params = RecursionParams(L=3, eta=10.0, eps=1e-3, sigma_star=np.array([2.0]))
        s1 = recursion_step(initial_state(params))
        # 1e-3 * (1 - 10 * (1e-3)^4)
        assert s1.beta == pytest.approx(9.9999999999e-4, rel=1e-12)

    def test_fixed_point(self):
        eps = 1e-2
        params = RecursionParams(L=3, eta=1.0, eps=eps, sigma_star=np.array([eps**3]))
        s1 = recursion_step(initial_state(params))
        assert s1.lam[0] == eps

    def test_beta_strictly_decreasing_and_below_eps(self):
        params = RecursionParams(L=3, eta=10.0, eps=1e-3, sigma_star=np.array([0.1]))
        states = run_recursion(params, 1000)
        betas = np.array([s.beta for s in states])
        assert np.all(np.diff(betas) < 0)
        assert np.all(betas <= 1e-3)
        assert np.all(betas**3 <= (1e-3) ** 3)

    def test_monotone_convergence_below_stability_bound(self):
        sigma = np.array([0.5, 0.3])
        L = 3
        eta = 0.5 * stable_step_bound(float(sigma[0]), L) / 2.0  # monotone regime
        params = RecursionParams(L=L, eta=eta, eps=1e-3, sigma_star=sigma)
        state = initial_state(params)
        prev = state.lam.copy()
        for _ in range(200000):
            state = recursion_step(state)
            assert np.all(state.lam >= prev - 1e-15)
            prev = state.lam.copy()
            if np.max(np.abs(state.lam**L - sigma)) <= 1e-8:
                break
        assert np.max(np.abs(state.lam**L - sigma)) <= 1e-8

    def test_overflow_raises(self):
        params = RecursionParams(L=3, eta=1e6, eps=1.0, sigma_star=np.array([5.0]))
        state = initial_state(params)
        with pytest.raises(NumericalError):
            for _ in range(500):
                state = recursion_step(state)

    def test_implied_values_layout(self):
        params = RecursionParams(L=3, eta=1.0, eps=1e-2, sigma_star=np.array([0.5]))
        vals = implied_singular_values(initial_state(params), 4)
        assert vals.shape == (4,)
        assert np.allclose(vals, 1e-6)


class TestVerifyAgainstTraining:
    def _training_log(self, eta=1.0, iters=500):
        from dln.data import SyntheticSpec, gen_lowrank
        from dln.models import InitSpec, init_compressed
        from dln.operators import Identity
        from dln.trainer import TrainConfig, train_compressed

        d, r, r_hat = 50, 5, 10
        sigma = tuple(np.linspace(0.2, 0.08, r))
        M, U, s, V = gen_lowrank(SyntheticSpec(d=d, r=r, seed=0, sigma_values=sigma))
        op = Identity(d)
        y = op.apply(M)
        model = init_compressed(d, 3, r_hat, InitSpec(1e-3, "spectral", surrogate=op.surrogate(y)))
        cfg = TrainConfig(eta=eta, iters=iters, log_every=10, top_k=r_hat)
        _, log = train_compressed(model, op, y, cfg)
        return log, s

    def test_matching_run_passes(self):
        log, s = self._training_log()
        params = RecursionParams(L=3, eta=1.0, eps=1e-3, sigma_star=s)
        report = verify_against_training(log, initial_state(params), 10)
        assert report.passed and report.max_rel_dev <= 1e-6

    def test_mismatched_eta_fails_with_report(self):
        log, s = self._training_log()
        params = RecursionParams(L=3, eta=2.0, eps=1e-3, sigma_star=s)
        report = verify_against_training(log, initial_state(params), 10)
        assert not report.passed
        assert report.first_fail_iter is not None
        assert report.max_rel_dev > 1e-6

    def test_zero_iteration_trajectory_passes(self):
        from dln.trainer import TrajectoryLog, TrajectoryRecord

        params = RecursionParams(L=3, eta=1.0, eps=1e-3, sigma_star=np.array([0.5]))
        log = TrajectoryLog(top_k=3)
        log.records.append(TrajectoryRecord(0, 0.1, None, np.full(3, 1e-9), 0.0))
        report = verify_against_training(log, initial_state(params), 3)
        assert report.passed

    def test_structural_mismatch_raises(self):
        log, s = self._training_log()
        params = RecursionParams(L=3, eta=1.0, eps=1e-3, sigma_star=s)
        with pytest.raises(ContractViolationError):
            verify_against_training(log, initial_state(params), 5)  # log tracks 10

    def test_report_json(self, tmp_path):
        report = OracleReport(max_rel_dev=1e-9, first_fail_iter=None, passed=True, tol=1e-6)
        payload = report.to_json(tmp_path / "oracle.json")
        assert '"pass": true' in payload
        assert (tmp_path / "oracle.json").exists()


class TestSpectralLowerBound:
    def test_equal_matrices(self):
        a = np.arange(6.0).reshape(2, 3)
        assert spectral_lower_bound(a, a) == (0.0, 0.0)

    def test_aligned_diagonal_equality(self):
        lhs, rhs = spectral_lower_bound(np.diag([3.0, 0.0]), np.diag([1.0, 0.0]))
        assert lhs == pytest.approx(4.0)
        assert rhs == pytest.approx(4.0)

    def test_rotated_rank_one(self):
        lhs, rhs = spectral_lower_bound(np.diag([1.0, 0.0]), np.diag([0.0, 1.0]))
        assert lhs == pytest.approx(2.0)
        assert rhs == pytest.approx(0.0, abs=1e-12)

    def test_never_violated_on_random_pairs(self):
        rng = make_rng(1001)
        for _ in range(300):
            rows = int(rng.integers(1, 13))
            cols = int(rng.integers(1, 13))
            a = rng.standard_normal((rows, cols))
            b = rng.standard_normal((rows, cols))
            lhs, rhs = spectral_lower_bound(a, b)
            assert lhs >= rhs - 1e-9

    def test_shape_mismatch(self):
        with pytest.raises(ContractViolationError):
            spectral_lower_bound(np.eye(2), np.eye(3))


class TestFlow:
    def test_equilibrium_constant(self):
        params = FlowParams(L=3, sigma_star=np.array([0.7, 0.2]))
        state = FlowState(sigma=params.sigma_star.copy(), time=0.0, params=params)
        out = flow_integrate(state, 5.0, 1e-3)
        assert np.allclose(out.sigma, params.sigma_star, atol=1e-14)

    def test_depth2_matches_closed_form(self):
        params = FlowParams(L=2, sigma_star=np.array([1.0]))
        state = FlowState(sigma=np.array([1e-6]), time=0.0, params=params)
        out = flow_integrate(state, 12.0, 1e-3)
        assert out.sigma[0] >= 0.99
        expected = logistic_closed_form(1e-6, 1.0, 12.0)
        assert abs(out.sigma[0] - expected) <= 1e-6

    def test_rk4_order(self):
        # halving dt shrinks the endpoint error by roughly 2^4
        params = FlowParams(L=2, sigma_star=np.array([1.0]))
        state = FlowState(sigma=np.array([1e-3]), time=0.0, params=params)
        exact = logistic_closed_form(1e-3, 1.0, 8.0)
        errs = []
        for dt in (4e-2, 2e-2):
            out = flow_integrate(state, 8.0, dt)
            errs.append(abs(out.sigma[0] - exact))
        ratio = errs[0] / errs[1]
        assert 8.0 <= ratio <= 32.0

    def test_zero_target_strictly_decreasing(self):
        params = FlowParams(L=3, sigma_star=np.array([0.0]))
        series = flow_series(FlowState(sigma=np.array([1e-3]), time=0.0, params=params), 10.0, 1e-2)
        vals = series.sigmas[:, 0]
        assert np.all(np.diff(vals) < 0)

    def test_instability_raises(self):
        params = FlowParams(L=2, sigma_star=np.array([1.0]))
        state = FlowState(sigma=np.array([50.0]), time=0.0, params=params)
        with pytest.raises(NumericalError):
            flow_integrate(state, 10.0, 1.0)

    def test_default_dt_scales_with_target(self):
        p_small = FlowParams(L=3, sigma_star=np.array([0.1]))
        p_big = FlowParams(L=3, sigma_star=np.array([10.0]))
        assert default_flow_dt(p_big) < default_flow_dt(p_small)


class TestDominance:
    def test_identical_initial_states(self):
        params = FlowParams(L=3, sigma_star=np.array([1.0, 0.5]))
        s0 = FlowState(sigma=np.array([1e-3, 1e-3]), time=0.0, params=params)
        a = flow_series(s0, 5.0, 1e-2)
        b = flow_series(s0, 5.0, 1e-2)
        assert dominance_witness(a, b)

    def test_started_at_target_dominates(self):
        params = FlowParams(L=3, sigma_star=np.array([1.0]))
        a = flow_series(FlowState(sigma=np.array([1e-3]), time=0.0, params=params), 4.0, 1e-2)
        b = flow_series(FlowState(sigma=params.sigma_star.copy(), time=0.0, params=params), 4.0, 1e-2)
        assert dominance_witness(a, b)
        assert not dominance_witness(b, a)

    def test_gated_vs_ungated_sequential_fits(self):
        # all-active flow dominates the one whose modes activate sequentially
        targets = np.array([1.0, 0.6, 0.3])
        params = FlowParams(L=3, sigma_star=targets)
        s0 = FlowState(sigma=np.full(3, 1e-2), time=0.0, params=params)
        dt = 2e-3
        gated = gated_flow_series(s0, 60.0, dt, sample_every=100)
        free = flow_series(s0, 60.0, dt, sample_every=100)
        assert dominance_witness(gated, free)
        t_free = fit_times(free)
        t_gated = fit_times(gated)
        assert all(f is not None and g is not None for f, g in zip(t_free, t_gated))
        assert all(f <= g for f, g in zip(t_free, t_gated))
        assert all(t_gated[i] <= t_gated[i + 1] for i in range(2))

    def test_grid_mismatch_raises(self):
        params = FlowParams(L=3, sigma_star=np.array([1.0]))
        s0 = FlowState(sigma=np.array([1e-3]), time=0.0, params=params)
        a = flow_series(s0, 4.0, 1e-2)
        b = flow_series(s0, 2.0, 1e-2)
        with pytest.raises(ContractViolationError):
            dominance_witness(a, b)


def test_stable_step_bound_formula():
    assert stable_step_bound(1.0, 2) == pytest.approx(1.0)
    # larger outer-rate multipliers shrink the stable region
    assert stable_step_bound(0.5, 3, alpha=5.0) < stable_step_bound(0.5, 3, alpha=1.0)
