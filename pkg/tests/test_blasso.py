"""Tests for the Bayesian Lasso probit baseline."""
import numpy as np
import pytest
from scipy import stats

from ssvsridge.blasso import (
    BETA_FLOOR,
    ChainNumericError,
    LassoConfig,
    LassoHyper,
    run_lasso_chain,
    sample_beta_lasso,
    sample_delta,
    sample_lambda_inverse,
)
from ssvsridge.distributions import RngStream
from ssvsridge.model import Dataset
from ssvsridge.postprocess import lasso_select


class TestSampleBetaLasso:
    def test_null_design_recovers_prior_small_p(self):
        rng = RngStream(0)
        Lam = np.array([0.5, 2.0, 4.0])
        draws = np.array([sample_beta_lasso(np.zeros(4), np.zeros(4),
                                            np.zeros((4, 3)), Lam, rng)
                          for _ in range(20_000)])
        assert np.max(np.abs(draws.mean(axis=0))) < 0.06
        assert draws.var(axis=0) == pytest.approx(Lam, rel=0.05)

    def test_null_design_recovers_prior_dual_branch(self):
        # p > n exercises the n x n woodbury path
        rng = RngStream(1)
        Lam = np.array([0.5, 1.0, 2.0, 4.0, 1.5])
        draws = np.array([sample_beta_lasso(np.zeros(2), np.zeros(2),
                                            np.zeros((2, 5)), Lam, rng)
                          for _ in range(20_000)])
        assert np.max(np.abs(draws.mean(axis=0))) < 0.08
        assert draws.var(axis=0) == pytest.approx(Lam, rel=0.06)

    def test_orthonormal_design_posterior_mean(self):
        Q, _ = np.linalg.qr(RngStream(26).gen.standard_normal((8, 3)))
        L = RngStream(27).gen.standard_normal(8)
        rng = RngStream(25)
        draws = np.array([sample_beta_lasso(L, np.zeros(8), Q, np.ones(3), rng)
                          for _ in range(5000)])
        assert np.max(np.abs(draws.mean(axis=0) - 0.5 * Q.T @ L)) < 0.04

    @pytest.mark.parametrize("n,p", [(6, 8), (12, 3)])
    def test_branch_moments_match_analytic(self, n, p):
        gen = RngStream(30 + p).gen
        X = gen.standard_normal((n, p))
        t = gen.standard_normal(n)
        Lam = gen.uniform(0.5, 2.0, size=p)
        V = np.linalg.inv(X.T @ X + np.diag(1 / Lam))
        mu = V @ X.T @ t
        rng = RngStream(31)
        draws = np.array([sample_beta_lasso(t, np.zeros(n), X, Lam, rng)
                          for _ in range(20_000)])
        assert np.max(np.abs(draws.mean(axis=0) - mu)) < 0.025
        assert np.max(np.abs(np.cov(draws.T) - V)) < 0.04

    def test_woodbury_identities(self):
        # dual-form mean/covariance equal the direct p x p expressions
        gen = RngStream(40).gen
        X = gen.standard_normal((5, 9))
        t = gen.standard_normal(5)
        Lam = gen.uniform(0.3, 3.0, size=9)
        V = np.linalg.inv(X.T @ X + np.diag(1 / Lam))
        M = (X * Lam) @ X.T + np.eye(5)
        dual_mean = Lam * (X.T @ np.linalg.solve(M, t))
        assert np.max(np.abs(dual_mean - V @ X.T @ t)) < 1e-10
        dual_cov = np.diag(Lam) - (Lam[:, None] * X.T) @ np.linalg.solve(M, X * Lam)
        assert np.max(np.abs(dual_cov - V)) < 1e-10

    def test_tiny_lambda_pins_coordinate_dual(self):
        # the dual form tolerates lambda_j -> 0 without conditioning trouble
        gen = RngStream(41).gen
        X = gen.standard_normal((3, 5))
        t = gen.standard_normal(3)
        rng = RngStream(42)
        draws = np.array([sample_beta_lasso(t, np.zeros(3), X,
                                            np.array([1.0, 1e-14, 1.0, 1.0, 1.0]),
                                            rng)
                          for _ in range(500)])
        assert np.max(np.abs(draws[:, 1])) < 1e-6

    def test_small_lambda_shrinks_coordinate_pre(self):
        gen = RngStream(43).gen
        X = gen.standard_normal((10, 3))
        t = gen.standard_normal(10)
        rng = RngStream(42)
        draws = np.array([sample_beta_lasso(t, np.zeros(10), X,
                                            np.array([1.0, 1e-8, 1.0]), rng)
                          for _ in range(500)])
        assert np.max(np.abs(draws[:, 1])) < 1e-3

    def test_extreme_lambda_trips_pivot_guard_pre(self):
        # 1/lambda = 1e14 on the diagonal makes the precision numerically
        # singular relative to its largest pivot; the factorization says so
        from ssvsridge.distributions import SingularMatrixError

        gen = RngStream(44).gen
        X = gen.standard_normal((10, 3))
        with pytest.raises(SingularMatrixError):
            sample_beta_lasso(gen.standard_normal(10), np.zeros(10), X,
                              np.array([1.0, 1e-14, 1.0]), RngStream(42))

    def test_rejects_nonpositive_lambda(self):
        with pytest.raises(ValueError):
            sample_beta_lasso(np.zeros(3), np.zeros(3), np.zeros((3, 2)),
                              np.array([1.0, 0.0]), RngStream(0))


class TestSampleLambdaInverse:
    def test_large_beta_concentrates(self):
        # |beta| = 1e3, delta = 1: 1/lambda_j ~ IGauss(1e-3, 1)
        lam = sample_lambda_inverse(np.full(10_000, 1e3), 1.0, RngStream(36))
        assert np.mean(1 / lam) == pytest.approx(1e-3, abs=1e-5)
        assert 950 < lam.mean() < 1050  # E[lambda] = 1/mu + 1/shape = 1001

    def test_moderate_regime_moments(self):
        # 1/lambda ~ IGauss(1.5, 9): mean 1.5, variance 1.5^3/9 = 0.375
        lam = sample_lambda_inverse(np.full(100_000, 2.0), 9.0, RngStream(10))
        inv = 1 / lam
        assert inv.mean() == pytest.approx(1.5, abs=0.02)
        assert inv.var() == pytest.approx(0.375, rel=0.05)

    def test_floored_beta_stays_finite_positive(self):
        # wald transform breaks down at mean/shape ~ 1e8 unless guarded
        lam = sample_lambda_inverse(np.zeros(200_000), 4.0, RngStream(9))
        assert np.all(np.isfinite(lam))
        assert np.all(lam > 0)

    def test_floor_constant(self):
        assert BETA_FLOOR == 1e-10

    def test_rejects_nonpositive_delta(self):
        with pytest.raises(ValueError):
            sample_lambda_inverse(np.ones(3), 0.0, RngStream(0))


class TestSampleDelta:
    def test_worked_example_gamma_4_half(self):
        # p=3, e=f=1, sum lambda = 2: Gamma(4, scale 1/2), mean 2
        rng = RngStream(35)
        draws = np.array([sample_delta(np.array([0.5, 0.7, 0.8]), 1.0, 1.0, rng)
                          for _ in range(20_000)])
        assert draws.mean() == pytest.approx(2.0, abs=0.03)
        assert np.all(draws > 0)

    def test_empty_lambda_recovers_prior(self):
        rng = RngStream(36)
        draws = np.array([sample_delta(np.zeros(0), 2.0, 3.0, rng)
                          for _ in range(20_000)])
        assert draws.mean() == pytest.approx(6.0, abs=0.15)  # Gamma(2, scale 3)

    def test_mean_decreases_with_lambda_mass(self):
        a = np.array([sample_delta(np.array([0.2, 0.2]), 1.0, 1.0, RngStream(37))
                      for _ in range(10_000)]).mean()
        b = np.array([sample_delta(np.array([5.0, 5.0]), 1.0, 1.0, RngStream(37))
                      for _ in range(10_000)]).mean()
        assert b < a

    def test_rejects_nonpositive_lambda(self):
        with pytest.raises(ValueError):
            sample_delta(np.array([1.0, -0.5]), 1.0, 1.0, RngStream(0))


class TestLaplacePriorRecovery:
    def test_fixed_delta_marginal_is_laplace(self):
        # X = 0 and delta fixed: alternating beta | Lambda and Lambda | beta
        # must leave beta marginally Laplace(0, 1/sqrt(delta))
        delta = 4.0
        rng = RngStream(77)
        lam = np.ones(3)
        kept = []
        for sweep in range(35_000):
            beta = sample_beta_lasso(np.zeros(4), np.zeros(4), np.zeros((4, 3)),
                                     lam, rng)
            lam = sample_lambda_inverse(beta, delta, rng)
            if sweep >= 2_000 and sweep % 3 == 0:
                kept.append(beta.copy())
        samp = np.concatenate(kept)
        ks = stats.kstest(samp, stats.laplace(scale=1 / np.sqrt(delta)).cdf)
        assert ks.pvalue > 1e-3


class TestRunLassoChain:
    def _noise(self):
        gen = RngStream(15).gen
        X = gen.standard_normal((40, 6))
        Y = gen.integers(0, 2, size=40)
        return Dataset(X=X, Z=np.zeros((40, 0)), Y=Y, block_sizes=[])

    def test_noise_intervals_cover_zero(self):
        out = run_lasso_chain(self._noise(),
                              LassoConfig(burn_in=400, post_burn_in=1200,
                                          seed=2, stream_id=0))
        assert np.all(out.beta_ci[:, 0] < 0)
        assert np.all(out.beta_ci[:, 1] > 0)
        assert lasso_select(out, "credible_interval").selected == set()
        assert np.isfinite(out.delta_mean) and out.delta_mean > 0
        assert np.all(out.lambda_mean > 0)

    def test_output_shapes_and_echo(self):
        data = self._noise()
        out = run_lasso_chain(data, LassoConfig(burn_in=100, post_burn_in=300,
                                                seed=5, stream_id=1))
        assert out.beta_mean.shape == (6,)
        assert out.beta_ci.shape == (6, 2)
        assert np.all(out.beta_ci[:, 0] <= out.beta_ci[:, 1])
        assert out.ci_level == 0.95
        assert out.method == "lasso"
        assert out.seed == 5 and out.stream_id == 1
        assert out.config["post_burn_in"] == 300

    def test_deterministic_and_stream_sensitive(self):
        data = self._noise()
        a = run_lasso_chain(data, LassoConfig(burn_in=50, post_burn_in=200, seed=3))
        b = run_lasso_chain(data, LassoConfig(burn_in=50, post_burn_in=200, seed=3))
        c = run_lasso_chain(data, LassoConfig(burn_in=50, post_burn_in=200, seed=3,
                                              stream_id=4))
        assert np.array_equal(a.beta_mean, b.beta_mean)
        assert not np.array_equal(a.beta_mean, c.beta_mean)

    def test_p_larger_than_n_runs(self):
        gen = RngStream(16).gen
        X = gen.standard_normal((15, 25))
        Y = (X[:, 0] + gen.standard_normal(15) > 0).astype(int)
        data = Dataset(X=X, Z=np.zeros((15, 0)), Y=Y, block_sizes=[])
        out = run_lasso_chain(data, LassoConfig(burn_in=100, post_burn_in=200, seed=0))
        assert out.beta_mean.shape == (25,)
        assert np.all(np.isfinite(out.beta_mean))

    def test_random_effect_traces(self):
        gen = RngStream(17).gen
        X = gen.standard_normal((24, 3))
        Z = np.kron(np.eye(3), np.ones((8, 1)))
        Y = (X[:, 0] + gen.standard_normal(24) > 0).astype(int)
        data = Dataset(X=X, Z=Z, Y=Y, block_sizes=[3])
        out = run_lasso_chain(data, LassoConfig(burn_in=50, post_burn_in=120, seed=1))
        assert out.u_trace.shape == (120, 3)
        assert out.sigma2_trace.shape == (120, 1)
        assert np.all(out.sigma2_trace > 0)

    def test_numeric_failure_wrapped(self, monkeypatch):
        def boom(*args, **kwargs):
            raise np.linalg.LinAlgError("synthetic failure")

        monkeypatch.setattr("ssvsridge.blasso._sample_beta_lasso_pre", boom)
        with pytest.raises(ChainNumericError, match="sweep 0"):
            run_lasso_chain(self._noise(), LassoConfig(burn_in=5, post_burn_in=5))

    def test_config_validation(self):
        with pytest.raises(ValueError):
            LassoConfig(burn_in=-1).validate()
        with pytest.raises(ValueError):
            LassoConfig(post_burn_in=0).validate()
        with pytest.raises(ValueError):
            LassoConfig(ci_level=1.0).validate()
        with pytest.raises(ValueError):
            LassoHyper(e=0.0)
