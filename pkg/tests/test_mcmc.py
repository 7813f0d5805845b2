import numpy as np
import pytest
from scipy import stats

from conftest import example_params
from jpsn.dists import NiwParams
from jpsn.errors import DomainError
from jpsn.mcmc import (
    ChainConfig,
    GibbsState,
    PriorSpec,
    compute_r_coefficients,
    ess,
    gibbs_scan,
    impute_missing,
    lambda_full_conditional,
    niw_full_conditional,
    run_gibbs,
    sample_d,
    slice_update_r,
)
from jpsn.model import JpsnParams, jpsn_aug_log_density, simulate_jpsn

HN_MEAN = np.sqrt(2 / np.pi)


class TestNiwFullConditional:
    def test_empty_data_returns_prior(self):
        prior = NiwParams(np.zeros(3), 2.0, 7.0, np.eye(3))
        post = niw_full_conditional(np.zeros((0, 3)), np.zeros((0, 1)), np.zeros(1), prior)
        assert post is prior

    def test_counting_updates_exact(self):
        rng = np.random.default_rng(0)
        prior = NiwParams(np.zeros(3), 2.0, 7.0, np.eye(3))
        wy = rng.normal(0, 1, (50, 3))
        d = rng.uniform(0.1, 2, (50, 1))
        post = niw_full_conditional(wy, d, np.array([0.5]), prior)
        assert post.kappa0 == 2.0 + 50
        assert post.nu0 == 7.0 + 50

    def test_scalar_grid_oracle(self):
        # 2p+q = 1: brute-force posterior over a (mu, s2) grid
        rng = np.random.default_rng(1)
        y = rng.normal(1.2, 0.8, 50).reshape(-1, 1)
        prior = NiwParams(np.zeros(1), 1.0, 3.0, np.eye(1))
        post = niw_full_conditional(y, np.zeros((50, 0)), np.zeros(0), prior)

        mu_grid = np.linspace(-1, 3, 400)
        s2_grid = np.linspace(0.05, 4.0, 400)
        mm, ss = np.meshgrid(mu_grid, s2_grid, indexing="ij")
        loglik = np.zeros_like(mm)
        for val in y[:, 0]:
            loglik += stats.norm(mm, np.sqrt(ss)).logpdf(val)
        logprior = (
            stats.invgamma(prior.nu0 / 2, scale=prior.psi0[0, 0] / 2).logpdf(ss)
            + stats.norm(prior.mu0[0], np.sqrt(ss / prior.kappa0)).logpdf(mm)
        )
        w = np.exp(loglik + logprior - (loglik + logprior).max())
        w /= w.sum()
        grid_mu_mean = float((mm * w).sum())
        assert abs(post.mu0[0] - grid_mu_mean) < 1e-2


class TestLambdaFullConditional:
    def test_zero_latents_return_prior(self):
        prior = PriorSpec(
            NiwParams(np.zeros(3), 1.0, 6.0, np.eye(3)), np.array([0.7]), np.array([[2.0]])
        )
        wy = np.random.default_rng(2).normal(0, 1, (30, 3))
        gamma, omega = lambda_full_conditional(
            wy, np.zeros((30, 1)), np.zeros(3), np.eye(3), prior
        )
        assert gamma[0] == pytest.approx(0.7, abs=1e-12)
        assert omega[0, 0] == pytest.approx(2.0, abs=1e-12)

    def test_grid_oracle(self):
        rng = np.random.default_rng(3)
        mu = np.array([0.3, -0.5, 1.2])
        a = rng.standard_normal((3, 3))
        sigma = a @ a.T + 0.5 * np.eye(3)
        params = JpsnParams(1, 1, mu, sigma, [0.8])
        data, lat = simulate_jpsn(params, 12, rng)
        wy = np.concatenate([lat.embed(data.theta), data.y], axis=1)
        prior = PriorSpec(NiwParams(np.zeros(3), 1.0, 6.0, np.eye(3)), np.zeros(1), np.eye(1))
        gamma, omega = lambda_full_conditional(wy, lat.d, mu, sigma, prior)

        grid = np.linspace(-6, 6, 2001)
        logp = np.array(
            [
                np.sum(
                    jpsn_aug_log_density(
                        data.theta, lat.r, data.y, lat.d, JpsnParams(1, 1, mu, sigma, [v])
                    )
                )
                - 0.5 * v**2
                for v in grid
            ]
        )
        w = np.exp(logp - logp.max())
        w /= w.sum()
        grid_mean = float(grid @ w)
        grid_var = float(((grid - grid_mean) ** 2) @ w)
        assert gamma[0] == pytest.approx(grid_mean, abs=1e-2)
        assert omega[0, 0] == pytest.approx(grid_var, rel=1e-2)

    def test_posterior_precision_spd(self):
        rng = np.random.default_rng(4)
        for _ in range(10):
            params = JpsnParams(
                1, 2,
                rng.normal(0, 1, 4),
                (lambda a: a @ a.T + 4 * np.eye(4))(rng.standard_normal((4, 4))),
                rng.normal(0, 1, 2),
            )
            data, lat = simulate_jpsn(params, 20, rng)
            wy = np.concatenate([lat.embed(data.theta), data.y], axis=1)
            prior = PriorSpec(
                NiwParams(np.zeros(4), 1.0, 8.0, np.eye(4)), np.zeros(2), np.eye(2)
            )
            _, omega = lambda_full_conditional(wy, lat.d, params.mu, params.sigma, prior)
            assert np.abs(omega - omega.T).max() < 1e-10
            assert np.linalg.eigvalsh(omega).min() > 0


class TestSampleD:
    def test_zero_skew_gives_half_normal(self):
        rng = np.random.default_rng(5)
        params = JpsnParams(0, 2, np.zeros(2), np.eye(2), np.zeros(2))
        y = rng.normal(0, 1, (2 * 10**4, 2))
        d = sample_d(y, np.zeros((y.shape[0], 0)), params.mu, params.sigma, params.lam, rng)
        for j in range(2):
            se = d[:, j].std() / np.sqrt(d.shape[0])
            assert abs(d[:, j].mean() - HN_MEAN) < 3 * se

    def test_q1_exact_against_truncnorm_oracle(self):
        rng = np.random.default_rng(6)
        mu = np.array([0.2, -0.4, 1.0])
        a = rng.standard_normal((3, 3))
        sigma = a @ a.T + np.eye(3)
        lam = np.array([1.5])
        w0 = np.array([0.7, -0.3])
        y0 = np.array([2.0])
        n = 10**4
        draws = sample_d(
            np.tile(y0, (n, 1)), np.tile(w0, (n, 1)), mu, sigma, lam, rng
        )[:, 0]
        # analytic one-dimensional truncated-normal law
        sw = sigma[:2, :2]
        swy = sigma[:2, 2]
        s_cond = float(sigma[2, 2] - swy @ np.linalg.solve(sw, swy))
        mu_cond = float(mu[2] + swy @ np.linalg.solve(sw, w0 - mu[:2]))
        prec = lam[0] ** 2 / s_cond + 1.0
        v = 1.0 / prec
        m = v * lam[0] * (y0[0] - mu_cond) / s_cond
        oracle = stats.truncnorm(a=(0 - m) / np.sqrt(v), b=np.inf, loc=m, scale=np.sqrt(v))
        assert stats.kstest(draws, oracle.cdf).pvalue > 0.01

    def test_always_positive_stress(self):
        rng = np.random.default_rng(7)
        params = JpsnParams(0, 2, np.zeros(2), np.eye(2), np.array([-30.0, 30.0]))
        y = rng.normal(0, 5, (10**5, 2))
        d = sample_d(y, np.zeros((10**5, 0)), params.mu, params.sigma, params.lam, rng)
        assert np.all(d > 0)


def _slice_target_cdf(coef_a, coef_b, hi=None):
    m = coef_b / coef_a
    hi = hi if hi is not None else m + 12 / np.sqrt(coef_a)
    grid = np.linspace(1e-9, max(hi, 1.0), 2**15)
    dens = grid * np.exp(-0.5 * coef_a * (grid - m) ** 2)
    cdf = np.concatenate([[0.0], np.cumsum((dens[1:] + dens[:-1]) * 0.5 * np.diff(grid))])
    cdf /= cdf[-1]
    return grid, cdf


class TestSliceUpdateR:
    @pytest.mark.parametrize("coef_a,coef_b", [(1.0, 0.5), (4.0, -2.0), (100.0, 100.0)])
    def test_invariance_against_grid_oracle(self, coef_a, coef_b):
        rng = np.random.default_rng(8)
        grid, cdf = _slice_target_cdf(coef_a, coef_b)
        start = np.interp(rng.random(10**4), cdf, grid)
        moved = slice_update_r(start, coef_a, coef_b, rng)
        p = stats.kstest(moved, lambda x: np.interp(x, grid, cdf)).pvalue
        assert p > 0.01
        assert np.all(moved > 0)

    def test_stationary_mean_high_concentration(self):
        coef_a, coef_b = 100.0, 100.0
        rng = np.random.default_rng(9)
        grid, cdf = _slice_target_cdf(coef_a, coef_b)
        dens_mean = float(np.trapezoid(grid * np.gradient(cdf, grid), grid))
        state = np.interp(rng.random(10**4), cdf, grid)
        for _ in range(30):
            state = slice_update_r(state, coef_a, coef_b, rng)
        se = state.std() / np.sqrt(state.size)
        assert abs(state.mean() - dens_mean) < 3 * se

    def test_domain_checks(self):
        rng = np.random.default_rng(10)
        with pytest.raises(DomainError):
            slice_update_r(1.0, 0.0, 1.0, rng)
        with pytest.raises(DomainError):
            slice_update_r(-1.0, 1.0, 1.0, rng)


class TestComputeRCoefficients:
    def test_identity_case(self):
        coef_a, coef_b = compute_r_coefficients(
            np.array([[0.7]]), np.array([[1.0]]), np.zeros((1, 0)),
            0, np.zeros(2), np.eye(2), np.zeros(0), np.zeros((1, 0)),
        )
        assert coef_a[0] == pytest.approx(1.0, abs=1e-12)
        assert coef_b[0] == pytest.approx(0.0, abs=1e-12)

    def test_positive_quadratic_coefficient(self):
        rng = np.random.default_rng(11)
        for _ in range(10):
            dim = 5
            a = rng.standard_normal((dim, dim))
            sigma = a @ a.T + np.eye(dim)
            params = JpsnParams(2, 1, rng.normal(0, 1, dim), sigma, rng.normal(0, 1, 1))
            data, lat = simulate_jpsn(params, 7, rng)
            for i in range(2):
                coef_a, _ = compute_r_coefficients(
                    data.theta, lat.r, data.y, i, params.mu, params.sigma, params.lam, lat.d
                )
                assert np.all(coef_a > 0)

    def test_matches_augmented_density_restriction(self):
        rng = np.random.default_rng(12)
        params = JpsnParams(
            2, 1,
            rng.normal(0, 1, 5),
            (lambda a: a @ a.T + np.eye(5))(rng.standard_normal((5, 5))),
            rng.normal(0, 1, 1),
        )
        data, lat = simulate_jpsn(params, 3, rng)
        t, i = 1, 1
        coef_a, coef_b = compute_r_coefficients(
            data.theta, lat.r, data.y, i, params.mu, params.sigma, params.lam, lat.d
        )
        r_grid = np.linspace(0.2, 4.0, 25)
        gaps = []
        for r_val in r_grid:
            r_mod = lat.r.copy()
            r_mod[t, i] = r_val
            full = jpsn_aug_log_density(data.theta[t], r_mod[t], data.y[t], lat.d[t], params)
            kernel = np.log(r_val) - 0.5 * coef_a[t] * (r_val - coef_b[t] / coef_a[t]) ** 2
            gaps.append(full - kernel)
        assert np.ptp(gaps) < 1e-8


class TestImputeMissing:
    def test_no_missing_is_identity(self):
        rng = np.random.default_rng(13)
        params = example_params(2)
        theta = np.array([0.3, 1.2])
        r = np.array([1.0, 0.7])
        y = np.array([-4.0])
        th2, r2, y2 = impute_missing(
            theta, r, y, np.zeros(2, bool), np.zeros(1, bool), params, np.array([0.5]), rng
        )
        assert np.array_equal(th2, theta) and np.array_equal(r2, r) and np.array_equal(y2, y)

    def test_full_mask_reproduces_ssn_marginal(self):
        rng = np.random.default_rng(14)
        params = JpsnParams(1, 1, [0.4, -0.2, -1.0], np.diag([1.3, 1.0, 0.8]), [2.0])
        pulled = []
        for _ in range(10**4):
            d = np.abs(rng.standard_normal(1))
            _, _, y = impute_missing(
                np.array([0.0]), np.array([1.0]), np.array([0.0]),
                np.ones(1, bool), np.ones(1, bool), params, d, rng,
            )
            pulled.append(y[0])
        direct = (
            -1.0
            + 2.0 * np.abs(np.random.default_rng(15).standard_normal(10**4))
            + np.sqrt(0.8) * np.random.default_rng(16).standard_normal(10**4)
        )
        assert stats.ks_2samp(np.asarray(pulled), direct).pvalue > 0.01

    def test_correlated_pair_tracks_observed(self):
        rho = 0.99
        params = JpsnParams(0, 2, np.zeros(2), np.array([[1.0, rho], [rho, 1.0]]), np.zeros(2))
        rng = np.random.default_rng(17)
        observed = np.linspace(-2, 2, 400)
        imputed = []
        for y1 in observed:
            _, _, y = impute_missing(
                np.empty(0), np.empty(0), np.array([y1, 0.0]),
                np.zeros(0, bool), np.array([False, True]), params,
                np.abs(rng.standard_normal(2)), rng,
            )
            imputed.append(y[1])
        assert np.corrcoef(observed, imputed)[0, 1] > 0.9

    def test_missing_angle_redrawn_consistently(self):
        rng = np.random.default_rng(18)
        params = example_params(1)
        th, r, _ = impute_missing(
            np.array([0.0, 1.0]), np.array([1.0, 1.0]), np.array([-5.0]),
            np.array([True, False]), np.zeros(1, bool), params, np.array([0.7]), rng,
        )
        assert 0 <= th[0] < 2 * np.pi and r[0] > 0
        assert th[1] == 1.0 and r[1] == 1.0


class TestRunGibbs:
    def test_seed_determinism(self):
        rng = np.random.default_rng(19)
        data, _ = simulate_jpsn(example_params(1), 80, rng)
        data.theta_missing[3, 0] = True
        data.y_missing[5, 0] = True
        cfg = ChainConfig(iterations=300, burnin=100, thin=2, seed=11)
        a = run_gibbs(data, None, cfg)
        b = run_gibbs(data, None, cfg)
        assert np.array_equal(a.mu, b.mu)
        assert np.array_equal(a.sigma, b.sigma)
        assert np.array_equal(a.lam, b.lam)
        assert np.array_equal(a.r, b.r)
        assert np.array_equal(a.theta_imputed, b.theta_imputed)
        assert np.array_equal(a.y_imputed, b.y_imputed)

    def test_identified_constraint_and_consistency(self):
        rng = np.random.default_rng(20)
        data, _ = simulate_jpsn(example_params(1), 80, rng)
        draws = run_gibbs(data, None, ChainConfig(iterations=400, burnin=200, thin=2, seed=4))
        idx = np.arange(2) * 2 + 1
        assert np.abs(draws.sigma_tilde[:, idx, idx] - 1.0).max() < 1e-10
        for b in range(0, draws.n_draws, 17):
            scale = np.concatenate([np.repeat(draws.c[b], 2), np.ones(1)])
            assert np.abs(draws.mu_tilde[b] * scale - draws.mu[b]).max() < 1e-10
            assert np.abs(
                draws.sigma_tilde[b] * np.outer(scale, scale) - draws.sigma[b]
            ).max() < 1e-10
            assert np.abs(draws.r_tilde[b] * draws.c[b] - draws.r[b]).max() < 1e-10

    def test_latents_strictly_positive(self):
        rng = np.random.default_rng(21)
        data, _ = simulate_jpsn(example_params(3), 60, rng)
        draws = run_gibbs(data, None, ChainConfig(iterations=300, burnin=100, thin=1, seed=2))
        assert np.all(draws.r > 0)
        assert np.all(draws.d > 0)

    def test_bad_prior_dimensions_rejected(self):
        rng = np.random.default_rng(22)
        data, _ = simulate_jpsn(example_params(1), 30, rng)
        wrong = PriorSpec(NiwParams(np.zeros(3), 1.0, 6.0, np.eye(3)), np.zeros(1), np.eye(1))
        with pytest.raises(DomainError):
            run_gibbs(data, wrong, ChainConfig(iterations=20, burnin=10, thin=1))

    def test_config_validation(self):
        with pytest.raises(DomainError):
            ChainConfig(iterations=100, burnin=100, thin=1)
        with pytest.raises(DomainError):
            ChainConfig(iterations=100, burnin=10, thin=0)


class TestIdentifiedTraces:
    def test_identified_chain_is_usable(self, example1_fit):
        _, draws = example1_fit
        for chain in (
            draws.mu_tilde[:, 0],
            draws.sigma_tilde[:, 0, 0],
            draws.sigma_tilde[:, 0, 1],
        ):
            assert ess(chain) > 100
        # identification leaves the raw scale free but pins the transformed one
        halves = np.array_split(draws.sigma_tilde[:, 0, 0], 4)
        spread = max(h.mean() for h in halves) - min(h.mean() for h in halves)
        assert spread < 5 * draws.sigma_tilde[:, 0, 0].std()


class TestScanWithMissingEntries:
    def test_joint_distribution_preserved_under_imputation(self):
        # successive-conditional check with a fixed missingness pattern: the
        # scan plus imputation must leave the prior marginal of the
        # parameters untouched
        p, q, t_obs = 1, 1, 10
        prior = PriorSpec(NiwParams(np.zeros(3), 2.0, 8.0, np.eye(3)), np.zeros(1), np.eye(1))
        rng = np.random.default_rng(555)
        t_mask = np.zeros((t_obs, p), bool)
        t_mask[2, 0] = True
        y_mask = np.zeros((t_obs, q), bool)
        y_mask[6, 0] = True

        from jpsn.dists import sample_niw

        def prior_draw():
            mu, sigma = sample_niw(prior.niw, rng)
            lam = np.linalg.cholesky(prior.lambda_cov) @ rng.standard_normal(1)
            return JpsnParams(p, q, mu, sigma, lam)

        def probes(pp):
            return np.r_[pp.mu, np.log(np.diag(pp.sigma)), pp.sigma[0, 2], pp.lam]

        n_keep, thin = 1500, 10
        mc = np.array([probes(prior_draw()) for _ in range(n_keep)])
        sc = np.empty_like(mc)
        pp = prior_draw()
        for m in range(n_keep):
            for _ in range(thin):
                data, lat = simulate_jpsn(pp, t_obs, rng)
                state = GibbsState(
                    pp, lat.r.copy(), lat.d.copy(), data.theta.copy(), data.y.copy()
                )
                state = gibbs_scan(state, t_mask, y_mask, prior, rng)
                pp = state.params
            sc[m] = probes(pp)
        pvals = [stats.ks_2samp(mc[:, k], sc[:, k]).pvalue for k in range(mc.shape[1])]
        assert min(pvals) > 0.001


class TestEss:
    def test_iid_chain(self):
        rng = np.random.default_rng(23)
        val = ess(rng.standard_normal(2000))
        assert 1600 <= val <= 2400

    def test_ar1_chain(self):
        rng = np.random.default_rng(24)
        n, phi = 20000, 0.9
        x = np.empty(n)
        x[0] = rng.standard_normal()
        for t in range(1, n):
            x[t] = phi * x[t - 1] + rng.standard_normal() * np.sqrt(1 - phi**2)
        target = n * (1 - phi) / (1 + phi)
        val = ess(x)
        assert target / 2 <= val <= target * 2

    def test_constant_chain_rejected(self):
        with pytest.raises(DomainError):
            ess(np.ones(100))

    def test_short_chain_rejected(self):
        with pytest.raises(DomainError):
            ess(np.arange(5.0))
