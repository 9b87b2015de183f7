import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import optimize, stats

from volmodel import distributions as dist
from volmodel.distributions import ModelKind, ModelParams
from volmodel.empirical import DegenerateSampleError, EmpiricalDistribution, build_empirical
from volmodel.fitting import (
    UnidentifiableFitError,
    _samples_hint,
    _sse,
    fit_cdf,
    initial_params,
    relative_errors,
    restart_points,
)
from volmodel.synth import exact_empirical, sample

G, IG, LN, W = ModelKind.GAMMA, ModelKind.INVERSE_GAMMA, ModelKind.LOGNORMAL, ModelKind.WEIBULL

SELF_FIT_SETS = {
    G: [(0.7, 2.0), (2.0, 1.0), (8.0, 50.0)],
    IG: [(1.5, 1.0), (3.0, 2.0), (6.0, 400.0)],
    LN: [(0.0, 1.0), (2.5, 0.4), (-1.0, 2.0)],
    W: [(0.6, 5.0), (1.5, 3.0), (4.0, 0.2)],
}


def draws(kind, params, n=5000, seed=0):
    return sample(kind, ModelParams(*params), n, seed=seed)


class TestInitialParams:
    def test_gamma_moments(self):
        # mean 2 and unbiased variance 2
        n = 40
        s = 2.0 + math.sqrt(2.0 * (n - 1) / n) * np.tile([-1.0, 1.0], n // 2)
        p = initial_params(G, s)
        assert p.phi == pytest.approx(2.0, rel=1e-12)
        assert p.theta == pytest.approx(1.0, rel=1e-12)

    def test_degenerate(self):
        with pytest.raises(DegenerateSampleError):
            initial_params(LN, [math.e] * 40)

    def test_inverse_gamma_moments_on_draws(self):
        p = initial_params(IG, draws(IG, (4.0, 6.0), n=10_000, seed=5))
        assert 3.2 <= p.phi <= 4.8

    def test_lognormal_and_weibull(self):
        s = draws(LN, (1.0, 0.5), n=20_000, seed=2)
        p = initial_params(LN, s)
        assert p.phi == pytest.approx(1.0, abs=0.02) and p.theta == pytest.approx(0.5, rel=0.02)
        q = initial_params(W, draws(W, (2.0, 3.0), n=20_000, seed=3))
        assert q.phi == pytest.approx(2.0, rel=0.05) and q.theta == pytest.approx(3.0, rel=0.05)


class TestFitExamples:
    def test_weibull_self_fit(self):
        emp = exact_empirical(W, ModelParams(1.5, 3.0), points=200)
        fit = fit_cdf(W, emp)
        assert fit.converged
        assert fit.params.phi == pytest.approx(1.5, rel=1e-4)
        assert fit.params.theta == pytest.approx(3.0, rel=1e-4)
        assert fit.sse < 1e-12

    def test_lognormal_matches_mle(self):
        s = draws(LN, (0.0, 1.0), seed=17)
        fit = fit_cdf(LN, build_empirical(s))
        assert -0.05 <= fit.params.phi <= 0.05
        assert 0.95 <= fit.params.theta <= 1.05
        logs = np.log(s)
        assert abs(fit.params.phi - logs.mean()) < 0.02 * logs.std()
        assert fit.params.theta == pytest.approx(logs.std(), rel=0.02)

    def test_wrong_model_has_larger_sse(self):
        emp = build_empirical(draws(G, (2.0, 1.0), seed=8))
        assert fit_cdf(W, emp).sse > fit_cdf(G, emp).sse

    @pytest.mark.parametrize("kind", list(ModelKind))
    def test_self_consistency(self, kind):
        for params in SELF_FIT_SETS[kind]:
            truth = ModelParams(*params)
            fit = fit_cdf(kind, exact_empirical(kind, truth, points=400))
            assert fit.converged
            for got, want in ((fit.params.phi, truth.phi), (fit.params.theta, truth.theta)):
                assert got == pytest.approx(want, rel=1e-4, abs=1e-4 if want == 0 else 0)

    @pytest.mark.parametrize("kind", list(ModelKind))
    def test_minimum_agrees_with_least_squares_oracle(self, kind):
        truth = {G: (1.3, 2.0), IG: (2.5, 3.0), LN: (0.5, 0.8), W: (1.2, 2.0)}[kind]
        emp = build_empirical(draws(LN, (0.3, 0.9), n=1500, seed=int(kind)))
        fit = fit_cdf(kind, emp)

        def resid(x):
            phi = x[0] if kind == LN else math.exp(x[0])
            return dist.cdf(kind, ModelParams(phi, math.exp(x[1])), emp.ecdf_s) - emp.ecdf_f

        start = np.array([truth[0] if kind == LN else math.log(truth[0]), math.log(truth[1])])
        ref = optimize.least_squares(resid, start, xtol=1e-14, ftol=1e-14, gtol=1e-14)
        ref_sse = float(np.sum(ref.fun**2))
        assert fit.sse <= ref_sse * (1 + 1e-6)
        phi_ref = ref.x[0] if kind == LN else math.exp(ref.x[0])
        assert fit.params.phi == pytest.approx(phi_ref, rel=1e-4, abs=1e-6)
        assert fit.params.theta == pytest.approx(math.exp(ref.x[1]), rel=1e-4)


class TestFitProperties:
    def test_sse_not_above_start(self):
        for kind in ModelKind:
            emp = build_empirical(draws(IG, (3.0, 2.0), n=800, seed=4))
            fit = fit_cdf(kind, emp)
            start = initial_params(kind, _samples_hint(emp))
            assert fit.sse <= _sse(kind, start, emp)

    def test_deterministic(self):
        emp = build_empirical(draws(G, (2.0, 1.0), n=1000, seed=9))
        a, b = fit_cdf(IG, emp, seed=12), fit_cdf(IG, emp, seed=12)
        assert a == b

    def test_restart_points(self):
        start = ModelParams(2.0, 4.0)
        pts = restart_points(G, start, seed=3)
        assert pts[0] == start and len(pts) == 3
        for p in pts[1:]:
            assert {round(p.phi / 2.0, 12), round(p.theta / 4.0, 12)} <= {0.75, 1.25}
        assert pts[1].phi + pts[2].phi == pytest.approx(4.0)
        assert pts[1].theta + pts[2].theta == pytest.approx(8.0)
        ln = restart_points(LN, ModelParams(0.0, 1.0), seed=3)
        assert {abs(p.phi) for p in ln[1:]} == {0.25}

    @settings(max_examples=12)
    @given(st.floats(0.01, 100.0), st.sampled_from(list(ModelKind)))
    def test_scale_equivariance(self, c, kind):
        s = draws(W, (1.3, 2.0), n=600, seed=21)
        a = fit_cdf(kind, build_empirical(s))
        b = fit_cdf(kind, build_empirical(s * c))
        if kind == LN:
            assert b.params.phi == pytest.approx(a.params.phi + math.log(c), rel=1e-3, abs=1e-3)
            assert b.params.theta == pytest.approx(a.params.theta, rel=1e-3)
        else:
            assert b.params.phi == pytest.approx(a.params.phi, rel=1e-3)
            assert b.params.theta == pytest.approx(a.params.theta * c, rel=1e-3)

    def test_invalid_empirical_rejected(self):
        emp = EmpiricalDistribution([1.0, 2.0], [0.5, 1.0], [1.0, 2.0], [1, 1], 2, 1.5)
        with pytest.raises(ValueError):
            fit_cdf(G, emp)


class TestRelativeErrors:
    def test_exact_self_fit_tiny(self):
        emp = exact_empirical(W, ModelParams(1.5, 3.0), points=200)
        fit = fit_cdf(W, emp)
        assert fit.rel_err_phi < 1e-6 and fit.rel_err_theta < 1e-6
        assert fit.rel_err_phi >= 0 and fit.rel_err_theta >= 0

    def test_lognormal_sampling_errors(self):
        # Location away from 0 so that the relative error of phi is meaningful.
        s = draws(LN, (2.0, 1.0), seed=31)
        fit = fit_cdf(LN, build_empirical(s))
        assert fit.rel_err_phi < 0.05 and fit.rel_err_theta < 0.05

    def test_matches_covariance_formula(self):
        emp = build_empirical(draws(G, (2.0, 1.0), n=2000, seed=1))
        fit = fit_cdf(G, emp)

        def resid(p):
            return stats.gamma.cdf(emp.ecdf_s, p[0], scale=p[1]) - emp.ecdf_f

        jac = optimize.approx_fprime([fit.params.phi, fit.params.theta], resid, 1e-7)
        cov = fit.sse / (len(emp.ecdf_s) - 2) * np.linalg.inv(jac.T @ jac)
        ref = np.sqrt(np.diag(cov)) / np.array([fit.params.phi, fit.params.theta])
        assert fit.rel_err_phi == pytest.approx(ref[0], rel=1e-3)
        assert fit.rel_err_theta == pytest.approx(ref[1], rel=1e-3)

    def test_flat_direction_is_singular(self):
        k = 50
        emp = EmpiricalDistribution(np.full(k, 2.0), np.linspace(0.02, 1.0, k), [1.0, 3.0], [k], k, 2.0)
        with pytest.raises(UnidentifiableFitError):
            relative_errors(G, ModelParams(2.0, 1.0), emp)
