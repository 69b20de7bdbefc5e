import math

import numpy as np
import pytest
from scipy.stats import ks_2samp

from conftest import assert_within_se
from subwf.clocks import (
    gamma_family,
    identity_clock,
    inverse_clock,
    stable_family,
    subordinator_clock,
)
from subwf.errors import ConfigError, InadmissibleClockError
from subwf.mixtures import DirichletMixture
from subwf.sampler import (
    FixedPoint,
    MixtureStart,
    Mode,
    Stationary,
    SwfModel,
    sampling_status,
    swf_path_sample,
    swf_transition_batch,
    swf_transition_sample,
)
from subwf.special import mittag_leffler_neg
from subwf.wf import Theta

KS_1PCT = 1.63  # critical coefficient for the two-sample statistic


def ks_below_critical(a, b):
    stat = ks_2samp(a, b).statistic
    n = len(a) * len(b) / (len(a) + len(b))
    return stat < KS_1PCT / math.sqrt(n)


class TestStatusResolution:
    def test_auto_prefers_b(self):
        model = SwfModel(Theta.of(1, 1), subordinator_clock(stable_family(0.7)))
        st = sampling_status(model)
        assert st.mode is Mode.OPTION_B and st.exact

    def test_auto_falls_back_to_a(self):
        model = SwfModel(Theta.of(1, 1), subordinator_clock(stable_family(0.3)))
        st = sampling_status(model)
        assert st.mode is Mode.OPTION_A and st.exact

    def test_b_on_inadmissible_raises(self):
        model = SwfModel(Theta.of(1, 1), subordinator_clock(stable_family(0.3)))
        with pytest.raises(InadmissibleClockError):
            sampling_status(model, Mode.OPTION_B)

    def test_inverse_stable_exact_with_feasibility_note(self):
        model = SwfModel(Theta.of(1, 1), inverse_clock(stable_family(0.5)))
        st = sampling_status(model)
        assert st.mode is Mode.OPTION_A and st.exact
        assert st.warning is not None

    def test_inverse_gamma_flagged_approximate(self):
        model = SwfModel(Theta.of(1, 1), inverse_clock(gamma_family(1, 1)))
        st = sampling_status(model)
        assert not st.exact and "grid" in st.warning


class TestTransitionSampling:
    def test_identity_a_b_agree(self, rng):
        model = SwfModel(Theta.of(0.5, 0.5), identity_clock())
        a, _ = swf_transition_batch(model, [0.5, 0.5], 1.0, 30_000, Mode.OPTION_A, rng)
        b, _ = swf_transition_batch(model, [0.5, 0.5], 1.0, 30_000, Mode.OPTION_B, rng)
        assert ks_below_critical(a[:, 0], b[:, 0])

    def test_stable_a_b_agree(self, rng):
        model = SwfModel(Theta.of(0.5, 0.5), subordinator_clock(stable_family(0.7)))
        a, _ = swf_transition_batch(model, [0.5, 0.5], 1.0, 30_000, Mode.OPTION_A, rng)
        b, _ = swf_transition_batch(model, [0.5, 0.5], 1.0, 30_000, Mode.OPTION_B, rng)
        assert ks_below_critical(a[:, 0], b[:, 0])

    def test_stationary_limit(self, rng):
        model = SwfModel(Theta.of(1.0, 1.0), subordinator_clock(stable_family(0.7)))
        draws, _ = swf_transition_batch(model, [0.9, 0.1], 50.0, 30_000, Mode.AUTO, rng)
        x = draws[:, 0]
        assert_within_se(x.mean(), 0.5, x.std() / math.sqrt(x.size))
        assert_within_se(
            (x**2).mean(), 1.0 / 3.0, (x**2).std() / math.sqrt(x.size)
        )

    def test_single_draw_api(self, rng):
        model = SwfModel(Theta.of(1.0, 1.0), identity_clock())
        x = swf_transition_sample(model, [0.3, 0.7], 0.5, Mode.AUTO, rng)
        assert x.shape == (2,) and abs(x.sum() - 1.0) < 1e-12

    def test_requires_rng(self):
        model = SwfModel(Theta.of(1.0, 1.0), identity_clock())
        with pytest.raises(ConfigError):
            swf_transition_sample(model, [0.3, 0.7], 0.5)


class TestInitialLaws:
    def test_fixed_point(self, rng):
        model = SwfModel(Theta.of(1, 1), identity_clock(), FixedPoint((0.3, 0.7)))
        assert np.allclose(model.sample_initial(rng), [0.3, 0.7])

    def test_mixture(self, rng):
        mix = DirichletMixture(Theta.of(1, 1), {(5, 0): 1.0})
        model = SwfModel(Theta.of(1, 1), identity_clock(), MixtureStart(mix))
        draws = np.array([model.sample_initial(rng)[0] for _ in range(5000)])
        assert_within_se(draws.mean(), 6.0 / 7.0, draws.std() / math.sqrt(5000))

    def test_dimension_check(self):
        with pytest.raises(ConfigError):
            SwfModel(Theta.of(1, 1), identity_clock(), FixedPoint((0.2, 0.3, 0.5)))


class TestPathSampling:
    def test_single_time_matches_transition(self, rng):
        model = SwfModel(
            Theta.of(0.5, 0.5), identity_clock(), FixedPoint((0.5, 0.5))
        )
        paths = np.array(
            [swf_path_sample(model, [1.0], rng)[0, 0] for _ in range(20_000)]
        )
        draws, _ = swf_transition_batch(model, [0.5, 0.5], 1.0, 20_000, Mode.AUTO, rng)
        assert ks_below_critical(paths, draws[:, 0])

    def test_identity_lag_autocorrelation(self, rng):
        # stationary lag correlation equals the clock transform at lambda_1
        th = Theta.of(1.0, 1.0)
        model = SwfModel(th, identity_clock(), Stationary())
        n = 40_000
        paths = np.array([swf_path_sample(model, [0.5, 1.0], rng) for _ in range(n)])
        corr = np.corrcoef(paths[:, 0, 0], paths[:, 1, 0])[0, 1]
        want = math.exp(-1.0 * 0.5)
        assert abs(corr - want) < 3.0 / math.sqrt(n) * 1.2

    def test_inverse_stable_lag_autocorrelation_hybrid(self, rng):
        # pair statistic with exact conditional completion below the
        # classical sampler's feasibility floor (see the dual module notes);
        # the clock pair itself comes from the documented grid scan
        from subwf.clocks import sample_clock_path
        from subwf.dual import conditional_weight_row
        from subwf.wf import dirichlet_sample

        th = Theta.of(1.0, 1.0)
        clk = inverse_clock(stable_family(0.5))
        ident = SwfModel(th, identity_clock())
        n = 30_000
        eps = 0.1
        prods = np.empty(n)
        for i in range(n):
            x0 = dirichlet_sample(th, rng)
            c = sample_clock_path(clk, [0.5, 1.0], rng, grid_step=1e-3)
            gap = float(c[1] - c[0])
            if gap >= eps:
                x1 = swf_transition_sample(ident, x0, gap, Mode.OPTION_B, rng)
                prods[i] = x0[0] * x1[0]
            else:
                # E[X1 | x0, gap] = mu + e^(-lambda_1 gap) (x0 - mu)
                cond = 0.5 + math.exp(-gap) * (x0[0] - 0.5)
                prods[i] = x0[0] * cond
        # E[x0 x1] = mu^2 + Var * Phi_gap-average; target via the exact
        # Mittag-Leffler transform of the operational gap is not closed-form,
        # so compare the implied autocorrelation of the *lag* pair sampled at
        # matching physical times against the analytic value
        var = 1.0 / 12.0  # Var of Beta(1,1)
        corr_hat = (prods.mean() - 0.25) / var
        # analytic: corr = E[e^{-lambda_1 (R(1)-R(0.5))}], no closed form;
        # use the Mittag-Leffler bound check instead: the pair correlation
        # must exceed the subordinator-clock value and stay below 1
        sub_corr = math.exp(-1.0 * (0.5**0.5))  # stable-.5 subordinator at gap .5
        se = prods.std() / math.sqrt(n) / var
        assert sub_corr + 3 * se < corr_hat < 1.0

    def test_inverse_stable_single_time_autocorrelation(self, rng):
        # marginal-time correlation with the start: under stationarity
        # corr(X(0), X(t)) = E[e^{-lambda_1 R(t)}] = E_alpha(-lambda_1 t^alpha),
        # and R(t) single draws are exact
        from subwf.clocks import sample_inverse_clock
        from subwf.wf import dirichlet_sample

        th = Theta.of(1.0, 1.0)
        ident = SwfModel(th, identity_clock())
        n = 30_000
        eps = 0.1
        prods = np.empty(n)
        for i in range(n):
            x0 = dirichlet_sample(th, rng)
            r = sample_inverse_clock(stable_family(0.5), 1.0, rng)
            if r >= eps:
                x1 = swf_transition_sample(ident, x0, r, Mode.OPTION_B, rng)
                prods[i] = x0[0] * x1[0]
            else:
                cond = 0.5 + math.exp(-r) * (x0[0] - 0.5)
                prods[i] = x0[0] * cond
        var = 1.0 / 12.0
        corr_hat = (prods.mean() - 0.25) / var
        want = mittag_leffler_neg(0.5, 1.0)
        se = prods.std() / math.sqrt(n) / var
        assert_within_se(corr_hat, want, se, label="inverse-stable autocorr")

    def test_memory_ordering(self, rng):
        # inverse clocks remember longer: lag correlation at t = 5 exceeds
        # the matched subordinator clock's
        lam1 = 1.0
        t = 5.0
        sub_corr = math.exp(-t * lam1**0.5)
        inv_corr = mittag_leffler_neg(0.5, lam1 * t**0.5)
        assert inv_corr > sub_corr
        th = Theta.of(1.0, 1.0)
        model = SwfModel(th, subordinator_clock(stable_family(0.5)), Stationary())
        n = 20_000
        paths = np.array([swf_path_sample(model, [t], rng) for _ in range(n)])
        x1 = paths[:, 0, 0]
        # empirical check of the subordinator side against its closed form
        x0s = np.empty(n)
        # redo jointly for a paired estimate
        prods = np.empty(n)
        from subwf.wf import dirichlet_sample

        for i in range(n):
            x0 = dirichlet_sample(th, rng)
            x1 = swf_transition_sample(model, x0, t, Mode.AUTO, rng)
            prods[i] = x0[0] * x1[0]
        var = 1.0 / 12.0
        corr_hat = (prods.mean() - 0.25) / var
        se = prods.std() / math.sqrt(n) / var
        assert corr_hat + 3 * se < inv_corr


class TestModelRoundTrip:
    def test_json(self):
        from subwf.serialization import model_from_dict, model_to_dict

        mix = DirichletMixture(Theta.of(1, 1), {(2, 0): 0.25, (0, 0): 0.75})
        for model in (
            SwfModel(Theta.of(0.5, 0.5), identity_clock()),
            SwfModel(Theta.of(1, 2), subordinator_clock(stable_family(0.7, beta=0.1)),
                     FixedPoint((0.4, 0.6))),
            SwfModel(Theta.of(1, 1), inverse_clock(gamma_family(1, 1)), MixtureStart(mix)),
        ):
            again = model_from_dict(model_to_dict(model))
            assert again.theta == model.theta
            assert again.clock == model.clock
            assert type(again.initial) is type(model.initial)
