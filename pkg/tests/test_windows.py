import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from _tables import ALCOHOL_MU, ALCOHOL_SIGMA
from tvude import (
    ConfigError,
    DegenerateWindowError,
    ModelSpec,
    SingularWindowError,
    TimeGrid,
    TimeSeries,
    WindowConfig,
    drift_objective,
    estimate_diffusion_window,
    estimate_drift_window,
    euler_simulate,
    sliding_estimates,
)
from tvude.model import diffusion_eval
from tvude.windows import estimate_window, multiplicative_ratio_estimate


def grid_minimize(fn, lo, hi, rel=1e-4, points=201):
    """Refine a uniform grid around its argmin until the spacing is ``rel * |x|``."""
    while True:
        xs = np.linspace(lo, hi, points)
        vals = np.array([fn(v) for v in xs])
        k = int(np.argmin(vals))
        step = xs[1] - xs[0]
        if step <= rel * max(abs(xs[k]), 1e-12):
            return xs[k], step
        lo, hi = xs[max(k - 1, 0)], xs[min(k + 1, points - 1)]


class TestDriftWindow:
    def test_alcohol_first_window(self, alcohol, alcohol_model):
        mu, rss = estimate_drift_window(alcohol_model, alcohol, 0, 10)
        assert mu[0] == pytest.approx(160.7381, abs=5e-5)
        assert rss == pytest.approx(drift_objective(alcohol_model, alcohol, 0, 10, mu), rel=1e-14)

    def test_covid_first_window(self, covid):
        mu, _ = estimate_drift_window(ModelSpec.multiplicative(), covid, 0, 10)
        assert mu[0] == pytest.approx(0.0198, abs=5e-5)

    def test_exact_recovery_without_noise(self):
        grid = TimeGrid(np.cumsum([0.0, 0.3, 0.1, 0.5, 0.2, 0.4, 0.25, 0.6]))
        data = euler_simulate(ModelSpec.multiplicative(), [0.7], [0.0], 3.0, grid, seed=0)
        mu, rss = estimate_drift_window(ModelSpec.multiplicative(), data, 0, len(data))
        assert mu[0] == pytest.approx(0.7, rel=1e-14)
        assert rss < 1e-25

    def test_grid_search_oracle(self, alcohol, alcohol_model):
        mus = np.arange(150.0, 170.0 + 5e-4, 1e-3)
        vals = [drift_objective(alcohol_model, alcohol, 0, 10, [m]) for m in mus]
        assert mus[int(np.argmin(vals))] == pytest.approx(160.738, abs=1e-3)

    @pytest.mark.parametrize("eps", [1e-4, -1e-4])
    def test_minimality(self, alcohol, alcohol_model, eps):
        for start in range(21):
            mu, rss = estimate_drift_window(alcohol_model, alcohol, start, 10)
            assert drift_objective(alcohol_model, alcohol, start, 10, mu + eps) >= rss

    def test_brute_force_agreement(self, covid):
        model = ModelSpec.multiplicative()
        for start in range(26):
            mu, _ = estimate_drift_window(model, covid, start, 10)
            best, step = grid_minimize(lambda v: drift_objective(model, covid, start, 10, [v]), -1.0, 1.0)
            assert abs(best - mu[0]) <= step

    def test_ratio_formula_matches_generic(self, covid):
        model = ModelSpec.multiplicative()
        for start in range(26):
            mu, _ = estimate_drift_window(model, covid, start, 10)
            assert mu[0] == pytest.approx(multiplicative_ratio_estimate(covid, start, 10), rel=1e-12)

    def test_affine_matches_two_by_two_closed_form(self):
        rng = np.random.default_rng(5)
        t = np.cumsum(rng.uniform(0.1, 0.5, 12))
        x = rng.normal(10, 2, 12)
        data = TimeSeries(t, x)
        mu, _ = estimate_drift_window(ModelSpec.affine(), data, 1, 8)
        tt, xx = t[1:9], x[1:9]
        dt, dx, xi = np.diff(tt), np.diff(xx), xx[:-1]
        A = np.array([[np.sum(dt**2), np.sum(xi * dt**2)], [np.sum(xi * dt**2), np.sum(xi**2 * dt**2)]])
        b = np.array([np.sum(dx * dt), np.sum(xi * dx * dt)])
        assert mu == pytest.approx(np.linalg.inv(A) @ b, rel=1e-10)

    def test_singular_affine_window(self):
        data = TimeSeries(np.arange(8.0), [5.0] * 8)
        with pytest.raises(SingularWindowError) as info:
            estimate_drift_window(ModelSpec.affine(), data, 2, 5)
        assert info.value.m == 3


class TestDiffusionWindow:
    def test_alcohol_first_window(self, alcohol, alcohol_model):
        mu, _ = estimate_drift_window(alcohol_model, alcohol, 0, 10)
        sigma, clamped = estimate_diffusion_window(alcohol_model, alcohol, 0, 10, mu)
        assert sigma[0] == pytest.approx(35.9460, abs=5e-5)
        assert not clamped

    def test_covid_first_window(self, covid):
        model = ModelSpec.multiplicative()
        mu, _ = estimate_drift_window(model, covid, 0, 10)
        sigma, _ = estimate_diffusion_window(model, covid, 0, 10, mu)
        assert sigma[0] == pytest.approx(0.0113, abs=5e-5)

    def test_covid_sum_runs_over_the_window_only(self, covid):
        # With the fourteen-term residual sum the first sigma would not round to 0.0113.
        model = ModelSpec.multiplicative()
        mu, _ = estimate_drift_window(model, covid, 0, 10)
        x, dt = covid.values, np.diff(covid.times)
        r14 = np.diff(x)[:14] - mu[0] * x[:14] * dt[:14]
        wide = math.sqrt(np.sum(r14**2) / np.sum((x[:9] * dt[:9]) ** 2))
        assert abs(wide - 0.0113) > 5e-4

    def test_zero_residual_gives_zero_sigma(self):
        grid = TimeGrid.uniform(0.0, 1.0, 9)
        data = euler_simulate(ModelSpec.affine(), [1.0, 0.0], [0.0], 0.0, grid, seed=0)
        sigma, clamped = estimate_diffusion_window(ModelSpec.affine(), data, 0, 10, [1.0, 0.0])
        assert sigma[0] == 0.0 and not clamped

    def test_degenerate_shape(self):
        data = TimeSeries(np.arange(6.0), np.zeros(6))
        with pytest.raises(DegenerateWindowError):
            estimate_diffusion_window(ModelSpec.multiplicative(), data, 0, 6, [0.1])

    def test_split_weights(self):
        rng = np.random.default_rng(2)
        grid = TimeGrid.uniform(0.0, 0.1, 30)
        noisy = euler_simulate(ModelSpec.affine_split(), [0.5, -0.1], [0.05, 0.05], 4.0, grid, seed=rng)
        split = ModelSpec.affine_split((0.25, 0.75))
        mu, _ = estimate_drift_window(split, noisy, 0, 15)
        sigma, _ = estimate_diffusion_window(split, noisy, 0, 15, mu)
        total = sigma.sum()
        assert sigma == pytest.approx([0.25 * total, 0.75 * total], rel=1e-14)

    @pytest.mark.parametrize("model", [ModelSpec.scaled_affine(), ModelSpec.multiplicative()],
                             ids=["scaled-affine", "multiplicative"])
    def test_moment_identity(self, model, alcohol, covid):
        data = alcohol if model.family.value == "scaled-affine" else covid
        for est in sliding_estimates(model, data, WindowConfig(10)):
            s = est.window_index - 1
            t, x = data.times[s:s + 9], data.values[s:s + 9]
            dt = np.diff(data.times[s:s + 10])
            lhs = sum(diffusion_eval(model, ti, xi, est.sigma) ** 2 * d**2 for ti, xi, d in zip(t, x, dt))
            assert lhs == pytest.approx(est.rss, rel=1e-12)
            assert not est.clamped


class TestSliding:
    def test_counts(self, alcohol, covid, alcohol_model):
        assert len(sliding_estimates(alcohol_model, alcohol, WindowConfig(10))) == 21
        assert len(sliding_estimates(ModelSpec.multiplicative(), covid, WindowConfig(10))) == 26
        assert len(sliding_estimates(alcohol_model, alcohol, WindowConfig(30))) == 1

    @pytest.mark.parametrize("stride", [1, 2, 3, 7])
    def test_stride(self, alcohol, alcohol_model, stride):
        out = sliding_estimates(alcohol_model, alcohol, WindowConfig(10, stride))
        assert len(out) == math.ceil(21 / stride)
        assert [e.window_index for e in out] == list(range(1, 22, stride))

    def test_anchor_times(self, alcohol, alcohol_model):
        out = sliding_estimates(alcohol_model, alcohol, WindowConfig(10))
        assert [e.anchor_time for e in out] == list(alcohol.times[:21])
        centred = sliding_estimates(alcohol_model, alcohol, WindowConfig(10, anchor="center"))
        assert centred[0].anchor_time == pytest.approx(0.5 * (0.0 + 0.7))
        assert centred[0].mu == out[0].mu

    def test_table_two(self, alcohol, alcohol_model):
        out = sliding_estimates(alcohol_model, alcohol, WindowConfig(10))
        assert [e.mu[0] for e in out] == pytest.approx(ALCOHOL_MU, rel=1e-3)
        assert [e.sigma[0] for e in out] == pytest.approx(ALCOHOL_SIGMA, rel=1e-3)

    def test_window_too_long(self, alcohol, alcohol_model):
        with pytest.raises(ConfigError):
            sliding_estimates(alcohol_model, alcohol, WindowConfig(31))

    def test_minimum_window_for_two_drift_parameters(self):
        data = TimeSeries(np.arange(6.0), [1, 2, 4, 3, 5, 6])
        with pytest.raises(ConfigError):
            estimate_window(ModelSpec.affine(), data, 0, 3)
        estimate_window(ModelSpec.affine(), data, 0, 4)

    def test_bad_config(self):
        with pytest.raises(ConfigError):
            WindowConfig(2)
        with pytest.raises(ConfigError):
            WindowConfig(10, stride=0)

    def test_fail_fast_and_fail_soft(self):
        x = [1.0, 2.0, 4.0, 3.0, 5.0, 6.0] + [6.0] * 8
        data = TimeSeries(np.arange(len(x), dtype=float), x)
        with pytest.raises(SingularWindowError):
            sliding_estimates(ModelSpec.affine(), data, WindowConfig(5))
        failures = []
        out = sliding_estimates(ModelSpec.affine(), data, WindowConfig(5), fail_soft=True, failures=failures)
        assert [f.window_index for f in failures] == [6, 7, 8, 9, 10]
        assert len(out) + len(failures) == len(data) - 5 + 1

    def test_parallel_matches_sequential(self, covid):
        model = ModelSpec.multiplicative()
        seq = sliding_estimates(model, covid, WindowConfig(10))
        par = sliding_estimates(model, covid, WindowConfig(10), max_workers=4)
        assert seq == par


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), shift=st.floats(-100, 100), scale=st.floats(1e-3, 1e3))
def test_shift_and_scale_invariance(seed, shift, scale):
    rng = np.random.default_rng(seed)
    grid = TimeGrid(np.cumsum(rng.uniform(0.05, 1.0, 20)))
    data = euler_simulate(ModelSpec.multiplicative(), [0.1], [0.2], 50.0, grid, seed=rng)
    model = ModelSpec.multiplicative()
    base = sliding_estimates(model, data, WindowConfig(8))
    shifted = sliding_estimates(model, TimeSeries(data.times + shift, data.values), WindowConfig(8))
    scaled = sliding_estimates(model, TimeSeries(data.times, scale * data.values), WindowConfig(8))
    for b, s, c in zip(base, shifted, scaled):
        assert s.mu == pytest.approx(b.mu, rel=1e-6)
        assert s.anchor_time == pytest.approx(b.anchor_time + shift)
        assert c.mu == pytest.approx(b.mu, rel=1e-10)
        assert c.sigma == pytest.approx(b.sigma, rel=1e-10)
