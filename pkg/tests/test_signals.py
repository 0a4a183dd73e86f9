import json
import math

import numpy as np
import pytest

from jetsid import (
    DomainError,
    ConfigError,
    EnsembleConfig,
    InputSpec,
    SampledSignal,
    ShapeError,
    estimate_modulus,
    eval_input,
    input_jet,
    sample_ensemble,
    sample_on_grid,
    sup_distance,
)
from jetsid.bernstein import bernstein_eval

from oracles import brute_modulus, eval_closed_form, sympy_input_derivatives

PI = math.pi


def fourier(c, w, a):
    return InputSpec("fourier", np.asarray(c, float), np.asarray(w, float), np.asarray(a, float))


def poly(c):
    return InputSpec("polynomial", np.asarray(c, float))


class TestEvalInput:
    def test_constant_fourier(self):
        spec = fourier([1.0], [0.0], [PI / 2])
        assert eval_input(spec, 0.3, 1.0) == pytest.approx(1.0, abs=1e-15)

    def test_polynomial(self):
        assert eval_input(poly([2.0, 3.0]), 0.5, 1.0) == pytest.approx(3.5, abs=1e-15)

    def test_two_tone(self):
        # 0.5*sin(1) + 0.5*sin(2), frozen from direct evaluation
        spec = fourier([0.5, 0.5], [1.0, 2.0], [0.0, 0.0])
        expected = 0.5 * math.sin(1.0) + 0.5 * math.sin(2.0)
        assert expected == pytest.approx(0.8753842058167891, abs=1e-15)
        assert eval_input(spec, 1.0, 1.0) == pytest.approx(expected, abs=1e-14)

    def test_domain_error(self):
        with pytest.raises(DomainError):
            eval_input(poly([1.0]), 1.5, 1.0)
        with pytest.raises(DomainError):
            eval_input(poly([1.0]), -0.1, 1.0)


class TestInputJet:
    def test_polynomial_factorials(self):
        jet = input_jet(poly([1.0, 2.0, 3.0]), 2)
        assert jet.derivs == pytest.approx([1.0, 2.0, 6.0], abs=1e-15)

    def test_single_sine(self):
        jet = input_jet(fourier([1.0], [2.0], [0.0]), 2)
        assert jet.derivs == pytest.approx([0.0, 2.0, 0.0], abs=1e-15)

    def test_two_sines_vs_symbolic(self):
        spec = fourier([1.0, 1.0], [1.0, 3.0], [PI / 2, 0.0])
        jet = input_jet(spec, 3)
        assert jet.derivs == pytest.approx([1.0, 3.0, -1.0, -27.0], abs=1e-9)
        assert jet.derivs == pytest.approx(sympy_input_derivatives(spec, 3), abs=1e-9)

    def test_degree_exceeded_gives_zero(self):
        jet = input_jet(poly([1.0, 1.0]), 4)
        assert jet.derivs[2:] == pytest.approx([0.0, 0.0, 0.0])

    @pytest.mark.parametrize("seed", range(4))
    def test_matches_central_differences(self, seed):
        rng = np.random.default_rng(seed)
        if seed % 2 == 0:
            spec = fourier(rng.uniform(-1, 1, 2), rng.uniform(0.3, 2.0, 2), rng.uniform(0, 2 * PI, 2))
        else:
            spec = poly(rng.uniform(-1, 1, 4))
        jet = input_jet(spec, 4)
        h = 1e-2
        offsets = np.arange(-3, 4) * h
        f = eval_closed_form(spec, offsets)
        # 4th-order central stencils; relative tolerance 1e-6 with a
        # floor at the input scale
        stencils = {
            1: np.array([0, 1 / 12, -2 / 3, 0, 2 / 3, -1 / 12, 0]),
            2: np.array([0, -1 / 12, 4 / 3, -5 / 2, 4 / 3, -1 / 12, 0]),
            3: np.array([1 / 8, -1, 13 / 8, 0, -13 / 8, 1, -1 / 8]),
            4: np.array([-1 / 6, 2, -13 / 2, 28 / 3, -13 / 2, 2, -1 / 6]),
        }
        for ell in range(1, 5):
            fd = float(stencils[ell] @ f) / h**ell
            assert abs(fd - jet.derivs[ell]) <= 1e-6 * max(1.0, abs(jet.derivs[ell]))


def make_config(kind="fourier", **kw):
    defaults = dict(kind=kind, m_terms=2, R=1.0, L=2.0, horizon_T=1.0, rng_seed=7)
    defaults.update(kw)
    return EnsembleConfig(**defaults)


class TestSampleEnsemble:
    def test_deterministic(self):
        cfg = make_config()
        a = sample_ensemble(cfg, 3)
        b = sample_ensemble(cfg, 3)
        for s1, s2 in zip(a, b):
            assert np.array_equal(s1.coefficients, s2.coefficients)
            assert np.array_equal(s1.frequencies, s2.frequencies)
            assert np.array_equal(s1.phases, s2.phases)

    def test_fourier_budgets(self):
        cfg = make_config(R=1.0, L=2.0, m_terms=3, rng_seed=11)
        for spec in sample_ensemble(cfg, 200):
            assert np.abs(spec.coefficients).sum() <= 1.0 + 1e-12
            assert np.abs(spec.coefficients * spec.frequencies).sum() <= 2.0 + 1e-12

    def test_polynomial_sup_norm(self):
        # every sampled signal stays within R on a dense grid
        cfg = make_config(kind="polynomial", m_terms=3, R=2.0, L=5.0, rng_seed=3)
        ts = np.linspace(0.0, 1.0, 501)
        for spec in sample_ensemble(cfg, 1000):
            assert np.abs(eval_closed_form(spec, ts)).max() <= 2.0 + 1e-12

    def test_infeasible_config(self):
        with pytest.raises(ConfigError):
            make_config(R=0.0)
        with pytest.raises(ConfigError):
            sample_ensemble(make_config(), 0)

    def test_modulus_within_slope_budget(self):
        cfg = make_config(rng_seed=23)
        for spec in sample_ensemble(cfg, 20):
            sig = sample_on_grid(spec, 200, 1.0)
            for delta in (0.1, 0.3, 0.7):
                assert estimate_modulus(sig, delta) <= cfg.L * delta + 1e-12


class TestSampleOnGrid:
    def test_constant(self):
        sig = sample_on_grid(poly([1.0]), 4, 1.0)
        assert sig.values == pytest.approx([1.0] * 5)

    def test_linear(self):
        sig = sample_on_grid(poly([0.0, 1.0]), 2, 1.0)
        assert sig.values == pytest.approx([0.0, 0.5, 1.0])

    def test_sine(self):
        sig = sample_on_grid(fourier([1.0], [PI], [0.0]), 2, 1.0)
        assert sig.values == pytest.approx([0.0, 1.0, 0.0], abs=1e-12)

    def test_round_trip_with_eval(self):
        spec = fourier([0.4, 0.3], [1.2, 2.7], [0.1, 1.4])
        sig = sample_on_grid(spec, 7, 2.0)
        for i, t in enumerate(sig.grid):
            assert sig.values[i] == eval_input(spec, t, 2.0)


class TestEstimateModulus:
    def test_constant(self):
        sig = SampledSignal(np.full(11, 3.0), 1.0)
        for delta in (0.0, 0.3, 1.0):
            assert estimate_modulus(sig, delta) == 0.0

    def test_linear_slope(self):
        L, T = 2.0, 1.0
        sig = SampledSignal(L * np.linspace(0, T, 11), T)
        # largest grid gap below delta=0.35 is 0.3
        assert estimate_modulus(sig, 0.35) == pytest.approx(L * 0.3, abs=1e-12)

    def test_sine_quarter_period(self):
        # true modulus of sin(2*pi*t) over delta=0.25 is 2*sin(pi/4)=sqrt(2)
        # (attained e.g. between t=0.375 and t=0.625), computed here by
        # brute force over grid pairs
        ts = np.linspace(0.0, 1.0, 101)
        sig = SampledSignal(np.sin(2 * PI * ts), 1.0)
        est = estimate_modulus(sig, 0.25)
        assert est == pytest.approx(brute_modulus(sig.values, 1.0, 0.25), abs=1e-14)
        assert est == pytest.approx(math.sqrt(2.0), abs=0.05)

    def test_monotone_and_clamped(self):
        rng = np.random.default_rng(5)
        sig = SampledSignal(rng.standard_normal(33), 1.0)
        last = 0.0
        for delta in np.linspace(0.0, 1.0, 21):
            cur = estimate_modulus(sig, delta)
            assert cur >= last
            last = cur
        assert estimate_modulus(sig, 5.0) == estimate_modulus(sig, 1.0)
        with pytest.raises(DomainError):
            estimate_modulus(sig, -0.1)

    def test_matches_brute_force(self):
        rng = np.random.default_rng(9)
        sig = SampledSignal(rng.standard_normal(41), 2.0)
        for delta in (0.05, 0.33, 1.0, 1.7):
            assert estimate_modulus(sig, delta) == pytest.approx(
                brute_modulus(sig.values, 2.0, delta), abs=1e-14
            )


class TestSupDistance:
    def test_identical(self):
        sig = SampledSignal([0.0, 1.0, 2.0], 1.0)
        assert sup_distance(sig, sig) == 0.0

    def test_simple(self):
        a = SampledSignal([0.0, 1.0, 2.0], 1.0)
        b = SampledSignal([0.0, 0.0, 0.0], 1.0)
        assert sup_distance(a, b) == 2.0

    def test_grid_mismatch(self):
        a = SampledSignal([0.0, 1.0, 2.0], 1.0)
        with pytest.raises(ShapeError):
            sup_distance(a, SampledSignal([0.0, 1.0], 1.0))
        with pytest.raises(ShapeError):
            sup_distance(a, SampledSignal([0.0, 1.0, 2.0], 2.0))

    def test_sine_vs_bernstein_lift(self):
        # distance to the degree-5 lift matches a brute-force re-evaluation
        spec = fourier([1.0], [2 * PI], [0.0])
        nodes = sample_on_grid(spec, 5, 1.0)
        ts = np.linspace(0.0, 1.0, 301)
        dense_sin = SampledSignal(np.sin(2 * PI * ts), 1.0)
        dense_lift = SampledSignal(bernstein_eval(nodes, ts), 1.0)
        brute = max(
            abs(math.sin(2 * PI * t) - brute_bernstein_local(nodes.values, 1.0, t)) for t in ts
        )
        assert sup_distance(dense_sin, dense_lift) == pytest.approx(brute, abs=1e-12)


def brute_bernstein_local(values, T, t):
    from oracles import brute_bernstein

    return brute_bernstein(values, T, t)


class TestSerialization:
    def test_input_spec_json(self):
        spec = fourier([0.25, -0.5], [1.0, 2.0], [0.3, 0.4])
        doc = json.loads(json.dumps(spec.to_json_dict()))
        back = InputSpec.from_json_dict(doc)
        assert np.array_equal(back.coefficients, spec.coefficients)
        assert np.array_equal(back.frequencies, spec.frequencies)
        poly_back = InputSpec.from_json_dict(poly([1.0, 2.0]).to_json_dict())
        assert poly_back.frequencies is None

    def test_sampled_signal_json_and_csv(self, tmp_path):
        sig = SampledSignal([0.0, 0.25, 1.0], 2.0)
        back = SampledSignal.from_json_dict(sig.to_json_dict())
        assert np.array_equal(back.values, sig.values)
        path = tmp_path / "sig.csv"
        sig.to_csv(path)
        assert path.read_text().splitlines()[0] == "t,value"
        back2 = SampledSignal.from_csv(path)
        assert np.array_equal(back2.values, sig.values)
        assert back2.horizon_T == 2.0

    def test_ensemble_config_strict(self):
        doc = make_config().to_json_dict()
        assert EnsembleConfig.from_json_dict(doc).R == 1.0
        doc["bogus"] = 1
        with pytest.raises(ConfigError):
            EnsembleConfig.from_json_dict(doc)

    def test_signal_invariants(self):
        with pytest.raises(ShapeError):
            SampledSignal([1.0], 1.0)
        with pytest.raises(DomainError):
            SampledSignal([1.0, np.inf], 1.0)
        with pytest.raises(DomainError):
            SampledSignal([1.0, 2.0], -1.0)
