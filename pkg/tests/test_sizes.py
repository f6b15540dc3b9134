import math

import numpy as np
import pytest
from scipy import integrate

from lorsim.rng import default_stream
from lorsim.sizes import (
    SampleSizeSpec,
    SizeKind,
    compound_bernoulli_moments,
    draw_raw_sizes,
    draw_sample_size,
    draw_sample_sizes,
    exact_size_moments,
    inverse_moment_delta,
    inverse_moment_exact,
    negative_tail_probability,
    round_half_away,
    size_moments,
    size_pmf,
    truncation_probability,
)

CV = math.sqrt(1.21 / 12)
KINDS = list(SizeKind)


def _phi_erf(x):
    # independent of scipy: standard normal cdf through math.erf
    return 0.5 * (1.0 + math.erf(x / math.sqrt(2.0)))


def test_spec_validation():
    with pytest.raises(ValueError):
        SampleSizeSpec(SizeKind.UNIFORM, 9)
    with pytest.raises(ValueError):
        SampleSizeSpec("bogus", 100)
    assert SampleSizeSpec("TruncatedNormal", 40).kind is SizeKind.NORMAL
    lo, hi = SampleSizeSpec(SizeKind.UNIFORM, 40).bounds
    assert lo == pytest.approx(18.0) and hi == pytest.approx(62.0)


def test_constant_draws():
    rng = default_stream(1)
    spec = SampleSizeSpec(SizeKind.CONSTANT, 100)
    assert all(draw_sample_size(spec, rng) == 100 for _ in range(20))


def test_uniform_support():
    rng = default_stream(2)
    n = draw_sample_sizes(SampleSizeSpec(SizeKind.UNIFORM, 100), rng, 200_000)
    assert n.min() >= 45 and n.max() <= 155
    assert set(np.unique(n)) == set(range(45, 156))


def test_round_half_away():
    assert list(round_half_away([0.5, 1.5, 2.5, -0.5, 2.49])) == [1.0, 2.0, 3.0, -1.0, 2.0]


@pytest.mark.parametrize("kind", KINDS)
@pytest.mark.parametrize("n", [40, 100, 1000])
def test_draws_integral_and_floored(kind, n):
    rng = default_stream(3)
    x = draw_sample_sizes(SampleSizeSpec(kind, n), rng, 100_000)
    assert x.dtype.kind == "i"
    assert x.min() >= 10


def test_truncation_frequency_n40():
    rng = default_stream(4)
    spec = SampleSizeSpec(SizeKind.NORMAL, 40)
    raw = draw_raw_sizes(spec, rng, 10**6)
    clamped = np.mean(round_half_away(raw) < 10)
    assert clamped == pytest.approx(0.009, abs=0.002)
    # analytic value of the same event: Phi((9.5 - 40) / sd)
    assert truncation_probability(spec) == pytest.approx(_phi_erf((9.5 - 40) / (CV * 40)), rel=1e-9)


def test_size_moments():
    assert size_moments(SampleSizeSpec(SizeKind.CONSTANT, 250)) == (250.0, 0.0, 0.0)
    m, v, cv = size_moments(SampleSizeSpec(SizeKind.UNIFORM, 100))
    assert (m, v) == (100.0, pytest.approx(1008.3333333, rel=1e-9))
    assert cv == pytest.approx(0.31754, abs=1e-5)
    assert cv * cv == pytest.approx(0.101, abs=0.001)
    m, v, cv = size_moments(SampleSizeSpec(SizeKind.NORMAL, 1000))
    assert v == pytest.approx(1.21e6 / 12, rel=1e-12)


def test_normal_variance_by_monte_carlo():
    rng = default_stream(5)
    raw = draw_raw_sizes(SampleSizeSpec(SizeKind.NORMAL, 1000), rng, 10**6)
    assert raw.var() == pytest.approx(100833.33, rel=0.01)


@pytest.mark.parametrize("n", [40, 100, 250, 1000])
def test_negative_tail(n):
    spec = SampleSizeSpec(SizeKind.NORMAL, n)
    p = negative_tail_probability(spec)
    assert p == pytest.approx(0.00082, abs=0.00005)
    assert p == pytest.approx(_phi_erf(-3.1492), abs=2e-7)


def test_negative_tail_bounded_kinds_zero():
    assert negative_tail_probability(SampleSizeSpec(SizeKind.UNIFORM, 100)) == 0.0
    assert negative_tail_probability(SampleSizeSpec(SizeKind.CONSTANT, 100)) == 0.0


def test_inverse_moment_delta_values():
    assert inverse_moment_delta(SampleSizeSpec(SizeKind.CONSTANT, 100)) == 0.01
    assert inverse_moment_delta(SampleSizeSpec(SizeKind.UNIFORM, 100)) == pytest.approx(0.0110083, rel=1e-5)


def test_inverse_moment_delta_vs_integral_oracle():
    # E(1/N) for the continuous U(45, 155), by quadrature
    exact, _ = integrate.quad(lambda x: 1.0 / x / 110.0, 45.0, 155.0)
    assert exact == pytest.approx(0.011243, abs=1e-6)
    delta = inverse_moment_delta(SampleSizeSpec(SizeKind.UNIFORM, 100))
    assert delta <= exact
    assert abs(delta - exact) / exact < 0.021


@pytest.mark.parametrize("kind", [SizeKind.UNIFORM, SizeKind.NORMAL])
@pytest.mark.parametrize("n", [40, 100, 1000])
def test_delta_underestimates_exact_inverse_moment(kind, n):
    spec = SampleSizeSpec(kind, n)
    # brute-force oracle over simulated draws
    rng = default_stream(6)
    mc = np.mean(1.0 / draw_sample_sizes(spec, rng, 10**6))
    assert inverse_moment_exact(spec) == pytest.approx(mc, rel=0.003)
    assert inverse_moment_delta(spec) <= inverse_moment_exact(spec)


@pytest.mark.parametrize("kind", KINDS)
def test_pmf_matches_draws(kind):
    spec = SampleSizeSpec(kind, 40)
    k, p = size_pmf(spec)
    assert p.sum() == pytest.approx(1.0)
    rng = default_stream(7)
    x = draw_sample_sizes(spec, rng, 10**6)
    mean, var, _ = exact_size_moments(spec)
    assert x.mean() == pytest.approx(mean, abs=4 * math.sqrt(var / 1e6) + 1e-12)


def test_compound_moments_examples():
    assert compound_bernoulli_moments(0.5, SampleSizeSpec(SizeKind.CONSTANT, 100)) == (50.0, 25.0)
    mean, var = compound_bernoulli_moments(0.1, SampleSizeSpec(SizeKind.NORMAL, 100))
    assert mean == pytest.approx(10.0)
    assert var == pytest.approx(9 + 0.01 * 1008.3333, rel=1e-6)
    with pytest.raises(ValueError):
        compound_bernoulli_moments(1.0, SampleSizeSpec(SizeKind.CONSTANT, 100))


@pytest.mark.parametrize("p", [0.05, 0.1, 0.4, 0.5, 0.9])
def test_compound_constant_smaller_than_uniform(p):
    c = compound_bernoulli_moments(p, SampleSizeSpec(SizeKind.CONSTANT, 100))[1]
    u = compound_bernoulli_moments(p, SampleSizeSpec(SizeKind.UNIFORM, 100))[1]
    assert c == pytest.approx(p * (1 - p) * 100)
    assert c < u


@pytest.mark.slow
@pytest.mark.parametrize("kind", KINDS)
@pytest.mark.parametrize("p", [0.1, 0.4, 0.5])
def test_compound_moments_monte_carlo(kind, p):
    reps = 10**6
    rng = default_stream(8)
    spec = SampleSizeSpec(kind, 100)
    x = rng.binomial(draw_sample_sizes(spec, rng, reps), p).astype(float)
    mean, var = compound_bernoulli_moments(p, spec, exact=True)
    assert abs(x.mean() - mean) <= 3 * math.sqrt(var / reps)
    se_var = math.sqrt((np.mean((x - x.mean()) ** 4) - x.var() ** 2) / reps)
    assert abs(x.var(ddof=1) - var) <= 3 * se_var


@pytest.mark.parametrize("kind", [SizeKind.UNIFORM, SizeKind.NORMAL])
def test_empirical_mean_and_cv(kind):
    spec = SampleSizeSpec(kind, 100)
    rng = default_stream(9)
    x = draw_sample_sizes(spec, rng, 10**6).astype(float)
    mean, var, _ = size_moments(spec)
    assert abs(x.mean() - mean) <= 3 * math.sqrt(var) / 1e3
    cv = x.std() / x.mean()
    if kind is SizeKind.UNIFORM:
        assert cv == pytest.approx(CV, abs=0.01)
    else:
        assert 0.30 <= cv <= 0.32


def test_determinism():
    spec = SampleSizeSpec(SizeKind.NORMAL, 100)
    a = draw_sample_sizes(spec, default_stream(11), 1000)
    b = draw_sample_sizes(spec, default_stream(11), 1000)
    assert np.array_equal(a, b)
