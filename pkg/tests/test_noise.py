import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bpstereo.noise import NoiseSpec, invert_noise_level, noise_ball_probability

# frozen from scipy.stats (chi distribution / normal quantile)
Z975 = 1.959963984540054
CHI3_AT_1 = 0.19874804309879915
CHI_PPF95 = {1: 1.9599639845400538, 3: 2.7954834829151074, 5: 3.327235743604043, 8: 3.9379325865059513, 16: 5.127984750841624}


def test_m2_median():
    assert noise_ball_probability(math.sqrt(2 * math.log(2)), 1.0, 2) == pytest.approx(0.5, abs=1e-15)


def test_m1_two_sided_normal():
    assert noise_ball_probability(Z975, 1.0, 1) == pytest.approx(0.95, abs=1e-12)


def test_m3_hand_value():
    hand = math.erf(1 / math.sqrt(2)) - math.sqrt(2 / math.pi) * math.exp(-0.5)
    assert noise_ball_probability(1.0, 1.0, 3) == pytest.approx(hand, abs=1e-15)
    assert hand == pytest.approx(CHI3_AT_1, abs=1e-15)


def test_m3_monte_carlo():
    rng = np.random.default_rng(2)
    eps = rng.standard_normal((10**6, 3))
    mc = np.mean(np.linalg.norm(eps, axis=1) <= 1.0)
    assert abs(mc - noise_ball_probability(1.0, 1.0, 3)) < 1e-3


@pytest.mark.parametrize("m", sorted(CHI_PPF95))
def test_inversion_matches_quantile(m):
    assert invert_noise_level(0.95, 1.0, m) == pytest.approx(CHI_PPF95[m], rel=1e-11)


def test_m2_closed_form_inversion():
    assert invert_noise_level(0.95, 1.0, 2) == pytest.approx(math.sqrt(-2 * math.log(0.05)), abs=1e-12)


def test_large_argument_stays_finite():
    assert noise_ball_probability(60.0, 1.0, 40) == 1.0
    assert noise_ball_probability(1e-3, 1.0, 40) == 0.0
    assert 0 < noise_ball_probability(40.0, 1.0, 1600) < 1


@given(st.floats(0.0, 20.0), st.floats(0.05, 5.0), st.integers(1, 30))
def test_probability_in_unit_interval(delta, sigma, m):
    assert 0.0 <= noise_ball_probability(delta, sigma, m) <= 1.0


@given(st.floats(0.01, 0.99), st.floats(0.1, 3.0), st.integers(1, 20))
def test_round_trip(gamma, sigma, m):
    d = invert_noise_level(gamma, sigma, m)
    assert noise_ball_probability(d, sigma, m) == pytest.approx(gamma, abs=1e-9)


@given(st.integers(1, 12), st.floats(0.1, 5.0), st.floats(0.1, 5.0))
def test_monotone_in_delta(m, d1, d2):
    lo, hi = sorted((d1, d2))
    assert noise_ball_probability(lo, 1.0, m) <= noise_ball_probability(hi, 1.0, m) + 1e-15


@given(st.floats(0.1, 4.0), st.floats(0.1, 4.0), st.integers(1, 10))
def test_scale_invariance(delta, sigma, m):
    assert noise_ball_probability(delta * sigma, sigma, m) == pytest.approx(noise_ball_probability(delta, 1.0, m), abs=1e-13)


def test_delta_scales_with_sigma():
    assert invert_noise_level(0.95, 0.01, 5) == pytest.approx(0.01 * invert_noise_level(0.95, 1.0, 5), rel=1e-12)


@pytest.mark.parametrize("args", [(-1.0, 1.0, 2), (1.0, 0.0, 2), (1.0, 1.0, 0)])
def test_probability_validation(args):
    with pytest.raises(ValueError):
        noise_ball_probability(*args)


@pytest.mark.parametrize("gamma", [0.0, 1.0, 1.5])
def test_inversion_validation(gamma):
    with pytest.raises(ValueError, match="confidence"):
        invert_noise_level(gamma, 1.0, 3)


def test_noise_spec():
    spec = NoiseSpec(sigma=0.005, m=5)
    assert noise_ball_probability(spec.delta, 0.005, 5) >= 0.95 - 1e-12
    with pytest.raises(ValueError):
        NoiseSpec(sigma=-1)


def test_matches_chi_cdf_grid():
    stats = pytest.importorskip("scipy.stats")
    for m in range(1, 25):
        for z in (0.05, 0.3, 1.0, 2.5, 4.0, 7.0, 12.0):
            assert noise_ball_probability(z, 1.0, m) == pytest.approx(stats.chi.cdf(z, m), abs=1e-12)
