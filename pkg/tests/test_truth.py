import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from renkf.errors import InvalidNoise, TruthGenerationFailure
from renkf.models.vdp import VanDerPol
from renkf.truth import (BiasSpec, NoiseSpec, add_colored_noise, add_gaussian_noise,
                         colored_noise, generate_truth, snr_db)


def _sine(n=4096, amp=2.0):
    t = np.arange(n) * 1e-3
    return amp * np.sin(2 * np.pi * 7.0 * t)[:, None]


def test_bias_forms():
    q = np.array([[0.5, -1.0]])
    t = np.array([0.25])
    np.testing.assert_allclose(BiasSpec("none").evaluate(t, q), 0.0)
    np.testing.assert_allclose(BiasSpec("vdp_cosine").evaluate(t, q), np.cos(q))
    np.testing.assert_allclose(BiasSpec("linear").evaluate(t, q, 2.0), 0.3 * q + 0.2)
    np.testing.assert_allclose(BiasSpec("nonlinear_periodic").evaluate(t, q, 2.0),
                               0.4 * np.cos(q))
    np.testing.assert_allclose(BiasSpec("time_dependent").evaluate(t, q),
                               0.4 * q * np.sin(2 * np.pi * 0.25) ** 2)


def test_bias_needs_reference_amplitude():
    with pytest.raises(ValueError):
        BiasSpec("linear").evaluate([0.0], [[1.0]])
    with pytest.raises(ValueError):
        BiasSpec("quadratic")


def test_truth_series():
    model = VanDerPol()
    tr = generate_truth(model, (55.0, 75.0, 3.4), BiasSpec("vdp_cosine"), 0.05, 1e-4,
                        t_spinup=0.2)
    assert tr.t.shape == (501,) and tr.phi.shape == (501, 2)
    np.testing.assert_allclose(tr.d, tr.observables + np.cos(tr.observables))
    assert tr.index(0.0123) == 123
    with pytest.raises(IndexError):
        tr.index(1.0)
    again = generate_truth(model, (55.0, 75.0, 3.4), BiasSpec("vdp_cosine"), 0.05, 1e-4,
                           t_spinup=0.2)
    np.testing.assert_array_equal(tr.d, again.d)


def test_truth_failure_is_wrapped():
    with pytest.raises(TruthGenerationFailure):
        generate_truth(VanDerPol(), (55.0, 75.0, 3.4), BiasSpec(), 0.01, 1e-4,
                       phi0=np.array([np.nan, 0.0]))


def test_gaussian_noise_scale():
    d = _sine(20000)
    noisy = add_gaussian_noise(d, 0.1, seed=3)
    np.testing.assert_allclose((noisy - d).std(), 0.1 * np.mean(np.abs(d)), rtol=0.02)
    np.testing.assert_array_equal(noisy, add_gaussian_noise(d, 0.1, seed=3))
    with pytest.raises(InvalidNoise):
        add_gaussian_noise(d, -0.1, 0)


@pytest.mark.parametrize("color", ["white", "pink", "brown"])
def test_colored_noise_unit_variance(color):
    x = colored_noise(1000, color, np.random.default_rng(0))
    assert abs(x.mean()) < 1e-12 and abs(x.std() - 1) < 1e-12


def test_colored_noise_spectral_slope():
    rng = np.random.default_rng(0)
    slopes = {}
    for color in ("white", "pink", "brown"):
        x = colored_noise(2**14, color, rng)
        f = np.fft.rfftfreq(x.size)[1:]
        p = np.abs(np.fft.rfft(x))[1:] ** 2
        slopes[color] = np.polyfit(np.log(f), np.log(p), 1)[0]
    assert abs(slopes["white"]) < 0.1
    assert abs(slopes["pink"] + 1) < 0.1
    assert abs(slopes["brown"] + 2) < 0.1


@settings(max_examples=20, deadline=None)
@given(factor=st.floats(0.01, 1.0), seed=st.integers(0, 10**6))
def test_colours_carry_equal_energy(factor, seed):
    d = _sine(1000)
    energies = [np.sum((add_colored_noise(d, c, factor, seed) - d) ** 2)
                for c in ("white", "pink", "brown")]
    np.testing.assert_allclose(energies, energies[0], rtol=1e-10)


@pytest.mark.parametrize("factor", [0.1, 0.25, 0.5])
def test_snr_of_sinusoid_is_analytic(factor):
    # mean|d| = 2A/pi and <d^2> = A^2/2, so SNR = 10 log10(pi^2 / (8 f^2))
    d = _sine()
    noisy = add_colored_noise(d, "pink", factor, seed=1)
    mean_abs = np.mean(np.abs(d))
    want = 10 * np.log10(np.mean(d**2) / (factor * mean_abs) ** 2)
    assert snr_db(d, noisy) == pytest.approx(want, abs=1e-9)
    assert want == pytest.approx(10 * np.log10(np.pi**2 / (8 * factor**2)), abs=0.02)


def test_snr_twenty_db():
    d = _sine()
    factor = np.sqrt(np.mean(d**2)) / np.mean(np.abs(d)) / 10.0
    assert snr_db(d, add_colored_noise(d, "white", factor, 0)) == pytest.approx(20.0, abs=1e-9)


def test_snr_without_noise_is_infinite():
    d = _sine(64)
    assert snr_db(d, d) == np.inf
    np.testing.assert_array_equal(add_colored_noise(d, "brown", 0.0, 0), d)


def test_noise_spec_dispatch():
    d = _sine(256)
    np.testing.assert_array_equal(NoiseSpec("gaussian_white", 0.1, 4).apply(d),
                                  add_gaussian_noise(d, 0.1, 4))
    np.testing.assert_array_equal(NoiseSpec("pink", 0.1, 4).apply(d),
                                  add_colored_noise(d, "pink", 0.1, 4))
    with pytest.raises(ValueError):
        NoiseSpec("blue")
    with pytest.raises(InvalidNoise):
        NoiseSpec("white", -1.0)
