import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from durlab.data import DatedSeries, Panel, month_ends
from durlab.errors import DegeneracyError, ValidationError
from durlab.presets import default_params
from durlab.simulate import simulate
from durlab.spectral import cross_spectrum, pca, residualize, spectral_density


def ar1(rng, n, rho):
    e = rng.standard_normal(n)
    from scipy.signal import lfilter
    return lfilter([1.0], [1.0, -rho], e)


@given(st.integers(0, 2**31), st.integers(64, 600))
def test_parseval(seed, n):
    x = ar1(np.random.default_rng(seed), n, 0.7)
    est = spectral_density(x)
    assert est.integral() == pytest.approx(np.var(x), rel=1e-10)
    assert np.all(est.density >= 0)
    assert np.all((est.frequencies > 0) & (est.frequencies <= math.pi))


def test_white_noise_is_flat():
    x = np.random.default_rng(0).standard_normal(100_000)
    # span ~ 3 sqrt(n): the default span leaves sampling noise near a 1.5 ratio
    d = spectral_density(x, bandwidth=1001).density
    interior = d[len(d) // 20: -len(d) // 20]
    assert interior.max() / interior.min() < 1.5


def test_ar1_low_high_ratio():
    x = ar1(np.random.default_rng(1), 100_000, 0.9)
    d = spectral_density(x).density
    assert d[0] / d[-1] == pytest.approx((1.9 / 0.1) ** 2, rel=0.2)


def test_bandwidth_validation():
    x = np.random.default_rng(0).standard_normal(100)
    with pytest.raises(ValidationError):
        spectral_density(x, bandwidth=50)
    with pytest.raises(ValidationError):
        spectral_density(x[:20])


def test_cycle_length():
    est = spectral_density(np.random.default_rng(0).standard_normal(64))
    assert est.cycle_length[-1] == pytest.approx(2.0)


def test_cross_spectrum_self_and_sign():
    x = ar1(np.random.default_rng(2), 500, 0.5)
    s = spectral_density(x, 11)
    c = cross_spectrum(x, x, 11)
    np.testing.assert_allclose(c.density.real, s.density, rtol=1e-12)
    np.testing.assert_allclose(cross_spectrum(x, -x, 11).density.real, -s.density, rtol=1e-12)


def test_cross_spectrum_integral_is_covariance():
    rng = np.random.default_rng(3)
    x = ar1(rng, 2000, 0.6)
    y = 0.5 * x + rng.standard_normal(2000)
    c = cross_spectrum(x, y)
    cov = np.mean((x - x.mean()) * (y - y.mean()))
    assert c.integral() == pytest.approx(cov, rel=0.02)


def test_independent_cospectrum_near_zero():
    vals = []
    for s in range(200):
        rng = np.random.default_rng(100 + s)
        vals.append(cross_spectrum(rng.standard_normal(256), rng.standard_normal(256)).integral())
    vals = np.array(vals)
    # one realized integral against the spread across replications
    one = cross_spectrum(*np.random.default_rng(7).standard_normal((2, 256))).integral()
    assert abs(one) < 3 * vals.std()
    assert abs(vals.mean()) < 3 * vals.std() / math.sqrt(len(vals))


def test_cross_spectrum_alignment():
    a = DatedSeries(month_ends("2000-01", 40), np.arange(40.0))
    b = DatedSeries(month_ends("2000-02", 40), np.arange(40.0))
    with pytest.raises(ValidationError):
        cross_spectrum(a, b)


def test_residualize():
    rng = np.random.default_rng(4)
    b = rng.standard_normal(100)
    a = 2 * b + rng.standard_normal(100)
    r = residualize(a, b)
    assert abs(r @ b) < 1e-10
    np.testing.assert_allclose(residualize(b, b), 0, atol=1e-13)
    c = np.array([1.0, -1.0, 1.0, -1.0])
    d = np.array([1.0, 1.0, -1.0, -1.0])
    np.testing.assert_allclose(residualize(c + 3, d), c, atol=1e-14)
    with pytest.raises(DegeneracyError):
        residualize(a, np.ones(100))


def test_pca_invariants():
    rng = np.random.default_rng(5)
    M = rng.standard_normal((200, 4)) @ rng.standard_normal((4, 4))
    ratios, L = pca(M)
    assert ratios.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.all(np.diff(ratios) <= 0)
    np.testing.assert_allclose(L.T @ L, np.eye(4), atol=1e-10)
    for j in range(4):
        assert L[np.argmax(np.abs(L[:, j])), j] > 0


def test_pca_perfect_correlation():
    x = np.arange(10.0)
    ratios, _ = pca(np.column_stack([x, 3 * x + 1]))
    assert ratios[0] == pytest.approx(1.0)


def test_pca_isotropic_noise():
    ratios, _ = pca(np.random.default_rng(6).standard_normal((100_000, 5)))
    np.testing.assert_allclose(ratios, 0.2, atol=0.01)


def test_pca_two_factor_model(params_persistent):
    path = simulate(params_persistent, None, 2000, seed=3)
    M = np.column_stack([path.dr, path.pd, path.s05, path.s1, path.s1plus])
    ratios, _ = pca(M)
    assert ratios[:2].sum() > 0.999


def test_pca_constant_column():
    with pytest.raises(ValidationError, match="constant"):
        pca(np.column_stack([np.ones(10), np.arange(10.0)]))
    with pytest.raises(ValidationError):
        pca(np.arange(10.0)[:, None])


def test_pca_csv(tmp_path):
    p = Panel(month_ends("2000-01", 20), {"a": np.arange(20.0), "b": np.sin(np.arange(20.0))})
    res = pca(p)
    res.to_csv(tmp_path / "r.csv", tmp_path / "l.csv")
    assert (tmp_path / "l.csv").read_text().splitlines()[0] == "variable,loading1,loading2"
