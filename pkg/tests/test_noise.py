import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from tvselect.noise import NoiseSpec, box_mask, degrade, make_nu_field, make_target, nu_estimate
from tvselect.operators import GaussianBlur


def test_tau_matches_noise_kind():
    assert NoiseSpec("gaussian", sigma=0.1).tau == 2
    assert NoiseSpec("salt_pepper", r1=0.1, r2=0.1).tau == 1
    assert NoiseSpec("random_valued", r=0.1).tau == 1


@pytest.mark.parametrize("kw", [
    {"kind": "gaussian", "sigma": 0.0},
    {"kind": "salt_pepper", "r1": 0.6, "r2": 0.5},
    {"kind": "salt_pepper", "r1": -0.1},
    {"kind": "random_valued", "r": 1.0},
    {"kind": "poisson"},
])
def test_invalid_specs(kw):
    with pytest.raises(ValueError):
        NoiseSpec(**kw)


def test_degrade_is_deterministic():
    u = np.full((32, 32), 0.5)
    s = NoiseSpec("gaussian", sigma=0.1, seed=7)
    assert np.array_equal(degrade(u, s), degrade(u, s))
    assert not np.array_equal(degrade(u, s), degrade(u, NoiseSpec("gaussian", sigma=0.1, seed=8)))


def test_gaussian_noise_statistics():
    u = np.zeros((256, 256))
    g = degrade(u, NoiseSpec("gaussian", sigma=0.1, seed=0))
    assert g.std() == pytest.approx(0.1, rel=0.02)
    assert abs(g.mean()) < 3e-3


def test_salt_and_pepper_fractions():
    u = np.full((200, 200), 0.5)
    g = degrade(u, NoiseSpec("salt_pepper", r1=0.1, r2=0.2, seed=0))
    assert np.mean(g == 0.0) == pytest.approx(0.1, abs=0.01)
    assert np.mean(g == 1.0) == pytest.approx(0.2, abs=0.01)
    assert np.mean(g == 0.5) == pytest.approx(0.7, abs=0.01)


def test_random_valued_fraction():
    u = np.full((200, 200), 0.5)
    g = degrade(u, NoiseSpec("random_valued", r=0.3, seed=0))
    assert np.mean(g != 0.5) == pytest.approx(0.3, abs=0.01)
    assert g.min() >= 0 and g.max() <= 1


def test_degrade_applies_operator_first():
    u = np.zeros((16, 16))
    u[8, 8] = 1.0
    T = GaussianBlur(5, 1.0)
    g = degrade(u, NoiseSpec("salt_pepper", r1=0.0, r2=0.0), T)
    assert np.allclose(g, T.apply(u))


def test_gaussian_target():
    t = nu_estimate(np.zeros((10, 10)), NoiseSpec("gaussian", sigma=0.1))
    assert np.allclose(t.nu, 0.01)
    assert t.B == pytest.approx(100 * 0.01 / 2)


def test_salt_pepper_target_equal_rates_is_reference_free():
    s = NoiseSpec("salt_pepper", r1=0.1, r2=0.1)
    assert s.reference_free
    a = nu_estimate(np.zeros((8, 8)), s)
    b = nu_estimate(np.ones((8, 8)), s)
    assert np.allclose(a.nu, 0.1) and np.allclose(b.nu, 0.1)
    assert a.B == pytest.approx(6.4)


@given(st.floats(0.0, 1.0), st.floats(0.0, 0.45), st.floats(0.0, 0.45))
def test_salt_pepper_nu_is_expected_absolute_deviation(v, r1, r2):
    s = NoiseSpec("salt_pepper", r1=r1, r2=r2)
    nu = nu_estimate(np.full((2, 2), v), s).nu[0, 0]
    assert nu == pytest.approx(r1 * v + r2 * (1 - v), abs=1e-12)


@given(st.floats(0.0, 1.0), st.floats(0.0, 0.9))
def test_random_valued_nu_is_expected_absolute_deviation(v, r):
    nu = nu_estimate(np.full((2, 2), v), NoiseSpec("random_valued", r=r)).nu[0, 0]
    # E|v - U| for U uniform on [0, 1]
    assert nu == pytest.approx(r * (v * v / 2 + (1 - v) ** 2 / 2), abs=1e-12)


def test_nu_field_homogeneous():
    f = make_nu_field(NoiseSpec("gaussian", sigma=0.1), (4, 5))
    assert f.shape == (4, 5) and np.allclose(f, 0.01)


def test_nu_field_two_regions():
    shape = (20, 20)
    mask = box_mask(shape, (5, 15, 5, 15))
    s = NoiseSpec("gaussian", sigma=0.05, regions=[(mask, np.sqrt(0.015))])
    f = make_nu_field(s, shape)
    assert set(np.round(np.unique(f), 12)) == {0.0025, 0.015}
    assert make_target(f, 2).B == pytest.approx((100 * 0.015 + 300 * 0.0025) / 2)


def test_nu_field_empty_mask_is_homogeneous():
    s = NoiseSpec("gaussian", sigma=0.05, regions=[(np.zeros((6, 6), bool), 0.5)])
    assert np.allclose(make_nu_field(s, (6, 6)), 0.0025)


def test_overlapping_regions_rejected():
    shape = (10, 10)
    s = NoiseSpec("gaussian", sigma=0.1, regions=[(box_mask(shape, (0, 5, 0, 5)), 0.2),
                                                  (box_mask(shape, (4, 8, 4, 8)), 0.3)])
    with pytest.raises(ValueError, match="overlap"):
        s.sigma_field(shape)


def test_region_dict_round_trip():
    shape = (12, 12)
    s = NoiseSpec("gaussian", sigma=0.05, seed=3, regions=[(box_mask(shape, (2, 6, 3, 9)), 0.1)])
    d = s.to_dict()
    assert d["regions"] == [{"box": [2, 6, 3, 9], "sigma": 0.1}]
    back = NoiseSpec.from_dict(d, shape)
    assert np.array_equal(back.sigma_field(shape), s.sigma_field(shape))
    assert back.seed == 3


def test_region_degradation_variance():
    shape = (200, 200)
    mask = box_mask(shape, (0, 100, 0, 200))
    g = degrade(np.zeros(shape), NoiseSpec("gaussian", sigma=0.05, regions=[(mask, 0.15)], seed=1))
    assert g[mask].std() == pytest.approx(0.15, rel=0.03)
    assert g[~mask].std() == pytest.approx(0.05, rel=0.03)
