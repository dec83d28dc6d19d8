import numpy as np
import pytest

from tvselect.grid import tv_weighted
from tvselect.phantoms import SYNTHETIC, checkerboard, flat, named_image, synth_phantom


@pytest.mark.parametrize("n", [32, 64, 128])
def test_phantom_range_determinism_and_tv(n):
    a = synth_phantom(n)
    assert a.shape == (n, n)
    assert a.min() >= 0.0 and a.max() <= 1.0
    assert np.array_equal(a, synth_phantom(n))
    assert tv_weighted(a) > 0


def test_phantom_is_piecewise_constant():
    vals = np.unique(synth_phantom(128))
    assert set(vals) <= {0.0, 0.5, 1.0}


def test_phantom_minimum_size():
    with pytest.raises(ValueError):
        synth_phantom(16)


def test_checkerboard_and_flat():
    c = checkerboard(16, squares=4, low=0.2, high=0.8)
    assert c[0, 0] == 0.2 and c[0, 4] == 0.8 and c[4, 4] == 0.2
    assert np.all(flat(8, 0.3) == 0.3)


def test_named_image():
    assert np.array_equal(named_image("flat", 8), flat(8))
    with pytest.raises(KeyError):
        named_image("lena")
    assert {"phantom", "checkerboard", "flat"} <= set(SYNTHETIC)


def test_cameraman_size():
    pytest.importorskip("skimage")
    c = named_image("cameraman", 256)
    assert c.shape == (256, 256) and 0 <= c.min() and c.max() <= 1
