"""Deterministic synthetic test images and the natural-image corpus.

The phantom lives on ``[-1, 1]^2`` (``y`` up, row 0 at ``y = 1``) and is
rasterized by pixel centers; shapes are painted in order, each *setting*
its gray value:

1. head: ellipse centered at 0, semi-axes (0.69, 0.92), value 1.0;
2. interior: center (0, -0.0184), semi-axes (0.6624, 0.874), value 0.5;
3. a 5 x 5 grid of small ellipses at ``x = -0.45 + 0.225 j``,
   ``y = 0.6 - 0.3 i``, semi-axis ``r_j = 0.015 + 0.01125 j`` along x and
   ``r_j`` (even ``i``) or ``1.5 r_j`` (odd ``i``) along y, rotated by
   ``15 i`` degrees, value 1.0 when ``i + j`` is even and 0.0 otherwise;
4. ten one-pixel-wide rods (ellipses with semi-axes 0.55 and ``1/n``)
   centered at ``o_k (cos t_k, sin t_k)`` with ``o_k = -0.54 + 0.12 k``,
   long axis perpendicular to ``t_k = 23 k`` degrees, value 1.0.

The disk grid and rods give the piecewise-constant head enough fine,
high-contrast detail that TV denoising at large noise levels has to trade
structure against noise, as it does on natural images.
"""

from __future__ import annotations

import numpy as np

HEAD = (
    (0.0, 0.0, 0.69, 0.92, 0.0, 1.0),
    (0.0, -0.0184, 0.6624, 0.874, 0.0, 0.5),
)


def _grid_ellipses():
    out = []
    for i in range(5):
        for j in range(5):
            r = 0.015 + 0.01125 * j
            out.append((-0.45 + 0.225 * j, 0.6 - 0.3 * i, r, r * (1.5 if i % 2 else 1.0), 15.0 * i,
                        1.0 if (i + j) % 2 == 0 else 0.0))
    return out


def _rods(n):
    out = []
    for k in range(10):
        t = 23.0 * k
        o = -0.54 + 0.12 * k
        c, s = np.cos(np.deg2rad(t)), np.sin(np.deg2rad(t))
        out.append((o * c, o * s, 1.0 / n, 0.55, t, 1.0))
    return out


def phantom_shapes(n):
    """Ellipse list ``(x0, y0, a, b, angle_deg, value)`` of the ``n x n`` phantom."""
    return list(HEAD) + _grid_ellipses() + _rods(n)


def paint_ellipses(n, shapes, background=0.0):
    c = (np.arange(n) + 0.5) / n * 2.0 - 1.0
    x = c[None, :]
    y = -c[:, None]
    img = np.full((n, n), float(background))
    for x0, y0, a, b, ang, val in shapes:
        t = np.deg2rad(ang)
        xr = (x - x0) * np.cos(t) + (y - y0) * np.sin(t)
        yr = -(x - x0) * np.sin(t) + (y - y0) * np.cos(t)
        img[(xr / a) ** 2 + (yr / b) ** 2 <= 1.0] = val
    return img


def synth_phantom(n=256):
    if n < 32:
        raise ValueError(f"phantom size must be at least 32, got {n}")
    return paint_ellipses(n, phantom_shapes(n))


def checkerboard(n=64, squares=8, low=0.2, high=0.8):
    """``squares x squares`` board of two gray levels."""
    if n < 1 or squares < 1:
        raise ValueError("checkerboard size and square count must be positive")
    idx = (np.arange(n) * squares) // n
    return np.where((idx[:, None] + idx[None, :]) % 2 == 0, low, high).astype(np.float64)


def flat(n=64, value=0.5):
    return np.full((n, n), float(value))


def cameraman(n=256):
    """The standard cameraman image from scikit-image, decimated to ``n x n``.

    Raises ``LookupError`` when scikit-image is not installed.
    """
    try:
        from skimage import data
    except ImportError as exc:
        raise LookupError("the cameraman image needs scikit-image") from exc
    img = data.camera().astype(np.float64) / 255.0
    f = img.shape[0] // n
    if f < 1 or img.shape[0] % n:
        raise ValueError(f"cameraman can be reduced only to divisors of {img.shape[0]}, got {n}")
    return np.ascontiguousarray(img[::f, ::f])


SYNTHETIC = {"phantom": synth_phantom, "checkerboard": checkerboard, "flat": flat, "cameraman": cameraman}


def named_image(name, n=256):
    if name not in SYNTHETIC:
        raise KeyError(f"unknown image name {name!r}; choose from {sorted(SYNTHETIC)}")
    return SYNTHETIC[name](n)
