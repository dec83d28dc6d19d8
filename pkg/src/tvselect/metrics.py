"""Image-quality measures on [0, 1] images."""

import numpy as np
from scipy.ndimage import gaussian_filter

PSNR_CAP = 999.0


def _pair(u, ref):
    u = np.asarray(u, dtype=np.float64)
    ref = np.asarray(ref, dtype=np.float64)
    if u.shape != ref.shape:
        raise ValueError(f"shape mismatch: {u.shape} vs {ref.shape}")
    return np.clip(u, 0.0, 1.0), np.clip(ref, 0.0, 1.0)


def psnr(u, ref):
    """Peak signal-to-noise ratio in dB for peak value 1; identical images give 999."""
    u, ref = _pair(u, ref)
    mse = float(np.mean((u - ref) ** 2))
    if mse == 0.0:
        return PSNR_CAP
    return min(10.0 * np.log10(1.0 / mse), PSNR_CAP)


def mae(u, ref):
    """Mean absolute error per pixel."""
    u, ref = _pair(u, ref)
    return float(np.mean(np.abs(u - ref)))


def mssim(u, ref, k1=0.01, k2=0.03, sigma=1.5, win=11):
    """Mean structural similarity with an 11x11 Gaussian window (std 1.5).

    Local statistics use the truncated Gaussian window; only windows fully
    inside the image are averaged.
    """
    u, ref = _pair(u, ref)
    if min(u.shape) < win:
        raise ValueError(f"image {u.shape} is smaller than the {win}x{win} SSIM window")
    c1 = (k1 * 1.0) ** 2
    c2 = (k2 * 1.0) ** 2
    trunc = (win // 2) / sigma

    def filt(a):
        return gaussian_filter(a, sigma, truncate=trunc, mode="reflect")

    mu_x, mu_y = filt(u), filt(ref)
    sxx = filt(u * u) - mu_x**2
    syy = filt(ref * ref) - mu_y**2
    sxy = filt(u * ref) - mu_x * mu_y
    num = (2 * mu_x * mu_y + c1) * (2 * sxy + c2)
    den = (mu_x**2 + mu_y**2 + c1) * (sxx + syy + c2)
    s = num / den
    r = win // 2
    return float(np.mean(s[r:-r, r:-r]))
