"""Discrete image calculus on N1 x N2 grids.

Images are plain 2-D ``float64`` arrays. Vector fields are arrays of shape
``(2, N1, N2)`` whose channel 0 holds the horizontal (column) differences and
channel 1 the vertical (row) differences.
"""

from __future__ import annotations

import numpy as np

from . import _backend


def as_image(u, name="u"):
    """Return ``u`` as a C-contiguous 2-D float64 array, checking finiteness."""
    arr = np.ascontiguousarray(u, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def as_weight(alpha, shape):
    """Validate a regularization weight.

    A scalar stays a float; an array must match ``shape`` and be strictly
    positive everywhere.
    """
    if np.ndim(alpha) == 0:
        a = float(alpha)
        if not a > 0 or not np.isfinite(a):
            raise ValueError(f"scalar weight must be positive and finite, got {a}")
        return a
    arr = np.ascontiguousarray(alpha, dtype=np.float64)
    if arr.shape != tuple(shape):
        raise ValueError(f"weight shape {arr.shape} does not match image shape {tuple(shape)}")
    if not np.all(np.isfinite(arr)) or not np.all(arr > 0):
        raise ValueError("weight field must be finite and strictly positive")
    return arr


def weight_field(alpha, shape):
    """Broadcast a scalar or field weight to a full array."""
    a = as_weight(alpha, shape)
    if isinstance(a, float):
        return np.full(shape, a)
    return a


def gradient(u):
    """Forward differences with homogeneous Neumann boundary."""
    u = np.asarray(u, dtype=np.float64)
    return _backend.kernels.gradient(np.ascontiguousarray(u))


def divergence(p):
    """Backward-difference divergence, the negative adjoint of :func:`gradient`."""
    p = np.ascontiguousarray(p, dtype=np.float64)
    if p.ndim != 3 or p.shape[0] != 2:
        raise ValueError(f"vector field must have shape (2, N1, N2), got {p.shape}")
    return _backend.kernels.divergence(p)


def pointwise_norm(p):
    """Euclidean norm of a vector field at every pixel."""
    return np.sqrt(p[0] ** 2 + p[1] ** 2)


def tv_weighted(u, alpha=1.0):
    """Weighted isotropic total variation ``sum_x alpha(x) |grad u(x)|``."""
    u = np.asarray(u, dtype=np.float64)
    a = as_weight(alpha, u.shape)
    mag = pointwise_norm(gradient(u))
    if isinstance(a, float):
        return a * float(np.sum(mag))
    return float(np.sum(a * mag))


def fidelity(u, g, T=None, tau=2):
    """Data term ``(1/tau) * sum |T u - g|^tau`` for ``tau`` in {1, 2}."""
    r = residual(u, g, T)
    return fidelity_from_residual(r, tau)


def fidelity_from_residual(r, tau):
    check_tau(tau)
    if tau == 2:
        return 0.5 * float(np.sum(r * r))
    return float(np.sum(np.abs(r)))


def residual(u, g, T=None):
    """``T u - g`` with shape checking."""
    u = np.asarray(u, dtype=np.float64)
    g = np.asarray(g, dtype=np.float64)
    if u.shape != g.shape:
        raise ValueError(f"shape mismatch: u {u.shape} vs g {g.shape}")
    Tu = u if T is None else T.apply(u)
    return Tu - g


def energy(u, g, T=None, tau=2, alpha=1.0):
    """Objective ``H_tau(u) + R_alpha(u)``."""
    return fidelity(u, g, T, tau) + tv_weighted(u, alpha)


def mean_value(u):
    return float(np.mean(u))


def inner(a, b):
    """Euclidean inner product accumulated in index order."""
    return float(np.dot(np.ravel(a), np.ravel(b)))


def check_tau(tau):
    if tau not in (1, 2):
        raise ValueError(f"fidelity exponent must be 1 or 2, got {tau!r}")
