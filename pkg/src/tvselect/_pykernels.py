"""Pure NumPy kernels, used when the compiled extension is unavailable.

Every function here has a twin with the same signature in ``_ckernels.pyx``.
"""

import numpy as np


def gradient(u):
    n1, n2 = u.shape
    p = np.zeros((2, n1, n2))
    p[0, :, :-1] = u[:, 1:] - u[:, :-1]
    p[1, :-1, :] = u[1:, :] - u[:-1, :]
    return p


def divergence(p):
    px, py = p[0], p[1]
    n1, n2 = px.shape
    d = np.zeros((n1, n2))
    if n2 > 1:
        d[:, 0] = px[:, 0]
        d[:, 1:-1] = px[:, 1:-1] - px[:, :-2]
        d[:, -1] = -px[:, -2]
    if n1 > 1:
        d[0, :] += py[0, :]
        d[1:-1, :] += py[1:-1, :] - py[:-2, :]
        d[-1, :] -= py[-2, :]
    return d


def cp_denoise(g, alpha, u, ubar, p, tau, sigma, theta, max_iter, tol):
    """Chambolle-Pock iterations for ``0.5||u - g||^2 + sum alpha |grad u|``.

    ``alpha`` is a full array. ``u``, the extrapolated point ``ubar`` and the
    dual field ``p`` are updated in place and used as the starting point.
    Returns ``(iterations, final_relative_change)``.
    """
    rel = np.inf
    it = 0
    inv_alpha = 1.0 / alpha
    for it in range(1, max_iter + 1):
        q = p + sigma * gradient(ubar)
        scale = np.maximum(np.sqrt(q[0] ** 2 + q[1] ** 2) * inv_alpha, 1.0)
        p[0] = q[0] / scale
        p[1] = q[1] / scale
        u_old = u.copy()
        u[:] = (u_old + tau * divergence(p) + tau * g) / (1.0 + tau)
        diff = u - u_old
        ubar[:] = u + theta * diff
        nu = np.sqrt(np.sum(u * u))
        rel = np.sqrt(np.sum(diff * diff)) / max(nu, 1e-300)
        if rel < tol:
            break
    return it, rel


def l1tv_denoise(g, alpha, gamma, u, p, tau, sigma, theta, max_outer, tol, inner_max, inner_tol):
    """Alternate ``v = ST(u - g, gamma)`` with Chambolle-Pock on ``g + v``.

    ``alpha`` is the already scaled weight ``gamma * alpha``. ``u`` and ``p``
    are updated in place. Returns ``(outer, inner, relative_change, v)``.
    """
    rel = np.inf
    inner = 0
    it = 0
    v = np.zeros_like(g)
    for it in range(1, max_outer + 1):
        r = u - g
        v = np.sign(r) * np.maximum(np.abs(r) - gamma, 0.0)
        prev = u.copy()
        ubar = u.copy()
        k, _ = cp_denoise(g + v, alpha, u, ubar, p, tau, sigma, theta, inner_max, inner_tol)
        inner += k
        rel = np.sqrt(np.sum((u - prev) ** 2)) / max(np.sqrt(np.sum(u * u)), 1e-300)
        if rel < tol:
            break
    return it, inner, rel, v


def box_sum(a, half):
    """Sum over the clipped ``(2*half+1)``-square window around every pixel."""
    n1, n2 = a.shape
    s = np.zeros((n1 + 1, n2 + 1))
    s[1:, 1:] = np.cumsum(np.cumsum(a, axis=0), axis=1)
    i = np.arange(n1)
    j = np.arange(n2)
    i0 = np.clip(i - half, 0, n1)
    i1 = np.clip(i + half + 1, 0, n1)
    j0 = np.clip(j - half, 0, n2)
    j1 = np.clip(j + half + 1, 0, n2)
    return s[i1][:, j1] - s[i0][:, j1] - s[i1][:, j0] + s[i0][:, j0]
