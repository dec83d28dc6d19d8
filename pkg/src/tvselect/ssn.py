"""Semi-smooth Newton solver for Huber-regularized L1-TV with a weight field.

The unknowns are the image ``u``, the fidelity variable ``v`` and the dual
field ``q``. At a solution

    F1 = Tu - g - m_beta v                                   = 0
    F2 = -grad^T q + kappa lap u - c (T^T(Tu - g)) - c' T^T v = 0
    F3 = -alpha grad u + m_gamma q                           = 0

with ``m_beta = max(beta, |Tu - g|)``, ``m_gamma = max(gamma alpha, |grad u|)``,
``c = 1/(beta + mu)`` and ``c' = mu/(beta + mu)``. Each Newton step eliminates
``dv`` and ``dq`` (their diagonal blocks are invertible) and solves a sparse
``N x N`` system for ``du``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .grid import as_image, pointwise_norm, weight_field
from .operators import Identity
from .solvers import ConfigError, NumericalError, SolveReport


@dataclass(frozen=True)
class SsnConfig:
    huber_beta: float = 1e-3
    huber_gamma: float = 1e-2
    mu: float = 1e6
    kappa: float = 0.0
    eps0: float = 1e-2
    eps_decay: float = 0.1
    eps_floor: float = 1e-12
    newton_tolerance: float = 1e-8
    max_newton_steps: int = 60
    linear_solver: str = "direct"
    krylov_tol: float = 1e-10
    definiteness_probes: int = 2

    def __post_init__(self):
        for name in ("huber_beta", "huber_gamma", "mu", "eps0", "newton_tolerance"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if self.kappa < 0:
            raise ConfigError("kappa must be nonnegative")
        if not 0 < self.eps_decay < 1:
            raise ConfigError("eps_decay must lie in (0, 1)")
        if self.linear_solver not in ("direct", "krylov"):
            raise ConfigError(f"unknown linear solver {self.linear_solver!r}")
        if self.max_newton_steps < 1:
            raise ConfigError("max_newton_steps must be positive")

    def epsilon(self, k):
        """Regularization added to the reduced matrix at step ``k``."""
        return max(self.eps0 * self.eps_decay**k, self.eps_floor)


@dataclass
class SsnState:
    u: np.ndarray
    v: np.ndarray
    q: np.ndarray

    def copy(self):
        return SsnState(self.u.copy(), self.v.copy(), self.q.copy())


def _diff_matrix(n):
    if n == 1:
        return sp.csr_matrix((1, 1))
    d = sp.diags([-np.ones(n), np.ones(n - 1)], [0, 1], shape=(n, n), format="lil")
    d[n - 1, n - 1] = 0.0
    return d.tocsr()


def gradient_matrix(shape):
    """Sparse ``2N x N`` matrix of the forward-difference gradient (x block first)."""
    n1, n2 = shape
    gx = sp.kron(sp.identity(n1), _diff_matrix(n2))
    gy = sp.kron(_diff_matrix(n1), sp.identity(n2))
    return sp.vstack([gx, gy]).tocsr()


class _Problem:
    """Cached matrices for one ``(T, g, alpha)`` instance."""

    def __init__(self, T, g, alpha, cfg):
        self.T = T
        self.g = g
        self.shape = g.shape
        self.alpha = weight_field(alpha, g.shape)
        self.cfg = cfg
        self.c = 1.0 / (cfg.huber_beta + cfg.mu)
        self.c2 = cfg.mu / (cfg.mu + cfg.huber_beta)
        self.G = gradient_matrix(g.shape)
        self.Ts = T.to_sparse(g.shape)
        self.TtT = (self.Ts.T @ self.Ts).tocsr()
        self.lap = -(self.G.T @ self.G).tocsr()
        self.a2 = np.concatenate([self.alpha.ravel(), self.alpha.ravel()])

    def pieces(self, s):
        u = s.u.ravel()
        r = self.Ts @ u - self.g.ravel()
        gu = self.G @ u
        n = u.size
        gnorm = np.sqrt(gu[:n] ** 2 + gu[n:] ** 2)
        m_beta = np.maximum(self.cfg.huber_beta, np.abs(r))
        m_gamma = np.tile(np.maximum(self.cfg.huber_gamma * self.alpha.ravel(), gnorm), 2)
        return u, r, gu, m_beta, m_gamma

    def residual(self, s):
        u, r, gu, m_beta, m_gamma = self.pieces(s)
        v = s.v.ravel()
        q = s.q.ravel()
        Ts = self.Ts
        f1 = r - m_beta * v
        f2 = -(self.G.T @ q) - self.c * (Ts.T @ r) - self.c2 * (Ts.T @ v)
        if self.cfg.kappa:
            f2 = f2 + self.cfg.kappa * (self.lap @ u)
        f3 = -self.a2 * gu + m_gamma * q
        return f1, f2, f3


def project_state(state, alpha):
    """Project ``q`` onto ``[|q|] <= alpha`` and ``v`` onto ``|v| <= 1``, in place."""
    a = weight_field(alpha, state.u.shape)
    nq = pointwise_norm(state.q)
    state.q *= (a / np.maximum(a, nq))[None]
    state.v /= np.maximum(1.0, np.abs(state.v))
    # rounding in the rescale can leave |q| a hair above alpha
    over = pointwise_norm(state.q) > a
    if np.any(over):
        state.q[:, over] *= np.nextafter(a[over] / pointwise_norm(state.q)[over], 0.0)
    over = np.abs(state.v) > 1.0
    state.v[over] = np.sign(state.v[over])
    return state


def is_feasible(state, alpha):
    a = weight_field(alpha, state.u.shape)
    return bool(np.all(pointwise_norm(state.q) <= a) and np.all(np.abs(state.v) <= 1.0))


def _problem(T, g, alpha, cfg):
    T = T or Identity()
    g = as_image(g, "g")
    return _Problem(T, g, alpha, cfg or SsnConfig())


def ssn_residual(state, T, g, alpha, cfg=None):
    """The three Newton residuals ``(F1, F2, F3)`` as image-shaped arrays."""
    prob = _problem(T, g, alpha, cfg)
    f1, f2, f3 = prob.residual(state)
    shape = prob.shape
    return f1.reshape(shape), f2.reshape(shape), f3.reshape((2,) + shape)


def residual_norm(F):
    return float(np.sqrt(sum(float(np.sum(f * f)) for f in F)))


def _step(prob, s, k):
    cfg = prob.cfg
    if not is_feasible(s, prob.alpha):
        project_state(s, prob.alpha)
    u, r, gu, m_beta, m_gamma = prob.pieces(s)
    f1, f2, f3 = prob.residual(s)
    v = s.v.ravel()
    q = s.q.ravel()
    n = u.size
    Ts, G = prob.Ts, prob.G

    chi_b = (m_beta > cfg.huber_beta).astype(np.float64)
    A = sp.diags(1.0 - v * chi_b * np.sign(r)) @ Ts
    chi_g = (m_gamma > np.tile(cfg.huber_gamma * prob.alpha.ravel(), 2)).astype(np.float64)
    gx, gy = gu[:n], gu[n:]
    M = sp.bmat([[sp.diags(gx), sp.diags(gy)], [sp.diags(gx), sp.diags(gy)]])
    B = (sp.diags(q * chi_g / m_gamma) @ M - sp.diags(prob.a2)) @ G

    inv_mb = 1.0 / m_beta
    inv_mg = 1.0 / m_gamma
    H = prob.c * prob.TtT + prob.c2 * (Ts.T @ sp.diags(inv_mb) @ A) - G.T @ sp.diags(inv_mg) @ B
    if cfg.kappa:
        H = H - cfg.kappa * prob.lap
    H = (H + cfg.epsilon(k) * sp.identity(n)).tocsc()
    rhs = f2 - prob.c2 * (Ts.T @ (inv_mb * f1)) + G.T @ (inv_mg * f3)

    min_probe = _probe(H, cfg.definiteness_probes, k)
    if not min_probe > 0:
        raise NumericalError(f"reduced Newton matrix is not positive definite at step {k} (probe {min_probe:.3e})")
    du = _solve(H, rhs, cfg)
    if not np.all(np.isfinite(du)):
        raise NumericalError(f"Newton step {k} produced non-finite values")
    dv = inv_mb * (A @ du + f1)
    dq = -inv_mg * (B @ du + f3)
    shape = prob.shape
    s.u = (u + du).reshape(shape)
    s.v = (v + dv).reshape(shape)
    s.q = (q + dq).reshape((2,) + shape)
    return min_probe


def _probe(H, count, k):
    if count <= 0:
        return np.inf
    rng = np.random.default_rng(k)
    vals = []
    for _ in range(count):
        x = rng.standard_normal(H.shape[0])
        vals.append(float(x @ (H @ x)) / float(x @ x))
    return min(vals)


def _solve(H, rhs, cfg):
    if cfg.linear_solver == "direct":
        try:
            return spla.splu(H).solve(rhs)
        except RuntimeError as exc:
            raise NumericalError(f"singular reduced Newton system: {exc}") from exc
    d = H.diagonal()
    d[d == 0] = 1.0
    P = spla.LinearOperator(H.shape, matvec=lambda x: x / d)
    x, info = spla.gmres(H, rhs, M=P, rtol=cfg.krylov_tol, atol=0.0, restart=100, maxiter=200)
    if info != 0:
        raise NumericalError(f"GMRES did not converge (info={info})")
    return x


def initial_state(T, g):
    g = as_image(g, "g")
    T = T or Identity()
    u = g.copy() if T.is_identity else T.adjoint(g)
    return SsnState(u, np.zeros_like(g), np.zeros((2,) + g.shape))


def ssn_step(state, T, g, alpha, cfg=None, k=0):
    """One projected Newton step; returns a new state."""
    prob = _problem(T, g, alpha, cfg)
    s = state.copy()
    _step(prob, s, k)
    return s


def ssn_solve(T, g, alpha, cfg=None, state=None):
    """Run Newton steps until the residual norm drops below ``newton_tolerance``.

    Every iterate is projected onto the feasible set of ``(q, v)`` before its
    residual is measured. The report's ``energy_trace`` holds the residual
    norm before every step and after the last; ``dual`` is ``q`` and ``aux``
    is ``v``.
    """
    prob = _problem(T, g, alpha, cfg)
    cfg = prob.cfg
    s = initial_state(prob.T, prob.g) if state is None else state.copy()
    project_state(s, prob.alpha)
    norms = [residual_norm(prob.residual(s))]
    k = 0
    while norms[-1] >= cfg.newton_tolerance and k < cfg.max_newton_steps:
        _step(prob, s, k)
        project_state(s, prob.alpha)
        k += 1
        norms.append(residual_norm(prob.residual(s)))
    final = norms[-1]
    rel = final / max(norms[0], 1e-300)
    return SolveReport(
        solution=s.u,
        iterations_used=k,
        final_relative_change=rel,
        energy_trace=norms,
        converged=bool(final < cfg.newton_tolerance),
        dual=s.q,
        aux=s.v,
        inner_iterations=k,
    )
