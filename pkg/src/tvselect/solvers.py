"""First-order inner solvers for weighted TV problems.

* :func:`cp_denoise` -- primal-dual iterations for ``0.5||u - g||^2 + R_alpha(u)``.
* :func:`surrogate_solve` -- majorize-minimize outer loop for a general
  operator ``T``; every step is one denoising problem.
* :func:`l1tv_solve` -- alternating soft thresholding and TV steps for the
  Huber-smoothed L1 fidelity.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import _backend
from .grid import as_image, energy, pointwise_norm, tv_weighted, weight_field
from .operators import Identity, norm_sq_estimate


class ConfigError(ValueError):
    """Invalid solver or selection configuration."""


class NumericalError(RuntimeError):
    """A solver produced non-finite values or a singular system."""


@dataclass(frozen=True)
class SolverConfig:
    max_iterations: int = 5000
    tol: float = 1e-6
    cp_primal_step: float = 0.35
    cp_dual_step: float = 0.35
    relaxation: float = 1.0
    surrogate_delta_factor: float = 1.01
    l1_gamma: float = 1e-2
    inner_max_iterations: int = 5000
    inner_tol: float | None = None
    record_energy: bool = True

    def __post_init__(self):
        if self.max_iterations < 1 or self.inner_max_iterations < 1:
            raise ConfigError("iteration caps must be positive")
        if not self.tol > 0 or (self.inner_tol is not None and not self.inner_tol > 0):
            raise ConfigError("tolerances must be positive")
        if not (self.cp_primal_step > 0 and self.cp_dual_step > 0):
            raise ConfigError("primal and dual steps must be positive")
        if not self.cp_primal_step * self.cp_dual_step * 8.0 < 1.0:
            raise ConfigError(
                f"step sizes violate tau*sigma*8 < 1: {self.cp_primal_step}*{self.cp_dual_step}*8 >= 1"
            )
        if not 0.0 <= self.relaxation <= 1.0:
            raise ConfigError("relaxation must lie in [0, 1]")
        if not self.surrogate_delta_factor > 1.0:
            raise ConfigError("surrogate delta factor must exceed 1")
        if not self.l1_gamma > 0:
            raise ConfigError("l1_gamma must be positive")

    @property
    def inner(self):
        """Config used for nested denoising solves."""
        return replace(
            self,
            max_iterations=self.inner_max_iterations,
            tol=self.inner_tol if self.inner_tol is not None else self.tol,
            record_energy=False,
        )


@dataclass
class SolveReport:
    solution: np.ndarray
    iterations_used: int
    final_relative_change: float
    energy_trace: list = field(default_factory=list)
    converged: bool = True
    dual: np.ndarray | None = None
    inner_iterations: int = 0
    aux: np.ndarray | None = None


def _rel_change(new, old):
    return float(np.linalg.norm(new - old) / max(np.linalg.norm(new), 1e-300))


def _check_finite(u, what):
    if not np.all(np.isfinite(u)):
        raise NumericalError(f"{what} produced non-finite values")


def cp_denoise(g, alpha, cfg=None, u0=None, p0=None):
    """Minimize ``0.5||u - g||^2 + sum alpha(x)|grad u(x)|``.

    ``u0``/``p0`` warm-start the primal and dual variables (defaults ``g`` and
    0). The returned report carries the final dual field in ``dual``.
    """
    cfg = cfg or SolverConfig()
    g = as_image(g, "g")
    a = weight_field(alpha, g.shape)
    u = np.array(g if u0 is None else u0, dtype=np.float64, order="C", copy=True)
    p = np.zeros((2,) + g.shape) if p0 is None else np.array(p0, dtype=np.float64, order="C", copy=True)
    ubar = u.copy()
    k = _backend.kernels
    args = (cfg.cp_primal_step, cfg.cp_dual_step, cfg.relaxation)
    trace = []
    if cfg.record_energy:
        trace.append(energy(u, g, None, 2, a))
        it, rel = 0, np.inf
        while it < cfg.max_iterations and not rel < cfg.tol:
            _, rel = k.cp_denoise(g, a, u, ubar, p, *args, 1, cfg.tol)
            it += 1
            trace.append(energy(u, g, None, 2, a))
    else:
        it, rel = k.cp_denoise(g, a, u, ubar, p, *args, cfg.max_iterations, cfg.tol)
    _check_finite(u, "cp_denoise")
    return SolveReport(u, int(it), float(rel), trace, converged=bool(rel < cfg.tol), dual=p, inner_iterations=int(it))


def _initial(T, g, u0):
    if u0 is not None:
        return np.array(u0, dtype=np.float64, copy=True)
    return g.copy() if T.is_identity else T.adjoint(g)


def surrogate_solve(T, g, alpha, cfg=None, u0=None, p0=None, delta=None):
    """Minimize ``0.5||Tu - g||^2 + R_alpha(u)`` by surrogate iterations.

    Each step solves ``0.5||u - z||^2 + R_{alpha/delta}(u)`` with
    ``z = u_n - T*(T u_n - g)/delta`` and ``delta > ||T||^2``.
    """
    cfg = cfg or SolverConfig()
    T = T or Identity()
    g = as_image(g, "g")
    a = weight_field(alpha, g.shape)
    if delta is None:
        delta = norm_sq_estimate(T, g.shape, safety=cfg.surrogate_delta_factor)
    u = _initial(T, g, u0)
    p = p0
    inner = cfg.inner
    a_d = a / delta
    trace = [energy(u, g, T, 2, a)] if cfg.record_energy else []
    rel = np.inf
    total = 0
    it = 0
    while it < cfg.max_iterations:
        it += 1
        z = u - T.adjoint(T.apply(u) - g) / delta
        rep = cp_denoise(z, a_d, inner, u0=u, p0=p)
        total += rep.iterations_used
        rel = _rel_change(rep.solution, u)
        u, p = rep.solution, rep.dual
        if cfg.record_energy:
            trace.append(energy(u, g, T, 2, a))
        if rel < cfg.tol:
            break
    _check_finite(u, "surrogate_solve")
    return SolveReport(u, it, rel, trace, converged=bool(rel < cfg.tol), dual=p, inner_iterations=total)


def soft_threshold(d, gamma):
    """Pixelwise shrinkage of ``d`` toward zero by ``gamma``."""
    if not gamma > 0:
        raise ValueError(f"threshold must be positive, got {gamma}")
    d = np.asarray(d, dtype=np.float64)
    return np.sign(d) * np.maximum(np.abs(d) - gamma, 0.0)


def huber(r, gamma):
    """``sum huber_gamma(r)``: quadratic ``r^2/(2 gamma)`` below ``gamma``, linear above."""
    a = np.abs(r)
    return float(np.sum(np.where(a <= gamma, a * a / (2.0 * gamma), a - 0.5 * gamma)))


def l1tv_energy(u, g, T, alpha, gamma):
    """Objective minimized by :func:`l1tv_solve` (Huber-smoothed L1 fidelity plus TV)."""
    Tu = u if T is None else T.apply(u)
    return huber(Tu - g, gamma) + tv_weighted(u, alpha)


def l1tv_solve(T, g, alpha, cfg=None, u0=None, p0=None):
    """Minimize ``sum |Tu - g| + R_alpha(u)`` with a Huber-smoothed fidelity.

    Alternates ``v = ST(Tu - g, gamma)`` with the TV problem
    ``0.5||Tu - (g + v)||^2 + R_{gamma alpha}(u)``.
    """
    cfg = cfg or SolverConfig()
    T = T or Identity()
    g = as_image(g, "g")
    a = weight_field(alpha, g.shape)
    gam = cfg.l1_gamma
    u = _initial(T, g, u0)
    p = p0
    inner = cfg.inner
    ga = gam * a
    delta = None if T.is_identity else norm_sq_estimate(T, g.shape, safety=inner.surrogate_delta_factor)
    if T.is_identity and not cfg.record_energy:
        u = np.ascontiguousarray(u, dtype=np.float64)
        p = np.zeros((2,) + g.shape) if p is None else np.array(p, dtype=np.float64, order="C", copy=True)
        steps = (inner.cp_primal_step, inner.cp_dual_step, inner.relaxation)
        it, total, rel, v = _backend.kernels.l1tv_denoise(
            g, np.ascontiguousarray(ga), gam, u, p, *steps, cfg.max_iterations, cfg.tol, inner.max_iterations, inner.tol
        )
        _check_finite(u, "l1tv_solve")
        return SolveReport(u, int(it), float(rel), [], converged=bool(rel < cfg.tol), dual=p,
                           inner_iterations=int(total), aux=v)
    trace = [l1tv_energy(u, g, T, a, gam)] if cfg.record_energy else []
    rel = np.inf
    total = 0
    it = 0
    v = np.zeros_like(g)
    while it < cfg.max_iterations:
        it += 1
        Tu = u if T.is_identity else T.apply(u)
        v = soft_threshold(Tu - g, gam)
        if T.is_identity:
            rep = cp_denoise(g + v, ga, inner, u0=u, p0=p)
        else:
            rep = surrogate_solve(T, g + v, ga, inner, u0=u, p0=p, delta=delta)
        total += rep.inner_iterations
        rel = _rel_change(rep.solution, u)
        u, p = rep.solution, rep.dual
        if cfg.record_energy:
            trace.append(l1tv_energy(u, g, T, a, gam))
        if rel < cfg.tol:
            break
    _check_finite(u, "l1tv_solve")
    return SolveReport(u, it, rel, trace, converged=bool(rel < cfg.tol), dual=p, inner_iterations=total, aux=v)


def dual_feasibility_gap(p, alpha):
    """``max(|p(x)| - alpha(x))``; nonpositive for a feasible dual field."""
    a = weight_field(alpha, p.shape[1:])
    return float(np.max(pointwise_norm(p) - a))
