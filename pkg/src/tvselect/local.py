"""Spatially varying parameter selection from windowed local residuals.

The local residual at pixel ``(i, j)`` is the mean of the pointwise fidelity
``|Tu - g|^tau / tau`` over a window around it. Windows are either clipped
at the image border (``"clip"``) or taken on the half-sample mirrored
extension (``"mirror"``), in which case every window holds ``omega^2``
samples.
"""

from __future__ import annotations

import sys
import warnings
from dataclasses import dataclass

import numpy as np

from . import _backend
from .grid import residual
from .model import RestorationProblem
from .solvers import ConfigError
from .trace import SelectionTrace, Termination

BOUNDARIES = ("clip", "mirror")


@dataclass(frozen=True)
class WindowSpec:
    omega: int = 11
    boundary: str = "clip"

    def __post_init__(self):
        if self.omega < 1 or self.omega % 2 == 0:
            raise ConfigError(f"window size must be a positive odd integer, got {self.omega}")
        if self.boundary not in BOUNDARIES:
            raise ConfigError(f"unknown window boundary {self.boundary!r}; use one of {BOUNDARIES}")

    @property
    def half(self):
        return self.omega // 2

    def check(self, shape):
        if self.omega > min(shape):
            warnings.warn(f"window {self.omega} exceeds image size {shape}", RuntimeWarning, stacklevel=3)

    def window_sum(self, a):
        a = np.ascontiguousarray(a, dtype=np.float64)
        h = self.half
        if self.boundary == "clip":
            return _backend.kernels.box_sum(a, h)
        padded = np.ascontiguousarray(np.pad(a, h, mode="symmetric"))
        return _backend.kernels.box_sum(padded, h)[h : h + a.shape[0], h : h + a.shape[1]]

    def counts(self, shape):
        """Number of samples ``M`` in every window."""
        if self.boundary == "mirror":
            return np.full(shape, float(self.omega**2))
        return _backend.kernels.box_sum(np.ones(shape), self.half)

    def mean(self, a):
        return self.window_sum(a) / self.counts(np.shape(a))


@dataclass
class LocalResidualField:
    S: np.ndarray
    M: np.ndarray


def local_residual(u, g, T=None, tau=2, win=None):
    """Windowed mean ``S`` of ``|Tu - g|^tau / tau`` and the window counts ``M``."""
    win = win or WindowSpec()
    r = residual(u, g, T)
    fid = np.abs(r) if tau == 1 else 0.5 * r * r
    if tau not in (1, 2):
        raise ValueError(f"fidelity exponent must be 1 or 2, got {tau!r}")
    M = win.counts(r.shape)
    return LocalResidualField(win.window_sum(fid) / M, M)


@dataclass(frozen=True)
class LocalSelectConfig:
    alpha0: float = 1e-2
    p0: float = 0.5
    floor_eps: float = 1e-14
    p_decrease_factor: float = 0.1
    discrepancy_tol: float = 1e-6
    eps_B: float = 1e-5
    shrink_factor: float = 0.2
    max_outer: int = 200
    max_shrinks: int = 200
    eps_alpha: float = 1e-10
    p_min: float = sys.float_info.epsilon

    def __post_init__(self):
        for name in ("alpha0", "p0", "floor_eps", "discrepancy_tol", "eps_B", "eps_alpha", "p_min"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        for name in ("p_decrease_factor", "shrink_factor"):
            if not 0 < getattr(self, name) < 1:
                raise ConfigError(f"{name} must lie in (0, 1)")


def _ratio(ev, win, tau, low, eps):
    """``nu / (tau f)`` with ``f`` clamped toward ``nu/tau`` on the side of the branch."""
    S = win.mean(ev.fid)
    level = ev.nu / tau
    if low:
        f = np.maximum(np.minimum(S, level), eps)
    else:
        f = np.maximum(S, level)
    return level / f


def _start(prob, cfg, alpha0):
    a0 = cfg.alpha0 if alpha0 is None else alpha0
    alpha = np.full(prob.g.shape, float(a0)) if np.ndim(a0) == 0 else np.array(a0, dtype=np.float64)
    return prob.solve(alpha)


def _finish(prob, trace, ev, reason):
    trace.termination = reason
    trace.solves = prob.solves
    trace.inner_iterations = prob.inner_iterations
    return ev.alpha, ev.u, trace


def latv_select(g, spec, T=None, win=None, cfg=None, solver_cfg=None, solver="auto", ssn_cfg=None,
                alpha0=None, problem=None):
    """Windowed update ``alpha <- mean_window((nu/(tau f))^p alpha)`` with fixed ``p``.

    Stops the first time ``H`` crosses ``B``: on the ``H > B`` branch the
    crossing iterate is returned, on the ``H <= B`` branch its predecessor.
    """
    win = win or WindowSpec()
    cfg = cfg or LocalSelectConfig()
    prob = problem or RestorationProblem(g, spec, T, solver, solver_cfg, ssn_cfg)
    win.check(prob.g.shape)
    tau = prob.tau
    trace = SelectionTrace("latv")
    ev = _start(prob, cfg, alpha0)
    low = ev.H <= ev.B
    trace.branch = "low" if low else "high"
    p = cfg.p0
    trace.add(0, ev.alpha, ev.H, ev.B, p)
    n = 0
    while n < cfg.max_outer:
        ratio = _ratio(ev, win, tau, low, cfg.floor_eps)
        new_alpha = win.mean(ratio**p * ev.alpha)
        if np.max(np.abs(new_alpha - ev.alpha)) < cfg.eps_alpha:
            return _finish(prob, trace, ev, Termination.ALPHA_STAGNATED)
        nxt = prob.solve(new_alpha, ev.warm)
        n += 1
        trace.add(n, nxt.alpha, nxt.H, nxt.B, p)
        if not low and nxt.H < nxt.B:
            return _finish(prob, trace, nxt, Termination.DISCREPANCY_MET)
        if low and nxt.H > nxt.B:
            trace.records.pop()
            return _finish(prob, trace, ev, Termination.DISCREPANCY_MET)
        ev = nxt
    return _finish(prob, trace, ev, Termination.ITERATION_CAP)


def platv_select(g, spec, T=None, win=None, cfg=None, solver_cfg=None, solver="auto", ssn_cfg=None,
                 alpha0=None, problem=None):
    """Pixelwise update ``alpha <- alpha * mean_window((nu/(tau f))^p)`` with adaptive ``p``.

    A trial that crosses ``B`` against the initial branch is rejected and
    ``p`` shrinks by ``p_decrease_factor``. Stops when ``H <= B`` and either
    ``|H - B| <= discrepancy_tol`` or ``|H - B| / B <= eps_B``, or when ``p``
    falls below ``p_min``.
    """
    win = win or WindowSpec()
    cfg = cfg or LocalSelectConfig()
    prob = problem or RestorationProblem(g, spec, T, solver, solver_cfg, ssn_cfg)
    win.check(prob.g.shape)
    tau = prob.tau
    trace = SelectionTrace("platv")
    ev = _start(prob, cfg, alpha0)
    low = ev.H <= ev.B
    trace.branch = "low" if low else "high"
    p = cfg.p0
    trace.add(0, ev.alpha, ev.H, ev.B, p)

    def met(e):
        gap = abs(e.H - e.B)
        return e.H <= e.B and (gap <= cfg.discrepancy_tol or gap <= cfg.eps_B * e.B)

    n = 0
    while True:
        if met(ev):
            return _finish(prob, trace, ev, Termination.DISCREPANCY_MET)
        if n >= cfg.max_outer:
            return _finish(prob, trace, ev, Termination.ITERATION_CAP)
        ratio = _ratio(ev, win, tau, low, cfg.floor_eps)
        while True:
            # the window mean of ratios on one side of 1 stays there; clamp away round-off
            factor = win.mean(ratio**p)
            factor = np.maximum(factor, 1.0) if low else np.minimum(factor, 1.0)
            new_alpha = ev.alpha * factor
            if np.max(np.abs(new_alpha - ev.alpha)) < cfg.eps_alpha:
                return _finish(prob, trace, ev, Termination.ALPHA_STAGNATED)
            trial = prob.solve(new_alpha, ev.warm)
            if met(trial) or ((trial.H <= trial.B) if low else (trial.H >= trial.B)):
                break
            trace.rejections += 1
            p *= cfg.p_decrease_factor
            if p < cfg.p_min:
                trace.flags.append("p_underflow")
                return _finish(prob, trace, ev, Termination.P_UNDERFLOW)
        ev = trial
        n += 1
        trace.add(n, ev.alpha, ev.H, ev.B, p)


def shrink_alpha0(g, spec, T=None, cfg=None, solver_cfg=None, solver="auto", ssn_cfg=None, problem=None):
    """Shrink a scalar ``alpha0`` by ``shrink_factor`` until ``H(u_alpha0) <= B``."""
    cfg = cfg or LocalSelectConfig()
    prob = problem or RestorationProblem(g, spec, T, solver, solver_cfg, ssn_cfg)
    a = float(cfg.alpha0)
    ev = prob.solve(a)
    k = 0
    while ev.H > ev.B:
        if k >= cfg.max_shrinks:
            raise ConfigError(
                f"alpha0 shrunk {k} times without reaching H <= B; the noise model does not fit the data"
            )
        a *= cfg.shrink_factor
        ev = prob.solve(a, ev.warm)
        k += 1
    return a


def select_local(method, g, spec, T=None, win=None, cfg=None, solver_cfg=None, solver="auto", ssn_cfg=None,
                 auto_alpha0=False):
    """Dispatch on ``method`` in ``{"latv", "platv"}``; optionally shrink ``alpha0`` first."""
    if method not in ("latv", "platv"):
        raise ConfigError(f"unknown local method {method!r}")
    cfg = cfg or LocalSelectConfig()
    prob = RestorationProblem(g, spec, T, solver, solver_cfg, ssn_cfg)
    alpha0 = shrink_alpha0(g, spec, cfg=cfg, problem=prob) if auto_alpha0 else None
    fn = latv_select if method == "latv" else platv_select
    return fn(g, spec, T, win, cfg, alpha0=alpha0, problem=prob)
