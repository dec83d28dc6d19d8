"""Scalar regularization parameter selection by the discrepancy principle.

All three loops solve for ``alpha_n``, compare the fidelity ``H`` of the
restoration with the target ``B`` and rescale ``alpha`` by a power of
``B/H``:

* CPS: power 1/2 (Gaussian denoising only),
* APS: power 1,
* pAPS: power ``p`` adapted so that every accepted iterate stays on the side
  of ``B`` it started on, which makes ``alpha_n`` monotone.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

from .model import RestorationProblem
from .operators import make_operator
from .solvers import ConfigError
from .trace import SelectionTrace, Termination

_MAX_LOG_STEP = 300.0
_CYCLE_FLAGS = {2: "two_cycle", 3: "three_cycle"}


@dataclass(frozen=True)
class SelectConfig:
    alpha0: float = 1.0
    p0: float = 32.0
    eps_B: float = 1e-5
    eps_alpha: float = 1e-10
    max_outer: int = 500
    p_decrease_factor: float = 0.5
    max_p_decreases: int = 60
    zero_H_factor: float = 10.0
    max_zero_H_boosts: int = 60
    cycle_rtol: float = 1e-6
    cycle_contraction: float = 1e-2

    def __post_init__(self):
        for name in ("alpha0", "p0", "eps_B", "eps_alpha", "cycle_rtol", "cycle_contraction"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if not 0 < self.p_decrease_factor < 1:
            raise ConfigError("p_decrease_factor must lie in (0, 1)")
        if self.max_outer < 0:
            raise ConfigError("max_outer must be nonnegative")


def _met(ev, cfg):
    return ev.B > 0 and abs(ev.H - ev.B) / ev.B <= cfg.eps_B


def _boost_zero(prob, ev, cfg, trace):
    """Multiply alpha by 10 while the restoration fits the data exactly."""
    k = 0
    while ev.H == 0.0:
        if k >= cfg.max_zero_H_boosts:
            raise ConfigError("fidelity stays zero; the noise model does not match the data")
        ev = prob.solve(ev.alpha * cfg.zero_H_factor, ev.warm)
        k += 1
    return ev


def _finish(prob, trace, ev, reason):
    trace.termination = reason
    trace.solves = prob.solves
    trace.inner_iterations = prob.inner_iterations
    return float(ev.alpha), ev.u, trace


def _power_loop(prob, cfg, method, power, detect_cycle=False):
    trace = SelectionTrace(method)
    ev = _boost_zero(prob, prob.solve(cfg.alpha0), cfg, trace)
    trace.branch = "low" if ev.H <= ev.B else "high"
    trace.add(0, ev.alpha, ev.H, ev.B, power)
    history = [ev.alpha]
    n = 0
    while True:
        if _met(ev, cfg):
            return _finish(prob, trace, ev, Termination.DISCREPANCY_MET)
        if n >= cfg.max_outer:
            return _finish(prob, trace, ev, Termination.ITERATION_CAP)
        ev = _boost_zero(prob, ev, cfg, trace)
        new_alpha = _rescaled(ev.alpha, ev.B, ev.H, power)
        if abs(new_alpha - ev.alpha) < cfg.eps_alpha:
            return _finish(prob, trace, ev, Termination.ALPHA_STAGNATED)
        ev = prob.solve(new_alpha, ev.warm)
        n += 1
        trace.add(n, ev.alpha, ev.H, ev.B, power)
        history.append(ev.alpha)
        period = _cycle_period(history, cfg.cycle_rtol, cfg.cycle_contraction) if detect_cycle else 0
        if period:
            trace.flags.append(_CYCLE_FLAGS[period])
            warnings.warn(f"{method}: alpha cycles through {period} values; stopping", RuntimeWarning, stacklevel=3)
            return _finish(prob, trace, ev, Termination.ITERATION_CAP)


def _rescaled(alpha, B, H, power):
    """``(B/H)**power * alpha`` with the exponent clipped so it cannot overflow."""
    return alpha * math.exp(max(min(power * math.log(B / H), _MAX_LOG_STEP), -_MAX_LOG_STEP))


def _cycle_period(h, rtol, contraction, max_period=3):
    """Period ``k >= 2`` of a cycle at the tail of ``h``, or 0.

    A cycle needs ``k`` distinct values (spread above ``rtol`` relative) that
    each reappear ``k`` steps later, having moved by at most ``contraction``
    times that spread. The second test tolerates the drift left by inexact
    inner solves while still rejecting slowly converging oscillations.
    """
    for k in range(2, max_period + 1):
        if len(h) < 2 * k:
            break
        tail = h[-2 * k :]
        last = tail[k:]
        amp = max(last) - min(last)
        if amp <= rtol * max(abs(a) for a in last):
            continue
        if all(abs(tail[i] - tail[i + k]) <= contraction * amp for i in range(k)):
            return k
    return 0


def cps_select(g, spec, cfg=None, solver_cfg=None, T=None):
    """Square-root rescaling loop for Gaussian denoising."""
    cfg = cfg or SelectConfig()
    if spec.kind != "gaussian":
        raise ConfigError("CPS needs Gaussian noise")
    if not make_operator(T).is_identity:
        raise ConfigError("CPS is defined for denoising (T = identity) only")
    prob = RestorationProblem(g, spec, None, "auto", solver_cfg)
    return _power_loop(prob, cfg, "cps", 0.5)


def aps_select(g, spec, T=None, cfg=None, solver_cfg=None, solver="auto", ssn_cfg=None):
    """Fixed-point loop ``alpha <- (B/H) alpha`` that stops on a detected cycle of period 2 or 3."""
    cfg = cfg or SelectConfig()
    prob = RestorationProblem(g, spec, T, solver, solver_cfg, ssn_cfg)
    return _power_loop(prob, cfg, "aps", 1.0, detect_cycle=True)


def paps_select(g, spec, T=None, cfg=None, solver_cfg=None, solver="auto", ssn_cfg=None, problem=None):
    """p-adaptive loop ``alpha <- (B/H)^p alpha``.

    The side of ``B`` on which the first restoration lies fixes the branch;
    a trial that crosses to the other side is discarded and ``p`` is
    reduced. ``p`` is never increased again.
    """
    cfg = cfg or SelectConfig()
    prob = problem or RestorationProblem(g, spec, T, solver, solver_cfg, ssn_cfg)
    trace = SelectionTrace("paps")
    ev = _boost_zero(prob, prob.solve(cfg.alpha0), cfg, trace)
    low = ev.H <= ev.B
    trace.branch = "low" if low else "high"
    p = cfg.p0
    p_floor = cfg.p0 * cfg.p_decrease_factor**cfg.max_p_decreases
    trace.add(0, ev.alpha, ev.H, ev.B, p)
    n = 0
    while True:
        if _met(ev, cfg):
            return _finish(prob, trace, ev, Termination.DISCREPANCY_MET)
        if n >= cfg.max_outer:
            return _finish(prob, trace, ev, Termination.ITERATION_CAP)
        ev = _boost_zero(prob, ev, cfg, trace)
        while True:
            new_alpha = _rescaled(ev.alpha, ev.B, ev.H, p)
            if abs(new_alpha - ev.alpha) < cfg.eps_alpha:
                return _finish(prob, trace, ev, Termination.ALPHA_STAGNATED)
            trial = prob.solve(new_alpha, ev.warm)
            if (trial.H <= trial.B) if low else (trial.H >= trial.B):
                break
            trace.rejections += 1
            p *= cfg.p_decrease_factor
            if p < p_floor * (1 + 1e-12):
                return _finish(prob, trace, ev, Termination.P_UNDERFLOW)
        ev = trial
        n += 1
        trace.add(n, ev.alpha, ev.H, ev.B, p)


def admissible_p_bound(alpha, beta, H_alpha, H_beta):
    """Largest ``p`` with ``H_beta^p / beta <= H_alpha^p / alpha`` for ``alpha <= beta``.

    Returns ``inf`` when ``H_beta == H_alpha``.
    """
    if not (alpha > 0 and beta > 0 and H_alpha > 0 and H_beta > 0):
        raise ValueError("alpha, beta and both fidelities must be positive")
    if alpha > beta:
        raise ValueError("need alpha <= beta")
    if H_beta < H_alpha:
        raise ValueError("fidelity must be nondecreasing in alpha (H_beta >= H_alpha)")
    if H_beta == H_alpha:
        return math.inf
    return (math.log(beta) - math.log(alpha)) / (math.log(H_beta) - math.log(H_alpha))


def select_scalar(method, g, spec, T=None, cfg=None, solver_cfg=None, solver="auto", ssn_cfg=None):
    """Dispatch on ``method`` in ``{"cps", "aps", "paps"}``."""
    if method == "cps":
        return cps_select(g, spec, cfg, solver_cfg, T)
    if method == "aps":
        return aps_select(g, spec, T, cfg, solver_cfg, solver, ssn_cfg)
    if method == "paps":
        return paps_select(g, spec, T, cfg, solver_cfg, solver, ssn_cfg)
    raise ConfigError(f"unknown scalar method {method!r}")


__all__ = [
    "SelectConfig",
    "SelectionTrace",
    "Termination",
    "admissible_p_bound",
    "aps_select",
    "cps_select",
    "paps_select",
    "select_scalar",
]
