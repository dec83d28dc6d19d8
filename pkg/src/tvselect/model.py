"""A restoration problem ``(g, T, noise)`` solved repeatedly for different weights.

Selection loops call :meth:`RestorationProblem.solve` many times with nearby
weights, so each solve is warm-started from a caller-held :class:`WarmState`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import as_image, fidelity_from_residual
from .noise import nu_estimate
from .operators import Identity, make_operator
from .solvers import ConfigError, SolverConfig, cp_denoise, l1tv_solve, surrogate_solve
from .ssn import SsnState, ssn_solve

SOLVERS = ("auto", "cp", "surrogate", "l1tv", "ssn")


@dataclass
class WarmState:
    u: np.ndarray | None = None
    p: np.ndarray | None = None
    ssn: object = None


@dataclass
class Evaluation:
    """A solved instance: restoration, fidelity ``H`` and the target ``nu``/``B``."""

    alpha: object
    u: np.ndarray
    H: float
    nu: np.ndarray
    B: float
    warm: WarmState
    fid: np.ndarray | None = None

    @property
    def gap(self):
        return abs(self.H - self.B) / self.B if self.B > 0 else np.inf


class RestorationProblem:
    """Observed image ``g`` with forward operator ``T`` and degradation ``spec``.

    ``solver`` picks the inner method: ``auto`` uses Chambolle-Pock for
    Gaussian denoising, the surrogate iteration for Gaussian deblurring and
    the L1 splitting for impulse noise; ``ssn`` selects the Newton solver.
    """

    def __init__(self, g, spec, T=None, solver="auto", cfg=None, ssn_cfg=None):
        self.g = as_image(g, "g")
        self.spec = spec
        self.T = make_operator(T) if T is not None else Identity()
        self.tau = spec.tau
        if solver not in SOLVERS:
            raise ConfigError(f"unknown solver {solver!r}; choose from {SOLVERS}")
        if solver in ("cp",) and not self.T.is_identity:
            raise ConfigError("the cp solver handles denoising only (T = identity)")
        if solver in ("cp", "surrogate") and self.tau != 2:
            raise ConfigError(f"solver {solver!r} needs a Gaussian noise model")
        if solver in ("l1tv", "ssn") and self.tau != 1:
            raise ConfigError(f"solver {solver!r} needs an impulse noise model")
        if solver == "auto":
            if self.tau == 2:
                solver = "cp" if self.T.is_identity else "surrogate"
            else:
                solver = "l1tv"
        self.solver = solver
        self.cfg = cfg or SolverConfig(record_energy=False)
        self.ssn_cfg = ssn_cfg
        self.solves = 0
        self.inner_iterations = 0

    def _run(self, alpha, warm):
        T, g, cfg = self.T, self.g, self.cfg
        if self.solver == "cp":
            rep = cp_denoise(g, alpha, cfg, u0=warm.u, p0=warm.p)
        elif self.solver == "surrogate":
            rep = surrogate_solve(T, g, alpha, cfg, u0=warm.u, p0=warm.p)
        elif self.solver == "l1tv":
            rep = l1tv_solve(T, g, alpha, cfg, u0=warm.u, p0=warm.p)
        else:
            rep = ssn_solve(T, g, alpha, self.ssn_cfg, state=warm.ssn)
            return rep, WarmState(rep.solution, None, SsnState(rep.solution, rep.aux, rep.dual))
        return rep, WarmState(rep.solution, rep.dual)

    def solve(self, alpha, warm=None):
        """Solve for weight ``alpha`` and evaluate the discrepancy quantities."""
        rep, state = self._run(alpha, warm or WarmState())
        self.solves += 1
        self.inner_iterations += rep.inner_iterations
        return self.evaluate(rep.solution, alpha, state)

    def evaluate(self, u, alpha=None, warm=None):
        Tu = u if self.T.is_identity else self.T.apply(u)
        r = Tu - self.g
        fid = np.abs(r) if self.tau == 1 else 0.5 * r * r
        target = nu_estimate(u, self.spec, self.T)
        return Evaluation(
            alpha=alpha,
            u=u,
            H=fidelity_from_residual(r, self.tau),
            nu=target.nu,
            B=target.B,
            warm=warm or WarmState(u),
            fid=fid,
        )
