"""Seeded degradation and the noise statistics behind the discrepancy target."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grid import check_tau


@dataclass
class NoiseSpec:
    """Description of the degradation statistics.

    ``kind`` is one of ``"gaussian"``, ``"salt_pepper"``, ``"random_valued"``.
    For non-homogeneous Gaussian noise give ``regions``: a list of
    ``(mask, sigma)`` pairs; pixels covered by a mask use that region's
    sigma, all others use ``sigma``.
    """

    kind: str
    sigma: float = 0.0
    r1: float = 0.0
    r2: float = 0.0
    r: float = 0.0
    seed: int = 0
    regions: list = field(default_factory=list)

    def __post_init__(self):
        if self.kind == "gaussian":
            if not self.sigma > 0:
                raise ValueError(f"gaussian sigma must be positive, got {self.sigma}")
            for _, s in self.regions:
                if not s > 0:
                    raise ValueError(f"region sigma must be positive, got {s}")
        elif self.kind == "salt_pepper":
            if not (0 <= self.r1 < 1 and 0 <= self.r2 < 1):
                raise ValueError("salt-and-pepper rates must lie in [0, 1)")
            if not 1 - self.r1 - self.r2 > 0:
                raise ValueError("salt-and-pepper rates must satisfy r1 + r2 < 1")
        elif self.kind == "random_valued":
            if not 0 <= self.r < 1:
                raise ValueError("random-valued rate must lie in [0, 1)")
        else:
            raise ValueError(f"unknown noise kind {self.kind!r}")

    @property
    def tau(self):
        """Fidelity exponent matched to the noise: 2 for Gaussian, 1 for impulse."""
        return 2 if self.kind == "gaussian" else 1

    @property
    def is_homogeneous(self):
        return not self.regions

    @property
    def reference_free(self):
        """True when nu does not depend on the reference image."""
        return self.kind == "gaussian" or (self.kind == "salt_pepper" and self.r1 == self.r2)

    def sigma_field(self, shape):
        """Per-pixel standard deviation (Gaussian only)."""
        s = np.full(shape, float(self.sigma))
        covered = np.zeros(shape, dtype=bool)
        for mask, sig in self.regions:
            m = np.asarray(mask, dtype=bool)
            if m.shape != tuple(shape):
                raise ValueError(f"region mask shape {m.shape} does not match image {tuple(shape)}")
            if np.any(covered & m):
                raise ValueError("noise region masks overlap")
            covered |= m
            s[m] = sig
        return s

    def to_dict(self):
        d = {"kind": self.kind, "seed": int(self.seed)}
        if self.kind == "gaussian":
            d["sigma"] = self.sigma
            if self.regions:
                d["regions"] = [{"box": _mask_box(m), "sigma": s} for m, s in self.regions]
        elif self.kind == "salt_pepper":
            d.update(r1=self.r1, r2=self.r2)
        else:
            d["r"] = self.r
        return d

    @classmethod
    def from_dict(cls, d, shape=None):
        d = dict(d)
        regions = []
        for reg in d.pop("regions", []) or []:
            if shape is None:
                raise ValueError("image shape needed to build region masks")
            regions.append((box_mask(shape, reg["box"]), float(reg["sigma"])))
        return cls(regions=regions, **d)


def box_mask(shape, box):
    """Boolean mask of the rectangle ``box = (row0, row1, col0, col1)``, half-open."""
    m = np.zeros(shape, dtype=bool)
    r0, r1, c0, c1 = (int(b) for b in box)
    m[r0:r1, c0:c1] = True
    return m


def _mask_box(mask):
    rows = np.flatnonzero(mask.any(axis=1))
    cols = np.flatnonzero(mask.any(axis=0))
    return [int(rows[0]), int(rows[-1]) + 1, int(cols[0]), int(cols[-1]) + 1]


@dataclass
class DiscrepancyTarget:
    """Per-pixel noise statistic ``nu`` and the target ``B = sum(nu) / tau``."""

    tau: int
    nu: np.ndarray
    B: float

    @property
    def nu_over_tau(self):
        return self.nu / self.tau


def degrade(u, spec, T=None):
    """Apply ``T`` then the noise of ``spec``. Deterministic given ``spec.seed``."""
    u = np.asarray(u, dtype=np.float64)
    Tu = u if T is None else T.apply(u)
    rng = np.random.default_rng(spec.seed)
    if spec.kind == "gaussian":
        return Tu + spec.sigma_field(u.shape) * rng.standard_normal(u.shape)
    if spec.kind == "salt_pepper":
        x = rng.random(u.shape)
        g = Tu.copy()
        g[x < spec.r1] = 0.0
        g[(x >= spec.r1) & (x < spec.r1 + spec.r2)] = 1.0
        return g
    x = rng.random(u.shape)
    rho = rng.random(u.shape)
    hit = x < spec.r
    g = Tu.copy()
    g[hit] = rho[hit]
    return g


def nu_estimate(u_ref, spec, T=None):
    """Noise statistic and discrepancy target for reference image ``u_ref``."""
    u_ref = np.asarray(u_ref, dtype=np.float64)
    shape = u_ref.shape
    tau = spec.tau
    if spec.kind == "gaussian":
        nu = spec.sigma_field(shape) ** 2
    else:
        Tu = u_ref if T is None else T.apply(u_ref)
        if spec.kind == "salt_pepper":
            val = spec.r2 - (spec.r2 - spec.r1) * float(np.mean(Tu))
        else:
            val = float(np.mean(spec.r * (Tu * Tu - Tu + 0.5)))
        nu = np.full(shape, val)
    return make_target(nu, tau)


def make_target(nu, tau):
    check_tau(tau)
    nu = np.asarray(nu, dtype=np.float64)
    if np.any(nu < 0):
        raise ValueError("noise statistic must be nonnegative")
    return DiscrepancyTarget(tau=tau, nu=nu, B=float(np.sum(nu)) / tau)


def make_nu_field(spec, shape):
    """Per-pixel variance field of a (possibly region-wise) Gaussian spec."""
    if spec.kind != "gaussian":
        raise ValueError("a nu field is defined region-wise only for Gaussian noise")
    return spec.sigma_field(shape) ** 2
