"""Total-variation image restoration with automatic regularization parameter selection."""

from . import _backend
from .grid import divergence, energy, fidelity, gradient, mean_value, tv_weighted
from .metrics import mae, mssim, psnr
from .noise import DiscrepancyTarget, NoiseSpec, degrade, make_nu_field, nu_estimate
from .operators import GaussianBlur, Identity, norm_sq_estimate

__version__ = "0.1.0"


def backend():
    """Name of the active kernel backend."""
    return _backend.name
