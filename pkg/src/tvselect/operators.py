"""Linear forward operators with exact adjoints.

The convolution operator pads the image with one of the boundary rules
below, then correlates with the kernel over the valid region. Its adjoint
is the full convolution folded back onto the original pixels through the
same padding index map, so ``<T u, v> = <u, T* v>`` holds to rounding
error at every boundary.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
from scipy import signal

_PAD_MODES = {"symmetric": "symmetric", "mirror": "symmetric", "periodic": "wrap", "wrap": "wrap", "zero": "constant"}


class LinearOperator:
    """Base class. Subclasses implement :meth:`apply` and :meth:`adjoint`."""

    is_identity = False

    def apply(self, u):
        raise NotImplementedError

    def adjoint(self, v):
        raise NotImplementedError

    def to_sparse(self, shape):
        """Matrix of the operator acting on row-major flattened images."""
        raise NotImplementedError

    def __call__(self, u):
        return self.apply(u)


class Identity(LinearOperator):
    is_identity = True

    def apply(self, u):
        return np.asarray(u, dtype=np.float64)

    def adjoint(self, v):
        return np.asarray(v, dtype=np.float64)

    def to_sparse(self, shape):
        n = shape[0] * shape[1]
        return sp.identity(n, format="csr")

    def __repr__(self):
        return "Identity()"


def _index_map(n, r, mode):
    """Index of the source pixel for each of the ``n + 2r`` padded positions.

    Zero padding maps to -1.
    """
    if mode == "constant":
        idx = np.arange(-r, n + r)
        idx[(idx < 0) | (idx >= n)] = -1
        return idx
    return np.pad(np.arange(n), r, mode=mode)


class Convolution(LinearOperator):
    """Correlation with a small odd-sized kernel under a padding rule.

    Parameters
    ----------
    kernel : (k1, k2) array with odd sides
    boundary : {"symmetric", "periodic", "zero"}
        ``symmetric`` is the half-sample mirror (``d c b a | a b c d``).
    """

    def __init__(self, kernel, boundary="symmetric"):
        k = np.asarray(kernel, dtype=np.float64)
        if k.ndim != 2 or k.shape[0] % 2 == 0 or k.shape[1] % 2 == 0:
            raise ValueError(f"kernel must be 2-D with odd sides, got shape {k.shape}")
        if boundary not in _PAD_MODES:
            raise ValueError(f"unknown boundary mode {boundary!r}")
        self.kernel = k
        self.boundary = boundary
        self._mode = _PAD_MODES[boundary]
        self._r = (k.shape[0] // 2, k.shape[1] // 2)
        self._maps = {}

    def _pad_maps(self, shape):
        if shape not in self._maps:
            self._maps[shape] = (
                _index_map(shape[0], self._r[0], self._mode),
                _index_map(shape[1], self._r[1], self._mode),
            )
        return self._maps[shape]

    def _pad(self, u):
        rows, cols = self._pad_maps(u.shape)
        padded = u[np.ix_(np.maximum(rows, 0), np.maximum(cols, 0))]
        if self._mode == "constant":
            padded = padded * np.outer(rows >= 0, cols >= 0)
        return padded

    def _fold(self, w, shape):
        rows, cols = self._pad_maps(shape)
        keep_r = rows >= 0
        keep_c = cols >= 0
        tmp = np.zeros((shape[0], w.shape[1]))
        np.add.at(tmp, rows[keep_r], w[keep_r, :])
        out = np.zeros(shape)
        np.add.at(out.T, cols[keep_c], tmp[:, keep_c].T)
        return out

    def apply(self, u):
        u = np.asarray(u, dtype=np.float64)
        return signal.correlate(self._pad(u), self.kernel, mode="valid", method="direct")

    def adjoint(self, v):
        v = np.asarray(v, dtype=np.float64)
        w = signal.convolve(v, self.kernel, mode="full", method="direct")
        return self._fold(w, v.shape)

    def to_sparse(self, shape):
        n1, n2 = shape
        rows, cols = self._pad_maps(shape)
        k1, k2 = self.kernel.shape
        out_i, out_j = np.meshgrid(np.arange(n1), np.arange(n2), indexing="ij")
        data, ri, ci = [], [], []
        for a in range(k1):
            for b in range(k2):
                w = self.kernel[a, b]
                if w == 0.0:
                    continue
                src_r = rows[out_i + a]
                src_c = cols[out_j + b]
                ok = (src_r >= 0) & (src_c >= 0)
                ri.append((out_i * n2 + out_j)[ok])
                ci.append((src_r * n2 + src_c)[ok])
                data.append(np.full(int(ok.sum()), w))
        mat = sp.coo_matrix(
            (np.concatenate(data), (np.concatenate(ri), np.concatenate(ci))), shape=(n1 * n2, n1 * n2)
        )
        return mat.tocsr()

    def absolute(self):
        return Convolution(np.abs(self.kernel), self.boundary)

    def __repr__(self):
        return f"Convolution(kernel_shape={self.kernel.shape}, boundary={self.boundary!r})"


def gaussian_kernel(size, std):
    """Normalized ``size x size`` Gaussian kernel."""
    if size < 1 or size % 2 == 0:
        raise ValueError(f"kernel size must be a positive odd integer, got {size}")
    if not std > 0:
        raise ValueError(f"kernel std must be positive, got {std}")
    r = size // 2
    x = np.arange(-r, r + 1, dtype=np.float64)
    k = np.exp(-(x[:, None] ** 2 + x[None, :] ** 2) / (2.0 * std**2))
    return k / k.sum()


class GaussianBlur(Convolution):
    def __init__(self, size=5, std=10.0, boundary="symmetric"):
        super().__init__(gaussian_kernel(size, std), boundary)
        self.size = size
        self.std = std

    def __repr__(self):
        return f"GaussianBlur(size={self.size}, std={self.std}, boundary={self.boundary!r})"


class DenseOperator(LinearOperator):
    """Explicit ``N x N`` matrix acting on row-major flattened ``shape`` images."""

    def __init__(self, matrix, shape):
        m = np.asarray(matrix, dtype=np.float64)
        n = shape[0] * shape[1]
        if m.shape != (n, n):
            raise ValueError(f"matrix shape {m.shape} does not match image size {n}")
        self.matrix = m
        self.shape = tuple(shape)

    def _check(self, u):
        u = np.asarray(u, dtype=np.float64)
        if u.shape != self.shape:
            raise ValueError(f"shape mismatch: operator {self.shape} vs input {u.shape}")
        return u

    def apply(self, u):
        return (self.matrix @ self._check(u).ravel()).reshape(self.shape)

    def adjoint(self, v):
        return (self.matrix.T @ self._check(v).ravel()).reshape(self.shape)

    def to_sparse(self, shape):
        return sp.csr_matrix(self.matrix)

    def absolute(self):
        return DenseOperator(np.abs(self.matrix), self.shape)


def make_operator(spec):
    """Build an operator from a config mapping (or pass an operator through).

    ``{"kind": "identity"}``, ``{"kind": "gaussian", "size": 5, "std": 10,
    "boundary": "symmetric"}`` or ``{"kind": "kernel", "kernel": [[...]]}``.
    """
    if spec is None:
        return Identity()
    if isinstance(spec, LinearOperator):
        return spec
    kind = spec.get("kind", "identity")
    if kind == "identity":
        return Identity()
    if kind in ("gaussian", "blur"):
        return GaussianBlur(int(spec.get("size", 5)), float(spec.get("std", 10.0)), spec.get("boundary", "symmetric"))
    if kind == "kernel":
        return Convolution(spec["kernel"], spec.get("boundary", "symmetric"))
    raise ValueError(f"unknown operator kind {kind!r}")


def norm_sq_estimate(T, shape=(64, 64), max_iter=100, rtol=1e-8, safety=1.01, seed=0):
    """Upper estimate of ``||T||^2`` by power iteration on ``T* T``.

    If the iteration has not settled after ``max_iter`` steps the
    conservative bound ``||T||_1 * ||T||_inf`` is returned instead.
    """
    if T is None or T.is_identity:
        return safety
    if isinstance(T, DenseOperator):
        shape = T.shape
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(shape)
    x /= np.linalg.norm(x)
    lam = 0.0
    for _ in range(max_iter):
        y = T.adjoint(T.apply(x))
        lam_new = float(np.vdot(x, y))
        ny = np.linalg.norm(y)
        if ny == 0.0:
            return safety * max(lam_new, 0.0)
        x = y / ny
        if lam_new > 0 and abs(lam_new - lam) <= rtol * lam_new:
            # the Rayleigh quotient underestimates; ||T* T x|| is the sharper value
            return safety * max(lam_new, ny)
        lam = lam_new
    return _abs_bound(T, shape)


def _abs_bound(T, shape):
    A = T.absolute()
    ones = np.ones(shape)
    return float(np.max(A.apply(ones)) * np.max(A.adjoint(ones)))
