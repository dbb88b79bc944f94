"""Dense complex linear algebra shared by every engine.

Matrices are plain ``numpy`` arrays of dtype ``complex128``.  The helpers
here only validate shapes/finiteness and add the error types the rest of the
package relies on; the numerics are LAPACK through numpy.
"""
from __future__ import annotations

from typing import Sequence

import numpy as np

SINGULAR_RTOL = 1e-12


class DimensionError(ValueError):
    """Raised when matrix shapes are incompatible with an operation."""


class SingularityError(np.linalg.LinAlgError):
    """Raised for numerically singular matrices.

    ``sigma_min`` and ``sigma_max`` carry the offending singular values.
    """

    def __init__(self, sigma_min: float, sigma_max: float, rtol: float = SINGULAR_RTOL):
        self.sigma_min = float(sigma_min)
        self.sigma_max = float(sigma_max)
        self.rtol = rtol
        super().__init__(
            f"matrix is numerically singular: sigma_min={sigma_min:.3e}, "
            f"sigma_max={sigma_max:.3e} (relative threshold {rtol:g})"
        )


def as_matrix(m, *, square: bool = False) -> np.ndarray:
    """Coerce ``m`` to a finite 2-D complex array."""
    a = np.asarray(m, dtype=complex)
    if a.ndim != 2 or a.shape[0] == 0 or a.shape[1] == 0:
        raise DimensionError(f"expected a non-empty 2-D matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    if square and a.shape[0] != a.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {a.shape}")
    return a


def op_norm(m) -> float:
    """Largest singular value."""
    return float(np.linalg.norm(as_matrix(m), 2))


def op_norms(stack: np.ndarray) -> np.ndarray:
    """Operator norms of a stack of matrices (last two axes)."""
    stack = np.asarray(stack)
    return np.linalg.svd(stack, compute_uv=False)[..., 0]


def is_triangular(m: np.ndarray) -> bool:
    return not np.any(np.tril(m, -1)) or not np.any(np.triu(m, 1))


def eigenvalues(m) -> np.ndarray:
    """Eigenvalues; exact diagonal read-off for triangular input."""
    a = as_matrix(m, square=True)
    if is_triangular(a):
        return np.diag(a).copy()
    return np.linalg.eigvals(a)


def spectral_radius(m) -> float:
    return float(np.max(np.abs(eigenvalues(m))))


def singular_values(m) -> np.ndarray:
    return np.linalg.svd(as_matrix(m), compute_uv=False)


def check_invertible(m, rtol: float = SINGULAR_RTOL) -> np.ndarray:
    """Return ``m`` as a square matrix or raise :class:`SingularityError`."""
    a = as_matrix(m, square=True)
    s = singular_values(a)
    if s[-1] <= rtol * s[0]:
        raise SingularityError(s[-1], s[0], rtol)
    return a


def inverse(m, rtol: float = SINGULAR_RTOL) -> np.ndarray:
    return np.linalg.inv(check_invertible(m, rtol))


def condition(m, rtol: float = SINGULAR_RTOL) -> float:
    """``||m|| ||m^{-1}||`` computed as sigma_max / sigma_min."""
    a = as_matrix(m, square=True)
    s = singular_values(a)
    if s[-1] <= rtol * s[0]:
        raise SingularityError(s[-1], s[0], rtol)
    return float(s[0] / s[-1])


def balanced(x) -> np.ndarray:
    """Rescale an invertible matrix so that ``||x|| == ||x^{-1}||``."""
    a = check_invertible(x)
    s = singular_values(a)
    return a / np.sqrt(s[0] * s[-1])


def assemble_block(grid) -> np.ndarray:
    """Assemble a d x d grid of equally sized square blocks into one matrix.

    ``grid`` may be a nested sequence of matrices or an array of shape
    ``(d, d, n, n)``.
    """
    if isinstance(grid, np.ndarray) and grid.ndim == 4:
        arr = grid.astype(complex, copy=False)
    else:
        rows = list(grid)
        d = len(rows)
        if d == 0 or any(len(r) != d for r in rows):
            raise DimensionError("block grid must be square and non-empty")
        shapes = {np.shape(b) for r in rows for b in r}
        if len(shapes) != 1:
            raise DimensionError(f"ragged block grid, block shapes {sorted(shapes)}")
        arr = np.array([[as_matrix(b) for b in r] for r in rows])
    d, d2, n, n2 = arr.shape
    if d != d2 or n != n2:
        raise DimensionError(f"grid must be d x d of n x n blocks, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("block grid has non-finite entries")
    return arr.transpose(0, 2, 1, 3).reshape(d * n, d * n)


def split_block(m: np.ndarray, d: int) -> np.ndarray:
    """Inverse of :func:`assemble_block`: return shape ``(d, d, n, n)``."""
    a = as_matrix(m, square=True)
    if a.shape[0] % d:
        raise DimensionError(f"size {a.shape[0]} is not divisible by {d}")
    n = a.shape[0] // d
    return a.reshape(d, n, d, n).transpose(0, 2, 1, 3)


def conjugate_grid(grid: np.ndarray, x: np.ndarray, x_inv: np.ndarray | None = None) -> np.ndarray:
    """Entrywise ``x g x^{-1}`` on a ``(d, d, n, n)`` grid."""
    if x_inv is None:
        x_inv = inverse(x)
    return np.einsum("ab,ijbc,cd->ijad", x, grid, x_inv)


def random_unitary(n: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed unitary via QR with phase correction."""
    z = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    ph = np.diag(r) / np.abs(np.diag(r))
    return q * ph


def random_invertible(n: int, rng: np.random.Generator, kappa: float = 4.0) -> np.ndarray:
    """Random ``U diag(s) V`` with singular values spread over ``[1, kappa]``."""
    s = np.exp(rng.uniform(0.0, np.log(kappa), size=n))
    s[0], s[-1] = 1.0, kappa
    return random_unitary(n, rng) @ np.diag(s) @ random_unitary(n, rng)


def matrix_to_json(m) -> dict:
    a = as_matrix(m)
    return {
        "rows": int(a.shape[0]),
        "cols": int(a.shape[1]),
        "data": [[float(z.real), float(z.imag)] for z in a.ravel()],
    }


def matrix_from_json(obj: dict, path: str = "matrix") -> np.ndarray:
    from .errors import SchemaError

    if not isinstance(obj, dict):
        raise SchemaError(path, "expected an object with rows/cols/data")
    for key in ("rows", "cols", "data"):
        if key not in obj:
            raise SchemaError(f"{path}.{key}", "missing field")
    rows, cols, data = obj["rows"], obj["cols"], obj["data"]
    if not (isinstance(rows, int) and isinstance(cols, int) and rows > 0 and cols > 0):
        raise SchemaError(f"{path}.rows", "rows and cols must be positive integers")
    if not isinstance(data, list) or len(data) != rows * cols:
        raise SchemaError(f"{path}.data", f"expected {rows * cols} entries")
    vals = []
    for k, pair in enumerate(data):
        if (
            not isinstance(pair, (list, tuple))
            or len(pair) != 2
            or not all(isinstance(v, (int, float)) for v in pair)
        ):
            raise SchemaError(f"{path}.data[{k}]", "expected [re, im]")
        vals.append(complex(pair[0], pair[1]))
    a = np.array(vals, dtype=complex).reshape(rows, cols)
    if not np.all(np.isfinite(a)):
        raise SchemaError(f"{path}.data", "non-finite entry")
    return a


def stack(mats: Sequence) -> np.ndarray:
    return np.array([as_matrix(m) for m in mats])
