"""Concrete operator subspaces of M_n, linear maps between them, and
matrix-level / completely bounded norm estimates.

A d x d block over a subspace with basis ``b_1..b_k`` is parametrised by a
coefficient tensor ``C`` of shape ``(k, d, d)``: the block is
``sum_k kron(C[k], b_k)``.  The cb-norm search maximises
``||sum_k kron(C[k], phi(b_k))|| / ||sum_k kron(C[k], b_k)||`` over ``C`` at
level ``d`` equal to the codomain size, where Smith's lemma makes the level-d
norm equal to the cb norm.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Sequence

import numpy as np
from scipy.linalg.lapack import zheevr
from scipy.optimize import minimize

from . import matrix_core as mc
from .config import DEFAULT, Tolerances
from .errors import NotInSpanError, SchemaError
from .seeds import rng_for

MAX_ITER = 500


@dataclass(frozen=True, eq=False)
class OperatorSubspace:
    ambient_dim: int
    basis: tuple
    is_unital_algebra: bool = False
    tol: Tolerances = field(default=DEFAULT, repr=False)

    def __post_init__(self):
        basis = tuple(mc.as_matrix(b, square=True) for b in self.basis)
        if not basis:
            raise ValueError("basis must be non-empty")
        n = self.ambient_dim
        if any(b.shape != (n, n) for b in basis):
            raise mc.DimensionError(f"basis elements must be {n}x{n}")
        object.__setattr__(self, "basis", basis)
        vecs = self._vecs
        s = np.linalg.svd(vecs, compute_uv=False)
        if s[-1] <= self.tol.span * s[0]:
            raise ValueError(f"basis is linearly dependent (sigma ratio {s[-1] / s[0]:.2e})")
        if self.is_unital_algebra:
            res = self.residual(np.eye(n))
            if res > self.tol.span * np.sqrt(n):
                raise ValueError(f"identity not in span (residual {res:.2e})")
            for bi in basis:
                for bj in basis:
                    prod = bi @ bj
                    res = self.residual(prod)
                    if res > self.tol.span * (1 + np.linalg.norm(prod)):
                        raise ValueError(f"span not closed under products (residual {res:.2e})")

    @property
    def dim(self) -> int:
        return len(self.basis)

    @cached_property
    def stack(self) -> np.ndarray:
        return np.array(self.basis)

    @cached_property
    def _vecs(self) -> np.ndarray:
        return np.array([b.ravel() for b in self.basis]).T

    @cached_property
    def _pinv(self) -> np.ndarray:
        return np.linalg.pinv(self._vecs)

    def residual(self, m) -> float:
        v = np.asarray(m, dtype=complex).ravel()
        c = self._pinv @ v
        return float(np.linalg.norm(self._vecs @ c - v))

    def coordinates(self, m) -> np.ndarray:
        a = mc.as_matrix(m, square=True)
        if a.shape[0] != self.ambient_dim:
            raise mc.DimensionError(f"expected {self.ambient_dim}x{self.ambient_dim}, got {a.shape}")
        v = a.ravel()
        c = self._pinv @ v
        res = float(np.linalg.norm(self._vecs @ c - v))
        tol = self.tol.coordinates * (1 + mc.op_norm(a))
        if res > tol:
            raise NotInSpanError(res, tol)
        return c

    def contains(self, m) -> bool:
        try:
            self.coordinates(m)
        except NotInSpanError:
            return False
        return True

    def element(self, coeffs) -> np.ndarray:
        return np.tensordot(np.asarray(coeffs, dtype=complex), self.stack, axes=1)

    def block_from_coefficients(self, coeffs: np.ndarray) -> np.ndarray:
        """Block matrix ``sum_k kron(coeffs[k], b_k)``."""
        return kron_sum(coeffs, self.stack)

    def grid_coefficients(self, grid) -> np.ndarray:
        """Coefficient tensor ``(k, d, d)`` of a ``(d, d, n, n)`` grid."""
        grid = np.asarray(grid, dtype=complex)
        d = grid.shape[0]
        out = np.empty((self.dim, d, d), dtype=complex)
        for i in range(d):
            for j in range(d):
                out[:, i, j] = self.coordinates(grid[i, j])
        return out

    def conjugated(self, x: np.ndarray, x_inv: np.ndarray | None = None) -> "OperatorSubspace":
        """The subspace ``x S x^{-1}`` with the conjugated basis."""
        if x_inv is None:
            x_inv = mc.inverse(x)
        return OperatorSubspace(
            self.ambient_dim,
            tuple(x @ b @ x_inv for b in self.basis),
            self.is_unital_algebra,
            self.tol,
        )

    def adjoint(self) -> "OperatorSubspace":
        return OperatorSubspace(
            self.ambient_dim,
            tuple(b.conj().T for b in self.basis),
            self.is_unital_algebra,
            self.tol,
        )

    @classmethod
    def full(cls, n: int) -> "OperatorSubspace":
        basis = []
        for i in range(n):
            for j in range(n):
                e = np.zeros((n, n), dtype=complex)
                e[i, j] = 1
                basis.append(e)
        return cls(n, tuple(basis), True)

    @classmethod
    def scalars(cls, n: int) -> "OperatorSubspace":
        return cls(n, (np.eye(n, dtype=complex),), True)

    @classmethod
    def diagonal(cls, n: int) -> "OperatorSubspace":
        basis = []
        for i in range(n):
            e = np.zeros((n, n), dtype=complex)
            e[i, i] = 1
            basis.append(e)
        return cls(n, tuple(basis), True)

    def to_json(self) -> dict:
        return {
            "ambient_dim": self.ambient_dim,
            "basis": [mc.matrix_to_json(b) for b in self.basis],
            "unital_algebra": bool(self.is_unital_algebra),
        }

    @classmethod
    def from_json(cls, obj, path: str = "space", tol: Tolerances = DEFAULT) -> "OperatorSubspace":
        if not isinstance(obj, dict):
            raise SchemaError(path, "expected an object")
        if not isinstance(obj.get("ambient_dim"), int):
            raise SchemaError(f"{path}.ambient_dim", "missing or not an integer")
        if not isinstance(obj.get("basis"), list) or not obj["basis"]:
            raise SchemaError(f"{path}.basis", "expected a non-empty list of matrices")
        basis = [mc.matrix_from_json(b, f"{path}.basis[{k}]") for k, b in enumerate(obj["basis"])]
        try:
            return cls(obj["ambient_dim"], tuple(basis), bool(obj.get("unital_algebra", False)), tol)
        except (ValueError, mc.DimensionError) as exc:
            raise SchemaError(path, str(exc)) from exc


def kron_sum(coeffs: np.ndarray, mats: np.ndarray) -> np.ndarray:
    """``sum_k kron(coeffs[k], mats[k])`` for coeffs ``(k, d, d)``, mats ``(k, n, n)``."""
    k, d, _ = coeffs.shape
    n = mats.shape[1]
    prod = coeffs.reshape(k, d * d).T @ mats.reshape(k, n * n)
    return prod.reshape(d, d, n, n).transpose(0, 2, 1, 3).reshape(d * n, d * n)


@dataclass(frozen=True, eq=False)
class CBLinearMap:
    domain: OperatorSubspace
    codomain: OperatorSubspace
    images: tuple
    unital: bool = False
    multiplicative: bool = False

    def __post_init__(self):
        images = tuple(mc.as_matrix(m, square=True) for m in self.images)
        object.__setattr__(self, "images", images)
        if len(images) != self.domain.dim:
            raise ValueError(f"{len(images)} images for a {self.domain.dim}-dimensional domain")
        tol = self.domain.tol
        for k, m in enumerate(images):
            if m.shape[0] != self.codomain.ambient_dim:
                raise mc.DimensionError(f"image {k} has shape {m.shape}")
            res = self.codomain.residual(m)
            if res > tol.span * (1 + np.linalg.norm(m)):
                raise NotInSpanError(res, tol.span)
        if self.unital:
            img = self.apply(np.eye(self.domain.ambient_dim))
            res = float(np.linalg.norm(img - np.eye(self.codomain.ambient_dim)))
            if res > tol.span * np.sqrt(self.codomain.ambient_dim):
                raise ValueError(f"map is not unital (residual {res:.2e})")
        if self.multiplicative:
            worst = self.multiplicativity_residual()
            if worst > tol.multiplicative:
                raise ValueError(f"map is not multiplicative (residual {worst:.2e})")

    @cached_property
    def image_stack(self) -> np.ndarray:
        return np.array(self.images)

    def multiplicativity_residual(self) -> float:
        worst = 0.0
        for bi, fi in zip(self.domain.basis, self.images):
            for bj, fj in zip(self.domain.basis, self.images):
                lhs = self.apply(bi @ bj)
                worst = max(worst, float(np.linalg.norm(lhs - fi @ fj)) / (1 + np.linalg.norm(lhs)))
        return worst

    def apply(self, m) -> np.ndarray:
        return self.codomain_element(self.domain.coordinates(m))

    def codomain_element(self, coeffs) -> np.ndarray:
        return np.tensordot(np.asarray(coeffs, dtype=complex), self.image_stack, axes=1)

    def apply_level(self, grid) -> np.ndarray:
        """Apply the map entrywise to a ``(d, d, n, n)`` grid (or nested list)."""
        g = np.asarray(grid, dtype=complex)
        if g.ndim != 4:
            raise mc.DimensionError("expected a d x d grid of matrices")
        coeffs = self.domain.grid_coefficients(g)
        return np.einsum("kij,kab->ijab", coeffs, self.image_stack)

    def inverse(self) -> "CBLinearMap":
        """Inverse map; requires the images to span the codomain bijectively."""
        if self.codomain.dim != self.domain.dim:
            raise ValueError("map is not bijective onto its codomain")
        # express codomain basis in terms of images
        img_coords = np.array([self.codomain.coordinates(m) for m in self.images]).T
        if np.linalg.cond(img_coords) > 1 / self.domain.tol.span:
            raise ValueError("map is not injective")
        back = np.linalg.solve(img_coords, np.eye(self.domain.dim))
        new_images = tuple(np.tensordot(back[:, k], self.domain.stack, axes=1) for k in range(self.codomain.dim))
        return CBLinearMap(self.codomain, self.domain, new_images, self.unital, self.multiplicative)

    def conjugated(self, x=None, y=None) -> "CBLinearMap":
        """The map ``x a x^{-1} -> y f(a) y^{-1}``; ``None`` means identity."""
        dom = self.domain if x is None else self.domain.conjugated(x)
        if y is None:
            cod, images = self.codomain, self.images
        else:
            y_inv = mc.inverse(y)
            cod = self.codomain.conjugated(y, y_inv)
            images = tuple(y @ m @ y_inv for m in self.images)
        return CBLinearMap(dom, cod, images, self.unital, self.multiplicative)

    def compose(self, other: "CBLinearMap") -> "CBLinearMap":
        """``self o other``."""
        images = tuple(self.apply(m) for m in other.images)
        return CBLinearMap(
            other.domain,
            self.codomain,
            images,
            self.unital and other.unital,
            self.multiplicative and other.multiplicative,
        )

    def adjoint_map(self) -> "CBLinearMap":
        """The map ``t* -> f(t)*`` on the adjoint subspace."""
        return CBLinearMap(
            self.domain.adjoint(),
            self.codomain.adjoint(),
            tuple(m.conj().T for m in self.images),
            self.unital,
            self.multiplicative,
        )

    @classmethod
    def from_function(cls, domain, codomain, fn: Callable, unital=False, multiplicative=False):
        return cls(domain, codomain, tuple(fn(b) for b in domain.basis), unital, multiplicative)

    @classmethod
    def identity(cls, space: OperatorSubspace) -> "CBLinearMap":
        return cls(space, space, space.basis, space.is_unital_algebra, space.is_unital_algebra)

    @classmethod
    def conjugation(cls, space: OperatorSubspace, t) -> "CBLinearMap":
        """``a -> t a t^{-1}`` from ``space`` onto ``t space t^{-1}``."""
        t = mc.check_invertible(t)
        t_inv = np.linalg.inv(t)
        cod = space.conjugated(t, t_inv)
        return cls(space, cod, cod.basis, space.is_unital_algebra, space.is_unital_algebra)

    def to_json(self) -> dict:
        return {
            "domain": self.domain.to_json(),
            "codomain": self.codomain.to_json(),
            "images": [mc.matrix_to_json(m) for m in self.images],
        }

    @classmethod
    def from_json(cls, obj, path: str = "map", tol: Tolerances = DEFAULT) -> "CBLinearMap":
        if not isinstance(obj, dict):
            raise SchemaError(path, "expected an object")
        for key in ("domain", "codomain", "images"):
            if key not in obj:
                raise SchemaError(f"{path}.{key}", "missing field")
        dom = OperatorSubspace.from_json(obj["domain"], f"{path}.domain", tol)
        cod = OperatorSubspace.from_json(obj["codomain"], f"{path}.codomain", tol)
        if not isinstance(obj["images"], list):
            raise SchemaError(f"{path}.images", "expected a list of matrices")
        images = [mc.matrix_from_json(m, f"{path}.images[{k}]") for k, m in enumerate(obj["images"])]
        unital = bool(dom.is_unital_algebra and cod.is_unital_algebra)
        try:
            f = cls(dom, cod, tuple(images))
        except (ValueError, mc.DimensionError) as exc:
            raise SchemaError(f"{path}.images", str(exc)) from exc
        # flags are inferred, never trusted from the document
        if unital:
            try:
                f = cls(dom, cod, tuple(images), True, False)
            except ValueError:
                return f
            try:
                f = cls(dom, cod, tuple(images), True, True)
            except ValueError:
                pass
        return f


def level_norm(space: OperatorSubspace, grid) -> float:
    """Norm of a d x d grid over ``space`` (entries must lie in the span)."""
    g = np.asarray(grid, dtype=complex)
    if g.ndim != 4:
        raise mc.DimensionError("expected a d x d grid of matrices")
    for i in range(g.shape[0]):
        for j in range(g.shape[1]):
            space.coordinates(g[i, j])
    return mc.op_norm(mc.assemble_block(g))


def apply_map_level(f: CBLinearMap, grid) -> np.ndarray:
    return f.apply_level(grid)


# --- cb norm search -------------------------------------------------------


@dataclass
class CBEstimate:
    lower: float
    level_used: int
    witness: np.ndarray  # (d, d, n, n) grid over the domain, unit norm
    restart_values: list = field(default_factory=list)


def _top_singular(m: np.ndarray):
    # top eigenpair of m^* m is cheaper than a full SVD at these sizes
    k = m.shape[1]
    w, v, _, _, info = zheevr(m.conj().T @ m, range="I", il=k, iu=k)
    if info != 0:
        u, sv, vh = np.linalg.svd(m)
        return sv[0], u[:, 0], vh[0].conj()
    s = float(np.sqrt(max(w[0], 0.0)))
    v = v[:, 0]
    u = m @ v / s if s > 0 else np.zeros(m.shape[0], dtype=complex)
    return s, u, v


def _grad_sigma(u, v, mats, d):
    # d sigma / d C[k,i,j] = u_i^* M_k v_j (as a complex gradient)
    m = mats.shape[1]
    return u.reshape(d, m).conj() @ mats @ v.reshape(d, m).T


class _Ratio:
    """log ||out|| - log ||in|| as a function of the real parametrisation."""

    def __init__(self, dom: np.ndarray, img: np.ndarray, d: int):
        self.dom, self.img, self.d = dom, img, d
        self.shape = (dom.shape[0], d, d)
        self.size = int(np.prod(self.shape))

    def coeffs(self, x: np.ndarray) -> np.ndarray:
        return (x[: self.size] + 1j * x[self.size :]).reshape(self.shape)

    def ratio(self, c: np.ndarray) -> float:
        a = mc.op_norm(kron_sum(c, self.img))
        b = mc.op_norm(kron_sum(c, self.dom))
        return a / b

    def __call__(self, x: np.ndarray):
        c = self.coeffs(x)
        so, uo, vo = _top_singular(kron_sum(c, self.img))
        si, ui, vi = _top_singular(kron_sum(c, self.dom))
        if si <= 0.0 or so <= 0.0:
            return 0.0, np.zeros_like(x)
        g = _grad_sigma(uo, vo, self.img, self.d) / so - _grad_sigma(ui, vi, self.dom, self.d) / si
        val = np.log(so) - np.log(si)
        grad = np.concatenate([g.real.ravel(), -g.imag.ravel()])
        return -val, -grad


def _start(rng: np.random.Generator, k: int, d: int, index: int) -> np.ndarray:
    def cn(*shape):
        return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)

    if index % 2 == 0:
        return cn(k, d, d)
    # rank-one coefficient pattern C[k] = alpha_k p q^T
    return np.einsum("k,i,j->kij", cn(k), cn(d), cn(d))


def cb_norm_estimate(f: CBLinearMap, budget: int = 8, seed: int = 0, level: int | None = None) -> CBEstimate:
    """Certified lower bound on ``||f||_cb`` by seeded multistart ascent.

    Each restart ``i`` draws its start from a generator keyed by ``(seed, i)``,
    so a larger budget only adds restarts and the estimate is nondecreasing
    in ``budget``.
    """
    if budget < 1:
        raise ValueError("budget must be >= 1")
    d = level or f.codomain.ambient_dim
    k = f.domain.dim
    obj = _Ratio(f.domain.stack, f.image_stack, d)
    best_val, best_c, values = -np.inf, None, []
    if f.domain.contains(np.eye(f.domain.ambient_dim)):
        # I_d is always admissible; for unital maps it certifies lower >= 1
        ident = f.domain.coordinates(np.eye(f.domain.ambient_dim))
        best_c = np.einsum("k,ij->kij", ident, np.eye(d))
        best_val = obj.ratio(best_c)
    for i in range(budget):
        # keyed by restart index so that budgets are nested
        rng = rng_for(seed, i)
        c0 = _start(rng, k, d, i)
        x0 = np.concatenate([c0.real.ravel(), c0.imag.ravel()])
        res = minimize(obj, x0, jac=True, method="L-BFGS-B", options={"maxiter": MAX_ITER, "gtol": 1e-10, "ftol": 1e-12})
        c = obj.coeffs(res.x)
        val = obj.ratio(c)
        c0_val = obj.ratio(c0)
        if c0_val > val:
            val, c = c0_val, c0
        values.append(val)
        if val > best_val:
            best_val, best_c = val, c
    best_c = best_c / mc.op_norm(kron_sum(best_c, f.domain.stack))
    witness = np.einsum("kij,kab->ijab", best_c, f.domain.stack)
    lower = obj.ratio(best_c)
    return CBEstimate(float(lower), d, witness, values)


@dataclass
class ContractivityVerdict:
    verdict: bool
    worst_ratio: float
    witness: np.ndarray


def is_completely_contractive(f: CBLinearMap, tol: float = 1e-6, budget: int = 8, seed: int = 0) -> ContractivityVerdict:
    est = cb_norm_estimate(f, budget, seed)
    return ContractivityVerdict(est.lower <= 1 + tol, est.lower, est.witness)


def grid_ratio(f: CBLinearMap, grid) -> float:
    """``||f_d(grid)|| / ||grid||`` for a single block."""
    g = np.asarray(grid, dtype=complex)
    return mc.op_norm(mc.assemble_block(f.apply_level(g))) / mc.op_norm(mc.assemble_block(g))


def subspace_from_matrices(n: int, mats: Sequence, unital_algebra: bool = False) -> OperatorSubspace:
    return OperatorSubspace(n, tuple(mats), unital_algebra)
