"""Finite Blaschke products and the compressed shift on their model space.

For roots ``lam_1, ..., lam_N`` (listed with multiplicity) the functions

    e_k(z) = sqrt(1 - |lam_k|^2) / (1 - conj(lam_k) z) * prod_{j<k} b_{lam_j}(z)

form an orthonormal basis of ``K_theta = H^2 ⊖ theta H^2``; they are the
Gram-Schmidt orthonormalisation of the (confluent) reproducing kernels taken
in root order.  In this basis the compressed shift is lower triangular with
the roots on the diagonal, which keeps the construction well conditioned
however the roots cluster.  The kernel Gram matrix is still assembled to
guard against configurations too clustered for finite precision.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import comb, factorial
from typing import Sequence, Union

import numpy as np
from numpy.polynomial import polynomial as P
from scipy.optimize import minimize

from . import matrix_core as mc
from .config import DEFAULT, Tolerances
from .conic import LMI, minimize_linear
from .errors import ConditioningError, OptimizerFailure, RepeatedRootError, SchemaError
from .operator_space import CBLinearMap, OperatorSubspace, cb_norm_estimate

ROOT_MARGIN = 1e-8


# --- Blaschke products --------------------------------------------------------


@dataclass(frozen=True)
class BlaschkeProduct:
    roots: tuple  # ((lam, multiplicity), ...)
    constant: complex = 1.0 + 0j

    def __post_init__(self):
        clean = []
        for item in self.roots:
            lam, mult = (item, 1) if np.isscalar(item) else item
            lam, mult = complex(lam), int(mult)
            if mult < 1:
                raise ValueError("multiplicities must be positive")
            if not abs(lam) <= 1 - ROOT_MARGIN:
                raise ValueError(f"root {lam} must satisfy |lam| <= 1 - {ROOT_MARGIN:g}")
            clean.append((lam, mult))
        if not clean:
            raise ValueError("need at least one root")
        if abs(abs(complex(self.constant)) - 1) > 1e-12:
            raise ValueError("unimodular constant must have modulus 1")
        object.__setattr__(self, "roots", tuple(clean))
        object.__setattr__(self, "constant", complex(self.constant))

    @classmethod
    def from_roots(cls, roots: Sequence, constant: complex = 1.0) -> "BlaschkeProduct":
        """Group a flat list of roots into (root, multiplicity) pairs (exact equality)."""
        grouped: dict = {}
        for lam in roots:
            lam = complex(lam)
            grouped[lam] = grouped.get(lam, 0) + 1
        return cls(tuple(grouped.items()), constant)

    @property
    def degree(self) -> int:
        return sum(m for _, m in self.roots)

    @property
    def sequence(self) -> list[complex]:
        """Roots listed with multiplicity, in construction order."""
        return [lam for lam, m in self.roots for _ in range(m)]

    @property
    def simple(self) -> bool:
        return all(m == 1 for _, m in self.roots)

    def numerator(self) -> np.ndarray:
        """Ascending coefficients of ``constant * prod (z - lam)^m``."""
        return self.constant * P.polyfromroots(self.sequence)

    def denominator(self) -> np.ndarray:
        """Ascending coefficients of ``prod (1 - conj(lam) z)^m``."""
        out = np.array([1.0 + 0j])
        for lam in self.sequence:
            out = P.polymul(out, [1.0, -np.conj(lam)])
        return out

    def reduced(self, index: int) -> "BlaschkeProduct | None":
        """The product with one copy of ``sequence[index]`` removed (None if empty)."""
        seq = self.sequence
        rest = seq[:index] + seq[index + 1 :]
        return BlaschkeProduct.from_roots(rest) if rest else None

    def to_json(self) -> dict:
        return {
            "roots": [{"re": lam.real, "im": lam.imag, "mult": m} for lam, m in self.roots],
            "constant": [self.constant.real, self.constant.imag],
        }

    @classmethod
    def from_json(cls, doc, path: str = "theta") -> "BlaschkeProduct":
        if not isinstance(doc, dict):
            raise SchemaError(path, "expected an object")
        roots = doc.get("roots")
        if not isinstance(roots, list) or not roots:
            raise SchemaError(f"{path}.roots", "expected a non-empty list")
        parsed = []
        for i, r in enumerate(roots):
            where = f"{path}.roots[{i}]"
            if not isinstance(r, dict):
                raise SchemaError(where, "expected an object with re, im, mult")
            try:
                lam = complex(float(r.get("re", 0.0)), float(r.get("im", 0.0)))
                mult = r.get("mult", 1)
            except (TypeError, ValueError):
                raise SchemaError(where, "re and im must be numbers") from None
            if not isinstance(mult, int) or isinstance(mult, bool) or mult < 1:
                raise SchemaError(f"{where}.mult", "expected a positive integer")
            if not abs(lam) <= 1 - ROOT_MARGIN:
                raise SchemaError(where, f"root must satisfy |lam| <= 1 - {ROOT_MARGIN:g}")
            parsed.append((lam, mult))
        const = doc.get("constant", [1.0, 0.0])
        try:
            c = complex(float(const[0]), float(const[1]))
        except (TypeError, ValueError, IndexError, KeyError):
            raise SchemaError(f"{path}.constant", "expected [re, im]") from None
        if abs(abs(c) - 1) > 1e-12:
            raise SchemaError(f"{path}.constant", "must have modulus 1")
        return cls(tuple(parsed), c)


def blaschke_factor(lam: complex, z):
    z = np.asarray(z, dtype=complex)
    return (z - lam) / (1 - np.conj(lam) * z)


def blaschke_eval(theta: BlaschkeProduct, z):
    """``theta(z)`` for scalar or array z in the closed disc."""
    z = np.asarray(z, dtype=complex)
    if np.any(np.abs(z) > 1 + 1e-12):
        raise ValueError("z must lie in the closed unit disc")
    out = np.full(z.shape, theta.constant, dtype=complex)
    for lam, m in theta.roots:
        out = out * blaschke_factor(lam, z) ** m
    return out if out.ndim else complex(out)


# --- model operator -----------------------------------------------------------


@dataclass(frozen=True)
class Rational:
    """``num / den`` with ascending coefficients; den must not vanish on the closed disc."""

    num: tuple
    den: tuple = (1.0,)


HInf = Union[Sequence, np.ndarray, Rational, BlaschkeProduct]


def kernel_gram(theta: BlaschkeProduct) -> np.ndarray:
    """Gram matrix ``G[a, b] = <k_b, k_a>`` of the normalised-derivative kernels.

    ``k_{lam, j}(z) = z^j / (1 - conj(lam) z)^{j+1}`` reproduces ``f^{(j)}(lam)/j!``.
    """
    index = [(lam, j) for lam, m in theta.roots for j in range(m)]
    size = len(index)
    g = np.empty((size, size), dtype=complex)
    for a, (lam, j) in enumerate(index):
        for b, (mu, l) in enumerate(index):
            # (1/l!) sum_r C(l,r) (j+l-r)!/(j-r)! conj(mu)^(j-r) lam^(l-r) / (1 - lam conj(mu))^(j+l-r+1)
            w = 1 - lam * np.conj(mu)
            tot = 0j
            for r in range(min(j, l) + 1):
                tot += (
                    comb(l, r)
                    * factorial(j + l - r)
                    / factorial(j - r)
                    * np.conj(mu) ** (j - r)
                    * lam ** (l - r)
                    / w ** (j + l - r + 1)
                )
            g[a, b] = tot / factorial(l)
    return g


@dataclass
class ModelOperator:
    theta: BlaschkeProduct
    S: np.ndarray
    basis_gram: np.ndarray = field(repr=False)
    gram_condition: float = float("nan")

    @property
    def N(self) -> int:
        return self.S.shape[0]


def compressed_shift(seq: Sequence[complex]) -> np.ndarray:
    """Matrix of the compressed shift in the basis e_1..e_N built from ``seq``.

    Lower triangular: ``S[i, i] = lam_i`` and for i > j
    ``S[i, j] = c_i c_j prod_{j<k<i} (-conj(lam_k))`` with ``c = sqrt(1 - |lam|^2)``.
    """
    lam = np.asarray(seq, dtype=complex)
    n = len(lam)
    c = np.sqrt(1 - np.abs(lam) ** 2)
    s = np.diag(lam)
    for j in range(n):
        run = 1.0 + 0j
        for i in range(j + 1, n):
            s[i, j] = c[i] * c[j] * run
            run *= -np.conj(lam[i])
    return s


def model_operator(theta: BlaschkeProduct, tol: Tolerances = DEFAULT) -> ModelOperator:
    """The compressed shift ``S_theta`` as an N x N matrix in an orthonormal basis."""
    gram = kernel_gram(theta)
    cond = float(np.linalg.cond(gram))
    if not cond <= tol.gram_condition:
        raise ConditioningError(cond, tol.gram_condition)
    return ModelOperator(theta, compressed_shift(theta.sequence), gram, cond)


def basis_eval(seq: Sequence[complex], z) -> np.ndarray:
    """``e_k(z)`` for every k; shape ``z.shape + (N,)``."""
    z = np.asarray(z, dtype=complex)
    lam = np.asarray(seq, dtype=complex)
    out = np.empty(z.shape + (len(lam),), dtype=complex)
    run = np.ones(z.shape, dtype=complex)
    for k, l in enumerate(lam):
        out[..., k] = np.sqrt(1 - abs(l) ** 2) / (1 - np.conj(l) * z) * run
        run = run * blaschke_factor(l, z)
    return out


# --- functional calculus ------------------------------------------------------


def _horner(coeffs, s: np.ndarray) -> np.ndarray:
    coeffs = np.atleast_1d(np.asarray(coeffs, dtype=complex))
    n = s.shape[0]
    out = np.zeros((n, n), dtype=complex)
    for c in coeffs[::-1]:
        out = out @ s
        out[np.diag_indices(n)] += c
    return out


def _operator(m) -> np.ndarray:
    return m.S if isinstance(m, ModelOperator) else mc.as_matrix(m, square=True)


def functional_calculus(u: HInf, m) -> np.ndarray:
    """``u(S)``: Horner for polynomials (ascending coefficients), ``num(S) den(S)^{-1}``
    for :class:`Rational`, the factor product for :class:`BlaschkeProduct`."""
    s = _operator(m)
    n = s.shape[0]
    if isinstance(u, BlaschkeProduct):
        out = u.constant * np.eye(n, dtype=complex)
        for lam, mult in u.roots:
            fac = np.linalg.solve((np.eye(n) - np.conj(lam) * s).T, (s - lam * np.eye(n)).T).T
            out = out @ np.linalg.matrix_power(fac, mult)
        return out
    if isinstance(u, Rational):
        den = _horner(u.den, s)
        return np.linalg.solve(den.T, _horner(u.num, s).T).T
    return _horner(u, s)


def _as_rational(u: HInf) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(u, BlaschkeProduct):
        return u.numerator(), u.denominator()
    if isinstance(u, Rational):
        return np.asarray(u.num, dtype=complex), np.asarray(u.den, dtype=complex)
    return np.atleast_1d(np.asarray(u, dtype=complex)), np.array([1.0 + 0j])


def evaluate(u: HInf, z):
    num, den = _as_rational(u)
    z = np.asarray(z, dtype=complex)
    return P.polyval(z, num) / P.polyval(z, den)


def _taylor(coeffs: np.ndarray, lam: complex, order: int) -> np.ndarray:
    """First ``order`` Taylor coefficients of a polynomial about lam."""
    out = np.zeros(order, dtype=complex)
    c = np.asarray(coeffs, dtype=complex)
    for j in range(order):
        if len(c) == 0:
            break
        out[j] = P.polyval(lam, c)
        c = P.polyder(c) / (j + 1) if len(c) > 1 else np.array([])
    return out


def polynomial_representative(u: HInf, theta: BlaschkeProduct) -> np.ndarray:
    """Coefficients (length N) of the polynomial r with ``r = u mod theta``.

    Polynomials are divided by the numerator of theta; rational inputs are
    reduced by Hermite interpolation of u at the roots to their multiplicity.
    """
    n = theta.degree
    if not isinstance(u, (Rational, BlaschkeProduct)):
        coeffs = np.atleast_1d(np.asarray(u, dtype=complex))
        rem = P.polydiv(coeffs, P.polyfromroots(theta.sequence))[1] if len(coeffs) > n else coeffs
        out = np.zeros(n, dtype=complex)
        out[: len(rem)] = rem
        return out
    num, den = _as_rational(u)
    rows, rhs = [], []
    for lam, mult in theta.roots:
        tn, td = _taylor(num, lam, mult), _taylor(den, lam, mult)
        if abs(td[0]) < 1e-14:
            raise ValueError("denominator vanishes at a root of theta")
        # series division tn / td
        q = np.zeros(mult, dtype=complex)
        for j in range(mult):
            q[j] = (tn[j] - np.dot(q[:j], td[j:0:-1])) / td[0]
        for j in range(mult):
            rows.append([comb(k, j) * lam ** (k - j) if k >= j else 0.0 for k in range(n)])
            rhs.append(q[j])
    return np.linalg.solve(np.array(rows, dtype=complex), np.array(rhs))


def quotient_norm_level(grid, m) -> float:
    """Norm of ``(u_ij(S))`` for a d x d grid (nested lists) of H-infinity elements."""
    rows = [[functional_calculus(u, m) for u in row] for row in grid]
    return mc.op_norm(mc.assemble_block(rows))


def _merge(values: np.ndarray, tol: float) -> list[complex]:
    out: list[complex] = []
    for v in sorted(values, key=lambda x: (round(x.real, 6), round(x.imag, 6))):
        if not any(abs(v - w) <= tol for w in out):
            out.append(complex(v))
    return out


def spectrum_quotient(u: HInf, theta: BlaschkeProduct, tol: Tolerances = DEFAULT) -> list[complex]:
    """Spectrum of the class ``u + theta H^inf``, i.e. the eigenvalues of u(S)."""
    m = model_operator(theta, tol)
    return _merge(mc.eigenvalues(functional_calculus(u, m)), tol.merge)


def is_quasinilpotent(u: HInf, theta: BlaschkeProduct, tol: float = DEFAULT.quasinilpotent) -> bool:
    spec = spectrum_quotient(u, theta)
    return max(abs(v) for v in spec) <= tol


def quasinilpotent_witness(theta: BlaschkeProduct) -> np.ndarray | None:
    """A polynomial whose class is quasi-nilpotent but nonzero, if one exists.

    ``prod_k (z - lam_k)`` over distinct roots vanishes at every root yet is not
    divisible by theta exactly when some root is repeated.
    """
    if theta.simple:
        return None
    return P.polyfromroots([lam for lam, _ in theta.roots])


# --- Carleson constant and diagonal similarity --------------------------------


def carleson_delta(theta: BlaschkeProduct) -> float:
    """``min_n prod_{k != n} |b_{lam_k}(lam_n)|`` for simple roots."""
    if not theta.simple:
        raise RepeatedRootError("carleson_delta needs simple roots")
    seq = theta.sequence
    if len(seq) == 1:
        return 1.0
    vals = [abs(blaschke_eval(theta.reduced(n), seq[n])) for n in range(len(seq))]
    return float(min(vals))


def carleson_table(theta: BlaschkeProduct) -> list[dict]:
    """Per-root rows: root, |u_n(lam_n)| for the reduced product u_n."""
    seq = theta.sequence
    rows = []
    for n, lam in enumerate(seq):
        red = theta.reduced(n)
        val = 1.0 if red is None else abs(blaschke_eval(red, lam))
        rows.append({"index": n, "re": lam.real, "im": lam.imag, "reduced_product_at_root": float(val)})
    return rows


@dataclass
class VasyuninResult:
    V: np.ndarray
    kappa: float
    delta_bound: float
    residual: float


def _best_row_scaling(v: np.ndarray) -> np.ndarray:
    """Positive weights p minimising cond(diag(sqrt p) V) (exact, via an SDP)."""
    n = v.shape[0]
    nv = n + 1
    gram_terms = np.einsum("ia,ib->iab", v.conj(), v)  # V^* e_i e_i^* V
    coef = np.zeros((nv, n, n), complex)
    coef[:n] = gram_terms
    top = np.zeros((nv, n, n), complex)
    top[-1] = np.eye(n)
    cost = np.zeros(nv)
    cost[-1] = 1.0
    x = minimize_linear(cost, [LMI(coef, -np.eye(n, dtype=complex)), LMI(top - coef, np.zeros((n, n), complex))])
    return np.maximum(x[:n], 0.0)


def _local_row_scaling(v: np.ndarray) -> np.ndarray:
    """Row weights from a direct Nelder-Mead search on log cond (first weight fixed)."""

    def obj(w):
        return np.log(np.linalg.cond(np.exp(0.5 * np.r_[0.0, w])[:, None] * v))

    res = minimize(obj, np.zeros(v.shape[0] - 1), method="Nelder-Mead", options={"xatol": 1e-10, "fatol": 1e-13, "maxiter": 20000})
    return np.exp(np.r_[0.0, res.x])


def vasyunin_similarity(theta: BlaschkeProduct, tol: Tolerances = DEFAULT) -> VasyuninResult:
    """V with ``V S V^{-1} = diag(roots)``, rows rescaled to minimise cond(V).

    Row n of V is the coordinate vector of the evaluation functional at
    ``lam_n``, ``V[n, i] = e_i(lam_n)``; then the diagonal row weights are
    chosen optimally.
    """
    if not theta.simple:
        raise RepeatedRootError("vasyunin_similarity needs simple roots")
    seq = theta.sequence
    model = model_operator(theta, tol)
    v = basis_eval(seq, np.asarray(seq))
    # a cheap normalisation first keeps the SDP well scaled
    v = v / np.linalg.norm(v, axis=1, keepdims=True)
    raw = float(np.linalg.cond(v))
    if not raw <= tol.gram_condition:
        raise ConditioningError(raw, tol.gram_condition, "eigenvector matrix")
    if len(seq) > 1:
        try:
            p = _best_row_scaling(v)
        except OptimizerFailure:
            # very clustered roots push t = kappa^2 past what the solver resolves
            p = _local_row_scaling(v)
        if np.all(p > 0):
            scaled = np.sqrt(p)[:, None] * v
            if np.linalg.cond(scaled) < raw:
                v = scaled
    d = np.diag(np.asarray(seq))
    resid = mc.op_norm(v @ model.S - d @ v) / max(1.0, mc.op_norm(v))
    kappa = mc.condition(v)
    return VasyuninResult(v, kappa, 1.0 / kappa, resid)


def evaluation_map(theta: BlaschkeProduct, tol: Tolerances = DEFAULT) -> CBLinearMap:
    """``u(S) -> u(D)``, the evaluation map onto the diagonal algebra at the roots."""
    model = model_operator(theta, tol)
    n = model.N
    if not theta.simple:
        raise RepeatedRootError("evaluation map needs simple roots")
    vas = vasyunin_similarity(theta, tol)
    v_inv = mc.inverse(vas.V)
    units = [np.diag(np.eye(n)[k]).astype(complex) for k in range(n)]
    dom = OperatorSubspace(n, tuple(v_inv @ e @ vas.V for e in units), is_unital_algebra=True)
    cod = OperatorSubspace.diagonal(n)
    return CBLinearMap(dom, cod, tuple(units), unital=True, multiplicative=True)


@dataclass
class EvalMapBounds:
    sup_values: float
    quotient: float
    ratio: float
    delta_bound: float
    inverse_cb: float
    checks: dict


def eval_map_bounds(
    u: HInf, theta: BlaschkeProduct, budget: int = 8, seed: int = 0, tol: Tolerances = DEFAULT
) -> EvalMapBounds:
    """Compare ``max_n |u(lam_n)|`` with ``||u(S)||`` and the similarity constant.

    ``inverse_cb`` is a search estimate of the cb norm of ``u(D) -> u(S)``;
    it never exceeds ``kappa(V)``.
    """
    model = model_operator(theta, tol)
    vas = vasyunin_similarity(theta, tol)
    seq = np.asarray(theta.sequence)
    sup_values = float(np.max(np.abs(evaluate(u, seq))))
    quotient = mc.op_norm(functional_calculus(u, model))
    inv_cb = cb_norm_estimate(evaluation_map(theta, tol).inverse(), budget, seed).lower if len(seq) > 1 else 1.0
    checks = {
        "sup_le_quotient": bool(sup_values <= quotient + 1e-9),
        "quotient_le_sup_over_delta": bool(quotient <= sup_values / vas.delta_bound + 1e-6),
        "inverse_cb_le_kappa": bool(inv_cb <= vas.kappa + 1e-6),
    }
    ratio = quotient / sup_values if sup_values > 0 else float("inf") if quotient > 0 else 1.0
    return EvalMapBounds(sup_values, quotient, ratio, vas.delta_bound, inv_cb, checks)


def reduced_product_checks(theta: BlaschkeProduct, tol: Tolerances = DEFAULT) -> list[dict]:
    """For each root, ``||u_n(S)|| <= 1`` and ``|u_n(lam_n)| >= delta_bound``."""
    model = model_operator(theta, tol)
    vas = vasyunin_similarity(theta, tol)
    out = []
    for n, lam in enumerate(theta.sequence):
        red = theta.reduced(n)
        if red is None:
            norm, val = 1.0, 1.0
        else:
            norm = mc.op_norm(functional_calculus(red, model))
            val = abs(blaschke_eval(red, lam))
        out.append(
            {
                "index": n,
                "norm": float(norm),
                "value_at_root": float(val),
                "norm_ok": bool(norm <= 1 + 1e-8),
                "value_ok": bool(val >= vas.delta_bound - 1e-6),
            }
        )
    return out


@dataclass
class Sandwich:
    lower: float  # delta * ||(u_ij(S))||
    middle: float  # ||(u_ij(D))||
    upper: float  # ||(u_ij(S))||
    holds: bool


def sandwich(theta: BlaschkeProduct, grid, tol: float = 1e-6, tols: Tolerances = DEFAULT) -> Sandwich:
    """Check ``delta ||(u_ij(S))|| <= ||(u_ij(D))|| <= ||(u_ij(S))||`` with delta = 1/kappa(V)."""
    model = model_operator(theta, tols)
    vas = vasyunin_similarity(theta, tols)
    d = np.diag(np.asarray(theta.sequence, dtype=complex))
    upper = quotient_norm_level(grid, model)
    middle = quotient_norm_level(grid, d)
    lower = vas.delta_bound * upper
    return Sandwich(lower, middle, upper, bool(lower <= middle + tol and middle <= upper + tol))
