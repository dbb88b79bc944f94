"""The 4x4 counterexample: row space R, diagonal space D, the corner algebras
A_R, A_D inside M_4, the isomorphism Psi between them, and the numerical
study of how far conjugations are from making Psi isometric.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from . import matrix_core as mc
from .operator_space import CBLinearMap, OperatorSubspace
from .seeds import rng_for

MAGNITUDES = (0.5, 1.0, 2.0)


@dataclass(frozen=True)
class UTParams:
    """``[[alpha z1, beta z1 + gamma z2], [0, 0]]`` against
    ``[[alpha_p z1, beta_p z1 + gamma_p z2], [0, delta_p z2]]``."""

    alpha: complex
    beta: complex
    gamma: complex
    alpha_p: complex
    beta_p: complex
    gamma_p: complex
    delta_p: complex

    def __post_init__(self):
        for name in ("alpha", "beta", "gamma", "alpha_p", "beta_p", "gamma_p", "delta_p"):
            v = complex(getattr(self, name))
            if not np.isfinite(v):
                raise ValueError(f"{name} is not finite")
            object.__setattr__(self, name, v)

    def scale(self) -> float:
        return 1.0 + max(abs(v) for v in (self.alpha, self.beta, self.gamma, self.alpha_p, self.beta_p, self.gamma_p, self.delta_p)) ** 2


def ut2_norm_closed_form(a11, a12, a22):
    """Operator norm of ``[[a11, a12], [0, a22]]`` (broadcasts over arrays)."""
    a11, a12, a22 = (np.asarray(v, dtype=complex) for v in (a11, a12, a22))
    s = np.abs(a11) ** 2 + np.abs(a12) ** 2 + np.abs(a22) ** 2
    det = np.abs(a11 * a22) ** 2
    disc = np.maximum(s * s - 4 * det, 0.0)
    out = np.sqrt(0.5 * (s + np.sqrt(disc)))
    return float(out) if out.ndim == 0 else out


def norm2x2(m: np.ndarray) -> np.ndarray:
    """Operator norms of a stack of 2x2 matrices, shape ``(..., 2, 2)``."""
    fro = np.sum(np.abs(m) ** 2, axis=(-2, -1))
    det = np.abs(m[..., 0, 0] * m[..., 1, 1] - m[..., 0, 1] * m[..., 1, 0]) ** 2
    return np.sqrt(0.5 * (fro + np.sqrt(np.maximum(fro * fro - 4 * det, 0.0))))


def torus_grid(density: int, magnitudes=MAGNITUDES) -> tuple[np.ndarray, np.ndarray]:
    """Sample points ``(z1, z2)``: equispaced phases at magnitudes drawn from
    ``magnitudes`` plus the two coordinate axes.  ``(1, 1)`` is always present."""
    if density < 1:
        raise ValueError("grid density must be positive")
    ph = np.exp(2j * np.pi * np.arange(density) / density)
    p1, p2 = np.meshgrid(ph, ph, indexing="ij")
    z1, z2 = [], []
    for r1 in magnitudes:
        for r2 in magnitudes:
            z1.append(r1 * p1.ravel())
            z2.append(r2 * p2.ravel())
    z1.append(ph)
    z2.append(np.zeros(density))
    z1.append(np.zeros(density))
    z2.append(ph)
    return np.concatenate(z1), np.concatenate(z2)


def _sides(p: UTParams, z1, z2):
    lhs = np.sqrt(np.abs(p.alpha * z1) ** 2 + np.abs(p.beta * z1 + p.gamma * z2) ** 2)
    rhs = ut2_norm_closed_form(p.alpha_p * z1, p.beta_p * z1 + p.gamma_p * z2, p.delta_p * z2)
    return lhs, rhs


def norm_equality_holds(p: UTParams, tol: float = 1e-8, grid_density: int = 16) -> bool:
    z1, z2 = torus_grid(grid_density)
    lhs, rhs = _sides(p, z1, z2)
    return bool(np.all(np.abs(lhs - rhs) <= tol * (1 + rhs)))


@dataclass
class LemmaRelReport:
    hypothesis_holds: bool
    eq_gamma_ok: bool
    eq_alpha_ok: bool
    ineq_betagamma_ok: bool
    equality_implies_degenerate_ok: bool
    max_gap: float

    @property
    def conclusions_ok(self) -> bool:
        return self.eq_gamma_ok and self.eq_alpha_ok and self.ineq_betagamma_ok and self.equality_implies_degenerate_ok


def lemma_rel_check(p: UTParams, tol: float = 1e-8, grid_density: int = 16) -> LemmaRelReport:
    """Test the norm identity on the grid and evaluate the three consequences
    (|gamma|^2 = |gamma'|^2 + |delta'|^2, |alpha|^2 + |beta|^2 = |alpha'|^2 + |beta'|^2,
    |beta||gamma| <= |beta'||gamma'| with equality forcing alpha' delta' = 0).

    The conclusion flags are always computed; they carry content only when
    ``hypothesis_holds`` is true.
    """
    if grid_density < 8:
        raise ValueError("grid_density must be at least 8")
    z1, z2 = torus_grid(grid_density)
    lhs, rhs = _sides(p, z1, z2)
    gap = float(np.max(np.abs(lhs - rhs)))
    hyp = bool(np.all(np.abs(lhs - rhs) <= tol * (1 + rhs)))
    sc = tol * p.scale()
    a, b, g = abs(p.alpha), abs(p.beta), abs(p.gamma)
    ap, bp, gp, dp = abs(p.alpha_p), abs(p.beta_p), abs(p.gamma_p), abs(p.delta_p)
    eq_gamma = abs(g**2 - gp**2 - dp**2) <= sc
    eq_alpha = abs(a**2 + b**2 - ap**2 - bp**2) <= sc
    ineq = b * g <= bp * gp + sc
    equal = abs(b * g - bp * gp) <= sc
    degenerate = (not equal) or ap * dp <= sc
    return LemmaRelReport(hyp, bool(eq_gamma), bool(eq_alpha), bool(ineq), bool(degenerate), gap)


def lemma_diag_check(p: UTParams, tol: float = 1e-8, grid_density: int = 16) -> bool:
    """With gamma' != 0, the norm identity forces alpha' delta' = 0.

    Returns False exactly when the identity holds on the grid while
    ``|alpha' delta'|`` is not negligible (a false positive).
    """
    if abs(p.gamma_p) <= tol:
        raise ValueError("lemma_diag_check requires gamma_p != 0")
    if not norm_equality_holds(p, tol, max(grid_density, 8)):
        return True
    return bool(abs(p.alpha_p * p.delta_p) <= tol * p.scale())


def equality_instance(rng: np.random.Generator, family: str = "delta0") -> UTParams:
    """Random parameters for which the norm identity holds for every (z1, z2).

    ``delta0``: the second matrix repeats the first with delta' = 0.
    ``kernel``: alpha' = 0, so the second matrix has a zero first column and
    its norm is the length of its second column; matching the Gram data of
    the two rank-one forms gives |gamma|^2 = |gamma'|^2 + |delta'|^2,
    beta conj(gamma) = beta' conj(gamma') and |alpha|^2 + |beta|^2 = |beta'|^2.
    """

    def cn(*shape):
        return rng.normal(size=shape) + 1j * rng.normal(size=shape)

    if family == "delta0":
        a, b, g = cn(3)
        return UTParams(a, b, g, a, b, g, 0.0)
    if family == "kernel":
        bp, gp, dp = cn(3)
        g = np.hypot(abs(gp), abs(dp))
        b = bp * np.conj(gp) / g
        a = np.sqrt(max(abs(bp) ** 2 - abs(b) ** 2, 0.0)) * np.exp(2j * np.pi * rng.uniform())
        return UTParams(a, b, g, 0.0, bp, gp, dp)
    raise ValueError(f"unknown family {family!r}")


# --- the scene ----------------------------------------------------------------


def corner(s: np.ndarray) -> np.ndarray:
    """``[[0, s], [0, 0]]`` in M_4."""
    out = np.zeros((4, 4), dtype=complex)
    out[:2, 2:] = s
    return out


def _e(i, j):
    m = np.zeros((2, 2), dtype=complex)
    m[i, j] = 1
    return m


def psi(s: np.ndarray) -> np.ndarray:
    """``[[z1, z2], [0, 0]] -> diag(z1, z2)``."""
    s = np.asarray(s, dtype=complex)
    if abs(s[1, 0]) + abs(s[1, 1]) > 1e-12:
        raise ValueError("psi is defined on the row space only")
    return np.diag([s[0, 0], s[0, 1]])


ROW_SPACE = OperatorSubspace(2, (_e(0, 0), _e(0, 1)))
DIAG_SPACE = OperatorSubspace(2, (_e(0, 0), _e(1, 1)))
PSI = CBLinearMap(ROW_SPACE, DIAG_SPACE, (_e(0, 0), _e(1, 1)))


def element(lam: complex, s) -> np.ndarray:
    """``[[lam I, s], [0, lam I]]``."""
    return lam * np.eye(4, dtype=complex) + corner(np.asarray(s, dtype=complex))


@dataclass(eq=False)
class CounterexampleScene:
    A_R: OperatorSubspace
    A_D: OperatorSubspace
    Psi: CBLinearMap
    X1: np.ndarray = field(default_factory=lambda: np.eye(2, dtype=complex))
    X2: np.ndarray = field(default_factory=lambda: np.eye(2, dtype=complex))
    Y1: np.ndarray = field(default_factory=lambda: np.eye(2, dtype=complex))
    Y2: np.ndarray = field(default_factory=lambda: np.eye(2, dtype=complex))

    def scene_hash(self) -> str:
        doc = json.dumps(self.Psi.to_json(), sort_keys=True).encode()
        return hashlib.sha256(doc).hexdigest()[:16]


def build_scene() -> CounterexampleScene:
    eye = np.eye(4, dtype=complex)
    a_r = OperatorSubspace(4, (eye, corner(_e(0, 0)), corner(_e(0, 1))), True)
    a_d = OperatorSubspace(4, (eye, corner(_e(0, 0)), corner(_e(1, 1))), True)
    big_psi = CBLinearMap(a_r, a_d, (eye, corner(_e(0, 0)), corner(_e(1, 1))), unital=True, multiplicative=True)
    return CounterexampleScene(a_r, a_d, big_psi)


def induced_params(x1, x2, y1, y2) -> UTParams:
    """Coefficients of ``X1 s X2`` and ``Y1 psi(s) Y2`` as linear forms in (z1, z2)."""
    x1, x2, y1, y2 = (mc.as_matrix(m) for m in (x1, x2, y1, y2))
    a11 = x1[0, 0]
    return UTParams(
        alpha=a11 * x2[0, 0],
        beta=a11 * x2[0, 1],
        gamma=a11 * x2[1, 1],
        alpha_p=y1[0, 0] * y2[0, 0],
        beta_p=y1[0, 0] * y2[0, 1],
        gamma_p=y1[0, 1] * y2[1, 1],
        delta_p=y1[1, 1] * y2[1, 1],
    )


class _Grid:
    """Sample grid reduced to the three quadratic monomials the norms need."""

    def __init__(self, z1: np.ndarray, z2: np.ndarray):
        self.a = np.abs(z1) ** 2
        self.b = np.abs(z2) ** 2
        self.c = z1 * np.conj(z2)


def _defect_values(x1, x2, y1, y2, grid: _Grid) -> np.ndarray:
    # X1 s X2 = (X1 e1) ((z1, z2) X2) is rank one
    r1, r2 = x2[0], x2[1]
    lhs2 = grid.a * np.vdot(r1, r1).real + grid.b * np.vdot(r2, r2).real + 2 * np.real(grid.c * np.vdot(r2, r1))
    lhs = np.linalg.norm(x1[:, 0]) * np.sqrt(np.maximum(lhs2, 0.0))
    # Y1 diag(z1, z2) Y2 = z1 P + z2 Q
    p = np.outer(y1[:, 0], y2[0])
    q = np.outer(y1[:, 1], y2[1])
    fro = grid.a * np.vdot(p, p).real + grid.b * np.vdot(q, q).real + 2 * np.real(grid.c * np.vdot(q, p))
    det = grid.a * grid.b * abs(np.linalg.det(y1) * np.linalg.det(y2)) ** 2
    rhs = np.sqrt(0.5 * (fro + np.sqrt(np.maximum(fro * fro - 4 * det, 0.0))))
    return np.abs(lhs - rhs)


def isometry_defect(scene: CounterexampleScene | None = None, X1=None, X2=None, Y1=None, Y2=None, grid_density: int = 16) -> float:
    """``max | ||X1 s X2|| - ||Y1 psi(s) Y2|| |`` over the sample grid of s in R."""
    eye = np.eye(2, dtype=complex)
    if scene is not None:
        X1 = scene.X1 if X1 is None else X1
        X2 = scene.X2 if X2 is None else X2
        Y1 = scene.Y1 if Y1 is None else Y1
        Y2 = scene.Y2 if Y2 is None else Y2
    mats = [mc.check_invertible(eye if m is None else m) for m in (X1, X2, Y1, Y2)]
    return float(np.max(_defect_values(*mats, _Grid(*torus_grid(grid_density)))))


def defect_at(X1, X2, Y1, Y2, z1: complex, z2: complex) -> float:
    mats = [mc.as_matrix(m) for m in (X1, X2, Y1, Y2)]
    return float(_defect_values(*mats, _Grid(np.array([z1]), np.array([z2])))[0])


# --- defect minimisation ------------------------------------------------------


def _frobenius_cap(kappa_cap: float) -> float:
    # for |det| = 1, kappa = sigma_1^2 and ||T||_F^2 = kappa + 1/kappa
    return kappa_cap + 1.0 / kappa_cap


def _candidate(w: np.ndarray, fmax: float) -> np.ndarray:
    """Upper-triangular ``[[e^p, b], [0, e^{-p} e^{i phi}]]`` with |det| = 1 and
    ``||T||_F^2 = 2 cosh 2p + |b|^2 <= fmax`` for every real ``w``.

    The excess ``||T||_F^2 - 2`` is ``(fmax - 2)(1 - exp(-|u|^2))`` and the
    direction of ``u = w[1:4]`` splits it between the diagonal and the corner.
    """
    phi, u = w[0], w[1:4]
    r2 = float(u @ u)
    if r2 == 0.0 or fmax <= 2.0:
        return np.array([[1, 0], [0, np.exp(1j * phi)]], dtype=complex)
    excess = (fmax - 2.0) * -np.expm1(-r2)
    p = np.sign(u[0]) * 0.5 * np.arccosh(1.0 + 0.5 * excess * u[0] ** 2 / r2)
    b = np.sqrt(excess / r2) * complex(u[1], u[2])
    return np.array([[np.exp(p), b], [0, np.exp(-p + 1j * phi)]], dtype=complex)


def _unpack(x: np.ndarray, fmax: float):
    return [_candidate(x[4 * i : 4 * i + 4], fmax) for i in range(4)]


@dataclass
class DefectResult:
    best_defect: float
    best_candidates: tuple
    kappa_cap: float
    grid_density: int
    restart_values: list


def defect_minimize(
    scene: CounterexampleScene | None = None,
    kappa_cap: float = 10.0,
    budget: int = 20,
    seed: int = 0,
    grid_density: int = 16,
    maxfev: int = 4000,
) -> DefectResult:
    """Multistart Nelder-Mead over upper-triangular candidates with |det| = 1
    and condition number at most ``kappa_cap``.

    The |det| = 1 normalisation removes the trivial scaling direction
    (shrinking every candidate drives the unnormalised defect to zero).
    Restart ``i`` is seeded by ``(seed, i)``, so results are nested in budget.
    """
    if kappa_cap < 1:
        raise ValueError("kappa_cap must be >= 1")
    if budget < 1:
        raise ValueError("budget must be >= 1")
    grid = _Grid(*torus_grid(grid_density))
    fmax = _frobenius_cap(kappa_cap)

    def obj(x):
        return float(np.max(_defect_values(*_unpack(x, fmax), grid)))

    best, best_x, values = np.inf, None, []
    for i in range(budget):
        rng = rng_for(seed, i)
        x0 = rng.normal(size=16)
        x0[::4] = rng.uniform(-np.pi, np.pi, size=4)
        res = minimize(obj, x0, method="Nelder-Mead", options={"maxfev": maxfev, "xatol": 1e-9, "fatol": 1e-12, "adaptive": True})
        val = obj(res.x)
        x = res.x
        v0 = obj(x0)
        if v0 < val:
            val, x = v0, x0
        values.append(val)
        if val < best:
            best, best_x = val, x
    cands = tuple(_unpack(best_x, fmax))
    return DefectResult(float(best), cands, float(kappa_cap), grid_density, values)
