"""Similarity constructions for unital cb homomorphisms and isomorphisms.

``paulsen_step`` finds X with ``a -> X f(a) X^{-1}`` completely contractive
and ``kappa(X)`` as small as possible.  Writing ``Q = (X^* X)^{-1}``, the
conjugated map is a unital complete contraction iff it has a unital CP
extension to the ambient M_n, i.e. iff there is a positive Choi matrix C with
``Phi_C(b) = f(b) Q`` for every domain basis element b.  That is linear in
(C, Q), so minimising ``cond(Q)`` is a small SDP.  The cb search from
``operator_space`` then independently verifies the returned X.

``iterate_xy`` alternates the step between a map and its inverse;
``almost_isometric`` runs that iteration until the functions
``f_n(lam) = ||X_n (a + lam I) X_n^{-1}||`` settle and assembles the
certificate with all constants (delta, zeta_a, rho, sigma).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from . import matrix_core as mc
from .config import DEFAULT, Tolerances
from .conic import LMI, hermitian_basis, minimize_linear
from .errors import ConvergenceError, OptimizerFailure
from .operator_space import CBLinearMap, OperatorSubspace, cb_norm_estimate, grid_ratio, is_completely_contractive
from .seeds import derive_seed

DISC_GRID = 61
DELTA_START = 0.5
DELTA_HALVINGS = 40
ITERATION_CAP = 40


# --- Paulsen step -------------------------------------------------------------


@dataclass
class SimilarityStepResult:
    X: np.ndarray
    achieved_cb_bound: float
    kappa: float
    target_cb: float  # optimal kappa from the SDP, i.e. the cb norm of f


def _sdp_similarity(f: CBLinearMap) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(Q, C)`` minimising cond(Q) subject to the CP-extension constraints.

    Variables are real coordinates of the Hermitian C (Choi matrix) and Q plus
    the bound t:  minimise t  s.t.  C >= 0,  I <= Q <= t I,
    ``sum_ij b_ij C_[ij] = f(b) Q`` for each domain basis element b.
    """
    n, m = f.domain.ambient_dim, f.codomain.ambient_dim
    hc, hq = hermitian_basis(n * m), hermitian_basis(m)
    nc, nq = len(hc), len(hq)
    nv = nc + nq + 1
    basis, images = np.array(f.domain.basis), np.array(f.images)

    eq_c = np.einsum("kij,hiajb->hkab", basis, hc.reshape(nc, n, m, n, m))
    eq_q = -np.einsum("kab,hbc->hkac", images, hq)
    eq = np.concatenate([eq_c, eq_q, np.zeros((1,) + eq_c.shape[1:])]).reshape(nv, -1)
    eq = np.concatenate([eq.real, eq.imag], axis=1).T

    choi_coef = np.zeros((nv, n * m, n * m), complex)
    choi_coef[:nc] = hc
    q_coef = np.zeros((nv, m, m), complex)
    q_coef[nc:-1] = hq
    t_coef = np.zeros((nv, m, m), complex)
    t_coef[-1] = np.eye(m)
    eye = np.eye(m, dtype=complex)
    lmis = [
        LMI(choi_coef, np.zeros((n * m, n * m), complex)),
        LMI(q_coef, -eye),
        LMI(t_coef - q_coef, np.zeros((m, m), complex)),
    ]
    cost = np.zeros(nv)
    cost[-1] = 1.0
    x = minimize_linear(cost, lmis, eq)
    choi = np.tensordot(x[:nc], hc, axes=1)
    q = np.tensordot(x[nc:-1], hq, axes=1)
    return q, choi


def _polish(f: CBLinearMap, q: np.ndarray, choi: np.ndarray, iters: int = 40) -> np.ndarray | None:
    """Gauss-Newton on ``C = L L^*`` so the constraints hold to machine precision.

    Interior-point solutions of this SDP violate the equalities at the 1e-8
    level because the Choi matrix of a homomorphism is necessarily singular.
    Factoring C keeps it PSD exactly; the minimum-norm Newton steps move
    (L, Q) onto the constraint manifold.  Returns None if it does not converge.
    """
    n, m = f.domain.ambient_dim, f.codomain.ambient_dim
    big = n * m
    basis = np.array(f.domain.basis)
    images = np.array(f.images)
    w, u = np.linalg.eigh(choi)
    herm = hermitian_basis(m)
    jq = -np.einsum("kab,hbc->hkac", images, herm)

    def constraint(cs):
        c4 = cs.reshape(cs.shape[:-2] + (n, m, n, m))
        return np.einsum("kij,...iajb->...kab", basis, c4)

    for cut in (1e-9, 1e-12, 0.0):
        keep = w > cut * w[-1]
        low = u[:, keep] * np.sqrt(w[keep])
        qq = q.copy()
        r = low.shape[1]
        idx = np.arange(big * r)
        units = np.zeros((2 * big * r, big, r), complex)
        units[idx, idx // r, idx % r] = 1
        units[big * r + idx, idx // r, idx % r] = 1j
        scale = max(1.0, float(np.abs(qq).max()))
        for _ in range(iters):
            res = constraint(low @ low.conj().T) - images @ qq
            if np.abs(res).max() <= 1e-14 * scale:
                return qq
            dc = units @ low.conj().T[None]
            jl = constraint(dc + dc.conj().transpose(0, 2, 1))
            jac = np.concatenate([jl, jq]).reshape(len(jl) + len(jq), -1)
            jac = np.concatenate([jac.real, jac.imag], axis=1).T
            rv = np.concatenate([res.ravel().real, res.ravel().imag])
            step = np.linalg.lstsq(jac, -rv, rcond=None)[0]
            low = low + step[: big * r].reshape(big, r) + 1j * step[big * r : 2 * big * r].reshape(big, r)
            qq = qq + np.einsum("h,hab->ab", step[2 * big * r :], herm)
    return None


def _inverse_sqrt(q: np.ndarray) -> np.ndarray:
    w, u = np.linalg.eigh(q)
    if w[0] <= 0:
        raise OptimizerFailure("similarity SDP returned a non-positive Q")
    return (u * w**-0.5) @ u.conj().T


def paulsen_step(
    f: CBLinearMap,
    budget: int = 8,
    seed: int = 0,
    tol: Tolerances = DEFAULT,
) -> SimilarityStepResult:
    """Invertible X, normalised so ``||X|| = ||X^{-1}||``, making
    ``a -> X f(a) X^{-1}`` completely contractive.

    Raises :class:`OptimizerFailure` (carrying the best candidate) if the
    verification search finds a ratio above ``1 + tol.contractive``.
    """
    if not (f.unital and f.multiplicative):
        raise ValueError("paulsen_step needs a unital multiplicative map")
    if not f.codomain.is_unital_algebra:
        raise ValueError("codomain must be a unital algebra")
    q, choi = _sdp_similarity(f)
    polished = _polish(f, q, choi)
    if polished is not None:
        q = 0.5 * (polished + polished.conj().T)
    x = mc.balanced(_inverse_sqrt(q))
    # min kappa over cc-making similarities equals the cb norm for unital homomorphisms
    target = float(np.sqrt(np.linalg.cond(q)))
    conj = f.conjugated(y=x)
    check = is_completely_contractive(conj, tol.contractive, budget, derive_seed(seed, 1))
    result = SimilarityStepResult(x, check.worst_ratio, mc.condition(x), target)
    if not check.verdict:
        raise OptimizerFailure(
            f"conjugated map has cb ratio {check.worst_ratio:.9f} > 1 + {tol.contractive:g}",
            best=result,
        )
    return result


# --- alternating iteration ----------------------------------------------------


def disc_grid(size: int = DISC_GRID) -> np.ndarray:
    """Polar grid of the closed unit disc: ``size`` radii x ``size`` angles."""
    r = np.linspace(0.0, 1.0, size)
    th = 2 * np.pi * np.arange(size) / size
    return r[:, None] * np.exp(1j * th)[None, :]


def shifted_norms(x: np.ndarray, a: np.ndarray, lams: np.ndarray) -> np.ndarray:
    """``||x (a + lam I) x^{-1}||`` for every lam in ``lams`` (any shape)."""
    xa = x @ a @ mc.inverse(x)
    n = a.shape[0]
    flat = lams.ravel()
    mats = xa[None, :, :] + flat[:, None, None] * np.eye(n)[None, :, :]
    return mc.op_norms(mats).reshape(lams.shape)


@dataclass
class IterationTrace:
    X_seq: list = field(default_factory=list)
    Y_seq: list = field(default_factory=list)
    chain: list = field(default_factory=list)  # per probe: [||a||, ||Y1 f Y1^-1||, ||X1 a X1^-1||, ...]
    f_grid: np.ndarray | None = None  # (elements, n+1, R, A); row 0 is X_0 = I
    steps: list = field(default_factory=list)  # SimilarityStepResult, Y1, X1, Y2, ...

    def chain_violation(self) -> float:
        worst = 0.0
        for vals in self.chain:
            v = np.asarray(vals)
            if len(v) > 1:
                worst = max(worst, float(np.max(v[1:] - v[:-1])))
        return worst

    def f_grid_violation(self) -> float:
        if self.f_grid is None or self.f_grid.shape[1] < 2:
            return 0.0
        return float(np.max(self.f_grid[:, 1:] - self.f_grid[:, :-1]))


def _alternate(f: CBLinearMap, budget: int, seed: int, tol: Tolerances) -> Iterator[tuple]:
    """Yield ``(n, Y_n step, X_n step)`` for n = 1, 2, ...

    Y_n comes from the step applied to ``X_{n-1} a X_{n-1}^{-1} -> f(a)`` and
    X_n from the step applied to ``Y_n f(a) Y_n^{-1} -> a`` (X_0 = I).
    """
    f_inv = f.inverse()
    x_prev = None
    n = 0
    while True:
        n += 1
        g = f.conjugated(x=x_prev)
        y_step = paulsen_step(g, budget, derive_seed(seed, n, 0), tol)
        h = f_inv.conjugated(x=y_step.X)
        x_step = paulsen_step(h, budget, derive_seed(seed, n, 1), tol)
        x_prev = x_step.X
        yield n, y_step, x_step


def _probe_norms(f: CBLinearMap, probe: np.ndarray, y: np.ndarray, x: np.ndarray) -> tuple[float, float]:
    img = f.apply_level(probe)
    ny = mc.op_norm(mc.assemble_block(mc.conjugate_grid(img, y)))
    nx = mc.op_norm(mc.assemble_block(mc.conjugate_grid(probe, x)))
    return ny, nx


def iterate_xy(
    f: CBLinearMap,
    probes: Sequence,
    n_max: int = 3,
    seed: int = 0,
    budget: int = 8,
    elements: Sequence | None = None,
    grid_size: int = DISC_GRID,
    tol: Tolerances = DEFAULT,
) -> IterationTrace:
    """Run ``n_max`` rounds of the alternating similarity iteration.

    ``probes`` are d x d grids over the domain; the chain records their norms
    under every conjugation.  ``elements`` (defaults to the 1 x 1 probes)
    get an ``f_n`` table on the polar disc grid.
    """
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    probes = [np.asarray(p, dtype=complex) for p in probes]
    for p in probes:
        if p.ndim != 4:
            raise mc.DimensionError("probes must be d x d grids of matrices")
    if elements is None:
        elements = [p[0, 0] for p in probes if p.shape[0] == 1]
    elements = [mc.as_matrix(e, square=True) for e in elements]
    lams = disc_grid(grid_size)
    eye = np.eye(f.domain.ambient_dim)
    trace = IterationTrace()
    trace.chain = [[mc.op_norm(mc.assemble_block(p))] for p in probes]
    tables = [[shifted_norms(eye, a, lams)] for a in elements]
    try:
        for n, y_step, x_step in _alternate(f, budget, seed, tol):
            trace.Y_seq.append(y_step.X)
            trace.X_seq.append(x_step.X)
            trace.steps += [y_step, x_step]
            for vals, p in zip(trace.chain, probes):
                vals.extend(_probe_norms(f, p, y_step.X, x_step.X))
            for tab, a in zip(tables, elements):
                tab.append(shifted_norms(x_step.X, a, lams))
            if n >= n_max:
                break
    except OptimizerFailure as exc:
        exc.trace = trace
        raise
    finally:
        if tables:
            trace.f_grid = np.array(tables)
    return trace


# --- almost isometric selection -----------------------------------------------


def select_zeta(a, delta: float = 1.0) -> complex:
    """Unimodular zeta with ``r(a + delta zeta I) >= delta``: align with an
    eigenvalue of maximal modulus; 1 for quasi-nilpotent ``a``."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    ev = mc.eigenvalues(a)
    top = ev[np.argmax(np.abs(ev))]
    if abs(top) <= 1e-14 * max(1.0, mc.op_norm(a)):
        return 1.0 + 0j
    return complex(top / abs(top))


@dataclass
class AlmostIsometryReport:
    X: np.ndarray
    Y: np.ndarray
    epsilon: float
    N: int
    delta: float
    zeta: list
    rho: float
    sigma: float
    bound_factor: float
    measured_ratios: list
    branch: str
    cc_worst_ratio: float
    gap: float
    trace: IterationTrace | None = None

    def bound_holds(self, f: CBLinearMap, elements, slack: float = 1e-9) -> bool:
        x_inv, y_inv = mc.inverse(self.X), mc.inverse(self.Y)
        for a in elements:
            lhs = mc.op_norm(self.X @ a @ x_inv)
            rhs = mc.op_norm(self.Y @ f.apply(a) @ y_inv)
            if lhs > self.bound_factor * rhs + slack:
                return False
        return True

    def to_json(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "N": self.N,
            "delta": self.delta,
            "zeta": [[z.real, z.imag] for z in self.zeta],
            "rho": self.rho,
            "sigma": self.sigma,
            "bound_factor": self.bound_factor,
            "measured_ratios": list(self.measured_ratios),
            "branch": self.branch,
            "cc_worst_ratio": self.cc_worst_ratio,
            "gap": self.gap,
            "X": mc.matrix_to_json(self.X),
            "Y": mc.matrix_to_json(self.Y),
        }


def _sigma(f, elems, x, y, delta, zetas) -> float:
    x_inv, y_inv = mc.inverse(x), mc.inverse(y)
    n_dom, n_cod = x.shape[0], y.shape[0]
    up, down = [], []
    for a, z in zip(elems, zetas):
        fa = f.apply(a)
        up.append(mc.op_norm(y @ (fa + delta * z * np.eye(n_cod)) @ y_inv) / mc.op_norm(y @ fa @ y_inv))
        down.append(mc.op_norm(x @ (a + delta * z * np.eye(n_dom)) @ x_inv) / mc.op_norm(x @ a @ x_inv))
    return max(up) / min(down)


def almost_isometric(
    f: CBLinearMap,
    elements: Sequence,
    epsilon: float,
    seed: int = 0,
    budget: int = 8,
    grid_size: int = DISC_GRID,
    iteration_cap: int = ITERATION_CAP,
    tol: Tolerances = DEFAULT,
) -> AlmostIsometryReport:
    """Invertible X, Y with ``X a X^{-1} -> Y f(a) Y^{-1}`` completely
    contractive and ``||X a X^{-1}|| <= bound_factor ||Y f(a) Y^{-1}||`` on
    ``elements``.

    Stops at the first N >= 1 where ``sup |f_N - f_{N+1}| < epsilon`` over the
    disc grid and the points ``delta zeta_a``, then returns ``X = X_N`` and
    ``Y = Y_{N+1}``.  If no element is quasi-nilpotent, delta = 0 and
    ``bound_factor = 1 + epsilon / rho`` with ``rho = min r(a)``.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    elems = [mc.as_matrix(a, square=True) for a in elements]
    if not elems:
        raise ValueError("need at least one element")
    for a in elems:
        if mc.op_norm(a) == 0:
            raise ValueError("elements must be nonzero")
        f.domain.coordinates(a)
    radii = [mc.spectral_radius(a) for a in elems]
    sharp = min(r / max(1.0, mc.op_norm(a)) for r, a in zip(radii, elems)) > tol.quasinilpotent
    lams = disc_grid(grid_size)
    eye = np.eye(f.domain.ambient_dim)

    trace = IterationTrace()
    tables = [[shifted_norms(eye, a, lams)] for a in elems]
    xs, ys = [eye.astype(complex)], [None]
    try:
        for n, y_step, x_step in _alternate(f, budget, seed, tol):
            trace.Y_seq.append(y_step.X)
            trace.X_seq.append(x_step.X)
            trace.steps += [y_step, x_step]
            xs.append(x_step.X)
            ys.append(y_step.X)
            for tab, a in zip(tables, elems):
                tab.append(shifted_norms(x_step.X, a, lams))
            big_n = n - 1
            if big_n >= 1:
                gap = max(float(np.max(np.abs(t[big_n] - t[big_n + 1]))) for t in tables)
                if gap < epsilon:
                    report = _certificate(f, elems, epsilon, big_n, xs, ys, sharp, radii, trace.steps, gap)
                    if report is not None:
                        trace.f_grid = np.array(tables)
                        report.trace = trace
                        return report
            if n >= iteration_cap:
                trace.f_grid = np.array(tables)
                raise ConvergenceError(f"no epsilon-gap within {iteration_cap} iterations", trace=trace)
    except OptimizerFailure as exc:
        trace.f_grid = np.array(tables)
        exc.trace = trace
        raise


def _certificate(f, elems, epsilon, big_n, xs, ys, sharp, radii, steps, gap):
    x, y = xs[big_n], ys[big_n + 1]
    x_next = xs[big_n + 1]
    # the step that produced Y_{N+1} certifies complete contractivity
    cc_ratio = steps[2 * big_n].achieved_cb_bound
    if sharp:
        delta, zetas, sigma = 0.0, [1.0 + 0j] * len(elems), 1.0
        rho = min(radii)
        factor = 1 + epsilon / rho
        branch = "no-quasinilpotent"
    else:
        delta = DELTA_START
        zetas = [select_zeta(a, delta) for a in elems]
        for _ in range(DELTA_HALVINGS + 1):
            sigma = _sigma(f, elems, x, y, delta, zetas)
            if sigma < 1 + epsilon:
                break
            delta /= 2
        else:
            raise ConvergenceError(f"delta search exhausted (last sigma {sigma:.6g})", last=sigma)
        n_dom = x.shape[0]
        rho = min(mc.spectral_radius(a + delta * z * np.eye(n_dom)) for a, z in zip(elems, zetas))
        # the gap must also hold at the exact points delta * zeta_a
        for a, z in zip(elems, zetas):
            pt = np.array([delta * z])
            if abs(shifted_norms(x, a, pt)[0] - shifted_norms(x_next, a, pt)[0]) >= epsilon:
                return None
        factor = (1 + epsilon) * (1 + epsilon / rho)
        branch = "general"
    x_inv, y_inv = mc.inverse(x), mc.inverse(y)
    ratios = [mc.op_norm(x @ a @ x_inv) / mc.op_norm(y @ f.apply(a) @ y_inv) for a in elems]
    return AlmostIsometryReport(
        X=x,
        Y=y,
        epsilon=float(epsilon),
        N=big_n,
        delta=float(delta),
        zeta=[complex(z) for z in zetas],
        rho=float(rho),
        sigma=float(sigma),
        bound_factor=float(factor),
        measured_ratios=[float(r) for r in ratios],
        branch=branch,
        cc_worst_ratio=float(cc_ratio),
        gap=float(gap),
    )


# --- conjugation lower bound and joint similarity -----------------------------


@dataclass
class CLBPResult:
    ratio: float
    cb_est: float
    kappa: float


def clbp_defect(x, alg: OperatorSubspace, budget: int = 8, seed: int = 0) -> CLBPResult:
    """``||a -> x a x^{-1}||_cb`` (search estimate) divided by ``kappa(x)``."""
    if not alg.is_unital_algebra:
        raise ValueError("alg must be a unital algebra")
    kappa = mc.condition(x)
    conj = CBLinearMap.conjugation(alg, x)
    est = cb_norm_estimate(conj, budget, seed).lower
    return CLBPResult(est / kappa, est, kappa)


@dataclass
class JointSimilarityResult:
    forward_ok: bool
    adjoint_ok: bool
    norm_recovered: bool
    forward_ratio: float
    adjoint_ratio: float
    probe_gaps: list = field(default_factory=list)


def verify_joint_similarity(
    z,
    theta: CBLinearMap,
    probes: Sequence | None = None,
    budget: int = 8,
    seed: int = 0,
    tol: Tolerances = DEFAULT,
) -> JointSimilarityResult:
    """Check that ``t -> Z theta(t) Z^{-1}`` and ``t -> Z theta^*(t) Z^{-1}`` are
    both complete contractions and, if so, that theta preserves the norms of
    the probe blocks (``theta^*(t^*) = theta(t)^*``).

    The chain ``||(a_ij)||^2 = r((a_ij)^*(a_ij)) <= ||(Z a_ji^* Z^-1)|| ||(Z a_ij Z^-1)||
    <= ||(t_ij)||^2`` with ``a = theta(t)`` gives one inequality; the reverse is
    the contractivity of theta^{-1}, which holds in the setting where theta
    inverts a Paulsen similarity.  Both are checked on the probes.
    """
    z = mc.check_invertible(z)
    fwd = theta.conjugated(y=z)
    adj = theta.adjoint_map().conjugated(y=z)
    fr = is_completely_contractive(fwd, tol.contractive, budget, derive_seed(seed, 0))
    ar = is_completely_contractive(adj, tol.contractive, budget, derive_seed(seed, 1))
    if probes is None:
        probes = [np.array([[b]]) for b in theta.domain.basis]
    gaps = []
    recovered = fr.verdict and ar.verdict
    if recovered:
        for p in probes:
            p = np.asarray(p, dtype=complex)
            t_norm = mc.op_norm(mc.assemble_block(p))
            a_norm = mc.op_norm(mc.assemble_block(theta.apply_level(p)))
            gaps.append(abs(a_norm - t_norm))
        recovered = all(g <= tol.contractive for g in gaps)
    return JointSimilarityResult(fr.verdict, ar.verdict, bool(recovered), fr.worst_ratio, ar.worst_ratio, gaps)


# --- uniform / C*-algebra routes ----------------------------------------------


@dataclass
class IsometricPair:
    X: np.ndarray
    Y: np.ndarray
    forward_ratio: float
    backward_ratio: float


def isometric_pair(theta: CBLinearMap, f: CBLinearMap, budget: int = 8, seed: int = 0, tol: Tolerances = DEFAULT) -> IsometricPair:
    """Given a unital cb isomorphism ``theta: F -> A`` from a uniform or
    C*-algebra F and ``f: A -> B``, return X, Y with
    ``X a X^{-1} -> Y f(a) Y^{-1}`` completely isometric.

    X comes from the similarity step on theta and Y from the step on
    ``f o theta``; both ratios of the resulting map and its inverse are
    reported from the cb search.
    """
    x = paulsen_step(theta, budget, derive_seed(seed, 0), tol).X
    y = paulsen_step(f.compose(theta), budget, derive_seed(seed, 1), tol).X
    g = f.conjugated(x=x, y=y)
    fwd = cb_norm_estimate(g, budget, derive_seed(seed, 2)).lower
    back = cb_norm_estimate(g.inverse(), budget, derive_seed(seed, 3)).lower
    return IsometricPair(x, y, fwd, back)


def ratio_on(f: CBLinearMap, grid) -> float:
    return grid_ratio(f, grid)
