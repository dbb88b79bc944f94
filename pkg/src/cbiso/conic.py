"""Small helpers for Hermitian linear matrix inequalities solved with Clarabel.

Complex Hermitian constraints ``H >= 0`` enter through the real embedding
``[[Re H, -Im H], [Im H, Re H]]`` in Clarabel's scaled upper-triangle format.
"""
from __future__ import annotations

from dataclasses import dataclass

import clarabel
import numpy as np
from scipy import sparse

from .errors import OptimizerFailure

EQ_RANK_RTOL = 1e-10
# badly scaled problems (large cb norms) need more KKT regularisation
REGULARIZATION_LADDER = (1e-8, 1e-7, 1e-6)


def hermitian_basis(m: int) -> np.ndarray:
    """Real basis of the m x m Hermitian matrices, shape ``(m*m, m, m)``."""
    out = []
    for i in range(m):
        e = np.zeros((m, m), complex)
        e[i, i] = 1
        out.append(e)
        for j in range(i + 1, m):
            e = np.zeros((m, m), complex)
            e[i, j] = e[j, i] = 1
            out.append(e)
            e = np.zeros((m, m), complex)
            e[i, j], e[j, i] = 1j, -1j
            out.append(e)
    return np.array(out)


def real_embed(h: np.ndarray) -> np.ndarray:
    """``[[Re h, -Im h], [Im h, Re h]]``; PSD iff h is."""
    top = np.concatenate([h.real, -h.imag], -1)
    bot = np.concatenate([h.imag, h.real], -1)
    return np.concatenate([top, bot], -2)


def svec(s: np.ndarray) -> np.ndarray:
    """Upper triangle, column-major, off-diagonals scaled by sqrt 2."""
    rows, cols = np.triu_indices(s.shape[-1])
    order = np.lexsort((rows, cols))
    rows, cols = rows[order], cols[order]
    scale = np.where(rows == cols, 1.0, np.sqrt(2.0))
    return s[..., rows, cols] * scale


@dataclass
class LMI:
    """``const + sum_v x_v * coef[v] >= 0`` for Hermitian matrices."""

    coef: np.ndarray  # (nv, p, p) Hermitian
    const: np.ndarray  # (p, p) Hermitian


def minimize_linear(cost: np.ndarray, lmis: list[LMI], equalities: np.ndarray | None = None) -> np.ndarray:
    """Minimise ``cost @ x`` subject to Hermitian LMIs and ``equalities @ x = 0``.

    Returns x; raises :class:`OptimizerFailure` unless Clarabel reports a
    solved or almost-solved status at some rung of the regularisation ladder.
    """
    nv = len(cost)
    rows, rhs, cones = [], [], []
    if equalities is not None and len(equalities):
        # redundant equality rows make the interior-point KKT system singular;
        # keep an orthonormal basis of their row space instead
        _, sv, vh = np.linalg.svd(np.asarray(equalities, float), full_matrices=False)
        equalities = vh[: int(np.sum(sv > EQ_RANK_RTOL * sv[0]))]
        rows.append(equalities)
        rhs.append(np.zeros(len(equalities)))
        cones.append(clarabel.ZeroConeT(len(equalities)))
    for lmi in lmis:
        # s = b - A x with s = svec(embed(const + sum x_v coef_v))
        rows.append(-svec(real_embed(lmi.coef)).T)
        rhs.append(svec(real_embed(lmi.const)))
        cones.append(clarabel.PSDTriangleConeT(2 * lmi.const.shape[0]))
    a = sparse.csc_matrix(np.vstack(rows))
    b = np.concatenate(rhs)
    status = None
    for reg in REGULARIZATION_LADDER:
        settings = clarabel.DefaultSettings()
        settings.verbose = False
        settings.static_regularization_constant = reg
        sol = clarabel.DefaultSolver(sparse.csc_matrix((nv, nv)), np.asarray(cost, float), a, b, cones, settings).solve()
        status = str(sol.status)
        if status in ("Solved", "AlmostSolved"):
            return np.asarray(sol.x)
    raise OptimizerFailure(f"conic solve status {status}")
