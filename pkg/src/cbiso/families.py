"""Seeded random families of unital cb isomorphisms between small algebras.

Every member is ``S a S^{-1} -> T sigma(a) T^{-1}`` where ``a`` runs over a
3-dimensional unital subalgebra of M_4, ``sigma`` is a random automorphism of
that algebra and S, T are random invertibles of bounded condition number.
"""
from __future__ import annotations

import numpy as np

from . import matrix_core as mc
from .operator_space import CBLinearMap, OperatorSubspace

KINDS = ("triangular", "diagonal", "nilpotent")


def _unit(n, i, j):
    e = np.zeros((n, n), dtype=complex)
    e[i, j] = 1
    return e


def _complex(rng, size=None):
    return rng.normal(size=size) + 1j * rng.normal(size=size)


def base_algebra(kind: str, n: int = 4) -> tuple[np.ndarray, ...]:
    """Basis ``(I, u, v)`` of a 3-dimensional unital algebra in M_n."""
    eye = np.eye(n, dtype=complex)
    if kind == "triangular":  # u idempotent, v nilpotent, uv = v, vu = 0
        return eye, _unit(n, 0, 0), _unit(n, 0, 1)
    if kind == "diagonal":  # diag(x, x, y, z, ...)
        return eye, _unit(n, 0, 0) + _unit(n, 1, 1), _unit(n, 2, 2)
    if kind == "nilpotent":  # I, N, N^2 with N^3 = 0
        nil = _unit(n, 0, 1) + _unit(n, 1, 2)
        return eye, nil, nil @ nil
    raise ValueError(f"unknown algebra kind {kind!r}; choose from {KINDS}")


def random_automorphism(kind: str, rng, n: int = 4) -> tuple[np.ndarray, ...]:
    """Images of the base basis under a random unital automorphism."""
    eye, u, v = base_algebra(kind, n)
    if kind == "triangular":
        c = _complex(rng)
        return eye, u, c * v
    if kind == "diagonal":
        # the three minimal idempotents are u, v and w = I - u - v; permute them
        w = eye - u - v
        idem = [u, v, w]
        perm = rng.permutation(3)
        return eye, idem[perm[0]], idem[perm[1]]
    c, d = _complex(rng, 2)
    return eye, c * u + d * v, c * c * v


def random_isomorphism(rng, kind: str | None = None, kappa: float = 3.0, n: int = 4) -> CBLinearMap:
    """A unital cb isomorphism between similarity conjugates of one algebra type."""
    if kind is None:
        kind = KINDS[int(rng.integers(len(KINDS)))]
    s = mc.random_invertible(n, rng, kappa=kappa)
    t = mc.random_invertible(n, rng, kappa=kappa)
    s_inv, t_inv = mc.inverse(s), mc.inverse(t)
    dom = OperatorSubspace(n, tuple(s @ b @ s_inv for b in base_algebra(kind, n)), is_unital_algebra=True)
    images = tuple(t @ b @ t_inv for b in random_automorphism(kind, rng, n))
    cod = OperatorSubspace(n, images, is_unital_algebra=True)
    return CBLinearMap(dom, cod, images, unital=True, multiplicative=True)


def random_probes(space: OperatorSubspace, rng, count: int = 5, levels=(1, 1, 1, 2, 2)) -> list[np.ndarray]:
    """``count`` probe grids over ``space``; the i-th has size ``levels[i % len(levels)]``."""
    probes = []
    for i in range(count):
        d = levels[i % len(levels)]
        coeffs = _complex(rng, (d, d, space.dim))
        probes.append(np.einsum("ijk,kab->ijab", coeffs, space.stack))
    return probes
