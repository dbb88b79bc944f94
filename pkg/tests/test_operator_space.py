import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cbiso import matrix_core as mc
from cbiso.counterexample import PSI, ROW_SPACE
from cbiso.errors import NotInSpanError
from cbiso.operator_space import (
    CBLinearMap,
    OperatorSubspace,
    apply_map_level,
    cb_norm_estimate,
    grid_ratio,
    is_completely_contractive,
    level_norm,
)
from cbiso.seeds import rng_for

E11 = np.array([[1, 0], [0, 0]], dtype=complex)
E12 = np.array([[0, 1], [0, 0]], dtype=complex)
E21 = E12.T.copy()


def ut_const():
    return OperatorSubspace(2, (np.eye(2), E12), is_unital_algebra=True)


def test_coordinates_examples():
    sp = ut_const()
    assert sp.coordinates(np.eye(2)) == pytest.approx([1, 0])
    assert sp.coordinates(3 * np.eye(2) + 2j * E12) == pytest.approx([3, 2j])
    with pytest.raises(NotInSpanError) as err:
        sp.coordinates(E21)
    assert err.value.residual == pytest.approx(1.0)


def test_dependent_basis_rejected():
    with pytest.raises(ValueError):
        OperatorSubspace(2, (E12, 2 * E12))


def test_non_algebra_rejected():
    with pytest.raises(ValueError):
        OperatorSubspace(2, (np.eye(2), E12, E21), is_unital_algebra=True)


def test_apply_map_level_examples():
    sp = OperatorSubspace.full(2)
    ident = CBLinearMap.identity(sp)
    grid = np.random.default_rng(0).normal(size=(2, 2, 2, 2)).astype(complex)
    assert np.allclose(apply_map_level(ident, grid), grid)
    s = np.array([[1, 2], [0, 0]], dtype=complex)
    out = apply_map_level(PSI, s[None, None])
    assert np.allclose(out[0, 0], np.diag([1, 2]))
    assert np.allclose(apply_map_level(PSI, np.zeros((2, 2, 2, 2))), 0)


def test_apply_map_level_not_in_span():
    with pytest.raises(NotInSpanError):
        apply_map_level(PSI, np.eye(2)[None, None])


def test_level_norm_examples():
    sp = OperatorSubspace.full(2)
    a = np.array([[0, 3], [1, 0]], dtype=complex)
    assert level_norm(sp, a[None, None]) == pytest.approx(3.0)
    z = np.zeros((2, 2))
    assert level_norm(sp, [[a, z], [z, 5 * E11]]) == pytest.approx(5.0)
    assert level_norm(sp, [[E12, E12], [E12, E12]]) == pytest.approx(2.0)


def test_cb_identity():
    est = cb_norm_estimate(CBLinearMap.identity(OperatorSubspace.full(2)), budget=8, seed=0)
    assert est.lower == pytest.approx(1.0, abs=1e-9)
    assert est.level_used == 2


def test_cb_conjugation_matches_rank_one_oracle():
    t = np.diag([1.0, 2.0])
    f = CBLinearMap.conjugation(OperatorSubspace.full(2), t)
    # the rank-one input E21 is stretched by exactly cond(t)
    assert grid_ratio(f, E21[None, None]) == pytest.approx(2.0)
    est = cb_norm_estimate(f, budget=8, seed=0)
    assert est.lower == pytest.approx(2.0, abs=1e-4)
    assert grid_ratio(f, est.witness) == pytest.approx(est.lower, abs=1e-9)


def test_cb_psi_inverse_against_lattice_oracle():
    inv = PSI.inverse()
    est = cb_norm_estimate(inv, budget=8, seed=0)
    # lattice oracle over 2x2 grids of diagonal coefficients with unimodular entries
    phases = np.exp(2j * np.pi * np.arange(8) / 8)
    best = 0.0
    rng = np.random.default_rng(0)
    for _ in range(400):
        c = rng.choice(phases, size=(2, 2, 2))
        best = max(best, grid_ratio(inv, np.einsum("kij,kab->ijab", c, inv.domain.stack)))
    assert best <= est.lower + 1e-9
    assert est.lower == pytest.approx(np.sqrt(2), abs=1e-4)


def test_contractivity_examples():
    full = OperatorSubspace.full(2)
    v = is_completely_contractive(CBLinearMap.identity(full), budget=4)
    assert v.verdict and v.worst_ratio == pytest.approx(1.0, abs=1e-9)
    double = CBLinearMap.from_function(full, full, lambda m: 2 * m)
    v = is_completely_contractive(double, budget=4)
    assert not v.verdict and v.worst_ratio == pytest.approx(2.0, abs=1e-9)
    v = is_completely_contractive(PSI, budget=8)
    assert v.verdict and v.worst_ratio == pytest.approx(1.0, abs=1e-6)


def test_budget_monotone_and_deterministic():
    t = mc.random_invertible(3, np.random.default_rng(5), kappa=4.0)
    f = CBLinearMap.conjugation(OperatorSubspace.full(3), t)
    a = cb_norm_estimate(f, budget=2, seed=11)
    b = cb_norm_estimate(f, budget=4, seed=11)
    c = cb_norm_estimate(f, budget=4, seed=11)
    assert b.lower >= a.lower
    assert b.restart_values[:2] == a.restart_values
    assert b.lower == c.lower and np.array_equal(b.witness, c.witness)


def test_json_roundtrip():
    f = CBLinearMap.conjugation(ut_const(), np.diag([1.0, 3.0]))
    g = CBLinearMap.from_json(f.to_json())
    assert np.allclose(g.image_stack, f.image_stack)
    assert g.unital and g.multiplicative


@settings(max_examples=10)
@given(st.integers(0, 2**32))
def test_unital_estimate_at_least_one(seed):
    rng = rng_for(seed)
    f = CBLinearMap.conjugation(ut_const(), mc.random_invertible(2, rng, kappa=3.0))
    assert cb_norm_estimate(f, budget=1, seed=seed).lower >= 1 - 1e-9


@settings(max_examples=8)
@given(st.integers(0, 2**32))
def test_conjugation_estimate_reaches_condition(seed):
    rng = rng_for(seed)
    t = mc.random_invertible(2, rng, kappa=5.0)
    f = CBLinearMap.conjugation(OperatorSubspace.full(2), t)
    est = cb_norm_estimate(f, budget=8, seed=seed)
    assert est.lower == pytest.approx(mc.condition(t), abs=1e-4)


@settings(max_examples=8)
@given(st.integers(0, 2**32))
def test_unitary_change_of_basis_invariance(seed):
    rng = rng_for(seed)
    t = mc.random_invertible(2, rng, kappa=3.0)
    u, w = mc.random_unitary(2, rng), mc.random_unitary(2, rng)
    f = CBLinearMap.conjugation(OperatorSubspace.full(2), t)
    g = CBLinearMap.conjugation(OperatorSubspace.full(2), w @ t @ u.conj().T)
    a = cb_norm_estimate(f, budget=8, seed=seed).lower
    b = cb_norm_estimate(g, budget=8, seed=seed).lower
    assert a == pytest.approx(b, abs=1e-6)


@settings(max_examples=8)
@given(st.integers(0, 2**32))
def test_composition_of_conjugations(seed):
    rng = rng_for(seed)
    s, t = mc.random_invertible(2, rng, 3.0), mc.random_invertible(2, rng, 3.0)
    f = CBLinearMap.conjugation(OperatorSubspace.full(2), s)
    g = CBLinearMap.conjugation(f.codomain, t)
    gf = g.compose(f)
    est = cb_norm_estimate(gf, budget=8, seed=seed).lower
    assert est <= mc.condition(s) * mc.condition(t) + 2e-4
    assert est == pytest.approx(mc.condition(t @ s), abs=1e-4)


def test_row_space_is_not_algebra_but_space():
    assert ROW_SPACE.dim == 2 and not ROW_SPACE.is_unital_algebra
