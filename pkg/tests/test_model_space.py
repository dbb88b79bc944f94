import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.polynomial import polynomial as P

from cbiso import matrix_core as mc
from cbiso.errors import ConditioningError, RepeatedRootError, SchemaError
from cbiso.model_space import (
    BlaschkeProduct,
    Rational,
    basis_eval,
    blaschke_eval,
    blaschke_factor,
    carleson_delta,
    eval_map_bounds,
    functional_calculus,
    is_quasinilpotent,
    kernel_gram,
    model_operator,
    polynomial_representative,
    quasinilpotent_witness,
    quotient_norm_level,
    reduced_product_checks,
    sandwich,
    spectrum_quotient,
    vasyunin_similarity,
)
from cbiso.seeds import rng_for

Z = [0, 1]  # the polynomial z, ascending coefficients


def bp(*roots):
    return BlaschkeProduct.from_roots(roots)


def disc_points(rng, k, rmax=0.9):
    r = rmax * np.sqrt(rng.uniform(size=k))
    return r * np.exp(2j * np.pi * rng.uniform(size=k))


def quadrature_shift(seq, points=1024):
    # <z e_j, e_i> by the trapezoid rule on the circle
    z = np.exp(2j * np.pi * np.arange(points) / points)
    e = basis_eval(seq, z)  # (points, N)
    return (e.conj().T @ (z[:, None] * e)) / points


def test_blaschke_examples():
    th = bp(0)
    assert blaschke_eval(th, 0.5) == pytest.approx(0.5)
    th = bp(0.3, -0.4j, 0.7)
    for lam in th.sequence:
        assert abs(blaschke_eval(th, lam)) <= 1e-15
    assert abs(blaschke_eval(bp(0, 0.5), 1.0)) == pytest.approx(1.0, abs=1e-12)


@given(st.integers(0, 2**32))
def test_blaschke_unimodular_on_circle(seed):
    rng = rng_for(seed)
    th = BlaschkeProduct.from_roots(disc_points(rng, 3))
    z = np.exp(2j * np.pi * rng.uniform(size=16))
    assert np.abs(blaschke_eval(th, z)) == pytest.approx(np.ones(16), abs=1e-10)
    w = disc_points(rng, 16, 1.0)
    assert np.all(np.abs(blaschke_eval(th, w)) <= 1 + 1e-12)


def test_blaschke_validation():
    with pytest.raises(ValueError):
        BlaschkeProduct(((1.0, 1),))
    with pytest.raises(ValueError):
        BlaschkeProduct(((0.1, 1),), constant=2.0)
    with pytest.raises(SchemaError) as err:
        BlaschkeProduct.from_json({"roots": [{"re": 0.1, "mult": 0}]})
    assert "mult" in err.value.path
    th = BlaschkeProduct(((0.2j, 2), (0.5, 1)), constant=1j)
    assert BlaschkeProduct.from_json(th.to_json()) == th


@pytest.mark.parametrize("n", range(1, 7))
def test_power_gives_jordan_block(n):
    m = model_operator(BlaschkeProduct(((0.0, n),)))
    assert np.array_equal(m.S, np.eye(n, k=-1))


def test_degree_one():
    m = model_operator(bp(0.3 - 0.2j))
    assert m.S == pytest.approx(np.array([[0.3 - 0.2j]]))


def test_simple_roots_eigenvalues():
    m = model_operator(bp(0, 0.5))
    assert sorted(mc.eigenvalues(m.S).real) == pytest.approx([0, 0.5], abs=1e-10)


@settings(max_examples=20)
@given(st.integers(0, 2**32), st.integers(1, 6))
def test_shift_matches_quadrature(seed, n):
    rng = rng_for(seed)
    seq = list(disc_points(rng, n, 0.8))
    if n > 2:
        seq[2] = seq[0]  # exercise the confluent case
    m = model_operator(BlaschkeProduct.from_roots(seq))
    order = BlaschkeProduct.from_roots(seq).sequence
    assert m.S == pytest.approx(quadrature_shift(order), abs=1e-10)


@settings(max_examples=20)
@given(st.integers(0, 2**32), st.integers(1, 6))
def test_model_invariants(seed, n):
    rng = rng_for(seed)
    th = BlaschkeProduct.from_roots(disc_points(rng, n))
    m = model_operator(th)
    assert mc.op_norm(m.S) <= 1 + 1e-9
    assert mc.op_norm(functional_calculus(th, m)) <= 1e-8
    ev = np.sort_complex(mc.eigenvalues(m.S))
    assert ev == pytest.approx(np.sort_complex(np.array(th.sequence)), abs=1e-8)


def test_clustered_roots_raise():
    with pytest.raises(ConditioningError):
        model_operator(bp(0.5, 0.5 + 1e-9, 0.5 - 1e-9j))


def test_kernel_gram_matches_quadrature():
    th = BlaschkeProduct(((0.1, 1), (-0.3j, 2), (0.6, 1)))
    z = np.exp(2j * np.pi * np.arange(2048) / 2048)
    index = [(lam, j) for lam, m in th.roots for j in range(m)]
    k = np.array([z**j / (1 - np.conj(lam) * z) ** (j + 1) for lam, j in index])
    quad = (k.conj() @ k.T) / len(z)  # G[a, b] = <k_b, k_a>
    assert kernel_gram(th) == pytest.approx(quad, abs=1e-12)
    simple = [0.1, -0.3j, 0.6]
    lam = np.array(simple)
    assert kernel_gram(bp(*simple)) == pytest.approx(1 / (1 - lam[:, None] * np.conj(lam[None, :])), abs=1e-14)


def test_functional_calculus_examples():
    m = model_operator(BlaschkeProduct(((0.0, 2),)))
    assert functional_calculus([1], m) == pytest.approx(np.eye(2))
    u = functional_calculus(Z, m)
    assert mc.op_norm(u) == pytest.approx(1.0) and mc.spectral_radius(u) == 0
    th = bp(0.2, -0.5)
    assert mc.op_norm(functional_calculus(th.numerator(), model_operator(th))) <= 1e-12


@settings(max_examples=20)
@given(st.integers(0, 2**32))
def test_functional_calculus_multiplicative(seed):
    rng = rng_for(seed)
    th = BlaschkeProduct.from_roots(disc_points(rng, 4))
    m = model_operator(th)
    u = rng.normal(size=5) + 1j * rng.normal(size=5)
    v = rng.normal(size=3) + 1j * rng.normal(size=3)
    lhs = functional_calculus(P.polymul(u, v), m)
    assert lhs == pytest.approx(functional_calculus(u, m) @ functional_calculus(v, m), abs=1e-9)


@settings(max_examples=20)
@given(st.integers(0, 2**32))
def test_representatives_agree(seed):
    rng = rng_for(seed)
    th = BlaschkeProduct(((complex(disc_points(rng, 1)[0]), 2), (complex(disc_points(rng, 1)[0]), 1)))
    m = model_operator(th)
    u = rng.normal(size=7) + 1j * rng.normal(size=7)
    r = polynomial_representative(u, th)
    assert len(r) == 3
    assert functional_calculus(r, m) == pytest.approx(functional_calculus(u, m), abs=1e-9)
    rat = Rational(tuple(u[:3]), (1.0, 0.3))
    r = polynomial_representative(rat, th)
    assert functional_calculus(r, m) == pytest.approx(functional_calculus(rat, m), abs=1e-9)


def test_quotient_norm_examples():
    m = model_operator(BlaschkeProduct(((0.0, 2),)))
    assert quotient_norm_level([[[1]]], m) == pytest.approx(1.0)
    assert quotient_norm_level([[Z]], m) == pytest.approx(1.0)
    th = bp(0.1, 0.6j)
    mm = model_operator(th)
    u, v = [0.3, 1], [1, 0, 2]
    diag = quotient_norm_level([[u, [0]], [[0], v]], mm)
    assert diag == pytest.approx(max(quotient_norm_level([[u]], mm), quotient_norm_level([[v]], mm)))


def test_spectrum_examples():
    th = bp(0, 0.5)
    assert sorted(np.real(spectrum_quotient(Z, th))) == pytest.approx([0, 0.5], abs=1e-8)
    assert spectrum_quotient([0.7j], th) == pytest.approx([0.7j])
    # theta = b_lam * (inner divisor): spectrum of u inside {u(lam), 0}
    lam = 0.4
    th = bp(lam, 0.0, 0.0)
    u = bp(0.0, 0.0)
    spec = spectrum_quotient(u, th)
    target = [0.0, complex(blaschke_eval(u, lam))]
    assert all(min(abs(s - t) for t in target) <= 1e-8 for s in spec)


def test_quasinilpotent_examples():
    double = BlaschkeProduct(((0.0, 2),))
    assert is_quasinilpotent(Z, double)
    assert mc.op_norm(functional_calculus(Z, model_operator(double))) == pytest.approx(1.0)
    assert not is_quasinilpotent(Z, bp(0, 0.5))
    th = bp(0.2, -0.3)
    mult = P.polymul(th.numerator(), [1, 2, 3])
    assert is_quasinilpotent(mult, th)
    assert mc.op_norm(functional_calculus(mult, model_operator(th))) <= 1e-10


@settings(max_examples=10)
@given(st.integers(0, 2**32), st.integers(2, 5))
def test_quasinilpotent_dichotomy(seed, n):
    rng = rng_for(seed)
    pts = list(disc_points(rng, n))
    simple = BlaschkeProduct.from_roots(pts)
    m = model_operator(simple)
    assert quasinilpotent_witness(simple) is None
    for k in range(n):
        e = np.eye(n)[k]
        if is_quasinilpotent(e, simple):
            assert mc.op_norm(functional_calculus(e, m)) <= 1e-8
    repeated = BlaschkeProduct.from_roots(pts + pts[:1])
    w = quasinilpotent_witness(repeated)
    assert is_quasinilpotent(w, repeated)
    assert mc.op_norm(functional_calculus(w, model_operator(repeated))) > 1e-6


def test_degree_one_norm_equals_radius():
    th = bp(0.35 + 0.2j)
    m = model_operator(th)
    rng = np.random.default_rng(0)
    for _ in range(10):
        u = rng.normal(size=4) + 1j * rng.normal(size=4)
        fu = functional_calculus(u, m)
        assert mc.op_norm(fu) == pytest.approx(mc.spectral_radius(fu), abs=1e-9)


def test_degree_two_witness():
    th = bp(0, 0.5)
    m = model_operator(th)
    u = functional_calculus(BlaschkeProduct.from_roots([0.5]), m)
    assert mc.op_norm(u) == pytest.approx(1.0, abs=1e-8)
    assert mc.spectral_radius(u) <= 0.5 + 1e-8


def test_carleson_examples():
    assert carleson_delta(bp(0.3)) == 1.0
    assert carleson_delta(bp(0, 0.5)) == pytest.approx(0.5, abs=1e-12)
    roots = [0, 0.9, 0.91]
    direct = min(
        np.prod([abs(blaschke_factor(roots[k], roots[n])) for k in range(3) if k != n]) for n in range(3)
    )
    assert carleson_delta(bp(*roots)) == pytest.approx(direct, rel=1e-12)
    assert carleson_delta(bp(*roots)) == pytest.approx(0.0497237, abs=1e-6)
    with pytest.raises(RepeatedRootError):
        carleson_delta(BlaschkeProduct(((0.1, 2),)))


def test_vasyunin_examples():
    v = vasyunin_similarity(bp(0.4))
    assert v.kappa == pytest.approx(1.0)
    v = vasyunin_similarity(bp(0, 0.5))
    assert v.kappa == pytest.approx(2 + np.sqrt(3), abs=1e-6)
    assert v.residual <= 1e-8
    for u in (Z, [0, 0, 1], [1, 1]):
        s = sandwich(bp(0, 0.5), [[u]])
        assert s.holds
    near = vasyunin_similarity(bp(0.5, 0.5001)).kappa
    far = vasyunin_similarity(bp(0.5, 0.6)).kappa
    assert near > far


@settings(max_examples=10)
@given(st.integers(0, 2**32), st.integers(2, 5))
def test_vasyunin_diagonalises(seed, n):
    rng = rng_for(seed)
    th = BlaschkeProduct.from_roots(disc_points(rng, n, 0.8))
    v = vasyunin_similarity(th)
    m = model_operator(th)
    d = np.diag(th.sequence)
    assert v.V @ m.S @ np.linalg.inv(v.V) == pytest.approx(d, abs=1e-8)
    # row rescaling can only help
    raw = basis_eval(th.sequence, np.asarray(th.sequence))
    raw = raw / np.linalg.norm(raw, axis=1, keepdims=True)
    assert v.kappa <= np.linalg.cond(raw) + 1e-9


def test_vasyunin_repeated_root():
    with pytest.raises(RepeatedRootError):
        vasyunin_similarity(BlaschkeProduct(((0.1, 2),)))


def test_eval_map_examples():
    th = bp(0, 0.5)
    r = eval_map_bounds([1], th, budget=2)
    assert r.sup_values == pytest.approx(1.0) and r.quotient == pytest.approx(1.0)
    r = eval_map_bounds(BlaschkeProduct.from_roots([0.5]), th, budget=2)
    assert r.sup_values == pytest.approx(0.5) and r.quotient <= 1 + 1e-9
    assert all(r.checks.values())
    r = eval_map_bounds(th.numerator(), th, budget=2)
    assert r.sup_values <= 1e-12 and r.quotient <= 1e-12


def test_reduced_products():
    for row in reduced_product_checks(bp(0.3, -0.4j, 0.7)):
        assert row["norm_ok"] and row["value_ok"]


@settings(max_examples=10)
@given(st.integers(0, 2**32), st.integers(1, 3))
def test_sandwich_random_grids(seed, d):
    rng = rng_for(seed)
    th = bp(0.3, -0.4j, 0.7)
    grid = [[list(rng.normal(size=3) + 1j * rng.normal(size=3)) for _ in range(d)] for _ in range(d)]
    assert sandwich(th, grid).holds
