import numpy as np
import pytest
from hypothesis import given, strategies as st

from cbiso import matrix_core as mc
from cbiso.seeds import rng_for


def test_op_norm_examples():
    assert mc.op_norm(np.eye(2)) == pytest.approx(1.0, abs=1e-12)
    assert mc.op_norm([[1, 1], [0, 0]]) == pytest.approx(np.sqrt(2), rel=1e-12)
    assert mc.op_norm([[1, 1], [0, 1]]) == pytest.approx((1 + np.sqrt(5)) / 2, rel=1e-12)
    assert mc.op_norm(np.zeros((3, 2))) == 0.0


def test_spectral_radius_examples():
    assert mc.spectral_radius([[0, 1], [0, 0]]) == 0.0
    assert mc.spectral_radius(np.diag([0.3, -0.7j])) == pytest.approx(0.7, abs=1e-15)
    assert mc.spectral_radius([[1, 1], [0, 1]]) == pytest.approx(1.0, abs=1e-15)
    with pytest.raises(mc.DimensionError):
        mc.spectral_radius(np.ones((2, 3)))


def test_assemble_block_examples():
    m = np.array([[1, 2j], [3, 4]])
    assert np.array_equal(mc.assemble_block([[m]]), m)
    eye = np.eye(3)
    assert mc.op_norm(mc.assemble_block([[eye, eye], [eye, eye]])) == pytest.approx(2.0)
    a, b = np.diag([1.0, 5.0]), np.array([[0, 3], [0, 0]])
    z = np.zeros((2, 2))
    assert mc.op_norm(mc.assemble_block([[a, z], [z, b]])) == pytest.approx(5.0)
    with pytest.raises(mc.DimensionError):
        mc.assemble_block([[a, z], [z]])


def test_assemble_split_roundtrip():
    rng = np.random.default_rng(3)
    grid = rng.normal(size=(3, 3, 2, 2))
    assert np.array_equal(mc.split_block(mc.assemble_block(grid), 3), grid)


def test_condition_examples():
    u = mc.random_unitary(4, np.random.default_rng(0))
    assert mc.condition(u) == pytest.approx(1.0, abs=1e-12)
    assert mc.condition(np.diag([1.0, 2.0])) == pytest.approx(2.0)
    with pytest.raises(mc.SingularityError) as err:
        mc.condition(np.diag([1.0, 1e-13]))
    assert err.value.sigma_min == pytest.approx(1e-13)


def test_random_invertible_respects_kappa():
    rng = np.random.default_rng(1)
    for _ in range(20):
        assert mc.condition(mc.random_invertible(4, rng, kappa=3.0)) <= 3.0 + 1e-9


def test_json_roundtrip():
    m = np.array([[1 + 2j, -0.5], [0, 3j]])
    assert np.array_equal(mc.matrix_from_json(mc.matrix_to_json(m)), m)


seeds = st.integers(0, 2**32)
sizes = st.integers(1, 6)


@given(seeds, sizes)
def test_submultiplicative(seed, n):
    rng = rng_for(seed)
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    b = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    assert mc.op_norm(a @ b) <= mc.op_norm(a) * mc.op_norm(b) + 1e-10


@given(seeds, sizes)
def test_radius_below_norm(seed, n):
    rng = rng_for(seed)
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    assert mc.spectral_radius(a) <= mc.op_norm(a) + 1e-10


@given(seeds, sizes)
def test_unitary_invariance(seed, n):
    rng = rng_for(seed)
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    u, v = mc.random_unitary(n, rng), mc.random_unitary(n, rng)
    assert mc.op_norm(u @ a @ v) == pytest.approx(mc.op_norm(a), abs=1e-10)


@given(seeds, sizes)
def test_single_block_identity(seed, n):
    rng = rng_for(seed)
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    assert np.array_equal(mc.assemble_block([[a]]), a)
