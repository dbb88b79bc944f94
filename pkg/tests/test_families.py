import numpy as np
import pytest

from cbiso import matrix_core as mc
from cbiso.families import KINDS, base_algebra, random_isomorphism, random_probes
from cbiso.operator_space import OperatorSubspace


@pytest.mark.parametrize("kind", KINDS)
def test_base_algebra_is_unital_algebra(kind):
    sp = OperatorSubspace(4, base_algebra(kind), is_unital_algebra=True)
    assert sp.dim == 3


@pytest.mark.parametrize("kind", KINDS)
def test_random_isomorphism_is_homomorphism(kind):
    rng = np.random.default_rng(0)
    for _ in range(5):
        f = random_isomorphism(rng, kind)
        assert f.unital and f.multiplicative
        assert f.multiplicativity_residual() <= 1e-8
        assert f.inverse().multiplicativity_residual() <= 1e-8


def test_unknown_kind():
    with pytest.raises(ValueError):
        base_algebra("cyclic")


def test_probes_lie_in_domain():
    rng = np.random.default_rng(1)
    f = random_isomorphism(rng)
    probes = random_probes(f.domain, rng)
    assert [p.shape[0] for p in probes] == [1, 1, 1, 2, 2]
    for p in probes:
        for row in p:
            for m in row:
                assert f.domain.contains(m)


def test_seeded_reproducible():
    a = random_isomorphism(np.random.default_rng(7))
    b = random_isomorphism(np.random.default_rng(7))
    assert np.array_equal(a.image_stack, b.image_stack)
    assert mc.condition(a.domain.basis[0]) == pytest.approx(1.0)
