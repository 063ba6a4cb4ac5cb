import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from margulis_spectra.linalg_core import (
    ConditionGuardError,
    adjugate_cofactor,
    adjugate_trace_power,
    check_condition,
    expanding_subspace,
    make_quadratic_space,
    pairing,
    unit_eigenspace,
)


def boost(lam):
    """n = 1 boost on span(e1, e2) fixing e3, eigenvalues lam, 1, 1/lam."""
    c, s = (lam + 1 / lam) / 2, (lam - 1 / lam) / 2
    return np.array([[c, s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def test_make_space():
    sp = make_quadratic_space(1)
    assert np.array_equal(sp.q_matrix, np.diag([1.0, -1.0, -1.0]))
    assert np.array_equal(sp.v0, [0.0, 1.0, 0.0])
    sp3 = make_quadratic_space(3)
    assert sp3.dim == 7
    assert np.array_equal(sp3.q_matrix, np.diag([1, 1, 1, -1, -1, -1, -1.0]))
    for n in (1, 2, 5):
        Q = make_quadratic_space(n).q_matrix
        assert np.array_equal(Q @ Q, np.eye(2 * n + 1))
        assert np.array_equal(Q, Q.T)
    for bad in (0, -1, 1.5):
        with pytest.raises(ValueError):
            make_quadratic_space(bad)


def test_pairing_examples():
    sp = make_quadratic_space(1)
    assert pairing(sp, [0, 1, 0], [0, 1, 0]) == -1
    assert pairing(sp, [1, 0, 0], [1, 0, 0]) == 1
    assert pairing(sp, [1, 1, 0], [1, -1, 0]) == 2
    assert sp.pair([1, 1, 0], [1, -1, 0]) == 2
    with pytest.raises(ValueError):
        pairing(sp, [1, 0], [1, 0, 0])


@given(arrays(float, (3, 5), elements=st.floats(-10, 10)), st.floats(-3, 3))
def test_pairing_bilinear_symmetric(v, c):
    sp = make_quadratic_space(2)
    x, y, z = v
    assert pairing(sp, x, y) == pytest.approx(pairing(sp, y, x), abs=1e-12)
    lhs = pairing(sp, c * x + z, y)
    rhs = c * pairing(sp, x, y) + pairing(sp, z, y)
    assert lhs == pytest.approx(rhs, abs=1e-9 * (1 + abs(lhs)))


def test_adjugate_examples():
    assert np.allclose(adjugate_cofactor(np.eye(3)), np.eye(3))
    assert np.allclose(adjugate_cofactor(np.diag([2.0, 3, 4])), np.diag([12.0, 8, 6]))
    assert np.allclose(adjugate_trace_power(np.eye(3)), np.eye(3))
    assert np.allclose(adjugate_trace_power(np.diag([1.0, 1, 2])), np.diag([2.0, 2, 1]))


def test_adjugate_singular_matrix():
    # rank one: adj vanishes; rank d-1: adj is the rank-one kernel projector times a scalar
    M = np.outer([1.0, 2, 3], [4.0, 5, 6])
    assert np.allclose(adjugate_cofactor(M), 0)
    M = np.diag([0.0, 2, 5])
    assert np.allclose(adjugate_cofactor(M), np.diag([10.0, 0, 0]))


def test_adjugate_identity_random_5x5():
    rng = np.random.default_rng(0)
    for _ in range(20):
        M = rng.uniform(-10, 10, (5, 5))
        err = np.abs(M @ adjugate_cofactor(M) - np.linalg.det(M) * np.eye(5)).max()
        assert err < 1e-9 * np.linalg.norm(M) ** 4


@settings(max_examples=60)
@given(arrays(float, (5, 5), elements=st.floats(-10, 10)))
def test_adjugate_is_det_times_inverse(M):
    d = np.linalg.det(M)
    if np.linalg.cond(M) > 1e6:
        return
    A = adjugate_cofactor(M)
    ref = d * np.linalg.inv(M)
    assert np.abs(A - ref).max() <= 1e-8 * np.abs(ref).max()
    assert np.abs(M @ A - d * np.eye(5)).max() <= 1e-9 * max(1.0, np.abs(M).max()) ** 5


def test_trace_power_matches_cofactor_7x7():
    rng = np.random.default_rng(1)
    worst = 0.0
    for _ in range(100):
        M = rng.uniform(-10, 10, (7, 7))
        ref = adjugate_cofactor(M)
        worst = max(worst, np.abs(adjugate_trace_power(M) - ref).max() / np.abs(ref).max())
    assert worst < 1e-8


@settings(max_examples=40)
@given(arrays(float, (3, 3), elements=st.floats(-10, 10)))
def test_trace_power_matches_cofactor_3x3(M):
    ref = adjugate_cofactor(M)
    scale = max(np.abs(ref).max(), np.abs(M).max() ** 2, 1.0)
    assert np.abs(adjugate_trace_power(M) - ref).max() <= 1e-10 * scale


def test_extended_adjugate_agrees_and_batches():
    rng = np.random.default_rng(2)
    Ms = rng.uniform(-3, 3, (6, 5, 5))
    plain = adjugate_cofactor(Ms)
    ext = adjugate_cofactor(Ms, extended=True)
    assert ext.dtype == np.longdouble
    assert np.allclose(plain, ext.astype(float), rtol=1e-10, atol=1e-10)
    assert np.allclose(plain[3], adjugate_cofactor(Ms[3]))


def test_trace_power_rejects_even_dimension():
    with pytest.raises(ValueError, match="odd"):
        adjugate_trace_power(np.eye(4))


def test_shape_and_finiteness_checks():
    with pytest.raises(ValueError):
        adjugate_cofactor(np.ones((2, 3)))
    with pytest.raises(ValueError):
        adjugate_cofactor(np.array([[np.nan, 0], [0, 1]]))


def test_unit_eigenspace():
    sp = make_quadratic_space(1)
    assert len(unit_eigenspace(sp, np.eye(3))) == 3
    (v,) = unit_eigenspace(sp, boost(2.0))
    assert np.allclose(boost(2.0) @ v, v)
    assert np.allclose(np.abs(v), [0, 0, 1])
    assert unit_eigenspace(sp, 2 * np.eye(3)) == []


def test_unit_eigenspace_on_huge_regular_element():
    # norm ~1e10 but a genuine one-dimensional kernel
    sp = make_quadratic_space(1)
    L = np.linalg.matrix_power(boost(np.e), 23)
    assert len(unit_eigenspace(sp, L)) == 1


def test_expanding_subspace():
    L = boost(3.0)
    V = expanding_subspace(L, 1)
    assert np.allclose(np.abs(V[:, 0]), np.array([1, 1, 0]) / np.sqrt(2))
    with pytest.raises(ValueError):
        expanding_subspace(np.eye(3), 1)


def test_condition_guard():
    assert check_condition(np.eye(3)) == pytest.approx(1.0)
    with pytest.raises(ConditionGuardError):
        check_condition(np.diag([1e7, 1.0, 1e-7]))
