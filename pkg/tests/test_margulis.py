import numpy as np
import pytest
from conftest import boost, random_group_element, rotation
from hypothesis import given, settings
from hypothesis import strategies as st

from margulis_spectra.affine_group import AffineMap, Representation, TangentCocycle, evaluate, invert
from margulis_spectra.families import SeededFamily, build_family
from margulis_spectra.linalg_core import make_quadratic_space
from margulis_spectra.margulis import (
    ADJUGATE_TOL,
    NonRegularError,
    alpha,
    alpha_covector,
    alpha_dot,
    alpha_many,
    alpha_squared_adjugate,
    neutral_projection_identity,
    neutral_vector,
    solve_coboundary,
)
from margulis_spectra.words import canonical_class, enumerate_classes, inverse

SP1 = make_quadratic_space(1)
CLASSES6 = enumerate_classes(2, 6)


def mp_alpha(rep, word, dps=60):
    """alpha in 60-digit arithmetic: kernel of I - L by SVD, sign from the float convention."""
    import mpmath as mp

    with mp.workdps(dps):
        d = rep.space.dim
        Q = mp.diag([1] * rep.n + [-1] * (rep.n + 1))
        L, u = mp.eye(d), mp.matrix(d, 1)
        for x in word:
            g = rep.image(x)
            u = L * mp.matrix(g.translation.tolist()) + u
            L = L * mp.matrix(g.linear.tolist())
        _, _, V = mp.svd_r(mp.eye(d) - L)
        nu = V[d - 1, :].T
        nu = nu / mp.sqrt(abs((nu.T * Q * nu)[0]))
        ref = neutral_vector(rep.space, np.array(L.tolist(), dtype=float)).nu
        if float((nu.T * mp.matrix(ref.tolist()))[0]) < 0:
            nu = -nu
        return float((u.T * Q * nu)[0])


def eig_oracle_nu(L):
    """n = 1 neutral vector from a dense eigendecomposition.

    x+ and x- are the eigenvectors for the eigenvalues of modulus > 1 and
    < 1; the Q-dual of x- is x- / <x+|x->, and the sign makes
    det[dual, nu, x+] positive.
    """
    Q = SP1.q_matrix
    w, V = np.linalg.eig(L)
    w, V = w.real, V.real
    order = np.argsort(np.abs(w))
    xm, x0, xp = (V[:, i] for i in order)
    nu = x0 / np.sqrt(abs(x0 @ Q @ x0))
    dual = xm / (xp @ Q @ xm)
    if np.linalg.det(np.column_stack([dual, nu, xp])) < 0:
        nu = -nu
    return nu


def test_neutral_vector_of_boost():
    nd = neutral_vector(SP1, boost(3.0))
    assert np.allclose(np.abs(nd.nu), [0, 0, 1])
    assert nd.q_norm_sign == -1
    assert nd.orientation_det > 0
    assert np.allclose(nd.nu, eig_oracle_nu(boost(3.0)))


def test_neutral_vector_rejects_non_regular():
    with pytest.raises(NonRegularError):
        neutral_vector(SP1, np.eye(3))
    with pytest.raises(NonRegularError):
        neutral_vector(SP1, rotation(0.7))


def test_neutral_vector_invariants(seeded_rep):
    for c in CLASSES6[::7]:
        L = evaluate(seeded_rep, c.rep_word).linear
        nd = neutral_vector(SP1, L)
        assert np.allclose(L @ nd.nu, nd.nu, atol=1e-8 * np.linalg.norm(L, 2))
        assert abs(abs(nd.nu @ SP1.q_matrix @ nd.nu) - 1) < 1e-9
        assert np.allclose(nd.nu, eig_oracle_nu(L), atol=1e-8)
        assert nd.regularity > 0


def test_alpha_matches_eig_oracle(seeded_rep):
    Q = SP1.q_matrix
    for c in CLASSES6[:52]:
        g = evaluate(seeded_rep, c.rep_word)
        ref = g.translation @ Q @ eig_oracle_nu(g.linear)
        assert alpha(seeded_rep, c).alpha == pytest.approx(ref, abs=1e-9 * (1 + abs(ref)))


def test_alpha_matches_extended_precision(seeded_rep):
    for c in CLASSES6[::4]:
        ref = mp_alpha(seeded_rep, c.rep_word)
        assert alpha(seeded_rep, c).alpha == pytest.approx(ref, abs=1e-9 * (1 + abs(ref)))


def test_alpha_zero_and_sign_flip(seeded_rep):
    zero = seeded_rep.with_translations(np.zeros(6))
    neg = seeded_rep.with_translations(-seeded_rep.translations)
    for c in CLASSES6[::5]:
        assert alpha(zero, c).alpha == 0.0
        assert alpha_squared_adjugate(zero, c) == 0.0
        assert alpha(neg, c).alpha == pytest.approx(-alpha(seeded_rep, c).alpha, abs=1e-12)


def test_adjugate_formula_up_to_length_6(seeded_rep):
    for c in CLASSES6:
        r = alpha(seeded_rep, c)
        assert r.adjugate_ok, (c.text, r.mismatch)
        assert r.mismatch <= ADJUGATE_TOL * (1 + r.alpha**2)
        assert r.word_len == c.length


def test_raw_adjugate_expression_is_negative_alpha_squared(seeded_rep):
    for c in CLASSES6[:40]:
        a = alpha(seeded_rep, c).alpha
        raw = alpha_squared_adjugate(seeded_rep, c, normalization="raw")
        assert raw == pytest.approx(-a * a, rel=1e-9, abs=1e-12)
    with pytest.raises(ValueError):
        alpha_squared_adjugate(seeded_rep, CLASSES6[0], normalization="other")


def test_neutral_projection_identity(seeded_rep):
    assert neutral_projection_identity(SP1, boost(2.5)) < 1e-9
    rng = np.random.default_rng(0)
    L = evaluate(seeded_rep, (1, 2, 2)).linear
    base = neutral_projection_identity(SP1, L)
    assert base < 1e-7
    for _ in range(5):
        g = random_group_element(1, rng, 0.5)
        assert neutral_projection_identity(SP1, g @ L @ np.linalg.inv(g)) < 1e-7
    with pytest.raises(NonRegularError):
        neutral_projection_identity(SP1, np.eye(3))


def test_conjugate_words_give_equal_alpha(seeded_rep):
    # cyclic rotations involve no cancellation; a conjugator g costs about
    # eps |g|^2 |L| in the evaluated product, so only single letters are used
    for c in CLASSES6[::11]:
        a0 = alpha(seeded_rep, c).alpha
        w = c.rep_word
        for k in range(len(w)):
            assert alpha(seeded_rep, c, word=w[k:] + w[:k]).alpha == pytest.approx(a0, abs=1e-8 * (1 + abs(a0)))
        for x in (-2, -1, 1, 2):
            if x == -w[0]:
                continue
            conj = (x,) + w + (-x,)
            assert alpha(seeded_rep, c, word=conj).alpha == pytest.approx(a0, abs=1e-7 * (1 + abs(a0)))


@pytest.mark.parametrize("shift", [0.0, 1.0])
def test_group_conjugation_invariance(seeded_rep, shift):
    rng = np.random.default_rng(2)
    for _ in range(5):
        h = AffineMap(random_group_element(1, rng, 0.4), shift * rng.standard_normal(3))
        hi = invert(h, SP1)
        conj = Representation(SP1, tuple(h @ g @ hi for g in seeded_rep.gen_images))
        for c in CLASSES6[::13]:
            a0, a1 = alpha(seeded_rep, c), alpha(conj, c)
            assert a1.alpha == pytest.approx(a0.alpha, abs=1e-8 * (1 + abs(a0.alpha)))
            if not shift:
                # an affine conjugator inflates |u| tenfold and the quadratic
                # adjugate expression loses accuracy accordingly
                assert a1.adjugate_ok


def test_power_and_inversion_laws(seeded_rep):
    for c in enumerate_classes(2, 4):
        a = alpha(seeded_rep, c).alpha
        for k in (2, 3):
            ak = alpha(seeded_rep, canonical_class(c.rep_word * k)).alpha
            assert ak == pytest.approx(k * a, rel=1e-7)
        ainv = alpha(seeded_rep, canonical_class(inverse(c.rep_word))).alpha
        assert ainv == pytest.approx(a, rel=1e-7)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(-3, 3), st.floats(-3, 3))
def test_linearity_in_translations(seed, c1, c2):
    rng = np.random.default_rng(seed)
    base = build_family(SeededFamily())
    U1, U2 = rng.standard_normal(6), rng.standard_normal(6)
    r1, r2 = base.with_translations(U1), base.with_translations(U2)
    r12 = base.with_translations(c1 * U1 + c2 * U2)
    for c in CLASSES6[::29]:
        lhs = alpha(r12, c).alpha
        rhs = c1 * alpha(r1, c).alpha + c2 * alpha(r2, c).alpha
        assert lhs == pytest.approx(rhs, abs=1e-8 * (1 + abs(lhs)))


def test_alpha_covector(seeded_rep):
    for c in CLASSES6[::17]:
        assert alpha_covector(seeded_rep, c) @ seeded_rep.translations == pytest.approx(
            alpha(seeded_rep, c).alpha, abs=1e-10
        )
    assert np.allclose(alpha_many(seeded_rep, CLASSES6[:5]), [alpha(seeded_rep, c).alpha for c in CLASSES6[:5]])


def test_alpha_dot_basics(seeded_rep):
    zero = TangentCocycle(seeded_rep, np.zeros(6))
    radial = TangentCocycle.radial(seeded_rep)
    for c in CLASSES6[::9]:
        assert alpha_dot(zero, c) == 0.0
        assert alpha_dot(radial, c) == pytest.approx(alpha(seeded_rep, c).alpha, abs=1e-12)


def test_alpha_dot_matches_finite_differences(seeded_rep):
    rng = np.random.default_rng(3)
    h = 1e-5
    U = seeded_rep.translations
    classes = enumerate_classes(2, 5)
    for _ in range(40):
        udot = rng.standard_normal(6)
        c = classes[int(rng.integers(len(classes)))]
        fd = (
            alpha(seeded_rep.with_translations(U + h * udot), c).alpha
            - alpha(seeded_rep.with_translations(U - h * udot), c).alpha
        ) / (2 * h)
        assert alpha_dot(TangentCocycle(seeded_rep, udot), c) == pytest.approx(fd, abs=1e-6)


def test_coboundary_recovery(seeded_rep):
    rng = np.random.default_rng(4)
    v0 = rng.standard_normal(3)
    tc = TangentCocycle.coboundary(seeded_rep, v0)
    res = solve_coboundary(seeded_rep, tc)
    assert res.feasible and res.null_dim == 0
    assert np.allclose(res.v, v0, atol=1e-10)
    for c in CLASSES6:
        assert abs(alpha_dot(tc, c)) <= 1e-8


def test_coboundary_trivial_and_infeasible(seeded_rep):
    res = solve_coboundary(seeded_rep, TangentCocycle(seeded_rep, np.zeros(6)))
    assert res.feasible and np.allclose(res.v, 0)
    radial = TangentCocycle.radial(seeded_rep)
    res = solve_coboundary(seeded_rep, radial)
    assert not res.feasible
    a = alpha(seeded_rep, (1,)).alpha
    assert a != 0 and alpha_dot(radial, (1,)) == pytest.approx(a)


def test_coboundary_null_dimension_rank_one():
    # a single boost fixes e3, so v is only determined modulo the fixed axis
    rep = Representation(SP1, (AffineMap(boost(2.0), np.zeros(3)),))
    v0 = np.array([0.3, -0.2, 5.0])
    res = solve_coboundary(rep, TangentCocycle.coboundary(rep, v0))
    assert res.feasible and res.null_dim == 1
    assert np.allclose(res.v[:2], v0[:2])


def test_n3_smoke():
    # norms grow like mu^6 per letter, so the 1e-7 tolerances hold to length 2;
    # length 3 is compared with the 60-digit reference at 1e-6
    rep = build_family(SeededFamily(family="ams_odd_n", n=3))
    assert rep.space.dim == 7
    for c in enumerate_classes(2, 2):
        r = alpha(rep, c)
        assert r.adjugate_ok
        ainv = alpha(rep, canonical_class(inverse(c.rep_word))).alpha
        assert ainv == pytest.approx(r.alpha, rel=1e-7, abs=1e-9)
        assert neutral_projection_identity(rep.space, evaluate(rep, c.rep_word).linear) < 1e-7
    for c in enumerate_classes(2, 1):
        a = alpha(rep, c).alpha
        assert alpha(rep, canonical_class(c.rep_word * 2)).alpha == pytest.approx(2 * a, rel=1e-7)
    for c in enumerate_classes(2, 3, min_len=3):
        ref = mp_alpha(rep, c.rep_word, dps=80)
        assert alpha(rep, c).alpha == pytest.approx(ref, abs=1e-6 * (1 + abs(ref)))
