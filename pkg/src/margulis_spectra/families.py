"""Seeded example representations.

Both families start from a pair (A, B) in SL(2, R) generating a three-holed
sphere group: tr A, tr B and tr AB are fixed by three boundary lengths, with
tr AB negative.  The pair is conjugated to be balanced (small entries) and
pushed through the irreducible representation Sym^{2n}, which preserves a
form of signature (n, n+1).

For n = 1, translations are the minimum-norm cocycle with prescribed Margulis
invariants on the boundary classes a, b and ab; three invariants fix the
sign on every class.  For n >= 3 they do not, and the translations instead
maximise the margin min alpha / length over the classes of length <= 3.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb

import numpy as np
from scipy.linalg import expm
from scipy.optimize import linprog, minimize

from .affine_group import AffineMap, Representation
from .linalg_core import make_quadratic_space
from .margulis import alpha_covector
from .words import enumerate_classes

FAMILIES = ("schottky_so21", "ams_odd_n")


@dataclass(frozen=True)
class SeededFamily:
    """Parameters of a seeded example.

    ``strength`` is the mean boundary length of the pants group; larger
    values separate the ping-pong domains further.  The seed jitters the
    three boundary lengths by up to 15%.  For schottky_so21 the boundary
    Margulis invariants are ``translation_scale * targets`` (all ones by
    default); for ams_odd_n ``translation_scale`` is the margin
    min alpha / length on short classes and ``targets`` is unused.
    """

    family: str = "schottky_so21"
    n: int = 1
    rank: int = 2
    strength: float = 0.8
    translation_scale: float = 1.0
    seed: int = 7
    perturbation: float = 0.0
    targets: tuple[float, float, float] = (1.0, 1.0, 1.0)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}; choose from {FAMILIES}")
        if self.family == "schottky_so21" and self.n != 1:
            raise ValueError("schottky_so21 is the n = 1 family")
        if self.family == "ams_odd_n" and (self.n < 1 or self.n % 2 == 0):
            raise ValueError(
                f"n = {self.n} is even: for even n the affine group of R^(2n+1) with "
                "linear part in SO(n, n+1) admits no free subgroup acting properly "
                "discontinuously (Abels-Margulis-Soifer), so no Margulis spacetime exists"
            )
        if self.rank != 2:
            raise ValueError("seeded families are built from a rank 2 pants group")
        if not self.strength > 0:
            raise ValueError("strength must be positive")
        if len(self.targets) != 3:
            raise ValueError("targets are the invariants of a, b and ab")


def pants_pair(lengths) -> tuple[np.ndarray, np.ndarray]:
    """Balanced (A, B) in SL(2, R) with traces 2cosh(la/2), 2cosh(lb/2), -2cosh(lc/2) for A, B, AB."""
    la, lb, lc = (float(x) for x in lengths)
    y, z = 2 * np.cosh(lb / 2), -2 * np.cosh(lc / 2)
    e = np.exp(la / 2)
    A = np.diag([e, 1 / e])
    # B = [[p, 1], [p s - 1, s]] with p + s = tr B and e p + s / e = tr AB
    p, s = np.linalg.solve([[1.0, 1.0], [e, 1 / e]], [y, z])
    B = np.array([[p, 1.0], [p * s - 1.0, s]])

    def conj(th):
        a, b, c = th
        upper = np.array([[np.exp(a), b], [0.0, np.exp(-a)]])
        rot = np.array([[np.cos(c), -np.sin(c)], [np.sin(c), np.cos(c)]])
        return upper @ rot

    def cost(th):
        G = conj(th)
        Gi = np.linalg.inv(G)
        return sum(np.sum((G @ X @ Gi) ** 2) for X in (A, B, A @ B))

    res = minimize(
        cost, np.zeros(3), method="Nelder-Mead",
        options=dict(xatol=1e-12, fatol=1e-14, maxiter=20000),
    )
    G = conj(res.x)
    Gi = np.linalg.inv(G)
    return G @ A @ Gi, G @ B @ Gi


def sym_power(g, m: int) -> np.ndarray:
    """Action of g in SL(2) on degree-m binary forms, basis x^(m-k) y^k."""
    (a, b), (c, d) = np.asarray(g, dtype=float)
    gx = np.array([a, c])  # image of x, coefficients on (x, y)
    gy = np.array([b, d])
    out = np.zeros((m + 1, m + 1))
    for k in range(m + 1):
        poly = np.array([1.0])
        for _ in range(m - k):
            poly = np.convolve(poly, gx)
        for _ in range(k):
            poly = np.convolve(poly, gy)
        out[:, k] = poly
    return out


def sym_form(m: int) -> np.ndarray:
    """The invariant form <x^(m-k) y^k, x^(m-j) y^j> = delta_{k+j,m} (-1)^k / C(m,k)."""
    B = np.zeros((m + 1, m + 1))
    for k in range(m + 1):
        B[k, m - k] = (-1) ** k / comb(m, k)
    return B


def to_split_frame(n: int) -> np.ndarray:
    """P with P^t (+-B) P = diag(I_n, -I_{n+1}) for the Sym^{2n} form B."""
    B = sym_form(2 * n)
    if n % 2 == 0:
        B = -B
    w, V = np.linalg.eigh(B)
    pos = [i for i in np.argsort(-w) if w[i] > 0]
    neg = [i for i in np.argsort(w) if w[i] < 0]
    if len(pos) != n or len(neg) != n + 1:
        raise AssertionError("unexpected signature of the invariant form")
    order = pos + neg
    return V[:, order] / np.sqrt(np.abs(w[order]))


def _random_so(n: int, rng: np.random.Generator) -> np.ndarray:
    d = 2 * n + 1
    K = rng.standard_normal((d, d))
    K = (K - K.T) / 2
    Q = np.diag(np.concatenate([np.ones(n), -np.ones(n + 1)]))
    return Q @ K / np.linalg.norm(K)


def linear_parts(spec: SeededFamily) -> tuple[list[np.ndarray], np.ndarray]:
    rng = np.random.default_rng(spec.seed)
    lengths = spec.strength * (1.0 + 0.15 * rng.uniform(-1.0, 1.0, 3))
    A, B = pants_pair(lengths)
    n = spec.n
    P = to_split_frame(n)
    Pi = np.linalg.inv(P)
    gens = [Pi @ sym_power(X, 2 * n) @ P for X in (A, B)]
    if spec.perturbation:
        gens = [g @ expm(spec.perturbation * _random_so(n, rng)) for g in gens]
    return gens, lengths


def boundary_cocycle(rep: Representation, targets) -> np.ndarray:
    """Minimum-norm stacked translations with alpha = targets on a, b, ab."""
    G = np.stack([alpha_covector(rep, w) for w in ((1,), (2,), (1, 2))])
    U, *_ = np.linalg.lstsq(G, np.asarray(targets, dtype=float), rcond=None)
    return U


def margin_cocycle(rep: Representation, max_len: int = 3) -> np.ndarray:
    """Stacked translations maximising min alpha / length over short classes.

    Solved as a linear program over the box |U_i| <= 1, then rescaled so the
    margin is 1.  Raises ValueError when no positive margin exists.
    """
    classes = enumerate_classes(rep.rank, max_len)
    G = np.stack([alpha_covector(rep, c) / c.length for c in classes])
    m = G.shape[1]
    cost = np.zeros(m + 1)
    cost[-1] = -1.0
    res = linprog(
        cost,
        A_ub=np.hstack([-G, np.ones((len(G), 1))]),
        b_ub=np.zeros(len(G)),
        bounds=[(-1.0, 1.0)] * m + [(None, None)],
    )
    if res.status != 0 or not res.x[-1] > 0:
        raise ValueError("no translation part is positive on every short class")
    return res.x[:-1] / res.x[-1]


def build_family(spec: SeededFamily) -> Representation:
    """Deterministic representation for the seeded parameters."""
    gens, lengths = linear_parts(spec)
    targets = spec.translation_scale * np.asarray(spec.targets, dtype=float)
    space = make_quadratic_space(spec.n)
    d = space.dim
    label = (
        f"{spec.family}(n={spec.n}, strength={spec.strength:g}, "
        f"scale={spec.translation_scale:g}, seed={spec.seed})"
    )
    base = Representation(space, tuple(AffineMap(g, np.zeros(d)) for g in gens), label)
    if spec.translation_scale == 0:
        return base
    if spec.n == 1:
        return base.with_translations(boundary_cocycle(base, targets))
    return base.with_translations(spec.translation_scale * margin_cocycle(base))
