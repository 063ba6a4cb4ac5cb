"""Neutral vectors, Margulis invariants and their first variation."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .affine_group import Representation, TangentCocycle, evaluate, evaluate_batch
from .linalg_core import QuadraticSpace, adjugate_cofactor, expanding_subspace, unit_eigenspace
from .words import ConjClass, canonical_class

log = logging.getLogger(__name__)

#: Relative tolerance for |alpha^2 - adjugate expression| / (1 + alpha^2).
ADJUGATE_TOL = 1e-7
#: Feasibility threshold of the coboundary solve, relative to 1 + |u-dot|.
COBOUNDARY_TOL = 1e-7


class NonRegularError(ArithmeticError):
    """The linear part has no isolated unit eigenvalue with a proximal splitting."""


class DegenerateTraceError(ArithmeticError):
    """Tr adj(I - L) vanishes numerically."""


@dataclass(frozen=True)
class NeutralData:
    nu: np.ndarray
    q_norm_sign: int
    orientation_det: float
    regularity: float


def neutral_vector(space: QuadraticSpace, L) -> NeutralData:
    """Unit-eigenvector of L with the orientation convention.

    Let V+ and V- be the expanding and contracting n-dimensional invariant
    subspaces.  nu spans their Q-orthogonal complement and |<nu|nu>| = 1.
    Its sign makes det[b-, nu, b+] positive, where b+ is any basis of V+ and
    b- is the Q-dual basis of V- (<b-_i|b+_j> = delta_ij).  The sign does not
    depend on the basis chosen, and it is unchanged under conjugation.
    """
    L = np.asarray(L, dtype=float)
    n, d = space.n, space.dim
    if L.shape != (d, d):
        raise ValueError(f"expected a {d}x{d} matrix, got {L.shape}")
    kernel = unit_eigenspace(space, L)
    if len(kernel) != 1:
        raise NonRegularError(f"unit eigenspace has dimension {len(kernel)}")
    s = np.linalg.svd(np.eye(d) - L, compute_uv=False)
    Q = space.q_matrix
    try:
        vp = expanding_subspace(L, n)
        vm = expanding_subspace(Q @ L.T @ Q, n)
    except ValueError as exc:
        raise NonRegularError(str(exc)) from None
    _, _, vt = np.linalg.svd(np.vstack([vp.T @ Q, vm.T @ Q]))
    nu = vt[-1]
    q = float(nu @ Q @ nu)
    if q == 0.0:
        raise NonRegularError("neutral direction is isotropic")
    nu = nu / np.sqrt(abs(q))
    P = vp.T @ Q @ vm
    bm = vm @ np.linalg.inv(P)
    det = float(np.linalg.det(np.column_stack([bm, nu, vp])))
    if det < 0:
        nu, det = -nu, -det
    return NeutralData(nu=nu, q_norm_sign=1 if q > 0 else -1, orientation_det=det, regularity=float(s[-2]))


@dataclass(frozen=True)
class AlphaRecord:
    cls: ConjClass
    alpha: float
    alpha_sq_adjugate: float
    mismatch: float

    @property
    def word_len(self) -> int:
        return self.cls.length

    @property
    def adjugate_ok(self) -> bool:
        return self.mismatch <= ADJUGATE_TOL * (1.0 + self.alpha**2)


def _as_class(cls) -> ConjClass:
    return cls if isinstance(cls, ConjClass) else canonical_class(cls)


def _adjugate_expression(space: QuadraticSpace, L, u, normalization: str) -> float:
    A = adjugate_cofactor(np.eye(space.dim) - L, extended=True)
    tr = np.trace(A)
    if abs(tr) < 1e-10 * np.abs(A).max() or tr == 0.0:
        raise DegenerateTraceError(f"Tr adj(I-L) = {float(tr):.3e} is degenerate")
    u = np.asarray(u, dtype=np.longdouble)
    raw = float((u * np.diag(space.q_matrix)) @ A @ u / tr)
    if normalization == "raw":
        return raw
    if normalization != "corrected":
        raise ValueError(f"unknown normalization {normalization!r}")
    # the neutral vector is Q-negative, so the raw expression equals -alpha^2
    return -raw


def alpha(rep: Representation, cls, *, word=None) -> AlphaRecord:
    """<u(gamma)|nu(gamma)> together with the adjugate cross-check.

    ``cls`` may be a ConjClass or any word; ``word`` overrides the word that is
    evaluated (a conjugate of the representative, say).
    """
    c = _as_class(cls)
    w = c.rep_word if word is None else tuple(word)
    g = evaluate(rep, w)
    nd = neutral_vector(rep.space, g.linear)
    a = float(g.translation @ rep.space.q_matrix @ nd.nu)
    sq = _adjugate_expression(rep.space, g.linear, g.translation, "corrected")
    return AlphaRecord(c, a, sq, abs(a * a - sq))


def alpha_squared_adjugate(rep: Representation, cls, *, normalization: str = "corrected") -> float:
    """<adj(I-L) u|u> / Tr adj(I-L), sign-corrected by default.

    The rational expression as written equals <nu|nu> alpha^2, and the
    neutral vector pairs to -1 with itself, so "corrected" multiplies by
    q_norm_sign = -1.  Use normalization="raw" for the unmodified expression.
    """
    c = _as_class(cls)
    g = evaluate(rep, c.rep_word)
    return _adjugate_expression(rep.space, g.linear, g.translation, normalization)


def neutral_projection_identity(space: QuadraticSpace, L) -> float:
    """Relative residual of adj(I-L) nu = Tr[adj(I-L)] nu."""
    nd = neutral_vector(space, L)
    A = adjugate_cofactor(np.eye(space.dim) - np.asarray(L, dtype=float))
    tv = np.trace(A) * nd.nu
    return float(np.linalg.norm(A @ nd.nu - tv) / np.linalg.norm(tv))


def alpha_dot(tc: TangentCocycle, cls) -> float:
    """<u-dot(gamma)|nu(gamma)>, u-dot expanded along the word by the cocycle law."""
    c = _as_class(cls)
    base = evaluate(tc.base, c.rep_word)
    nd = neutral_vector(tc.base.space, base.linear)
    udot = evaluate(tc.as_representation, c.rep_word).translation
    return float(udot @ tc.base.space.q_matrix @ nd.nu)


@dataclass(frozen=True)
class CoboundaryResult:
    feasible: bool
    v: np.ndarray
    residuals: np.ndarray
    null_dim: int
    tolerance: float


def solve_coboundary(rep: Representation, tc: TangentCocycle) -> CoboundaryResult:
    """Least-squares v with (I - L(a_i)) v = u-dot(a_i) for every generator.

    Feasible iff the largest generator residual is below
    1e-7 (1 + |u-dot|).  The minimum-norm solution is returned, and
    ``null_dim`` is the dimension of the stacked system's kernel.
    """
    d = rep.space.dim
    A = np.vstack([np.eye(d) - g.linear for g in rep.gen_images])
    b = tc.dot_translations.reshape(-1)
    v, _, rank, _ = np.linalg.lstsq(A, b, rcond=None)
    res = np.linalg.norm((A @ v - b).reshape(rep.rank, d), axis=1)
    tol = COBOUNDARY_TOL * (1.0 + float(np.linalg.norm(b)))
    return CoboundaryResult(bool(res.max() < tol), v, res, int(d - rank), tol)


def alpha_covector(rep: Representation, cls) -> np.ndarray:
    """Row vector g with alpha(gamma) = g @ U for any stacked translations U.

    Only the linear parts of ``rep`` enter.
    """
    c = _as_class(cls)
    L, M = evaluate_batch(rep, np.array([c.rep_word]))
    nd = neutral_vector(rep.space, L[0])
    return M[0].T @ rep.space.q_matrix @ nd.nu


def alpha_many(rep: Representation, classes: Sequence) -> np.ndarray:
    """Plain per-class loop over alpha(); reference path for tests."""
    return np.array([alpha(rep, c).alpha for c in classes])
