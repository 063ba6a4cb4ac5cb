"""Dense linear algebra adapted to the split form Q = diag(I_n, -I_{n+1})."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from math import factorial

import numpy as np

#: Default kernel threshold of unit_eigenspace, relative to the top singular value.
KERNEL_RTOL = 1e-12
#: Absolute cap on that threshold.  I - L keeps singular values of order one
#: along contracting directions, which a purely relative threshold would
#: swallow once |L| passes 1e12.
KERNEL_ATOL = 1e-2
#: Matrices whose condition number exceeds this are refused wherever an
#: explicit inversion happens.
CONDITION_LIMIT = 1e12


class ConditionGuardError(ArithmeticError):
    """Raised when an inversion would be numerically meaningless."""


@dataclass(frozen=True)
class QuadraticSpace:
    """R^{2n+1} equipped with the form of signature (n, n+1)."""

    n: int
    q_matrix: np.ndarray = field(repr=False, compare=False)

    @property
    def dim(self) -> int:
        return 2 * self.n + 1

    @property
    def v0(self) -> np.ndarray:
        """The distinguished negative vector (0_n, 1, 0_n)."""
        v = np.zeros(self.dim)
        v[self.n] = 1.0
        return v

    def pair(self, x, y) -> float:
        return pairing(self, x, y)


def make_quadratic_space(n: int) -> QuadraticSpace:
    if int(n) != n or n < 1:
        raise ValueError(f"n must be a positive integer, got {n!r}")
    n = int(n)
    q = np.diag(np.concatenate([np.ones(n), -np.ones(n + 1)]))
    q.setflags(write=False)
    return QuadraticSpace(n=n, q_matrix=q)


def pairing(space: QuadraticSpace, x, y) -> float:
    """Return x^t Q y."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != (space.dim,) or y.shape != (space.dim,):
        raise ValueError(
            f"expected vectors of length {space.dim}, got {x.shape} and {y.shape}"
        )
    return float(x @ space.q_matrix @ y)


def _as_square(M) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    if M.ndim < 2 or M.shape[-1] != M.shape[-2]:
        raise ValueError(f"expected square matrices, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ValueError("matrix has non-finite entries")
    return M


def check_condition(M, limit: float = CONDITION_LIMIT) -> float:
    """Return the 2-norm condition number of M, raising past ``limit``."""
    cond = float(np.linalg.cond(_as_square(M)))
    if not cond <= limit:
        raise ConditionGuardError(f"condition number {cond:.3e} exceeds {limit:.0e}")
    return cond


@lru_cache(maxsize=None)
def _minor_index(d: int) -> np.ndarray:
    # idx[i] lists the d-1 indices left after deleting i
    return np.array([[k for k in range(d) if k != i] for i in range(d)], dtype=np.intp)


def _det_elimination(A: np.ndarray) -> np.ndarray:
    """Determinants of a stack (m, k, k) by partially pivoted elimination in A's dtype."""
    A = A.copy()
    m, k, _ = A.shape
    rows = np.arange(m)
    det = np.ones(m, dtype=A.dtype)
    for j in range(k):
        p = np.argmax(np.abs(A[:, j:, j]), axis=1) + j
        top = A[rows, p].copy()
        A[rows, p] = A[:, j]
        A[:, j] = top
        det = np.where(p != j, -det, det)
        piv = A[:, j, j]
        det = det * piv
        with np.errstate(divide="ignore", invalid="ignore"):
            f = np.where(piv[:, None] != 0, A[:, j + 1 :, j] / piv[:, None], 0)
        A[:, j + 1 :, :] -= f[:, :, None] * A[:, j, None, :]
    return det


def adjugate_cofactor(M, *, extended: bool = False) -> np.ndarray:
    """Transpose of the cofactor matrix, via (d-1)x(d-1) determinants.

    Accepts a single matrix or a stack with shape (..., d, d).  With
    ``extended`` the minors are evaluated in long double and the result is
    returned in long double.
    """
    M = _as_square(M)
    d = M.shape[-1]
    if d < 2:
        raise ValueError("adjugate needs dimension at least 2")
    idx = _minor_index(d)
    # minors[..., i, j] = M with row i and column j deleted
    rows = M[..., idx, :]  # (..., d, d-1, d)
    minors = np.swapaxes(rows[..., idx], -3, -2)  # (..., d, d, d-1, d-1)
    if extended:
        flat = minors.reshape(-1, d - 1, d - 1).astype(np.longdouble)
        dets = _det_elimination(flat).reshape(minors.shape[:-2])
    else:
        dets = np.linalg.det(minors)
    sign = (-1.0) ** np.add.outer(np.arange(d), np.arange(d))
    return np.swapaxes(sign * dets, -1, -2)


@lru_cache(maxsize=None)
def _partition_terms(m: int, parts: int) -> tuple[tuple[float, tuple[int, ...]], ...]:
    """Multiplicity vectors k with sum(l * k_l) = m, l = 1..parts, and their weights.

    The weight is prod_l (-1)^(k_l+1) / (k_l! l^k_l), taken over all l, so
    parts with k_l = 0 contribute a factor -1.
    """
    out = []

    def rec(l: int, rest: int, ks: list[int]) -> None:
        if l > parts:
            if rest == 0:
                w = 1.0
                for ll, k in enumerate(ks, start=1):
                    w *= (-1.0) ** (k + 1) / (factorial(k) * ll**k)
                out.append((w, tuple(ks)))
            return
        for k in range(rest // l + 1):
            rec(l + 1, rest - l * k, ks + [k])

    rec(1, m, [])
    return tuple(out)


def adjugate_trace_power(M) -> np.ndarray:
    """Adjugate from traces of powers (Cayley-Hamilton expansion).

    adj(g) = sum_{s=0}^{2n} c_s g^s, where c_s sums over multiplicity vectors
    with sum(l k_l) = 2n - s the products prod_l (-1)^{k_l+1} Tr[g^l]^{k_l}
    / (k_l! l^{k_l}).  Only odd dimensions are accepted.
    """
    M = _as_square(M)
    if M.ndim != 2:
        raise ValueError("expected a single matrix")
    d = M.shape[0]
    if d % 2 == 0:
        raise ValueError(f"trace-power adjugate is specialised to odd dimension, got {d}")
    top = d - 1
    powers = [np.eye(d)]
    for _ in range(top):
        powers.append(powers[-1] @ M)
    traces = np.array([np.trace(p) for p in powers[1:]])  # Tr g^l, l = 1..top
    adj = np.zeros((d, d))
    for s in range(d):
        coeff = 0.0
        for w, ks in _partition_terms(top - s, top):
            term = w
            for l, k in enumerate(ks, start=1):
                if k:
                    term *= traces[l - 1] ** k
            coeff += term
        adj += coeff * powers[s]
    return adj


def unit_eigenspace(space: QuadraticSpace, L, tol: float | None = None) -> list[np.ndarray]:
    """Orthonormal basis of ker(I - L) from an SVD.

    The default threshold is 1e-12 times the largest singular value of I - L,
    capped at 1e-2.  The kernel's own singular value sits near 10 eps
    sigma_max, while for a regular element the next one stays O(1); a looser
    relative threshold would merge them.  An empty list means L has no
    numerical unit eigenvalue.
    """
    L = _as_square(L)
    if L.shape != (space.dim, space.dim):
        raise ValueError(f"expected a {space.dim}x{space.dim} matrix, got {L.shape}")
    _, s, vt = np.linalg.svd(np.eye(space.dim) - L)
    if tol is None:
        tol = min(KERNEL_RTOL * s[0], KERNEL_ATOL)
    return [vt[i].copy() for i in range(space.dim) if s[i] <= tol]


def expanding_subspace(L, k: int) -> np.ndarray:
    """Orthonormal basis (columns) of the invariant subspace of the k
    eigenvalues of largest modulus.

    Uses an ordered real Schur form; the split point is the geometric mean of
    the k-th and (k+1)-th moduli.  Raises ValueError when they coincide.
    """
    from scipy.linalg import schur

    L = _as_square(L)
    mod = np.sort(np.abs(np.linalg.eigvals(L)))[::-1]
    if not mod[k - 1] > mod[k] * (1 + 1e-12):
        raise ValueError("no modulus gap between the k-th and (k+1)-th eigenvalues")
    cut2 = mod[k - 1] * mod[k]
    _, Z, sdim = schur(L, output="real", sort=lambda re, im: re * re + im * im > cut2)
    if sdim != k:
        raise ValueError(f"ordered Schur form split {sdim} eigenvalues, expected {k}")
    return Z[:, :k]
