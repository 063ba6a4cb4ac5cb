"""Affine maps in SO_0(n, n+1) x R^{2n+1} and free-group representations."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .linalg_core import QuadraticSpace, check_condition, make_quadratic_space
from .words import ConjClass, Word, enumerate_classes

#: Tolerance on |L^t Q L - Q| and |det L - 1|, relative to max(1, |L|^2).
MEMBERSHIP_TOL = 1e-9
#: Words whose form drift |L^t Q L - Q|_max / max(1, |L|^2) exceeds this are rejected.
DRIFT_LIMIT = 1e-6


class DriftError(ArithmeticError):
    """Accumulated rounding broke form preservation along a word."""


@dataclass(frozen=True)
class AffineMap:
    """x -> L x + u."""

    linear: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        L = np.array(self.linear, dtype=float)
        u = np.array(self.translation, dtype=float)
        if L.ndim != 2 or L.shape[0] != L.shape[1] or u.shape != (L.shape[0],):
            raise ValueError(f"shape mismatch: linear {L.shape}, translation {u.shape}")
        if not (np.all(np.isfinite(L)) and np.all(np.isfinite(u))):
            raise ValueError("non-finite entries")
        L.setflags(write=False)
        u.setflags(write=False)
        object.__setattr__(self, "linear", L)
        object.__setattr__(self, "translation", u)

    @property
    def dim(self) -> int:
        return self.linear.shape[0]

    @classmethod
    def identity(cls, dim: int) -> "AffineMap":
        return cls(np.eye(dim), np.zeros(dim))

    def __matmul__(self, other: "AffineMap") -> "AffineMap":
        return compose(self, other)

    def apply(self, x) -> np.ndarray:
        return self.linear @ np.asarray(x, dtype=float) + self.translation


def compose(a: AffineMap, b: AffineMap) -> AffineMap:
    """a o b = (L_a L_b, L_a u_b + u_a)."""
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a.dim} vs {b.dim}")
    return AffineMap(a.linear @ b.linear, a.linear @ b.translation + a.translation)


def invert(a: AffineMap, space: QuadraticSpace | None = None) -> AffineMap:
    """(L^-1, -L^-1 u).

    With a space given, L^-1 = Q L^t Q, which is exact for form-preserving L.
    Otherwise a general solve is used.  Both paths apply the condition guard.
    """
    check_condition(a.linear)
    if space is not None:
        if space.dim != a.dim:
            raise ValueError("dimension mismatch")
        Q = space.q_matrix
        Li = Q @ a.linear.T @ Q
    else:
        Li = np.linalg.inv(a.linear)
    return AffineMap(Li, -Li @ a.translation)


@dataclass(frozen=True)
class MembershipReport:
    form_residual: float
    det: float
    component_value: float
    accepted: bool


def check_membership(space: QuadraticSpace, L, tol: float = MEMBERSHIP_TOL) -> MembershipReport:
    """Test L in SO_0(n, n+1).

    The component test is the sign of det of the top-left n x n block: it is
    positive exactly when L keeps the orientation of the positive-definite
    n-plane.
    """
    L = np.asarray(L, dtype=float)
    if L.shape != (space.dim, space.dim):
        raise ValueError(f"expected a {space.dim}x{space.dim} matrix, got {L.shape}")
    Q = space.q_matrix
    scale = max(1.0, float(np.linalg.norm(L, 2)) ** 2)
    resid = float(np.abs(L.T @ Q @ L - Q).max())
    det = float(np.linalg.det(L))
    comp = float(np.linalg.det(L[: space.n, : space.n]))
    ok = resid <= tol * scale and abs(det - 1.0) <= tol * scale and comp > 0
    return MembershipReport(resid, det, comp, bool(ok))


def form_drift(space: QuadraticSpace, L) -> float:
    """Scale-free loss of form preservation, |L^t Q L - Q|_max / max(1, |L|^2)."""
    Q = space.q_matrix
    return float(np.abs(L.T @ Q @ L - Q).max() / max(1.0, np.linalg.norm(L, 2) ** 2))


@dataclass(frozen=True)
class Representation:
    """Images of free generators a_1..a_r in G."""

    space: QuadraticSpace
    gen_images: tuple[AffineMap, ...]
    label: str = ""
    inv_images: tuple[AffineMap, ...] = field(default=(), repr=False, compare=False)

    def __post_init__(self):
        gens = tuple(self.gen_images)
        if not gens:
            raise ValueError("need at least one generator")
        for i, g in enumerate(gens):
            if g.dim != self.space.dim:
                raise ValueError(f"generator {i + 1} has dimension {g.dim}")
        object.__setattr__(self, "gen_images", gens)
        if not self.inv_images:
            object.__setattr__(
                self, "inv_images", tuple(invert(g, self.space) for g in gens)
            )

    @property
    def rank(self) -> int:
        return len(self.gen_images)

    @property
    def n(self) -> int:
        return self.space.n

    def image(self, letter: int) -> AffineMap:
        if letter == 0 or abs(letter) > self.rank:
            raise ValueError(f"letter {letter} outside rank {self.rank}")
        return self.gen_images[letter - 1] if letter > 0 else self.inv_images[-letter - 1]

    @property
    def linear_parts(self) -> np.ndarray:
        return np.stack([g.linear for g in self.gen_images])

    @property
    def translations(self) -> np.ndarray:
        """Generator translations stacked into one vector of length r(2n+1)."""
        return np.concatenate([g.translation for g in self.gen_images])

    def with_translations(self, U, label: str | None = None) -> "Representation":
        """Same linear parts, generator translations taken from the stacked U."""
        U = np.asarray(U, dtype=float).reshape(self.rank, self.space.dim)
        gens = tuple(AffineMap(g.linear, u) for g, u in zip(self.gen_images, U))
        return Representation(self.space, gens, self.label if label is None else label)

    def validate(self) -> list[MembershipReport]:
        """Membership reports per generator; raises on the first failure."""
        reps = []
        for i, g in enumerate(self.gen_images):
            r = check_membership(self.space, g.linear)
            if not r.accepted:
                raise ValueError(
                    f"generator {i + 1} not in SO_0({self.n},{self.n + 1}): "
                    f"form residual {r.form_residual:.2e}, det {r.det:.6f}, "
                    f"component {r.component_value:.3e}"
                )
            reps.append(r)
        return reps

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "rank": self.rank,
            "generators": [
                {"linear": g.linear.tolist(), "translation": g.translation.tolist()}
                for g in self.gen_images
            ],
            "label": self.label,
        }


@dataclass(frozen=True)
class TangentCocycle:
    """Variation u-dot of the generator translations with linear parts fixed."""

    base: Representation
    dot_translations: np.ndarray

    def __post_init__(self):
        d = np.array(self.dot_translations, dtype=float).reshape(
            self.base.rank, self.base.space.dim
        )
        d.setflags(write=False)
        object.__setattr__(self, "dot_translations", d)

    @property
    def stacked(self) -> np.ndarray:
        return self.dot_translations.reshape(-1)

    @property
    def as_representation(self) -> Representation:
        """(L, u-dot), whose Margulis invariants are the derivative spectrum."""
        return self.base.with_translations(self.stacked)

    def scaled(self, c: float) -> "TangentCocycle":
        return TangentCocycle(self.base, c * self.dot_translations)

    @classmethod
    def radial(cls, rep: Representation) -> "TangentCocycle":
        return cls(rep, rep.translations)

    @classmethod
    def coboundary(cls, rep: Representation, v) -> "TangentCocycle":
        """u-dot(a_i) = v - L(a_i) v."""
        v = np.asarray(v, dtype=float)
        return cls(rep, np.stack([v - g.linear @ v for g in rep.gen_images]))


def representation_from_json(data: dict) -> Representation:
    """Parse the representation schema; errors name the offending field."""
    if not isinstance(data, dict):
        raise ValueError("top level: expected an object")
    for key in ("n", "rank", "generators"):
        if key not in data:
            raise ValueError(f"missing field {key!r}")
    n, rank = data["n"], data["rank"]
    if not isinstance(n, int) or n < 1:
        raise ValueError(f"field 'n': expected a positive integer, got {n!r}")
    if not isinstance(rank, int) or rank < 1:
        raise ValueError(f"field 'rank': expected a positive integer, got {rank!r}")
    gens = data["generators"]
    if not isinstance(gens, list) or len(gens) != rank:
        raise ValueError(f"field 'generators': expected a list of {rank} entries")
    space = make_quadratic_space(n)
    d = space.dim
    maps = []
    for i, g in enumerate(gens):
        where = f"generators[{i}]"
        if not isinstance(g, dict) or "linear" not in g or "translation" not in g:
            raise ValueError(f"{where}: needs 'linear' and 'translation'")
        try:
            L = np.array(g["linear"], dtype=float)
            u = np.array(g["translation"], dtype=float)
        except (TypeError, ValueError) as exc:
            raise ValueError(f"{where}: non-numeric entry ({exc})") from None
        if L.shape != (d, d):
            raise ValueError(f"{where}.linear: expected {d}x{d}, got shape {L.shape}")
        if u.shape != (d,):
            raise ValueError(f"{where}.translation: expected length {d}, got shape {u.shape}")
        if not (np.all(np.isfinite(L)) and np.all(np.isfinite(u))):
            raise ValueError(f"{where}: non-finite entry")
        r = check_membership(space, L)
        if not r.accepted:
            raise ValueError(
                f"{where}.linear: not in SO_0({n},{n + 1}) (form residual "
                f"{r.form_residual:.2e}, det {r.det:.6f}, component {r.component_value:.3e})"
            )
        maps.append(AffineMap(L, u))
    label = data.get("label", "")
    if not isinstance(label, str):
        raise ValueError("field 'label': expected a string")
    return Representation(space, tuple(maps), label)


def load_representation(path) -> Representation:
    with open(path) as fh:
        return representation_from_json(json.load(fh))


def save_representation(rep: Representation, path) -> None:
    with open(path, "w") as fh:
        json.dump(rep.to_json(), fh, indent=2)
        fh.write("\n")


def evaluate(rep: Representation, word: Sequence[int], *, check_drift: bool = False) -> AffineMap:
    """Left-to-right product of generator images; the empty word gives the identity."""
    d = rep.space.dim
    L = np.eye(d)
    u = np.zeros(d)
    for x in word:
        g = rep.image(int(x))
        u = L @ g.translation + u
        L = L @ g.linear
    if check_drift:
        drift = form_drift(rep.space, L)
        if drift > DRIFT_LIMIT:
            raise DriftError(f"form drift {drift:.2e} along word of length {len(word)}")
    return AffineMap(L, u)


def evaluate_batch(rep: Representation, words: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Linear parts and translation transports for equal-length words.

    ``words`` is an integer array (m, length).  Returns L with shape (m, d, d)
    and M with shape (m, d, r*d) such that u(w) = M @ rep.translations.
    The transport M does not depend on the translations, which makes Margulis
    invariants linear functionals of them.
    """
    d, r = rep.space.dim, rep.rank
    words = np.asarray(words, dtype=np.int64)
    m = words.shape[0]
    lin = np.empty((2 * r + 1, d, d))
    emb = np.zeros((2 * r + 1, d, r * d))
    for i, g in enumerate(rep.gen_images, start=1):
        lin[r + i] = g.linear
        emb[r + i, :, (i - 1) * d : i * d] = np.eye(d)
        gi = rep.inv_images[i - 1].linear
        lin[r - i] = gi
        emb[r - i, :, (i - 1) * d : i * d] = -gi
    L = np.broadcast_to(np.eye(d), (m, d, d)).copy()
    M = np.zeros((m, d, r * d))
    for j in range(words.shape[1] if words.ndim == 2 else 0):
        k = words[:, j] + r
        M += L @ emb[k]
        L = L @ lin[k]
    return L, M


def scale_translation(rep: Representation, c: float) -> Representation:
    """(L, u) -> (L, c u) on every generator."""
    return rep.with_translations(c * rep.translations)


def same_linear_parts(rep0: Representation, rep1: Representation, tol: float = 1e-10) -> bool:
    return (
        rep0.space.n == rep1.space.n
        and rep0.rank == rep1.rank
        and bool(np.all(np.abs(rep0.linear_parts - rep1.linear_parts) <= tol))
    )


def interpolate(rep0: Representation, rep1: Representation, t: float) -> Representation:
    """Translations (1-t) u_0 + t u_1 over shared linear parts."""
    if not same_linear_parts(rep0, rep1):
        raise ValueError("interpolation needs equal linear parts")
    U = (1.0 - t) * rep0.translations + t * rep1.translations
    return rep0.with_translations(U, label=f"interp({rep0.label},{rep1.label},{t:g})")


@dataclass
class ProximalityReport:
    max_len: int
    words_checked: int
    min_log_gap: float
    threshold: float
    flagged: list[Word]
    top_moduli: dict[Word, list[float]] = field(repr=False, default_factory=dict)

    @property
    def passed(self) -> bool:
        return not self.flagged


def proximality_scan(
    rep: Representation,
    max_len: int,
    *,
    min_log_gap: float = 1e-3,
    classes: Sequence[ConjClass] | None = None,
) -> ProximalityReport:
    """Check the gap between the n-th and (n+1)-th eigenvalue moduli.

    Every cyclically reduced class representative up to max_len is tested;
    a word is flagged when log(|lambda_n| / |lambda_{n+1}|) < min_log_gap.
    """
    if max_len < 1:
        raise ValueError("max_len must be at least 1")
    n = rep.space.n
    if classes is None:
        classes = enumerate_classes(rep.rank, max_len)
    flagged: list[Word] = []
    tops: dict[Word, list[float]] = {}
    worst = np.inf
    for c in classes:
        L = evaluate(rep, c.rep_word).linear
        mod = np.sort(np.abs(np.linalg.eigvals(L)))[::-1]
        gap = np.log(mod[n - 1]) - np.log(mod[n]) if mod[n] > 0 else np.inf
        worst = min(worst, gap)
        tops[c.rep_word] = mod[:n].tolist()
        if not gap >= min_log_gap:
            flagged.append(c.rep_word)
    return ProximalityReport(max_len, len(classes), float(worst), min_log_gap, flagged, tops)
