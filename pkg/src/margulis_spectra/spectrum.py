"""Spectrum tables and the estimators built on them.

For a fixed linear part, every Margulis invariant is a linear functional of
the stacked generator translations U: alpha(gamma) = g_gamma . U with
g_gamma = M_gamma^t Q nu_gamma, where u(gamma) = M_gamma U.  A
:class:`LinearSpectrum` stores nu, M and the normalised adjugate of
I - L(gamma) per class, so the tables of every representation sharing those
linear parts (scalings, interpolations, finite-difference stencils) are exact
linear images of one enumeration.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Sequence

import numpy as np
from scipy.special import expit
from scipy.stats import linregress

from .affine_group import (
    DRIFT_LIMIT,
    Representation,
    TangentCocycle,
    evaluate_batch,
    interpolate,
    same_linear_parts,
    scale_translation,
)
from .linalg_core import adjugate_cofactor
from .margulis import ADJUGATE_TOL, AlphaRecord, NonRegularError, neutral_vector
from .words import DEFAULT_CLASS_CAP, ConjClass, class_arrays, enumerate_classes

log = logging.getLogger(__name__)

POSITIVE = "PositiveUniform"
NEGATIVE = "NegativeUniform"
MIXED = "SignMixed"

#: Default kernel width of the smoothed orbit count, relative to T.
DEFAULT_SMOOTHING = 0.05
#: Number of points of the geometric T-grid.
GRID_POINTS = 8
#: Minimum integer count at every grid point.
MIN_COUNT = 10
#: Lower end of the default grid relative to its upper end.
GRID_SPAN = 0.5
#: Rounding floor of a second difference: J carries ~1e-15 errors, which the
#: stencil amplifies by 64 / (12 s^2), about 1e-11 at s = 0.02.
SECOND_DIFF_FLOOR = 1e-10


class ImproperError(ValueError):
    """The spectrum does not have a uniform sign."""


class InsufficientDataError(ValueError):
    """Too few classes below some grid point."""


def _pmap(fn: Callable, items: Sequence, threads: int) -> list:
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, items))


# ---------------------------------------------------------------------------
# tables


@dataclass(frozen=True, eq=False)
class LinearSpectrum:
    """Per-class data that depends only on the linear parts."""

    n: int
    rank: int
    max_len: int
    class_mode: str
    linear_parts: np.ndarray
    classes: tuple[ConjClass, ...]
    lengths: np.ndarray
    nu: np.ndarray  # (N, d)
    transport: np.ndarray  # (N, d, r d)
    adj_normalized: np.ndarray  # (N, d, d): adj(I - L) / Tr adj(I - L), long double
    norms: np.ndarray  # spectral norms of L(gamma)
    drift: np.ndarray
    log_gap: np.ndarray
    skipped: tuple[tuple[ConjClass, str], ...] = ()

    @property
    def dim(self) -> int:
        return 2 * self.n + 1

    def __len__(self) -> int:
        return len(self.classes)

    @cached_property
    def covectors(self) -> np.ndarray:
        """(N, r d) rows g with alpha = g . U."""
        q = np.concatenate([np.ones(self.n), -np.ones(self.n + 1)])
        return np.einsum("kde,kd->ke", self.transport, self.nu * q)

    def subset(self, mask: np.ndarray, max_len: int) -> "LinearSpectrum":
        idx = np.flatnonzero(mask)
        return LinearSpectrum(
            self.n, self.rank, max_len, self.class_mode, self.linear_parts,
            tuple(self.classes[i] for i in idx), self.lengths[idx], self.nu[idx],
            self.transport[idx], self.adj_normalized[idx], self.norms[idx],
            self.drift[idx], self.log_gap[idx],
            tuple(s for s in self.skipped if s[0].length <= max_len),
        )


def _neutral_rows(space, Ls: np.ndarray) -> list:
    out = []
    for L in Ls:
        try:
            nd = neutral_vector(space, L)
            mod = np.sort(np.abs(np.linalg.eigvals(L)))[::-1]
            out.append((nd.nu, float(np.log(mod[space.n - 1] / mod[space.n]))))
        except (NonRegularError, np.linalg.LinAlgError) as exc:
            out.append(str(exc) or type(exc).__name__)
    return out


def build_linear_spectrum(
    rep: Representation,
    max_len: int,
    *,
    class_mode: str = "all",
    threads: int = 1,
    cap: int = DEFAULT_CLASS_CAP,
    chunk: int = 2048,
) -> LinearSpectrum:
    """Enumerate classes and compute their translation-independent data.

    Words that are numerically non-regular, or whose form drift exceeds the
    limit, are skipped and listed.  Output is independent of ``threads``.
    """
    if class_mode not in ("all", "primitive"):
        raise ValueError(f"class_mode must be 'all' or 'primitive', got {class_mode!r}")
    space = rep.space
    d, n = space.dim, space.n
    Q = space.q_matrix
    classes = enumerate_classes(rep.rank, max_len, primitive_only=class_mode == "primitive", cap=cap)
    N = len(classes)
    nu = np.zeros((N, d))
    transport = np.zeros((N, d, rep.rank * d))
    adjn = np.zeros((N, d, d), dtype=np.longdouble)
    norms = np.zeros(N)
    drift = np.zeros(N)
    gap = np.zeros(N)
    ok = np.zeros(N, bool)
    reasons: dict[int, str] = {}
    for L_len, (pos, letters) in sorted(class_arrays(classes).items()):
        Ls, Ms = evaluate_batch(rep, letters)
        transport[pos] = Ms
        nrm = np.linalg.norm(Ls, 2, axis=(1, 2))
        norms[pos] = nrm
        resid = np.abs(np.swapaxes(Ls, 1, 2) @ Q @ Ls - Q).max(axis=(1, 2))
        drift[pos] = resid / np.maximum(1.0, nrm**2)
        A = adjugate_cofactor(np.eye(d) - Ls, extended=True)
        tr = np.trace(A, axis1=1, axis2=2)
        with np.errstate(divide="ignore", invalid="ignore"):
            adjn[pos] = A / tr[:, None, None]
        degenerate = np.abs(tr) < 1e-10 * np.abs(A).max(axis=(1, 2))
        blocks = [np.arange(i, min(i + chunk, len(pos))) for i in range(0, len(pos), chunk)]
        results = _pmap(lambda b: _neutral_rows(space, Ls[b]), blocks, threads)
        for b, res in zip(blocks, results):
            for j, r in zip(b, res):
                i = pos[j]
                if isinstance(r, str):
                    reasons[i] = f"non-regular: {r}"
                elif drift[i] > DRIFT_LIMIT:
                    reasons[i] = f"form drift {drift[i]:.2e}"
                elif degenerate[j]:
                    reasons[i] = "degenerate adjugate trace"
                else:
                    nu[i], gap[i] = r
                    ok[i] = True
    if reasons:
        log.warning("skipped %d of %d classes", len(reasons), N)
    keep = np.flatnonzero(ok)
    return LinearSpectrum(
        n=n,
        rank=rep.rank,
        max_len=max_len,
        class_mode=class_mode,
        linear_parts=rep.linear_parts.copy(),
        classes=tuple(classes[i] for i in keep),
        lengths=np.array([classes[i].length for i in keep], dtype=np.int64),
        nu=nu[keep],
        transport=transport[keep],
        adj_normalized=adjn[keep],
        norms=norms[keep],
        drift=drift[keep],
        log_gap=gap[keep],
        skipped=tuple((classes[i], reasons[i]) for i in sorted(reasons)),
    )


@dataclass(frozen=True, eq=False)
class SpectrumTable:
    """Margulis invariants of one representation on an enumerated class set."""

    linear: LinearSpectrum
    translations: np.ndarray
    rep_label: str = ""

    @cached_property
    def alphas(self) -> np.ndarray:
        return self.linear.covectors @ self.translations

    @cached_property
    def alpha_sq_adjugate(self) -> np.ndarray:
        u = (self.linear.transport @ self.translations).astype(np.longdouble)  # (N, d)
        q = np.concatenate([np.ones(self.linear.n), -np.ones(self.linear.n + 1)])
        # <adj u|u> / Tr adj, sign-corrected because <nu|nu> = -1
        return -np.einsum("kd,kde,ke->k", u * q, self.linear.adj_normalized, u).astype(float)

    @property
    def mismatch(self) -> np.ndarray:
        return np.abs(self.alphas**2 - self.alpha_sq_adjugate)

    @property
    def adjugate_ok(self) -> np.ndarray:
        return self.mismatch <= ADJUGATE_TOL * (1.0 + self.alphas**2)

    @property
    def lengths(self) -> np.ndarray:
        return self.linear.lengths

    @property
    def classes(self) -> tuple[ConjClass, ...]:
        return self.linear.classes

    @property
    def max_len(self) -> int:
        return self.linear.max_len

    @property
    def skipped(self) -> int:
        return len(self.linear.skipped)

    def __len__(self) -> int:
        return len(self.linear)

    @property
    def records(self) -> list[AlphaRecord]:
        a, sq, mm = self.alphas, self.alpha_sq_adjugate, self.mismatch
        return [AlphaRecord(c, float(a[i]), float(sq[i]), float(mm[i])) for i, c in enumerate(self.classes)]

    def with_translations(self, U, label: str | None = None) -> "SpectrumTable":
        return SpectrumTable(self.linear, np.asarray(U, dtype=float), self.rep_label if label is None else label)

    def scaled(self, c: float) -> "SpectrumTable":
        return self.with_translations(c * self.translations)

    def restrict(self, max_len: int) -> "SpectrumTable":
        """Sub-table of the classes with length <= max_len."""
        if max_len > self.max_len:
            raise ValueError("cannot extend a table by restriction")
        lin = self.linear.subset(self.linear.lengths <= max_len, max_len)
        return SpectrumTable(lin, self.translations, self.rep_label)

    def accepts(self, rep: Representation) -> bool:
        return (
            rep.n == self.linear.n
            and rep.rank == self.linear.rank
            and bool(np.all(np.abs(rep.linear_parts - self.linear.linear_parts) <= 1e-10))
        )

    def table_for(self, rep: Representation) -> "SpectrumTable":
        """Table of another representation with the same linear parts."""
        if not self.accepts(rep):
            raise ValueError("representation has different linear parts")
        return SpectrumTable(self.linear, rep.translations, rep.label)


def build_table(
    rep: Representation,
    max_len: int,
    *,
    class_mode: str = "all",
    threads: int = 1,
    linear: LinearSpectrum | None = None,
    cap: int = DEFAULT_CLASS_CAP,
) -> SpectrumTable:
    """One record per class up to max_len, sorted by (length, word)."""
    if linear is None:
        linear = build_linear_spectrum(rep, max_len, class_mode=class_mode, threads=threads, cap=cap)
    elif linear.max_len != max_len or not (
        rep.rank == linear.rank
        and rep.n == linear.n
        and np.all(np.abs(rep.linear_parts - linear.linear_parts) <= 1e-10)
    ):
        raise ValueError("cached linear spectrum does not match")
    return SpectrumTable(linear, rep.translations, rep.label)


# ---------------------------------------------------------------------------
# properness


@dataclass(frozen=True)
class ProperVerdict:
    verdict: str
    c_proxy: float
    C_proxy: float
    min_alpha: float
    max_alpha: float
    n_classes: int
    zero_tol: float
    witness: tuple[str, str] | None = None

    @property
    def proper(self) -> bool:
        return self.verdict in (POSITIVE, NEGATIVE)


def properness_scan(table: SpectrumTable, *, zero_tol: float | None = None) -> ProperVerdict:
    """Sign uniformity of the spectrum with word-length margins.

    The margins are min and max of alpha / word length (for a negative
    spectrum, of |alpha| / word length).  Values within ``zero_tol`` of zero
    (default 1e-8 |U|) break uniformity.
    """
    a = table.alphas
    if a.size == 0:
        raise ValueError("empty table")
    if zero_tol is None:
        zero_tol = 1e-8 * max(float(np.linalg.norm(table.translations)), 1e-300)
    ratio = a / table.lengths
    words = table.classes
    if np.all(a > zero_tol):
        verdict, c, C, wit = POSITIVE, ratio.min(), ratio.max(), None
    elif np.all(a < -zero_tol):
        verdict, c, C, wit = NEGATIVE, (-ratio).min(), (-ratio).max(), None
    else:
        verdict, c, C = MIXED, 0.0, float(np.abs(ratio).max())
        wit = (words[int(np.argmax(a))].text, words[int(np.argmin(a))].text)
    return ProperVerdict(verdict, float(c), float(C), float(a.min()), float(a.max()), len(a), float(zero_tol), wit)


def _require_positive(table: SpectrumTable) -> None:
    v = properness_scan(table)
    if v.verdict != POSITIVE:
        raise ImproperError(f"spectrum is {v.verdict}; counting needs a positive spectrum")


def orbit_count(table: SpectrumTable, T: float) -> int:
    """|R_T| = number of classes with alpha <= T."""
    _require_positive(table)
    return int(np.count_nonzero(table.alphas <= T))


# ---------------------------------------------------------------------------
# entropy and intersection


@dataclass(frozen=True)
class EntropyEstimate:
    h_hat: float
    T_grid: tuple[float, ...]
    counts: tuple[int, ...]
    smoothed_counts: tuple[float, ...]
    r_squared: float
    stderr: float
    intercept: float
    smoothing: float
    prefactor: bool


def completeness_horizon(table: SpectrumTable) -> float:
    """Smallest alpha among classes of maximal length.

    Below it every class with shorter representative has been enumerated,
    so counts there are not cut by the length budget, up to classes longer
    than max_len whose invariants fall below this value.
    """
    top = table.alphas[table.lengths == table.max_len]
    if top.size == 0:
        raise InsufficientDataError("no classes of maximal length")
    return float(top.min())


def default_T_grid(table: SpectrumTable, smoothing: float = DEFAULT_SMOOTHING) -> np.ndarray:
    """Geometric grid of 8 points ending a kernel margin below the horizon.

    The top is horizon / (1 + 3 smoothing); the bottom is half the top, or
    the 10th smallest invariant when that is larger.
    """
    _require_positive(table)
    hi = completeness_horizon(table) / (1.0 + 3.0 * smoothing)
    a = np.sort(table.alphas)
    if a.size < MIN_COUNT:
        raise InsufficientDataError(f"only {a.size} classes")
    lo = max(GRID_SPAN * hi, float(a[MIN_COUNT - 1]))
    if not lo < hi:
        raise InsufficientDataError(
            f"fewer than {MIN_COUNT} classes below the completeness horizon; raise max_len"
        )
    return np.geomspace(lo, hi, GRID_POINTS)


def _smoothed_counts(a: np.ndarray, grid: np.ndarray, smoothing: float, weights=None) -> np.ndarray:
    if smoothing == 0:
        hard = (a[None, :] <= grid[:, None]).astype(float)
    else:
        hard = expit((grid[:, None] - a[None, :]) / (smoothing * grid[:, None]))
    return hard @ weights if weights is not None else hard.sum(axis=1)


def _fit(grid: np.ndarray, counts: np.ndarray, prefactor: bool):
    y = np.log(counts) + (np.log(grid) if prefactor else 0.0)
    return linregress(grid, y)


def entropy_estimate(
    table: SpectrumTable,
    T_grid=None,
    *,
    smoothing: float = DEFAULT_SMOOTHING,
    prefactor: bool = True,
) -> EntropyEstimate:
    """Least-squares growth rate of the orbit count over a geometric T-grid.

    The count at T is a logistic-smoothed |R_T| with kernel width
    ``smoothing * T`` (0 gives the plain integer count).  With ``prefactor``
    the regressand is log(T |R_T|), which removes the 1/T factor in
    |R_T| ~ e^{hT} / (hT); without it, log |R_T| as in the limit definition.
    Both choices scale exactly: a rescaled table on a rescaled grid gives
    h / a.
    """
    _require_positive(table)
    grid = default_T_grid(table, smoothing) if T_grid is None else np.asarray(T_grid, dtype=float)
    if grid.ndim != 1 or grid.size < 3 or np.any(np.diff(grid) <= 0):
        raise ValueError("T_grid must be increasing with at least 3 points")
    a = table.alphas
    if grid[0] < a.min() or grid[-1] > a.max():
        raise InsufficientDataError("T_grid must lie inside [min alpha, max alpha]")
    counts = np.searchsorted(np.sort(a), grid, side="right")
    if counts.min() < MIN_COUNT:
        raise InsufficientDataError(
            f"count {int(counts.min())} below {MIN_COUNT} at T = {grid[int(np.argmin(counts))]:.4g}"
        )
    sm = _smoothed_counts(a, grid, smoothing)
    fit = _fit(grid, sm, prefactor)
    return EntropyEstimate(
        h_hat=float(fit.slope),
        T_grid=tuple(float(t) for t in grid),
        counts=tuple(int(c) for c in counts),
        smoothed_counts=tuple(float(c) for c in sm),
        r_squared=float(fit.rvalue**2),
        stderr=float(fit.stderr),
        intercept=float(fit.intercept),
        smoothing=smoothing,
        prefactor=prefactor,
    )


@dataclass(frozen=True)
class IntersectionEstimate:
    value: float
    T: float
    sample_size: int


def intersection_estimate(table_base: SpectrumTable, rep1, T: float) -> IntersectionEstimate:
    """Mean of alpha_1 / alpha over R_T of the base.

    ``rep1`` may be a Representation (built on the base classes when the
    linear parts agree, otherwise enumerated afresh) or a SpectrumTable on
    the same classes.
    """
    _require_positive(table_base)
    if isinstance(rep1, SpectrumTable):
        other = rep1
        if other.classes != table_base.classes:
            raise ValueError("tables are over different class sets")
    elif table_base.accepts(rep1):
        other = table_base.table_for(rep1)
    else:
        other = build_table(rep1, table_base.max_len, class_mode=table_base.linear.class_mode)
        if other.classes != table_base.classes:
            raise ValueError("second representation is not regular on every base class")
    sel = table_base.alphas <= T
    k = int(np.count_nonzero(sel))
    if k == 0:
        raise InsufficientDataError(f"R_T is empty at T = {T}")
    value = float(np.sum(other.alphas[sel] / table_base.alphas[sel]) / k)
    return IntersectionEstimate(value, float(T), k)


# ---------------------------------------------------------------------------
# pressure form


class _Probe:
    """Entropy and intersection of the family U + t dU on fixed classes.

    The grid of the base table is transported to each member by the factor
    mean(alpha_t) / mean(alpha) over R_T of the base, which is exactly 1 + t
    in the radial direction.
    """

    def __init__(self, table: SpectrumTable, dU: np.ndarray, grid: np.ndarray, smoothing: float, prefactor: bool):
        self.g = table.linear.covectors
        self.a0 = table.alphas
        self.da = self.g @ dU
        self.grid = grid
        self.smoothing = smoothing
        self.prefactor = prefactor
        self.window = self.a0 <= grid[-1]

    def evaluate(self, t: float, weights=None) -> tuple[float, float]:
        """(h_t, I_t) at parameter t."""
        a = self.a0 + t * self.da
        if np.any(a <= 0):
            raise ImproperError(f"stencil point t = {t:g} leaves the positive cone")
        w = self.window if weights is None else weights * self.window
        scale = float(np.dot(w, a) / np.dot(w, self.a0))
        grid = self.grid * scale
        counts = _smoothed_counts(a, grid, self.smoothing, weights)
        h = float(_fit(grid, counts, self.prefactor).slope)
        I = float(np.dot(w, a / self.a0) / np.sum(w))
        return h, I


@dataclass(frozen=True)
class PressureSample:
    direction: TangentCocycle
    step: float
    t_values: tuple[float, ...]
    j_values: tuple[float, ...]
    h_values: tuple[float, ...]
    i_values: tuple[float, ...]
    second_diff: float
    second_diff_half_step: float
    richardson_ok: bool
    eps_est: float
    T_grid: tuple[float, ...]
    bootstrap: int

    @property
    def noise(self) -> float:
        """Bootstrap noise, floored at the stencil's rounding level."""
        return max(self.eps_est, SECOND_DIFF_FLOOR)

    @property
    def psd_ok(self) -> bool:
        return self.second_diff >= -self.noise

    @property
    def significant(self) -> bool:
        return self.second_diff > 3.0 * self.noise


STENCIL = (-2, -1, 0, 1, 2)


def _five_point(j: Sequence[float], s: float) -> float:
    jm2, jm1, j0, jp1, jp2 = j
    return (-jp2 + 16 * jp1 - 30 * j0 + 16 * jm1 - jm2) / (12 * s * s)


def _j_values(probe: _Probe, s: float, weights=None) -> tuple[list[float], list[float], list[float]]:
    h0, _ = probe.evaluate(0.0, weights)
    hs, Is, js = [], [], []
    for k in STENCIL:
        if k == 0:
            h, I = h0, 1.0
        else:
            h, I = probe.evaluate(k * s, weights)
        hs.append(h)
        Is.append(I)
        js.append(1.0 if k == 0 else (h / h0) * I)
    return js, hs, Is


def pressure_quadratic(
    rep: Representation,
    direction: TangentCocycle,
    step: float = 0.02,
    max_len: int = 12,
    T: float | None = None,
    *,
    table: SpectrumTable | None = None,
    smoothing: float = DEFAULT_SMOOTHING,
    prefactor: bool = True,
    bootstrap: int = 200,
    seed: int = 0,
    threads: int = 1,
) -> PressureSample:
    """Five-point second difference of J(t) = (h_t / h) I(rho, rho_t).

    rho_t has translations u + t u-dot.  ``T`` is the top of the entropy grid
    and of the intersection window (default: the grid of
    :func:`default_T_grid`).  The noise level eps_est is the standard
    deviation of the second difference over ``bootstrap`` resamples of the
    class set, drawn with replacement from a generator seeded by ``seed``.
    """
    if not step > 0:
        raise ValueError("step must be positive")
    if table is None:
        table = build_table(rep, max_len, threads=threads)
    elif not table.accepts(rep):
        raise ValueError("table was built for different linear parts")
    table = table.table_for(rep)
    _require_positive(table)
    if T is None:
        grid = default_T_grid(table, smoothing)
    else:
        grid = np.geomspace(GRID_SPAN * T, T, GRID_POINTS)
        entropy_estimate(table, grid, smoothing=smoothing, prefactor=prefactor)  # data checks
    for k in STENCIL:
        v = properness_scan(table.with_translations(rep.translations + k * step * direction.stacked))
        if v.verdict != POSITIVE:
            raise ImproperError(f"stencil point t = {k * step:g} is {v.verdict}")
    probe = _Probe(table, direction.stacked, grid, smoothing, prefactor)
    js, hs, Is = _j_values(probe, step)
    sd = _five_point(js, step)
    sd_half = _five_point(_j_values(probe, step / 2)[0], step / 2)
    rich = abs(sd - sd_half) <= 0.2 * max(abs(sd), abs(sd_half)) or abs(sd - sd_half) < 1e-10

    rng = np.random.default_rng(seed)
    N = len(table)
    draws = [np.bincount(rng.integers(0, N, N), minlength=N).astype(float) for _ in range(bootstrap)]
    boots = _pmap(lambda w: _five_point(_j_values(probe, step, w)[0], step), draws, threads)
    eps = float(np.std(boots, ddof=1)) if bootstrap > 1 else 0.0
    return PressureSample(
        direction=direction,
        step=step,
        t_values=tuple(k * step for k in STENCIL),
        j_values=tuple(js),
        h_values=tuple(hs),
        i_values=tuple(Is),
        second_diff=float(sd),
        second_diff_half_step=float(sd_half),
        richardson_ok=bool(rich),
        eps_est=eps,
        T_grid=tuple(float(x) for x in grid),
        bootstrap=bootstrap,
    )


def entropy_derivative(
    table: SpectrumTable,
    direction: TangentCocycle,
    *,
    fd_step: float = 1e-3,
    smoothing: float = DEFAULT_SMOOTHING,
    prefactor: bool = True,
) -> float:
    """Central difference of the transported-grid entropy along a direction."""
    _require_positive(table)
    probe = _Probe(table, direction.stacked, default_T_grid(table, smoothing), smoothing, prefactor)
    return (probe.evaluate(fd_step)[0] - probe.evaluate(-fd_step)[0]) / (2 * fd_step)


def constant_entropy_project(
    rep: Representation,
    direction: TangentCocycle,
    table: SpectrumTable,
    *,
    fd_step: float = 1e-3,
    smoothing: float = DEFAULT_SMOOTHING,
) -> TangentCocycle:
    """direction - lambda u with lambda = dh[direction] / dh[u].

    The radial derivative dh[u] equals -h for the transported-grid estimator,
    so a radial input returns the zero cocycle.
    """
    table = table.table_for(rep)
    radial = TangentCocycle.radial(rep)
    dh_dir = entropy_derivative(table, direction, fd_step=fd_step, smoothing=smoothing)
    dh_rad = entropy_derivative(table, radial, fd_step=fd_step, smoothing=smoothing)
    lam = dh_dir / dh_rad
    out = direction.stacked - lam * rep.translations
    if np.allclose(direction.stacked, lam * rep.translations, rtol=1e-9, atol=1e-12):
        out = np.zeros_like(out)
    return TangentCocycle(rep, out)


# ---------------------------------------------------------------------------
# constant entropy and convexity


def normalize_entropy(
    rep: Representation,
    table: SpectrumTable,
    k: float,
    *,
    smoothing: float = DEFAULT_SMOOTHING,
) -> Representation:
    """Scale translations by h/k so the entropy becomes k."""
    if not k > 0:
        raise ValueError("target entropy must be positive")
    h = entropy_estimate(table.table_for(rep), smoothing=smoothing).h_hat
    return scale_translation(rep, h / k)


@dataclass
class ConvexityReport:
    k: float
    t_values: list[float]
    h_values: list[float]
    stderrs: list[float]
    verdicts: list[str]
    endpoint_h: tuple[float, float]
    max_interior_h: float
    margin: float
    margins_in_stderr: list[float] = field(default_factory=list)

    @property
    def cone_convex(self) -> bool:
        return all(v == POSITIVE for v in self.verdicts)


def convexity_scan(
    rep0: Representation,
    rep1: Representation,
    k: float,
    t_grid: Sequence[float] = (0.25, 0.5, 0.75),
    max_len: int = 12,
    *,
    table: SpectrumTable | None = None,
    smoothing: float = DEFAULT_SMOOTHING,
    normalize: bool = False,
    threads: int = 1,
) -> ConvexityReport:
    """Entropy along rho_t = (1-t) rho_0 + t rho_1 between entropy-k endpoints.

    With ``normalize`` the endpoints are first scaled to entropy k; otherwise
    they must already be there within their standard errors.
    """
    if not same_linear_parts(rep0, rep1):
        raise ValueError("endpoints must share linear parts")
    if table is None:
        table = build_table(rep0, max_len, threads=threads)
    t0, t1 = table.table_for(rep0), table.table_for(rep1)
    v0, v1 = properness_scan(t0).verdict, properness_scan(t1).verdict
    if v0 != v1 or v0 == MIXED:
        raise ImproperError(f"endpoints are {v0} and {v1}; they must lie in one cone")
    if v0 == NEGATIVE:
        raise ImproperError("negative cone: flip the sign of both translations first")
    if normalize:
        rep0 = normalize_entropy(rep0, t0, k, smoothing=smoothing)
        rep1 = normalize_entropy(rep1, t1, k, smoothing=smoothing)
        t0, t1 = table.table_for(rep0), table.table_for(rep1)
    e0, e1 = (entropy_estimate(t, smoothing=smoothing) for t in (t0, t1))
    for e in (e0, e1):
        if abs(e.h_hat - k) > 3 * e.stderr + 1e-9 * k:
            raise ValueError(f"endpoint entropy {e.h_hat:.6g} is not k = {k:g} within its stderr")
    hs, ses, verdicts, margins = [], [], [], []
    for t in t_grid:
        tab = table.table_for(interpolate(rep0, rep1, t))
        v = properness_scan(tab).verdict
        verdicts.append(v)
        if v != POSITIVE:
            hs.append(float("nan"))
            ses.append(float("nan"))
            margins.append(float("nan"))
            continue
        e = entropy_estimate(tab, smoothing=smoothing)
        hs.append(e.h_hat)
        ses.append(e.stderr)
        margins.append((k - e.h_hat) / e.stderr if e.stderr > 0 else float("inf"))
    mx = float(np.nanmax(hs)) if np.any(np.isfinite(hs)) else float("nan")
    return ConvexityReport(
        k=k,
        t_values=[float(t) for t in t_grid],
        h_values=hs,
        stderrs=ses,
        verdicts=verdicts,
        endpoint_h=(e0.h_hat, e1.h_hat),
        max_interior_h=mx,
        margin=k - mx,
        margins_in_stderr=margins,
    )
