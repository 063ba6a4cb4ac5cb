"""Free-group words and conjugacy-class representatives.

A word is a tuple of signed generator indices: ``+i`` is a_i and ``-i`` its
inverse.  Letters are ordered as integers, so -r < ... < -1 < +1 < ... < +r.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

Word = tuple[int, ...]

#: Default refusal threshold for the projected number of classes.
DEFAULT_CLASS_CAP = 10**7


class BudgetExceededError(RuntimeError):
    """The requested enumeration is larger than the configured cap."""


@dataclass(frozen=True, order=True)
class ConjClass:
    """Canonical representative of a conjugacy class.

    Instances sort by (length, word), which is the enumeration order.
    """

    length: int
    rep_word: Word

    def __post_init__(self):
        if self.length != len(self.rep_word):
            raise ValueError("length does not match the representative")

    @property
    def text(self) -> str:
        return format_word(self.rep_word)


def _check_letters(letters: Iterable[int], rank: int | None) -> list[int]:
    out = []
    for x in letters:
        x = int(x)
        if x == 0 or (rank is not None and abs(x) > rank):
            raise ValueError(f"letter {x} outside generators 1..{rank}")
        out.append(x)
    return out


def reduce(letters: Iterable[int], rank: int | None = None) -> Word:
    """Freely reduce a sequence of signed indices."""
    stack: list[int] = []
    for x in _check_letters(letters, rank):
        if stack and stack[-1] == -x:
            stack.pop()
        else:
            stack.append(x)
    return tuple(stack)


def inverse(w: Sequence[int]) -> Word:
    return tuple(-x for x in reversed(w))


def cyclic_reduce(w: Sequence[int]) -> tuple[Word, Word]:
    """Split a reduced word as conjugator * core * conjugator^-1."""
    w = tuple(w)
    i, j = 0, len(w)
    while j - i >= 2 and w[i] == -w[j - 1]:
        i += 1
        j -= 1
    return w[i:j], w[:i]


def is_cyclically_reduced(w: Sequence[int]) -> bool:
    n = len(w)
    if any(w[k] == -w[k + 1] for k in range(n - 1)):
        return False
    return n < 2 or w[0] != -w[-1]


def canonical_class(w: Sequence[int]) -> ConjClass:
    """Least cyclic rotation of the cyclically reduced core of w."""
    core, _ = cyclic_reduce(reduce(w))
    if not core:
        raise ValueError("the trivial word has no conjugacy class")
    best = min(core[k:] + core[:k] for k in range(len(core)))
    return ConjClass(len(best), best)


def is_primitive(w: Sequence[int]) -> bool:
    """True unless the cyclic word is a proper power."""
    n = len(w)
    w = tuple(w)
    return all(w[d:] + w[:d] != w for d in range(1, n) if n % d == 0)


def format_word(w: Sequence[int]) -> str:
    """Text form used in CSV output, e.g. (1, 2, -1) -> 'a1 a2 A1'."""
    return " ".join(f"a{x}" if x > 0 else f"A{-x}" for x in w)


def parse_word(text: str) -> Word:
    out = []
    for tok in text.split():
        if len(tok) < 2 or tok[0] not in "aA" or not tok[1:].isdigit():
            raise ValueError(f"bad letter {tok!r}")
        k = int(tok[1:])
        out.append(k if tok[0] == "a" else -k)
    return reduce(out)


def cyclically_reduced_count(rank: int, length: int) -> int:
    """Number of cyclically reduced words of the given length."""
    if length == 0:
        return 1
    return (2 * rank - 1) ** length + 1 + (rank - 1) * (1 + (-1) ** length)


def projected_class_count(rank: int, max_len: int) -> int:
    """Upper estimate of the number of classes up to max_len."""
    return sum(cyclically_reduced_count(rank, L) // L + 1 for L in range(1, max_len + 1))


def _digits(rank: int) -> np.ndarray:
    # letter for digit k, digits sorted like the letters
    return np.array([x for x in range(-rank, rank + 1) if x], dtype=np.int64)


def _reduced_block(rank: int, prefix: np.ndarray, total: int) -> np.ndarray:
    """All reduced digit strings of length ``total`` that extend ``prefix``."""
    if len(prefix) == 0:
        cur = np.arange(2 * rank, dtype=np.int64)[:, None]
    else:
        cur = np.asarray(prefix, dtype=np.int64)[None, :]
    allowed = np.array(
        [[b for b in range(2 * rank) if b != 2 * rank - 1 - a] for a in range(2 * rank)]
    )
    for _ in range(total - cur.shape[1]):
        nxt = allowed[cur[:, -1]]  # (m, 2r-1)
        cur = np.concatenate(
            [np.repeat(cur, nxt.shape[1], axis=0), nxt.reshape(-1, 1)], axis=1
        )
    return cur


def _canonical_rows(rank: int, block: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Filter a block of reduced digit strings to canonical class representatives.

    Returns the kept rows and a primitivity mask for them.
    """
    L = block.shape[1]
    inv = 2 * rank - 1 - block
    keep = block[:, 0] != inv[:, -1] if L > 1 else np.ones(len(block), bool)
    block = block[keep]
    if L == 1:
        return block, np.ones(len(block), bool)
    canon = np.ones(len(block), bool)
    primitive = np.ones(len(block), bool)
    for k in range(1, L):
        rot = np.roll(block, -k, axis=1)
        diff = rot != block
        first = np.argmax(diff, axis=1)
        any_diff = diff.any(axis=1)
        rows = np.arange(len(block))
        smaller = any_diff & (rot[rows, first] < block[rows, first])
        canon &= ~smaller
        primitive &= any_diff
    return block[canon], primitive[canon]


def enumerate_classes(
    rank: int,
    max_len: int,
    *,
    primitive_only: bool = False,
    cap: int = DEFAULT_CLASS_CAP,
    min_len: int = 1,
) -> list[ConjClass]:
    """All conjugacy classes of nontrivial elements with cyclic length <= max_len.

    Output is sorted by length, then lexicographically.  Each length is
    partitioned by word prefix so memory stays bounded.
    """
    if rank < 1 or max_len < 1:
        raise ValueError("rank and max_len must be positive")
    projected = projected_class_count(rank, max_len)
    if projected > cap:
        raise BudgetExceededError(
            f"about {projected} classes up to length {max_len} exceed the cap {cap}"
        )
    digits = _digits(rank)
    out: list[ConjClass] = []
    for L in range(max(1, min_len), max_len + 1):
        # a prefix length that keeps blocks at a few hundred thousand rows
        plen = 1
        while plen < L and (2 * rank - 1) ** (L - plen) > 200_000:
            plen += 1
        for prefix in _reduced_block(rank, np.array([], dtype=np.int64), plen):
            block = _reduced_block(rank, prefix, L)
            rows, prim = _canonical_rows(rank, block)
            if primitive_only:
                rows = rows[prim]
            for r in digits[rows]:
                out.append(ConjClass(L, tuple(int(x) for x in r)))
    out.sort()
    return out


def class_arrays(classes: Sequence[ConjClass]) -> dict[int, tuple[np.ndarray, np.ndarray]]:
    """Group classes by length as (positions, letters) integer arrays."""
    groups: dict[int, list[int]] = {}
    for i, c in enumerate(classes):
        groups.setdefault(c.length, []).append(i)
    return {
        L: (np.array(pos), np.array([classes[i].rep_word for i in pos], dtype=np.int64))
        for L, pos in groups.items()
    }
