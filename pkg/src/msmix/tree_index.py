"""Addressing of tree nodes.

Two views of a cluster coexist:

* the node view ``(s, h)``: level ``s`` and within-level index ``h`` in
  ``1..2**s``, used by the closed-form location and scale formulas;
* the factorized view: a binary path vector ``rho`` of length ``k`` with
  ``rho[0] == 1`` (root) and ``rho[t]`` the bit attached to level ``t``.

The canonical cluster label is the *stop pattern*: ``rho[1:]`` with trailing
zeros stripped, stored as a tuple of 0/1 ints. The empty tuple is the
background kernel. A subject that stops at level ``s`` after right-turn
history ``(b_1, ..., b_{s-1})`` has pattern ``(b_1, ..., b_{s-1}, 1)``.

Arrays here are 0-indexed: ``rho[t]`` is entry ``t+1`` in 1-indexed notation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from .errors import DomainError, InvalidPathError, TruncationError

StopPattern = tuple[int, ...]
BACKGROUND: StopPattern = ()
INF = math.inf


@dataclass(frozen=True)
class NodeAddress:
    """A node of the binary kernel tree.

    ``level`` is ``None`` for the background kernel. Otherwise ``turns`` holds
    the ``max(level - 1, 0)`` right-turn bits taken above the node.
    """

    level: int | None
    turns: tuple[int, ...] = ()

    def __post_init__(self):
        if self.level is None:
            if self.turns:
                raise DomainError("background node carries no turns")
            return
        if self.level < 0:
            raise DomainError(f"negative level {self.level}")
        if len(self.turns) != max(self.level - 1, 0):
            raise DomainError(
                f"level {self.level} needs {max(self.level - 1, 0)} turns, got {len(self.turns)}"
            )
        if any(b not in (0, 1) for b in self.turns):
            raise DomainError(f"turn bits must be 0/1, got {self.turns}")

    @property
    def is_background(self) -> bool:
        return self.level is None

    @classmethod
    def from_pattern(cls, pattern: Sequence[int]) -> "NodeAddress":
        pattern = _check_pattern(pattern)
        if not pattern:
            return cls(None)
        return cls(len(pattern), tuple(pattern[:-1]))

    def pattern(self) -> StopPattern:
        if self.level is None:
            return BACKGROUND
        if self.level == 0:
            raise DomainError("level-0 node has no stop pattern")
        return self.turns + (1,)

    def index(self) -> int:
        """Within-level index ``h`` of the right sibling carrying these turns.

        Under the literal ``tau`` rule, ``tau(s, h, t)`` equals bit ``s - t`` of
        ``h - 1``; the turn bits fill bits ``1..s-1`` and bit 0 (which ``tau``
        never reads) is set, selecting the even ``h`` of the sibling pair.
        """
        if self.level is None:
            raise DomainError("background has no within-level index")
        s = self.level
        if s == 0:
            return 1
        h_minus_1 = 1
        for t, b in enumerate(self.turns, start=1):
            h_minus_1 |= b << (s - t)
        return h_minus_1 + 1


def tau(s: int, h: int, t: int, amended: bool = False) -> int:
    """Selection bit of level ``t`` for node ``(s, h)``.

    Returns 1 iff ``ceil(h / 2**(s-t))`` is even. With ``amended=True`` the
    bit of level 0 is forced to 1 (the root is always a right turn), which is
    the reading under which the node formulas match the factorized model.
    """
    if s < 0 or not 0 <= t < s:
        raise DomainError(f"need 0 <= t < s, got s={s}, t={t}")
    if not 1 <= h <= 2**s:
        raise DomainError(f"h={h} outside 1..{2**s} at level {s}")
    if amended and t == 0:
        return 1
    return int(-(-h // 2 ** (s - t)) % 2 == 0)


def tau_bits(s: int, h: int, amended: bool = False) -> np.ndarray:
    """All bits ``tau(s, h, t)`` for ``t < s`` as an int array."""
    return np.array([tau(s, h, t, amended) for t in range(s)], dtype=int)


def _check_pattern(pattern: Sequence[int]) -> StopPattern:
    pattern = tuple(int(b) for b in pattern)
    if any(b not in (0, 1) for b in pattern):
        raise DomainError(f"pattern bits must be 0/1, got {pattern}")
    if pattern and pattern[-1] != 1:
        raise DomainError(f"non-empty pattern must end in 1, got {pattern}")
    return pattern


def encode_node(pattern: Sequence[int], k: int) -> np.ndarray:
    """Path vector of length ``k`` for a stop pattern."""
    pattern = _check_pattern(pattern)
    if len(pattern) + 1 > k:
        raise TruncationError(f"pattern of length {len(pattern)} does not fit in k={k}")
    rho = np.zeros(k, dtype=np.int8)
    rho[0] = 1
    rho[1 : 1 + len(pattern)] = pattern
    return rho


def decode(rho: Sequence[int]) -> StopPattern:
    """Stop pattern of a path vector (inverse of :func:`encode_node`)."""
    rho = np.asarray(rho)
    if rho.ndim != 1 or rho.size == 0 or rho[0] != 1:
        raise InvalidPathError(f"path vector must start with 1, got {rho.tolist()}")
    if np.any((rho != 0) & (rho != 1)):
        raise InvalidPathError(f"path entries must be 0/1, got {rho.tolist()}")
    ones = np.flatnonzero(rho[1:])
    if ones.size == 0:
        return BACKGROUND
    return tuple(int(b) for b in rho[1 : ones[-1] + 2])


def decode_rows(rho: np.ndarray) -> list[StopPattern]:
    return [decode(r) for r in np.asarray(rho)]


def rho_tilde(rho: np.ndarray) -> np.ndarray:
    """``rho + prod_{t >= s}(1 - rho_t)`` entrywise; accepts (..., k) arrays."""
    rho = np.asarray(rho)
    one_minus = 1 - rho
    # suffix products of (1 - rho) along the last axis
    tail = np.flip(np.cumprod(np.flip(one_minus, axis=-1), axis=-1), axis=-1)
    return (rho + tail).astype(rho.dtype)


def parent(pattern: Sequence[int]) -> StopPattern:
    """Longest proper prefix ending in 1, or the background."""
    pattern = _check_pattern(pattern)
    if not pattern:
        raise DomainError("background has no parent")
    for end in range(len(pattern) - 1, 0, -1):
        if pattern[end - 1] == 1:
            return pattern[:end]
    return BACKGROUND


def ancestors(pattern: Sequence[int]) -> Iterator[StopPattern]:
    """Iterated parents, nearest first, ending at the background."""
    pattern = _check_pattern(pattern)
    while pattern:
        pattern = parent(pattern)
        yield pattern


def node_level(pattern: Sequence[int]) -> float:
    pattern = _check_pattern(pattern)
    return INF if not pattern else len(pattern)


def all_patterns(max_len: int) -> Iterator[StopPattern]:
    """Every stop pattern of length ``<= max_len``, background first."""
    yield BACKGROUND
    for m in range(1, max_len + 1):
        for prefix in range(2 ** (m - 1)):
            bits = tuple((prefix >> (m - 2 - i)) & 1 for i in range(m - 1))
            yield bits + (1,)


def pattern_to_str(pattern: Sequence[int]) -> str:
    return "".join(str(int(b)) for b in pattern)


def pattern_from_str(text: str) -> StopPattern:
    text = text.strip()
    if any(c not in "01" for c in text):
        raise DomainError(f"pattern string must contain only 0/1, got {text!r}")
    return _check_pattern(tuple(int(c) for c in text))
