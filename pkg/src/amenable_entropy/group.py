"""Discrete groups, finite subsets and Følner sequences.

Elements are plain tuples in canonical form:

* ``IntegerLattice(d)`` uses integer vectors ``(x_1, ..., x_d)``;
* ``InfiniteDihedral`` uses ``(t, f)`` with ``f`` in ``{0, 1}``, meaning
  ``a**t * b**f`` where ``a`` is the unit translation and ``b`` the flip.

Tuples compare lexicographically, which fixes the canonical element order
used whenever a window has to be laid out as a sequence.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Iterable, Iterator, Optional

import numpy as np

from .errors import DomainError

Element = tuple


class Group:
    """Abstract countable group with tuple-valued elements."""

    name: str = "group"

    @property
    def identity(self) -> Element:
        raise NotImplementedError

    def op(self, a: Element, b: Element) -> Element:
        raise NotImplementedError

    def inverse(self, a: Element) -> Element:
        raise NotImplementedError

    def coerce(self, x) -> Element:
        return tuple(int(v) for v in x)

    def product(self, A: "FiniteSubset", B: "FiniteSubset") -> "FiniteSubset":
        """The product set ``A·B = {ab : a in A, b in B}``."""
        self._check(A, B)
        return FiniteSubset(self, {self.op(a, b) for a in A for b in B})

    def inverse_set(self, A: "FiniteSubset") -> "FiniteSubset":
        return FiniteSubset(self, {self.inverse(a) for a in A})

    def right_translate(self, A: "FiniteSubset", g: Element) -> "FiniteSubset":
        return FiniteSubset(self, {self.op(a, g) for a in A})

    def subset(self, elements: Iterable) -> "FiniteSubset":
        return FiniteSubset(self, (self.coerce(e) for e in elements))

    def _check(self, *sets: "FiniteSubset") -> None:
        for s in sets:
            if s.group != self:
                raise DomainError(f"subset belongs to {s.group!r}, expected {self!r}")

    def __eq__(self, other):
        return type(self) is type(other) and self.__dict__ == other.__dict__

    def __hash__(self):
        return hash((type(self).__name__, tuple(sorted(self.__dict__.items()))))


class IntegerLattice(Group):
    """The free abelian group ``Z^d`` for ``1 <= d <= 4``."""

    def __init__(self, d: int = 1):
        if not 1 <= d <= 4:
            raise DomainError(f"lattice dimension must be in 1..4, got {d}")
        self.d = d

    @property
    def name(self) -> str:
        return "z" if self.d == 1 else f"z{self.d}"

    @property
    def identity(self) -> Element:
        return (0,) * self.d

    def coerce(self, x) -> Element:
        if isinstance(x, (int, np.integer)):
            if self.d != 1:
                raise DomainError(f"scalar element given for Z^{self.d}")
            return (int(x),)
        t = tuple(int(v) for v in x)
        if len(t) != self.d:
            raise DomainError(f"expected {self.d} coordinates, got {len(t)}")
        return t

    def op(self, a, b):
        return tuple(x + y for x, y in zip(a, b))

    def inverse(self, a):
        return tuple(-x for x in a)

    def product(self, A, B):
        self._check(A, B)
        if not len(A) or not len(B):
            return FiniteSubset(self, ())
        arr = (A.array[:, None, :] + B.array[None, :, :]).reshape(-1, self.d)
        return FiniteSubset.from_array(self, np.unique(arr, axis=0))

    def __repr__(self):
        return f"IntegerLattice({self.d})"


class InfiniteDihedral(Group):
    """``D_inf`` in normal form ``(t, f)``; ``(t,f)(t',f') = (t + (-1)^f t', f xor f')``."""

    name = "dihedral"

    @property
    def identity(self) -> Element:
        return (0, 0)

    def coerce(self, x) -> Element:
        t, f = x
        if f not in (0, 1, False, True):
            raise DomainError(f"flip component must be 0 or 1, got {f!r}")
        return (int(t), int(f))

    def op(self, a, b):
        t, f = a
        u, h = b
        return (t + (-u if f else u), f ^ h)

    def inverse(self, a):
        t, f = a
        return (t, 1) if f else (-t, 0)

    def word_length(self, g: Element) -> int:
        """Word length with respect to the generators ``a, a^-1, b``."""
        t, f = g
        return abs(t) + f

    def __repr__(self):
        return "InfiniteDihedral()"


class FiniteSubset:
    """An immutable finite subset of a group, deduplicated and canonically ordered."""

    __slots__ = ("group", "_set", "_sorted", "_array")

    def __init__(self, group: Group, elements: Iterable = ()):
        self.group = group
        self._set = frozenset(elements)
        self._sorted: Optional[tuple] = None
        self._array: Optional[np.ndarray] = None

    @classmethod
    def from_array(cls, group: Group, arr: np.ndarray) -> "FiniteSubset":
        out = cls(group, map(tuple, arr.tolist()))
        return out

    @property
    def elements(self) -> tuple:
        """Elements in canonical (lexicographic) order."""
        if self._sorted is None:
            self._sorted = tuple(sorted(self._set))
        return self._sorted

    @property
    def array(self) -> np.ndarray:
        """Elements as an ``(n, k)`` integer array in canonical order."""
        if self._array is None:
            width = len(self.group.identity)
            self._array = np.array(self.elements, dtype=np.int64).reshape(-1, width)
        return self._array

    @property
    def cardinality(self) -> int:
        return len(self._set)

    def __len__(self):
        return len(self._set)

    def __iter__(self) -> Iterator[Element]:
        return iter(self.elements)

    def __contains__(self, g) -> bool:
        return g in self._set

    def __eq__(self, other):
        if not isinstance(other, FiniteSubset):
            return NotImplemented
        return self.group == other.group and self._set == other._set

    def __hash__(self):
        return hash(self._set)

    def __or__(self, other: "FiniteSubset") -> "FiniteSubset":
        return FiniteSubset(self.group, self._set | other._set)

    def __and__(self, other: "FiniteSubset") -> "FiniteSubset":
        return FiniteSubset(self.group, self._set & other._set)

    def __sub__(self, other: "FiniteSubset") -> "FiniteSubset":
        return FiniteSubset(self.group, self._set - other._set)

    def issubset(self, other: "FiniteSubset") -> bool:
        return self._set <= other._set

    @property
    def frozen(self) -> frozenset:
        return self._set

    def index_map(self) -> dict:
        """Map element -> position in canonical order."""
        return {g: i for i, g in enumerate(self.elements)}

    def __repr__(self):
        if len(self) <= 8:
            return f"FiniteSubset({list(self.elements)})"
        return f"FiniteSubset(<{len(self)} elements>)"


@dataclass(frozen=True, eq=False)
class FolnerSequence:
    """A sequence ``n -> F_n`` of finite subsets of ``group``.

    ``nested`` means ``F_n`` is a subset of ``F_{n+1}``; ``exhausting`` means the
    union is the whole group; ``regular`` records a declared regular-system
    property (``F_m F_n`` inside ``F_{m+n}``), ``None`` when undeclared.
    ``radius`` returns the first index whose set contains an element and
    ``shell`` returns ``F_n`` minus ``F_{n-1}``; both are optional fast paths.
    """

    group: Group
    generator: Callable[[int], FiniteSubset]
    family: str = "custom"
    nested: bool = False
    exhausting: bool = False
    regular: Optional[bool] = None
    radius: Optional[Callable[[Element], int]] = None
    shell_generator: Optional[Callable[[int], FiniteSubset]] = None
    _cache: dict = field(default_factory=dict, repr=False)

    def __getitem__(self, n: int) -> FiniteSubset:
        if n < 0:
            raise DomainError(f"Følner index must be non-negative, got {n}")
        s = self._cache.get(n)
        if s is None:
            s = self.generator(n)
            self._cache[n] = s
        return s

    def size(self, n: int) -> int:
        return len(self[n])

    def sizes(self, n_max: int) -> np.ndarray:
        return np.array([self.size(n) for n in range(n_max + 1)], dtype=np.int64)

    def shell(self, n: int) -> FiniteSubset:
        if self.shell_generator is not None:
            return self.shell_generator(n)
        if n == 0:
            return self[0]
        return self[n] - self[n - 1]

    @property
    def identifier(self) -> str:
        return f"{self.group.name}:{self.family}"


def _box(d: int, lo: int, hi: int) -> np.ndarray:
    if hi < lo:
        return np.empty((0, d), dtype=np.int64)
    axes = [np.arange(lo, hi + 1, dtype=np.int64)] * d
    grid = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.ravel() for g in grid], axis=1)


def centered_boxes(d: int = 1) -> FolnerSequence:
    """``F_n = [-n, n]^d`` in ``Z^d``."""
    G = IntegerLattice(d)

    def gen(n):
        return FiniteSubset.from_array(G, _box(d, -n, n))

    def shell(n):
        if n == 0:
            return gen(0)
        box = _box(d, -n, n)
        return FiniteSubset.from_array(G, box[np.abs(box).max(axis=1) == n])

    return FolnerSequence(
        G, gen, "box", nested=True, exhausting=True, regular=True,
        radius=lambda g: max(abs(x) for x in g), shell_generator=shell,
    )


def one_sided_boxes(d: int = 1) -> FolnerSequence:
    """``F_n = [0, n-1]^d`` in ``Z^d`` (so ``F_0`` is empty)."""
    G = IntegerLattice(d)

    def gen(n):
        return FiniteSubset.from_array(G, _box(d, 0, n - 1))

    def radius(g):
        if min(g) < 0:
            raise DomainError(f"{g} lies in no one-sided box")
        return max(g) + 1

    return FolnerSequence(G, gen, "interval", nested=True, exhausting=False, radius=radius)


def dihedral_balls() -> FolnerSequence:
    """Word-length balls in ``D_inf`` for the generating set ``{a, a^-1, b}``."""
    G = InfiniteDihedral()
    gens = [(1, 0), (-1, 0), (0, 1)]

    @lru_cache(maxsize=None)
    def ball(n):
        if n == 0:
            return frozenset([G.identity])
        prev = ball(n - 1)
        return prev | {G.op(g, s) for g in prev for s in gens}

    def shell(n):
        return FiniteSubset(G, ball(n) - (ball(n - 1) if n else frozenset()))

    return FolnerSequence(
        G, lambda n: FiniteSubset(G, ball(n)), "ball", nested=True, exhausting=True,
        regular=True, radius=G.word_length, shell_generator=shell,
    )


def from_function(group: Group, fn: Callable[[int], Iterable], family: str = "custom",
                  **flags) -> FolnerSequence:
    """Wrap an arbitrary index -> element-iterable map as a Følner sequence."""
    return FolnerSequence(group, lambda n: group.subset(fn(n)), family, **flags)


FAMILIES = {
    "box": centered_boxes,
    "interval": one_sided_boxes,
}


def folner_family(identifier: str) -> FolnerSequence:
    """Parse identifiers such as ``"z:box"``, ``"z2:box"``, ``"z:interval"``, ``"dihedral:ball"``."""
    try:
        group_id, family = identifier.split(":")
    except ValueError:
        raise DomainError(f"malformed family identifier {identifier!r}") from None
    if group_id == "dihedral":
        if family != "ball":
            raise DomainError(f"unknown family {family!r} for the dihedral group")
        return dihedral_balls()
    if group_id == "z":
        d = 1
    elif group_id.startswith("z") and group_id[1:].isdigit():
        d = int(group_id[1:])
    else:
        raise DomainError(f"unknown group {group_id!r}")
    if family not in FAMILIES:
        raise DomainError(f"unknown family {family!r} for {group_id}")
    return FAMILIES[family](d)


# -- diagnostics -------------------------------------------------------------


def k_boundary(A: FiniteSubset, K: FiniteSubset) -> FiniteSubset:
    """``{g : Kg meets A and Kg meets G minus A}``, found among ``g`` in ``K^-1 A``."""
    if not len(A) or not len(K):
        raise DomainError("k_boundary needs non-empty A and K")
    G = A.group
    G._check(K)
    candidates = G.product(G.inverse_set(K), A)
    inside = A.frozen
    out = []
    for g in candidates:
        hits = sum(G.op(k, g) in inside for k in K)
        if 0 < hits < len(K):
            out.append(g)
    return FiniteSubset(G, out)


def invariance_defect(A: FiniteSubset, K: FiniteSubset) -> float:
    """``|B(A, K)| / |A|``; ``A`` is ``(K, delta)``-invariant when this is below delta."""
    return len(k_boundary(A, K)) / len(A)


def tempered_prefix_constant(seq: FolnerSequence, n_max: int) -> float:
    """Largest observed ``|union_{k<n} F_k^-1 F_n| / |F_n|`` over ``2 <= n <= n_max``."""
    if n_max < 2:
        raise DomainError("n_max must be at least 2")
    G = seq.group
    best = 0.0
    for n in range(2, n_max + 1):
        Fn = seq[n]
        acc: set = set()
        for k in range(n):
            acc |= G.product(G.inverse_set(seq[k]), Fn).frozen
        best = max(best, len(acc) / len(Fn))
    return best


@dataclass(frozen=True)
class GrowthTrace:
    n: np.ndarray
    ratios: np.ndarray
    monotone_tail: bool


def growth_diagnostic(seq: FolnerSequence, n_max: int) -> GrowthTrace:
    """``|F_n| / log n`` for ``2 <= n <= n_max``; a finite-scale trace only."""
    if n_max < 2:
        raise DomainError("n_max must be at least 2")
    n = np.arange(2, n_max + 1)
    ratios = np.array([seq.size(int(k)) for k in n], dtype=float) / np.log(n)
    tail = ratios[len(ratios) // 2:]
    return GrowthTrace(n, ratios, bool(np.all(np.diff(tail) >= 0)))


@dataclass(frozen=True)
class RegularityReport:
    passed: bool
    witness: Optional[tuple]  # (m, n, g) with g in F_m F_n but not in F_{m+n}
    ratio_trace: np.ndarray   # |F_{n+1}| / |F_n| for 1 <= n < m_max
    ratio_tail: float

    @property
    def ratio_condition(self) -> bool:
        """Heuristic: the last recorded size ratio is within 5% of 1."""
        return abs(self.ratio_tail - 1.0) < 0.05


def regular_system_check(seq: FolnerSequence, m_max: int,
                         ratio_n: Optional[int] = None) -> RegularityReport:
    """Check ``F_m F_n`` inside ``F_{m+n}`` for all ``m + n <= m_max`` by enumeration.

    The size-ratio trace runs to ``ratio_n`` (default ``m_max``); sizes are cheap
    where products are not.
    """
    if m_max < 1:
        raise DomainError("m_max must be at least 1")
    G = seq.group
    witness = None
    for total in range(m_max + 1):
        target = seq[total].frozen
        for m in range(total + 1):
            prod = G.product(seq[m], seq[total - m])
            bad = prod.frozen - target
            if bad:
                witness = (m, total - m, min(bad))
                break
        if witness:
            break
    top = max(m_max, ratio_n or 0)
    sizes = seq.sizes(top).astype(float)
    ratio = sizes[2:] / sizes[1:-1] if top >= 2 else np.array([])
    tail = float(ratio[-1]) if len(ratio) else float("nan")
    return RegularityReport(witness is None, witness, ratio, tail)
