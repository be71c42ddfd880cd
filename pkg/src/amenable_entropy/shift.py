"""Configurations of the full shift ``A^G``, metrics, Bowen balls and cylinder trees.

The shift acts by ``(g x)_h = x_{hg}``.  Everything finite-resolution lives
on windows: a distance of 0 means "equal up to the depth cap".
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Iterable, Mapping, Optional, Sequence, Union

import numpy as np

from .errors import DomainError, ResourceError
from .group import (Element, FiniteSubset, FolnerSequence, Group, IntegerLattice,
                    folner_family)

SYMBOLS = "0123456789abcdefghijklmnopqrstuvwxyz"
MAX_ALPHABET = len(SYMBOLS)
DEFAULT_NODE_BUDGET = 2 ** 24


def _check_alphabet(k: int) -> int:
    if not 2 <= k <= MAX_ALPHABET:
        raise DomainError(f"alphabet size must be in 2..{MAX_ALPHABET}, got {k}")
    return int(k)


# -- configurations ------------------------------------------------------------


class Configuration:
    """A point of ``A^G`` known on some window, possibly extended by a default symbol."""

    group: Group
    alphabet_size: int

    def value(self, g: Element) -> int:
        raise NotImplementedError

    def values(self, elements: Sequence[Element]) -> np.ndarray:
        return np.fromiter((self.value(g) for g in elements), dtype=np.int64,
                           count=len(elements))

    def restrict(self, window: FiniteSubset) -> tuple:
        """The pattern ``x|_W`` in the window's canonical order."""
        return tuple(self.values(window.elements).tolist())

    def translate(self, g: Element) -> "Configuration":
        """The configuration ``g x``."""
        return TranslatedConfiguration(self, g)

    def same_space(self, other: "Configuration") -> None:
        if self.alphabet_size != other.alphabet_size:
            raise DomainError(
                f"alphabet sizes differ: {self.alphabet_size} vs {other.alphabet_size}")
        if self.group != other.group:
            raise DomainError("configurations live on different groups")


def _missing(g):
    raise DomainError(f"configuration has no data at {g} and no default symbol")


class PatternConfiguration(Configuration):
    """Symbols given on a window by a mapping; ``default`` fills the rest."""

    def __init__(self, group: Group, alphabet_size: int, symbols: Mapping, default: Optional[int] = 0):
        self.group = group
        self.alphabet_size = _check_alphabet(alphabet_size)
        self.symbols = {group.coerce(g): int(a) for g, a in symbols.items()}
        for g, a in self.symbols.items():
            if not 0 <= a < alphabet_size:
                raise DomainError(f"symbol {a} at {g} outside alphabet of size {alphabet_size}")
        if default is not None and not 0 <= default < alphabet_size:
            raise DomainError(f"default symbol {default} outside alphabet")
        self.default = default

    @classmethod
    def from_pattern(cls, window: FiniteSubset, pattern: Sequence[int], alphabet_size: int,
                     default: Optional[int] = 0) -> "PatternConfiguration":
        if len(pattern) != len(window):
            raise DomainError("pattern length does not match window size")
        return cls(window.group, alphabet_size, dict(zip(window.elements, pattern)), default)

    def value(self, g):
        a = self.symbols.get(g)
        if a is None:
            if self.default is None:
                _missing(g)
            return self.default
        return a

    def __repr__(self):
        return f"PatternConfiguration(<{len(self.symbols)} symbols>, default={self.default})"


class GridConfiguration(Configuration):
    """A lattice configuration stored as a dense array anchored at ``origin``."""

    def __init__(self, group: IntegerLattice, alphabet_size: int, grid: np.ndarray,
                 origin: Sequence[int] = None, default: Optional[int] = None):
        if not isinstance(group, IntegerLattice):
            raise DomainError("grid configurations need an integer lattice")
        grid = np.asarray(grid, dtype=np.int64)
        if grid.ndim != group.d:
            raise DomainError(f"grid rank {grid.ndim} does not match Z^{group.d}")
        self.group = group
        self.alphabet_size = _check_alphabet(alphabet_size)
        if grid.size and (grid.min() < 0 or grid.max() >= alphabet_size):
            raise DomainError("grid symbols outside alphabet")
        self.grid = grid
        self.origin = np.asarray(origin if origin is not None else (0,) * group.d, dtype=np.int64)
        self.default = default

    def value(self, g):
        idx = tuple(int(c) - int(o) for c, o in zip(g, self.origin))
        if all(0 <= i < s for i, s in zip(idx, self.grid.shape)):
            return int(self.grid[idx])
        if self.default is None:
            _missing(g)
        return self.default

    def values(self, elements):
        if not len(elements):
            return np.empty(0, dtype=np.int64)
        idx = np.asarray(elements, dtype=np.int64).reshape(len(elements), -1) - self.origin
        shape = np.array(self.grid.shape)
        ok = np.all((idx >= 0) & (idx < shape), axis=1)
        out = np.empty(len(idx), dtype=np.int64)
        if ok.any():
            out[ok] = self.grid[tuple(idx[ok].T)]
        if not ok.all():
            if self.default is None:
                _missing(tuple(np.asarray(elements)[~ok][0]))
            out[~ok] = self.default
        return out

    def line(self, lo: int, hi: int) -> np.ndarray:
        """Symbols at ``lo..hi`` (Z only), as a view when fully inside the grid."""
        if self.group.d != 1:
            raise DomainError("line() needs Z")
        a, b = lo - int(self.origin[0]), hi - int(self.origin[0])
        if a >= 0 and b < len(self.grid):
            return self.grid[a:b + 1]
        return self.values([(i,) for i in range(lo, hi + 1)])

    def __repr__(self):
        return f"GridConfiguration(shape={self.grid.shape}, origin={tuple(self.origin)})"


class RuleConfiguration(Configuration):
    """A total configuration given by a rule ``g -> symbol``."""

    def __init__(self, group: Group, alphabet_size: int, rule: Callable[[Element], int]):
        self.group = group
        self.alphabet_size = _check_alphabet(alphabet_size)
        self.rule = rule

    def value(self, g):
        return int(self.rule(g))


class TranslatedConfiguration(Configuration):
    def __init__(self, base: Configuration, g: Element):
        self.base = base
        self.g = base.group.coerce(g)
        self.group = base.group
        self.alphabet_size = base.alphabet_size

    def value(self, h):
        return self.base.value(self.group.op(h, self.g))

    def values(self, elements):
        op, g = self.group.op, self.g
        return self.base.values([op(h, g) for h in elements])


def line_configuration(values: Sequence[int], start: int = 0, alphabet_size: int = 2,
                       default: Optional[int] = None) -> GridConfiguration:
    """A Z-configuration with ``x_{start+i} = values[i]``."""
    return GridConfiguration(IntegerLattice(1), alphabet_size, np.asarray(values), (start,), default)


@dataclass(frozen=True)
class Cylinder:
    """``[p] = {x : x|_W = p}`` for a window ``W`` and pattern ``p`` in canonical order."""

    window: FiniteSubset
    pattern: tuple

    def __post_init__(self):
        if len(self.pattern) != len(self.window):
            raise DomainError("pattern length does not match window size")

    @classmethod
    def of(cls, x: Configuration, window: FiniteSubset) -> "Cylinder":
        return cls(window, x.restrict(window))

    def contains(self, x: Configuration) -> bool:
        return x.restrict(self.window) == self.pattern

    def extend(self, g: Element, symbol: int) -> "Cylinder":
        if g in self.window:
            raise DomainError(f"{g} already in the cylinder window")
        mapping = dict(zip(self.window.elements, self.pattern))
        mapping[g] = symbol
        W = FiniteSubset(self.window.group, mapping)
        return Cylinder(W, tuple(mapping[h] for h in W.elements))


# -- metrics -------------------------------------------------------------------


def _require_symbolic_metric(seq: FolnerSequence) -> None:
    if not (seq.nested and seq.exhausting):
        raise DomainError(
            f"the cylinder metric needs a nested exhausting sequence; {seq.identifier} is not")
    if seq[0].frozen != {seq.group.identity}:
        raise DomainError("the cylinder metric needs F_0 = {e}")


def symbolic_distance(x: Configuration, y: Configuration, seq: FolnerSequence,
                      depth_cap: int) -> float:
    """1 if ``x, y`` differ at ``e``; else ``exp(-|F_n|)`` with ``n`` the last level of agreement.

    Agreement through ``F_{depth_cap}`` counts as equality (distance 0).
    """
    x.same_space(y)
    _require_symbolic_metric(seq)
    for k in range(depth_cap + 1):
        shell = seq.shell(k).elements
        if not np.array_equal(x.values(shell), y.values(shell)):
            return 1.0 if k == 0 else math.exp(-seq.size(k - 1))
    return 0.0


class SymbolicMetric:
    """``symbolic_distance`` bound to a sequence and depth cap, usable as a base metric."""

    def __init__(self, seq: FolnerSequence, depth_cap: int):
        _require_symbolic_metric(seq)
        self.seq = seq
        self.depth_cap = depth_cap

    def __call__(self, x, y):
        return symbolic_distance(x, y, self.seq, self.depth_cap)


def coordinate_distance(x: Configuration, y: Configuration, radius: int) -> float:
    """``2^{-min{|i| : x_i != y_i}}`` on Z, searching ``|i| <= radius`` (0 if no difference)."""
    x.same_space(y)
    if not isinstance(x.group, IntegerLattice) or x.group.d != 1:
        raise DomainError("the coordinate metric is defined on Z")
    for r in range(radius + 1):
        pts = [(r,)] if r == 0 else [(-r,), (r,)]
        if not np.array_equal(x.values(pts), y.values(pts)):
            return 2.0 ** -r
    return 0.0


class CoordinateMetric:
    def __init__(self, radius: int):
        self.radius = radius

    def __call__(self, x, y):
        return coordinate_distance(x, y, self.radius)


def bowen_distance(x: Configuration, y: Configuration, F: FiniteSubset,
                   base_metric: Callable[[Configuration, Configuration], float]) -> float:
    """``d_F(x, y) = max_{g in F} d(gx, gy)``."""
    if not len(F):
        raise DomainError("Bowen distance needs a non-empty F")
    x.same_space(y)
    return max(base_metric(x.translate(g), y.translate(g)) for g in F)


@dataclass(frozen=True)
class BallWindow:
    """The window ``W`` with ``B_{F_n}(x, eps) = [x|_W]`` under the cylinder metric.

    ``inflation`` is ``k`` in ``W = F_k F_n``; ``level_contained`` records whether
    ``W`` sits inside ``F_{n+k}``, i.e. whether ``[x|_{F_{n+k}}]`` lies in the ball.
    """

    window: FiniteSubset
    inflation: Optional[int]
    level_contained: bool


def inflation_index(eps: float, seq: FolnerSequence, closed: bool = False) -> Optional[int]:
    """Smallest ``k`` with ``exp(-|F_k|) < eps`` (``<=`` for closed balls).

    ``None`` for a closed ball of radius >= 1, which is the whole space.
    """
    if not 0 < eps <= 1:
        raise DomainError(f"radius must lie in (0, 1], got {eps}")
    if closed and eps >= 1:
        return None
    k = 0
    while True:
        t = math.exp(-seq.size(k))
        if (t <= eps) if closed else (t < eps):
            return k
        k += 1


def threshold_radius(k: int, seq: FolnerSequence) -> float:
    """The open-ball radius whose Bowen ball is the cylinder on ``F_k F_n``."""
    if k < 0:
        raise DomainError("inflation index must be non-negative")
    return 1.0 if k == 0 else math.exp(-seq.size(k - 1))


def bowen_ball_window(n: int, eps: float, seq: FolnerSequence, closed: bool = False) -> BallWindow:
    """Window of the (open, or closed) Bowen ball ``B_{F_n}(x, eps)`` under the cylinder metric."""
    _require_symbolic_metric(seq)
    k = inflation_index(eps, seq, closed)
    G = seq.group
    if k is None:
        return BallWindow(FiniteSubset(G, ()), None, True)
    W = seq[n] if k == 0 else G.product(seq[k], seq[n])
    return BallWindow(W, k, W.issubset(seq[n + k]))


def inflated_window(n: int, k: int, seq: FolnerSequence) -> FiniteSubset:
    """``F_k F_n``; for centered boxes this is the box of radius ``n + k``."""
    if k == 0:
        return seq[n]
    if seq.family == "box":
        return seq[n + k]
    return seq.group.product(seq[k], seq[n])


# -- density sets ----------------------------------------------------------------


def _round_select(j: int, rho: float) -> bool:
    """Whether local index ``j`` is picked when picking a ``rho`` share by rounding."""
    return math.floor((j + 1) * rho + 0.5) > math.floor(j * rho + 0.5)


@dataclass(frozen=True)
class DensitySet:
    """A subset ``H`` of the group with declared lower/upper density targets.

    ``selected`` is an optional fast path: when given, ``g`` is in ``H`` exactly
    when ``selected(radius(g))`` holds for the sequence's radius function.
    """

    contains: Callable[[Element], bool]
    alpha: float
    beta: float
    schedule: str = "custom"
    selected: Optional[Callable[[int], bool]] = None

    def __post_init__(self):
        if not 0 <= self.alpha <= self.beta <= 1:
            raise DomainError(f"need 0 <= alpha <= beta <= 1, got {self.alpha}, {self.beta}")

    def __call__(self, g) -> bool:
        return bool(self.contains(g))

    @classmethod
    def everything(cls) -> "DensitySet":
        return cls(lambda g: True, 1.0, 1.0, "all", selected=lambda r: True)

    @classmethod
    def nothing(cls) -> "DensitySet":
        return cls(lambda g: False, 0.0, 0.0, "none", selected=lambda r: False)

    @classmethod
    def geometric_blocks(cls, seq: FolnerSequence, alpha: float, beta: float,
                         factor: int = 4) -> "DensitySet":
        """Radial blocks ``[factor^(k-1), factor^k)`` alternating sparse and dense.

        Block 0 is the radius-0 shell.  Even blocks pick a share ``a`` of their
        radii and odd blocks a share ``b``, with ``a, b`` solved so that the
        running density of a linearly growing sequence oscillates between
        ``alpha`` and ``beta`` in the limit (clipped to [0, 1] when infeasible).
        """
        if seq.radius is None:
            raise DomainError(f"{seq.identifier} has no radius function")
        if factor < 2:
            raise DomainError("block growth factor must be at least 2")
        spread = (beta - alpha) * (factor + 1) / (factor - 1)
        mid = (alpha + beta) / 2
        a = min(max(mid - spread / 2, 0.0), 1.0)
        b = min(max(mid + spread / 2, 0.0), 1.0)

        def selected(r: int) -> bool:
            if r == 0:
                return _round_select(0, a)
            k = int(math.floor(math.log(r, factor) + 1e-12)) + 1
            while factor ** (k - 1) > r:
                k -= 1
            while factor ** k <= r:
                k += 1
            start = factor ** (k - 1)
            return _round_select(r - start, b if k % 2 else a)

        radius = seq.radius
        return cls(lambda g: selected(radius(g)), alpha, beta,
                   f"geometric(factor={factor}, sparse={a:.6g}, dense={b:.6g})", selected)


@dataclass(frozen=True)
class DensityTrace:
    n: np.ndarray
    ratios: np.ndarray
    counts: np.ndarray      # |H ∩ F_n|
    sizes: np.ndarray       # |F_n|
    running_min: np.ndarray  # over the tail, from tail_start up to n
    running_max: np.ndarray
    tail_start: int

    @property
    def inf(self) -> float:
        return float(self.running_min[-1])

    @property
    def sup(self) -> float:
        return float(self.running_max[-1])

    def window_extremes(self, lo: int, hi: int) -> tuple:
        sel = (self.n >= lo) & (self.n <= hi)
        return float(self.ratios[sel].min()), float(self.ratios[sel].max())


def density_counts(H: DensitySet, seq: FolnerSequence, n_max: int) -> tuple:
    """``(|H ∩ F_n|, |F_n|)`` for ``0 <= n <= n_max`` using shells of a nested sequence."""
    if not seq.nested:
        counts = [sum(H(g) for g in seq[n]) for n in range(n_max + 1)]
        return np.array(counts, dtype=np.int64), seq.sizes(n_max)
    counts = np.zeros(n_max + 1, dtype=np.int64)
    sizes = np.zeros(n_max + 1, dtype=np.int64)
    c = s = 0
    radial = H.selected is not None and seq.radius is not None
    for n in range(n_max + 1):
        shell = seq.shell(n)
        s += len(shell)
        if radial:
            c += len(shell) if (len(shell) and H.selected(n)) else 0
        else:
            c += sum(H(g) for g in shell)
        counts[n], sizes[n] = c, s
    return counts, sizes


def density_trace(H: DensitySet, seq: FolnerSequence, n_max: int, tail_start: int = 1) -> DensityTrace:
    """``|H ∩ F_n| / |F_n|`` for ``n <= n_max`` with running extremes from ``tail_start``."""
    if n_max < 1:
        raise DomainError("n_max must be at least 1")
    counts, sizes = density_counts(H, seq, n_max)
    n = np.arange(n_max + 1)
    with np.errstate(invalid="ignore", divide="ignore"):
        ratios = np.where(sizes > 0, counts / np.maximum(sizes, 1), 0.0)
    tail = ratios[tail_start:]
    return DensityTrace(n, ratios, counts, sizes, np.minimum.accumulate(tail),
                        np.maximum.accumulate(tail), tail_start)


# -- subset specifications -------------------------------------------------------


@dataclass(frozen=True)
class Predicate:
    """Per-coordinate constraint ``x_g in allowed(g)``, optionally refined by ``accept``.

    ``accept(window, patterns) -> bool mask`` may drop whole patterns; it must be
    closed under restriction for the represented set to be well defined.
    """

    alphabet_size: int
    allowed: Callable[[Element], Sequence[int]]
    accept: Optional[Callable[[FiniteSubset, np.ndarray], np.ndarray]] = None
    name: str = "predicate"

    def admits(self, window: FiniteSubset, pattern: Sequence[int]) -> bool:
        if any(a not in self.allowed(g) for g, a in zip(window.elements, pattern)):
            return False
        if self.accept is not None:
            return bool(self.accept(window, np.asarray([pattern]))[0])
        return True


@dataclass(frozen=True)
class PointSample:
    points: tuple

    def __init__(self, points: Iterable[Configuration]):
        object.__setattr__(self, "points", tuple(points))
        if not self.points:
            raise DomainError("a point sample needs at least one point")


@dataclass(frozen=True)
class ExplicitTree:
    tree: "CylinderTree"


SubsetSpec = Union[Predicate, PointSample, ExplicitTree]


def full_shift(alphabet_size: int = 2) -> Predicate:
    syms = tuple(range(_check_alphabet(alphabet_size)))
    return Predicate(alphabet_size, lambda g: syms, name=f"full_shift({alphabet_size})")


def xab_predicate(H: DensitySet) -> Predicate:
    """``X = {x in {0,1}^G : x_g = 0 unless g in H}``."""
    return Predicate(2, lambda g: (0, 1) if H(g) else (0,), name=f"xab({H.schedule})")


# -- cylinder trees ----------------------------------------------------------------


class CylinderTree:
    """Admissible patterns on the nested windows ``F_0, ..., F_D`` linked by restriction.

    ``patterns[n]`` is an ``(count_n, |F_n|)`` array with columns in the canonical
    order of ``F_n``; ``parents[n][i]`` is the level ``n-1`` index of node ``i``.
    Every node has a descendant at level ``D`` (dead branches are pruned).
    """

    def __init__(self, seq: FolnerSequence, alphabet_size: int, patterns: Sequence[np.ndarray],
                 parents: Sequence[Optional[np.ndarray]], validate: bool = True):
        if not seq.nested:
            raise DomainError("cylinder trees need a nested Følner sequence")
        self.seq = seq
        self.alphabet_size = _check_alphabet(alphabet_size)
        self.patterns = [np.asarray(p, dtype=np.uint8) for p in patterns]
        self.parents = [None] + [np.asarray(p, dtype=np.int64) for p in parents[1:]]
        if not self.patterns or not len(self.patterns[-1]):
            raise DomainError("empty cylinder tree")
        self._prune()
        if validate:
            self.validate()

    @property
    def depth(self) -> int:
        return len(self.patterns) - 1

    def count(self, n: int) -> int:
        return len(self.patterns[n])

    @property
    def level_sizes(self) -> np.ndarray:
        return np.array([len(p) for p in self.patterns], dtype=np.int64)

    @property
    def node_count(self) -> int:
        return int(self.level_sizes.sum())

    def window(self, n: int) -> FiniteSubset:
        return self.seq[n]

    def restriction_columns(self, n: int) -> np.ndarray:
        """Positions of ``F_{n-1}``'s elements inside ``F_n``'s canonical order."""
        pos = self.seq[n].index_map()
        return np.array([pos[g] for g in self.seq[n - 1].elements], dtype=np.int64)

    def _prune(self) -> None:
        alive = np.ones(len(self.patterns[-1]), dtype=bool)
        for n in range(self.depth, 0, -1):
            par = self.parents[n]
            keep_parent = np.zeros(len(self.patterns[n - 1]), dtype=bool)
            keep_parent[par[alive]] = True
            if not alive.all():
                self.patterns[n] = self.patterns[n][alive]
                self.parents[n] = par[alive]
            alive = keep_parent
            if not alive.all():
                remap = np.cumsum(alive) - 1
                self.parents[n] = remap[self.parents[n]]
        if not alive.all():
            self.patterns[0] = self.patterns[0][alive]

    def validate(self) -> None:
        k = self.alphabet_size
        for n, pats in enumerate(self.patterns):
            w = self.seq.size(n)
            if pats.shape[1] != w:
                raise DomainError(f"level {n}: patterns have width {pats.shape[1]}, |F_n| = {w}")
            if len(pats) > k ** w:
                raise DomainError(f"level {n}: {len(pats)} nodes exceed |A|^|F_n|")
            if len(pats) and pats.max() >= k:
                raise DomainError(f"level {n}: symbol outside alphabet")
            if len(np.unique(pats, axis=0)) != len(pats):
                raise DomainError(f"level {n}: duplicate patterns")
            if n:
                cols = self.restriction_columns(n)
                if not np.array_equal(pats[:, cols], self.patterns[n - 1][self.parents[n]]):
                    raise DomainError(f"level {n}: a node does not restrict to its parent")

    @cached_property
    def flat(self) -> tuple:
        """``(parent, offsets, fsizes)`` arrays for the dynamic-programming kernels."""
        sizes = self.level_sizes
        offsets = np.zeros(len(sizes) + 1, dtype=np.int64)
        offsets[1:] = np.cumsum(sizes)
        parent = np.full(offsets[-1], -1, dtype=np.int64)
        for n in range(1, len(sizes)):
            parent[offsets[n]:offsets[n + 1]] = self.parents[n] + offsets[n - 1]
        fsizes = np.array([self.seq.size(n) for n in range(len(sizes))], dtype=np.float64)
        return parent, offsets, fsizes

    def children(self, n: int) -> list:
        """For each node at level ``n < D``, the indices of its children at level ``n+1``."""
        out = [[] for _ in range(self.count(n))]
        for i, p in enumerate(self.parents[n + 1].tolist()):
            out[p].append(i)
        return out

    def truncate(self, depth: int) -> "CylinderTree":
        if not 0 <= depth <= self.depth:
            raise DomainError(f"depth {depth} outside 0..{self.depth}")
        return CylinderTree(self.seq, self.alphabet_size, self.patterns[:depth + 1],
                            self.parents[:depth + 1], validate=False)

    def subtree(self, level: int, index: int) -> "CylinderTree":
        """The tree of the set's points lying in the cylinder of node ``(level, index)``."""
        return self.restrict_to(level, [index])

    def restrict_to(self, level: int, nodes: Sequence[int]) -> "CylinderTree":
        """The tree of the points lying in the union of the given level-``level`` cylinders."""
        keep = np.zeros(self.count(level), dtype=bool)
        keep[np.asarray(nodes, dtype=np.int64)] = True
        if not keep.any():
            raise DomainError("restrict_to needs at least one node")
        masks = [keep]
        for n in range(level, 0, -1):
            k = np.zeros(self.count(n - 1), dtype=bool)
            k[self.parents[n][masks[-1]]] = True
            masks.append(k)
        masks.reverse()
        for n in range(level + 1, self.depth + 1):
            masks.append(masks[n - 1][self.parents[n]])
        patterns = [self.patterns[0][masks[0]]]
        parents = [None]
        for n in range(1, self.depth + 1):
            remap = np.cumsum(masks[n - 1]) - 1
            patterns.append(self.patterns[n][masks[n]])
            parents.append(remap[self.parents[n][masks[n]]])
        return CylinderTree(self.seq, self.alphabet_size, patterns, parents, validate=False)

    def union(self, other: "CylinderTree") -> "CylinderTree":
        """Tree of the union of the two represented sets."""
        if other.seq is not self.seq and other.seq.identifier != self.seq.identifier:
            raise DomainError("trees over different Følner sequences")
        if other.depth != self.depth or other.alphabet_size != self.alphabet_size:
            raise DomainError("trees differ in depth or alphabet")
        patterns, parents = [], [None]
        for n in range(self.depth + 1):
            merged = np.unique(np.concatenate([self.patterns[n], other.patterns[n]]), axis=0)
            patterns.append(merged)
            if n:
                parents.append(_lookup_rows(patterns[n - 1], merged[:, self.restriction_columns(n)]))
        return CylinderTree(self.seq, self.alphabet_size, patterns, parents)

    def leaf_configurations(self, default: Optional[int] = 0) -> list:
        W = self.seq[self.depth]
        return [PatternConfiguration.from_pattern(W, row.tolist(), self.alphabet_size, default)
                for row in self.patterns[-1]]

    def contains_pattern(self, n: int, pattern: Sequence[int]) -> bool:
        return bool(np.any(np.all(self.patterns[n] == np.asarray(pattern, dtype=np.uint8), axis=1)))

    # serialization
    def to_json(self) -> dict:
        return {
            "schema": 1,
            "kind": "cylinder_tree",
            "family": self.seq.identifier,
            "alphabet_size": self.alphabet_size,
            "depth": self.depth,
            "windows": [[list(g) for g in self.seq[n].elements] for n in range(self.depth + 1)],
            "levels": [["".join(SYMBOLS[a] for a in row) for row in p.tolist()]
                       for p in self.patterns],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json())

    @classmethod
    def from_json(cls, data: Union[dict, str], seq: Optional[FolnerSequence] = None) -> "CylinderTree":
        if isinstance(data, str):
            data = json.loads(data)
        if data.get("schema") != 1 or data.get("kind") != "cylinder_tree":
            raise DomainError("not a schema-1 cylinder tree document")
        seq = seq or folner_family(data["family"])
        for n, win in enumerate(data.get("windows", [])):
            if [list(g) for g in seq[n].elements] != win:
                raise DomainError(f"window {n} in the document does not match {seq.identifier}")
        lookup = {c: i for i, c in enumerate(SYMBOLS)}
        patterns = [np.array([[lookup[c] for c in s] for s in lev], dtype=np.uint8)
                    .reshape(len(lev), seq.size(n)) for n, lev in enumerate(data["levels"])]
        return tree_from_levels(seq, int(data["alphabet_size"]), patterns)

    def __repr__(self):
        return (f"CylinderTree({self.seq.identifier}, |A|={self.alphabet_size}, "
                f"levels={self.level_sizes.tolist()})")


def tree_from_levels(seq: FolnerSequence, alphabet_size: int,
                     patterns: Sequence[np.ndarray]) -> CylinderTree:
    """Tree from per-level pattern arrays, deduplicating and linking parents by restriction."""
    levels = [np.unique(np.asarray(p, dtype=np.uint8).reshape(len(p), seq.size(n)), axis=0)
              for n, p in enumerate(patterns)]
    parents = [None]
    for n in range(1, len(levels)):
        pos = seq[n].index_map()
        cols = np.array([pos[g] for g in seq[n - 1].elements], dtype=np.int64)
        parents.append(_lookup_rows(levels[n - 1], levels[n][:, cols]))
    return CylinderTree(seq, alphabet_size, levels, parents)


def _lookup_rows(table: np.ndarray, rows: np.ndarray) -> np.ndarray:
    """Index of each of ``rows`` inside ``table`` (all must be present)."""
    index = {r.tobytes(): i for i, r in enumerate(np.ascontiguousarray(table, dtype=np.uint8))}
    out = np.empty(len(rows), dtype=np.int64)
    for j, r in enumerate(np.ascontiguousarray(rows, dtype=np.uint8)):
        i = index.get(r.tobytes())
        if i is None:
            raise DomainError(f"pattern {r.tolist()} has no parent in the previous level")
        out[j] = i
    return out


def _extend_level(seq, n, parents_pats, allowed_lists, budget):
    """Children of every level-``n`` pattern on ``F_{n+1}``, new coordinates free in ``allowed``."""
    new = (seq[n + 1] - seq[n]).elements
    pos = seq[n + 1].index_map()
    old_cols = np.array([pos[g] for g in seq[n].elements], dtype=np.int64)
    new_cols = np.array([pos[g] for g in new], dtype=np.int64)
    c = 1
    for g in new:
        c *= len(allowed_lists(g))
    total = len(parents_pats) * c
    if total > budget:
        raise ResourceError(f"level {n + 1} would hold {total} nodes, budget is {budget}")
    combos = np.array(list(itertools.product(*(allowed_lists(g) for g in new))),
                      dtype=np.uint8).reshape(c, len(new))
    out = np.empty((total, seq.size(n + 1)), dtype=np.uint8)
    out[:, old_cols] = np.repeat(parents_pats, c, axis=0)
    out[:, new_cols] = np.tile(combos, (len(parents_pats), 1))
    return out, np.repeat(np.arange(len(parents_pats), dtype=np.int64), c), c


def build_tree(spec: SubsetSpec, depth: int, seq: FolnerSequence,
               node_budget: int = DEFAULT_NODE_BUDGET) -> CylinderTree:
    """Cylinder tree of the patterns on ``F_0..F_depth`` consistent with ``spec``."""
    if depth < 0:
        raise DomainError("depth must be non-negative")
    if isinstance(spec, ExplicitTree):
        return spec.tree.truncate(depth)
    if isinstance(spec, PointSample):
        return _tree_from_points(spec.points, depth, seq)
    if not isinstance(spec, Predicate):
        raise DomainError(f"unsupported subset spec {type(spec).__name__}")
    if not seq.nested:
        raise DomainError("cylinder trees need a nested Følner sequence")
    allowed = spec.allowed
    F0 = seq[0].elements
    n0 = 1
    for g in F0:
        n0 *= len(allowed(g))
    if n0 > node_budget:
        raise ResourceError(f"level 0 would hold {n0} nodes, budget is {node_budget}")
    level = np.array(list(itertools.product(*(allowed(g) for g in F0))), dtype=np.uint8)
    level = level.reshape(max(len(level), 1) if F0 else 1, len(F0))
    if spec.accept is not None and len(F0):
        level = level[np.asarray(spec.accept(seq[0], level), dtype=bool)]
    patterns, parents = [level], [None]
    for n in range(depth):
        child, par, _ = _extend_level(seq, n, patterns[-1], allowed, node_budget)
        if spec.accept is not None:
            mask = np.asarray(spec.accept(seq[n + 1], child), dtype=bool)
            child, par = child[mask], par[mask]
        if not len(child):
            raise DomainError(f"the predicate admits no pattern on F_{n + 1}")
        patterns.append(child)
        parents.append(par)
    return CylinderTree(seq, spec.alphabet_size, patterns, parents, validate=False)


def _tree_from_points(points, depth, seq) -> CylinderTree:
    k = points[0].alphabet_size
    for p in points:
        if p.alphabet_size != k:
            raise DomainError("sample points over different alphabets")
    patterns, parents = [], [None]
    prev_inv = None
    for n in range(depth + 1):
        W = seq[n].elements
        rows = np.array([p.values(W) for p in points], dtype=np.uint8).reshape(len(points), len(W))
        uniq, first, inv = np.unique(rows, axis=0, return_index=True, return_inverse=True)
        inv = inv.ravel()
        patterns.append(uniq)
        if n:
            parents.append(prev_inv[first])
        prev_inv = inv
    return CylinderTree(seq, k, patterns, parents, validate=False)


def random_tree(seq: FolnerSequence, alphabet_size: int, depth: int, keep: float,
                rng: np.random.Generator, node_budget: int = DEFAULT_NODE_BUDGET,
                root_keep: Optional[float] = None) -> CylinderTree:
    """Full-shift tree with each child kept independently with probability ``keep``.

    Every parent keeps at least one child, so no branch dies.
    """
    syms = tuple(range(alphabet_size))
    allowed = lambda g: syms  # noqa: E731
    F0 = seq[0].elements
    level = np.array(list(itertools.product(*(syms for _ in F0))), dtype=np.uint8).reshape(-1, len(F0))
    rk = keep if root_keep is None else root_keep
    mask = rng.random(len(level)) < rk
    if not mask.any():
        mask[rng.integers(len(level))] = True
    patterns, parents = [level[mask]], [None]
    for n in range(depth):
        child, par, c = _extend_level(seq, n, patterns[-1], allowed, node_budget)
        mask = rng.random(len(child)) < keep
        block = mask.reshape(-1, c)
        empty = ~block.any(axis=1)
        block[np.flatnonzero(empty), rng.integers(c, size=int(empty.sum()))] = True
        mask = block.ravel()
        patterns.append(child[mask])
        parents.append(par[mask])
    return CylinderTree(seq, alphabet_size, patterns, parents, validate=False)
