"""Concrete systems with known entropies, used as executable oracles.

* ``X_{alpha,beta}``: points of {0,1}^Z that vanish off a set ``H`` of
  prescribed lower/upper density.
* The (T, T^-1) skew product ``S(x, y) = (T^{y_0} x, T y)``: its fiber over
  ``y`` has packing/Bowen entropy driven by the range of the walk of ``y``.
* Sliding block codes between full shifts, for the factor-map inequality.

The skew-product tools use ``F_n = [0, n-1]`` and the coordinate metric
``d(x, x') = 2^-min{|i| : x_i != x'_i}``, so a ball of radius ``2^-k``
(``k >= 1``) is the cylinder on ``[-k, k]``.
"""
from __future__ import annotations

import csv
import io
import itertools
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import _kernels
from .errors import DomainError, InvariantViolation, ResourceError
from .estimators import (ChainReport, EstimatorParams, entropy_chain_check,
                         packing_entropy_estimate)
from .group import FolnerSequence, IntegerLattice, centered_boxes
from .measures import VariationalReport, XabMeasure, variational_gap
from .shift import (CylinderTree, DensitySet, build_tree, density_counts, tree_from_levels,
                    xab_predicate)

LOG2 = math.log(2.0)


# -- walks ----------------------------------------------------------------------------


@dataclass(frozen=True)
class WalkRecord:
    y: np.ndarray        # steps y_0..y_{L-1}
    omega: np.ndarray    # omega(y, n), 0 <= n <= L
    M: np.ndarray        # running max
    m: np.ndarray        # running min

    @property
    def L(self) -> int:
        return len(self.y)

    @property
    def R(self) -> np.ndarray:
        return self.M - self.m

    def verify(self) -> None:
        om, M, m, R = self.omega, self.M, self.m, self.R
        checks = {
            "omega(0) = 0": om[0] == 0,
            "unit increments": np.array_equal(np.diff(om), self.y),
            "max nondecreasing": np.all(np.diff(M) >= 0),
            "min nonincreasing": np.all(np.diff(m) <= 0),
            "range steps in {0,1}": np.all(np.isin(np.diff(R), (0, 1))),
            "M >= 0 >= m": np.all(M >= 0) and np.all(m <= 0),
        }
        bad = [k for k, ok in checks.items() if not ok]
        if bad:
            raise InvariantViolation(f"walk record violates: {', '.join(bad)}")

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "omega", "M", "m", "R_over_n"])
        for n in range(1, self.L + 1):
            w.writerow([n, int(self.omega[n]), int(self.M[n]), int(self.m[n]), repr(self.R[n] / n)])
        return buf.getvalue()


def _steps(y) -> np.ndarray:
    y = np.asarray(y, dtype=np.int64)
    if y.ndim != 1:
        raise DomainError("the scenery sequence must be one-dimensional")
    if not np.all((y == 1) | (y == -1)):
        raise DomainError("scenery symbols must be -1 or +1")
    return y


def tt_walk(y: Sequence[int], L: Optional[int] = None) -> WalkRecord:
    """``omega(y, n) = y_0 + ... + y_{n-1}`` with running extremes, for ``n <= L``."""
    y = _steps(y)
    L = len(y) if L is None else L
    if not 0 <= L <= len(y):
        raise DomainError(f"L = {L} exceeds the sequence length {len(y)}")
    y = y[:L]
    omega, M, m = _kernels.kernel("walk_envelopes")(y)
    rec = WalkRecord(y, np.asarray(omega), np.asarray(M), np.asarray(m))
    rec.verify()
    return rec


def cocycle_defect(y: Sequence[int], a: int, b: int) -> int:
    """``omega(y, a+b) - omega(y, a) - omega(T^a y, b)``; zero for a cocycle."""
    y = _steps(y)
    if a + b > len(y):
        raise DomainError("a + b exceeds the sequence length")
    w = tt_walk(y, a + b).omega
    return int(w[a + b] - w[a] - tt_walk(y[a:], b).omega[b])


def geometric_block_walk(L: int, factor: int = 4) -> np.ndarray:
    """Block ``k``: ``factor^k`` steps +1, then ``2 factor^k`` alternating steps from -1."""
    out = []
    k = 0
    while len(out) < L:
        n = factor ** k
        out.extend([1] * n)
        out.extend([-1, 1] * n)
        k += 1
    return np.array(out[:L], dtype=np.int64)


def block_walk_limits(factor: int = 4) -> tuple:
    """Exact ``(limsup, liminf)`` of ``R(n)/n`` for ``geometric_block_walk``.

    Block ``k`` starts at ``3 (f^k - 1)/(f - 1)`` with range ``(f^k - 1)/(f - 1)``;
    the ratio peaks at ``f/(f + 2)`` after the up-run and drops to ``1/3`` by
    the end of the alternating stretch.
    """
    f = factor
    return f / (f + 2), 1.0 / 3.0


@dataclass(frozen=True)
class FiberEntropies:
    packing: float
    bowen: float
    regular: bool
    tol: float
    tail_fraction: float
    alphabet_size: int
    ratios: np.ndarray = field(repr=False)   # R(n)/n for n = 1..L

    @property
    def gap(self) -> float:
        return self.packing - self.bowen

    def to_json(self) -> dict:
        return {"packing": self.packing, "bowen": self.bowen, "regular": self.regular,
                "gap": self.gap, "tol": self.tol, "tail_fraction": self.tail_fraction,
                "alphabet_size": self.alphabet_size,
                "extrapolated": self.alphabet_size != 2}


def tt_fiber_entropies(y: Sequence[int], L: Optional[int] = None, tail_fraction: float = 1.0 / 3.0,
                       tol: float = 0.01, alphabet_size: int = 2) -> FiberEntropies:
    """``log|A|`` times the tail max / min of ``R(n)/n``; regular when they agree within ``tol``."""
    rec = tt_walk(y, L)
    if rec.L < 100:
        raise DomainError(f"fiber entropies need L >= 100, got {rec.L}")
    if not 0 < tail_fraction <= 1:
        raise DomainError("tail fraction must lie in (0, 1]")
    n = np.arange(1, rec.L + 1)
    ratios = rec.R[1:] / n
    k = max(1, int(math.ceil(rec.L * tail_fraction)))
    tail = ratios[rec.L - k:]
    h = math.log(alphabet_size)
    p, b = float(tail.max()) * h, float(tail.min()) * h
    return FiberEntropies(p, b, abs(p - b) < tol, tol, tail_fraction, alphabet_size, ratios)


def _radius_index(eps: float) -> int:
    """``k`` such that ``d < eps`` iff agreement on ``[-k, k]``."""
    k = 0
    while 2.0 ** -(k + 1) >= eps:
        k += 1
    return k


def _shifted_distance(diff: np.ndarray, coords: np.ndarray, p: int) -> np.ndarray:
    """Rowwise ``d(T^p x', T^p x)`` given the coordinates where ``x'`` and ``x`` differ."""
    far = np.where(diff, np.abs(coords - p)[None, :], np.iinfo(np.int64).max)
    j = far.min(axis=1)
    return np.where(j == np.iinfo(np.int64).max, 0.0, np.exp2(-j.astype(float)))


@dataclass(frozen=True)
class FiberBallCheck:
    equal: bool
    window: tuple      # coordinates enumerated exhaustively
    ball_size: int     # patterns in the ball
    interval: tuple    # (m(y, n-1), M(y, n-1))

    def __bool__(self) -> bool:
        return self.equal


def tt_fiber_ball_check(x: Sequence[int], y: Sequence[int], n: int, eps: float,
                        pad: int = 2, x_start: Optional[int] = None) -> FiberBallCheck:
    """Exhaustive check that the n-step Bowen ball of ``(x, y)`` inside the fiber over ``y``
    equals the ``[m(y, n-1), M(y, n-1)]`` Bowen ball of ``x`` times ``{y}``.

    ``x[i]`` is the symbol at coordinate ``x_start + i`` (default: centred).
    Every ``x'`` that differs from ``x`` only on ``[m - k - pad, M + k + pad]``
    is tested: the left side runs ``S`` step by step, the right side
    compares ``T^j x'`` with ``T^j x`` for each ``j`` in the interval.
    """
    if n > 12:
        raise ResourceError(f"n = {n} exceeds the exhaustive-check limit 12")
    if n < 1:
        raise DomainError("n must be at least 1")
    if not 0 < eps <= 1:
        raise DomainError("eps must lie in (0, 1]")
    ys = _steps(y)
    if len(ys) < n:
        raise DomainError("y is shorter than n")
    xs = _steps(x)
    start = -(len(xs) // 2) if x_start is None else int(x_start)
    rec = tt_walk(ys, n - 1)
    m, M = int(rec.m[-1]), int(rec.M[-1])
    k = _radius_index(eps)
    lo, hi = m - k - pad, M + k + pad
    if lo < start or hi > start + len(xs) - 1:
        raise DomainError(f"x must cover the coordinates [{lo}, {hi}]")
    coords = np.arange(lo, hi + 1)
    if len(coords) > 22:
        raise ResourceError(f"window of width {len(coords)} is too wide to enumerate")
    base = xs[lo - start:hi - start + 1]
    pats = 2 * np.array(list(itertools.product((0, 1), repeat=len(coords))), dtype=np.int64) - 1
    diff = pats != base[None, :]

    left = np.ones(len(pats), dtype=bool)
    p = 0                      # the fiber coordinate after i steps is T^p x
    for i in range(n):
        left &= _shifted_distance(diff, coords, p) < eps
        p += int(ys[i])
    right = np.ones(len(pats), dtype=bool)
    for j in range(m, M + 1):
        right &= _shifted_distance(diff, coords, j) < eps
    return FiberBallCheck(bool(np.array_equal(left, right)), (lo, hi), int(left.sum()), (m, M))


@dataclass(frozen=True)
class RangeStatistics:
    L: int
    trials: int
    seed: Optional[int]
    ratios: np.ndarray = field(repr=False)  # R(L)/L per trial

    @property
    def mean(self) -> float:
        return float(self.ratios.mean())

    @property
    def std(self) -> float:
        return float(self.ratios.std(ddof=1)) if self.trials > 1 else 0.0

    def quantiles(self) -> dict:
        q = np.quantile(self.ratios, [0.05, 0.25, 0.5, 0.75, 0.95])
        return dict(zip(("q05", "q25", "q50", "q75", "q95"), q.tolist()))

    def to_json(self) -> dict:
        return {"L": self.L, "trials": self.trials, "seed": self.seed, "mean": self.mean,
                "std": self.std, **self.quantiles()}

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["trial", "R_over_L"])
        for i, r in enumerate(self.ratios.tolist()):
            w.writerow([i, repr(r)])
        return buf.getvalue()


def srw_range_statistics(trials: int, L: int, seed: Optional[int] = 0,
                         y: Optional[Sequence[int]] = None) -> RangeStatistics:
    """``R(L)/L`` for ``trials`` uniform +-1 walks, one Philox stream per trial.

    Passing ``y`` replaces every trial by that fixed sequence.
    """
    if trials < 1 or L < 1:
        raise DomainError("trials and L must be positive")
    if y is not None:
        steps = np.repeat(_steps(y)[:L][None, :], trials, axis=0)
        if steps.shape[1] < L:
            raise DomainError("fixed y is shorter than L")
    else:
        streams = [np.random.Generator(np.random.Philox(s))
                   for s in np.random.SeedSequence(seed).spawn(trials)]
        steps = np.stack([2 * g.integers(0, 2, size=L, dtype=np.int64) - 1 for g in streams])
    R = np.asarray(_kernels.kernel("range_at")(steps))
    return RangeStatistics(L, trials, seed, R / L)


# -- X_{alpha, beta} -----------------------------------------------------------------------


@dataclass(frozen=True)
class XabReport:
    chain: ChainReport = field(repr=False)
    counts_exact: bool
    density_inf: float
    density_sup: float
    window: tuple
    bowen: float
    packing: float
    capacity: float
    variational: Optional[VariationalReport] = field(repr=False)
    tol: float

    @property
    def gap(self) -> float:
        return self.packing - self.bowen

    @property
    def bowen_ok(self) -> bool:
        return abs(self.bowen - self.density_inf * LOG2) < self.tol

    @property
    def packing_ok(self) -> bool:
        return (abs(self.packing - self.density_sup * LOG2) < self.tol
                and abs(self.capacity - self.density_sup * LOG2) < self.tol)

    def to_json(self) -> dict:
        return {"schema": 1, "kind": "xab_oracle", "bowen": self.bowen, "packing": self.packing,
                "capacity": self.capacity, "gap": self.gap, "counts_exact": self.counts_exact,
                "density_inf": self.density_inf, "density_sup": self.density_sup,
                "reference_window": list(self.window), "bowen_ok": self.bowen_ok,
                "packing_ok": self.packing_ok, "tol": self.tol, "chain_passed": self.chain.passed,
                "variational": None if self.variational is None else self.variational.to_json()}


def xab_schedule(depth: int) -> tuple:
    """Default start indices ``1..max(1, depth // 4)``."""
    return tuple(range(1, max(1, depth // 4) + 1)) if depth else (0,)


def xab_oracle(H: DensitySet, depth: int, params: Optional[EstimatorParams] = None,
               seq: Optional[FolnerSequence] = None, tol: float = 0.05,
               with_measure: bool = True) -> XabReport:
    """Build the X_{alpha,beta} tree and compare its estimates with the observed densities.

    The finite-scale references are the min and max of ``|H ∩ F_n| / |F_n|``
    over ``[N_last, D]``, the stretch the estimators read.
    """
    seq = seq or centered_boxes(1)
    if not (seq.family == "box" and seq.group == IntegerLattice(1)):
        raise DomainError("the X_{alpha,beta} oracle runs on Z with centered boxes")
    params = params or EstimatorParams(depth, xab_schedule(depth))
    tree = build_tree(xab_predicate(H), depth, seq)
    counts, sizes = density_counts(H, seq, depth)
    exact = all(int(c) == 2 ** int(h) for c, h in zip(tree.level_sizes, counts))
    chain = entropy_chain_check(tree, seq, params, strict=False)
    lo = params.N_schedule[-1]
    ratios = counts[lo:depth + 1] / sizes[lo:depth + 1]
    var = None
    if with_measure:
        var = variational_gap(tree, [XabMeasure(H, seq.group)], params=params, strict=False)
    return XabReport(chain, exact, float(ratios.min()), float(ratios.max()), (lo, depth),
                     chain.bowen, chain.packing, chain.capacity, var, tol)


# -- factor maps ----------------------------------------------------------------------------


@dataclass(frozen=True)
class BlockCode:
    """``pi(x)_i = rule(x_{i-r..i+r}, i)`` from ``source``-symbol to ``target``-symbol shifts on Z.

    Equivariant codes ignore ``i``; ``commutation_defect`` detects the ones that don't.
    """

    radius: int
    rule: Callable[[tuple, int], int]
    source: int
    target: int
    name: str = "code"

    @classmethod
    def symbol_map(cls, table: Sequence[int], target: Optional[int] = None) -> "BlockCode":
        table = tuple(int(t) for t in table)
        return cls(0, lambda w, i: table[w[0]], len(table), target or (max(table) + 1),
                   f"symbol_map{table}")

    @classmethod
    def identity(cls, k: int) -> "BlockCode":
        return cls(0, lambda w, i: w[0], k, k, "identity")

    @classmethod
    def from_table(cls, radius: int, table: dict, source: int, target: int) -> "BlockCode":
        return cls(radius, lambda w, i: table[tuple(w)], source, target, "table")

    def apply(self, values: np.ndarray, start: int) -> np.ndarray:
        """Image of ``values`` (on ``start..``) on the interior coordinates."""
        r = self.radius
        n = len(values) - 2 * r
        return np.array([self.rule(tuple(values[t:t + 2 * r + 1].tolist()), start + r + t)
                         for t in range(n)], dtype=np.int64)

    def commutation_defect(self, rng: np.random.Generator, trials: int = 20, length: int = 16) -> int:
        """Number of random points with ``pi(T x) != T pi(x)``."""
        bad = 0
        for _ in range(trials):
            v = rng.integers(0, self.source, size=length + 2 * self.radius + 1)
            a = self.apply(v, 0)          # pi(x) on r..
            b = self.apply(v[1:], 0)      # pi(Tx) read at the same positions, i.e. shifted
            if not np.array_equal(a[1:], b[:len(a) - 1]):
                bad += 1
        return bad


@dataclass(frozen=True)
class FactorReport:
    image: float
    source: float
    fiber: float
    left_ok: bool
    right_ok: bool
    tol: float
    depth: int
    fibers_sampled: int

    @property
    def right_slack(self) -> float:
        return self.image + self.fiber - self.source

    def to_json(self) -> dict:
        d = asdict(self)
        d.update(schema=1, kind="factor_inequality", right_slack=self.right_slack)
        return d


def image_tree(code: BlockCode, tree: CylinderTree) -> CylinderTree:
    """Tree of ``pi(E)`` to depth ``D - r`` from the level ``n + r`` source patterns."""
    seq = tree.seq
    r = code.radius
    if tree.depth < r:
        raise DomainError("tree too shallow for the code radius")
    levels = []
    for n in range(tree.depth - r + 1):
        src = tree.patterns[n + r].astype(np.int64)
        levels.append(np.array([code.apply(row, -(n + r)) for row in src], dtype=np.uint8)
                      .reshape(len(src), seq.size(n)))
    _ensure(code.target)
    return tree_from_levels(seq, code.target, levels)


def _ensure(target):
    if target < 2:
        raise DomainError("the target alphabet must have at least two symbols")


def fiber_capacity(code: BlockCode, tree: CylinderTree, y_leaves: np.ndarray,
                   n_range: tuple) -> float:
    """Max over image leaves ``y`` and ``n`` in ``n_range`` of
    ``log #{source nodes at level n + r whose image is y|F_n} / |F_n|``.

    Source nodes at level ``n + r`` are the Bowen balls of inflation ``r`` at
    level ``n``, the same resolution the source estimate uses.
    """
    seq = tree.seq
    r = code.radius
    deep = seq[tree.depth - r].index_map()
    best = 0.0
    for n in range(n_range[0], n_range[1] + 1):
        src = tree.patterns[n + r].astype(np.int64)
        img = np.array([code.apply(row, -(n + r)) for row in src], dtype=np.int64).reshape(len(src), -1)
        cols = np.array([deep[g] for g in seq[n].elements], dtype=np.int64)
        for y in y_leaves:
            c = int(np.all(img == y[cols], axis=1).sum())
            if c:
                best = max(best, math.log(c) / seq.size(n))
    return best


def factor_inequality_check(code: BlockCode, E_tree: CylinderTree,
                            params: Optional[EstimatorParams] = None, fibers: int = 50,
                            seed: int = 0, tol: float = 1e-4, strict: bool = True) -> FactorReport:
    """``h^P(pi E) <= h^P(E) <= h^P(pi E) + sup_y h^UC(pi^-1 y)`` at finite depth.

    The image tree has depth ``D - r``; the source is read at ball inflation
    ``r`` so both estimates see level-``n`` weights on the same windows.  The
    fiber term is maximized over ``fibers`` random image leaves plus the
    constant image paths present.
    """
    seq = E_tree.seq
    if not (seq.family == "box" and seq.group == IntegerLattice(1)):
        raise DomainError("factor checks run on Z with centered boxes")
    if code.source != E_tree.alphabet_size:
        raise DomainError(f"code reads {code.source} symbols, the tree has {E_tree.alphabet_size}")
    rng = np.random.Generator(np.random.Philox(seed))
    if code.commutation_defect(rng):
        raise DomainError(f"code {code.name!r} does not commute with the shift")
    img = image_tree(code, E_tree)
    D = img.depth
    params = params or EstimatorParams.default(D)
    sched = tuple(n for n in params.N_schedule if n <= D) or (D,)
    h_img = packing_entropy_estimate(img, None, sched, D, decompositions=[], tol=params.tol).value
    h_src = packing_entropy_estimate(E_tree, None, sched, D, inflation=code.radius,
                                     decompositions=[], tol=params.tol).value
    leaves = img.patterns[-1].astype(np.int64)
    pick = rng.choice(len(leaves), size=min(fibers, len(leaves)), replace=False)
    const = [i for i, row in enumerate(leaves) if np.all(row == row[0])]
    chosen = leaves[sorted(set(pick.tolist()) | set(const))]
    lo = max(sched[-1], 1)
    fib = fiber_capacity(code, E_tree, chosen, (min(lo, D), D))
    left = h_img <= h_src + tol
    right = h_src <= h_img + fib + tol
    rep = FactorReport(h_img, h_src, fib, left, right, tol, D, len(chosen))
    if strict and not (left and right):
        raise InvariantViolation(f"factor inequality violated: {rep}")
    return rep
