"""Capacity rates and critical exponents of cover/packing objectives on cylinder trees.

Under the cylinder metric a Bowen ball of radius ``threshold_radius(k)`` about
``x`` at time ``n`` is the cylinder of ``x`` on ``F_k F_n``.  An estimator with
inflation ``k`` therefore works on the tree of patterns on the windows
``W_n = F_k F_n`` and charges a ball at time ``n`` the weight ``exp(-s |F_n|)``.

* Cover objective (Bowen): cheapest cover of the level-``D`` cylinders by balls
  with times in ``[N, D]``; ``cost(node) = min(w_n, sum of children)``.
* Packing objective: heaviest antichain of balls with times in ``[N, D]``;
  ``gain(node) = max(w_n, sum of children)``.

The exponent is the root of ``objective(s) = 1``, found by bisection.
"""
from __future__ import annotations

import csv
import io
import itertools
import math
import warnings
from dataclasses import asdict, dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from . import _kernels
from .errors import DomainError, InvariantViolation, ResourceError
from .group import FolnerSequence, regular_system_check
from .shift import CylinderTree, threshold_radius

DEFAULT_TOL = 1e-6
DEFAULT_MAX_ITER = 60
DEFAULT_TAIL = 1.0 / 3.0


# -- rate traces ---------------------------------------------------------------


def _tail(values: np.ndarray, fraction: float) -> np.ndarray:
    if not 0 < fraction <= 1:
        raise DomainError(f"tail fraction must lie in (0, 1], got {fraction}")
    k = max(1, int(math.ceil(len(values) * fraction)))
    return values[len(values) - k:]


@dataclass(frozen=True)
class RateTrace:
    """``log(count_n) / |F_n|`` over ``n_min..n_max`` with tail extremes."""

    n: np.ndarray
    counts: np.ndarray
    values: np.ndarray
    tail_fraction: float
    inflation: int = 0

    @property
    def n_min(self) -> int:
        return int(self.n[0])

    @property
    def n_max(self) -> int:
        return int(self.n[-1])

    @property
    def tail_limsup(self) -> float:
        return float(_tail(self.values, self.tail_fraction).max())

    @property
    def tail_liminf(self) -> float:
        return float(_tail(self.values, self.tail_fraction).min())

    def to_json(self) -> dict:
        return {
            "schema": 1, "kind": "rate_trace", "n_min": self.n_min, "n_max": self.n_max,
            "inflation": self.inflation, "tail_fraction": self.tail_fraction,
            "n": self.n.tolist(), "counts": [int(c) for c in self.counts],
            "values": self.values.tolist(),
            "tail_limsup": self.tail_limsup, "tail_liminf": self.tail_liminf,
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "count", "rate"])
        for n, c, v in zip(self.n.tolist(), self.counts.tolist(), self.values.tolist()):
            w.writerow([n, c, repr(v)])
        return buf.getvalue()


# -- ball-window trees -----------------------------------------------------------


@dataclass(frozen=True)
class BallLevels:
    """Flattened tree of the patterns on the ball windows ``W_0, ..., W_T``."""

    parent: np.ndarray
    offsets: np.ndarray
    weights: np.ndarray  # |F_n| for ball time n
    inflation: int

    @property
    def depth(self) -> int:
        return len(self.offsets) - 2

    def counts(self) -> np.ndarray:
        return np.diff(self.offsets)

    def truncated(self, D: int) -> tuple:
        if not 0 <= D <= self.depth:
            raise DomainError(f"depth {D} outside 0..{self.depth} at inflation {self.inflation}")
        offs = self.offsets[:D + 2]
        return self.parent[:offs[-1]], offs, self.weights[:D + 1]


def _is_box(seq: FolnerSequence) -> bool:
    return seq.family == "box" and seq.group.name.startswith("z")


def ball_levels(tree: CylinderTree, inflation: int = 0) -> BallLevels:
    """Ball-window tree at inflation ``k``.

    For ``k = 0``, or centered boxes where ``F_k F_n = F_{n+k}``, this is the
    cylinder tree itself (shifted by ``k``); otherwise the patterns on each
    ``F_k F_n`` are obtained by restricting the deepest level.
    """
    if inflation < 0:
        raise DomainError("inflation index must be non-negative")
    seq = tree.seq
    parent, offsets, fsizes = tree.flat
    if inflation == 0 or _is_box(seq):
        k = inflation
        if k > tree.depth:
            raise DomainError(f"inflation {k} exceeds tree depth {tree.depth}")
        base = offsets[k]
        offs = offsets[k:] - base
        par = parent[base:].copy()
        par[:offs[1]] = -1
        par[offs[1]:] -= base
        weights = np.array([seq.size(n) for n in range(tree.depth - k + 1)], dtype=np.float64)
        return BallLevels(par, offs, weights, k)
    return _generic_ball_levels(tree, inflation)


def _generic_ball_levels(tree: CylinderTree, k: int) -> BallLevels:
    seq = tree.seq
    G = seq.group
    deep = tree.window(tree.depth)
    pos = deep.index_map()
    leaves = tree.patterns[-1]
    levels, parents = [], []
    prev_cols = prev_inv = None
    n = 0
    while True:
        W = G.product(seq[k], seq[n])
        if not W.issubset(deep):
            break
        cols = np.array([pos[g] for g in W.elements], dtype=np.int64)
        if prev_cols is not None and not set(prev_cols.tolist()) <= set(cols.tolist()):
            raise DomainError("inflated windows are not nested; use a regular system")
        uniq, inv = np.unique(leaves[:, cols], axis=0, return_inverse=True)
        inv = inv.ravel()
        if levels:
            par = np.empty(len(uniq), dtype=np.int64)
            par[inv] = prev_inv
            parents.append(par)
        prev_inv = inv
        levels.append(len(uniq))
        prev_cols = cols
        n += 1
    if not levels:
        raise DomainError(f"F_{k} F_0 does not fit inside the tree's deepest window")
    offsets = np.zeros(len(levels) + 1, dtype=np.int64)
    offsets[1:] = np.cumsum(levels)
    parent = np.full(offsets[-1], -1, dtype=np.int64)
    for t, par in enumerate(parents, start=1):
        parent[offsets[t]:offsets[t + 1]] = par + offsets[t - 1]
    weights = np.array([seq.size(t) for t in range(len(levels))], dtype=np.float64)
    return BallLevels(parent, offsets, weights, k)


def capacity_rate(tree: CylinderTree, seq: Optional[FolnerSequence] = None,
                  n_range: Optional[tuple] = None, tail_fraction: float = DEFAULT_TAIL,
                  inflation: int = 0) -> RateTrace:
    """Rates ``log(count_n) / |F_n|`` where ``count_n`` counts patterns on ``F_k F_n``.

    At inflation 0 these are the level sizes: distinct level-``n`` patterns are
    pairwise ``(F_n, eps)``-separated for every ``eps`` in ``[e^-1, 1)``, and any
    larger separated set would need two points in one cylinder.
    """
    _same_seq(tree, seq)
    levels = ball_levels(tree, inflation)
    lo, hi = n_range if n_range is not None else (1 if levels.depth >= 1 else 0, levels.depth)
    if hi > levels.depth:
        raise DomainError(f"tree supports n <= {levels.depth} at inflation {inflation}, asked {hi}")
    if not 0 <= lo <= hi:
        raise DomainError(f"bad index range {n_range}")
    n = np.arange(lo, hi + 1)
    counts = levels.counts()[lo:hi + 1]
    sizes = levels.weights[lo:hi + 1]
    if np.any(sizes == 0):
        raise DomainError("rates need non-empty windows; F_n is empty in the range")
    return RateTrace(n, counts, np.log(counts) / sizes, tail_fraction, inflation)


def _same_seq(tree, seq):
    if seq is not None and seq is not tree.seq and seq.identifier != tree.seq.identifier:
        raise DomainError(f"tree is over {tree.seq.identifier}, got {seq.identifier}")


# -- critical exponents ------------------------------------------------------------


@dataclass(frozen=True)
class ExponentReport:
    kind: str              # "bowen" or "packing"
    exponent: float        # s*, nats
    N: int
    D: int
    inflation: int
    eps: float
    bracket: tuple         # final (lo, hi)
    objective_lo: float
    objective_hi: float
    iterations: int
    levels: Optional[tuple] = None
    trace: tuple = field(default=(), repr=False)   # (s, objective) pairs

    @property
    def bracket_width(self) -> float:
        return self.bracket[1] - self.bracket[0]

    @property
    def monotone(self) -> bool:
        return self.objective_lo >= self.objective_hi

    def to_json(self) -> dict:
        d = asdict(self)
        d["bracket"] = list(self.bracket)
        d["trace"] = [list(t) for t in self.trace]
        d["levels"] = None if self.levels is None else list(self.levels)
        d["schema"] = 1
        return d


def _allowed_mask(D: int, N: int, levels: Optional[Iterable[int]]) -> np.ndarray:
    allowed = np.zeros(D + 1, dtype=np.int64)
    allowed[N:] = 1
    if levels is not None:
        chosen = np.zeros(D + 1, dtype=np.int64)
        for m in levels:
            if 0 <= m <= D:
                chosen[m] = 1
        chosen[D] = 1
        allowed &= chosen
    return allowed


def objective(tree_or_levels, s: float, N: int, D: int, kind: str, inflation: int = 0,
              levels: Optional[Iterable[int]] = None, backend: Optional[str] = None) -> float:
    """The cover (``kind="bowen"``) or packing objective at exponent ``s``."""
    bl = tree_or_levels if isinstance(tree_or_levels, BallLevels) else ball_levels(tree_or_levels, inflation)
    if kind not in ("bowen", "packing"):
        raise DomainError(f"kind must be 'bowen' or 'packing', got {kind!r}")
    if not 0 <= N <= D:
        raise DomainError(f"need 0 <= N <= D, got N={N}, D={D}")
    parent, offsets, weights = bl.truncated(D)
    fn = (_kernels.NUMPY if backend == "numpy" else _kernels.NUMBA if backend == "numba"
          else _kernels._ACTIVE)["tree_objective"]
    return fn(parent, offsets, weights, float(s), int(N), _allowed_mask(D, N, levels),
              kind == "packing")


def _exponent(kind, tree, N, D, inflation, levels, tol, max_iter, backend=None) -> ExponentReport:
    if tree.node_count == 0:
        raise DomainError("empty tree")
    bl = ball_levels(tree, inflation)
    if D is None:
        D = bl.depth
    lvl = None if levels is None else tuple(sorted(set(int(m) for m in levels)))
    f = lambda s: objective(bl, s, N, D, kind, levels=lvl, backend=backend)  # noqa: E731
    lo, hi = 0.0, math.log(tree.alphabet_size) + 1.0
    f_lo, f_hi = f(lo), f(hi)
    trace = [(lo, f_lo), (hi, f_hi)]
    it = 0
    if f_lo <= 1.0:
        hi, f_hi = lo, f_lo
    else:
        if f_hi > 1.0:
            raise InvariantViolation(f"{kind} objective {f_hi} > 1 at the upper bracket end")
        while hi - lo > tol and it < max_iter:
            mid = 0.5 * (lo + hi)
            v = f(mid)
            trace.append((mid, v))
            if v > 1.0:
                lo, f_lo = mid, v
            else:
                hi, f_hi = mid, v
            it += 1
    s_star = 0.5 * (lo + hi)
    return ExponentReport(kind, s_star, N, D, inflation, threshold_radius(inflation, tree.seq),
                          (lo, hi), f_lo, f_hi, it, lvl, tuple(trace))


def bowen_exponent(tree: CylinderTree, N: int, D: Optional[int] = None,
                   seq: Optional[FolnerSequence] = None, inflation: int = 0,
                   levels: Optional[Iterable[int]] = None, tol: float = DEFAULT_TOL,
                   max_iter: int = DEFAULT_MAX_ITER) -> ExponentReport:
    """Root of the cheapest-cover objective over ball times in ``[N, D]``."""
    _same_seq(tree, seq)
    return _exponent("bowen", tree, N, D, inflation, levels, tol, max_iter)


def packing_exponent(tree: CylinderTree, N: int, D: Optional[int] = None,
                     seq: Optional[FolnerSequence] = None, inflation: int = 0,
                     levels: Optional[Iterable[int]] = None, tol: float = DEFAULT_TOL,
                     max_iter: int = DEFAULT_MAX_ITER) -> ExponentReport:
    """Root of the heaviest-antichain objective over ball times in ``[N, D]``.

    This is the packing pre-measure at cylinder resolution, so the exponent is
    an upper bound for the decomposed quantity (see ``packing_entropy_estimate``).
    """
    _same_seq(tree, seq)
    return _exponent("packing", tree, N, D, inflation, levels, tol, max_iter)


# -- entropy estimates over a schedule ----------------------------------------------


@dataclass(frozen=True)
class EstimatorParams:
    depth: int
    N_schedule: tuple
    inflation: int = 0
    tail_fraction: float = DEFAULT_TAIL
    tol: float = DEFAULT_TOL
    max_iter: int = DEFAULT_MAX_ITER
    decomposition_level: Optional[int] = None

    def __post_init__(self):
        sched = tuple(int(n) for n in self.N_schedule)
        object.__setattr__(self, "N_schedule", sched)
        if not sched:
            raise DomainError("N schedule must be non-empty")
        if any(b <= a for a, b in zip(sched, sched[1:])):
            raise DomainError("N schedule must be strictly increasing")
        if sched[0] < 0 or sched[-1] > self.depth:
            raise DomainError(f"N schedule {sched} must lie in 0..{self.depth}")

    @classmethod
    def default(cls, depth: int, **kw) -> "EstimatorParams":
        """Schedule ``1..ceil(depth/2)`` (or ``0`` for depth 0)."""
        top = max(1, (depth + 1) // 2) if depth else 0
        return cls(depth, tuple(range(min(1, top), top + 1)), **kw)

    def to_json(self) -> dict:
        d = asdict(self)
        d["N_schedule"] = list(self.N_schedule)
        return d

    @classmethod
    def from_json(cls, d: dict) -> "EstimatorParams":
        return cls(**{k: (tuple(v) if k == "N_schedule" else v) for k, v in d.items()})


@dataclass(frozen=True)
class EntropyEstimate:
    kind: str
    value: float                    # schedule extremum of the exponents
    reports: tuple                  # one ExponentReport per N
    refined: Optional[float] = None  # packing only: after the decomposition refinement
    decompositions: tuple = ()      # (description, value) pairs

    @property
    def best(self) -> float:
        return self.value if self.refined is None else min(self.value, self.refined)

    def to_json(self) -> dict:
        return {
            "schema": 1, "kind": self.kind, "value": self.value, "refined": self.refined,
            "decompositions": [list(d) for d in self.decompositions],
            "reports": [r.to_json() for r in self.reports],
        }


def _schedule(N_schedule, D):
    sched = tuple(int(n) for n in N_schedule)
    if not sched:
        raise DomainError("N schedule must be non-empty")
    if any(b <= a for a, b in zip(sched, sched[1:])):
        raise DomainError("N schedule must be strictly increasing")
    if sched[0] < 0 or sched[-1] > D:
        raise DomainError(f"N schedule {sched} must lie in 0..{D}")
    return sched


def _packing_over_schedule(tree, sched, D, inflation, tol, max_iter):
    reps = tuple(packing_exponent(tree, N, D, inflation=inflation, tol=tol, max_iter=max_iter)
                 for N in sched)
    return min(r.exponent for r in reps), reps


def heuristic_decompositions(tree: CylinderTree, level: int) -> list:
    """Candidate finite decompositions of the set: ``(description, [node groups])``.

    Singletons of level-``level`` cylinders, plus splitting those cylinders by
    whether their subtree is heavier than the median (a crude two-part cover).
    """
    level = min(level, tree.depth)
    count = tree.count(level)
    out = [(f"cylinders@{level}", [[i] for i in range(count)])]
    if count >= 2:
        leaves = np.zeros(count, dtype=np.int64)
        idx = np.arange(tree.count(tree.depth))
        for n in range(tree.depth, level, -1):
            idx = tree.parents[n][idx]
        np.add.at(leaves, idx, 1)
        heavy = leaves > np.median(leaves)
        if heavy.any() and (~heavy).any():
            out.append((f"heavy/light@{level}", [np.flatnonzero(heavy).tolist(),
                                                 np.flatnonzero(~heavy).tolist()]))
    return out


def packing_entropy_estimate(tree: CylinderTree, seq: Optional[FolnerSequence] = None,
                             N_schedule: Sequence[int] = (1,), D: Optional[int] = None,
                             inflation: int = 0, decompositions: Optional[list] = None,
                             decomposition_level: Optional[int] = None,
                             tol: float = DEFAULT_TOL,
                             max_iter: int = DEFAULT_MAX_ITER) -> EntropyEstimate:
    """Min over the schedule of the packing exponent, plus a decomposition refinement.

    A decomposition is a list of groups of level-``L`` node indices; its value
    is the max over groups of the restricted tree's estimate.  ``refined`` is
    the min over the tried decompositions (schedule entries below ``L`` are
    raised to ``L`` inside the parts).  User decompositions are given as
    ``(level, groups)`` pairs.
    """
    _same_seq(tree, seq)
    D = ball_levels(tree, inflation).depth if D is None else D
    sched = _schedule(N_schedule, D)
    value, reps = _packing_over_schedule(tree, sched, D, inflation, tol, max_iter)
    tried = []
    cands = []
    if decompositions is not None:
        for level, groups in decompositions:
            cands.append((f"user@{level}", int(level), groups))
    elif decomposition_level is not None or tree.depth >= 2:
        L = decomposition_level if decomposition_level is not None else max(1, sched[0])
        L = min(L, tree.depth)
        for desc, groups in heuristic_decompositions(tree, L):
            cands.append((desc, L, groups))
    for desc, L, groups in cands:
        covered = sorted(i for g in groups for i in g)
        if covered != list(range(tree.count(L))) and set(covered) != set(range(tree.count(L))):
            raise DomainError(f"decomposition {desc} does not cover every level-{L} cylinder")
        part_sched = tuple(sorted(set(max(N, min(L, D)) for N in sched)))
        worst = 0.0
        for g in groups:
            part = tree.restrict_to(L, g)
            v, _ = _packing_over_schedule(part, part_sched, D, inflation, tol, max_iter)
            worst = max(worst, v)
        tried.append((desc, worst))
    refined = min((v for _, v in tried), default=None)
    return EntropyEstimate("packing", value, reps, refined, tuple(tried))


def bowen_entropy_estimate(tree: CylinderTree, seq: Optional[FolnerSequence] = None,
                           N_schedule: Sequence[int] = (1,), D: Optional[int] = None,
                           inflation: int = 0, tol: float = DEFAULT_TOL,
                           max_iter: int = DEFAULT_MAX_ITER) -> EntropyEstimate:
    """Max over the schedule of the cover exponent (it only grows with ``N``)."""
    _same_seq(tree, seq)
    D = ball_levels(tree, inflation).depth if D is None else D
    sched = _schedule(N_schedule, D)
    reps = tuple(bowen_exponent(tree, N, D, inflation=inflation, tol=tol, max_iter=max_iter)
                 for N in sched)
    return EntropyEstimate("bowen", max(r.exponent for r in reps), reps)


@dataclass(frozen=True)
class ChainReport:
    bowen: float
    packing: float
    capacity: float
    tol: float
    passed: bool
    level_slack: float              # log(#times in [N, D]) / |F_N|
    bowen_estimate: EntropyEstimate = field(repr=False)
    packing_estimate: EntropyEstimate = field(repr=False)
    capacity_trace: RateTrace = field(repr=False)

    @property
    def triple(self) -> tuple:
        return (self.bowen, self.packing, self.capacity)

    @property
    def within_level_slack(self) -> bool:
        """``h^P <= h^UC + level_slack``, which holds at every finite scale.

        An antichain mixing ``D - N + 1`` ball times weighs at most that many
        times the heaviest single level, hence the logarithmic slack.
        """
        return self.packing <= self.capacity + self.level_slack + 2 * self.tol

    def to_json(self) -> dict:
        return {
            "schema": 1, "kind": "entropy_chain", "bowen": self.bowen, "packing": self.packing,
            "capacity": self.capacity, "tol": self.tol, "passed": self.passed,
            "level_slack": self.level_slack, "within_level_slack": self.within_level_slack,
            "packing_refined": self.packing_estimate.refined,
            "bowen_estimate": self.bowen_estimate.to_json(),
            "packing_estimate": self.packing_estimate.to_json(),
            "capacity_trace": self.capacity_trace.to_json(),
        }


def entropy_chain_check(tree: CylinderTree, seq: Optional[FolnerSequence] = None,
                        params: Optional[EstimatorParams] = None, strict: bool = True) -> ChainReport:
    """Estimate ``(h^B, h^P, h^UC)`` with shared parameters and check their order.

    The capacity reference is the max of the rate trace over ``[N_last, D]``,
    the whole stretch the exponents look at (that stretch is the tail).  The check is
    ``h^B <= h^P + tol <= h^UC + 2 tol`` with ``tol`` the bisection tolerance;
    with ``strict`` a violation raises ``InvariantViolation``.  The second
    inequality is a limit statement and can fail at finite depth by up to
    ``level_slack``; ``within_level_slack`` reports the finite-scale bound.
    """
    _same_seq(tree, seq)
    params = params or EstimatorParams.default(tree.depth)
    D = min(params.depth, ball_levels(tree, params.inflation).depth)
    sched = tuple(n for n in params.N_schedule if n <= D) or (D,)
    b = bowen_entropy_estimate(tree, None, sched, D, params.inflation, params.tol, params.max_iter)
    p = packing_entropy_estimate(tree, None, sched, D, params.inflation,
                                 decomposition_level=params.decomposition_level,
                                 tol=params.tol, max_iter=params.max_iter)
    lo = max(sched[-1], 1 if tree.seq.size(0) == 0 else 0)
    cap = capacity_rate(tree, None, (min(lo, D), D), 1.0, params.inflation)
    tol = params.tol
    hb, hp, huc = b.value, p.value, cap.tail_limsup
    ok = hb <= hp + tol and hp + tol <= huc + 2 * tol
    N = sched[-1]
    slack = math.log(D - N + 1) / tree.seq.size(N) if tree.seq.size(N) else math.inf
    rep = ChainReport(hb, hp, huc, tol, ok, slack, b, p, cap)
    if strict and not ok:
        raise InvariantViolation(f"entropy chain violated: bowen={hb!r}, packing={hp!r}, "
                                 f"capacity={huc!r}, tol={tol}")
    return rep


# -- dimension correspondence -----------------------------------------------------------


@dataclass(frozen=True)
class DimensionValue:
    value: float
    mode: str
    regular_system: Optional[bool]
    ratio_condition: Optional[bool]
    note: str

    def to_json(self) -> dict:
        return asdict(self)


def dimension_correspondence(entropy: float, mode: str = "hausdorff",
                             seq: Optional[FolnerSequence] = None, m_max: int = 8,
                             ratio_n: int = 64) -> DimensionValue:
    """Read an entropy as the Hausdorff (Bowen) or packing dimension under the cylinder metric.

    The value is unchanged; what this adds is the hypothesis check on ``seq``
    (``F_m F_n`` inside ``F_{m+n}`` and ``|F_{n+1}| / |F_n| -> 1``), with a
    warning when it cannot be confirmed.
    """
    if mode not in ("hausdorff", "packing"):
        raise DomainError(f"mode must be 'hausdorff' or 'packing', got {mode!r}")
    if entropy < 0 or not math.isfinite(entropy):
        raise DomainError(f"entropy must be finite and non-negative, got {entropy}")
    if seq is None:
        warnings.warn("no Følner sequence given: regular-system hypotheses unchecked", stacklevel=2)
        return DimensionValue(float(entropy), mode, None, None, "hypotheses unchecked")
    rep = regular_system_check(seq, m_max, ratio_n)
    note = "dimension equals entropy" if (rep.passed and rep.ratio_condition) else \
        "hypotheses fail at the checked scale; value reported as entropy only"
    if not (rep.passed and rep.ratio_condition):
        warnings.warn(f"{seq.identifier}: {note}", stacklevel=2)
    return DimensionValue(float(entropy), mode, rep.passed, rep.ratio_condition, note)


# -- brute-force oracle -------------------------------------------------------------------


def enumerate_cuts(tree: CylinderTree, N: int, D: int, levels: Optional[Iterable[int]] = None,
                   limit: int = 1_000_000):
    """Yield every cut of the tree between times ``N`` and ``D`` as a tuple of (level, node).

    A cut picks, below every level-``N`` node, an antichain meeting every leaf
    at level ``D``; in a pruned tree these are exactly the maximal antichains
    and the minimal covers.  Raises ``ResourceError`` past ``limit`` cuts.
    """
    allowed = _allowed_mask(D, N, levels)
    kids = [tree.children(n) for n in range(D)]
    memo = {}

    def cuts(n, i):
        key = (n, i)
        if key in memo:
            return memo[key]
        if n == D:
            out = [((n, i),)]
        else:
            below = [cuts(n + 1, c) for c in kids[n][i]]
            out = []
            total = 1
            for b in below:
                total *= len(b)
            if total > limit:
                raise ResourceError(f"more than {limit} cuts below node {key}")
            for combo in itertools.product(*below):
                out.append(tuple(itertools.chain.from_iterable(combo)))
            if allowed[n]:
                out.append(((n, i),))
        if len(out) > limit:
            raise ResourceError(f"more than {limit} cuts below node {key}")
        memo[key] = out
        return out

    per_root = [cuts(N, i) for i in range(tree.count(N))]
    total = 1
    for r in per_root:
        total *= len(r)
    if total > limit:
        raise ResourceError(f"{total} cuts exceed the limit {limit}")
    for combo in itertools.product(*per_root):
        yield tuple(itertools.chain.from_iterable(combo))


def brute_force_objective(tree: CylinderTree, s: float, N: int, D: int, kind: str,
                          levels: Optional[Iterable[int]] = None) -> float:
    """The objective by exhaustive enumeration of cuts (inflation 0)."""
    sizes = [tree.seq.size(n) for n in range(D + 1)]
    best = None
    pick = max if kind == "packing" else min
    for cut in enumerate_cuts(tree, N, D, levels):
        w = math.fsum(math.exp(-s * sizes[n]) for n, _ in cut)
        best = w if best is None else pick(best, w)
    return best
