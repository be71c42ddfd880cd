"""Cylinder measures, local entropies and generic-point diagnostics.

A measure is an oracle ``(window, pattern) -> mass``.  Masses are handled in
log space (``-inf`` for zero) so long windows do not underflow.  On Z with
centered boxes, traces along a sampled line use prefix sums instead of
re-evaluating every window.
"""
from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional, Sequence

import numpy as np

from . import _kernels
from .errors import DomainError
from .group import FiniteSubset, FolnerSequence, Group, IntegerLattice, centered_boxes
from .shift import (Configuration, CylinderTree, DensitySet, GridConfiguration,
                    inflated_window, line_configuration)

LOG_HALF = math.log(0.5)


def _log(x):
    with np.errstate(divide="ignore"):
        return np.log(x)


def point_streams(seed: int, count: int) -> list:
    """Independent counter-based generators, one per sample point."""
    return [np.random.Generator(np.random.Philox(s))
            for s in np.random.SeedSequence(seed).spawn(count)]


def entropy_of(p: Sequence[float]) -> float:
    """Shannon entropy in nats."""
    p = np.asarray(p, dtype=float)
    p = p[p > 0]
    return float(-(p * np.log(p)).sum())


class CylinderMeasure:
    """Base class: subclasses provide ``log_masses`` (and line fast paths where cheap)."""

    kind = "measure"
    group: Group
    alphabet_size: int

    def log_masses(self, window: FiniteSubset, patterns: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def log_mass(self, window: FiniteSubset, pattern: Sequence[int]) -> float:
        if not len(window):
            return 0.0
        pats = np.asarray(pattern, dtype=np.int64).reshape(1, len(window))
        return float(self.log_masses(window, pats)[0])

    def mass(self, window: FiniteSubset, pattern: Sequence[int]) -> float:
        return math.exp(self.log_mass(window, pattern))

    def cylinder_mass(self, cylinder) -> float:
        return self.mass(cylinder.window, cylinder.pattern)

    def masses(self, window: FiniteSubset, patterns: np.ndarray) -> np.ndarray:
        return np.exp(self.log_masses(window, np.asarray(patterns, dtype=np.int64)))

    def line_log_masses(self, values: np.ndarray, radii: np.ndarray) -> np.ndarray:
        """``log mu([x|_{[-r, r]}])`` for each ``r``; ``values`` holds ``x`` on ``[-R, R]``."""
        R = (len(values) - 1) // 2
        G = IntegerLattice(1)
        out = np.empty(len(radii))
        for t, r in enumerate(np.asarray(radii).tolist()):
            W = FiniteSubset(G, [(i,) for i in range(-r, r + 1)])
            out[t] = self.log_mass(W, values[R - r:R + r + 1])
        return out

    def sample_line(self, rng: np.random.Generator, lo: int, hi: int) -> np.ndarray:
        raise DomainError(f"{self.kind} measures cannot sample lines")

    def sample_configuration(self, rng: np.random.Generator, radius: int) -> GridConfiguration:
        """A Z-configuration drawn from the measure on ``[-radius, radius]``."""
        vals = self.sample_line(rng, -radius, radius)
        return line_configuration(vals, -radius, self.alphabet_size)

    def _check(self, window: FiniteSubset, patterns: np.ndarray) -> np.ndarray:
        patterns = np.asarray(patterns, dtype=np.int64)
        if patterns.ndim != 2 or patterns.shape[1] != len(window):
            raise DomainError(f"patterns must have shape (k, {len(window)})")
        if patterns.size and (patterns.min() < 0 or patterns.max() >= self.alphabet_size):
            raise DomainError("pattern symbol outside the alphabet")
        return patterns

    def to_json(self) -> dict:
        return {"kind": self.kind}


def _symmetric_cumsum(site: np.ndarray, radii: np.ndarray) -> np.ndarray:
    """Sums of ``site`` over ``[-r, r]`` for a vector indexed from ``-R``."""
    R = (len(site) - 1) // 2
    c = np.concatenate([[0.0], np.cumsum(site)])
    radii = np.asarray(radii, dtype=np.int64)
    return c[R + radii + 1] - c[R - radii]


class Bernoulli(CylinderMeasure):
    kind = "bernoulli"

    def __init__(self, p: Sequence[float], group: Optional[Group] = None):
        p = np.asarray(p, dtype=float)
        if p.ndim != 1 or len(p) < 2 or np.any(p < 0) or abs(p.sum() - 1) > 1e-12:
            raise DomainError(f"Bernoulli weights must be a probability vector, got {p}")
        self.p = p / p.sum()
        self.logp = _log(self.p)
        self.alphabet_size = len(p)
        self.group = group or IntegerLattice(1)

    @property
    def entropy(self) -> float:
        return entropy_of(self.p)

    def log_masses(self, window, patterns):
        patterns = self._check(window, patterns)
        return self.logp[patterns].sum(axis=1)

    def line_log_masses(self, values, radii):
        site = self.logp[np.asarray(values, dtype=np.int64)]
        return _prefix_from_sites(site, radii)

    def sample_line(self, rng, lo, hi):
        return rng.choice(self.alphabet_size, size=hi - lo + 1, p=self.p)

    def to_json(self):
        return {"kind": self.kind, "p": self.p.tolist()}


def _prefix_from_sites(site, radii):
    finite = np.where(np.isfinite(site), site, 0.0)
    zero = (~np.isfinite(site)).astype(np.int64)
    sums = _symmetric_cumsum(finite, radii)
    bad = _symmetric_cumsum(zero.astype(float), radii) > 0
    return np.where(bad, -np.inf, sums)


class Markov(CylinderMeasure):
    """Stationary Markov measure on Z; non-contiguous windows use matrix powers."""

    kind = "markov"

    def __init__(self, P: Sequence[Sequence[float]], pi: Optional[Sequence[float]] = None):
        P = np.asarray(P, dtype=float)
        k = P.shape[0]
        if P.shape != (k, k) or k < 2 or np.any(P < 0) or np.any(np.abs(P.sum(axis=1) - 1) > 1e-12):
            raise DomainError("transition matrix must be square and row-stochastic")
        if pi is None:
            w, v = np.linalg.eig(P.T)
            i = int(np.argmin(np.abs(w - 1)))
            pi = np.real(v[:, i])
            pi = pi / pi.sum()
        pi = np.asarray(pi, dtype=float)
        if np.any(pi < -1e-12) or abs(pi.sum() - 1) > 1e-9 or np.max(np.abs(pi @ P - pi)) > 1e-9:
            raise DomainError("initial vector must be a stationary distribution")
        self.P, self.pi = P, np.clip(pi, 0, None) / np.clip(pi, 0, None).sum()
        self.alphabet_size = k
        self.group = IntegerLattice(1)
        self._powers = {1: P}

    @property
    def entropy_rate(self) -> float:
        return float(-(self.pi[:, None] * self.P * np.where(self.P > 0, _log(self.P), 0)).sum())

    def power(self, g: int) -> np.ndarray:
        M = self._powers.get(g)
        if M is None:
            M = np.linalg.matrix_power(self.P, g)
            self._powers[g] = M
        return M

    def log_masses(self, window, patterns):
        patterns = self._check(window, patterns)
        if not isinstance(window.group, IntegerLattice) or window.group.d != 1:
            raise DomainError("Markov measures live on Z")
        pos = window.array[:, 0]
        out = _log(self.pi[patterns[:, 0]])
        for t in range(1, len(pos)):
            M = self.power(int(pos[t] - pos[t - 1]))
            out = out + _log(M[patterns[:, t - 1], patterns[:, t]])
        return out

    def line_log_masses(self, values, radii):
        values = np.asarray(values, dtype=np.int64)
        R = (len(values) - 1) // 2
        trans = _log(self.P[values[:-1], values[1:]])   # edge i -> i+1, indexed from -R
        start = _log(self.pi[values])
        radii = np.asarray(radii, dtype=np.int64)
        finite = np.where(np.isfinite(trans), trans, 0.0)
        c = np.concatenate([[0.0], np.cumsum(finite)])
        z = np.concatenate([[0], np.cumsum(~np.isfinite(trans))])
        lo, hi = R - radii, R + radii   # edges lo..hi-1
        out = start[lo] + c[hi] - c[lo]
        return np.where((z[hi] - z[lo]) > 0, -np.inf, out)

    def sample_line(self, rng, lo, hi):
        n = hi - lo + 1
        out = np.empty(n, dtype=np.int64)
        u = rng.random(n)
        out[0] = np.searchsorted(np.cumsum(self.pi), u[0], side="right")
        cum = np.cumsum(self.P, axis=1)
        for i in range(1, n):
            out[i] = np.searchsorted(cum[out[i - 1]], u[i], side="right")
        return np.minimum(out, self.alphabet_size - 1)

    def to_json(self):
        return {"kind": self.kind, "P": self.P.tolist(), "pi": self.pi.tolist()}


class PointMass(CylinderMeasure):
    kind = "point_mass"

    def __init__(self, point: Configuration):
        self.point = point
        self.alphabet_size = point.alphabet_size
        self.group = point.group

    def log_masses(self, window, patterns):
        patterns = self._check(window, patterns)
        ref = self.point.values(window.elements)
        return np.where(np.all(patterns == ref, axis=1), 0.0, -np.inf)

    def line_log_masses(self, values, radii):
        R = (len(values) - 1) // 2
        ref = self.point.values([(i,) for i in range(-R, R + 1)])
        site = np.where(np.asarray(values) == ref, 0.0, -np.inf)
        return _prefix_from_sites(site, radii)

    def sample_line(self, rng, lo, hi):
        return self.point.values([(i,) for i in range(lo, hi + 1)])


class XabMeasure(CylinderMeasure):
    """Fair coins on ``H``, the symbol 0 elsewhere: ``mass = 2^-|H ∩ W|`` on admissible patterns."""

    kind = "xab"

    def __init__(self, H: DensitySet, group: Optional[Group] = None):
        self.H = H
        self.alphabet_size = 2
        self.group = group or IntegerLattice(1)

    def _free(self, window):
        return np.fromiter((self.H(g) for g in window.elements), dtype=bool, count=len(window))

    def log_masses(self, window, patterns):
        patterns = self._check(window, patterns)
        free = self._free(window)
        ok = np.all((patterns == 0) | free, axis=1)
        return np.where(ok, free.sum() * LOG_HALF, -np.inf)

    def line_log_masses(self, values, radii):
        R = (len(values) - 1) // 2
        free = np.array([self.H((i,)) for i in range(-R, R + 1)])
        site = np.where(free, LOG_HALF, np.where(np.asarray(values) == 0, 0.0, -np.inf))
        return _prefix_from_sites(site, radii)

    def sample_line(self, rng, lo, hi):
        free = np.array([self.H((i,)) for i in range(lo, hi + 1)])
        return np.where(free, rng.integers(0, 2, size=len(free)), 0)

    def to_json(self):
        return {"kind": self.kind, "alpha": self.H.alpha, "beta": self.H.beta,
                "schedule": self.H.schedule}


class ProductMeasure(CylinderMeasure):
    """``mu x nu`` on ``(A x B)^G``; the pair ``(a, b)`` is the symbol ``a * |B| + b``."""

    kind = "product"

    def __init__(self, left: CylinderMeasure, right: CylinderMeasure):
        if left.group != right.group:
            raise DomainError("product factors live on different groups")
        self.left, self.right = left, right
        self.alphabet_size = left.alphabet_size * right.alphabet_size
        self.group = left.group

    def split(self, patterns):
        k = self.right.alphabet_size
        return patterns // k, patterns % k

    def log_masses(self, window, patterns):
        patterns = self._check(window, patterns)
        a, b = self.split(patterns)
        return self.left.log_masses(window, a) + self.right.log_masses(window, b)

    def line_log_masses(self, values, radii):
        a, b = self.split(np.asarray(values, dtype=np.int64))
        return self.left.line_log_masses(a, radii) + self.right.line_log_masses(b, radii)

    def sample_line(self, rng, lo, hi):
        return (self.left.sample_line(rng, lo, hi) * self.right.alphabet_size
                + self.right.sample_line(rng, lo, hi))

    def to_json(self):
        return {"kind": self.kind, "left": self.left.to_json(), "right": self.right.to_json()}


class Mixture(CylinderMeasure):
    """Finite convex combination, e.g. the orbit measure of a periodic point."""

    kind = "mixture"

    def __init__(self, weights: Sequence[float], components: Sequence[CylinderMeasure]):
        w = np.asarray(weights, dtype=float)
        if len(w) != len(components) or not len(w) or np.any(w < 0) or abs(w.sum() - 1) > 1e-12:
            raise DomainError("mixture weights must be a probability vector matching the components")
        ks = {c.alphabet_size for c in components}
        if len(ks) != 1:
            raise DomainError("mixture components differ in alphabet")
        self.weights, self.components = w, tuple(components)
        self.alphabet_size = ks.pop()
        self.group = components[0].group

    def _combine(self, logs):
        logs = np.stack(logs) + _log(self.weights)[:, None]
        top = logs.max(axis=0)
        safe = np.where(np.isfinite(top), top, 0.0)
        with np.errstate(invalid="ignore"):
            s = np.exp(logs - safe).sum(axis=0)
        return np.where(np.isfinite(top), safe + _log(s), -np.inf)

    def log_masses(self, window, patterns):
        patterns = self._check(window, patterns)
        return self._combine([c.log_masses(window, patterns) for c in self.components])

    def line_log_masses(self, values, radii):
        return self._combine([c.line_log_masses(values, radii) for c in self.components])

    def sample_line(self, rng, lo, hi):
        i = rng.choice(len(self.weights), p=self.weights)
        return self.components[i].sample_line(rng, lo, hi)

    def to_json(self):
        return {"kind": self.kind, "weights": self.weights.tolist(),
                "components": [c.to_json() for c in self.components]}


class TreeMeasure(CylinderMeasure):
    """A measure carried by the leaves of a cylinder tree.

    ``split="uniform"`` splits each node's mass evenly among its children;
    ``split="leaves"`` gives every deepest cylinder the same mass.
    """

    kind = "tree"

    def __init__(self, tree: CylinderTree, split: str = "uniform"):
        self.tree = tree
        self.alphabet_size = tree.alphabet_size
        self.group = tree.seq.group
        self.split = split
        if split == "leaves":
            w = np.full(tree.count(tree.depth), 1.0 / tree.count(tree.depth))
        elif split == "uniform":
            w = np.full(tree.count(0), 1.0 / tree.count(0))
            for n in range(1, tree.depth + 1):
                par = tree.parents[n]
                fan = np.bincount(par, minlength=tree.count(n - 1))
                w = w[par] / fan[par]
        else:
            raise DomainError(f"unknown split rule {split!r}")
        self.leaf_mass = w

    def log_masses(self, window, patterns):
        patterns = self._check(window, patterns)
        deep = self.tree.window(self.tree.depth)
        if not window.issubset(deep):
            raise DomainError("tree measures only see windows inside the deepest tree window")
        pos = deep.index_map()
        cols = np.array([pos[g] for g in window.elements], dtype=np.int64)
        leaves = self.tree.patterns[-1][:, cols].astype(np.int64)
        out = np.empty(len(patterns))
        for t, p in enumerate(patterns):
            out[t] = math.fsum(self.leaf_mass[np.all(leaves == p, axis=1)])
        return _log(out)

    def to_json(self):
        return {"kind": self.kind, "split": self.split}


def periodic_orbit_measure(pattern: Sequence[int], alphabet_size: int = 2) -> Mixture:
    """Uniform mixture of point masses on the shifts of the periodic Z-point with given period word."""
    pattern = list(pattern)
    p = len(pattern)
    comps = [PointMass(_periodic_point(pattern[s:] + pattern[:s], alphabet_size)) for s in range(p)]
    return Mixture([1.0 / p] * p, comps)


class _PeriodicPoint(Configuration):
    def __init__(self, word, alphabet_size):
        self.word = np.asarray(word, dtype=np.int64)
        self.group = IntegerLattice(1)
        self.alphabet_size = alphabet_size

    def value(self, g):
        return int(self.word[g[0] % len(self.word)])

    def values(self, elements):
        if not len(elements):
            return np.empty(0, dtype=np.int64)
        idx = np.asarray(elements, dtype=np.int64)[:, 0] % len(self.word)
        return self.word[idx]


def _periodic_point(word, alphabet_size) -> Configuration:
    return _PeriodicPoint(word, alphabet_size)


def periodic_point(word: Sequence[int], alphabet_size: int = 2) -> Configuration:
    """The Z-configuration ``x_i = word[i mod len(word)]``."""
    return _PeriodicPoint(list(word), alphabet_size)


def measure_from_config(cfg: dict, seq: Optional[FolnerSequence] = None) -> CylinderMeasure:
    """Build a measure from ``{"kind": ..., parameters}``."""
    kind = cfg.get("kind")
    if kind == "bernoulli":
        return Bernoulli(cfg["p"])
    if kind == "markov":
        return Markov(cfg["P"], cfg.get("pi"))
    if kind == "xab":
        seq = seq or centered_boxes(1)
        H = DensitySet.geometric_blocks(seq, cfg["alpha"], cfg["beta"], cfg.get("factor", 4))
        return XabMeasure(H, seq.group)
    if kind == "point_mass":
        if "period" in cfg:
            return PointMass(periodic_point(cfg["period"], cfg.get("alphabet_size", 2)))
        vals = [int(c, 36) for c in cfg["pattern"]]
        return PointMass(line_configuration(vals, cfg.get("start", 0), cfg.get("alphabet_size", 2),
                                            cfg.get("default", 0)))
    if kind == "periodic_orbit":
        return periodic_orbit_measure(cfg["period"], cfg.get("alphabet_size", 2))
    if kind == "product":
        return ProductMeasure(measure_from_config(cfg["left"], seq), measure_from_config(cfg["right"], seq))
    if kind == "mixture":
        return Mixture(cfg["weights"], [measure_from_config(c, seq) for c in cfg["components"]])
    raise DomainError(f"unknown measure kind {kind!r}")


# -- ball masses and local entropies ---------------------------------------------------------


def _line_fast_path(seq: FolnerSequence, mu: CylinderMeasure) -> bool:
    G = seq.group
    return (seq.family == "box" and isinstance(G, IntegerLattice) and G.d == 1
            and type(mu).line_log_masses is not CylinderMeasure.line_log_masses)


def _ball_window(n, k, seq):
    if k > 0 and seq.regular is not True:
        warnings.warn(f"{seq.identifier} is not a declared regular system: the window is a "
                      "superset of the ball's and the mass a lower bound", stacklevel=3)
    return inflated_window(n, k, seq)


def ball_mass(mu: CylinderMeasure, x: Configuration, n: int, eps_index: int,
              seq: FolnerSequence) -> float:
    """``mu(B_{F_n}(x, eps_k))`` as the mass of ``x``'s cylinder on ``F_k F_n``."""
    W = _ball_window(n, eps_index, seq)
    return mu.mass(W, x.restrict(W))


def log_ball_masses(mu: CylinderMeasure, x: Configuration, eps_index: int,
                    seq: FolnerSequence, ns: Sequence[int]) -> np.ndarray:
    ns = np.asarray(list(ns), dtype=np.int64)
    if _line_fast_path(seq, mu):
        R = int(ns.max()) + eps_index
        if isinstance(x, GridConfiguration):
            vals = x.line(-R, R)
        else:
            vals = x.values([(i,) for i in range(-R, R + 1)])
        return mu.line_log_masses(np.asarray(vals, dtype=np.int64), ns + eps_index)
    out = np.empty(len(ns))
    for t, n in enumerate(ns.tolist()):
        W = _ball_window(n, eps_index, seq)
        out[t] = mu.log_mass(W, x.restrict(W))
    return out


@dataclass(frozen=True)
class LocalEntropyTrace:
    n: np.ndarray
    values: np.ndarray          # -log mu(B_{F_n}(x, eps)) / |F_n|, +inf after zero mass
    eps_index: int
    tail_fraction: float
    truncated: bool

    def _tail(self):
        finite = self.values
        k = max(1, int(math.ceil(len(finite) * self.tail_fraction)))
        return finite[len(finite) - k:]

    @property
    def upper(self) -> float:
        return float(self._tail().max())

    @property
    def lower(self) -> float:
        return float(self._tail().min())

    def to_csv_rows(self):
        return [(int(n), float(v)) for n, v in zip(self.n, self.values)]


def local_entropy_trace(mu: CylinderMeasure, x: Configuration, eps_index: int,
                        seq: FolnerSequence, n_range: tuple,
                        tail_fraction: float = 1.0 / 3.0) -> LocalEntropyTrace:
    """``-log mu(B_{F_n}(x, eps)) / |F_n|`` over ``n_range`` with tail extremes.

    A zero-mass ball ends the trace: its value is recorded as ``+inf`` and
    ``truncated`` is set.
    """
    lo, hi = n_range
    if not 0 <= lo <= hi:
        raise DomainError(f"bad index range {n_range}")
    if not 0 < tail_fraction <= 1:
        raise DomainError("tail fraction must lie in (0, 1]")
    ns = np.arange(lo, hi + 1)
    sizes = np.array([_size(seq, int(n)) for n in ns], dtype=float)
    if np.any(sizes == 0):
        raise DomainError("local entropies need non-empty F_n")
    logs = log_ball_masses(mu, x, eps_index, seq, ns)
    values = -logs / sizes
    dead = np.flatnonzero(~np.isfinite(logs))
    truncated = bool(len(dead))
    if truncated:
        values = values[:dead[0] + 1]
        ns = ns[:dead[0] + 1]
        values[-1] = math.inf
    return LocalEntropyTrace(ns, np.maximum(values, 0.0), eps_index, tail_fraction, truncated)


def _size(seq, n):
    if seq.family == "box" and isinstance(seq.group, IntegerLattice):
        return (2 * n + 1) ** seq.group.d
    return seq.size(n)


@dataclass(frozen=True)
class LocalEntropySummary:
    value: float             # mean of the per-point upper tails
    lower: float             # mean of the per-point lower tails
    upper_points: np.ndarray
    lower_points: np.ndarray
    provenance: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"value": self.value, "lower": self.lower,
                "upper_points": self.upper_points.tolist(),
                "lower_points": self.lower_points.tolist(), "provenance": self.provenance}


def upper_local_entropy_over(mu: CylinderMeasure, Z_sample: Sequence[Configuration], eps_index: int,
                             seq: FolnerSequence, n_range: tuple, tail_fraction: float = 1.0 / 3.0,
                             provenance: Optional[dict] = None) -> LocalEntropySummary:
    """Sample mean of the upper local entropy over ``Z_sample``."""
    if not len(Z_sample):
        raise DomainError("the sample is empty")
    traces = [local_entropy_trace(mu, x, eps_index, seq, n_range, tail_fraction) for x in Z_sample]
    up = np.array([t.upper for t in traces])
    low = np.array([t.lower for t in traces])
    prov = {"points": len(Z_sample), "eps_index": eps_index, "n_range": list(n_range),
            "tail_fraction": tail_fraction, **(provenance or {})}
    return LocalEntropySummary(float(up.mean()), float(low.mean()), up, low, prov)


def sample_points(mu: CylinderMeasure, count: int, radius: int, seed: int) -> list:
    """``count`` Z-configurations drawn from ``mu`` on ``[-radius, radius]``, one stream each."""
    return [mu.sample_configuration(rng, radius) for rng in point_streams(seed, count)]


# -- empirical averages and genericity --------------------------------------------------------


@dataclass(frozen=True)
class Observable:
    """A local function ``f(x) = fn(x|_window)``."""

    window: FiniteSubset
    fn: Callable[[tuple], float]

    @classmethod
    def indicator(cls, window: FiniteSubset, pattern: Sequence[int]) -> "Observable":
        pattern = tuple(int(a) for a in pattern)
        return cls(window, lambda p: 1 if tuple(p) == pattern else 0)

    def __call__(self, x: Configuration) -> float:
        return self.fn(x.restrict(self.window))


def empirical_average(x: Configuration, f: Observable, seq: FolnerSequence, n: int,
                      exact: bool = False):
    """``(1/|F_n|) sum_{g in F_n} f(g x)``; ``exact`` returns a ``Fraction``."""
    Fn = seq[n]
    if not len(Fn):
        raise DomainError("F_n is empty")
    G = seq.group
    total = 0
    for g in Fn:
        pts = [G.op(h, g) for h in f.window.elements]
        total += f.fn(tuple(x.values(pts).tolist()))
    return Fraction(total, len(Fn)) if exact else total / len(Fn)


@dataclass(frozen=True)
class GenericityReport:
    deviation: float
    worst_window: tuple
    worst_pattern: tuple
    observables: int


def generic_point_diagnostic(x: Configuration, mu: CylinderMeasure, window_cap: int,
                             seq: FolnerSequence, n: int) -> GenericityReport:
    """Max over cylinder indicators on windows inside ``F_cap`` of |empirical average - mass|."""
    cap = seq[window_cap]
    if not len(cap):
        raise DomainError("F_cap is empty")
    k = mu.alphabet_size
    if k ** len(cap) > 2 ** 22:
        raise DomainError(f"{k}^{len(cap)} full patterns on F_cap is too many")
    hist = _cap_histogram(x, cap, seq, n, k)
    total = hist.sum()
    cube = hist.reshape((k,) * len(cap)) / total
    elements = cap.elements
    best = (-1.0, (), ())
    count = 0
    for r in range(1, len(cap) + 1):
        for sub in itertools.combinations(range(len(cap)), r):
            drop = tuple(i for i in range(len(cap)) if i not in sub)
            emp = cube.sum(axis=drop) if drop else cube
            W = FiniteSubset(cap.group, [elements[i] for i in sub])
            pats = np.array(list(itertools.product(range(k), repeat=r)), dtype=np.int64)
            mass = mu.masses(W, pats)
            dev = np.abs(emp.reshape(-1) - mass)
            count += len(pats)
            j = int(np.argmax(dev))
            if dev[j] > best[0]:
                best = (float(dev[j]), tuple(elements[i] for i in sub), tuple(pats[j].tolist()))
    return GenericityReport(best[0], best[1], best[2], count)


def _cap_histogram(x, cap, seq, n, k):
    G = seq.group
    if seq.family == "box" and isinstance(G, IntegerLattice) and G.d == 1:
        offs = cap.array[:, 0]
        R = n + int(np.abs(offs).max())
        vals = x.line(-R, R) if isinstance(x, GridConfiguration) else \
            x.values([(i,) for i in range(-R, R + 1)])
        vals = np.asarray(vals, dtype=np.int64)
        off = offs - offs.min()
        first = R - n + int(offs.min())
        return _kernels.kernel("window_histogram")(vals, off, k, first, 2 * n + 1)
    hist = np.zeros(k ** len(cap), dtype=np.int64)
    for g in seq[n]:
        code = 0
        for a in x.values([G.op(h, g) for h in cap.elements]).tolist():
            code = code * k + a
        hist[code] += 1
    return hist


# -- variational principle at desk scale ----------------------------------------------------------


def support_check(tree: CylinderTree, mu: CylinderMeasure, tol: float = 1e-9) -> float:
    """Total mass of the deepest tree cylinders; raises naming an escaping cylinder if short of 1."""
    def level_mass(n):
        return math.fsum(mu.masses(tree.window(n), tree.patterns[n].astype(np.int64)))

    total = level_mass(tree.depth)
    if abs(total - 1) <= tol:
        return total
    n = next(n for n in range(tree.depth + 1) if abs(level_mass(n) - 1) > tol)
    raise DomainError(f"measure escapes the set: depth-{tree.depth} cylinders carry mass "
                      f"{total!r}; escaping cylinder {_escaping(tree, mu, n)}")


def _escaping(tree, mu, n):
    W = tree.window(n)
    have = {tuple(p) for p in tree.patterns[n].tolist()}
    if n == 0:
        cands = itertools.product(range(tree.alphabet_size), repeat=len(W))
    else:
        prev = tree.window(n - 1)
        new = (W - prev).elements
        pos = W.index_map()
        old_pos = [pos[g] for g in prev.elements]
        new_pos = [pos[g] for g in new]

        def gen():
            for parent in tree.patterns[n - 1].tolist():
                for ext in itertools.product(range(tree.alphabet_size), repeat=len(new)):
                    p = [0] * len(W)
                    for i, a in zip(old_pos, parent):
                        p[i] = a
                    for i, a in zip(new_pos, ext):
                        p[i] = a
                    yield tuple(p)
        cands = gen()
    for p in cands:
        if p not in have and mu.mass(W, p) > 0:
            return f"[{''.join(str(a) for a in p)}] on F_{n}"
    return "(not located)"


@dataclass(frozen=True)
class VariationalReport:
    packing: float
    local: tuple                 # per-candidate upper local entropy estimates
    best_local: float
    gap: float                   # packing - best_local
    lower_bound_holds: bool      # every candidate: local <= packing + tol
    tol: float
    candidates: tuple

    def to_json(self) -> dict:
        return {"schema": 1, "kind": "variational_gap", "packing": self.packing,
                "local": list(self.local), "best_local": self.best_local, "gap": self.gap,
                "lower_bound_holds": self.lower_bound_holds, "tol": self.tol,
                "candidates": list(self.candidates)}


def variational_gap(tree: CylinderTree, mu_candidates: Sequence[CylinderMeasure],
                    samples: Optional[Sequence[Sequence[Configuration]]] = None,
                    params=None, sample_size: int = 100, seed: int = 0,
                    tol: float = 1e-6, strict: bool = True) -> VariationalReport:
    """Packing estimate minus the best candidate's upper local entropy.

    Local entropies are read over ``[N_last, D]`` (tail fraction 1), the same
    stretch the packing exponent uses.  Without explicit ``samples`` each
    candidate is sampled on the deepest window; candidates that cannot be
    sampled fall back to the tree's leaf configurations.  With ``strict`` the
    direction ``local <= packing + tol`` is asserted.
    """
    from .errors import InvariantViolation
    from .estimators import EstimatorParams, packing_entropy_estimate
    params = params or EstimatorParams.default(tree.depth)
    D = min(params.depth, tree.depth)
    sched = tuple(n for n in params.N_schedule if n <= D) or (D,)
    packing = packing_entropy_estimate(tree, None, sched, D, decompositions=[],
                                       tol=params.tol).value
    locals_, names = [], []
    for c, mu in enumerate(mu_candidates):
        support_check(tree, mu)
        if samples is not None:
            pts = samples[c]
        else:
            pts = _candidate_sample(tree, mu, sample_size, seed + c, D)
        lo = max(sched[-1], 1 if tree.seq.size(0) == 0 else 0)
        summ = upper_local_entropy_over(mu, pts, 0, tree.seq, (lo, D), 1.0,
                                        {"seed": seed + c, "kind": mu.kind})
        locals_.append(summ.value)
        names.append(mu.to_json())
    best = max(locals_)
    ok = all(v <= packing + tol for v in locals_)
    rep = VariationalReport(packing, tuple(locals_), best, packing - best, ok, tol, tuple(names))
    if strict and not ok:
        raise InvariantViolation(f"local entropy {best!r} exceeds packing estimate {packing!r}")
    return rep


def _candidate_sample(tree, mu, count, seed, D):
    seq = tree.seq
    if seq.family == "box" and isinstance(seq.group, IntegerLattice) and seq.group.d == 1:
        try:
            return sample_points(mu, count, D, seed)
        except DomainError:
            pass
    rng = np.random.Generator(np.random.Philox(seed))
    leaves = tree.leaf_configurations()
    W = tree.window(tree.depth)
    m = mu.masses(W, tree.patterns[-1].astype(np.int64))
    idx = rng.choice(len(leaves), size=count, p=m / m.sum())
    return [leaves[i] for i in idx]
