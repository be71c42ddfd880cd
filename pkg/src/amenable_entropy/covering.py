"""Separated and spanning sets, and greedy selection procedures for covering lemmas.

Every certificate in a ``CoverSelection`` is recomputed from the selected sets;
nothing is taken on trust from the selection loop.
"""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import DomainError, InvariantViolation, ResourceError
from .group import FiniteSubset
from .shift import bowen_distance

EXACT_SEPARATED_LIMIT = 64
EXACT_SPANNING_LIMIT = 24


def distance_matrix(rows: Sequence, cols: Sequence, F: Optional[FiniteSubset] = None,
                    metric: Optional[Callable] = None) -> np.ndarray:
    """``d_F(rows[i], cols[j])``, or ``metric(rows[i], cols[j])`` when ``F`` is None."""
    if metric is None:
        raise DomainError("a base metric is required to compute distances")
    same = rows is cols
    out = np.zeros((len(rows), len(cols)))
    for i, x in enumerate(rows):
        for j, y in enumerate(cols):
            if same and j < i:
                out[i, j] = out[j, i]
                continue
            if same and i == j:
                continue
            out[i, j] = bowen_distance(x, y, F, metric) if F is not None else metric(x, y)
    return out


def _resolve(points, other, F, metric, distances):
    if distances is not None:
        d = np.asarray(distances, dtype=float)
        if d.shape != (len(points), len(other)):
            raise DomainError(f"distance matrix has shape {d.shape}, expected "
                              f"{(len(points), len(other))}")
        return d
    return distance_matrix(points, other, F, metric)


@dataclass(frozen=True)
class PointSetResult:
    count: int
    witness: tuple
    mode: str

    def to_json(self) -> dict:
        return {"count": self.count, "witness": list(self.witness), "mode": self.mode}


# -- maximum separated sets ------------------------------------------------------------


def _popcount(x: int) -> int:
    return bin(x).count("1")


def _max_independent(adj: list, n: int) -> int:
    """Maximum independent set of a graph on ``n <= 64`` vertices as a bitmask."""
    best = [0, 0]  # size, mask

    def greedy_bound(P: int) -> int:
        # greedy clique cover of P; an independent set takes at most one vertex per clique
        classes = 0
        while P:
            v = (P & -P).bit_length() - 1
            clique = 1 << v
            cand = P & adj[v]
            while cand:
                u = (cand & -cand).bit_length() - 1
                clique |= 1 << u
                cand &= adj[u]
            P &= ~clique
            classes += 1
        return classes

    def rec(P: int, size: int, chosen: int):
        while P:
            # vertices with no neighbour in P are always taken
            free = 0
            Q = P
            while Q:
                v = (Q & -Q).bit_length() - 1
                Q &= Q - 1
                if not (adj[v] & P):
                    free |= 1 << v
            if free:
                P &= ~free
                chosen |= free
                size += _popcount(free)
                continue
            break
        if not P:
            if size > best[0]:
                best[0], best[1] = size, chosen
            return
        if size + greedy_bound(P) <= best[0]:
            return
        # branch on the highest-degree vertex
        v, deg = -1, -1
        Q = P
        while Q:
            u = (Q & -Q).bit_length() - 1
            Q &= Q - 1
            d = _popcount(adj[u] & P)
            if d > deg:
                v, deg = u, d
        bit = 1 << v
        rec(P & ~bit & ~adj[v], size + 1, chosen | bit)
        rec(P & ~bit, size, chosen)

    rec((1 << n) - 1, 0, 0)
    return best[1]


def max_separated(points: Sequence, F: Optional[FiniteSubset], eps: float, mode: str = "exact",
                  metric: Optional[Callable] = None,
                  distances: Optional[np.ndarray] = None) -> PointSetResult:
    """Largest subset with pairwise ``d_F > eps`` (exact) or a maximal one in input order (greedy)."""
    n = len(points) if distances is None else len(distances)
    if n == 0:
        return PointSetResult(0, (), mode)
    if mode not in ("exact", "greedy"):
        raise DomainError(f"mode must be 'exact' or 'greedy', got {mode!r}")
    if mode == "exact" and n > EXACT_SEPARATED_LIMIT:
        raise ResourceError(f"exact mode handles at most {EXACT_SEPARATED_LIMIT} points, got {n}; "
                            "use mode='greedy'")
    pts = points if distances is None else range(n)
    d = _resolve(pts, pts, F, metric, distances)
    conflict = d <= eps
    np.fill_diagonal(conflict, False)
    if mode == "greedy":
        chosen = []
        for i in range(n):
            if not any(conflict[i, j] for j in chosen):
                chosen.append(i)
        return PointSetResult(len(chosen), tuple(chosen), mode)
    adj = [sum(1 << j for j in np.flatnonzero(conflict[i]).tolist()) for i in range(n)]
    mask = _max_independent(adj, n)
    chosen = tuple(i for i in range(n) if mask >> i & 1)
    return PointSetResult(len(chosen), chosen, mode)


# -- minimum spanning sets ---------------------------------------------------------------


def min_spanning(points: Sequence, target: Optional[Sequence], F: Optional[FiniteSubset],
                 eps: float, mode: str = "exact", metric: Optional[Callable] = None,
                 distances: Optional[np.ndarray] = None) -> PointSetResult:
    """Fewest candidates ``E`` with every target within ``eps`` (``d_F <= eps``) of ``E``.

    ``distances`` is the (target x candidate) matrix; ``target=None`` means the
    candidates themselves.
    """
    if mode not in ("exact", "greedy"):
        raise DomainError(f"mode must be 'exact' or 'greedy', got {mode!r}")
    if distances is not None:
        d = np.asarray(distances, dtype=float)
    else:
        tgt = points if target is None else target
        d = distance_matrix(tgt, points, F, metric) if tgt is not points else \
            distance_matrix(points, points, F, metric)
    n_t, n_c = d.shape
    if n_t == 0:
        return PointSetResult(0, (), mode)
    if mode == "exact" and n_c > EXACT_SPANNING_LIMIT:
        raise ResourceError(f"exact mode handles at most {EXACT_SPANNING_LIMIT} candidates, "
                            f"got {n_c}; use mode='greedy'")
    cover = d <= eps
    uncovered = np.flatnonzero(~cover.any(axis=1))
    if len(uncovered):
        raise DomainError(f"targets {uncovered.tolist()} are farther than {eps} from every candidate")
    sets = [sum(1 << t for t in np.flatnonzero(cover[:, c]).tolist()) for c in range(n_c)]
    full = (1 << n_t) - 1
    if mode == "greedy":
        chosen, got = [], 0
        while got != full:
            gains = [_popcount(s & ~got) for s in sets]
            c = int(np.argmax(gains))
            chosen.append(c)
            got |= sets[c]
        return PointSetResult(len(chosen), tuple(sorted(chosen)), mode)
    by_target = [[c for c in range(n_c) if sets[c] >> t & 1] for t in range(n_t)]
    widest = max(_popcount(s) for s in sets)
    greedy = min_spanning(None, None, None, eps, "greedy", distances=d)
    best = [greedy.count, list(greedy.witness)]

    def rec(got: int, chosen: list):
        if got == full:
            if len(chosen) < best[0]:
                best[0], best[1] = len(chosen), list(chosen)
            return
        left = n_t - _popcount(got)
        if len(chosen) + math.ceil(left / widest) >= best[0]:
            return
        rest = full & ~got
        t = min((t for t in range(n_t) if rest >> t & 1), key=lambda t: len(by_target[t]))
        for c in sorted(by_target[t], key=lambda c: -_popcount(sets[c] & rest)):
            chosen.append(c)
            rec(got | sets[c], chosen)
            chosen.pop()

    rec(0, [])
    return PointSetResult(best[0], tuple(sorted(best[1])), mode)


# -- selections ------------------------------------------------------------------------------


@dataclass(frozen=True)
class CoverSelection:
    """Indices picked by a selection procedure plus recomputed certificates."""

    selected: tuple
    disjoint: bool
    coverage: Optional[float] = None
    certificate: dict = field(default_factory=dict)
    warnings: tuple = ()

    def to_json(self) -> dict:
        d = asdict(self)
        d["selected"] = list(self.selected)
        d["warnings"] = list(self.warnings)
        d["schema"] = 1
        return d

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)


@dataclass(frozen=True)
class BallFamily:
    """Balls ``B(c_i, r_i)`` in a finite universe of points under ``metric``.

    A ball is materialized as the set of universe indices within ``r_i`` of its
    centre (``<=`` when ``closed``), which is what disjointness and coverage
    are checked on.
    """

    centers: tuple
    radii: tuple
    metric: Callable
    universe: tuple
    closed: bool = True

    def __post_init__(self):
        object.__setattr__(self, "centers", tuple(self.centers))
        object.__setattr__(self, "radii", tuple(float(r) for r in self.radii))
        object.__setattr__(self, "universe", tuple(self.universe))
        if len(self.centers) != len(self.radii):
            raise DomainError("centers and radii differ in length")
        if any(r <= 0 for r in self.radii):
            raise DomainError("ball radii must be positive")

    @classmethod
    def on_grid(cls, centers, radii, lo: int, hi: int, closed: bool = True) -> "BallFamily":
        """Integer-grid surrogate of the real line: universe ``lo..hi``."""
        return cls(tuple(centers), tuple(radii), lambda a, b: abs(a - b),
                   tuple(range(lo, hi + 1)), closed)

    def __len__(self):
        return len(self.centers)

    def _dists(self) -> np.ndarray:
        return np.array([[self.metric(c, u) for u in self.universe] for c in self.centers],
                        dtype=float).reshape(len(self.centers), len(self.universe))

    def members(self, scale: float = 1.0) -> list:
        d = self._dists()
        r = np.asarray(self.radii)[:, None] * scale
        inside = d <= r if self.closed else d < r
        return [frozenset(np.flatnonzero(row).tolist()) for row in inside]


def _pairwise_disjoint(sets: Sequence[frozenset]) -> bool:
    seen = set()
    for s in sets:
        if seen & s:
            return False
        seen |= s
    return True


def five_r_select(balls: BallFamily, factor: float = 5.0) -> CoverSelection:
    """Greedy disjoint subfamily, largest radius first, whose ``factor``-enlargements cover all balls."""
    if not len(balls):
        return CoverSelection((), True, 1.0, {"enlargement": factor})
    sets = balls.members()
    order = sorted(range(len(balls)), key=lambda i: (-balls.radii[i], i))
    chosen, used = [], set()
    for i in order:
        if not (sets[i] & used):
            chosen.append(i)
            used |= sets[i]
    chosen.sort()
    big = balls.members(factor)
    union_all = frozenset().union(*sets)
    union_big = frozenset().union(*(big[i] for i in chosen))
    disjoint = _pairwise_disjoint([sets[i] for i in chosen])
    coverage = len(union_all & union_big) / len(union_all) if union_all else 1.0
    cert = {"enlargement": factor, "union_size": len(union_all),
            "covered_by_enlargement": len(union_all & union_big)}
    return CoverSelection(tuple(chosen), disjoint, coverage, cert)


def _disjoint_cores(sets: Sequence[frozenset], chosen: Sequence[int]) -> list:
    """Cores in selection order: each set minus everything selected before it."""
    cores, used = [], set()
    for i in chosen:
        cores.append(sets[i] - used)
        used |= sets[i]
    return cores


def _certify(sets, chosen, cores, delta) -> dict:
    ratios = [len(c) / len(sets[i]) if sets[i] else 1.0 for i, c in zip(chosen, cores)]
    return {
        "delta": delta,
        "cores_disjoint": _pairwise_disjoint(cores),
        "cores_inside": all(c <= sets[i] for i, c in zip(chosen, cores)),
        "min_core_ratio": min(ratios, default=1.0),
        "holds": _pairwise_disjoint(cores) and all(r >= 1 - delta - 1e-12 for r in ratios),
    }


def delta_disjointify(sets: Sequence[FiniteSubset], delta: float) -> CoverSelection:
    """Greedy ``delta``-disjoint subfamily, largest set first.

    A set is kept when at most ``delta`` of it is already covered; its core is
    the uncovered part.  ``certificate["cores"]`` lists the cores' elements.
    """
    if not 0 < delta < 1:
        raise DomainError(f"delta must lie in (0, 1), got {delta}")
    fs = [s.frozen for s in sets]
    order = sorted(range(len(fs)), key=lambda i: (-len(fs[i]), i))
    chosen, used = [], set()
    for i in order:
        if len(fs[i] & used) <= delta * len(fs[i]):
            chosen.append(i)
            used |= fs[i]
    cores = _disjoint_cores(fs, chosen)
    cert = _certify(fs, chosen, cores, delta)
    cert["cores"] = {str(i): sorted(c) for i, c in zip(chosen, cores)}
    return CoverSelection(tuple(chosen), cert["cores_disjoint"], None, cert)


def _as_rows(array) -> list:
    if isinstance(array, dict):
        rows = {}
        for (i, j), v in array.items():
            rows.setdefault(i, {})[j] = v
        return [[rows[i][j] for j in sorted(rows[i])] for i in sorted(rows)]
    return [list(r) for r in array]


def requirement_constants(F_rows: list, D: FiniteSubset) -> tuple:
    """Witnessed constants: the prefix-bound ``C`` and the scale-separation ratio.

    The covering lemma needs the first at most ``C`` and the second at most ``1 + delta``.
    """
    G = D.group
    c_witness = 0.0
    for row in F_rows:
        for k in range(1, len(row)):
            prefix = set()
            for kp in range(k):
                prefix |= G.product(G.inverse_set(row[kp]), row[k]).frozen
            c_witness = max(c_witness, len(prefix) / len(row[k]))
    scale = 0.0
    unions = [FiniteSubset(G, set().union(*(s.frozen for s in row))) for row in F_rows]
    for i in range(1, len(F_rows)):
        pre: set = set()
        for ip in range(i):
            pre |= G.product(D, G.inverse_set(unions[ip])).frozen
        P = FiniteSubset(G, pre)
        for Fk in F_rows[i]:
            scale = max(scale, len(G.product(P, Fk)) / len(Fk))
    return c_witness, scale


def lindenstrauss_cover(F_array, A_array, F: FiniteSubset, delta: float,
                        C: Optional[float] = None, D: Optional[FiniteSubset] = None) -> CoverSelection:
    """Greedy ``10 delta^(1/4)``-disjoint subfamily of the translates ``F_{i,j} a``.

    Translates are tried from the last row (largest scale) down, larger sets
    first, and kept when at most ``10 delta^(1/4)`` of them is already covered.
    The two hypotheses of the covering lemma are evaluated: the prefix bound
    with constant ``C`` (when ``C`` is None the witnessed constant is reported
    and counted as satisfied) and the scale-separation bound with ``1 + delta``.
    If both hold and the coverage is below ``alpha - delta^(1/4)`` an
    ``InvariantViolation`` is raised; if a hypothesis fails a warning is issued.
    Selected indices are ``(i, j, a_index)`` triples flattened in ``certificate``.
    """
    if not 0 < delta < 0.01:
        raise DomainError(f"delta must lie in (0, 1/100), got {delta}")
    G = F.group
    D = D if D is not None else FiniteSubset(G, [G.identity])
    F_rows, A_rows = _as_rows(F_array), _as_rows(A_array)
    if [len(r) for r in F_rows] != [len(r) for r in A_rows]:
        raise DomainError("F and A arrays differ in shape")
    Fset = F.frozen
    tiles, sets = [], []
    for i, (frow, arow) in enumerate(zip(F_rows, A_rows)):
        for j, (Fij, Aij) in enumerate(zip(frow, arow)):
            for t, a in enumerate(Aij.elements):
                T = G.right_translate(Fij, a).frozen
                if not T <= Fset:
                    raise DomainError(f"F[{i}][{j}] · {a} is not inside F")
                tiles.append((i, j, t))
                sets.append(T)
    thr = 10 * delta ** 0.25
    order = sorted(range(len(sets)), key=lambda q: (-tiles[q][0], -len(sets[q]), q))
    chosen, used = [], set()
    for q in order:
        if len(sets[q] & used) <= thr * len(sets[q]):
            chosen.append(q)
            used |= sets[q]
    cores = _disjoint_cores(sets, chosen)
    cert = _certify(sets, chosen, cores, thr)
    coverage = len(used) / len(Fset)
    alpha = min(len(G.product(D, FiniteSubset(G, set().union(*(a.frozen for a in row)))))
                for row in A_rows) / len(Fset)
    bound = alpha - delta ** 0.25
    c_witness, scale = requirement_constants(F_rows, D)
    req1 = True if C is None else c_witness <= C
    req2 = scale <= 1 + delta
    cert.update({"alpha": alpha, "coverage_bound": bound, "bound_met": coverage >= bound - 1e-12,
                 "requirement_1": req1, "requirement_2": req2, "prefix_constant": c_witness,
                 "scale_ratio": scale, "C": C, "tiles": [list(tiles[q]) for q in chosen]})
    notes = []
    if not (req1 and req2):
        msg = (f"covering-lemma hypotheses fail (requirement 1: {req1}, requirement 2: {req2}); "
               "the coverage bound is not guaranteed")
        warnings.warn(msg, stacklevel=2)
        notes.append(msg)
    elif not cert["bound_met"]:
        raise InvariantViolation(f"coverage {coverage:.6f} below alpha - delta^(1/4) = {bound:.6f} "
                                 "with both hypotheses satisfied")
    return CoverSelection(tuple(chosen), cert["cores_disjoint"], coverage, cert, tuple(notes))
