import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from amenable_entropy.errors import DomainError, InvariantViolation
from amenable_entropy.estimators import (EstimatorParams, ball_levels, bowen_entropy_estimate,
                                         bowen_exponent, brute_force_objective, capacity_rate,
                                         dimension_correspondence, entropy_chain_check,
                                         enumerate_cuts, objective, packing_entropy_estimate,
                                         packing_exponent)
from amenable_entropy.group import centered_boxes, dihedral_balls, from_function, IntegerLattice
from amenable_entropy.shift import (DensitySet, PointSample, build_tree, density_counts, full_shift,
                                    line_configuration, random_tree, xab_predicate)

LOG2 = math.log(2)


@pytest.fixture
def full8(zbox):
    return build_tree(full_shift(2), 8, zbox)


def branch(zbox, depth=6):
    return build_tree(PointSample([line_configuration([0, 1] * 20, -20, 2)]), depth, zbox)


def test_full_shift_exponents(full8, backend):
    for N in range(0, 8):
        assert bowen_exponent(full8, N).exponent == pytest.approx(LOG2, abs=1e-5)
        assert packing_exponent(full8, N).exponent == pytest.approx(LOG2, abs=1e-5)


def test_single_branch_is_zero(zbox):
    t = branch(zbox)
    assert bowen_exponent(t, 1).exponent == 0.0
    assert packing_exponent(t, 1).exponent == 0.0
    assert bowen_entropy_estimate(t, None, (1, 2)).value == 0.0


def test_capacity_examples(zbox, full8):
    r = capacity_rate(full8)
    assert np.allclose(r.values, LOG2) and r.tail_limsup == pytest.approx(LOG2)
    H = DensitySet.geometric_blocks(zbox, 0.25, 0.75)
    t = build_tree(xab_predicate(H), 8, zbox)
    counts, sizes = density_counts(H, zbox, 8)
    cr = capacity_rate(t, n_range=(0, 8), tail_fraction=1.0)
    assert np.allclose(cr.values, counts / sizes * LOG2)
    pts = [line_configuration(v, -10, 2) for v in ([0] * 21, [1] * 21, [0, 1] * 10 + [0])]
    pr = capacity_rate(build_tree(PointSample(pts), 6, zbox))
    assert np.allclose(pr.values[-1], math.log(3) / 13)
    assert pr.to_csv().splitlines()[0] == "n,count,rate"


def test_capacity_range_checked(full8):
    with pytest.raises(DomainError):
        capacity_rate(full8, n_range=(0, 9))


@pytest.mark.parametrize("kind", ["bowen", "packing"])
def test_homogeneous_tree_closed_form(zbox, kind):
    """On a tree whose level sizes are c_n, with every level-n node having the same
    number of children, the exponent is the min (cover) or max (packing) of log c_m / |F_m|."""
    H = DensitySet.geometric_blocks(zbox, 0.25, 0.75)
    t = build_tree(xab_predicate(H), 10, zbox)
    c = t.level_sizes
    for N in (1, 3, 5):
        rates = [math.log(c[m]) / zbox.size(m) for m in range(N, 11)]
        want = min(rates) if kind == "bowen" else max(rates)
        fn = bowen_exponent if kind == "bowen" else packing_exponent
        assert fn(t, N, 10).exponent == pytest.approx(want, abs=2e-6)


@given(seed=st.integers(0, 2 ** 32 - 1), s=st.floats(0.0, 1.2), N=st.integers(0, 3),
       kind=st.sampled_from(["bowen", "packing"]))
@settings(max_examples=40, deadline=None)
def test_dp_matches_enumeration(seed, s, N, kind):
    seq = centered_boxes(1)
    t = random_tree(seq, 2, 3, 0.35, np.random.Generator(np.random.Philox(seed)), root_keep=0.9)
    dp = objective(t, s, N, 3, kind)
    assert dp == pytest.approx(brute_force_objective(t, s, N, 3, kind), rel=1e-12)


def test_backend_objectives_agree(rng, zbox):
    t = random_tree(zbox, 3, 4, 0.5, rng)
    for s in (0.0, 0.3, 0.9):
        for kind in ("bowen", "packing"):
            a = objective(t, s, 1, 4, kind, backend="numpy")
            b = objective(t, s, 1, 4, kind, backend="numba")
            assert a == pytest.approx(b, rel=1e-12)


def test_cut_enumeration_counts(zbox):
    t = build_tree(full_shift(2), 1, zbox)
    # each of 2 roots: either itself or its 4 children
    assert len(list(enumerate_cuts(t, 0, 1))) == 4


@given(seed=st.integers(0, 2 ** 32 - 1))
@settings(max_examples=20, deadline=None)
def test_exponents_monotone_in_N(seed):
    seq = centered_boxes(1)
    t = random_tree(seq, 2, 6, 0.6, np.random.Generator(np.random.Philox(seed)))
    b = [bowen_exponent(t, N, 6).exponent for N in range(0, 6)]
    p = [packing_exponent(t, N, 6).exponent for N in range(0, 6)]
    assert all(y >= x - 2e-6 for x, y in zip(b, b[1:]))
    assert all(y <= x + 2e-6 for x, y in zip(p, p[1:]))
    assert all(u <= v + 2e-6 for u, v in zip(b, p))


def test_report_bracket(full8):
    r = packing_exponent(full8, 2)
    assert r.bracket_width <= 1e-6 and r.monotone
    assert r.objective_lo > 1.0 >= r.objective_hi
    assert r.to_json()["kind"] == "packing"


def test_estimates_on_full_shift(full8):
    assert packing_entropy_estimate(full8, None, (1, 2, 3)).value == pytest.approx(LOG2, abs=1e-5)
    assert bowen_entropy_estimate(full8, None, (1, 2, 3)).value == pytest.approx(LOG2, abs=1e-5)


def test_union_with_branch_is_sup(zbox, full8):
    tree = full8.union(branch(zbox, 8))
    assert packing_entropy_estimate(tree, None, (1, 2, 3), decompositions=[]).value == pytest.approx(LOG2, abs=1e-5)


def test_user_decomposition(zbox, full8):
    groups = [[0], [1]]
    e = packing_entropy_estimate(full8, None, (1, 2), decompositions=[(0, groups)])
    assert e.refined is not None and e.decompositions[0][0] == "user@0"
    with pytest.raises(DomainError):
        packing_entropy_estimate(full8, None, (1,), decompositions=[(1, [[0]])])


def test_chain_on_full_shift(full8):
    rep = entropy_chain_check(full8, None, EstimatorParams(8, (1, 2, 3, 4)))
    assert rep.passed
    assert all(abs(v - LOG2) < 1e-5 for v in rep.triple)
    assert rep.to_json()["passed"]


def test_chain_on_xab_has_gap(zbox):
    H = DensitySet.geometric_blocks(zbox, 0.25, 0.75)
    t = build_tree(xab_predicate(H), 12, zbox)
    rep = entropy_chain_check(t, None, EstimatorParams(12, (1, 2, 3)))
    assert rep.packing - rep.bowen > 0.2
    assert rep.bowen <= rep.packing <= rep.capacity + 2 * rep.tol


def test_chain_strict_raises_on_violation(zbox):
    # a single deep burst of branching after a long thin stretch gives packing > capacity at
    # finite depth; strict mode must surface it
    for seed in range(200):
        t = random_tree(zbox, 2, 6, 0.55, np.random.Generator(np.random.Philox(seed)))
        rep = entropy_chain_check(t, None, EstimatorParams(6, (1, 2, 3)), strict=False)
        if not rep.passed:
            with pytest.raises(InvariantViolation):
                entropy_chain_check(t, None, EstimatorParams(6, (1, 2, 3)))
            assert rep.within_level_slack
            return
    pytest.skip("no finite-scale violation among the sampled trees")


def test_params_roundtrip():
    p = EstimatorParams(10, (1, 3, 5), inflation=1, tail_fraction=0.5)
    assert EstimatorParams.from_json(p.to_json()) == p
    assert EstimatorParams.default(9).N_schedule == (1, 2, 3, 4, 5)
    with pytest.raises(DomainError):
        EstimatorParams(4, (2, 1))
    with pytest.raises(DomainError):
        EstimatorParams(4, (1, 5))


def test_inflated_levels_shift_for_boxes(full8):
    bl = ball_levels(full8, 2)
    assert bl.depth == 6
    assert packing_exponent(full8, 1, inflation=2).exponent > LOG2          # 2^{|F_{n+2}|} balls of weight |F_n|
    assert packing_exponent(full8, 1, inflation=2).exponent <= math.log(2) * 7 / 3 + 1e-5


def test_generic_inflation_matches_box_shortcut(zbox, rng):
    from amenable_entropy.estimators import _generic_ball_levels
    t = random_tree(zbox, 2, 5, 0.6, rng)
    for k in (1, 2):
        slow, fast = _generic_ball_levels(t, k), ball_levels(t, k)
        assert list(slow.counts()) == list(fast.counts())
        for s in (0.2, 0.7):
            for kind in ("bowen", "packing"):
                assert objective(slow, s, 1, slow.depth, kind) == pytest.approx(
                    objective(fast, s, 1, fast.depth, kind), rel=1e-12)


def test_dimension_identity():
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        assert dimension_correspondence(LOG2, "packing", dihedral_balls()).value == LOG2
    assert dimension_correspondence(LOG2, "packing", centered_boxes(1)).value == LOG2
    assert dimension_correspondence(0.0, "hausdorff", centered_boxes(1)).value == 0.0
    with pytest.warns(UserWarning):
        dimension_correspondence(LOG2, "hausdorff")
    with pytest.raises(DomainError):
        dimension_correspondence(LOG2, "box")


def test_dihedral_full_shift():
    seq = dihedral_balls()
    t = build_tree(full_shift(2), 3, seq)
    assert bowen_exponent(t, 1).exponent == pytest.approx(LOG2, abs=1e-5)
    assert packing_exponent(t, 1).exponent == pytest.approx(LOG2, abs=1e-5)
