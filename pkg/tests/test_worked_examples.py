import itertools
import math
from unittest import mock

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from amenable_entropy import _kernels
from amenable_entropy.errors import DomainError, InvariantViolation, ResourceError
from amenable_entropy.estimators import EstimatorParams
from amenable_entropy.shift import DensitySet, build_tree, full_shift, random_tree
from amenable_entropy.worked_examples import (BlockCode, block_walk_limits, cocycle_defect,
                                              factor_inequality_check, geometric_block_walk,
                                              image_tree, srw_range_statistics, tt_fiber_ball_check,
                                              tt_fiber_entropies, tt_walk, xab_oracle)

LOG2 = math.log(2)
steps = st.lists(st.sampled_from([-1, 1]), min_size=1, max_size=200)


def test_all_ones_walk():
    r = tt_walk([1] * 10)
    n = np.arange(11)
    assert np.array_equal(r.omega, n) and np.array_equal(r.M, n)
    assert np.all(r.m == 0) and np.array_equal(r.R, n)


def test_walk_rejects_other_symbols():
    with pytest.raises(DomainError):
        tt_walk([1, 0, -1])
    with pytest.raises(DomainError):
        tt_walk([1, 1], 3)


@pytest.mark.parametrize("flavour", ["NUMPY", "NUMBA"])
@given(y=steps, data=st.data())
@settings(max_examples=60, deadline=None)
def test_cocycle_identity(flavour, y, data):
    with mock.patch.object(_kernels, "_ACTIVE", getattr(_kernels, flavour)):
        a = data.draw(st.integers(0, len(y)))
        b = data.draw(st.integers(0, len(y) - a))
        assert cocycle_defect(y, a, b) == 0
        tt_walk(y).verify()


def test_walk_csv():
    lines = tt_walk([1, -1, -1]).to_csv().splitlines()
    assert lines[0] == "n,omega,M,m,R_over_n"
    assert lines[3].startswith("3,-1,1,-1,")


def test_fiber_entropy_examples():
    ones = tt_fiber_entropies([1] * 500)
    assert ones.packing == ones.bowen == LOG2 and ones.regular
    alt = tt_fiber_entropies([-1, 1] * 50, 100)
    assert alt.packing <= LOG2 / 50
    with pytest.raises(DomainError):
        tt_fiber_entropies([1] * 50)


def test_block_walk_is_not_regular():
    L = 4 ** 7 - 1
    f = tt_fiber_entropies(geometric_block_walk(L), L, tail_fraction=0.75)
    up, low = block_walk_limits()
    assert (up, low) == (pytest.approx(2 / 3), pytest.approx(1 / 3))
    assert not f.regular
    assert abs(f.gap - (up - low) * LOG2) < 0.05
    assert f.gap > 5 * f.tol


def test_block_walk_peaks():
    y = geometric_block_walk(4 ** 6)
    R = tt_walk(y).R
    for k in range(1, 5):
        peak = 2 * 4 ** k - 1
        end = 4 ** (k + 1) - 1
        assert R[peak] == (4 ** (k + 1) - 1) // 3 == R[end]


def test_ball_check_examples():
    r = tt_fiber_ball_check([1] * 40, [1] * 10, 4, 0.5)
    assert r.equal and r.window == (-3, 6) and r.interval == (0, 3)
    assert r.ball_size == 2 ** 10 // 2 ** 6      # cylinder on [-1, 4]
    r1 = tt_fiber_ball_check([1, -1] * 20, [-1] * 5, 1, 0.25)
    assert r1.equal and r1.interval == (0, 0)


def test_ball_check_limits():
    with pytest.raises(ResourceError):
        tt_fiber_ball_check([1] * 80, [1] * 20, 13, 0.5)
    with pytest.raises(DomainError):
        tt_fiber_ball_check([1] * 6, [1] * 10, 4, 0.5)


@given(seed=st.integers(0, 2 ** 32 - 1), n=st.integers(1, 8), eps=st.sampled_from([0.5, 0.25]))
@settings(max_examples=30, deadline=None)
def test_ball_check_random(seed, n, eps):
    g = np.random.Generator(np.random.Philox(seed))
    x = 2 * g.integers(0, 2, 60) - 1
    y = 2 * g.integers(0, 2, 12) - 1
    assert tt_fiber_ball_check(x, y, n, eps).equal


def test_range_statistics(backend):
    st_ = srw_range_statistics(50, 2000, seed=3)
    assert 0 < st_.mean < 0.1 and st_.trials == 50
    again = srw_range_statistics(50, 2000, seed=3)
    assert np.array_equal(st_.ratios, again.ratios)
    fixed = srw_range_statistics(3, 100, y=[1] * 100)
    assert np.all(fixed.ratios == 1.0)
    assert st_.to_csv().splitlines()[0] == "trial,R_over_L"
    assert set(st_.quantiles()) == {"q05", "q25", "q50", "q75", "q95"}


def test_xab_oracle_full_shift(zbox):
    rep = xab_oracle(DensitySet.everything(), 8)
    assert rep.counts_exact and rep.bowen_ok and rep.packing_ok
    assert abs(rep.bowen - LOG2) < 1e-5 and abs(rep.packing - LOG2) < 1e-5
    assert abs(rep.variational.gap) < 0.05


def test_xab_oracle_gap(zbox):
    H = DensitySet.geometric_blocks(zbox, 0.25, 0.75)
    rep = xab_oracle(H, 12, EstimatorParams(12, (1, 2, 3)))
    assert rep.counts_exact and rep.bowen_ok and rep.packing_ok
    assert rep.gap > 0.2
    assert rep.to_json()["schema"] == 1


def test_xab_requires_boxes():
    from amenable_entropy.group import dihedral_balls
    with pytest.raises(DomainError):
        xab_oracle(DensitySet.everything(), 3, seq=dihedral_balls())


def test_mod2_factor(zbox):
    T = build_tree(full_shift(4), 4, zbox)
    rep = factor_inequality_check(BlockCode.symbol_map([0, 1, 0, 1]), T)
    assert rep.image == pytest.approx(LOG2, abs=1e-4)
    assert rep.source == pytest.approx(2 * LOG2, abs=1e-4)
    assert rep.fiber == pytest.approx(LOG2, abs=1e-4)
    assert abs(rep.right_slack) < 1e-4


def test_injective_code_has_zero_fiber(zbox):
    T = build_tree(full_shift(2), 4, zbox)
    rep = factor_inequality_check(BlockCode.symbol_map([0, 2], 3), T)
    assert rep.fiber == 0.0 and rep.left_ok and rep.right_ok


def test_radius_one_image_tree(zbox):
    T = build_tree(full_shift(2), 4, zbox)
    xor = BlockCode.from_table(1, {w: (w[0] + w[2]) % 2 for w in itertools.product(range(2), repeat=3)}, 2, 2)
    img = image_tree(xor, T)
    assert img.depth == 3
    assert list(img.level_sizes) == [2 ** (2 * n + 1) for n in range(4)]
    rep = factor_inequality_check(xor, T)
    assert rep.left_ok and rep.right_ok


def test_position_dependent_code_rejected(zbox):
    T = build_tree(full_shift(2), 3, zbox)
    bad = BlockCode(0, lambda w, i: w[0] if i % 2 else 1 - w[0], 2, 2, "parity-flip")
    with pytest.raises(DomainError, match="commute"):
        factor_inequality_check(bad, T)


def test_alphabet_mismatch(zbox):
    T = build_tree(full_shift(3), 3, zbox)
    with pytest.raises(DomainError):
        factor_inequality_check(BlockCode.identity(2), T)
