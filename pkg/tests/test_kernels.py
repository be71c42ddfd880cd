import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from amenable_entropy import _kernels
from amenable_entropy.estimators import ball_levels
from amenable_entropy.shift import random_tree
from amenable_entropy.group import centered_boxes


def _levels(seed, k=2, depth=4, keep=0.6):
    rng = np.random.Generator(np.random.Philox(seed))
    tree = random_tree(centered_boxes(1), k, depth, keep, rng)
    lv = ball_levels(tree, 0)
    return lv


@given(seed=st.integers(0, 10_000), s=st.floats(0.0, 1.5), maximize=st.booleans(),
       n_min=st.integers(0, 3))
@settings(max_examples=60, deadline=None)
def test_tree_objective_flavours_agree(seed, s, maximize, n_min):
    lv = _levels(seed)
    D = len(lv.offsets) - 2
    allowed = np.array([1 if n >= n_min or n == D else 0 for n in range(D + 1)], dtype=np.int64)
    args = (lv.parent, lv.offsets, lv.weights, s, n_min, allowed, maximize)
    a = _kernels.NUMPY["tree_objective"](*args)
    b = _kernels.NUMBA["tree_objective"](*args)
    assert math.isclose(a, b, rel_tol=1e-12, abs_tol=1e-300)


@given(steps=st.lists(st.sampled_from([-1, 1]), min_size=0, max_size=300))
@settings(max_examples=60, deadline=None)
def test_walk_envelopes_flavours_agree(steps):
    y = np.array(steps, dtype=np.int64)
    for u, v in zip(_kernels.NUMPY["walk_envelopes"](y), _kernels.NUMBA["walk_envelopes"](y)):
        assert np.array_equal(u, v)


def test_range_at_flavours_agree(rng):
    steps = 2 * rng.integers(0, 2, size=(30, 500)) - 1
    a = _kernels.NUMPY["range_at"](steps)
    b = _kernels.NUMBA["range_at"](steps)
    assert np.array_equal(a, b)
    om = np.cumsum(steps, axis=1)
    brute = np.maximum(om.max(axis=1), 0) - np.minimum(om.min(axis=1), 0)
    assert np.array_equal(a, brute)


def test_window_histogram_flavours_agree(rng):
    values = rng.integers(0, 3, size=200)
    offsets = np.array([-1, 0, 2])
    a = _kernels.NUMPY["window_histogram"](values, offsets, 3, 5, 150)
    b = _kernels.NUMBA["window_histogram"](values, offsets, 3, 5, 150)
    assert np.array_equal(a, b)
    assert a.sum() == 150


def test_backend_flag_is_recorded():
    assert _kernels.BACKEND in ("numba", "numpy")
    assert _kernels.kernel("range_at") is _kernels._ACTIVE["range_at"]


def test_backend_env_var_selects_numpy(tmp_path):
    import subprocess
    import sys
    code = "import amenable_entropy._kernels as k; print(k.BACKEND)"
    env = {"AMENABLE_ENTROPY_BACKEND": "numpy", "PATH": ""}
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True)
    assert out.stdout.strip() == "numpy"
    env["AMENABLE_ENTROPY_BACKEND"] = "fortran"
    bad = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True)
    assert bad.returncode != 0
    assert "AMENABLE_ENTROPY_BACKEND" in bad.stderr
