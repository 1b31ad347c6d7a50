"""Compiled kernels against their pure-numpy twins."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from gridshed import kernels
from gridshed._accel import HAVE_NUMBA

pytestmark = pytest.mark.skipif(not HAVE_NUMBA, reason="numba not installed")

finite = st.floats(-50, 50, allow_nan=False, allow_infinity=False)


def _matrix(rows, cols):
    return arrays(np.float64, st.tuples(rows, cols), elements=finite)


@settings(max_examples=60, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 8), st.integers(1, 7)), elements=st.floats(0, 100)),
       st.floats(0, 500))
def test_project_simplex_rows(values, total):
    totals = np.full(values.shape[0], total)
    a = kernels.project_simplex_rows_nb(values, totals)
    b = kernels.project_simplex_rows_np(values, totals)
    assert np.allclose(a, b, atol=1e-9)


@settings(max_examples=60, deadline=None)
@given(arrays(np.float64, st.integers(5, 60), elements=finite),
       arrays(np.float64, st.integers(0, 3), elements=st.floats(-0.9, 0.9)),
       arrays(np.float64, st.integers(0, 3), elements=st.floats(-0.9, 0.9)))
def test_css_residuals(w, ar, ma):
    start = len(ar)
    a = kernels.css_residuals_nb(w, ar, ma, start)
    b = kernels.css_residuals_np(w, ar, ma, start)
    assert np.allclose(a, b, rtol=1e-9, atol=1e-9)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 5).flatmap(lambda d: st.tuples(_matrix(st.integers(1, 20), st.just(d)),
                                                     _matrix(st.integers(1, 6), st.just(d)))))
def test_distances_and_assignment(xc):
    x, c = xc
    assert np.allclose(kernels.sq_distances_nb(x, c), kernels.sq_distances_np(x, c), rtol=1e-12, atol=1e-9)
    la, da = kernels.assign_nearest_nb(x, c)
    lb, db = kernels.assign_nearest_np(x, c)
    assert np.allclose(da, db, atol=1e-9)
    # ties may only differ when the distances agree
    assert np.all((la == lb) | np.isclose(da, db))


def test_assign_nearest_ties_lowest_index():
    x = np.array([[0.0, 0.0]])
    c = np.array([[1.0, 0.0], [-1.0, 0.0]])
    assert kernels.assign_nearest_nb(x, c)[0][0] == 0
    assert kernels.assign_nearest_np(x, c)[0][0] == 0


def test_minibatch_step(rng):
    batch = rng.normal(size=(16, 3))
    c0 = rng.normal(size=(4, 3))
    ca, cb = c0.copy(), c0.copy()
    na, nb = np.ones(4), np.ones(4)
    la = kernels.minibatch_step_nb(batch, ca, na)
    lb = kernels.minibatch_step_np(batch, cb, nb)
    assert np.array_equal(la, lb)
    assert np.allclose(ca, cb, atol=1e-12)
    assert np.array_equal(na, nb)


def test_ward_merges(rng):
    x = rng.normal(size=(25, 3))
    d2 = kernels.sq_distances_np(x, x)
    ma, ha = kernels.ward_merges_nb(d2)
    mb, hb = kernels.ward_merges_np(d2)
    assert np.array_equal(ma, mb)
    assert np.allclose(ha, hb, rtol=1e-10)


@settings(max_examples=30, deadline=None)
@given(_matrix(st.integers(1, 7), st.integers(1, 7)))
def test_jacobi_eigh(m):
    a = m @ m.T
    wa, va, _ = kernels.jacobi_eigh_nb(np.ascontiguousarray(a), 1e-15, 100)
    wb, vb, _ = kernels.jacobi_eigh_np(np.ascontiguousarray(a), 1e-15, 100)
    scale = max(1.0, np.abs(a).max())
    assert np.allclose(np.sort(wa), np.sort(wb), atol=1e-9 * scale)
    for w, v in ((wa, va), (wb, vb)):
        assert np.allclose(a @ v, v * w, atol=1e-8 * scale)
