"""The numba kernels and their numpy twins must agree bit for bit."""

import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ultraspec._kernels import (
    SCAN_LIMIT,
    SCAN_OK,
    SCAN_TABLE_END,
    assoc_concave,
    assoc_scan,
    legendre_m,
)
from ultraspec.weights import make_weights

BACKENDS = ("numba", "numpy")


def _same(a, b):
    # byte comparison also distinguishes -0.0 from +0.0
    return all(p.dtype == q.dtype and p.tobytes() == q.tobytes() for p, q in zip(a, b))


@given(
    st.floats(1.0, 4.0),
    st.integers(1, 3),
    st.lists(st.floats(-5.0, 9.0), min_size=1, max_size=40),
)
def test_scan_backends_identical(s, nu, logr):
    w = make_weights("gevrey", nu, s=s)
    w.ensure(1 << 14)
    lr = np.asarray(logr)
    a = assoc_scan(lr, nu, w.table, 1 << 12, 8, backend="numba")
    b = assoc_scan(lr, nu, w.table, 1 << 12, 8, backend="numpy")
    assert _same(a, b)


@given(
    st.floats(1.0, 4.0),
    st.lists(st.floats(-5.0, 12.0), min_size=1, max_size=40),
)
def test_concave_backends_identical_and_match_scan(s, logr):
    w = make_weights("gevrey", 2, s=s)
    w.ensure(1 << 16)
    lr = np.asarray(logr)
    a = assoc_concave(lr, 2, w.table, 1 << 15, backend="numba")
    b = assoc_concave(lr, 2, w.table, 1 << 15, backend="numpy")
    assert _same(a, b)
    sc = assoc_scan(lr, 2, w.table, 1 << 15, 8, backend="numba")
    ok = (a[2] == SCAN_OK) & (sc[2] == SCAN_OK)
    np.testing.assert_array_equal(a[0][ok], sc[0][ok])
    np.testing.assert_array_equal(a[1][ok], sc[1][ok])


def test_scan_status_codes():
    w = make_weights("factorial", 2)
    lr = np.array([0.0, 30.0])
    for b in BACKENDS:
        v, k, st_ = assoc_scan(lr, 2, w.table[:65], 10, 8, backend=b)
        assert st_[0] == SCAN_OK and v[0] == 0.0
        assert st_[1] in (SCAN_LIMIT, SCAN_TABLE_END)
        v, k, st_ = assoc_scan(lr, 2, w.table[:65], 1 << 20, 8, backend=b)
        assert st_[1] == SCAN_TABLE_END


@given(
    st.integers(0, 60),
    st.integers(0, 120),
    st.lists(st.one_of(st.floats(-1.0, 1.0), st.sampled_from([-1.0, 0.0, 1.0])), min_size=1, max_size=20),
)
def test_legendre_backends_identical(m, extra, xs):
    lmax = m + extra
    x = np.asarray(xs)
    assert _same([legendre_m(m, lmax, x, backend="numba")], [legendre_m(m, lmax, x, backend="numpy")])


def test_legendre_high_degree_finite():
    x = np.cos(np.linspace(1e-3, np.pi - 1e-3, 50))
    for b in BACKENDS:
        P = legendre_m(1500, 2000, x, backend=b)
        assert np.all(np.isfinite(P))
        # |Lambda_l^m| <= sqrt((2l+1)/(4 pi)) from the addition theorem
        bound = np.sqrt((2 * np.arange(1500, 2001) + 1) / (4 * np.pi))
        assert np.all(np.abs(P) <= bound[:, None] * (1 + 1e-12))


@pytest.mark.parametrize("flag,expected", [("1", "numpy"), ("", "numba")])
def test_env_switch(flag, expected):
    code = (
        "import numpy as np, hashlib;"
        "from ultraspec import backend_name;"
        "from ultraspec.weights import AssociatedFunction, make_weights;"
        "from ultraspec._kernels import legendre_m;"
        "M, k = AssociatedFunction(make_weights('gevrey', 2, s=1.5)).evaluate(np.logspace(-2, 4, 50));"
        "P = legendre_m(7, 90, np.linspace(-1, 1, 33));"
        "print(backend_name(), hashlib.sha256(M.tobytes() + k.tobytes() + P.tobytes()).hexdigest())"
    )
    env = dict(os.environ, ULTRASPEC_DISABLE_NUMBA=flag)
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True).stdout.split()
    assert out[0] == expected
    test_env_switch.digests = getattr(test_env_switch, "digests", set()) | {out[1]}
    assert len(test_env_switch.digests) == 1
