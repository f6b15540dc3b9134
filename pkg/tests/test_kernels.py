import os
import subprocess
import sys

import numpy as np
import pytest

from lorsim import kernels
from lorsim.estimators import estimate_batch


def batch(seed, M=500, K=10):
    rng = np.random.default_rng(seed)
    y = rng.normal(0.3, 0.8, size=(M, K))
    v = rng.uniform(0.01, 0.5, size=(M, K))
    wn = rng.integers(5, 500, size=(M, K)).astype(float)
    return y, v, wn


@pytest.mark.parametrize("K", [2, 5, 30])
def test_backends_agree(K):
    y, v, wn = batch(K, K=K)
    a = estimate_batch(y, v, wn, backend="numba")
    b = estimate_batch(y, v, wn, backend="numpy")
    for m in a.tau2:
        np.testing.assert_allclose(a.tau2[m], b.tau2[m], rtol=1e-9, atol=1e-10)
    for m in a.theta:
        np.testing.assert_allclose(a.theta[m], b.theta[m], rtol=1e-9, atol=1e-10)
        np.testing.assert_allclose(a.ci_low[m], b.ci_low[m], rtol=1e-9, atol=1e-10)
    assert np.array_equal(a.reml_converged, b.reml_converged)


def test_rows_independent_of_batch(backend):
    y, v, wn = batch(3)
    full = estimate_batch(y, v, wn, backend=backend)
    part = estimate_batch(y[17:18], v[17:18], wn[17:18], backend=backend)
    for m in full.tau2:
        assert full.tau2[m][17] == part.tau2[m][0]
    for m in full.theta:
        assert full.ci_high[m][17] == part.ci_high[m][0]


def test_reml_nonconvergence_flag(backend):
    ks = kernels.kernel_set(backend)
    y, v, _ = batch(4, M=50)
    t, conv = ks["tau2_reml"](y, v, np.zeros(50), 1e-8, 1)
    assert not conv.all()
    assert np.all(t >= 0)


def test_mp_zero_when_q_small(backend):
    ks = kernels.kernel_set(backend)
    y = np.zeros((3, 4))
    v = np.full((3, 4), 0.2)
    assert np.array_equal(ks["tau2_mp"](y, v), np.zeros(3))


def test_unknown_backend():
    with pytest.raises(ValueError):
        kernels.kernel_set("fortran")


def test_env_flag_selects_numpy():
    code = "from lorsim import _accel, kernels; print(_accel.backend_name(), kernels.tau2_dl is kernels.tau2_dl_numpy)"
    env = dict(os.environ, LORSIM_DISABLE_NUMBA="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.split() == ["numpy", "True"]
