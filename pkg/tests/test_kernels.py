import subprocess
import sys

import numpy as np
import pytest
from scipy.special import log_ndtr as sp_log_ndtr

from designrl import kernels
from designrl.kernels import pyref
from designrl.prob import make_rng

native = pytest.importorskip("designrl.kernels._native")


def test_selected_backend_is_native_when_built():
    assert kernels.BACKEND == "native"


def test_loc_loglik_parity():
    rng = make_rng(0)
    thetas = rng.standard_normal((500, 3, 2))
    xi = np.array([0.7, -1.2])
    for y in (-2.0, 0.1, 5.0):
        a = native.loc_loglik_batch(y, thetas, xi, 1.0, 0.1, 1e-4, 0.5)
        b = pyref.loc_loglik_batch(y, thetas, xi, 1.0, 0.1, 1e-4, 0.5)
        assert np.allclose(a, b, rtol=1e-12, atol=1e-12)


def test_ces_loglik_parity_interior_and_atoms():
    rng = make_rng(1)
    n = 400
    rho = rng.uniform(0.01, 0.99, n)
    alphas = rng.dirichlet([1.0, 1.0, 1.0], n)
    u = np.exp(rng.normal(1.0, 3.0, n))  # includes extreme magnitudes
    xi = rng.uniform(0.0, 100.0, 6)
    eps = 2.0**-22
    for y in (eps, 1.0 - eps, 0.3, 0.9999, 1e-5):
        a = native.ces_loglik_batch(y, rho, alphas, u, xi, 0.005, eps)
        b = pyref.ces_loglik_batch(y, rho, alphas, u, xi, 0.005, eps)
        assert np.allclose(a, b, rtol=1e-10, atol=1e-10)


def test_log_ndtr_matches_scipy_everywhere():
    z = np.concatenate([
        np.linspace(-1e6, -100, 50),
        np.linspace(-60, -30, 301),   # straddles the series/erfc switch
        np.linspace(-29.9, 8.0, 500),
    ])
    got = native.log_ndtr_batch(z)
    want = sp_log_ndtr(z)
    assert np.allclose(got, want, rtol=1e-10, atol=1e-12)


def test_forced_python_backend_selectable():
    code = (
        "import designrl.kernels as k; "
        "print(k.BACKEND)"
    )
    out = subprocess.run(
        [sys.executable, "-c", code],
        capture_output=True, text=True,
        env={"DESIGNRL_KERNELS": "python", "PATH": "/usr/bin:/bin"},
    )
    assert out.stdout.strip() == "python"


def test_bad_backend_env_rejected():
    code = "import designrl.kernels"
    out = subprocess.run(
        [sys.executable, "-c", code],
        capture_output=True, text=True,
        env={"DESIGNRL_KERNELS": "fortran", "PATH": "/usr/bin:/bin"},
    )
    assert out.returncode != 0
