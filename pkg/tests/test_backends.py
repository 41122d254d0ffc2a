import os
import subprocess
import sys

import numpy as np
import pytest

from ris_stogeo import montecarlo
from ris_stogeo.montecarlo import Simulator, backend_name

compiled = pytest.mark.skipif(backend_name() != "compiled", reason="extension not built")


@compiled
def test_per_link_bit_identical(cfg):
    a = Simulator(cfg, backend="python").run(400, 21, threads=1)
    b = Simulator(cfg, backend="compiled").run(400, 21, threads=2)
    for x, y in zip(a.arrays(), b.arrays()):
        np.testing.assert_array_equal(x, y)


@compiled
def test_per_bs_agrees(cfg):
    a = Simulator(cfg, "per_bs", backend="python").run(200, 22, threads=1)
    b = Simulator(cfg, "per_bs", backend="compiled").run(200, 22, threads=2)
    np.testing.assert_array_equal(a.kind, b.kind)
    np.testing.assert_array_equal(a.r_direct, b.r_direct)
    np.testing.assert_array_equal(a.r_reflected, b.r_reflected)
    # interference is summed in a different order in the compiled kernel
    np.testing.assert_allclose(a.sinr, b.sinr, rtol=1e-12, atol=0)


@compiled
def test_interference_samples_identical(cfg):
    a_dir, b_ref = [30.0, 100.0], [40.0, 110.0]
    pa = Simulator(cfg, backend="python").interference_samples(200, 5, a_dir, b_ref, threads=1)
    ca = Simulator(cfg, backend="compiled").interference_samples(200, 5, a_dir, b_ref, threads=3)
    for x, y in zip(pa, ca):
        np.testing.assert_allclose(x, y, rtol=1e-12, atol=0)
    # larger exclusion radius never adds interference
    assert np.all(ca[0][:, 1] <= ca[0][:, 0]) and np.all(ca[1][:, 1] <= ca[1][:, 0])


@compiled
def test_sparse_cases_agree(cfg):
    for c in (cfg.replace(mu=0.0), cfg.replace(lambda_b=1e-7), cfg.replace(lambda_l=2e-4, mu=1.0)):
        for mode in ("per_link", "per_bs"):
            a = Simulator(c, mode, backend="python").run(40, 3, threads=1)
            b = Simulator(c, mode, backend="compiled").run(40, 3, threads=1)
            np.testing.assert_array_equal(a.kind, b.kind)
            np.testing.assert_allclose(a.sinr, b.sinr, rtol=1e-12, atol=0)


def test_backend_selection(cfg):
    assert Simulator(cfg, backend="python").kernels is montecarlo.pyk
    with pytest.raises(ValueError):
        Simulator(cfg, backend="fortran")
    if backend_name() != "compiled":
        with pytest.raises(RuntimeError):
            Simulator(cfg, backend="compiled")


def test_env_forces_fallback():
    env = dict(os.environ, RIS_STOGEO_BACKEND="python")
    out = subprocess.run([sys.executable, "-c", "from ris_stogeo.montecarlo import backend_name; print(backend_name())"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
