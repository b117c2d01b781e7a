import os
import subprocess
import sys

import numpy as np
import pytest

from mpcn import _backend, _pycore
from mpcn.limit_sde import DiffusionSpec, euler_maruyama
from mpcn.rand import RngStream
from mpcn.samplers import ProposalKernel, run_chain
from mpcn.targets import target_gaussian, target_perturbed_t, target_shifted, target_student_t

needs_core = pytest.mark.skipif(_backend.compiled is None, reason="compiled core not built")

KERNELS = [
    ProposalKernel("rwm_gauss", sigma_d=0.3),
    ProposalKernel("rwm_t", sigma_d=0.3, df=2.0),
    ProposalKernel("pcn", rho=0.8),
    ProposalKernel("mpcn", rho=0.8),
    ProposalKernel("mpcn_general", rho=0.8, nu_bar=1.0),
]
TARGETS = [
    target_gaussian(6, 1.5),
    target_student_t(6, 2.0, 0.0, 5.0),
    target_perturbed_t(6),
    target_shifted(target_gaussian(6), 2.0),
]


@needs_core
@pytest.mark.parametrize("kernel", KERNELS, ids=lambda k: k.kind)
@pytest.mark.parametrize("target", TARGETS, ids=lambda t: t.kind + str(t.center is not None))
def test_backends_agree(kernel, target):
    x0 = np.linspace(0.2, 1.7, 6)
    a = run_chain(x0, kernel, target, 6000, RngStream(3), backend="cython", record_path=True)
    b = run_chain(x0, kernel, target, 6000, RngStream(3), backend="python", record_path=True)
    assert np.array_equal(a.accepted, b.accepted)
    assert np.allclose(a.path, b.path, rtol=1e-10, atol=1e-12)
    assert np.allclose(a.radial, b.radial, rtol=1e-10, atol=1e-12)
    assert a.nonfinite == b.nonfinite


@needs_core
def test_log_target_agree(rng):
    c = np.zeros(5)
    for code in (0, 1, 2):
        for x in rng.normal((20, 5)) * 10:
            assert _backend.compiled.log_target(code, 2.0, 3.0, c, x) == pytest.approx(
                _pycore.log_target(code, 2.0, 3.0, c, x), rel=1e-12)


def test_log_target_matches_target_objects(rng):
    for t in TARGETS[:3]:
        code = {"gaussian": 0, "student_t": 1, "perturbed_t": 2}[t.kind]
        for x in rng.normal((10, 6)) * 4:
            got = _pycore.log_target(code, t.params.get("sigma", 1.0), t.params.get("nu", 1.0),
                                     t.location, x)
            assert got == pytest.approx(t(x), rel=1e-12, abs=1e-14)


@needs_core
def test_euler_backends_agree():
    spec = DiffusionSpec.affine_spec(10.0, 0.0, 0.8)
    a = euler_maruyama(spec, 30.0, 1e-3, 100_000, RngStream(1), backend="cython")
    b = euler_maruyama(spec, 30.0, 1e-3, 100_000, RngStream(1), backend="python")
    assert np.allclose(a, b, rtol=1e-12)


def test_fallback_selected_by_environment():
    env = dict(os.environ, MPCN_BACKEND="python")
    out = subprocess.run([sys.executable, "-c", "import mpcn; print(mpcn.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


def test_get_backend():
    assert _backend.get("python") is _pycore
    with pytest.raises(ValueError):
        _backend.get("fortran")
