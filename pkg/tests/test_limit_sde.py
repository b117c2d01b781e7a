import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from mpcn.errors import DegenerateInputError, DomainError
from mpcn.limit_sde import DiffusionSpec, diffusion_from_target, empirical_triplet, euler_maruyama
from mpcn.rand import RngStream
from mpcn.samplers import ProposalKernel, run_chain
from mpcn.targets import MixingInfo, Target, target_gaussian, target_student_t


def test_t_target_coefficients():
    spec = diffusion_from_target(target_student_t(20, 2.0, 0.0, 5.0), 0.8)
    for y in (0.5, 10.0, 60.0, 1e3):
        assert spec.a(y) == pytest.approx(10.0, rel=1e-12)
        assert spec.b(y) == pytest.approx(0.8 * y * y, rel=1e-14)
    assert spec.b(1.0) == pytest.approx(0.8)
    assert spec.affine == pytest.approx((10.0, 0.0, 0.8))


@given(st.floats(0.2, 20), st.floats(0.2, 20), st.floats(0.05, 0.95), st.floats(1e-3, 1e3))
def test_coefficients_match_closed_forms(nu, sigma, rho, y):
    t = target_student_t(3, nu, 0.0, sigma)
    spec = diffusion_from_target(t, rho)
    q = t.mixing
    assert spec.a(y) == pytest.approx(2 * (2 * y + q.dlog_q(y) * y * y) * (1 - rho), rel=1e-9, abs=1e-9)
    assert spec.b(y) / (y * y) == pytest.approx(4 * (1 - rho), rel=1e-14)
    a0, a1, b2 = spec.affine
    assert a0 + a1 * y == pytest.approx(spec.a(y), rel=1e-9, abs=1e-9)


def test_missing_mixing_rejected():
    with pytest.raises(DomainError):
        diffusion_from_target(target_gaussian(3), 0.8)
    with pytest.raises(DomainError):
        diffusion_from_target(target_student_t(3), 1.5)


def test_em_constant_path():
    spec = DiffusionSpec(lambda y: 0.0, lambda y: 0.0, 0.5)
    assert np.all(euler_maruyama(spec, 2.5, 0.01, 50, RngStream(0)) == 2.5)
    aff = DiffusionSpec.affine_spec(0.0, 0.0, 0.0)
    assert np.all(euler_maruyama(aff, 2.5, 0.01, 50, RngStream(0)) == 2.5)


@pytest.mark.parametrize("backend", ["python", None])
def test_em_deterministic_ode(backend):
    aff = DiffusionSpec.affine_spec(10.0, 0.0, 0.0)
    y = euler_maruyama(aff, 1.0, 0.01, 100, RngStream(0), backend=backend)
    assert y[-1] == pytest.approx(11.0, abs=1e-12)
    gen = DiffusionSpec(lambda y: 10.0, lambda y: 0.0, 0.5)
    assert euler_maruyama(gen, 1.0, 0.01, 100, RngStream(0))[-1] == pytest.approx(11.0, abs=1e-12)


def test_em_affine_matches_generic_loop():
    spec = diffusion_from_target(target_student_t(3), 0.8)
    generic = DiffusionSpec(spec.a, spec.b, spec.rho, spec.mixing, None)
    a = euler_maruyama(spec, 30.0, 1e-3, 20_000, RngStream(4))
    b = euler_maruyama(generic, 30.0, 1e-3, 20_000, RngStream(4))
    assert np.allclose(a, b, rtol=1e-10)


@pytest.mark.parametrize("backend", ["python", None])
def test_em_positivity(backend):
    spec = DiffusionSpec.affine_spec(0.05, -1.0, 4.0)
    y = euler_maruyama(spec, 0.01, 0.05, 20_000, RngStream(2), backend=backend)
    assert np.all(y > 0)
    # replay the raw steps: some of them must have been reflected
    z = RngStream(2).normal(20_000)
    prev = np.concatenate(([0.01], y[:-1]))
    raw = prev + (0.05 - prev) * 0.05 + 2 * prev * math.sqrt(0.05) * z
    assert np.any(raw < 0)
    assert np.allclose(y, np.abs(raw), rtol=1e-12)


def test_em_input_validation():
    spec = DiffusionSpec.affine_spec(1.0, 0.0, 1.0)
    with pytest.raises(DomainError):
        euler_maruyama(spec, 0.0, 0.1, 10, RngStream(0))
    with pytest.raises(DomainError):
        euler_maruyama(spec, 1.0, 0.0, 10, RngStream(0))


def test_em_stationary_median_short():
    # shorter than the acceptance run; the law of the limit is InvGamma(1, 25)
    spec = diffusion_from_target(target_student_t(3), 0.8)
    rng = RngStream(3)
    y = euler_maruyama(spec, 25 / math.log(2), 1e-3, 2_000_000, rng)
    assert np.median(y) == pytest.approx(25 / math.log(2), rel=0.3)


def test_triplet_on_synthetic_series():
    # radial increments with known conditional moments
    rng = RngStream(6)
    n, d = 400_000, 50
    r = np.empty(n)
    r[0] = 1.0
    for k in range(1, n):
        r[k] = 1.0 + 0.1 * rng.normal() if k % 2 == 0 else r[k - 1] + 0.02
    est = empirical_triplet(r, d, n_bins=5, lo=0, hi=100, min_count=10)
    assert len(est) > 0
    assert np.all(est.b_hat > 0)
    assert est.counts.sum() <= n - 1


def test_triplet_matches_direct_binning(rng):
    r = np.exp(rng.normal(20_000))
    est = empirical_triplet(r, 7, n_bins=4, lo=10, hi=90, min_count=1, block=1000)
    edges = np.percentile(r, np.linspace(10, 90, 5))
    src, dr = r[:-1], np.diff(r)
    for j in range(4):
        m = (src >= edges[j]) & ((src < edges[j + 1]) if j < 3 else (src <= edges[j + 1]))
        assert est.counts[j] == m.sum()
        assert est.a_hat[j] == pytest.approx(7 * dr[m].mean(), rel=1e-10)
        assert est.b_hat[j] == pytest.approx(7 * (dr[m] ** 2).mean(), rel=1e-10)
        assert est.c_hat[j] == pytest.approx(7 * (dr[m] ** 4).mean(), rel=1e-10)
        assert est.bin_centers[j] == pytest.approx(src[m].mean(), rel=1e-12)


def test_triplet_pools_chains_without_crossing(rng):
    a, b = rng.normal(500) + 10, rng.normal(500) + 10
    pooled = empirical_triplet([a, b], 3, n_bins=1, lo=0, hi=100, min_count=1)
    # 499 transitions per chain; the a[-1] -> b[0] jump is never counted
    assert pooled.counts.sum() == 998
    inc = np.concatenate([np.diff(a), np.diff(b)])
    assert pooled.a_hat[0] == pytest.approx(3 * inc.mean(), rel=1e-12)


def test_triplet_suppresses_sparse_bins(rng):
    est = empirical_triplet(rng.normal(1000), 3, n_bins=30, min_count=200)
    assert len(est) == 0 and est.suppressed == 30


def test_triplet_needs_data():
    with pytest.raises(DegenerateInputError):
        empirical_triplet(np.ones(1), 3)


def test_triplet_short_mpcn_run():
    # the drift of the t-target limit is the constant 10; check the sign and rough size
    t = target_student_t(50)
    rng = RngStream(8)
    tr = run_chain(t.sample(rng), ProposalKernel("mpcn", rho=0.8), t, 300_000, rng, record=("radial",))
    est = empirical_triplet(tr, 50, n_bins=10)
    spec = diffusion_from_target(t, 0.8)
    mid = (est.bin_centers > 10) & (est.bin_centers < 60)
    ratio = est.b_hat[mid] / spec.b(est.bin_centers[mid])
    assert np.all((ratio > 0.7) & (ratio < 1.3))
    assert np.all(est.b_hat > 0)


def test_generic_mixing_spec():
    mix = MixingInfo(lambda z: -z, lambda z: -1.0)
    spec = diffusion_from_target(Target(3, lambda x: 0.0, mix), 0.5)
    assert spec.affine is None
    assert spec.a(2.0) == pytest.approx(2 * (4 - 4) * 0.5)
