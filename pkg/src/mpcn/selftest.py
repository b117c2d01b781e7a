"""Quick property checks behind ``mpcn selftest`` (a few seconds in total)."""
from __future__ import annotations

import math

import numpy as np

from . import _backend
from .diagnostics import autocorrelation, stuck_statistics
from .rand import InvGammaParams, RngStream, chi2_scaled_moment, sample_chi2, sample_inv_gamma
from .samplers import (
    ProposalKernel,
    generic_log_alpha,
    mixing_log_alpha,
    mpcn_proposal_logpdf,
    run_chain,
)
from .targets import target_gaussian, target_student_t


def check_determinism():
    t = target_student_t(10)
    k = ProposalKernel("mpcn", rho=0.8)
    runs = [run_chain(np.ones(10), k, t, 5000, RngStream(7, 1)) for _ in range(2)]
    return np.array_equal(runs[0].radial, runs[1].radial) and np.array_equal(runs[0].accepted, runs[1].accepted)


def check_pcn_exact():
    rng = RngStream(1)
    t = target_gaussian(20, 1.0)
    tr = run_chain(t.sample(rng), ProposalKernel("pcn", rho=0.8), t, 20_000, rng)
    rate, _ = stuck_statistics(tr.accepted)
    return rate == 1.0 and abs(autocorrelation(tr.coord1, 1)[1] - math.sqrt(0.8)) < 0.03


def check_accept_ratio_identity():
    rng = RngStream(2)
    t = target_student_t(20)
    k = ProposalKernel("mpcn", rho=0.8)
    worst = 0.0
    for _ in range(100):
        x = t.sample(rng)
        y, _, _ = k.propose(x, rng)
        worst = max(worst, abs(generic_log_alpha(k, t, x, y) - mixing_log_alpha(t, x, y)))
    return worst < 1e-10


def check_proposal_reversibility():
    rng = RngStream(3)
    worst = 0.0
    for d in (1, 2):
        for _ in range(5):
            x, y = rng.normal(d), rng.normal(d)
            fwd = mpcn_proposal_logpdf(x, y, 0.8) - 0.5 * d * math.log(x @ x)
            bwd = mpcn_proposal_logpdf(y, x, 0.8) - 0.5 * d * math.log(y @ y)
            worst = max(worst, abs(fwd - bwd))
    return worst < 1e-6


def check_distributions():
    rng = RngStream(4)
    ig = sample_inv_gamma(InvGammaParams(3.0, 4.0), rng, 200_000)
    chi = sample_chi2(20, rng, 200_000) / 20
    ok_mean = abs(ig.mean() - 2.0) < 0.05
    ok_chi = abs((chi ** -1).mean() - chi2_scaled_moment(20, -1)) < 0.01
    return ok_mean and ok_chi


def check_backends():
    if _backend.compiled is None:
        return True
    t = target_student_t(8)
    k = ProposalKernel("mpcn", rho=0.8)
    a = run_chain(np.ones(8), k, t, 3000, RngStream(5), backend="cython")
    b = run_chain(np.ones(8), k, t, 3000, RngStream(5), backend="python")
    return np.array_equal(a.accepted, b.accepted) and np.allclose(a.radial, b.radial, rtol=1e-9)


CHECKS = {
    "determinism": check_determinism,
    "pcn_exact_on_gaussian": check_pcn_exact,
    "acceptance_ratio_identity": check_accept_ratio_identity,
    "proposal_reversibility": check_proposal_reversibility,
    "distribution_oracles": check_distributions,
    "backend_agreement": check_backends,
}


def run_all(verbose: bool = False) -> bool:
    ok = True
    for name, fn in CHECKS.items():
        passed = bool(fn())
        ok &= passed
        if verbose:
            print(f"{'PASS' if passed else 'FAIL'} {name}")
    if verbose:
        print(f"backend: {_backend.NAME}")
    return ok
