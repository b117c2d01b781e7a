import numpy as np
import pytest

from mpcn.rand import RngStream


@pytest.fixture
def rng():
    return RngStream(12345, 0)


def ks_ok(a, b, level=0.01):
    from scipy import stats

    return stats.ks_2samp(a, b).pvalue > level


@pytest.fixture
def ks():
    return ks_ok


def se_of_mean(x):
    x = np.asarray(x, dtype=float)
    return x.std(ddof=1) / np.sqrt(x.size)
