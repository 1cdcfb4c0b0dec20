import numpy as np
import pytest

from vitsim import loops

BACKENDS = ["python"] + (["cython"] if loops._loops_cy is not None else [])


@pytest.fixture(params=BACKENDS)
def backend(request, monkeypatch):
    """Run the test once per available inner-loop backend."""
    if request.param == "python":
        monkeypatch.setenv("VITSIM_PURE_PYTHON", "1")
    else:
        monkeypatch.delenv("VITSIM_PURE_PYTHON", raising=False)
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_stats(d, lam=1.0, n_updates=None, seed=0):
    """Sufficient statistics after a burst of random unit-norm observations."""
    from vitsim import SufficientStats, sherman_morrison_update

    gen = np.random.default_rng(seed)
    stats = SufficientStats(d, lam)
    for _ in range(2 * d if n_updates is None else n_updates):
        phi = gen.standard_normal(d)
        phi /= np.linalg.norm(phi)
        sherman_morrison_update(stats, phi, float(gen.standard_normal()))
    return stats
