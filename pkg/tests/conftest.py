import numpy as np
import pytest

from gnnflow import build_csr, generate_powerlaw, generate_regular
from gnnflow.params import Dims


def make_graph(topology: str, n: int, avg: float, seed: int):
    gen = generate_regular if topology == "regular" else generate_powerlaw
    return build_csr(gen(n, avg, seed))


def small_dims(model: str, d: int = 8) -> Dims:
    if model == "gat":
        return Dims(d, 2, max(d // 2, 1))
    if model == "monet":
        return Dims(d, 2)
    return Dims(d)


def assert_close(got, want, rtol, atol=1e-6):
    np.testing.assert_allclose(np.asarray(got, dtype=np.float64),
                               np.asarray(want, dtype=np.float64),
                               rtol=rtol, atol=atol)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
