import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240521)


def random_hermitian(rng, n, scale=1.0):
    a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return scale * 0.5 * (a + a.conj().T)


def random_psd(rng, n, rank=None, scale=1.0):
    rank = n if rank is None else rank
    f = rng.standard_normal((n, rank)) + 1j * rng.standard_normal((n, rank))
    return scale * (f @ f.conj().T) / rank


def random_complex(rng, rows, cols):
    return (rng.standard_normal((rows, cols)) + 1j * rng.standard_normal((rows, cols))) / np.sqrt(2)
