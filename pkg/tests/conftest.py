import numpy as np
import pytest

from lsaprecode.numerics import RngStream, gaussian_complex


@pytest.fixture
def rng():
    return RngStream(1234, 0).generator(0)


def random_channel(gen, P, M, batch=()):
    """i.i.d. CN(0, 1) channel matrices of shape ``batch + (P, M)``."""
    return gaussian_complex(gen, tuple(batch) + (P, M), 1.0)


def random_hpd(gen, n, shift=0.0):
    X = gaussian_complex(gen, (n, n))
    return X @ X.conj().T / n + shift * np.eye(n)
