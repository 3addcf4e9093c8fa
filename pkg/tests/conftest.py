import numpy as np
import pytest

import gbmm


@pytest.fixture(scope="session")
def desk_channel():
    """One fixed small channel: 16x9 arrays, 3 clusters x 2 rays, rank 6."""
    config = gbmm.ChannelConfig(
        tx=gbmm.ArrayGeometry(16),
        rx=gbmm.ArrayGeometry(9),
        n_clusters=3,
        n_rays=2,
    )
    return gbmm.generate_channel(config, np.random.default_rng(7))


@pytest.fixture(scope="session")
def desk_decomposition(desk_channel):
    return gbmm.decompose(desk_channel)


@pytest.fixture(scope="session")
def desk_family(desk_decomposition):
    # 15 dB closed-form family over all C(6, 2) = 15 selections
    return gbmm.optimize_upper_bound(desk_decomposition, 10.0 ** 1.5, 2)


def random_decomposition(rng, n_rx, n_tx, singular_values):
    """Synthetic decomposition with chosen singular values and random unitary
    factors, for tests that need controlled sigma."""
    s = np.asarray(singular_values, dtype=float)
    a = rng.standard_normal((n_rx, n_rx)) + 1j * rng.standard_normal((n_rx, n_rx))
    u = np.linalg.qr(a)[0][:, : s.size]
    b = rng.standard_normal((n_tx, n_tx)) + 1j * rng.standard_normal((n_tx, n_tx))
    v = np.linalg.qr(b)[0][:, : s.size]
    matrix = (u * s) @ v.conj().T
    return gbmm.decompose(matrix)
