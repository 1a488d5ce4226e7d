import numpy as np
import pytest

from embedrl.embedding import EmbeddingModel


def closed_qubit_model(g=2.0, b0=1.0, dt=0.2):
    """Exact one-qubit embedding: no reservoir, Hamiltonian -(g/2) B0 sz."""
    h_s = np.diag([-0.5 * g * b0, 0.5 * g * b0]).astype(complex)
    return EmbeddingModel(
        d_s=2,
        d_er=1,
        d_a=2,
        dt=dt,
        h=np.kron(h_s, np.eye(2, dtype=complex)),
        rho_er0=np.eye(1, dtype=complex),
        rho_a=np.diag([1.0, 0.0]).astype(complex),
    )


def random_hermitian(rng, d, scale=1.0):
    a = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    return scale * 0.5 * (a + a.conj().T)


def random_unitary(rng, d):
    a = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    q, r = np.linalg.qr(a)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_density(rng, d):
    a = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    rho = a @ a.conj().T
    return rho / np.trace(rho)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
