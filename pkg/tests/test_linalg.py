import numpy as np
import pytest
import scipy.linalg

from embedrl import linalg
from conftest import random_density, random_hermitian, random_unitary

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)


def test_kron_block_structure():
    m = linalg.kron(SX, np.eye(2))
    expected = np.zeros((4, 4))
    expected[0, 2] = expected[1, 3] = expected[2, 0] = expected[3, 1] = 1
    assert np.abs(m - expected).max() == 0


def test_kron_matches_numpy(rng):
    a = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
    b = rng.standard_normal((2, 2))
    assert np.abs(linalg.kron(a, b) - np.kron(a, b)).max() == 0


def test_partial_trace_bell():
    bell = np.zeros((4, 4), dtype=complex)
    psi = np.array([1, 0, 0, 1]) / np.sqrt(2)
    bell = np.outer(psi, psi.conj())
    red = linalg.partial_trace(bell, (2, 2), keep=0)
    assert np.abs(red - np.eye(2) / 2).max() < 1e-12
    red1 = linalg.partial_trace(bell, (2, 2), keep=1)
    assert np.abs(red1 - np.eye(2) / 2).max() < 1e-12


def test_partial_trace_product_states(rng):
    a = random_density(rng, 2)
    b = random_density(rng, 3)
    c = random_density(rng, 2)
    rho = np.kron(np.kron(a, b), c)
    assert np.abs(linalg.partial_trace(rho, (2, 3, 2), 0) - a).max() < 1e-12
    assert np.abs(linalg.partial_trace(rho, (2, 3, 2), 1) - b).max() < 1e-12
    assert np.abs(linalg.partial_trace(rho, (2, 3, 2), 2) - c).max() < 1e-12
    ab = linalg.partial_trace(rho, (2, 3, 2), (0, 1))
    assert np.abs(ab - np.kron(a, b)).max() < 1e-12


def test_partial_trace_preserves_trace_and_linearity(rng):
    x = random_density(rng, 12)
    y = random_density(rng, 12)
    for keep in (0, 1, 2):
        rx = linalg.partial_trace(x, (2, 3, 2), keep)
        assert abs(np.trace(rx) - np.trace(x)) < 1e-12
        mix = linalg.partial_trace(0.3 * x + 0.7 * y, (2, 3, 2), keep)
        ry = linalg.partial_trace(y, (2, 3, 2), keep)
        assert np.abs(mix - (0.3 * rx + 0.7 * ry)).max() < 1e-12


def test_partial_trace_shape_mismatch():
    with pytest.raises(ValueError):
        linalg.partial_trace(np.eye(4), (2, 3), 0)


def test_herm_eig_two_by_two_analytic(rng):
    # roots of lambda^2 - (a+c) lambda + (ac - |b|^2)
    for _ in range(20):
        a, c = rng.standard_normal(2)
        b = rng.standard_normal() + 1j * rng.standard_normal()
        h = np.array([[a, b], [np.conj(b), c]])
        w, v = linalg.herm_eig(h)
        mean = 0.5 * (a + c)
        rad = np.sqrt(0.25 * (a - c) ** 2 + abs(b) ** 2)
        assert np.abs(w - np.array([mean - rad, mean + rad])).max() < 1e-12
        assert np.abs((v * w) @ v.conj().T - h).max() < 1e-12


def test_herm_eig_rejects_non_hermitian():
    with pytest.raises(ValueError):
        linalg.herm_eig(np.array([[0.0, 1.0], [0.0, 0.0]]))


def test_herm_eig_degenerate_reconstruction(rng):
    v = random_unitary(rng, 4)
    h = (v * np.array([1.0, 1.0, 2.0, 3.0])) @ v.conj().T
    h = linalg.hermitian_part(h)
    w, u = linalg.herm_eig(h)
    assert np.abs(np.sort(w) - np.array([1, 1, 2, 3])).max() < 1e-12
    assert np.abs((u * w) @ u.conj().T - h).max() < 1e-12


def test_expm_unitary_pauli_z():
    u = linalg.expm_unitary(SZ, np.pi)
    assert np.abs(u + np.eye(2)).max() < 1e-12


def test_expm_unitary_is_unitary_and_matches_scipy(rng):
    for d in (2, 5):
        h = random_hermitian(rng, d)
        u = linalg.expm_unitary(h, 0.37)
        assert np.abs(u @ u.conj().T - np.eye(d)).max() < 1e-12
        assert np.abs(u - scipy.linalg.expm(-1j * 0.37 * h)).max() < 1e-10


def test_logm_principal_branch():
    m = np.diag([1.0, np.exp(1j * (np.pi - 1e-6))])
    lg = linalg.logm_principal(m)
    assert abs(lg[1, 1].imag - (np.pi - 1e-6)) < 1e-9
    # just past the cut the imaginary part lands near -pi, not +pi
    m2 = np.diag([1.0, np.exp(1j * (np.pi + 1e-6))])
    lg2 = linalg.logm_principal(m2)
    assert abs(lg2[1, 1].imag + (np.pi - 1e-6)) < 1e-9


def test_logm_inverts_expm_within_branch(rng):
    for d in (2, 4, 6):
        h = random_hermitian(rng, d)
        dt = 0.9 * np.pi / np.abs(np.linalg.eigvalsh(h)).max()
        u = linalg.expm_unitary(h, dt)
        lg = linalg.logm_principal(u)
        assert np.abs(lg - (-1j * dt * h)).max() < 1e-9


def test_logm_matches_scipy_on_generic_matrix(rng):
    a = np.eye(4) + 0.2 * rng.standard_normal((4, 4))
    lg = linalg.logm_principal(a)
    assert np.abs(lg - scipy.linalg.logm(a)).max() < 1e-9


def test_logm_rejects_singular_and_defective():
    with pytest.raises(linalg.NumericalError):
        linalg.logm_principal(np.diag([1.0, 0.0]))
    jordan = np.array([[1.0, 1.0], [0.0, 1.0 + 1e-14]])
    with pytest.raises(linalg.NumericalError):
        linalg.logm_principal(jordan)


def test_vec_identity_and_roundtrip(rng):
    assert np.abs(linalg.vec(np.eye(2)) - np.array([1, 0, 0, 1])).max() == 0
    a = rng.standard_normal((5, 5)) + 1j * rng.standard_normal((5, 5))
    assert np.abs(linalg.unvec(linalg.vec(a)) - a).max() == 0
    # column stacking: vec[i + d*j] = A[i, j]
    unit = np.zeros((2, 2))
    unit[0, 1] = 1
    assert np.argmax(linalg.vec(unit)) == 2


def test_vec_sandwich_identity(rng):
    d = 4
    for _ in range(10):
        a = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
        b = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
        x = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
        lhs = linalg.vec(a @ x @ b)
        rhs = np.kron(b.T, a) @ linalg.vec(x)
        assert np.abs(lhs - rhs).max() < 1e-12


def test_superop_of_unitary_conjugation(rng):
    u = random_unitary(rng, 3)
    m = linalg.superop_of_channel(lambda r: u @ r @ u.conj().T, 3)
    assert np.abs(m - np.kron(u.conj(), u)).max() < 1e-12
    m_x = linalg.superop_of_channel(lambda r: SX @ r @ SX, 2)
    assert np.abs(m_x - np.kron(SX, SX)).max() < 1e-12


def test_superop_agrees_with_direct_application(rng):
    d = 4
    ops = [rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d)) for _ in range(3)]

    def channel(r):
        return sum(k @ r @ k.conj().T for k in ops)

    m = linalg.superop_of_channel(channel, d)
    for _ in range(5):
        rho = random_density(rng, d)
        assert np.abs(linalg.unvec(m @ linalg.vec(rho)) - channel(rho)).max() < 1e-11


def test_assert_density_matrix_accepts_and_rejects(rng):
    linalg.assert_density_matrix(random_density(rng, 3))
    with pytest.raises(ValueError):
        linalg.assert_density_matrix(np.eye(2))  # trace 2
    with pytest.raises(ValueError):
        linalg.assert_density_matrix(np.array([[1.5, 0], [0, -0.5]]))  # negative eigenvalue
    with pytest.raises(ValueError):
        linalg.assert_density_matrix(np.array([[0.5, 0.5], [0.0, 0.5]]))  # not Hermitian
