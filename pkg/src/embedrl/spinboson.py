"""Ground truth: a driven qubit dephasing against truncated bosonic modes.

The joint Hamiltonian is

    H = -(g/2) B0 sz x 1  -  (g/2) Bx sx x 1  +  sum_k w_k n_k
        + sum_k lam_k sz x (a_k^dag + a_k)

with the qubit factor outermost and one truncated oscillator per mode. With
Bx = 0 the coupling is pure dephasing: [H, sz x 1] = 0, so populations in the
sz basis are conserved and only coherences decay. The "excited" state used
throughout is the +1 eigenstate of sz.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import (
    expm_unitary,
    herm_eig,
    hermitian_part,
    kron,
    partial_trace,
)

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)

KET_EXCITED = np.array([1, 0], dtype=complex)   # +1 eigenstate of sz
KET_GROUND = np.array([0, 1], dtype=complex)


def measurement_basis(name: str) -> np.ndarray:
    """Orthonormal qubit kets as columns; outcome index = column index."""
    s = 1 / np.sqrt(2)
    if name == "x":
        return np.array([[s, s], [s, -s]], dtype=complex)
    if name == "y":
        return np.array([[s, s], [1j * s, -1j * s]], dtype=complex)
    if name == "z":
        return np.eye(2, dtype=complex)
    raise ValueError(f"unknown measurement basis {name!r}, expected x, y or z")


@dataclass(frozen=True)
class Mode:
    omega: float
    lam: float


@dataclass(frozen=True)
class SystemParams:
    """Static description of the qubit + bath experiment."""

    g: float = 2.0
    b0: float = 1.0
    modes: tuple[Mode, ...] = (Mode(omega=1.0, lam=0.1),)
    n_fock: int = 5
    temperature: float = 10.0

    def __post_init__(self):
        object.__setattr__(self, "modes", tuple(
            m if isinstance(m, Mode) else Mode(**m) for m in self.modes
        ))
        if self.n_fock < 1:
            raise ValueError("n_fock must be at least 1")
        if self.temperature < 0:
            raise ValueError("temperature must be nonnegative")
        if not self.modes:
            raise ValueError("at least one bath mode is required")

    @property
    def dims(self) -> tuple[int, ...]:
        return (2,) + (self.n_fock,) * len(self.modes)

    @property
    def dim(self) -> int:
        return 2 * self.n_fock ** len(self.modes)


def ladder(n_fock: int) -> np.ndarray:
    """Truncated annihilation operator, a|n> = sqrt(n)|n-1>."""
    a = np.zeros((n_fock, n_fock), dtype=complex)
    ns = np.arange(1, n_fock)
    a[ns - 1, ns] = np.sqrt(ns)
    return a


def _embed(op: np.ndarray, dims: tuple[int, ...], slot: int) -> np.ndarray:
    full = np.eye(1, dtype=complex)
    for i, d in enumerate(dims):
        full = kron(full, op if i == slot else np.eye(d, dtype=complex))
    return full


def build_hamiltonian(params: SystemParams, bx: float = 0.0) -> np.ndarray:
    """Joint Hamiltonian for a given transverse drive amplitude Bx."""
    dims = params.dims
    h = np.zeros((params.dim, params.dim), dtype=complex)
    h += -(params.g / 2) * params.b0 * _embed(SIGMA_Z, dims, 0)
    if bx != 0.0:
        h += -(params.g / 2) * bx * _embed(SIGMA_X, dims, 0)
    for k, mode in enumerate(params.modes):
        a = ladder(params.n_fock)
        h += mode.omega * _embed(a.conj().T @ a, dims, k + 1)
        coupling = _embed(SIGMA_Z, dims, 0) @ _embed(a + a.conj().T, dims, k + 1)
        h += mode.lam * coupling
    return h


def thermal_state(omega: float, temperature: float, n_fock: int) -> np.ndarray:
    """Truncated Gibbs state of a single mode; temperature 0 gives the vacuum."""
    if temperature == 0.0:
        rho = np.zeros((n_fock, n_fock), dtype=complex)
        rho[0, 0] = 1.0
        return rho
    w = np.exp(-omega * np.arange(n_fock) / temperature)
    return np.diag(w / w.sum()).astype(complex)


def initial_joint_state(params: SystemParams) -> np.ndarray:
    """Excited qubit, each mode thermal at the shared temperature."""
    rho = np.outer(KET_EXCITED, KET_EXCITED.conj())
    for mode in params.modes:
        rho = kron(rho, thermal_state(mode.omega, params.temperature, params.n_fock))
    return rho


def evolve(rho: np.ndarray, h: np.ndarray, dt: float) -> np.ndarray:
    """Unitary step exp(-i h dt) rho exp(+i h dt)."""
    u = expm_unitary(h, dt)
    return u @ rho @ u.conj().T


def inverse_cdf_index(probs: np.ndarray, u: float) -> int:
    """Smallest k with cumsum(probs)[k] >= u; ties resolve to the lower index."""
    cum = np.cumsum(probs)
    k = int(np.searchsorted(cum, u, side="left"))
    return min(k, len(probs) - 1)


def measure_system(rho: np.ndarray, basis: np.ndarray, rng: np.random.Generator):
    """Projective measurement of the first (qubit) factor of a joint state.

    ``basis`` holds orthonormal kets as columns. Returns (outcome index,
    collapsed joint state, probability of that outcome). The non-measured
    factors are conditioned on the outcome, not reset.
    """
    d_s = basis.shape[0]
    d_rest = rho.shape[0] // d_s
    if d_s * d_rest != rho.shape[0]:
        raise ValueError("state dimension is not a multiple of the basis dimension")
    eye_rest = np.eye(d_rest, dtype=complex)
    projs = [kron(np.outer(basis[:, k], basis[:, k].conj()), eye_rest)
             for k in range(basis.shape[1])]
    probs = np.array([np.trace(p @ rho).real for p in projs])
    probs = np.clip(probs, 0.0, None)
    total = probs.sum()
    if not np.isfinite(total) or abs(total - 1.0) > 1e-8:
        raise ValueError(f"outcome probabilities sum to {total!r}, state is invalid")
    k = inverse_cdf_index(probs / total, rng.random())
    p_k = probs[k]
    collapsed = projs[k] @ rho @ projs[k] / p_k
    return k, collapsed, float(p_k)


@dataclass
class Trajectory:
    """A single long measurement record: outcome k_i and its probability at each step.

    Steps are implicitly 1..n in array order. ``basis`` holds the measured
    qubit kets as columns, shared by every step.
    """

    dt: float
    basis: np.ndarray
    outcomes: np.ndarray
    probabilities: np.ndarray
    seed: int
    params: SystemParams | None = None

    def __len__(self) -> int:
        return len(self.outcomes)


def generate_trajectory(params: SystemParams, n_steps: int, dt: float,
                        basis: np.ndarray, seed: int) -> Trajectory:
    """Alternate free evolution (Bx = 0) for dt with a projective qubit measurement.

    The run is deterministic for a given seed; sampling uses inverse-CDF
    draws from a PCG64 stream.
    """
    rng = np.random.default_rng(np.random.PCG64(np.random.SeedSequence(seed)))
    h = build_hamiltonian(params, bx=0.0)
    u = expm_unitary(h, dt)
    rho = initial_joint_state(params)
    outcomes = np.empty(n_steps, dtype=np.int64)
    probs = np.empty(n_steps, dtype=np.float64)
    for i in range(n_steps):
        rho = u @ rho @ u.conj().T
        k, rho, p_k = measure_system(rho, basis, rng)
        outcomes[i] = k
        probs[i] = p_k
    return Trajectory(dt=dt, basis=basis.copy(), outcomes=outcomes,
                      probabilities=probs, seed=seed, params=params)


def reduced_bloch(rho: np.ndarray) -> np.ndarray:
    """(x, y, z) expectation values of the qubit, the first tensor factor."""
    d_rest = rho.shape[0] // 2
    red = partial_trace(rho, (2, d_rest), keep=0) if d_rest > 1 else rho
    return np.array([np.trace(red @ s).real for s in (SIGMA_X, SIGMA_Y, SIGMA_Z)])


def free_bloch_trajectory(params: SystemParams, n_steps: int, dt: float,
                          rho0: np.ndarray | None = None, bx: float = 0.0):
    """Reduced Bloch vector at times 0, dt, ..., n_steps*dt under a constant drive."""
    h = build_hamiltonian(params, bx=bx)
    u = expm_unitary(h, dt)
    rho = initial_joint_state(params) if rho0 is None else rho0
    times = dt * np.arange(n_steps + 1)
    bloch = np.empty((n_steps + 1, 3))
    bloch[0] = reduced_bloch(rho)
    for i in range(1, n_steps + 1):
        rho = u @ rho @ u.conj().T
        bloch[i] = reduced_bloch(rho)
    return times, bloch


def _psd_sqrt(rho: np.ndarray) -> np.ndarray:
    w, v = herm_eig(hermitian_part(rho))
    if w.min() < -1e-9:
        raise ValueError(f"matrix square root of non-positive matrix (min eig {w.min():.3e})")
    return (v * np.sqrt(np.clip(w, 0.0, None))) @ v.conj().T


def fidelity(rho: np.ndarray, sigma: np.ndarray) -> float:
    """Uhlmann fidelity tr sqrt(sqrt(sigma) rho sqrt(sigma)).

    Computed as the nuclear norm of sqrt(rho) sqrt(sigma), which equals the
    trace of the square root above but is symmetric in the arguments by
    construction. F(|0><0|, 1/2) = 1/sqrt(2) in this convention.
    """
    s = np.linalg.svd(_psd_sqrt(rho) @ _psd_sqrt(sigma), compute_uv=False)
    return float(min(s.sum(), 1.0 + 1e-9))


def separability(rho: np.ndarray, d_first: int) -> float:
    """Fidelity between a bipartite state and the product of its marginals.

    Equals 1 exactly on product states and drops toward 0 with correlation;
    a maximally entangled two-qubit state gives 1/2.
    """
    d_second = rho.shape[0] // d_first
    a = partial_trace(rho, (d_first, d_second), keep=0)
    b = partial_trace(rho, (d_first, d_second), keep=1)
    return fidelity(rho, kron(a, b))
