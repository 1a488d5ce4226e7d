"""Learnable Markovian embedding of the observed qubit.

The qubit (dimension d_s) is paired with an effective reservoir (d_er) whose
joint state evolves one measurement interval at a time through a channel in
Stinespring form:

    Phi[rho] = tr_A( U (rho kron rho_a) U^dag ),   U = exp(-i H dt)

where the ancilla A has dimension d_a = d_s * d_er and H is the only
learnable object. The reservoir starts maximally mixed and the ancilla is
reset to |0><0| before every step, which keeps the map identical at each
step and CPTP by construction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .linalg import (
    NumericalError,
    PSD_TOL,
    expm_unitary,
    hermitian_part,
    kron,
    logm_principal,
    partial_trace,
    superop_of_channel,
    unvec,
    vec,
)


@dataclass
class EmbeddingModel:
    """Channel parameters plus the fixed reference states.

    h lives on system x reservoir x ancilla and must stay Hermitian;
    rho_er0 is the reservoir part of the initial condition and rho_a the
    ancilla reset state.
    """

    d_s: int
    d_er: int
    d_a: int
    dt: float
    h: np.ndarray
    rho_er0: np.ndarray
    rho_a: np.ndarray

    @property
    def d(self) -> int:
        """Dimension the channel acts on (system x reservoir)."""
        return self.d_s * self.d_er

    @property
    def d_total(self) -> int:
        return self.d_s * self.d_er * self.d_a

    def validate(self) -> None:
        if self.d_a != self.d:
            raise ValueError(f"ancilla dimension {self.d_a} != d_s*d_er = {self.d}")
        if self.h.shape != (self.d_total, self.d_total):
            raise ValueError(f"h has shape {self.h.shape}, expected {(self.d_total,) * 2}")
        if np.abs(self.h - self.h.conj().T).max() > 1e-10:
            raise ValueError("h must be Hermitian")
        if self.dt <= 0:
            raise ValueError("dt must be positive")


def init_model(d_s: int, d_er: int, dt: float, seed: int, scale: float = 0.1) -> EmbeddingModel:
    """Random Hermitian start: (A + A^dag)/2 with standard normal complex
    entries, scaled by scale/dt so the step unitary starts away from identity
    but well inside the principal branch of the logarithm."""
    d_a = d_s * d_er
    n = d_s * d_er * d_a
    rng = np.random.default_rng(np.random.PCG64(np.random.SeedSequence(seed)))
    a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    h = hermitian_part(a) * (scale / dt)
    rho_a = np.zeros((d_a, d_a), dtype=complex)
    rho_a[0, 0] = 1.0
    return EmbeddingModel(d_s=d_s, d_er=d_er, d_a=d_a, dt=dt, h=h,
                          rho_er0=np.eye(d_er, dtype=complex) / d_er, rho_a=rho_a)


def stinespring_unitary(model: EmbeddingModel) -> np.ndarray:
    return expm_unitary(hermitian_part(model.h), model.dt)


def apply_channel(model: EmbeddingModel, rho: np.ndarray,
                  u: np.ndarray | None = None) -> np.ndarray:
    """One step of the embedded dynamics: adjoin the ancilla, conjugate by
    the step unitary, trace the ancilla back out. Pass a precomputed ``u``
    when applying the same model repeatedly."""
    if u is None:
        u = stinespring_unitary(model)
    full = u @ kron(rho, model.rho_a) @ u.conj().T
    return partial_trace(full, (model.d, model.d_a), keep=0)


def kraus_operators(model: EmbeddingModel, u: np.ndarray | None = None) -> np.ndarray:
    """Kraus operators of the channel, stacked along axis 0.

    For ancilla state rho_a = sum_s q_s |s><s| the operators are
    sqrt(q_s) (1 x <a|) U (1 x |s>) over output index a and eigenpair s.
    """
    if u is None:
        u = stinespring_unitary(model)
    d, d_a = model.d, model.d_a
    u4 = u.reshape(d, d_a, d, d_a)
    q, vecs = np.linalg.eigh(hermitian_part(model.rho_a))
    ops = []
    for s in range(d_a):
        if q[s] < 1e-14:
            continue
        # 1 x <a| U 1 x |s>: contract the ancilla input with eigenvector s
        block = np.einsum("iajb,b->iaj", u4, vecs[:, s])
        ops.append(np.sqrt(q[s]) * block.transpose(1, 0, 2))
    return np.concatenate(ops, axis=0)


def channel_superoperator(model: EmbeddingModel) -> np.ndarray:
    """Column-stacking matrix of the channel, built by applying it to all
    d^2 matrix units."""
    u = stinespring_unitary(model)
    return superop_of_channel(lambda r: apply_channel(model, r, u=u), model.d)


def kraus_superoperator(model: EmbeddingModel, u: np.ndarray | None = None) -> np.ndarray:
    """Same matrix as channel_superoperator via sum_k conj(K_k) kron K_k.

    Cheaper for repeated evaluation; the two constructions are cross-checked
    in the tests.
    """
    ks = kraus_operators(model, u)
    return np.einsum("nab,ncd->acbd", ks.conj(), ks).reshape(model.d ** 2, model.d ** 2)


def choi_matrix(superop: np.ndarray, d: int) -> np.ndarray:
    """Unnormalized Choi matrix sum_ij |i><j| kron Phi(|i><j|).

    Positive semidefinite iff the map is completely positive; its partial
    trace over the output factor equals the identity iff trace preserving.
    """
    c = np.zeros((d * d, d * d), dtype=complex)
    for i in range(d):
        for j in range(d):
            unit = np.zeros((d, d), dtype=complex)
            unit[i, j] = 1.0
            out = unvec(superop @ vec(unit))
            block = np.zeros((d, d), dtype=complex)
            block[i, j] = 1.0
            c += kron(block, out)
    return c


def trace_preservation_error(superop: np.ndarray, d: int) -> float:
    """Max deviation of tr(Phi[rho]) from tr(rho) over a basis of matrix units."""
    choi = choi_matrix(superop, d)
    t = partial_trace(choi, (d, d), keep=0)
    return float(np.abs(t - np.eye(d)).max())


def generator_superoperator(model: EmbeddingModel, roundtrip_tol: float = 1e-8) -> np.ndarray:
    """Effective time-independent generator L with exp(L dt) = M(Phi).

    Principal-branch matrix logarithm of the channel matrix divided by dt.
    The exponential round trip is re-checked with an independent (Pade)
    matrix exponential and must close to ``roundtrip_tol``.
    """
    m = channel_superoperator(model)
    gen = logm_principal(m) / model.dt
    back = scipy.linalg.expm(gen * model.dt)
    err = np.abs(back - m).max()
    if err > roundtrip_tol:
        raise NumericalError(
            f"generator_superoperator: exp(L dt) misses the channel by {err:.3e} "
            f"(> {roundtrip_tol:g}); the log likely crossed a branch cut"
        )
    return gen


def control_generator(bx: float, g: float, d_s: int, d_er: int) -> np.ndarray:
    """Superoperator of rho -> -i [ -(g/2) Bx sx kron 1_er, rho ]."""
    sx = np.array([[0, 1], [1, 0]], dtype=complex)
    hc = -(g / 2) * bx * kron(sx, np.eye(d_er, dtype=complex))
    if d_s != 2:
        raise ValueError("transverse drive control is defined for a qubit system")
    d = d_s * d_er
    eye = np.eye(d, dtype=complex)
    return -1j * (kron(eye, hc) - kron(hc.T, eye))


def step_propagator(model: EmbeddingModel, g: float, bx: float) -> np.ndarray:
    """vec-space propagator for one interval of driven embedded dynamics,
    exp((L + L_c(Bx)) dt)."""
    gen = generator_superoperator(model)
    return scipy.linalg.expm((gen + control_generator(bx, g, model.d_s, model.d_er)) * model.dt)


def model_rollout(model: EmbeddingModel, rho0_s: np.ndarray, steps: int,
                  controls: np.ndarray | None = None, g: float | None = None):
    """Joint system + reservoir states at steps 0..steps.

    Without controls this is plain channel powers. With a control sequence
    each step propagates vec(rho) by exp((L + L_c(Bx)) dt); states are
    re-symmetrized and positivity-checked either way.
    """
    rho = kron(rho0_s, model.rho_er0)
    states = [rho.copy()]
    if controls is None:
        u = stinespring_unitary(model)
        for _ in range(steps):
            rho = hermitian_part(apply_channel(model, rho, u=u))
            states.append(rho)
    else:
        if g is None:
            raise ValueError("controlled rollout needs the qubit coupling g")
        controls = np.asarray(controls, dtype=float)
        if len(controls) != steps:
            raise ValueError(f"{len(controls)} control values for {steps} steps")
        gen = generator_superoperator(model)
        props = {}
        for bx in np.unique(controls):
            lc = control_generator(bx, g, model.d_s, model.d_er)
            props[bx] = scipy.linalg.expm((gen + lc) * model.dt)
        v = vec(rho)
        for bx in controls:
            v = props[bx] @ v
            rho = hermitian_part(unvec(v))
            states.append(rho)
            v = vec(rho)
    for i, s in enumerate(states):
        w_min = np.linalg.eigvalsh(s).min()
        if w_min < -PSD_TOL:
            raise NumericalError(
                f"model_rollout: state at step {i} lost positivity (min eig {w_min:.3e})"
            )
    return states
