"""Maximum likelihood fit of the embedding Hamiltonian to a measurement record.

The likelihood of an outcome sequence k_1..k_n factorizes into conditional
probabilities c_i through a scaled two-sided recursion over post-measurement
states rho_i and effect operators E_i (both kept at unit pairing, so every
intermediate stays O(1) no matter how long the record is):

    forward   rho_i = P_i Phi[rho_{i-1}] P_i / c_i,   c_i = tr(P_i Phi[rho_{i-1}])
    backward  E_i   = Phi^dag[P_{i+1} E_{i+1} P_{i+1}] / c_{i+1},   E_n = 1

with log p = sum_i log c_i. The gradient of log p with respect to every
entry of the Hermitian generator H of the step unitary U = exp(-i H dt) is
assembled analytically from the divided differences of the exponential on
the spectrum of H (the entrywise derivative of U in its own eigenbasis).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .embedding import EmbeddingModel, kraus_superoperator, stinespring_unitary
from .linalg import NumericalError, herm_eig, hermitian_part, kron, vec
from .spinboson import Trajectory


# ---------------------------------------------------------------------------
# likelihood recursions


@dataclass
class LikelihoodCache:
    """Everything the gradient needs from one sweep over the record.

    forward[i] is the normalized post-measurement state after step i
    (forward[0] is the initial state), backward[i] the matching effect with
    tr(forward[i] @ backward[i]) = 1, cond_probs[i] the conditional
    probability of outcome i+1.
    """

    forward: np.ndarray
    backward: np.ndarray
    cond_probs: np.ndarray
    log_p: float


def measurement_projectors(basis: np.ndarray, d_er: int) -> np.ndarray:
    """Outcome projectors |psi_k><psi_k| kron 1_er, stacked along axis 0."""
    eye = np.eye(d_er, dtype=complex)
    return np.stack([kron(np.outer(basis[:, k], basis[:, k].conj()), eye)
                     for k in range(basis.shape[1])])


def excited_system_state(d_s: int) -> np.ndarray:
    rho = np.zeros((d_s, d_s), dtype=complex)
    rho[0, 0] = 1.0
    return rho


def forward_backward(model: EmbeddingModel, rho0_s: np.ndarray,
                     traj: Trajectory) -> LikelihoodCache:
    """Scaled forward and backward sweeps for one outcome record."""
    d = model.d
    if traj.basis.shape[0] != model.d_s:
        raise ValueError("trajectory basis dimension does not match the model system")
    u = stinespring_unitary(model)
    m = kraus_superoperator(model, u)
    projs = measurement_projectors(traj.basis, model.d_er)
    # vec-space matrices: one projected channel per outcome for the forward
    # sweep, the adjoints for the backward sweep
    p_super = np.stack([np.kron(p.T, p) for p in projs])
    fwd_ops = p_super @ m
    m_adj = m.conj().T
    outcomes = np.asarray(traj.outcomes)
    n = len(outcomes)

    diag_idx = np.arange(d) * (d + 1)
    fw = np.empty((n + 1, d * d), dtype=complex)
    bw = np.empty((n + 1, d * d), dtype=complex)
    cond = np.empty(n, dtype=float)

    v = vec(kron(rho0_s, model.rho_er0)).astype(complex)
    fw[0] = v
    for i in range(n):
        v = fwd_ops[outcomes[i]] @ v
        c = v[diag_idx].sum().real
        if not np.isfinite(c) or c < 1e-300:
            raise NumericalError(
                f"forward_backward: conditional probability {c!r} at step {i + 1}; "
                "the model assigns (near-)zero likelihood to the record"
            )
        v = v / c
        cond[i] = c
        fw[i + 1] = v

    b = vec(np.eye(d, dtype=complex))
    bw[n] = b
    for i in range(n - 1, -1, -1):
        b = m_adj @ (p_super[outcomes[i]] @ b) / cond[i]
        bw[i] = b

    return LikelihoodCache(forward=fw, backward=bw, cond_probs=cond,
                           log_p=float(np.log(cond).sum()))


# ---------------------------------------------------------------------------
# analytic gradient


def frechet_coeffs(eigvals: np.ndarray, dt: float) -> np.ndarray:
    """Divided differences of z -> exp(-i z dt) on the spectrum.

    Gamma[k, l] = (exp(-i w_k dt) - exp(-i w_l dt)) / (w_k - w_l), with the
    confluent limit -i dt exp(-i w dt) (evaluated at the pair midpoint) taking
    over when |w_k - w_l| <= 1e-9 * (1 + max |w|). These are the coefficients
    of the derivative of the matrix exponential in the eigenbasis.
    """
    w = np.asarray(eigvals, dtype=float)
    delta = 1e-9 * (1.0 + np.abs(w).max())
    diff = w[:, None] - w[None, :]
    phases = np.exp(-1j * w * dt)
    degenerate = np.abs(diff) <= delta
    num = phases[:, None] - phases[None, :]
    gamma = num / np.where(degenerate, 1.0, diff)
    mid = 0.5 * (w[:, None] + w[None, :])
    return np.where(degenerate, -1j * dt * np.exp(-1j * mid * dt), gamma)


def _entrywise_grad_matrix(model: EmbeddingModel, cache: LikelihoodCache,
                           traj: Trajectory, chunk: int = 4096) -> np.ndarray:
    """Complex matrix G with G[mu, nu] = d log p / d H[mu, nu], entries of H
    treated as independent (both U and U^dag differentiated)."""
    d, d_a = model.d, model.d_a
    h = hermitian_part(model.h)
    w, v = herm_eig(h)
    u = (v * np.exp(-1j * w * model.dt)) @ v.conj().T
    gamma = frechet_coeffs(w, model.dt)
    projs = measurement_projectors(traj.basis, model.d_er)
    outcomes = np.asarray(traj.outcomes)
    n = len(outcomes)

    states = cache.forward.reshape(n + 1, d, d).transpose(0, 2, 1)  # unvec rows
    effects = cache.backward.reshape(n + 1, d, d).transpose(0, 2, 1)

    # r4[a, e, g, c] = sum_i rho_i[a, e] B_i[g, c] / c_{i+1}
    # where B_i = P_{i+1} backward_{i+1} P_{i+1}
    r4 = np.zeros((d, d, d, d), dtype=complex)
    for lo in range(0, n, chunk):
        hi = min(lo + chunk, n)
        p = projs[outcomes[lo:hi]]
        b = p @ effects[lo + 1:hi + 1] @ p
        weighted = states[lo:hi] / cache.cond_probs[lo:hi, None, None]
        r4 += np.einsum("nae,ngc->aegc", weighted, b)

    # W = sum_i (rho_i kron rho_a) U^dag (B_i kron 1_a) / c_{i+1}
    ud4 = u.conj().T.reshape(d, d_a, d, d_a)
    w_sum = np.einsum("aegc,bf,efgd->abcd", r4, model.rho_a, ud4,
                      optimize=True).reshape(model.d_total, model.d_total)
    z = v.conj().T @ w_sum @ v
    return v.conj() @ (gamma * z.T + gamma.conj() * z.conj()) @ v.T


# ---------------------------------------------------------------------------
# Hermitian parameterization: diagonal, then Re / Im of the upper triangle


def hermitian_to_params(h: np.ndarray) -> np.ndarray:
    d = h.shape[0]
    iu = np.triu_indices(d, k=1)
    return np.concatenate([np.diag(h).real, h[iu].real, h[iu].imag])


def params_to_hermitian(theta: np.ndarray, d: int) -> np.ndarray:
    m = d * (d - 1) // 2
    if theta.size != d * d:
        raise ValueError(f"parameter vector has length {theta.size}, expected {d * d}")
    iu = np.triu_indices(d, k=1)
    h = np.zeros((d, d), dtype=complex)
    h[iu] = theta[d:d + m] + 1j * theta[d + m:]
    h = h + h.conj().T
    h[np.diag_indices(d)] = theta[:d]
    return h


def grad_log_prob(model: EmbeddingModel, cache: LikelihoodCache,
                  traj: Trajectory, imag_tol: float = 1e-8) -> np.ndarray:
    """Real gradient of log p in the Hermitian parameterization.

    The derivative along the real part of an off-diagonal pair is
    G[mu, nu] + G[nu, mu], along the imaginary part i (G[mu, nu] - G[nu, mu]),
    and along a diagonal entry G[mu, mu]. Each of those combinations must be
    real for a real objective; their residual imaginary parts are asserted
    below the given tolerance.
    """
    g = _entrywise_grad_matrix(model, cache, traj)
    d = g.shape[0]
    iu = np.triu_indices(d, k=1)
    g_diag = np.diag(g)
    g_re = g[iu] + g.T[iu]
    g_im = 1j * (g[iu] - g.T[iu])
    residue = max(np.abs(g_diag.imag).max(initial=0.0),
                  np.abs(g_re.imag).max(initial=0.0),
                  np.abs(g_im.imag).max(initial=0.0))
    if residue > imag_tol:
        raise NumericalError(
            f"grad_log_prob: assembled gradient has imaginary residue {residue:.3e}"
        )
    return np.concatenate([g_diag.real, g_re.real, g_im.real])


# ---------------------------------------------------------------------------
# optimizer


@dataclass
class AdamState:
    """First and second moment accumulators for gradient ascent."""

    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: np.ndarray | None = None
    v: np.ndarray | None = None


def adam_step(theta: np.ndarray, grad: np.ndarray, state: AdamState) -> np.ndarray:
    """One ascent step; the state is updated in place."""
    if state.m is None:
        state.m = np.zeros_like(theta)
        state.v = np.zeros_like(theta)
    state.t += 1
    state.m = state.beta1 * state.m + (1 - state.beta1) * grad
    state.v = state.beta2 * state.v + (1 - state.beta2) * grad * grad
    m_hat = state.m / (1 - state.beta1 ** state.t)
    v_hat = state.v / (1 - state.beta2 ** state.t)
    return theta + state.lr * m_hat / (np.sqrt(v_hat) + state.eps)


# ---------------------------------------------------------------------------
# training loop


@dataclass
class TrainOptions:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    max_epochs: int = 2000
    window: int = 50
    tol: float = 1e-6
    # halve the step size when the best value stops improving for a full
    # window; lets the deterministic objective settle below tol instead of
    # limit-cycling at constant step size
    lr_halving: bool = True
    lr_min: float = 1e-7
    # optional speed knob: fit on contiguous segments of this length, with the
    # reservoir re-initialized at each segment boundary (approximation)
    window_length: int | None = None
    verbose: bool = False


@dataclass
class TrainReport:
    log_geo_curve: np.ndarray
    stop_reason: str
    epochs: int


def _segments(traj: Trajectory, rho0_s: np.ndarray, length: int | None):
    """(initial system state, outcome slice) pairs; one pair without windowing."""
    if length is None or length >= len(traj):
        return [(rho0_s, slice(0, len(traj)))]
    segs = []
    for lo in range(0, len(traj), length):
        if lo == 0:
            segs.append((rho0_s, slice(0, min(length, len(traj)))))
        else:
            ket = traj.basis[:, traj.outcomes[lo - 1]]
            segs.append((np.outer(ket, ket.conj()), slice(lo, min(lo + length, len(traj)))))
    return segs


def train(model: EmbeddingModel, traj: Trajectory,
          opts: TrainOptions | None = None,
          rho0_s: np.ndarray | None = None) -> tuple[EmbeddingModel, TrainReport]:
    """Gradient-ascent fit of the embedding Hamiltonian.

    Stops when the per-measurement log likelihood (log geometric mean of the
    conditional probabilities) varies by less than ``tol`` across the last
    ``window`` epochs, or at ``max_epochs``. The returned model carries the
    parameters whose likelihood is the last recorded value.
    """
    opts = opts or TrainOptions()
    if rho0_s is None:
        rho0_s = excited_system_state(model.d_s)
    d_total = model.d_total
    theta = hermitian_to_params(hermitian_part(model.h))
    adam = AdamState(lr=opts.lr, beta1=opts.beta1, beta2=opts.beta2, eps=opts.eps)
    segs = _segments(traj, rho0_s, opts.window_length)
    n = len(traj)

    curve = []
    stop_reason = "max_epochs"
    best = -np.inf
    best_epoch = 0
    last_halve = 0
    current = model
    for epoch in range(opts.max_epochs):
        h = params_to_hermitian(theta, d_total)
        current = EmbeddingModel(model.d_s, model.d_er, model.d_a, model.dt,
                                 h, model.rho_er0, model.rho_a)
        log_p = 0.0
        grad = np.zeros_like(theta)
        for rho0_seg, sl in segs:
            sub = traj if len(segs) == 1 else Trajectory(
                dt=traj.dt, basis=traj.basis, outcomes=traj.outcomes[sl],
                probabilities=traj.probabilities[sl], seed=traj.seed)
            cache = forward_backward(current, rho0_seg, sub)
            log_p += cache.log_p
            grad += grad_log_prob(current, cache, sub)
        curve.append(log_p / n)
        if opts.verbose and epoch % 25 == 0:
            print(f"epoch {epoch:5d}  log geo mean {curve[-1]:+.9f}  lr {adam.lr:.2e}")
        if curve[-1] > best:
            best = curve[-1]
            best_epoch = epoch
        if len(curve) > opts.window:
            tail = curve[-(opts.window + 1):]
            if max(tail) - min(tail) < opts.tol:
                stop_reason = "converged"
                break
        if (opts.lr_halving and adam.lr > opts.lr_min
                and epoch - best_epoch >= opts.window
                and epoch - last_halve >= opts.window):
            adam.lr = max(adam.lr * 0.5, opts.lr_min)
            last_halve = epoch
        theta = adam_step(theta, grad, adam)

    report = TrainReport(log_geo_curve=np.array(curve), stop_reason=stop_reason,
                         epochs=len(curve))
    return current, report
