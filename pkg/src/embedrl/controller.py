"""Online actor-critic control of the learned embedding model.

The agent observes the full model state (system plus effective reservoir),
picks one of a small set of transverse-field amplitudes, and is rewarded
with fidelity-to-target times separability minus one.  Policy and value
function are small dense networks trained online with undiscounted
temporal-difference errors and plain stochastic gradient steps.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

from .linalg import (
    PSD_TOL,
    NumericalError,
    partial_trace,
    unvec,
    vec,
)
from .embedding import (
    EmbeddingModel,
    control_generator,
    generator_superoperator,
)
from .spinboson import (
    KET_GROUND,
    SystemParams,
    build_hamiltonian,
    evolve,
    fidelity,
    initial_joint_state,
    inverse_cdf_index,
    separability,
)

__all__ = [
    "ControlConfig",
    "ControlEnv",
    "DenseNet",
    "EpisodeRecord",
    "EvalReport",
    "PolicyValueParams",
    "action_grid",
    "actor_critic_update",
    "evaluate_policy",
    "featurize",
    "free_evolution_fidelity",
    "ground_state_target",
    "init_policy_value",
    "log_softmax",
    "net_backward",
    "net_forward",
    "net_init",
    "reward",
    "replay_on_simulator",
    "softmax",
    "td_error",
    "train_controller",
    "unfeaturize",
    "value_bounds",
]

def value_bounds(horizon: int) -> tuple:
    """Admissible critic-output range used as a divergence guard.

    True values lie in [-horizon, 0]; estimates overshoot both ends while
    the policy is still moving, so the guard leaves generous margins and
    only trips on runaway behaviour.
    """
    return -2.0 * (horizon + 1.0), 0.5 * (horizon + 1.0)


# ---------------------------------------------------------------------------
# observation
# ---------------------------------------------------------------------------

def featurize(rho: np.ndarray) -> np.ndarray:
    """Flatten a density matrix into a real feature vector.

    The first d^2 entries are the real parts, the last d^2 the imaginary
    parts, both in row-major order, so equal states map to equal vectors.
    """
    rho = np.asarray(rho)
    return np.concatenate([rho.real.ravel(), rho.imag.ravel()])


def unfeaturize(x: np.ndarray, d: int) -> np.ndarray:
    """Invert ``featurize`` for a d x d matrix."""
    x = np.asarray(x, dtype=float)
    if x.shape != (2 * d * d,):
        raise ValueError(f"expected {2 * d * d} features, got {x.shape}")
    re = x[: d * d].reshape(d, d)
    im = x[d * d :].reshape(d, d)
    return re + 1j * im


# ---------------------------------------------------------------------------
# dense networks with explicit gradients
# ---------------------------------------------------------------------------

@dataclass
class DenseNet:
    """Fully connected network with tanh hidden layers and a linear head."""

    weights: list
    biases: list

    @property
    def sizes(self) -> tuple:
        return tuple([self.weights[0].shape[1]] + [w.shape[0] for w in self.weights])

    def copy(self) -> "DenseNet":
        return DenseNet([w.copy() for w in self.weights], [b.copy() for b in self.biases])


def net_init(sizes, rng: np.random.Generator, scale: float | None = None) -> DenseNet:
    """Create a network with randn / sqrt(fan_in) weights and zero biases."""
    weights = []
    biases = []
    for n_in, n_out in zip(sizes[:-1], sizes[1:]):
        width = scale if scale is not None else 1.0 / np.sqrt(n_in)
        weights.append(rng.standard_normal((n_out, n_in)) * width)
        biases.append(np.zeros(n_out))
    return DenseNet(weights, biases)


def net_forward(net: DenseNet, x: np.ndarray):
    """Run the forward pass, returning the output and hidden activations."""
    x = np.asarray(x, dtype=float)
    if x.shape != (net.weights[0].shape[1],):
        raise ValueError(f"input shape {x.shape} does not match net input {net.weights[0].shape[1]}")
    activations = [x]
    a = x
    last = len(net.weights) - 1
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        z = w @ a + b
        a = z if i == last else np.tanh(z)
        activations.append(a)
    return a, activations


def net_backward(net: DenseNet, x: np.ndarray, upstream: np.ndarray, activations=None):
    """Exact gradients of upstream . output with respect to all weights.

    ``upstream`` holds the partial derivatives of the scalar objective with
    respect to each output unit; the return value is a list of (dW, db)
    pairs aligned with ``net.weights``.
    """
    if activations is None:
        _, activations = net_forward(net, x)
    upstream = np.asarray(upstream, dtype=float)
    if upstream.shape != (net.weights[-1].shape[0],):
        raise ValueError("upstream shape does not match net output")
    grads = [None] * len(net.weights)
    delta = upstream
    for i in range(len(net.weights) - 1, -1, -1):
        a_prev = activations[i]
        grads[i] = (np.outer(delta, a_prev), delta.copy())
        if i > 0:
            delta = (net.weights[i].T @ delta) * (1.0 - activations[i] ** 2)
    return grads


def _apply_gradients(net: DenseNet, grads, step: float) -> None:
    for (w, b), (dw, db) in zip(zip(net.weights, net.biases), grads):
        w += step * dw
        b += step * db


def softmax(logits: np.ndarray) -> np.ndarray:
    z = np.asarray(logits, dtype=float)
    z = z - z.max()
    e = np.exp(z)
    return e / e.sum()


def log_softmax(logits: np.ndarray) -> np.ndarray:
    z = np.asarray(logits, dtype=float)
    z = z - z.max()
    return z - np.log(np.exp(z).sum())


# ---------------------------------------------------------------------------
# agent parameters
# ---------------------------------------------------------------------------

@dataclass
class PolicyValueParams:
    """Policy and value networks with their learning rates."""

    policy: DenseNet
    value: DenseNet
    lr_actor: float = 1e-4
    lr_critic: float = 1e-3

    def copy(self) -> "PolicyValueParams":
        return PolicyValueParams(self.policy.copy(), self.value.copy(), self.lr_actor, self.lr_critic)


def init_policy_value(
    n_features: int,
    n_actions: int,
    hidden=(64, 64),
    seed: int = 0,
    lr_actor: float = 1e-4,
    lr_critic: float = 1e-3,
    scale: float | None = None,
) -> PolicyValueParams:
    """Build fresh policy and value networks from one seed."""
    ss = np.random.SeedSequence(seed)
    child_p, child_v = ss.spawn(2)
    sizes_p = (n_features, *hidden, n_actions)
    sizes_v = (n_features, *hidden, 1)
    policy = net_init(sizes_p, np.random.Generator(np.random.PCG64(child_p)), scale)
    value = net_init(sizes_v, np.random.Generator(np.random.PCG64(child_v)), scale)
    return PolicyValueParams(policy, value, lr_actor, lr_critic)


def policy_probs(params: PolicyValueParams, x: np.ndarray) -> np.ndarray:
    logits, _ = net_forward(params.policy, x)
    return softmax(logits)


def state_value(params: PolicyValueParams, x: np.ndarray) -> float:
    out, _ = net_forward(params.value, x)
    return float(out[0])


# ---------------------------------------------------------------------------
# reward and temporal-difference error
# ---------------------------------------------------------------------------

def ground_state_target() -> np.ndarray:
    """Ground-state density matrix of the qubit."""
    return np.outer(KET_GROUND, KET_GROUND.conj())


def reward(rho_joint: np.ndarray, rho_target: np.ndarray, d_s: int):
    """Fidelity-times-separability reward, shifted to be at most zero.

    Returns (r, F, D) where r = F * D - 1, F is the fidelity of the system
    marginal to the target, and D measures how close the joint state is to
    the product of its marginals.
    """
    d = rho_joint.shape[0]
    if d % d_s != 0:
        raise ValueError("joint dimension is not a multiple of the system dimension")
    d_env = d // d_s
    marginal = partial_trace(rho_joint, (d_s, d_env), 0)
    f = fidelity(marginal, rho_target)
    dsep = separability(rho_joint, d_s)
    return f * dsep - 1.0, f, dsep


def td_error(r: float, v_now: float, v_next: float, terminal: bool) -> float:
    """Undiscounted temporal-difference error with zero terminal value."""
    bootstrap = 0.0 if terminal else v_next
    return r + bootstrap - v_now


def actor_critic_update(params: PolicyValueParams, x: np.ndarray, action: int, delta: float) -> PolicyValueParams:
    """One online update of both networks at the visited state and action.

    The critic moves along delta * grad V(x); the actor ascends
    delta * grad log pi(action | x).
    """
    _, acts_v = net_forward(params.value, x)
    grads_v = net_backward(params.value, x, np.ones(1), acts_v)
    _apply_gradients(params.value, grads_v, params.lr_critic * delta)

    logits, acts_p = net_forward(params.policy, x)
    probs = softmax(logits)
    upstream = -probs
    upstream[action] += 1.0
    grads_p = net_backward(params.policy, x, upstream, acts_p)
    _apply_gradients(params.policy, grads_p, params.lr_actor * delta)
    return params


# ---------------------------------------------------------------------------
# control environment on the learned model
# ---------------------------------------------------------------------------

def action_grid(n_levels: int, b_max: float) -> np.ndarray:
    """Evenly spaced symmetric field amplitudes including zero for odd n."""
    if n_levels < 1:
        raise ValueError("need at least one action level")
    return np.linspace(-b_max, b_max, n_levels)


@dataclass
class ControlConfig:
    """Knobs of the control task."""

    action_levels: tuple = tuple(np.linspace(-1.0, 1.0, 9))
    horizon: int = 50
    alpha: float = -0.01
    episodes: int = 3000
    seed: int = 0
    g: float = 2.0
    lr_actor: float = 1e-4
    lr_critic: float = 1e-3
    hidden: tuple = (64, 64)
    target: np.ndarray | None = None

    def __post_init__(self):
        levels = tuple(float(v) for v in self.action_levels)
        if len(levels) == 0:
            raise ValueError("action_levels must be nonempty")
        if abs(sum(levels)) > 1e-12 * (1.0 + max(abs(v) for v in levels)):
            raise ValueError("action_levels must be symmetric about zero")
        object.__setattr__(self, "action_levels", levels)
        if not (-1.0 < self.alpha < 0.0):
            raise ValueError("alpha must lie in (-1, 0)")
        if self.horizon < 1:
            raise ValueError("horizon must be positive")
        if self.episodes < 0:
            raise ValueError("episodes must be nonnegative")
        if self.target is None:
            object.__setattr__(self, "target", ground_state_target())


class ControlEnv:
    """Discrete-action environment stepping the learned model generator.

    One propagator per field level is precomputed as exp((L + L_c) dt) in
    superoperator form, so a step is a single matrix-vector product.
    """

    def __init__(self, model: EmbeddingModel, cfg: ControlConfig):
        self.model = model
        self.cfg = cfg
        self.d = model.d
        gen = generator_superoperator(model)
        self.propagators = []
        for bx in cfg.action_levels:
            lc = control_generator(bx, cfg.g, model.d_s, model.d_er)
            self.propagators.append(expm((gen + lc) * model.dt))
        self.target = np.asarray(cfg.target, dtype=complex)
        if self.target.shape != (model.d_s, model.d_s):
            raise ValueError("target dimension does not match the model system")

    def reset(self) -> np.ndarray:
        """Initial joint state: excited system, reference reservoir."""
        excited = np.zeros((self.model.d_s, self.model.d_s), dtype=complex)
        excited[0, 0] = 1.0
        return np.kron(excited, self.model.rho_er0)

    def step(self, rho: np.ndarray, action: int, step_index: int):
        """Apply one control interval and score the resulting state."""
        out = unvec(self.propagators[action] @ vec(rho))
        out = 0.5 * (out + out.conj().T)
        if np.linalg.eigvalsh(out).min() < -PSD_TOL:
            raise NumericalError("control propagation produced a non-positive state")
        out /= np.trace(out).real
        r, f, dsep = reward(out, self.target, self.model.d_s)
        done_reward = r > self.cfg.alpha
        done_horizon = step_index + 1 >= self.cfg.horizon
        info = {
            "fidelity": f,
            "separability": dsep,
            "reason": "reward" if done_reward else ("horizon" if done_horizon else ""),
        }
        return out, r, done_reward or done_horizon, info


# ---------------------------------------------------------------------------
# training
# ---------------------------------------------------------------------------

@dataclass
class EpisodeRecord:
    """Per-episode summary collected during training or evaluation."""

    episode: int
    steps: int
    total_return: float
    final_fidelity: float
    final_separability: float
    reason: str


def train_controller(
    model: EmbeddingModel,
    cfg: ControlConfig,
    params: PolicyValueParams | None = None,
    verbose: bool = False,
):
    """Run online actor-critic episodes on the learned model.

    Returns the trained parameters and the list of EpisodeRecord entries
    (one per episode, in order).  Pass ``params`` to continue training an
    existing agent instead of starting from a fresh initialization.
    """
    env = ControlEnv(model, cfg)
    n_features = 2 * env.d * env.d
    if params is None:
        params = init_policy_value(
            n_features,
            len(cfg.action_levels),
            hidden=cfg.hidden,
            seed=cfg.seed,
            lr_actor=cfg.lr_actor,
            lr_critic=cfg.lr_critic,
        )
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(cfg.seed).spawn(3)[2]))
    curve = []
    bound_lo, bound_hi = value_bounds(cfg.horizon)
    for episode in range(cfg.episodes):
        rho = env.reset()
        x = featurize(rho)
        total = 0.0
        info = {"fidelity": 0.0, "separability": 1.0, "reason": ""}
        steps = 0
        for t in range(cfg.horizon):
            probs = policy_probs(params, x)
            a = inverse_cdf_index(probs, rng.random())
            rho_next, r, done, info = env.step(rho, a, t)
            x_next = featurize(rho_next)
            v_now = state_value(params, x)
            v_next = 0.0 if done else state_value(params, x_next)
            if not (bound_lo <= v_now <= bound_hi):
                raise NumericalError(
                    f"value estimate {v_now:.3f} left the admissible range "
                    f"[{bound_lo:.1f}, {bound_hi:.1f}] at episode {episode}"
                )
            delta = td_error(r, v_now, v_next, done)
            actor_critic_update(params, x, a, delta)
            total += r
            steps = t + 1
            rho, x = rho_next, x_next
            if done:
                break
        curve.append(
            EpisodeRecord(episode, steps, total, info["fidelity"], info["separability"], info["reason"])
        )
        if verbose and (episode + 1) % 200 == 0:
            recent = curve[-200:]
            mean_ret = float(np.mean([c.total_return for c in recent]))
            mean_f = float(np.mean([c.final_fidelity for c in recent]))
            print(
                f"episode {episode + 1:5d}  mean return {mean_ret:8.3f}  mean final F {mean_f:.4f}",
                flush=True,
            )
    return params, curve


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------

@dataclass
class EvalReport:
    """Evaluation results: per-episode records plus per-step detail."""

    episodes: list
    actions: list = field(default_factory=list)
    step_logs: list = field(default_factory=list)

    @property
    def mean_final_fidelity(self) -> float:
        return float(np.mean([e.final_fidelity for e in self.episodes]))

    @property
    def mean_final_reward_term(self) -> float:
        return float(np.mean([e.final_fidelity * e.final_separability for e in self.episodes]))

    @property
    def mean_steps(self) -> float:
        return float(np.mean([e.steps for e in self.episodes]))


def _model_episode(params: PolicyValueParams, env: ControlEnv, cfg: ControlConfig, rng=None):
    """One episode on the model; greedy when rng is None, else sampled."""
    rho = env.reset()
    actions = []
    log = []
    total = 0.0
    info = {"fidelity": 0.0, "separability": 1.0, "reason": ""}
    for t in range(cfg.horizon):
        probs = policy_probs(params, featurize(rho))
        a = int(np.argmax(probs)) if rng is None else inverse_cdf_index(probs, rng.random())
        rho, r, done, info = env.step(rho, a, t)
        actions.append(a)
        total += r
        log.append((t, cfg.action_levels[a], info["fidelity"], info["separability"], r))
        if done:
            break
    return actions, total, info, log


def replay_on_simulator(actions, cfg: ControlConfig, system: SystemParams, dt: float, target: np.ndarray):
    """Apply a fixed action sequence to the true qubit-plus-bath dynamics.

    Each interval evolves unitarily under the full Hamiltonian with the
    chosen transverse field; no measurements are made.  Returns the per-step
    log of (step, Bx, F, D, r) against the true joint state.
    """
    rho = initial_joint_state(system)
    hams = {}
    log = []
    for t, a in enumerate(actions):
        bx = cfg.action_levels[a]
        if bx not in hams:
            hams[bx] = build_hamiltonian(system, bx=bx)
        rho = evolve(rho, hams[bx], dt)
        marginal = partial_trace(rho, system.dims, 0)
        f = fidelity(marginal, target)
        dsep = separability(rho, 2)
        log.append((t, bx, f, dsep, f * dsep - 1.0))
    return log


def free_evolution_fidelity(system: SystemParams, dt: float, steps: int, target: np.ndarray) -> float:
    """Fidelity of the true reduced state to the target after free evolution."""
    rho = initial_joint_state(system)
    h = build_hamiltonian(system, bx=0.0)
    for _ in range(steps):
        rho = evolve(rho, h, dt)
    return fidelity(partial_trace(rho, system.dims, 0), target)


def evaluate_policy(
    params: PolicyValueParams,
    model: EmbeddingModel,
    cfg: ControlConfig,
    episodes: int = 1,
    mode: str = "model",
    system: SystemParams | None = None,
    greedy: bool = True,
    seed: int | None = None,
) -> EvalReport:
    """Score a policy on the learned model or replayed on the simulator.

    In ``model`` mode each episode runs on the learned dynamics.  In
    ``true`` mode the greedy action sequence is still chosen on the model
    (the agent only ever observes the model state) and then replayed through
    the exact qubit-plus-bath evolution; fidelity and separability are then
    measured on the true state at the same steps.
    """
    if mode not in ("model", "true"):
        raise ValueError("mode must be 'model' or 'true'")
    if mode == "true" and system is None:
        raise ValueError("true mode needs the simulator parameters")
    env = ControlEnv(model, cfg)
    rng = None
    if not greedy:
        rng = np.random.Generator(np.random.PCG64(cfg.seed if seed is None else seed))
    records = []
    all_actions = []
    step_logs = []
    for episode in range(episodes):
        actions, total, info, log = _model_episode(params, env, cfg, rng)
        if mode == "true":
            log = replay_on_simulator(actions, cfg, system, model.dt, np.asarray(cfg.target))
            _, _, f, dsep, r = log[-1]
            total = sum(row[4] for row in log)
            reason = info["reason"]
            records.append(EpisodeRecord(episode, len(actions), total, f, dsep, reason))
        else:
            records.append(
                EpisodeRecord(episode, len(actions), total, info["fidelity"], info["separability"], info["reason"])
            )
        all_actions.append(actions)
        step_logs.append(log)
    return EvalReport(records, all_actions, step_logs)
