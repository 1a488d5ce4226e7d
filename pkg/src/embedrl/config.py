"""Run configuration: strict JSON parsing, defaults, and derived seeds.

One JSON document drives the whole pipeline.  Unknown keys are rejected at
every nesting level so a typo cannot silently fall back to a default.  All
randomness flows from exactly two named seeds: ``learning.seed`` (which also
derives the trajectory-sampling and model-initialization streams) and
``control.seed``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .controller import ControlConfig, action_grid, ground_state_target
from .spinboson import KET_EXCITED, SystemParams, measurement_basis

__all__ = [
    "ConfigError",
    "ControlSection",
    "LearningSection",
    "RunConfig",
    "load_config",
]


class ConfigError(Exception):
    """Invalid or unparseable run configuration."""


def _take(d: dict, context: str) -> dict:
    if not isinstance(d, dict):
        raise ConfigError(f"{context}: expected an object, got {type(d).__name__}")
    return dict(d)


def _check_empty(d: dict, context: str) -> None:
    if d:
        keys = ", ".join(sorted(str(k) for k in d))
        raise ConfigError(f"{context}: unknown key(s): {keys}")


def _pop_number(d: dict, key: str, default, context: str):
    value = d.pop(key, default)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{context}.{key}: expected a number, got {value!r}")
    return value


def _pop_int(d: dict, key: str, default, context: str) -> int:
    value = d.pop(key, default)
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{context}.{key}: expected an integer, got {value!r}")
    return value


@dataclass
class LearningSection:
    """Embedding-learner settings, including the dataset they consume."""

    d_er: int = 5
    dt: float = 0.2
    n_measurements: int = 100_000
    basis: str = "x"
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    max_epochs: int = 2000
    window: int = 50
    tol: float = 1e-6
    seed: int = 0

    def __post_init__(self):
        if self.d_er < 1:
            raise ConfigError("learning.d_er must be at least 1")
        if self.dt <= 0:
            raise ConfigError("learning.dt must be positive")
        if self.n_measurements < 1:
            raise ConfigError("learning.n_measurements must be positive")
        try:
            measurement_basis(self.basis)
        except ValueError as exc:
            raise ConfigError(f"learning.basis: {exc}") from exc

    @property
    def trajectory_seed(self) -> int:
        return int(np.random.SeedSequence(self.seed).generate_state(2)[0])

    @property
    def model_init_seed(self) -> int:
        return int(np.random.SeedSequence(self.seed).generate_state(2)[1])

    @classmethod
    def from_dict(cls, raw: dict) -> "LearningSection":
        d = _take(raw, "learning")
        adam = _take(d.pop("adam", {}), "learning.adam")
        kwargs = dict(
            d_er=_pop_int(d, "d_er", cls.d_er, "learning"),
            dt=float(_pop_number(d, "dt", cls.dt, "learning")),
            n_measurements=_pop_int(d, "n_measurements", cls.n_measurements, "learning"),
            basis=d.pop("basis", cls.basis),
            lr=float(_pop_number(adam, "lr", cls.lr, "learning.adam")),
            beta1=float(_pop_number(adam, "beta1", cls.beta1, "learning.adam")),
            beta2=float(_pop_number(adam, "beta2", cls.beta2, "learning.adam")),
            eps=float(_pop_number(adam, "eps", cls.eps, "learning.adam")),
            max_epochs=_pop_int(d, "max_epochs", cls.max_epochs, "learning"),
            window=_pop_int(d, "window", cls.window, "learning"),
            tol=float(_pop_number(d, "tol", cls.tol, "learning")),
            seed=_pop_int(d, "seed", cls.seed, "learning"),
        )
        _check_empty(adam, "learning.adam")
        _check_empty(d, "learning")
        return cls(**kwargs)

    def to_dict(self) -> dict:
        return {
            "d_er": self.d_er,
            "dt": self.dt,
            "n_measurements": self.n_measurements,
            "basis": self.basis,
            "adam": {"lr": self.lr, "beta1": self.beta1, "beta2": self.beta2, "eps": self.eps},
            "max_epochs": self.max_epochs,
            "window": self.window,
            "tol": self.tol,
            "seed": self.seed,
        }


@dataclass
class ControlSection:
    """Actor-critic settings; targets may be named or given as a matrix."""

    levels: int = 9
    b_max: float | None = None
    horizon: int = 50
    alpha: float = -0.01
    episodes: int = 3000
    lr_actor: float = 1e-4
    lr_critic: float = 1e-3
    hidden: tuple = (64, 64)
    seed: int = 0
    target: object = "ground"

    def __post_init__(self):
        if self.levels < 1:
            raise ConfigError("control.levels must be at least 1")
        if self.horizon < 1:
            raise ConfigError("control.horizon must be at least 1")
        if not (-1.0 < self.alpha < 0.0):
            raise ConfigError("control.alpha must lie in (-1, 0)")
        if self.episodes < 0:
            raise ConfigError("control.episodes must be nonnegative")
        hidden = tuple(self.hidden)
        if not hidden or any((isinstance(h, bool) or not isinstance(h, int) or h < 1) for h in hidden):
            raise ConfigError("control.hidden must be a nonempty list of positive integers")
        self.hidden = hidden

    def target_matrix(self) -> np.ndarray:
        if isinstance(self.target, str):
            if self.target == "ground":
                return ground_state_target()
            if self.target == "excited":
                return np.outer(KET_EXCITED, KET_EXCITED.conj())
            raise ConfigError(f"control.target: unknown name {self.target!r}")
        try:
            rows = [[complex(re, im) for re, im in row] for row in self.target]
            mat = np.array(rows, dtype=complex)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"control.target: expected 'ground', 'excited' or a matrix of [re, im] pairs") from exc
        if mat.shape != (2, 2):
            raise ConfigError("control.target: matrix must be 2x2")
        return mat

    def control_config(self, system: SystemParams) -> ControlConfig:
        b_max = system.b0 if self.b_max is None else self.b_max
        try:
            return ControlConfig(
                action_levels=tuple(action_grid(self.levels, b_max)),
                horizon=self.horizon,
                alpha=self.alpha,
                episodes=self.episodes,
                seed=self.seed,
                g=system.g,
                lr_actor=self.lr_actor,
                lr_critic=self.lr_critic,
                hidden=self.hidden,
                target=self.target_matrix(),
            )
        except ValueError as exc:
            raise ConfigError(f"control: {exc}") from exc

    @classmethod
    def from_dict(cls, raw: dict) -> "ControlSection":
        d = _take(raw, "control")
        target = d.pop("target", cls.target)
        hidden = d.pop("hidden", list(cls.hidden))
        if not isinstance(hidden, (list, tuple)):
            raise ConfigError("control.hidden must be a list")
        b_max = d.pop("b_max", None)
        if b_max is not None and (isinstance(b_max, bool) or not isinstance(b_max, (int, float))):
            raise ConfigError(f"control.b_max: expected a number, got {b_max!r}")
        kwargs = dict(
            levels=_pop_int(d, "levels", cls.levels, "control"),
            b_max=None if b_max is None else float(b_max),
            horizon=_pop_int(d, "horizon", cls.horizon, "control"),
            alpha=float(_pop_number(d, "alpha", cls.alpha, "control")),
            episodes=_pop_int(d, "episodes", cls.episodes, "control"),
            lr_actor=float(_pop_number(d, "lr_actor", cls.lr_actor, "control")),
            lr_critic=float(_pop_number(d, "lr_critic", cls.lr_critic, "control")),
            hidden=tuple(hidden),
            seed=_pop_int(d, "seed", cls.seed, "control"),
            target=target,
        )
        _check_empty(d, "control")
        return cls(**kwargs)

    def to_dict(self) -> dict:
        out = {
            "levels": self.levels,
            "horizon": self.horizon,
            "alpha": self.alpha,
            "episodes": self.episodes,
            "lr_actor": self.lr_actor,
            "lr_critic": self.lr_critic,
            "hidden": list(self.hidden),
            "seed": self.seed,
            "target": self.target,
        }
        if self.b_max is not None:
            out["b_max"] = self.b_max
        return out


def _system_from_dict(raw: dict) -> SystemParams:
    d = _take(raw, "system")
    modes_raw = d.pop("modes", [{"omega": 1.0, "lam": 0.1}])
    if not isinstance(modes_raw, (list, tuple)):
        raise ConfigError("system.modes must be a list")
    modes = []
    for i, m in enumerate(modes_raw):
        md = _take(m, f"system.modes[{i}]")
        mode = {
            "omega": float(_pop_number(md, "omega", 1.0, f"system.modes[{i}]")),
            "lam": float(_pop_number(md, "lam", 0.1, f"system.modes[{i}]")),
        }
        _check_empty(md, f"system.modes[{i}]")
        modes.append(mode)
    kwargs = dict(
        g=float(_pop_number(d, "g", 2.0, "system")),
        b0=float(_pop_number(d, "b0", 1.0, "system")),
        modes=tuple(modes),
        n_fock=_pop_int(d, "n_fock", 5, "system"),
        temperature=float(_pop_number(d, "temperature", 10.0, "system")),
    )
    _check_empty(d, "system")
    try:
        return SystemParams(**kwargs)
    except ValueError as exc:
        raise ConfigError(f"system: {exc}") from exc


def _system_to_dict(p: SystemParams) -> dict:
    return {
        "g": p.g,
        "b0": p.b0,
        "modes": [{"omega": m.omega, "lam": m.lam} for m in p.modes],
        "n_fock": p.n_fock,
        "temperature": p.temperature,
    }


@dataclass
class RunConfig:
    """Top-level configuration for the simulate/learn/control/evaluate pipeline."""

    system: SystemParams = field(default_factory=SystemParams)
    learning: LearningSection = field(default_factory=LearningSection)
    control: ControlSection = field(default_factory=ControlSection)

    @classmethod
    def from_dict(cls, raw: dict) -> "RunConfig":
        d = _take(raw, "config")
        system = _system_from_dict(d.pop("system", {}))
        learning = LearningSection.from_dict(d.pop("learning", {}))
        control = ControlSection.from_dict(d.pop("control", {}))
        _check_empty(d, "config")
        return cls(system=system, learning=learning, control=control)

    def to_dict(self) -> dict:
        return {
            "system": _system_to_dict(self.system),
            "learning": self.learning.to_dict(),
            "control": self.control.to_dict(),
        }

    def control_config(self) -> ControlConfig:
        return self.control.control_config(self.system)


def load_config(path: str) -> RunConfig:
    """Read and validate a JSON run configuration."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return RunConfig.from_dict(raw)
