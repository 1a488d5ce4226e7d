"""Readers and writers for every pipeline artifact.

CSV files use '.' decimals and shortest round-trip float formatting; JSON
files are sorted and indented.  Both are therefore byte-stable across reruns
with identical inputs, which the reproducibility checks rely on.  Complex
matrices are serialized as nested lists of [re, im] pairs, row-major.
"""

from __future__ import annotations

import json

import numpy as np

from .controller import DenseNet, PolicyValueParams
from .embedding import EmbeddingModel
from .spinboson import SystemParams, Trajectory

__all__ = [
    "complex_to_pairs",
    "pairs_to_complex",
    "read_model",
    "read_policy",
    "read_training_curve",
    "read_trajectory",
    "write_bloch",
    "write_episode_log",
    "write_model",
    "write_policy",
    "write_step_log",
    "write_training_curve",
    "write_trajectory",
]


def _fmt(value) -> str:
    """Shortest decimal string that round-trips the double exactly."""
    return repr(float(value))


def complex_to_pairs(mat: np.ndarray):
    mat = np.asarray(mat, dtype=complex)
    return [[[float(v.real), float(v.imag)] for v in row] for row in mat]


def pairs_to_complex(rows) -> np.ndarray:
    return np.array([[complex(re, im) for re, im in row] for row in rows], dtype=complex)


def _sidecar_path(csv_path: str) -> str:
    stem = csv_path[:-4] if csv_path.endswith(".csv") else csv_path
    return stem + ".json"


def _write_json(path: str, obj) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _read_json(path: str):
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


# ---------------------------------------------------------------------------
# trajectory
# ---------------------------------------------------------------------------

def write_trajectory(path: str, traj: Trajectory, params: SystemParams) -> str:
    """Write outcomes to CSV plus a JSON sidecar; returns the sidecar path."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("step,outcome,probability\n")
        for i, (k, p) in enumerate(zip(traj.outcomes, traj.probabilities), start=1):
            fh.write(f"{i},{int(k)},{_fmt(p)}\n")
    kets = [
        [[float(traj.basis[row, col].real), float(traj.basis[row, col].imag)] for row in range(traj.basis.shape[0])]
        for col in range(traj.basis.shape[1])
    ]
    meta = {
        "dt": traj.dt,
        "basis": kets,
        "seed": int(traj.seed),
        "params": {
            "g": params.g,
            "b0": params.b0,
            "modes": [{"omega": m.omega, "lam": m.lam} for m in params.modes],
            "n_fock": params.n_fock,
            "temperature": params.temperature,
        },
    }
    sidecar = _sidecar_path(path)
    _write_json(sidecar, meta)
    return sidecar


def read_trajectory(path: str):
    """Load a trajectory CSV and its sidecar; returns (Trajectory, SystemParams)."""
    steps = []
    outcomes = []
    probs = []
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != "step,outcome,probability":
            raise ValueError(f"{path}: unexpected trajectory header {header!r}")
        for line in fh:
            line = line.strip()
            if not line:
                continue
            s, k, p = line.split(",")
            steps.append(int(s))
            outcomes.append(int(k))
            probs.append(float(p))
    if steps != list(range(1, len(steps) + 1)):
        raise ValueError(f"{path}: step column must run 1..n without gaps")
    meta = _read_json(_sidecar_path(path))
    kets = meta["basis"]
    basis = np.array(
        [[complex(re, im) for re, im in ket] for ket in kets], dtype=complex
    ).T
    params = SystemParams(
        g=meta["params"]["g"],
        b0=meta["params"]["b0"],
        modes=tuple({"omega": m["omega"], "lam": m["lam"]} for m in meta["params"]["modes"]),
        n_fock=meta["params"]["n_fock"],
        temperature=meta["params"]["temperature"],
    )
    traj = Trajectory(
        dt=float(meta["dt"]),
        basis=basis,
        outcomes=np.array(outcomes, dtype=np.int64),
        probabilities=np.array(probs, dtype=float),
        seed=int(meta["seed"]),
        params=params,
    )
    return traj, params


# ---------------------------------------------------------------------------
# Bloch trace
# ---------------------------------------------------------------------------

def write_bloch(path: str, times: np.ndarray, bloch: np.ndarray) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("t,x,y,z\n")
        for t, (x, y, z) in zip(times, bloch):
            fh.write(f"{_fmt(t)},{_fmt(x)},{_fmt(y)},{_fmt(z)}\n")


# ---------------------------------------------------------------------------
# embedding model
# ---------------------------------------------------------------------------

def write_model(path: str, model: EmbeddingModel) -> None:
    _write_json(
        path,
        {
            "d_S": model.d_s,
            "d_ER": model.d_er,
            "d_A": model.d_a,
            "dt": model.dt,
            "H": complex_to_pairs(model.h),
            "rho_ER0": complex_to_pairs(model.rho_er0),
            "rho_A": complex_to_pairs(model.rho_a),
        },
    )


def read_model(path: str) -> EmbeddingModel:
    raw = _read_json(path)
    model = EmbeddingModel(
        d_s=int(raw["d_S"]),
        d_er=int(raw["d_ER"]),
        d_a=int(raw["d_A"]),
        dt=float(raw["dt"]),
        h=pairs_to_complex(raw["H"]),
        rho_er0=pairs_to_complex(raw["rho_ER0"]),
        rho_a=pairs_to_complex(raw["rho_A"]),
    )
    model.validate()
    return model


# ---------------------------------------------------------------------------
# training curve
# ---------------------------------------------------------------------------

def write_training_curve(path: str, curve) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("epoch,log_geo_mean_p\n")
        for epoch, value in enumerate(curve):
            fh.write(f"{epoch},{_fmt(value)}\n")


def read_training_curve(path: str) -> np.ndarray:
    values = []
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != "epoch,log_geo_mean_p":
            raise ValueError(f"{path}: unexpected curve header {header!r}")
        for line in fh:
            line = line.strip()
            if line:
                values.append(float(line.split(",")[1]))
    return np.array(values)


# ---------------------------------------------------------------------------
# policy
# ---------------------------------------------------------------------------

def _net_to_dict(net: DenseNet) -> dict:
    return {
        "sizes": list(net.sizes),
        "weights": [[[float(v) for v in row] for row in w] for w in net.weights],
        "biases": [[float(v) for v in b] for b in net.biases],
    }


def _net_from_dict(raw: dict) -> DenseNet:
    weights = [np.array(w, dtype=float) for w in raw["weights"]]
    biases = [np.array(b, dtype=float) for b in raw["biases"]]
    net = DenseNet(weights, biases)
    if list(net.sizes) != list(raw["sizes"]):
        raise ValueError("policy file: stored sizes do not match weight shapes")
    return net


def write_policy(path: str, params: PolicyValueParams) -> None:
    _write_json(
        path,
        {
            "policy": _net_to_dict(params.policy),
            "value": _net_to_dict(params.value),
            "lr_actor": params.lr_actor,
            "lr_critic": params.lr_critic,
        },
    )


def read_policy(path: str) -> PolicyValueParams:
    raw = _read_json(path)
    return PolicyValueParams(
        policy=_net_from_dict(raw["policy"]),
        value=_net_from_dict(raw["value"]),
        lr_actor=float(raw["lr_actor"]),
        lr_critic=float(raw["lr_critic"]),
    )


# ---------------------------------------------------------------------------
# episode logs
# ---------------------------------------------------------------------------

def write_episode_log(path: str, records) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("episode,steps,return,final_F,final_D\n")
        for r in records:
            fh.write(
                f"{r.episode},{r.steps},{_fmt(r.total_return)},{_fmt(r.final_fidelity)},{_fmt(r.final_separability)}\n"
            )


def write_step_log(path: str, rows) -> None:
    """Per-step detail of one episode: step index, field, F, D, reward."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("step,Bx,F,D,r\n")
        for step, bx, f, d, r in rows:
            fh.write(f"{step},{_fmt(bx)},{_fmt(f)},{_fmt(d)},{_fmt(r)}\n")
