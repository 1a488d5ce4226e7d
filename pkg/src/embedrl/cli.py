"""Command-line pipeline: simulate, learn, control, evaluate.

Each stage reads one JSON configuration, consumes the previous stage's
artifacts, and writes delimited output plus a rendered figure next to it.
Exit codes: 0 success, 2 configuration or artifact error, 3 numerical
failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import fileio, figures
from .config import ConfigError, load_config
from .controller import EpisodeRecord, evaluate_policy, train_controller
from .embedding import init_model
from .learning import TrainOptions, train
from .linalg import NumericalError, partial_trace
from .spinboson import (
    free_bloch_trajectory,
    generate_trajectory,
    initial_joint_state,
    measurement_basis,
)

__all__ = ["main"]

BLOCH_TRACE_MAX_STEPS = 500


def _stem(path: str) -> str:
    for suffix in (".csv", ".json"):
        if path.endswith(suffix):
            return path[: -len(suffix)]
    return path


def _coherent_initial_state(cfg) -> np.ndarray:
    """First measurement-basis ket on the qubit, thermal bath alongside."""
    ket = measurement_basis(cfg.learning.basis)[:, 0]
    rho_s = np.outer(ket, ket.conj())
    joint = initial_joint_state(cfg.system)
    bath_slots = tuple(range(1, len(cfg.system.dims)))
    rho_bath = partial_trace(joint, cfg.system.dims, bath_slots)
    return np.kron(rho_s, rho_bath)


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    basis = measurement_basis(cfg.learning.basis)
    seed = cfg.learning.trajectory_seed
    traj = generate_trajectory(
        cfg.system, cfg.learning.n_measurements, cfg.learning.dt, basis, seed
    )
    sidecar = fileio.write_trajectory(args.out, traj, cfg.system)

    steps = min(cfg.learning.n_measurements, BLOCH_TRACE_MAX_STEPS)
    times, bloch = free_bloch_trajectory(
        cfg.system, steps, cfg.learning.dt, rho0=_coherent_initial_state(cfg)
    )
    bloch_path = _stem(args.out) + ".bloch.csv"
    fileio.write_bloch(bloch_path, times, bloch)
    if not args.no_figures:
        figures.save_bloch_figure(
            figures.png_path_for(bloch_path),
            times,
            bloch,
            title="Free evolution from the first measurement-basis ket",
        )
    print(
        f"simulate: {len(traj)} outcomes (seed {seed}) -> {args.out}, {sidecar}; "
        f"Bloch trace ({steps} steps) -> {bloch_path}"
    )
    return 0


def cmd_learn(args) -> int:
    cfg = load_config(args.config)
    traj, _ = fileio.read_trajectory(args.data)
    if abs(traj.dt - cfg.learning.dt) > 1e-12:
        raise ConfigError(
            f"trajectory dt {traj.dt} does not match config learning.dt {cfg.learning.dt}"
        )
    model0 = init_model(2, cfg.learning.d_er, traj.dt, seed=cfg.learning.model_init_seed)
    opts = TrainOptions(
        lr=cfg.learning.lr,
        beta1=cfg.learning.beta1,
        beta2=cfg.learning.beta2,
        eps=cfg.learning.eps,
        max_epochs=cfg.learning.max_epochs,
        window=cfg.learning.window,
        tol=cfg.learning.tol,
        verbose=args.verbose,
    )
    model, report = train(model0, traj, opts)
    fileio.write_model(args.out, model)
    curve_path = _stem(args.out) + ".curve.csv"
    fileio.write_training_curve(curve_path, report.log_geo_curve)
    if not args.no_figures:
        figures.save_training_curve_figure(figures.png_path_for(curve_path), report.log_geo_curve)
    if len(report.log_geo_curve):
        first = report.log_geo_curve[0]
        last = report.log_geo_curve[-1]
        print(
            f"learn: stop reason {report.stop_reason} after {report.epochs} epochs; "
            f"log geometric-mean probability {first:.6f} -> {last:.6f}; model -> {args.out}"
        )
    else:
        print(f"learn: 0 epochs requested; initialized model -> {args.out}")
    return 0


def cmd_control(args) -> int:
    cfg = load_config(args.config)
    model = fileio.read_model(args.model)
    ccfg = cfg.control_config()
    params, curve = train_controller(model, ccfg, verbose=args.verbose)
    fileio.write_policy(args.out, params)
    curve_path = _stem(args.out) + ".curve.csv"
    fileio.write_episode_log(curve_path, curve)
    if not args.no_figures:
        figures.save_control_curve_figure(
            figures.png_path_for(curve_path), [c.total_return for c in curve]
        )
    if curve:
        tail = curve[-min(len(curve), 100) :]
        mean_ret = float(np.mean([c.total_return for c in tail]))
        print(
            f"control: {len(curve)} episodes; mean return of last {len(tail)}: "
            f"{mean_ret:.3f}; policy -> {args.out}"
        )
    else:
        print(f"control: 0 episodes; fresh policy -> {args.out}")
    return 0


def _evaluate_one(payload):
    """Worker for --jobs fan-out; reloads artifacts from paths."""
    episode_index, config_path, model_path, policy_path, mode = payload
    cfg = load_config(config_path)
    model = fileio.read_model(model_path)
    params = fileio.read_policy(policy_path)
    ccfg = cfg.control_config()
    system = cfg.system if mode == "true" else None
    report = evaluate_policy(params, model, ccfg, episodes=1, mode=mode, system=system)
    rec = report.episodes[0]
    return episode_index, (rec.steps, rec.total_return, rec.final_fidelity, rec.final_separability, rec.reason), report.step_logs[0]


def cmd_evaluate(args) -> int:
    cfg = load_config(args.config)
    model = fileio.read_model(args.model)
    params = fileio.read_policy(args.policy)
    ccfg = cfg.control_config()
    system = cfg.system if args.mode == "true" else None

    if args.jobs > 1 and args.episodes > 1:
        payloads = [
            (i, args.config, args.model, args.policy, args.mode) for i in range(args.episodes)
        ]
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = sorted(pool.map(_evaluate_one, payloads), key=lambda r: r[0])
        records = [EpisodeRecord(i, *fields) for i, fields, _ in results]
        step_logs = [log for _, _, log in results]
    else:
        report = evaluate_policy(
            params, model, ccfg, episodes=args.episodes, mode=args.mode, system=system
        )
        records = report.episodes
        step_logs = report.step_logs

    fileio.write_episode_log(args.out, records)
    steps_path = _stem(args.out) + ".steps.csv"
    fileio.write_step_log(steps_path, step_logs[0])
    if not args.no_figures:
        figures.save_episode_figure(figures.png_path_for(steps_path), step_logs[0])
    mean_f = float(np.mean([r.final_fidelity for r in records]))
    mean_fd = float(np.mean([r.final_fidelity * r.final_separability for r in records]))
    mean_steps = float(np.mean([r.steps for r in records]))
    print(
        f"evaluate[{args.mode}]: {len(records)} episode(s); mean final fidelity {mean_f:.4f}; "
        f"mean final F*D {mean_fd:.4f}; mean steps {mean_steps:.1f} -> {args.out}"
    )
    return 0


def _innermost_module(exc: BaseException) -> str:
    tb = exc.__traceback__
    name = "embedrl"
    while tb is not None:
        name = tb.tb_frame.f_globals.get("__name__", name)
        tb = tb.tb_next
    return name


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="embedrl",
        description="Simulate a dephasing qubit, learn a Markovian embedding from its "
        "measurement record, and train a controller on the learned model.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="JSON run configuration")
        p.add_argument("--out", required=True, help="primary output path")
        p.add_argument("--no-figures", action="store_true", help="skip PNG rendering")
        p.add_argument("--verbose", action="store_true", help="print progress during long stages")

    p_sim = sub.add_parser("simulate", help="generate a measurement record and Bloch trace")
    common(p_sim)
    p_sim.set_defaults(func=cmd_simulate)

    p_learn = sub.add_parser("learn", help="fit the embedding model to a measurement record")
    common(p_learn)
    p_learn.add_argument("--data", required=True, help="trajectory CSV from simulate")
    p_learn.set_defaults(func=cmd_learn)

    p_ctl = sub.add_parser("control", help="train the actor-critic agent on a model")
    common(p_ctl)
    p_ctl.add_argument("--model", required=True, help="model JSON from learn")
    p_ctl.set_defaults(func=cmd_control)

    p_eval = sub.add_parser("evaluate", help="score a policy on the model or the simulator")
    common(p_eval)
    p_eval.add_argument("--model", required=True, help="model JSON from learn")
    p_eval.add_argument("--policy", required=True, help="policy JSON from control")
    p_eval.add_argument("--mode", choices=("model", "true"), default="model")
    p_eval.add_argument("--episodes", type=int, default=1, help="evaluation episodes")
    p_eval.add_argument("--jobs", type=int, default=1, help="parallel evaluation workers")
    p_eval.set_defaults(func=cmd_evaluate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except json.JSONDecodeError as exc:
        print(f"config error: malformed JSON: {exc}", file=sys.stderr)
        return 2
    except (KeyError, ValueError) as exc:
        print(f"config error: {_innermost_module(exc)}: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {_innermost_module(exc)}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
