"""Command-line entry point: ``dfapref <command> [options]``."""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from .automaton import DfaError
from .distill import (DistillError, collect_teacher_experience, distill_values,
                      load_transition_values, save_transition_values, train_teacher)
from .envs import ENV_NAMES, EnvError, ProductMDP, make_env
from .harness import (METHODS, ConfigError, ConvergenceCheckConfig, ValidationConfig,
                      check_convergence_theorem, load_config, parse_config, run_experiment,
                      validate_scoring)
from .learner import LearnerConfig, load_qtable, save_qtable


def _seed(args, default: int = 0) -> int:
    return args.seed[0] if args.seed else default


def _write(text: str, out) -> None:
    if out:
        os.makedirs(os.path.dirname(os.path.abspath(out)), exist_ok=True)
        with open(out, "w") as fh:
            fh.write(text)
    sys.stdout.write(text)


def cmd_run(args) -> int:
    overrides = {"env": args.env, "method": args.method, "out": args.out,
                 "seeds": tuple(args.seed) if args.seed else None,
                 "transition_values": args.values}
    if args.config:
        config = load_config(args.config, overrides)
    else:
        config = parse_config("", overrides)
    result = run_experiment(config)
    sys.stdout.write(result.summary)
    for path in result.files:
        print(f"wrote {path}")
    return 1 if result.failures else 0


def cmd_teacher(args) -> int:
    env = make_env(args.env)
    dfa = env.default_dfa()
    config = LearnerConfig(episodes=args.episodes)
    qt = train_teacher(env, dfa, config, np.random.default_rng(_seed(args)), kind=args.reward)
    out = args.out or f"{env.name}_teacher.qtable"
    save_qtable(qt, out)
    print(f"wrote {out}")
    return 0


def cmd_distill(args) -> int:
    env = make_env(args.env)
    dfa = env.default_dfa()
    qt = load_qtable(args.teacher)
    D = collect_teacher_experience(env, dfa, qt, args.episodes, np.random.default_rng(_seed(args)),
                                   kind=args.reward)
    table = distill_values(D, qt, args.default, dfa.name)
    out = args.out or f"{env.name}.tv"
    save_transition_values(table, out)
    print(f"wrote {out} ({len(D)} samples, {len(table.values)} transitions)")
    return 0


def cmd_validate(args) -> int:
    env = make_env(args.env)
    dfa = env.default_dfa()
    rng = np.random.default_rng(_seed(args))
    if args.values:
        qv = load_transition_values(args.values)
    else:
        teacher = train_teacher(env, dfa, LearnerConfig(), rng)
        qv = distill_values(collect_teacher_experience(env, dfa, teacher, 100, rng), teacher,
                            dfa_name=dfa.name)
    report = validate_scoring(env, dfa, qv, args.n_traj, args.rollouts, rng,
                              ValidationConfig(prefix_length=args.prefix, future_horizon=args.prefix))
    _write(report.text(), args.out)
    return 0


def cmd_theorem(args) -> int:
    env = make_env(args.env)
    cfg = ConvergenceCheckConfig(epsilon=args.epsilon, delta0=args.delta0, horizon=args.horizon)
    report = check_convergence_theorem(cfg, env, env.default_dfa(), _seed(args))
    _write(report.text(), args.out)
    return 0 if report.passed else 1


def cmd_list(args) -> int:
    for name in ENV_NAMES:
        env = make_env(name)
        prod = ProductMDP(env, env.default_dfa())
        print(f"{name:16s} dfa={env.dfa_name:16s} states={len(env.states):5d} "
              f"product={prod.n:6d} actions={len(env.actions)} horizon={env.max_steps}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dfapref", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, env_default=None):
        p.add_argument("--env", default=env_default, help="environment name")
        p.add_argument("--seed", type=int, action="append", help="random seed (repeatable)")
        p.add_argument("--out", help="output path or directory")
        return p

    p = common(sub.add_parser("run", help="run an experiment from a config file"))
    p.add_argument("--config", help="INI config file")
    p.add_argument("--method", choices=METHODS)
    p.add_argument("--values", help="transition-value file (overrides [scoring] transition_values)")
    p.set_defaults(func=cmd_run)

    p = common(sub.add_parser("teacher", help="train a teacher policy and save its Q-table"), "iron_sword")
    p.add_argument("--episodes", type=int, default=3000)
    p.add_argument("--reward", default="distill_shaping", help="reward the teacher is trained on")
    p.set_defaults(func=cmd_teacher)

    p = common(sub.add_parser("distill", help="distill transition values from a teacher snapshot"),
               "iron_sword")
    p.add_argument("--teacher", required=True, help="teacher Q-table snapshot")
    p.add_argument("--episodes", type=int, default=100)
    p.add_argument("--default", type=float, default=0.0)
    p.add_argument("--reward", default="distill_shaping")
    p.set_defaults(func=cmd_distill)

    p = common(sub.add_parser("validate", help="scoring validation report"), "dungeon_quest")
    p.add_argument("--values", help="transition-value file; trained on the fly when omitted")
    p.add_argument("--n-traj", type=int, default=200)
    p.add_argument("--rollouts", type=int, default=50)
    p.add_argument("--prefix", type=int, default=25, help="trajectory window length")
    p.set_defaults(func=cmd_validate)

    p = common(sub.add_parser("theorem-check", help="preference-learning convergence check"), "chain3")
    p.add_argument("--horizon", type=int, default=8)
    p.add_argument("--epsilon", type=float, default=0.05)
    p.add_argument("--delta0", type=float, default=0.1)
    p.set_defaults(func=cmd_theorem)

    p = sub.add_parser("list-envs", help="list bundled environments")
    p.set_defaults(func=cmd_list)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, DfaError, EnvError, DistillError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
