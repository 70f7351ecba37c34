"""Experiment configuration, seeded runs, metrics files and analyses."""

from __future__ import annotations

import configparser
import csv
import io
import itertools
import math
import os
from dataclasses import dataclass, field, fields, replace
from typing import Optional, Sequence

import numpy as np

from .automaton import Dfa, load_dfa
from .distill import TransitionValueTable, load_transition_values
from .envs import (LabeledEnv, ProductMDP, Trajectory, build_student_variant, make_env,
                   random_policy)
from .learner import (EpisodeMetrics, LearnerConfig, LearnerError, RMConstants, RewardSource,
                      QTable, greedy_actions, greedy_return, run_baseline, run_dynamic, run_static,
                      q_learning, save_qtable, train_with_snapshots, value_iteration)
from .reward_model import RewardTable, TrainingDiverged, pair_accuracy, save_reward_model, train
from .scoring import (Pairing, Preference, ScoreWeights, completed_subgoals, make_scorer,
                      transition_value_score)

METHODS = ("static", "dynamic", "known", "reward_machine", "lpopl", "distill_shaping",
           "static_pref_plan", "dynamic_pref_plan")
BASELINES = ("known", "reward_machine", "lpopl", "distill_shaping")
CSV_HEADER = ("episode", "steps", "cumulative_steps", "reference_reward", "accepted")
REFERENCE_NOTE = "reference reward: known_reward (hand-crafted, used for evaluation only)"


class ConfigError(ValueError):
    pass


# --------------------------------------------------------------------------
# Configuration


@dataclass(frozen=True)
class ExperimentConfig:
    env: str
    method: str
    seeds: tuple = (0,)
    dfa: Optional[str] = None
    weights: ScoreWeights = ScoreWeights()
    transition_values: Optional[str] = None
    learner: LearnerConfig = LearnerConfig()
    horizon: Optional[int] = None
    out: str = "results"
    student_size: Optional[int] = None
    student_seed: int = 0
    save_snapshots: bool = False

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigError(f"method: unknown method {self.method!r}; expected one of {', '.join(METHODS)}")
        if not self.seeds:
            raise ConfigError("seeds: at least one seed is required")
        if self.method.endswith("_pref_plan") and not self.transition_values:
            raise ConfigError(f"transition_values: method {self.method} needs a transition-value file")
        if self.weights.w_q > 0 and not self.transition_values:
            raise ConfigError("transition_values: w_q > 0 needs a transition-value file")
        if self.horizon is not None and self.horizon < 1:
            raise ConfigError("horizon: must be positive")


_LEARNER_KEYS = {f.name: f.type for f in fields(LearnerConfig)
                 if f.name not in ("pairing", "teacher", "rm_constants")}


def _convert(section: str, key: str, raw: str, kind):
    try:
        if kind in (int, "int", "Optional[int]"):
            return None if raw.lower() in ("", "none") else int(raw)
        if kind in (bool, "bool"):
            if raw.lower() not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(raw)
            return raw.lower() in ("true", "1", "yes")
        return float(raw)
    except ValueError:
        raise ConfigError(f"[{section}] {key}: cannot parse {raw!r}") from None


def parse_config(text: str, overrides: Optional[dict] = None) -> ExperimentConfig:
    """Read an INI-style config; ``overrides`` (e.g. from the command line) win."""
    cp = configparser.ConfigParser()
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from None
    known = {"experiment", "scoring", "learner", "pairing", "reward_machine"}
    for section in cp.sections():
        if section not in known:
            raise ConfigError(f"unknown section [{section}]")
    ex = cp["experiment"] if cp.has_section("experiment") else {}
    overrides = {k: v for k, v in (overrides or {}).items() if v is not None}

    def get(key, default=None):
        return overrides.get(key, ex.get(key, default))

    env = get("env")
    method = get("method")
    if env is None:
        raise ConfigError("env: missing")
    if method is None:
        raise ConfigError("method: missing")
    seeds = get("seeds", "0")
    if isinstance(seeds, str):
        try:
            seeds = tuple(int(s) for s in seeds.replace(",", " ").split())
        except ValueError:
            raise ConfigError(f"seeds: cannot parse {seeds!r}") from None
    sc = cp["scoring"] if cp.has_section("scoring") else {}
    weights = ScoreWeights(
        _convert("scoring", "w_s", sc.get("w_s", "10"), float),
        _convert("scoring", "w_d", sc.get("w_d", "0.1"), float),
        _convert("scoring", "w_q", sc.get("w_q", "0"), float),
        _convert("scoring", "baseline", sc.get("baseline", "true"), bool),
    )
    learner_kwargs = {}
    if cp.has_section("learner"):
        for key, raw in cp["learner"].items():
            if key not in _LEARNER_KEYS:
                raise ConfigError(f"[learner] {key}: unknown key")
            learner_kwargs[key] = _convert("learner", key, raw, _LEARNER_KEYS[key])
    if cp.has_section("pairing"):
        pk = dict(cp["pairing"])
        try:
            pairing = Pairing(max_all_pairs=int(pk.pop("max_all_pairs", 60)),
                              n_pairs=int(pk.pop("n_pairs", 2000)),
                              mode=pk.pop("mode", "nested"),
                              segment_length=int(pk.pop("segment_length", 10)))
        except ValueError as exc:
            raise ConfigError(f"[pairing] {exc}") from None
        if pk:
            raise ConfigError(f"[pairing] {sorted(pk)[0]}: unknown key")
        learner_kwargs["pairing"] = pairing
    if cp.has_section("reward_machine"):
        rk = {k: _convert("reward_machine", k, v, float) for k, v in cp["reward_machine"].items()}
        try:
            learner_kwargs["rm_constants"] = RMConstants(**rk)
        except TypeError as exc:
            raise ConfigError(f"[reward_machine] {exc}") from None
    try:
        learner = LearnerConfig(**learner_kwargs)
    except TypeError as exc:
        raise ConfigError(f"[learner] {exc}") from None
    horizon = get("horizon")
    size = get("student_size")
    return ExperimentConfig(
        env=env, method=method, seeds=tuple(seeds), dfa=get("dfa"), weights=weights,
        transition_values=overrides.get("transition_values", sc.get("transition_values")),
        learner=learner,
        horizon=None if horizon in (None, "", "none") else _convert("experiment", "horizon", str(horizon), int),
        out=get("out", "results"),
        student_size=None if size in (None, "", "none") else _convert("experiment", "student_size", str(size), int),
        student_seed=_convert("experiment", "student_seed", str(get("student_seed", "0")), int),
        save_snapshots=_convert("experiment", "save_snapshots", str(get("save_snapshots", "false")), bool),
    )


def load_config(path, overrides: Optional[dict] = None) -> ExperimentConfig:
    with open(path) as fh:
        return parse_config(fh.read(), overrides)


# --------------------------------------------------------------------------
# Running experiments


def build_env(config: ExperimentConfig) -> tuple:
    params = {"horizon": config.horizon} if config.horizon else None
    env = make_env(config.env, params)
    if config.student_size:
        env = build_student_variant(env, config.student_size, config.student_seed)
    dfa = load_dfa(config.dfa) if config.dfa else env.default_dfa()
    return env, dfa


def run_method(config: ExperimentConfig, env: LabeledEnv, dfa: Dfa, seed: int,
               product: Optional[ProductMDP] = None):
    """One (method, seed) run; returns the learner's ``RunResult``."""
    rng = np.random.default_rng(seed)
    learner = config.learner
    if config.horizon:
        learner = replace(learner, horizon=config.horizon)
    qv = load_transition_values(config.transition_values) if config.transition_values else None
    if config.method in BASELINES:
        return run_baseline(env, dfa, config.method, learner, rng, product)
    if config.method.endswith("_pref_plan"):
        learner = replace(learner, teacher=qv)
    scorer = make_scorer(env, dfa, config.weights, qv)
    fn = run_static if config.method.startswith("static") else run_dynamic
    return fn(env, dfa, scorer, learner, rng, product)


def metrics_csv(metrics: Sequence[EpisodeMetrics]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for m in metrics:
        w.writerow((m.episode, m.steps, m.cumulative_steps, repr(float(m.reference_reward)),
                    "true" if m.accepted else "false"))
    return buf.getvalue()


def read_metrics_csv(path) -> list:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(rows[0]) != CSV_HEADER:
        raise ConfigError(f"{path}: unexpected metrics header")
    return [EpisodeMetrics(int(r[0]), int(r[1]), int(r[2]), float(r[3]), r[4] == "true")
            for r in rows[1:]]


def aggregate(per_seed: Sequence[Sequence[EpisodeMetrics]]) -> list:
    """Per-episode mean and population std across the seeds that reached that episode."""
    longest = max((len(m) for m in per_seed), default=0)
    rows = []
    for i in range(longest):
        eps = [m[i] for m in per_seed if len(m) > i]
        r = np.array([e.reference_reward for e in eps])
        s = np.array([e.steps for e in eps], dtype=float)
        acc = np.array([e.accepted for e in eps], dtype=float)
        rows.append((i, len(eps), float(r.mean()), float(r.std()), float(s.mean()), float(s.std()),
                     float(acc.mean())))
    return rows


AGGREGATE_HEADER = ("episode", "n_seeds", "mean_reference_reward", "std_reference_reward",
                    "mean_steps", "std_steps", "acceptance_rate")


def aggregate_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(AGGREGATE_HEADER)
    for row in rows:
        w.writerow((row[0], row[1]) + tuple(repr(x) for x in row[2:]))
    return buf.getvalue()


def first_acceptance(metrics: Sequence[EpisodeMetrics]) -> Optional[int]:
    return next((m.episode for m in metrics if m.accepted), None)


def final_acceptance_rate(metrics: Sequence[EpisodeMetrics], window: int = 200) -> float:
    tail = metrics[-window:]
    return float(np.mean([m.accepted for m in tail])) if tail else 0.0


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    metrics: dict  # seed -> list of EpisodeMetrics
    failures: dict  # seed -> error message
    files: list
    summary: str


def run_experiment(config: ExperimentConfig) -> ExperimentResult:
    """Run every seed, write one CSV per seed, an aggregate CSV and a summary."""
    env, dfa = build_env(config)
    product = ProductMDP(env, dfa)
    os.makedirs(config.out, exist_ok=True)
    stem = os.path.join(config.out, config.method)
    files = []
    metrics: dict = {}
    failures: dict = {}
    for seed in config.seeds:
        try:
            result = run_method(config, env, dfa, seed, product)
        except (TrainingDiverged, LearnerError) as exc:
            failures[seed] = str(exc)
            continue
        metrics[seed] = result.metrics
        path = f"{stem}_seed{seed}.csv"
        with open(path, "w", newline="") as fh:
            fh.write(metrics_csv(result.metrics))
        files.append(path)
        if config.save_snapshots:
            save_qtable(result.qtable, f"{stem}_seed{seed}.qtable")
            files.append(f"{stem}_seed{seed}.qtable")
            if result.reward_model is not None:
                save_reward_model(result.reward_model, f"{stem}_seed{seed}.reward")
                files.append(f"{stem}_seed{seed}.reward")
    if metrics:
        path = f"{stem}_aggregate.csv"
        with open(path, "w", newline="") as fh:
            fh.write(aggregate_csv(aggregate([metrics[s] for s in sorted(metrics)])))
        files.append(path)
    summary = summarize(config, env, metrics, failures)
    path = f"{stem}_summary.txt"
    with open(path, "w") as fh:
        fh.write(summary)
    files.append(path)
    return ExperimentResult(config, metrics, failures, files, summary)


def summarize(config: ExperimentConfig, env: LabeledEnv, metrics: dict, failures: dict) -> str:
    lines = [f"# {REFERENCE_NOTE}",
             f"# env={env.name} method={config.method} seeds={' '.join(map(str, config.seeds))}"]
    if failures:
        lines.append("# PARTIAL: some seeds failed; their outputs are missing")
    firsts, finals = [], []
    for seed in config.seeds:
        if seed in failures:
            lines.append(f"seed {seed}: FAILED {failures[seed]}")
            continue
        m = metrics[seed]
        fa = first_acceptance(m)
        rate = final_acceptance_rate(m)
        firsts.append(math.inf if fa is None else fa)
        finals.append(rate)
        lines.append(f"seed {seed}: episodes={len(m)} steps={m[-1].cumulative_steps if m else 0} "
                     f"first_acceptance={fa if fa is not None else 'never'} final200_acceptance={rate:.3f}")
    if finals:
        lines.append(f"median final200_acceptance={float(np.median(finals)):.3f}")
        lines.append(f"median first_acceptance={float(np.median(firsts))}")
    return "\n".join(lines) + "\n"


def reward_per_cumulative_steps(metrics: Sequence[EpisodeMetrics]) -> list:
    out = []
    steps = 0
    total = 0.0
    for m in metrics:
        steps += m.steps
        total += m.reference_reward
        out.append((steps, total))
    return out


# --------------------------------------------------------------------------
# Statistics


def _check_pair(xs, ys) -> tuple:
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("inputs must be 1-d sequences of equal length")
    if len(x) < 2:
        raise ValueError("need at least two points")
    return x, y


def pearson(xs, ys) -> float:
    x, y = _check_pair(xs, ys)
    dx = x - x.mean()
    dy = y - y.mean()
    denom = math.sqrt(float(dx @ dx) * float(dy @ dy))
    if denom == 0.0:
        raise ValueError("zero variance")
    return max(-1.0, min(1.0, float(dx @ dy) / denom))


def average_ranks(xs) -> np.ndarray:
    x = np.asarray(xs, dtype=float)
    order = np.argsort(x, kind="mergesort")
    ranks = np.empty(len(x))
    sx = x[order]
    i = 0
    while i < len(x):
        j = i
        while j + 1 < len(x) and sx[j + 1] == sx[i]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def spearman(xs, ys) -> float:
    x, y = _check_pair(xs, ys)
    return pearson(average_ranks(x), average_ranks(y))


def _slope(xs, ys) -> Optional[float]:
    x = np.asarray(xs, float)
    y = np.asarray(ys, float)
    dx = x - x.mean()
    if not dx.any():
        return None
    return float(dx @ (y - y.mean()) / (dx @ dx))


# --------------------------------------------------------------------------
# Scoring validation


@dataclass(frozen=True)
class ValidationConfig:
    prefix_length: int = 25
    future_horizon: int = 25
    rollout_epsilon: float = 0.1
    behaviour_epsilon: float = 0.1
    policy_kind: str = "distill_shaping"
    baseline: bool = True
    learner: LearnerConfig = LearnerConfig()


@dataclass
class ValidationReport:
    n: int
    pearson_reward: Optional[float]
    spearman_subgoals: Optional[float]
    success_slope: Optional[float]
    future_reward_slope: Optional[float]
    success_above_median: float
    success_below_median: float
    degenerate: bool
    scores: list = field(repr=False, default_factory=list)

    def text(self) -> str:
        def f(x):
            return "undefined" if x is None else f"{x:.4f}"
        lines = [f"# {REFERENCE_NOTE}", f"trajectories={self.n}",
                 f"pearson(score, reference_reward)={f(self.pearson_reward)}",
                 f"spearman(score, subgoals)={f(self.spearman_subgoals)}",
                 f"future_success_slope={f(self.success_slope)}",
                 f"future_reward_slope={f(self.future_reward_slope)}",
                 f"success_above_median={self.success_above_median:.4f}",
                 f"success_below_median={self.success_below_median:.4f}"]
        if self.degenerate:
            lines.append("WARNING: all scores equal; correlations undefined")
        return "\n".join(lines) + "\n"


def _eps_policy(q: Optional[np.ndarray], eps: float, n_actions: int):
    if q is None:
        return random_policy(n_actions)

    def policy(p, rng):
        if rng.random() < eps:
            return int(rng.integers(n_actions))
        return int(np.argmax(q[p]))
    return policy


def _known_return(prod: ProductMDP, ref: np.ndarray, tau: Trajectory) -> float:
    p = prod.index(tau.start)
    total = 0.0
    for st in tau.steps:
        total += ref[p, st.action]
        p = int(prod.next[p, st.action])
    return total


def validate_scoring(env: LabeledEnv, dfa: Dfa, qv: TransitionValueTable, n_traj: int = 200,
                     n_rollouts: int = 50, rng=None, config: ValidationConfig = ValidationConfig(),
                     policies: Optional[tuple] = None) -> ValidationReport:
    """Correlate transition-value scores with reward, progress and future success.

    The pool mixes a random policy, two partially trained snapshots and the
    final policy in equal thirds. Every trajectory is a fixed-length window
    from the initial state, so sums over steps are comparable. From each
    endpoint, ``n_rollouts`` epsilon-greedy rollouts of the final policy
    (``future_horizon`` steps each) estimate the future success rate.
    """
    if n_traj < 30:
        raise ValueError("n_traj must be at least 30")
    rng = rng if rng is not None else np.random.default_rng(0)
    prod = ProductMDP(env, dfa)
    if policies is None:
        final, snaps = train_with_snapshots(env, dfa, config.policy_kind, config.learner, rng,
                                            product=prod)
        policies = (final, snaps[0], snaps[1])
    final, snap25, snap50 = policies
    ref = RewardSource("known").matrix(prod)
    third = n_traj // 3
    plan = ([None] * (n_traj - 2 * third) + [snap25.q] * (third - third // 2)
            + [snap50.q] * (third // 2) + [final.q] * third)
    trajs = []
    for q in plan:
        pol = _eps_policy(q, config.behaviour_epsilon, prod.n_actions)
        trajs.append(prod.rollout(pol, rng, config.prefix_length))
    scores = [transition_value_score(t, dfa, qv, config.baseline) for t in trajs]
    rewards = [_known_return(prod, ref, t) for t in trajs]
    subgoals = [completed_subgoals(t, dfa) for t in trajs]
    future_pol = _eps_policy(final.q, config.rollout_epsilon, prod.n_actions)
    success, future_reward = [], []
    for t in trajs:
        start = prod.index(t.final)
        if prod.terminal[start]:
            success.append(1.0)
            future_reward.append(0.0)
            continue
        outs = [prod.rollout(future_pol, rng, config.future_horizon, start=start)
                for _ in range(n_rollouts)]
        success.append(float(np.mean([o.accepted for o in outs])))
        future_reward.append(float(np.mean([_known_return(prod, ref, o) for o in outs])))
    degenerate = len(set(scores)) < 2
    pr = sp = None
    if not degenerate:
        pr = pearson(scores, rewards) if len(set(rewards)) > 1 else None
        sp = spearman(scores, subgoals) if len(set(subgoals)) > 1 else None
    med = float(np.median(scores))
    s = np.array(scores)
    succ = np.array(success)
    above = succ[s > med]
    below = succ[s < med]
    return ValidationReport(
        n=len(trajs), pearson_reward=pr, spearman_subgoals=sp,
        success_slope=None if degenerate else _slope(scores, success),
        future_reward_slope=None if degenerate else _slope(scores, future_reward),
        success_above_median=float(above.mean()) if len(above) else math.nan,
        success_below_median=float(below.mean()) if len(below) else math.nan,
        degenerate=degenerate, scores=scores,
    )


# --------------------------------------------------------------------------
# Convergence check on a small fixture


@dataclass(frozen=True)
class ConvergenceCheckConfig:
    epsilon: float = 0.05
    delta0: float = 0.1
    confidence: float = 0.9
    horizon: int = 8
    runs: int = 10
    max_epochs: int = 2000
    learner: LearnerConfig = LearnerConfig(episodes=2000)

    def __post_init__(self):
        if not self.epsilon >= 0:
            raise ConfigError("epsilon must be non-negative")
        if not 0.0 < self.confidence < 1.0:
            raise ConfigError("confidence must lie in (0, 1)")
        if self.horizon < 1:
            raise ConfigError("horizon must be positive")


@dataclass
class ConvergenceReport:
    passed: bool
    vacuous: bool
    n_trajectories: int
    n_pairs: int
    pair_accuracy: float
    optimum: float
    greedy_values: list
    success_fraction: float

    def text(self) -> str:
        lines = [f"trajectories={self.n_trajectories} pairs={self.n_pairs} "
                 f"pair_accuracy={self.pair_accuracy:.4f}",
                 f"optimum V*={self.optimum:.6f}",
                 "greedy V=" + " ".join(f"{v:.6f}" for v in self.greedy_values),
                 f"within_epsilon_fraction={self.success_fraction:.3f}",
                 ("VACUOUS PASS (no pair clears delta0)" if self.vacuous
                  else ("PASS" if self.passed else "FAIL"))]
        return "\n".join(lines) + "\n"


MAX_ENUMERATED = 10 ** 6


def enumerate_trajectories(prod: ProductMDP, horizon: int) -> list:
    """Every action sequence of length ``horizon`` from the initial state, cut at acceptance."""
    if prod.n_actions ** horizon > MAX_ENUMERATED:
        raise ConfigError(f"{prod.n_actions}^{horizon} trajectories exceed the enumeration limit")
    seen = {}
    for actions in itertools.product(range(prod.n_actions), repeat=horizon):
        p = prod.initial
        taken = []
        for a in actions:
            taken.append(a)
            p = int(prod.next[p, a])
            if prod.terminal[p]:
                break
        seen.setdefault(tuple(taken), None)
    return [_replay(prod, seq) for seq in seen]


def _replay(prod: ProductMDP, actions: tuple) -> Trajectory:
    it = iter(actions)
    return prod.rollout(lambda p, g: next(it), None, len(actions))


def discounted_return(R: np.ndarray, prod: ProductMDP, tau: Trajectory, gamma: float) -> float:
    p = prod.index(tau.start)
    total, g = 0.0, 1.0
    for st in tau.steps:
        total += g * R[p, st.action]
        g *= gamma
        p = int(prod.next[p, st.action])
    return total


def check_convergence_theorem(cfg: ConvergenceCheckConfig, env: LabeledEnv, dfa: Dfa,
                              seed: int = 0) -> ConvergenceReport:
    """Preference-trained reward plus persistent-exploration Q-learning on a tiny fixture.

    Preferences come from the reference reward ``R*`` (known_reward) over all
    trajectory pairs whose discounted returns differ by at least ``delta0``.
    The check passes when at least ``confidence`` of the ``runs`` Q-learning
    seeds yield a greedy policy within ``epsilon`` of the optimal ``R*`` value.
    """
    prod = ProductMDP(env, dfa)
    gamma = cfg.learner.gamma
    rstar = RewardSource("known").matrix(prod)
    trajs = enumerate_trajectories(prod, cfg.horizon)
    returns = [discounted_return(rstar, prod, t, gamma) for t in trajs]
    prefs = []
    for i, j in itertools.combinations(range(len(trajs)), 2):
        gap = returns[i] - returns[j]
        if abs(gap) >= cfg.delta0 and abs(gap) > 0:
            prefs.append(Preference(0 if gap > 0 else 1, (trajs[i], trajs[j]), (returns[i], returns[j])))
    optimum = float(value_iteration(prod, rstar, gamma).q[prod.initial].max())
    if not prefs:
        return ConvergenceReport(True, True, len(trajs), 0, 1.0, optimum, [], 1.0)
    rng = np.random.default_rng(seed)
    model = RewardTable((prod.n_env, prod.n_q, prod.n_actions), gamma, cfg.learner.margin)
    train(model, prefs, cfg.learner.reward_lr, cfg.max_epochs, rng)
    acc = pair_accuracy(model, prefs)
    R = RewardSource("learned", model=model).matrix(prod)
    learner = replace(cfg.learner, horizon=cfg.horizon)
    values = []
    for k in range(cfg.runs):
        qt = QTable(prod.n, prod.n_actions, learner.alpha, gamma, learner.schedule(learner.episodes))
        q_learning(prod, R, qt, learner.episodes, np.random.default_rng(seed + 1 + k), cfg.horizon)
        v, _ = greedy_return(prod, greedy_actions(qt.q), rstar, gamma, cfg.horizon)
        values.append(v)
    ok = [optimum - v <= cfg.epsilon for v in values]
    frac = float(np.mean(ok))
    return ConvergenceReport(frac >= cfg.confidence, False, len(trajs), len(prefs), acc, optimum,
                             values, frac)
