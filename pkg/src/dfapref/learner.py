"""Tabular Q-learning on the product MDP, baseline rewards and training loops."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional

import numpy as np

from .automaton import NULL, Dfa, is_out_of_order, potential
from .envs import LabeledEnv, ProductMDP, random_policy
from .reward_model import RewardTable, train
from .scoring import Pairing, generate_preferences

TIE_TOLERANCE = 1e-9
STEP_PENALTY = -0.1


class LearnerError(ValueError):
    pass


# --------------------------------------------------------------------------
# Q-table and exploration


@dataclass(frozen=True)
class EpsilonSchedule:
    """Linear decay from ``start`` to ``end`` over the first ``fraction`` of ``episodes``."""

    start: float = 1.0
    end: float = 0.05
    fraction: float = 0.6
    episodes: int = 3000

    def __call__(self, episode: int) -> float:
        span = self.fraction * self.episodes
        if span <= 0 or episode >= span:
            return self.end
        return self.start + (self.end - self.start) * episode / span


def constant_epsilon(eps: float) -> Callable[[int], float]:
    return lambda episode: eps


class QTable:
    def __init__(self, n_states: int, n_actions: int, alpha: float = 0.1, gamma: float = 0.95,
                 epsilon_schedule: Callable = EpsilonSchedule()):
        self.q = np.zeros((n_states, n_actions))
        self.alpha = float(alpha)
        self.gamma = float(gamma)
        self.epsilon_schedule = epsilon_schedule

    def epsilon(self, episode: int) -> float:
        eps = self.epsilon_schedule(episode)
        if not 0.0 <= eps <= 1.0:
            raise LearnerError(f"exploration rate {eps} outside [0, 1]")
        return eps

    def greedy(self, p: int) -> int:
        return int(np.argmax(self.q[p]))

    def copy(self) -> "QTable":
        other = QTable(*self.q.shape, self.alpha, self.gamma, self.epsilon_schedule)
        other.q = self.q.copy()
        return other


def q_update(qt: QTable, transition, terminal: bool) -> QTable:
    """Standard one-step Q-learning update; ``transition = (p, a, r, p_next)``."""
    p, a, r, p2 = transition
    if not math.isfinite(r):
        raise LearnerError(f"non-finite reward {r}")
    target = r if terminal else r + qt.gamma * qt.q[p2].max()
    qt.q[p, a] += qt.alpha * (target - qt.q[p, a])
    return qt


def epsilon_greedy(qt: QTable, p: int, episode: int, rng) -> int:
    """Random action with probability epsilon, else argmax (lowest index on ties)."""
    if rng.random() < qt.epsilon(episode):
        return int(rng.integers(qt.q.shape[1]))
    return int(np.argmax(qt.q[p]))


def greedy_actions(q: np.ndarray, tol: float = TIE_TOLERANCE) -> np.ndarray:
    """Per-row argmax treating values within ``tol`` of the maximum as ties."""
    best = q.max(axis=1, keepdims=True)
    return np.argmax(q >= best - tol, axis=1)


# --------------------------------------------------------------------------
# Teacher-guided annealing


@dataclass
class AnnealConfig:
    rho: float = 0.9
    visit_counts: Optional[np.ndarray] = None

    def __post_init__(self):
        if not 0.0 < self.rho < 1.0:
            raise LearnerError(f"rho must lie in (0, 1), got {self.rho}")

    def counts_for(self, n_q: int, n_events: int) -> np.ndarray:
        if self.visit_counts is None:
            self.visit_counts = np.zeros((n_q, n_events), dtype=np.int64)
        return self.visit_counts


def annealed_update(qt: QTable, transition, anneal: AnnealConfig, teacher: np.ndarray,
                    key: tuple, terminal: bool) -> QTable:
    """Q-update toward a blend of the teacher transition value and the usual target.

    ``key = (q, event)`` indexes ``teacher`` and the visit counts; the blend
    weight on the teacher is ``rho ** visits``.
    """
    p, a, r, p2 = transition
    if not math.isfinite(r):
        raise LearnerError(f"non-finite reward {r}")
    counts = anneal.counts_for(*teacher.shape)
    beta = anneal.rho ** counts[key]
    standard = r if terminal else r + qt.gamma * qt.q[p2].max()
    target = beta * teacher[key] + (1.0 - beta) * standard
    qt.q[p, a] += qt.alpha * (target - qt.q[p, a])
    counts[key] += 1
    return qt


# --------------------------------------------------------------------------
# Rewards defined on DFA transitions


class TransitionContext(NamedTuple):
    q: str
    event: str
    next_q: str
    accepted: bool


def _is_progress(dfa: Dfa, q, q2) -> bool:
    d = dfa.distances
    return d.get(q2, math.inf) < d.get(q, math.inf)


def known_reward(dfa: Dfa, ctx: TransitionContext) -> float:
    """Hand-crafted reference reward.

    +3 for an in-order subgoal, -1 for an out-of-order one, +9 for the final
    goal after all subgoals (-3 for the final goal reached early), -0.1 per step.
    """
    r = STEP_PENALTY
    if ctx.event == NULL:
        return r
    if ctx.accepted:
        return r + 9.0
    if _is_progress(dfa, ctx.q, ctx.next_q):
        return r + 3.0
    if ctx.event in dfa.goal_events:
        return r - 3.0
    if is_out_of_order(dfa, ctx.q, ctx.event):
        return r - 1.0
    return r


@dataclass(frozen=True)
class RMConstants:
    progress: float = 5.0
    out_of_order: float = -1.0
    terminal: float = 10.0
    step: float = STEP_PENALTY


def rm_reward(dfa: Dfa, ctx: TransitionContext, constants: RMConstants = RMConstants()) -> float:
    r = constants.step
    if _is_progress(dfa, ctx.q, ctx.next_q):
        r += constants.progress
    elif ctx.event != NULL and is_out_of_order(dfa, ctx.q, ctx.event):
        r += constants.out_of_order
    if ctx.accepted:
        r += constants.terminal
    return r


LPOPL_TERMINAL = 10.0


def lpopl_base_reward(dfa: Dfa, ctx: TransitionContext) -> float:
    return STEP_PENALTY + (LPOPL_TERMINAL if ctx.accepted else 0.0)


def lpopl_reward(dfa: Dfa, ctx: TransitionContext, gamma: float = 0.95) -> float:
    """Base reward plus the potential difference ``gamma*phi(q') - phi(q)``."""
    return lpopl_base_reward(dfa, ctx) + gamma * potential(dfa, ctx.next_q) - potential(dfa, ctx.q)


def distill_shaping_reward(dfa: Dfa, ctx: TransitionContext) -> float:
    return 1.0 if _is_progress(dfa, ctx.q, ctx.next_q) else STEP_PENALTY


REWARD_KINDS = ("known", "reward_machine", "lpopl", "lpopl_base", "distill_shaping")


def dfa_reward_table(dfa: Dfa, kind: str, gamma: float = 0.95,
                     rm_constants: RMConstants = RMConstants()) -> np.ndarray:
    """Reward for every ``(q, event)`` pair as an ``(n_q, n_events)`` array."""
    fns = {
        "known": known_reward,
        "reward_machine": lambda d, c: rm_reward(d, c, rm_constants),
        "lpopl": lambda d, c: lpopl_reward(d, c, gamma),
        "lpopl_base": lpopl_base_reward,
        "distill_shaping": distill_shaping_reward,
    }
    if kind not in fns:
        raise LearnerError(f"unknown reward kind {kind!r}")
    fn = fns[kind]
    table = np.zeros((len(dfa.states), len(dfa.events)))
    for i, q in enumerate(dfa.states):
        if q in dfa.accepting:
            continue
        for j, e in enumerate(dfa.events):
            q2 = dfa.transitions[(q, e)]
            table[i, j] = fn(dfa, TransitionContext(q, e, q2, q2 in dfa.accepting))
    return table


def reward_matrix(product: ProductMDP, table: np.ndarray) -> np.ndarray:
    """Lift a ``(q, event)`` reward table to ``(product_state, action)``."""
    R = table[product.q_of[:, None], product.event]
    R[product.terminal] = 0.0
    return R


@dataclass(frozen=True)
class RewardSource:
    """Which reward drives Q-learning: ``learned`` or one of ``REWARD_KINDS``."""

    kind: str
    gamma: float = 0.95
    rm_constants: RMConstants = RMConstants()
    model: Optional[RewardTable] = None
    step_cost: float = 0.1

    def matrix(self, product: ProductMDP) -> np.ndarray:
        if self.kind == "learned":
            if self.model is None:
                raise LearnerError("learned reward source needs a model")
            return learned_reward_matrix(product, self.model, self.step_cost)
        return reward_matrix(product, dfa_reward_table(product.dfa, self.kind, self.gamma,
                                                       self.rm_constants))


def learned_reward_matrix(product: ProductMDP, model: RewardTable, step_cost: float = 0.1) -> np.ndarray:
    """Learned reward shifted so that every step costs at least ``step_cost``.

    Preferences between equal-length rollouts leave a constant per-step
    offset undetermined. Fixing it so the largest entry is ``-step_cost``
    removes reward loops that would otherwise beat finishing the task,
    since episodes end only on acceptance.
    """
    R = model.flat_rewards() - (model.theta.max() + step_cost)
    R[product.terminal] = 0.0
    return R


# --------------------------------------------------------------------------
# Value iteration


def value_iteration(product: ProductMDP, rewards: np.ndarray, gamma: float,
                    tol: float = 1e-10, max_iter: int = 1_000_000) -> QTable:
    """Exact solve of the deterministic product MDP; accepting states are terminal."""
    if tol <= 0:
        raise LearnerError("tol must be positive")
    R = np.asarray(rewards, dtype=np.float64)
    if R.shape != (product.n, product.n_actions):
        raise LearnerError(f"reward matrix shape {R.shape} does not match the product")
    cont = ~product.terminal[product.next]
    cont[product.terminal] = False
    R = np.where(product.terminal[:, None], 0.0, R)
    q = np.zeros_like(R)
    for _ in range(max_iter):
        v = q.max(axis=1)
        new = R + gamma * np.where(cont, v[product.next], 0.0)
        diff = np.abs(new - q).max()
        q = new
        if diff < tol:
            break
    else:
        raise LearnerError("value iteration did not converge")
    qt = QTable(product.n, product.n_actions, alpha=0.0, gamma=gamma)
    qt.q = q
    return qt


def bellman_residual(product: ProductMDP, rewards: np.ndarray, q: np.ndarray, gamma: float) -> float:
    cont = ~product.terminal[product.next]
    cont[product.terminal] = False
    R = np.where(product.terminal[:, None], 0.0, rewards)
    target = R + gamma * np.where(cont, q.max(axis=1)[product.next], 0.0)
    return float(np.abs(target - q).max())


def greedy_return(product: ProductMDP, policy: np.ndarray, rewards: np.ndarray,
                  gamma: float, horizon: int) -> tuple:
    """Discounted return and acceptance of the deterministic greedy rollout."""
    p = product.initial
    total, g = 0.0, 1.0
    for _ in range(horizon):
        if product.terminal[p]:
            return total, True
        a = policy[p]
        total += g * rewards[p, a]
        g *= gamma
        p = product.next[p, a]
    return total, bool(product.terminal[p])


# --------------------------------------------------------------------------
# Episodes


@dataclass(frozen=True)
class EpisodeMetrics:
    episode: int
    steps: int
    cumulative_steps: int
    reference_reward: float
    accepted: bool


class _Episodes:
    """Shared Q-learning episode driver writing :class:`EpisodeMetrics`."""

    def __init__(self, product: ProductMDP, qt: QTable, rng, horizon: int):
        self.product = product
        self.qt = qt
        self.rng = rng
        self.horizon = horizon
        self.reference = RewardSource("known").matrix(product)
        self.metrics: list = []
        self.episode = 0
        self.cumulative = 0

    def run(self, n: int, R: np.ndarray, anneal: Optional[AnnealConfig] = None,
            teacher: Optional[np.ndarray] = None) -> None:
        prod, qt, rng = self.product, self.qt, self.rng
        Q, nxt, term, events, q_of = qt.q, prod.next, prod.terminal, prod.event, prod.q_of
        ref = self.reference
        alpha, gamma, n_actions = qt.alpha, qt.gamma, prod.n_actions
        counts = anneal.counts_for(*teacher.shape) if anneal is not None else None
        for _ in range(n):
            eps = qt.epsilon(self.episode)
            p = prod.initial
            total = 0.0
            steps = 0
            accepted = False
            for _t in range(self.horizon):
                if rng.random() < eps:
                    a = int(rng.integers(n_actions))
                else:
                    a = int(np.argmax(Q[p]))
                p2 = int(nxt[p, a])
                r = R[p, a]
                done = bool(term[p2])
                standard = r if done else r + gamma * Q[p2].max()
                if counts is not None:
                    key = (q_of[p], events[p, a])
                    beta = anneal.rho ** counts[key]
                    standard = beta * teacher[key] + (1.0 - beta) * standard
                    counts[key] += 1
                Q[p, a] += alpha * (standard - Q[p, a])
                total += ref[p, a]
                steps += 1
                p = p2
                if done:
                    accepted = True
                    break
            self.cumulative += steps
            self.metrics.append(EpisodeMetrics(self.episode, steps, self.cumulative,
                                               round(total, 10), accepted))
            self.episode += 1
        if not np.all(np.isfinite(Q)):
            raise LearnerError("Q-table diverged")


def q_learning(product: ProductMDP, rewards: np.ndarray, qt: QTable, episodes: int, rng,
               horizon: int, anneal: Optional[AnnealConfig] = None,
               teacher: Optional[np.ndarray] = None) -> list:
    """Run ``episodes`` epsilon-greedy Q-learning episodes in place; returns their metrics."""
    runner = _Episodes(product, qt, rng, horizon)
    runner.run(episodes, rewards, anneal, teacher)
    return runner.metrics


# --------------------------------------------------------------------------
# Training loops


@dataclass(frozen=True)
class LearnerConfig:
    alpha: float = 0.1
    gamma: float = 0.95
    eps_start: float = 1.0
    eps_end: float = 0.05
    eps_fraction: float = 0.6
    episodes: int = 3000
    horizon: Optional[int] = None
    # reward model
    n_init: int = 200
    reward_lr: float = 0.05
    reward_epochs: int = 50
    margin: float = 1.0
    l2: float = 0.0
    pairing: Pairing = Pairing(mode="nested", segment_length=10)
    # dynamic loop
    iterations: int = 20
    block: int = 200
    window: int = 3
    stability_tol: float = 0.01
    traj_per_iter: int = 50
    epochs_per_iter: int = 10
    rm_constants: RMConstants = RMConstants()
    # teacher-guided annealing (Pref+Plan)
    rho: float = 0.9
    teacher: Optional[object] = None

    def schedule(self, total_episodes: int) -> EpsilonSchedule:
        return EpsilonSchedule(self.eps_start, self.eps_end, self.eps_fraction, total_episodes)


class RunResult(NamedTuple):
    qtable: QTable
    metrics: list
    reward_model: Optional[RewardTable] = None
    reports: tuple = ()


def _horizon(env: LabeledEnv, config: LearnerConfig) -> int:
    return config.horizon or env.max_steps


def _teacher_array(config: LearnerConfig, dfa: Dfa):
    if config.teacher is None:
        return None, None
    return config.teacher.as_array(dfa), AnnealConfig(config.rho)


def run_baseline(env: LabeledEnv, dfa: Dfa, kind: str, config: LearnerConfig, rng,
                 product: Optional[ProductMDP] = None) -> RunResult:
    """Q-learning for ``config.episodes`` episodes on a fixed DFA-defined reward."""
    prod = product or ProductMDP(env, dfa)
    qt = QTable(prod.n, prod.n_actions, config.alpha, config.gamma, config.schedule(config.episodes))
    runner = _Episodes(prod, qt, rng, _horizon(env, config))
    R = RewardSource(kind, gamma=config.gamma, rm_constants=config.rm_constants).matrix(prod)
    teacher, anneal = _teacher_array(config, dfa)
    runner.run(config.episodes, R, anneal, teacher)
    return RunResult(qt, runner.metrics)


def train_with_snapshots(env: LabeledEnv, dfa: Dfa, kind: str, config: LearnerConfig, rng,
                         fractions=(0.25, 0.5), product: Optional[ProductMDP] = None) -> tuple:
    """Like :func:`run_baseline`, also returning Q-table copies taken at ``fractions`` of training."""
    prod = product or ProductMDP(env, dfa)
    qt = QTable(prod.n, prod.n_actions, config.alpha, config.gamma, config.schedule(config.episodes))
    runner = _Episodes(prod, qt, rng, _horizon(env, config))
    R = RewardSource(kind, gamma=config.gamma, rm_constants=config.rm_constants).matrix(prod)
    snapshots = []
    done = 0
    for f in fractions:
        n = int(round(f * config.episodes)) - done
        runner.run(n, R)
        done += n
        snapshots.append(qt.copy())
    runner.run(config.episodes - done, R)
    return qt, snapshots


def _new_reward_model(prod: ProductMDP, config: LearnerConfig) -> RewardTable:
    return RewardTable((prod.n_env, prod.n_q, prod.n_actions), config.gamma, config.margin, config.l2)


def run_static(env: LabeledEnv, dfa: Dfa, scorer: Callable, config: LearnerConfig, rng,
               product: Optional[ProductMDP] = None) -> RunResult:
    """Learn the reward once from random-policy preferences, then Q-learn against it."""
    prod = product or ProductMDP(env, dfa)
    horizon = _horizon(env, config)
    policy = random_policy(prod.n_actions)
    trajs = [prod.rollout(policy, rng, horizon) for _ in range(config.n_init)]
    prefs = generate_preferences(trajs, scorer, config.pairing, rng)
    model = _new_reward_model(prod, config)
    reports = ()
    if prefs:
        reports = (train(model, prefs, config.reward_lr, config.reward_epochs, rng),)
    qt = QTable(prod.n, prod.n_actions, config.alpha, config.gamma, config.schedule(config.episodes))
    runner = _Episodes(prod, qt, rng, horizon)
    teacher, anneal = _teacher_array(config, dfa)
    runner.run(config.episodes, RewardSource("learned", model=model).matrix(prod), anneal, teacher)
    return RunResult(qt, runner.metrics, model, reports)


def run_dynamic(env: LabeledEnv, dfa: Dfa, scorer: Callable, config: LearnerConfig, rng,
                product: Optional[ProductMDP] = None) -> RunResult:
    """Alternate on-policy preference collection, reward refinement and Q-learning blocks.

    Stops after ``iterations`` blocks (never exceeding ``episodes`` in
    total) or once the moving average (over the
    last ``window`` blocks) of the mean learned-reward episode return moves
    by at most ``stability_tol``.
    """
    prod = product or ProductMDP(env, dfa)
    horizon = _horizon(env, config)
    n_blocks = min(config.iterations, max(1, config.episodes // config.block))
    total = n_blocks * config.block
    qt = QTable(prod.n, prod.n_actions, config.alpha, config.gamma, config.schedule(total))
    runner = _Episodes(prod, qt, rng, horizon)
    model = _new_reward_model(prod, config)
    teacher, anneal = _teacher_array(config, dfa)
    buffer: list = []
    reports = []
    block_returns: list = []
    previous_avg = math.inf

    def behaviour(p, g):
        return epsilon_greedy(qt, p, runner.episode, g)

    for k in range(n_blocks):
        trajs = [prod.rollout(behaviour, rng, horizon) for _ in range(config.traj_per_iter)]
        buffer.extend(generate_preferences(trajs, scorer, config.pairing, rng))
        epochs = config.reward_epochs if k == 0 else config.epochs_per_iter
        if buffer:
            reports.append(train(model, buffer, config.reward_lr, epochs, rng))
        R = RewardSource("learned", model=model).matrix(prod)
        start = len(runner.metrics)
        runner.run(config.block, R, anneal, teacher)
        block_returns.append(_mean_learned_return(prod, R, qt, runner.metrics[start:]))
        avg = float(np.mean(block_returns[-config.window:]))
        change = abs(avg - previous_avg) if len(block_returns) > 1 else math.inf
        previous_avg = avg
        if change <= config.stability_tol or config.stability_tol == math.inf:
            break
    return RunResult(qt, runner.metrics, model, tuple(reports))


def _mean_learned_return(prod: ProductMDP, R: np.ndarray, qt: QTable, metrics: list) -> float:
    """Learned-reward return of the current greedy rollout, the block's stability signal."""
    policy = np.argmax(qt.q, axis=1)
    value, _ = greedy_return(prod, policy, R, 1.0 - 1e-12, max(m.steps for m in metrics) if metrics else 1)
    return value


# --------------------------------------------------------------------------
# Snapshot files


def save_qtable(qt: QTable, path) -> None:
    n, a = qt.q.shape
    lines = [f"# q-table alpha={qt.alpha!r} gamma={qt.gamma!r} shape={n},{a}"]
    for (i, j), v in np.ndenumerate(qt.q):
        if v != 0.0:
            lines.append(f"{i} {j} {float(v)!r}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_qtable(path) -> QTable:
    with open(path) as fh:
        lines = fh.read().splitlines()
    parts = lines[0].lstrip("#").split()
    if not parts or parts[0] != "q-table":
        raise LearnerError("not a q-table snapshot")
    head = dict(p.split("=", 1) for p in parts[1:])
    n, a = (int(x) for x in head["shape"].split(","))
    qt = QTable(n, a, float(head["alpha"]), float(head["gamma"]))
    for line in lines[1:]:
        if line.strip():
            i, j, v = line.split()
            qt.q[int(i), int(j)] = float(v)
    return qt
