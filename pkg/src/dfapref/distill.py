"""Teacher experience and distilled automaton-transition values."""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from .automaton import Dfa
from .envs import LabeledEnv, ProductMDP, ProductState
from .learner import LearnerConfig, QTable, RewardSource, run_baseline

TEACHER_EPSILON = 0.1


class DistillError(ValueError):
    pass


class Sample(NamedTuple):
    state: ProductState
    action: int
    reward: float
    next_state: ProductState
    event: str
    index: int  # product index of ``state``


@dataclass
class ExperienceSet:
    samples: list = field(default_factory=list)
    source_env: str = ""

    def __len__(self) -> int:
        return len(self.samples)


def train_teacher(env: LabeledEnv, dfa: Dfa, config: LearnerConfig = LearnerConfig(), rng=None,
                  kind: str = "distill_shaping") -> QTable:
    rng = rng if rng is not None else np.random.default_rng(0)
    return run_baseline(env, dfa, kind, config, rng).qtable


def collect_teacher_experience(env: LabeledEnv, dfa: Dfa, teacher_qt: QTable, episodes: int, rng,
                               epsilon: float = TEACHER_EPSILON, kind: str = "distill_shaping",
                               horizon: Optional[int] = None) -> ExperienceSet:
    """Record every step of ``episodes`` epsilon-greedy teacher rollouts."""
    prod = ProductMDP(env, dfa)
    if teacher_qt.q.shape != (prod.n, prod.n_actions):
        raise DistillError("teacher table does not match the product of env and dfa")
    R = RewardSource(kind, gamma=teacher_qt.gamma).matrix(prod)
    horizon = horizon or env.max_steps
    q = teacher_qt.q

    def policy(p, g):
        if g.random() < epsilon:
            return int(g.integers(prod.n_actions))
        return int(np.argmax(q[p]))

    samples = []
    for _ in range(episodes):
        tau = prod.rollout(policy, rng, horizon)
        p = prod.initial
        for st in tau.steps:
            a = st.action if isinstance(st.action, int) else env.action_index(st.action)
            samples.append(Sample(ProductState(st.env_state, st.dfa_state), a, float(R[p, a]),
                                  ProductState(st.next_env_state, st.next_dfa_state), st.event, p))
            p = int(prod.next[p, a])
    return ExperienceSet(samples, env.name)


def transition_counts(D: ExperienceSet) -> dict:
    counts: dict = defaultdict(int)
    for s in D.samples:
        counts[(s.state.dfa_state, s.event)] += 1
    return dict(counts)


@dataclass
class TransitionValueTable:
    """Mean teacher Q-value per automaton transition ``(q, event)``."""

    values: dict
    counts: dict
    default: float = 0.0
    dfa_name: str = ""

    def __post_init__(self):
        if set(self.values) != set(self.counts):
            raise DistillError("values and counts must share their keys")
        if any(c < 1 for c in self.counts.values()):
            raise DistillError("counts must be positive for keyed entries")

    def value(self, q, e) -> float:
        return self.values.get((q, e), self.default)

    def as_array(self, dfa: Dfa) -> np.ndarray:
        out = np.full((len(dfa.states), len(dfa.events)), float(self.default))
        for (q, e), v in self.values.items():
            out[dfa.state_index[q], dfa.event_index[e]] = v
        return out


def distill_values(D: ExperienceSet, teacher_qt: QTable, default: float = 0.0,
                   dfa_name: str = "") -> TransitionValueTable:
    """Average ``Q_teacher((s, q), a)`` over samples sharing ``(q, L(s'))``."""
    groups: dict = defaultdict(list)
    for s in D.samples:
        groups[(s.state.dfa_state, s.event)].append(float(teacher_qt.q[s.index, s.action]))
    # fsum keeps the mean independent of sample order
    values = {k: math.fsum(v) / len(v) for k, v in groups.items()}
    counts = {k: len(v) for k, v in groups.items()}
    return TransitionValueTable(values, counts, float(default), dfa_name)


def save_transition_values(table: TransitionValueTable, path) -> None:
    lines = [f"# transition-values dfa={table.dfa_name or '-'} default={table.default!r}"]
    for (q, e) in sorted(table.values):
        lines.append(f"{q} {e} {table.counts[(q, e)]} {table.values[(q, e)]!r}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_transition_values(path) -> TransitionValueTable:
    with open(path) as fh:
        lines = fh.read().splitlines()
    parts = lines[0].lstrip("#").split() if lines else []
    if not parts or parts[0] != "transition-values":
        raise DistillError(f"{path}: not a transition-value file")
    head = dict(p.split("=", 1) for p in parts[1:])
    values, counts = {}, {}
    for n, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            q, e, c, v = line.split()
            counts[(q, e)] = int(c)
            values[(q, e)] = float(v)
        except ValueError as exc:
            raise DistillError(f"{path}:{n}: malformed line {line!r}") from exc
    name = head.get("dfa", "-")
    return TransitionValueTable(values, counts, float(head["default"]), "" if name == "-" else name)
