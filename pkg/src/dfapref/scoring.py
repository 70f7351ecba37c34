"""DFA-derived trajectory scores and preference generation."""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations
from typing import Callable, Optional, Sequence

from .automaton import NULL, Dfa, distance_to_acceptance, progress_events
from .envs import LabeledEnv, ProductState, Trajectory

TIE_TOLERANCE = 1e-9


class ScoringError(ValueError):
    pass


@dataclass(frozen=True)
class ScoreWeights:
    w_s: float = 10.0
    w_d: float = 0.1
    w_q: float = 0.0
    baseline: bool = True

    def __post_init__(self):
        if min(self.w_s, self.w_d, self.w_q) < 0:
            raise ScoringError("score weights must be non-negative")

    def check_dominance(self, max_distance: float) -> None:
        """One more completed subgoal must outweigh any distance gap."""
        if self.w_s > 0 and not self.w_s > self.w_d * max_distance:
            raise ScoringError(
                f"w_s={self.w_s} does not dominate w_d*D_max={self.w_d * max_distance}"
            )

    def scaled(self, c: float) -> "ScoreWeights":
        return ScoreWeights(self.w_s * c, self.w_d * c, self.w_q * c, self.baseline)


@dataclass(frozen=True)
class Preference:
    """Outcome of comparing ``pair[0]`` and ``pair[1]``.

    ``preferred`` is 0 or 1, or ``None`` when the scores tie.
    """

    preferred: Optional[int]
    pair: tuple
    margin_scores: tuple

    @property
    def winner(self) -> Trajectory:
        if self.preferred is None:
            raise ScoringError("indifferent preference has no winner")
        return self.pair[self.preferred]

    @property
    def loser(self) -> Trajectory:
        if self.preferred is None:
            raise ScoringError("indifferent preference has no loser")
        return self.pair[1 - self.preferred]


def completed_subgoals(tau: Trajectory, dfa: Dfa) -> int:
    """Number of DFA progress steps between the start and the final state."""
    d0 = distance_to_acceptance(dfa, tau.start.dfa_state)
    d1 = distance_to_acceptance(dfa, tau.final.dfa_state)
    if d0 is None or d1 is None:
        raise ScoringError("trajectory visits a DFA state that cannot reach acceptance")
    return d0 - d1


def _manhattan(a: tuple, b: tuple) -> int:
    return sum(abs(x - y) for x, y in zip(a, b))


def distance_to_next_subgoal(tau: Trajectory, dfa: Dfa, env: LabeledEnv) -> float:
    """Manhattan distance from the final state to the nearest next-subgoal cell."""
    final = tau.final
    if final.dfa_state in dfa.accepting:
        return 0.0
    here = env.position_fn(final.env_state)
    cells = [c for e in progress_events(dfa, final.dfa_state)
             for c in env.subgoal_positions.get(e, ())]
    if not cells:
        raise ScoringError(f"no subgoal cell for DFA state {final.dfa_state!r} in {env.name}")
    return float(min(_manhattan(here, c) for c in cells))


def _check(tau: Trajectory, dfa: Dfa) -> None:
    q = tau.start.dfa_state
    for st in tau.steps:
        if st.dfa_state != q or dfa.transitions.get((q, st.event), None) != st.next_dfa_state:
            if q in dfa.accepting and st.next_dfa_state == q:
                continue
            raise ScoringError("trajectory is inconsistent with the DFA")
        q = st.next_dfa_state


def subtask_score(tau: Trajectory, dfa: Dfa, env: LabeledEnv, w: ScoreWeights,
                  validate: bool = True) -> float:
    if validate:
        _check(tau, dfa)
    return w.w_s * completed_subgoals(tau, dfa) - w.w_d * distance_to_next_subgoal(tau, dfa, env)


def transition_value_score(tau: Trajectory, dfa: Dfa, qv, baseline: bool = False) -> float:
    """Sum of transition values over the trajectory's DFA steps (null steps included).

    With ``baseline`` each step's value is taken relative to the null-event
    value of its DFA state, which removes the per-step drift that otherwise
    makes longer trajectories score higher.
    """
    if baseline:
        return math.fsum(qv.value(st.dfa_state, st.event) - qv.value(st.dfa_state, NULL)
                         for st in tau.steps)
    return math.fsum(qv.value(st.dfa_state, st.event) for st in tau.steps)


def combined_score(tau: Trajectory, dfa: Dfa, env: LabeledEnv, qv, w: ScoreWeights) -> float:
    score = 0.0
    if w.w_s or w.w_d:
        score += subtask_score(tau, dfa, env, w)
    if w.w_q:
        if qv is None:
            raise ScoringError("w_q > 0 needs a transition-value table")
        score += w.w_q * transition_value_score(tau, dfa, qv, w.baseline)
    return score


def make_scorer(env: LabeledEnv, dfa: Dfa, weights: ScoreWeights = ScoreWeights(),
                qv=None) -> Callable[[Trajectory], float]:
    weights.check_dominance(env.diameter)
    return lambda tau: combined_score(tau, dfa, env, qv, weights)


def _decide(s1: float, s2: float) -> Optional[int]:
    if abs(s1 - s2) <= TIE_TOLERANCE:
        return None
    return 0 if s1 > s2 else 1


def prefer(tau1: Trajectory, tau2: Trajectory, scorer: Callable) -> Preference:
    s1, s2 = scorer(tau1), scorer(tau2)
    return Preference(_decide(s1, s2), (tau1, tau2), (s1, s2))


@dataclass(frozen=True)
class Pairing:
    """How trajectories are paired for comparison.

    ``mode="all"`` pairs every trajectory with every other when there are at
    most ``max_all_pairs`` of them, else samples ``n_pairs`` distinct pairs.
    ``mode="nested"`` samples ``n_pairs`` pairs of two prefixes of one
    ``segment_length`` window cut from the same rollout, so the pair differs
    only in the steps between the two endpoints.
    """

    max_all_pairs: int = 60
    n_pairs: int = 2000
    mode: str = "all"
    segment_length: int = 20

    def __post_init__(self):
        if self.mode not in ("all", "nested"):
            raise ScoringError(f"unknown pairing mode {self.mode!r}")


def generate_preferences(trajs: Sequence[Trajectory], scorer: Callable,
                         pairing: Pairing = Pairing(), rng=None) -> list:
    """Score once per trajectory, pair them, and drop indifferent pairs."""
    if pairing.mode == "nested":
        return _nested_preferences(trajs, scorer, pairing, rng)
    n = len(trajs)
    if n < 2:
        raise ScoringError("need at least two trajectories")
    scores = [scorer(t) for t in trajs]
    if n <= pairing.max_all_pairs:
        pairs = list(combinations(range(n), 2))
    else:
        if rng is None:
            raise ScoringError("sampled pairing needs a random generator")
        total = n * (n - 1) // 2
        k = min(pairing.n_pairs, total)
        chosen = rng.choice(total, size=k, replace=False)
        pairs = [_unrank_pair(int(c), n) for c in sorted(chosen)]
    prefs = []
    for i, j in pairs:
        decided = _decide(scores[i], scores[j])
        if decided is not None:
            prefs.append(Preference(decided, (trajs[i], trajs[j]), (scores[i], scores[j])))
    return prefs


def _window(tau: Trajectory, start: int, length: int) -> Trajectory:
    steps = tau.steps[start:start + length]
    first = steps[0]
    end = start + length >= len(tau.steps)
    return Trajectory(ProductState(first.env_state, first.dfa_state), steps,
                      tau.accepted and end, tau.keys[start:start + length])


def _nested_preferences(trajs: Sequence[Trajectory], scorer: Callable, pairing: Pairing, rng) -> list:
    if rng is None:
        raise ScoringError("nested pairing needs a random generator")
    usable = [t for t in trajs if len(t) >= 2]
    if not usable:
        return []
    L = pairing.segment_length
    prefs = []
    for _ in range(pairing.n_pairs):
        tau = usable[rng.integers(len(usable))]
        start = int(rng.integers(len(tau)))
        room = min(L, len(tau) - start)
        if room < 2:
            continue
        l1, l2 = sorted(int(x) + 1 for x in rng.choice(room, size=2, replace=False))
        a, b = _window(tau, start, l1), _window(tau, start, l2)
        s1, s2 = scorer(a), scorer(b)
        decided = _decide(s1, s2)
        if decided is not None:
            prefs.append(Preference(decided, (a, b), (s1, s2)))
    return prefs


def _unrank_pair(k: int, n: int) -> tuple:
    """Map ``k`` in ``[0, n(n-1)/2)`` to the k-th pair ``(i, j)``, ``i < j``, in lexicographic order."""
    i = 0
    row = n - 1
    while k >= row:
        k -= row
        i += 1
        row -= 1
    return i, i + 1 + k
