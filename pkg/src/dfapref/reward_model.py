"""Tabular reward model trained with a pairwise hinge ranking loss."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .envs import Trajectory


class TrainingDiverged(RuntimeError):
    pass


class RewardTable:
    """Learned reward ``r(s, q, a)`` stored as a dense table."""

    def __init__(self, shape, gamma: float = 0.95, margin: float = 1.0, l2: float = 0.0):
        if not 0.0 < gamma < 1.0:
            raise ValueError(f"gamma must lie in (0, 1), got {gamma}")
        if not margin > 0.0:
            raise ValueError(f"margin must be positive, got {margin}")
        self.theta = np.zeros(tuple(shape), dtype=np.float64)
        self.gamma = float(gamma)
        self.margin = float(margin)
        self.l2 = float(l2)

    @property
    def shape(self) -> tuple:
        return self.theta.shape

    def reward(self, s: int, q: int, a: int) -> float:
        for i, n in zip((s, q, a), self.theta.shape):
            if not 0 <= i < n:
                raise IndexError(f"index {(s, q, a)} outside reward table of shape {self.theta.shape}")
        return float(self.theta[s, q, a])

    def features(self, tau: Trajectory):
        """Flat indices and summed discount weights of the entries ``tau`` touches."""
        if len(tau.keys) != len(tau.steps):
            raise ValueError("trajectory has no index keys")
        if not tau.keys:
            return np.zeros(0, dtype=np.int64), np.zeros(0)
        keys = np.asarray(tau.keys, dtype=np.int64)
        flat = np.ravel_multi_index(keys.T, self.theta.shape)
        weights = self.gamma ** np.arange(len(keys), dtype=np.float64)
        idx, inv = np.unique(flat, return_inverse=True)
        return idx, np.bincount(inv.ravel(), weights=weights, minlength=len(idx))

    def flat_rewards(self) -> np.ndarray:
        """View of ``theta`` as ``(n_env * n_q, n_actions)``, the product-MDP layout."""
        s, q, a = self.theta.shape
        return self.theta.reshape(s * q, a)


def trajectory_return(model: RewardTable, tau: Trajectory) -> float:
    """Discounted learned return of a trajectory."""
    total = 0.0
    g = 1.0
    for s, q, a in tau.keys:
        total += g * model.theta[s, q, a]
        g *= model.gamma
    return total


class _PairSet:
    """Sparse difference features ``phi(winner) - phi(loser)`` for each pair."""

    def __init__(self, model: RewardTable, prefs: Sequence):
        cache: dict = {}

        def feats(tau):
            key = id(tau)
            if key not in cache:
                cache[key] = (tau, model.features(tau))
            return cache[key][1]

        self.diffs = []
        for p in prefs:
            wi, ww = feats(p.winner)
            li, lw = feats(p.loser)
            idx = np.concatenate([wi, li])
            w = np.concatenate([ww, -lw])
            u, inv = np.unique(idx, return_inverse=True)
            d = np.bincount(inv.ravel(), weights=w, minlength=len(u))
            keep = d != 0.0
            self.diffs.append((u[keep], d[keep]))

    def margins(self, flat_theta: np.ndarray) -> np.ndarray:
        return np.array([flat_theta[i] @ w for i, w in self.diffs])


def ranking_loss(model: RewardTable, prefs: Sequence) -> float:
    """Sum over pairs of ``max(0, m - (R(winner) - R(loser)))``."""
    total = 0.0
    for p in prefs:
        gap = trajectory_return(model, p.winner) - trajectory_return(model, p.loser)
        total += max(0.0, model.margin - gap)
    return total


def ranking_loss_grad(model: RewardTable, prefs: Sequence) -> np.ndarray:
    """Subgradient of :func:`ranking_loss` with respect to ``theta``."""
    grad = np.zeros(model.theta.size)
    flat = model.theta.ravel()
    for idx, w in _PairSet(model, prefs).diffs:
        if model.margin - flat[idx] @ w > 0:
            np.subtract.at(grad, idx, w)
    return grad.reshape(model.theta.shape)


@dataclass(frozen=True)
class TrainReport:
    epochs_run: int
    final_loss: float
    pair_accuracy: float


def pair_accuracy(model: RewardTable, prefs: Sequence) -> float:
    if not prefs:
        return 1.0
    hits = sum(trajectory_return(model, p.winner) > trajectory_return(model, p.loser) for p in prefs)
    return hits / len(prefs)


def train(model: RewardTable, prefs: Sequence, lr: float = 0.05, epochs: int = 50,
          rng=None, backtrack: bool = False, max_halvings: int = 40) -> TrainReport:
    """Per-pair subgradient descent on the ranking loss.

    Each epoch visits the pairs in a fresh random order; an active pair adds
    ``lr * gamma**t`` to every entry the winner touches at step ``t`` and
    subtracts the same from the loser's entries. Stops early once every pair
    clears the margin.

    With ``backtrack`` an epoch that raises the total loss is undone and
    retried (same visiting order) at half the step size; the next epoch
    starts again from ``lr``. Training stops if one epoch is rejected
    ``max_halvings`` times in a row.
    """
    if not prefs:
        raise ValueError("need at least one preference")
    if lr < 0:
        raise ValueError("learning rate must be non-negative")
    rng = rng if rng is not None else np.random.default_rng(0)
    pairs = _PairSet(model, prefs)
    flat = model.theta.reshape(-1)
    m = model.margin
    diffs = pairs.diffs

    def total_loss():
        margins = pairs.margins(flat)
        if not np.all(np.isfinite(margins)):
            raise TrainingDiverged(f"non-finite trajectory returns after epoch {epochs_run}")
        return float(np.maximum(0.0, m - margins).sum()), margins

    epochs_run = 0
    loss, margins = total_loss()
    halvings = 0
    step = lr
    order = None
    while epochs_run < epochs and halvings <= max_halvings:
        if np.all(margins >= m):
            break
        before = flat.copy() if backtrack else None
        if order is None:
            order = rng.permutation(len(diffs))
        for k in order:
            idx, w = diffs[k]
            if m - flat[idx] @ w > 0:
                flat[idx] += step * w
        if model.l2:
            flat *= 1.0 - step * model.l2
        if not np.all(np.isfinite(flat)):
            raise TrainingDiverged(f"non-finite reward parameters after epoch {epochs_run + 1}")
        new_loss, new_margins = total_loss()
        if backtrack and new_loss > loss:
            flat[:] = before
            step *= 0.5
            halvings += 1
            continue
        halvings = 0
        step = lr
        order = None
        epochs_run += 1
        loss, margins = new_loss, new_margins
    acc = float(np.mean(margins > 0)) if len(margins) else 1.0
    return TrainReport(epochs_run, loss, acc)


# --------------------------------------------------------------------------
# Snapshot files


def save_reward_model(model: RewardTable, path) -> None:
    s, q, a = model.theta.shape
    lines = [f"# reward-model gamma={model.gamma!r} margin={model.margin!r} l2={model.l2!r} "
             f"shape={s},{q},{a}"]
    for (i, j, k), v in np.ndenumerate(model.theta):
        if v != 0.0:
            lines.append(f"{i} {j} {k} {float(v)!r}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def _parse_header(line: str, kind: str) -> dict:
    parts = line.lstrip("#").split()
    if not parts or parts[0] != kind:
        raise ValueError(f"not a {kind} snapshot")
    return dict(p.split("=", 1) for p in parts[1:])


def load_reward_model(path) -> RewardTable:
    with open(path) as fh:
        lines = fh.read().splitlines()
    head = _parse_header(lines[0], "reward-model")
    shape = tuple(int(x) for x in head["shape"].split(","))
    model = RewardTable(shape, float(head["gamma"]), float(head["margin"]), float(head["l2"]))
    for line in lines[1:]:
        if line.strip():
            i, j, k, v = line.split()
            model.theta[int(i), int(j), int(k)] = float(v)
    return model
