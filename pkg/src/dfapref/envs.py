"""Finite labeled environments and their product with a DFA.

Bundled environments are described by small layout files under
``data/layouts``. Gridworld layouts use one character per cell: ``.`` free,
``#`` blocked, ``S`` start, and letters mapped to events by the ``legend``
header. The terrain layout (Mountain Car) lists heights and item positions
instead of a grid.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field, replace
from functools import cached_property
from importlib import resources
from typing import Callable, NamedTuple, Optional

import numpy as np

from .automaton import NULL, Dfa, load_dfa, step as dfa_step

GRID_ACTIONS = ("up", "down", "left", "right")
_MOVES = ((-1, 0), (1, 0), (0, -1), (0, 1))
CORRIDOR_ACTIONS = ("left", "right")
TERRAIN_ACTIONS = ("left", "right", "left2", "right2", "rest")

ENV_NAMES = ("iron_sword", "dungeon_quest", "blind_craftsman", "building_bridge",
             "mountain_car", "chain3", "dungeon_mini")
STUDENT_HORIZON = 500

# Blind Craftsman inventory limits.
MAX_WOOD = 2
N_TOOLS = 3


class EnvError(ValueError):
    pass


# --------------------------------------------------------------------------
# Layout files


@dataclass(frozen=True)
class Layout:
    name: str
    dfa: str
    kind: str
    horizon: int
    order: tuple = ()
    legend: dict = field(default_factory=dict)
    grid: tuple = ()
    start: Optional[str] = None
    student: Optional[int] = None
    terrain: dict = field(default_factory=dict)

    @property
    def rows(self) -> int:
        return len(self.grid)

    @property
    def cols(self) -> int:
        return len(self.grid[0]) if self.grid else 0

    def cells(self):
        for r, row in enumerate(self.grid):
            for c, ch in enumerate(row):
                yield (r, c), ch

    @property
    def start_cell(self) -> tuple:
        marker = self.start or "S"
        for cell, ch in self.cells():
            if ch == marker:
                return cell
        raise EnvError(f"layout {self.name} has no start cell {marker!r}")

    @property
    def blocked(self) -> frozenset:
        return frozenset(cell for cell, ch in self.cells() if ch == "#")

    def labeled_cells(self) -> dict:
        return {cell: self.legend[ch] for cell, ch in self.cells() if ch in self.legend}


def parse_layout(text: str) -> Layout:
    header: dict = {}
    grid: list = []
    in_grid = False
    for lineno, raw in enumerate(text.splitlines(), start=1):
        if in_grid:
            line = raw.rstrip()
            if line:
                grid.append(line)
            continue
        line = raw.split("#", 1)[0].strip() if not raw.lstrip().startswith("#") else ""
        if not line:
            continue
        key, sep, value = line.partition(":")
        if not sep:
            raise EnvError(f"layout line {lineno}: expected 'key: value'")
        key = key.strip()
        if key == "grid":
            in_grid = True
        else:
            header[key] = value.strip()

    try:
        kind = header["kind"]
        fields = dict(
            name=header["name"], dfa=header["dfa"], kind=kind,
            horizon=int(header["horizon"]),
            order=tuple(header.get("order", "").split()),
            start=header.get("start"),
            student=int(header["student"]) if "student" in header else None,
        )
    except KeyError as exc:
        raise EnvError(f"layout missing header {exc.args[0]!r}") from None
    if kind in ("grid", "corridor", "craftsman"):
        legend = {}
        for item in header.get("legend", "").split():
            letter, _, event = item.partition("=")
            if len(letter) != 1 or not event or letter in ".#S":
                raise EnvError(f"bad legend entry {item!r}")
            legend[letter] = event
        if not grid or len({len(row) for row in grid}) != 1:
            raise EnvError(f"layout {fields['name']}: grid rows must be non-empty and equal length")
        for row in grid:
            for ch in row:
                if ch not in ".#S" and ch not in legend:
                    raise EnvError(f"layout {fields['name']}: unknown cell character {ch!r}")
        return Layout(legend=legend, grid=tuple(grid), **fields)
    if kind == "terrain":
        items = {}
        for item in header["items"].split():
            event, _, pos = item.partition("=")
            items[event] = int(pos)
        terrain = dict(
            heights=tuple(int(h) for h in header["heights"].split()),
            obstacles=frozenset(int(p) for p in header.get("obstacles", "").split()),
            items=items,
            start=int(header["start"]),
            energy=int(header["energy"]),
        )
        fields["start"] = None
        return Layout(terrain=terrain, **fields)
    raise EnvError(f"unknown layout kind {kind!r}")


def render_layout(layout: Layout) -> str:
    lines = [f"name: {layout.name}", f"dfa: {layout.dfa}", f"kind: {layout.kind}"]
    if layout.legend:
        lines.append("legend: " + " ".join(f"{k}={v}" for k, v in layout.legend.items()))
    if layout.order:
        lines.append("order: " + " ".join(layout.order))
    lines.append(f"horizon: {layout.horizon}")
    if layout.student is not None:
        lines.append(f"student: {layout.student}")
    if layout.kind == "terrain":
        t = layout.terrain
        lines.append("heights: " + " ".join(map(str, t["heights"])))
        lines.append("obstacles: " + " ".join(map(str, sorted(t["obstacles"]))))
        lines.append("items: " + " ".join(f"{k}={v}" for k, v in t["items"].items()))
        lines.append(f"start: {t['start']}")
        lines.append(f"energy: {t['energy']}")
        return "\n".join(lines) + "\n"
    if layout.start:
        lines.append(f"start: {layout.start}")
    lines.append("grid:")
    lines.extend(layout.grid)
    return "\n".join(lines) + "\n"


def load_layout(name: str) -> Layout:
    path = resources.files("dfapref") / "data" / "layouts" / f"{name}.txt"
    if not path.is_file():
        raise EnvError(f"unknown environment {name!r}; choose from {', '.join(ENV_NAMES)}")
    return parse_layout(path.read_text())


# --------------------------------------------------------------------------
# Environments


@dataclass(frozen=True, eq=False)
class LabeledEnv:
    """A finite environment whose states emit single event labels.

    ``step_fn(state, action_index, rng)`` returns the next state and
    ``label_fn(state)`` the emitted event (``NULL`` when nothing holds).
    ``position_fn`` maps a state to grid coordinates for distance scoring.
    """

    name: str
    states: tuple
    initial: object
    actions: tuple
    step_fn: Callable
    label_fn: Callable
    subgoal_positions: dict
    subgoal_order: Optional[tuple]
    max_steps: int
    position_fn: Callable
    diameter: int
    dfa_name: str
    layout: Optional[Layout] = None
    deterministic: bool = True

    @cached_property
    def state_index(self) -> dict:
        return {s: i for i, s in enumerate(self.states)}

    def action_index(self, a) -> int:
        if isinstance(a, str):
            try:
                return self.actions.index(a)
            except ValueError:
                raise EnvError(f"unknown action {a!r} for {self.name}") from None
        if not 0 <= a < len(self.actions):
            raise EnvError(f"action index {a} out of range for {self.name}")
        return int(a)

    @property
    def events(self) -> frozenset:
        return frozenset(self.label_fn(s) for s in self.states)

    def default_dfa(self) -> Dfa:
        return load_dfa(self.dfa_name)


def env_step(env: LabeledEnv, s, a, rng=None):
    """Advance one step; returns ``(next_state, event)``."""
    nxt = env.step_fn(s, env.action_index(a), rng)
    return nxt, env.label_fn(nxt)


def _grid_free_cells(layout: Layout) -> list:
    return [cell for cell, ch in layout.cells() if ch != "#"]


def _grid_move(layout: Layout, free: frozenset, cell, a):
    dr, dc = _MOVES[a]
    nxt = (cell[0] + dr, cell[1] + dc)
    return nxt if nxt in free else cell


def _subgoal_positions(labeled: dict) -> dict:
    out: dict = {}
    for cell, event in sorted(labeled.items()):
        out.setdefault(event, []).append(cell)
    return {e: tuple(cells) for e, cells in out.items()}


def _grid_env(layout: Layout, horizon: int) -> LabeledEnv:
    cells = _grid_free_cells(layout)
    free = frozenset(cells)
    labeled = layout.labeled_cells()

    def step_fn(s, a, rng):
        return _grid_move(layout, free, s, a)

    def label_fn(s):
        return labeled.get(s, NULL)

    return LabeledEnv(
        name=layout.name, states=tuple(cells), initial=layout.start_cell,
        actions=GRID_ACTIONS, step_fn=step_fn, label_fn=label_fn,
        subgoal_positions=_subgoal_positions(labeled), subgoal_order=layout.order or None,
        max_steps=horizon, position_fn=lambda s: s,
        diameter=layout.rows + layout.cols - 2, dfa_name=layout.dfa, layout=layout,
    )


def _corridor_env(layout: Layout, horizon: int) -> LabeledEnv:
    if layout.rows != 1:
        raise EnvError("corridor layouts have exactly one row")
    n = layout.cols
    labeled = {c: ev for (_, c), ev in layout.labeled_cells().items()}

    def step_fn(s, a, rng):
        return max(0, s - 1) if a == 0 else min(n - 1, s + 1)

    def label_fn(s):
        return labeled.get(s, NULL)

    return LabeledEnv(
        name=layout.name, states=tuple(range(n)), initial=layout.start_cell[1],
        actions=CORRIDOR_ACTIONS, step_fn=step_fn, label_fn=label_fn,
        subgoal_positions={e: tuple((c,) for c in cs) for e, cs in
                           _subgoal_positions(labeled).items()},
        subgoal_order=layout.order or None, max_steps=horizon,
        position_fn=lambda s: (s,), diameter=n - 1, dfa_name=layout.dfa, layout=layout,
    )


def _craftsman_env(layout: Layout, horizon: int) -> LabeledEnv:
    """Grid with carried wood (0..2) and crafted tools (0..3) in the state.

    Standing on a wood cell picks up one piece (up to two carried); standing
    on the factory with wood crafts one tool.
    """
    cells = _grid_free_cells(layout)
    free = frozenset(cells)
    labeled = layout.labeled_cells()
    states = tuple((r, c, w, t) for (r, c) in cells
                   for w in range(MAX_WOOD + 1) for t in range(N_TOOLS + 1))
    start = layout.start_cell

    def step_fn(s, a, rng):
        r, c, wood, tools = s
        r, c = _grid_move(layout, free, (r, c), a)
        event = labeled.get((r, c))
        if event == "wood" and wood < MAX_WOOD:
            wood += 1
        elif event == "factory" and wood >= 1 and tools < N_TOOLS:
            wood -= 1
            tools += 1
        return (r, c, wood, tools)

    def label_fn(s):
        return labeled.get((s[0], s[1]), NULL)

    return LabeledEnv(
        name=layout.name, states=states, initial=(start[0], start[1], 0, 0),
        actions=GRID_ACTIONS, step_fn=step_fn, label_fn=label_fn,
        subgoal_positions=_subgoal_positions(labeled), subgoal_order=layout.order or None,
        max_steps=horizon, position_fn=lambda s: (s[0], s[1]),
        diameter=layout.rows + layout.cols - 2, dfa_name=layout.dfa, layout=layout,
    )


N_ENERGY = 5
ITEM_BITS = ("power", "sensor", "crystal")


def max_move(energy: int) -> int:
    """Largest move distance allowed at an energy level."""
    if energy == 0:
        return 0
    return 1 if energy <= 2 else 2


def move_cost(terrain: dict, src: int, dst: int) -> int:
    heights = terrain["heights"]
    cost = 1 + max(0, heights[dst] - heights[src])
    if dst in terrain["obstacles"]:
        cost += 1
    return cost


def _terrain_env(layout: Layout, horizon: int) -> LabeledEnv:
    """1-D terrain; state is ``(position, energy, inventory_mask)``.

    Moves of one or two cells are limited by energy and cost
    ``1 + height gain (+1 landing on an obstacle)``. Unaffordable or
    out-of-range moves leave the state unchanged; ``rest`` restores one level.
    """
    terrain = layout.terrain
    n = len(terrain["heights"])
    items = terrain["items"]
    at = {pos: ev for ev, pos in items.items()}
    states = tuple((p, e, m) for p in range(n) for e in range(N_ENERGY)
                   for m in range(1 << len(ITEM_BITS)))
    deltas = (-1, 1, -2, 2)

    def step_fn(s, a, rng):
        pos, energy, mask = s
        if TERRAIN_ACTIONS[a] == "rest":
            return (pos, min(N_ENERGY - 1, energy + 1), mask)
        d = deltas[a]
        dst = pos + d
        if abs(d) > max_move(energy) or not 0 <= dst < n:
            return s
        cost = move_cost(terrain, pos, dst)
        if cost > energy:
            return s
        event = at.get(dst)
        if event in ITEM_BITS:
            mask |= 1 << ITEM_BITS.index(event)
        return (dst, energy - cost, mask)

    def label_fn(s):
        return at.get(s[0], NULL)

    return LabeledEnv(
        name=layout.name, states=states, initial=(terrain["start"], terrain["energy"], 0),
        actions=TERRAIN_ACTIONS, step_fn=step_fn, label_fn=label_fn,
        subgoal_positions={ev: ((pos,),) for ev, pos in items.items()},
        subgoal_order=layout.order or None, max_steps=horizon,
        position_fn=lambda s: (s[0],), diameter=n - 1, dfa_name=layout.dfa, layout=layout,
    )


_BUILDERS = {"grid": _grid_env, "corridor": _corridor_env,
             "craftsman": _craftsman_env, "terrain": _terrain_env}


def env_from_layout(layout: Layout, horizon: Optional[int] = None) -> LabeledEnv:
    return _BUILDERS[layout.kind](layout, horizon or layout.horizon)


def make_env(name: str, params: Optional[dict] = None) -> LabeledEnv:
    """Build a bundled environment. ``params`` may override ``horizon``."""
    params = dict(params or {})
    horizon = params.pop("horizon", None)
    if params:
        raise EnvError(f"unknown environment parameters: {sorted(params)}")
    if horizon is not None and (not isinstance(horizon, int) or horizon < 1):
        raise EnvError(f"horizon must be a positive integer, got {horizon!r}")
    if name not in ENV_NAMES:
        raise EnvError(f"unknown environment {name!r}; choose from {', '.join(ENV_NAMES)}")
    return env_from_layout(load_layout(name), horizon)


# --------------------------------------------------------------------------
# Student variants


def _grid_reachable(rows: int, cols: int, blocked: set, start) -> set:
    seen = {start}
    frontier = deque([start])
    while frontier:
        r, c = frontier.popleft()
        for dr, dc in _MOVES:
            nxt = (r + dr, c + dc)
            if 0 <= nxt[0] < rows and 0 <= nxt[1] < cols and nxt not in blocked and nxt not in seen:
                seen.add(nxt)
                frontier.append(nxt)
    return seen


def build_student_variant(env: LabeledEnv, scale, obstacle_seed: int) -> LabeledEnv:
    """Enlarge a gridworld, keeping its events and DFA.

    Labeled cells keep their relative placement (scaled and snapped to the
    new grid); obstacles are drawn from ``obstacle_seed`` at the source
    obstacle density while keeping every free cell connected.
    """
    layout = env.layout
    if layout is None or layout.kind not in ("grid", "craftsman"):
        raise EnvError(f"{env.name} is not a gridworld")
    rows, cols = (scale, scale) if isinstance(scale, int) else tuple(scale)
    if rows < layout.rows or cols < layout.cols:
        raise EnvError(f"target size {rows}x{cols} is smaller than {layout.rows}x{layout.cols}")
    if (rows, cols) == (layout.rows, layout.cols):
        return env

    def scaled(cell):
        r, c = cell
        return (round(r * (rows - 1) / max(1, layout.rows - 1)),
                round(c * (cols - 1) / max(1, layout.cols - 1)))

    marks: dict = {}
    for cell, ch in layout.cells():
        if ch == "#" or ch == ".":
            continue
        target = scaled(cell)
        # Resolve collisions by scanning outward in BFS order.
        if target in marks:
            frontier = deque([target])
            seen = {target}
            while target in marks:
                cur = frontier.popleft()
                for dr, dc in _MOVES:
                    nxt = (cur[0] + dr, cur[1] + dc)
                    if 0 <= nxt[0] < rows and 0 <= nxt[1] < cols and nxt not in seen:
                        seen.add(nxt)
                        frontier.append(nxt)
                        if nxt not in marks:
                            target = nxt
                            break
        marks[target] = ch

    rng = np.random.default_rng(obstacle_seed)
    density = len(layout.blocked) / (layout.rows * layout.cols)
    n_obstacles = round(density * rows * cols)
    candidates = [(r, c) for r in range(rows) for c in range(cols) if (r, c) not in marks]
    order = rng.permutation(len(candidates))
    blocked: set = set()
    start = next(iter(marks))
    n_free = rows * cols
    for i in order:
        if len(blocked) >= n_obstacles:
            break
        cell = candidates[i]
        blocked.add(cell)
        if len(_grid_reachable(rows, cols, blocked, start)) != n_free - len(blocked):
            blocked.discard(cell)

    grid = []
    for r in range(rows):
        grid.append("".join(marks.get((r, c), "#" if (r, c) in blocked else ".")
                            for c in range(cols)))
    student = replace(layout, name=f"{layout.name}_{rows}x{cols}_s{obstacle_seed}",
                      grid=tuple(grid), horizon=STUDENT_HORIZON, student=None)
    return env_from_layout(student)


# --------------------------------------------------------------------------
# Product with a DFA


class ProductState(NamedTuple):
    env_state: object
    dfa_state: str


class Step(NamedTuple):
    env_state: object
    dfa_state: str
    action: int
    next_env_state: object
    next_dfa_state: str
    event: str


@dataclass(frozen=True)
class Trajectory:
    """A rollout in the product MDP.

    ``keys`` holds ``(env_state_index, dfa_state_index, action)`` per step,
    the indexing used by tabular reward models.
    """

    start: ProductState
    steps: tuple
    accepted: bool
    keys: tuple = ()

    def __len__(self) -> int:
        return len(self.steps)

    @property
    def final(self) -> ProductState:
        if not self.steps:
            return self.start
        last = self.steps[-1]
        return ProductState(last.next_env_state, last.next_dfa_state)

    @property
    def events(self) -> tuple:
        return tuple(s.event for s in self.steps)


def split_trajectory(tau: Trajectory, length: int) -> list:
    """Cut ``tau`` into consecutive segments of at most ``length`` steps.

    Each segment starts at the product state its first step leaves; only a
    final segment that ends in acceptance is marked accepted.
    """
    if length < 1:
        raise EnvError("segment length must be at least 1")
    out = []
    for i in range(0, len(tau.steps), length):
        steps = tau.steps[i:i + length]
        first = steps[0]
        last = i + length >= len(tau.steps)
        out.append(Trajectory(ProductState(first.env_state, first.dfa_state), steps,
                              tau.accepted and last, tau.keys[i:i + length]))
    return out


def product_step(env: LabeledEnv, dfa: Dfa, ps: ProductState, a, rng=None):
    """One product transition; accepting DFA states are absorbing."""
    if ps.dfa_state in dfa.accepting:
        return ps, NULL
    nxt, event = env_step(env, ps.env_state, a, rng)
    return ProductState(nxt, dfa_step(dfa, ps.dfa_state, event)), event


def enumerate_product_states(env: LabeledEnv, dfa: Dfa) -> list:
    return [ProductState(s, q) for s in env.states for q in dfa.states]


class ProductMDP:
    """Integer-indexed product of a deterministic environment and a DFA.

    Product index ``p = env_index * n_q + dfa_index``, matching
    :func:`enumerate_product_states`.
    """

    def __init__(self, env: LabeledEnv, dfa: Dfa):
        if not env.deterministic:
            raise EnvError(f"{env.name} is stochastic; the tabular product needs enumerable dynamics")
        self.env = env
        self.dfa = dfa
        self.n_env = len(env.states)
        self.n_q = len(dfa.states)
        self.n_actions = len(env.actions)
        self.n = self.n_env * self.n_q
        index = env.state_index
        env_next = np.empty((self.n_env, self.n_actions), dtype=np.int64)
        labels = np.empty(self.n_env, dtype=np.int64)
        for i, s in enumerate(env.states):
            ev = env.label_fn(s)
            if ev not in dfa.event_index:
                raise EnvError(f"{env.name} emits {ev!r}, which DFA {dfa.name} does not know")
            labels[i] = dfa.event_index[ev]
            for a in range(self.n_actions):
                env_next[i, a] = index[env.step_fn(s, a, None)]
        self.env_next = env_next
        self.labels = labels
        delta = dfa.delta
        q_acc = dfa.accepting_mask
        p = np.arange(self.n)
        s_of, q_of = np.divmod(p, self.n_q)
        self.env_of = s_of
        self.q_of = q_of
        nxt_s = env_next[s_of]                       # (n, A)
        event = labels[nxt_s]                         # (n, A)
        nxt_q = delta[q_of[:, None], event]
        self.next = nxt_s * self.n_q + nxt_q
        self.event = event
        absorbing = q_acc[q_of]
        self.next[absorbing] = p[absorbing, None]
        self.event[absorbing] = 0
        self.terminal = q_acc[q_of].copy()
        self.initial = index[env.initial] * self.n_q + dfa.state_index[dfa.initial]

    def index(self, ps: ProductState) -> int:
        return self.env.state_index[ps.env_state] * self.n_q + self.dfa.state_index[ps.dfa_state]

    def state(self, p: int) -> ProductState:
        s, q = divmod(int(p), self.n_q)
        return ProductState(self.env.states[s], self.dfa.states[q])

    def reachable(self) -> np.ndarray:
        """Product states reachable from the initial state (terminal states not expanded)."""
        seen = np.zeros(self.n, dtype=bool)
        seen[self.initial] = True
        frontier = [self.initial]
        while frontier:
            p = frontier.pop()
            if self.terminal[p]:
                continue
            for nxt in self.next[p]:
                if not seen[nxt]:
                    seen[nxt] = True
                    frontier.append(int(nxt))
        return seen

    def rollout(self, policy: Callable, rng, horizon: int, start: Optional[int] = None) -> Trajectory:
        """Roll out ``policy(p, rng) -> action`` until acceptance or ``horizon`` steps."""
        if horizon < 1:
            raise EnvError("horizon must be at least 1")
        p = self.initial if start is None else start
        env_states, dfa_states, events = self.env.states, self.dfa.states, self.dfa.events
        nq = self.n_q
        steps = []
        keys = []
        accepted = bool(self.terminal[p])
        for _ in range(horizon if not accepted else 0):
            a = int(policy(p, rng))
            nxt = int(self.next[p, a])
            s, q = divmod(p, nq)
            s2, q2 = divmod(nxt, nq)
            steps.append(Step(env_states[s], dfa_states[q], a, env_states[s2], dfa_states[q2],
                              events[self.event[p, a]]))
            keys.append((s, q, a))
            p = nxt
            if self.terminal[p]:
                accepted = True
                break
        return Trajectory(self.state(self.initial if start is None else start),
                          tuple(steps), accepted, tuple(keys))


def rollout(env: LabeledEnv, dfa: Dfa, policy: Callable, rng, horizon: int,
            product: Optional[ProductMDP] = None) -> Trajectory:
    """Roll out ``policy(ProductState, rng) -> action`` from the initial state."""
    prod = product or ProductMDP(env, dfa)
    return prod.rollout(lambda p, g: env.action_index(policy(prod.state(p), g)), rng, horizon)


def random_policy(n_actions: int) -> Callable:
    return lambda p, rng: rng.integers(n_actions)
