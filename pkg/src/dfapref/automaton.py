"""Deterministic finite automata over single-event labels.

The event alphabet always contains the reserved ``NULL`` event, emitted by
environment states where no proposition holds. ``NULL`` self-loops in every
state and is never written in specification files.
"""

from __future__ import annotations

import math
import re
from collections import deque
from dataclasses import dataclass
from functools import cached_property
from importlib import resources
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

NULL = "null"

_NAME = re.compile(r"^[A-Za-z0-9_.]+$")
_TRANSITION = re.compile(r"^(\S+)\s+-(\S+)->\s+(\S+)$")


class DfaError(ValueError):
    """Malformed automaton or invalid usage."""


class DfaSyntaxError(DfaError):
    def __init__(self, message: str, line: int, column: int = 1):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


@dataclass(frozen=True, eq=False)
class Dfa:
    """A total DFA ``(Q, q0, events, delta, F)``.

    ``transitions`` maps ``(state, event)`` to a state for every pair;
    use :func:`make_dfa` to build one from a sparse rule set.
    """

    name: str
    states: tuple
    initial: str
    events: tuple
    transitions: Mapping
    accepting: frozenset

    def __post_init__(self):
        if self.initial not in self.states:
            raise DfaError(f"initial state {self.initial!r} is not a declared state")
        if not self.accepting <= set(self.states):
            raise DfaError(f"accepting states {sorted(self.accepting - set(self.states))} are not declared")
        if not self.events or self.events[0] != NULL:
            raise DfaError("event alphabet must start with the null event")
        for q in self.states:
            if self.transitions.get((q, NULL)) != q:
                raise DfaError(f"null event must self-loop in state {q!r}")
            for e in self.events:
                target = self.transitions.get((q, e))
                if target not in self.state_index:
                    raise DfaError(f"transition ({q!r}, {e!r}) is missing or leaves the state set")

    def __eq__(self, other):
        if not isinstance(other, Dfa):
            return NotImplemented
        return (self.name, self.states, self.initial, self.events, self.accepting) == (
            other.name, other.states, other.initial, other.events, other.accepting
        ) and dict(self.transitions) == dict(other.transitions)

    def __hash__(self):
        return hash((self.name, self.states, self.initial, self.events, self.accepting))

    @cached_property
    def state_index(self) -> dict:
        return {q: i for i, q in enumerate(self.states)}

    @cached_property
    def event_index(self) -> dict:
        return {e: i for i, e in enumerate(self.events)}

    @cached_property
    def delta(self) -> np.ndarray:
        """Integer transition table of shape ``(n_states, n_events)``."""
        table = np.empty((len(self.states), len(self.events)), dtype=np.int64)
        for (q, e), t in self.transitions.items():
            table[self.state_index[q], self.event_index[e]] = self.state_index[t]
        table.setflags(write=False)
        return table

    @cached_property
    def accepting_mask(self) -> np.ndarray:
        mask = np.array([q in self.accepting for q in self.states], dtype=bool)
        mask.setflags(write=False)
        return mask

    @cached_property
    def distances(self) -> dict:
        """Shortest event-word length from each state to acceptance (absent if unreachable)."""
        reverse: dict = {q: set() for q in self.states}
        for (q, e), t in self.transitions.items():
            if e != NULL and t != q:
                reverse[t].add(q)
        dist = {q: 0 for q in self.states if q in self.accepting}
        frontier = deque(q for q in self.states if q in self.accepting)
        while frontier:
            t = frontier.popleft()
            for q in sorted(reverse[t], key=self.state_index.get):
                if q not in dist:
                    dist[q] = dist[t] + 1
                    frontier.append(q)
        return dist

    @cached_property
    def goal_events(self) -> frozenset:
        """Events that move some non-accepting state into acceptance."""
        return frozenset(
            e for (q, e), t in self.transitions.items()
            if q not in self.accepting and t in self.accepting
        )

    @cached_property
    def subgoal_events(self) -> frozenset:
        """Events that are a progress transition from at least one state."""
        return frozenset(e for q in self.states for e in progress_events(self, q))


@dataclass(frozen=True)
class DfaTrace:
    visited: tuple
    accepted: bool
    progress_count: int


def make_dfa(name: str, events: Sequence[str], states: Sequence[str], initial: str,
             accepting: Iterable[str], rules: Mapping) -> Dfa:
    """Build a total DFA; pairs missing from ``rules`` self-loop."""
    events = tuple(events)
    if NULL in events:
        raise DfaError("the null event is implicit and may not be declared")
    alphabet = (NULL,) + events
    states = tuple(states)
    transitions = {(q, e): q for q in states for e in alphabet}
    for (q, e), t in rules.items():
        if (q, e) not in transitions:
            raise DfaError(f"rule ({q!r}, {e!r}) uses an undeclared state or event")
        transitions[(q, e)] = t
    return Dfa(name, states, initial, alphabet, transitions, frozenset(accepting))


def _split_decl(rest: str) -> list:
    return rest.split()


def parse_dfa(text: str) -> Dfa:
    """Parse the line-oriented DFA format.

    ::

        dfa chain3
        events: a g
        states: q0 q1 q2
        initial: q0
        accepting: q2
        q0 -a-> q1
        q1 -g-> q2
    """
    name = None
    decls: dict = {}
    decl_lines: dict = {}
    rules: dict = {}
    rule_lines: list = []

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].rstrip()
        if not line.strip():
            continue
        indent = len(line) - len(line.lstrip())
        line = line.strip()
        col = indent + 1
        if line.startswith("dfa ") or line == "dfa":
            if name is not None:
                raise DfaSyntaxError("duplicate dfa header", lineno, col)
            parts = line.split()
            if len(parts) != 2 or not _NAME.match(parts[1]):
                raise DfaSyntaxError("expected 'dfa <name>'", lineno, col)
            name = parts[1]
            continue
        key, sep, rest = line.partition(":")
        if sep and key in ("events", "states", "initial", "accepting"):
            if key in decls:
                raise DfaSyntaxError(f"duplicate {key} declaration", lineno, col)
            values = _split_decl(rest)
            for v in values:
                if not _NAME.match(v):
                    raise DfaSyntaxError(f"invalid identifier {v!r}", lineno, col + line.index(v))
            decls[key] = values
            decl_lines[key] = lineno
            continue
        m = _TRANSITION.match(line)
        if not m:
            raise DfaSyntaxError(f"unrecognised line {line!r}", lineno, col)
        rule_lines.append((lineno, col, line, m.groups()))

    if name is None:
        raise DfaSyntaxError("missing dfa header", 1)
    for key in ("events", "states", "initial", "accepting"):
        if key not in decls:
            raise DfaError(f"missing {key}")
    if len(decls["initial"]) != 1:
        raise DfaSyntaxError("initial takes exactly one state", decl_lines["initial"])
    events = decls["events"]
    states = decls["states"]
    if NULL in events:
        raise DfaSyntaxError("the null event is implicit", decl_lines["events"])
    for key in ("events", "states"):
        seen = set()
        for v in decls[key]:
            if v in seen:
                raise DfaSyntaxError(f"duplicate entry {v!r} in {key}", decl_lines[key])
            seen.add(v)
    known_states = set(states)
    for key in ("initial", "accepting"):
        for q in decls[key]:
            if q not in known_states:
                raise DfaError(f"unknown state {q!r} in {key} (line {decl_lines[key]})")

    for lineno, col, line, (src, event, dst) in rule_lines:
        for q in (src, dst):
            if q not in known_states:
                raise DfaSyntaxError(f"unknown state {q!r}", lineno, col + line.index(q))
        if event not in events:
            raise DfaSyntaxError(f"unknown event {event!r}", lineno, col + line.index(event))
        if (src, event) in rules:
            raise DfaSyntaxError(f"duplicate transition for ({src}, {event})", lineno, col)
        rules[(src, event)] = dst

    return make_dfa(name, events, states, decls["initial"][0], decls["accepting"], rules)


def serialize_dfa(dfa: Dfa) -> str:
    lines = [
        f"dfa {dfa.name}",
        "events: " + " ".join(dfa.events[1:]),
        "states: " + " ".join(dfa.states),
        f"initial: {dfa.initial}",
        "accepting: " + " ".join(q for q in dfa.states if q in dfa.accepting),
    ]
    for q in dfa.states:
        for e in dfa.events[1:]:
            t = dfa.transitions[(q, e)]
            if t != q:
                lines.append(f"{q} -{e}-> {t}")
    return "\n".join(lines) + "\n"


def load_dfa(name: str) -> Dfa:
    """Load one of the bundled automata by name."""
    path = resources.files("dfapref") / "data" / "dfas" / f"{name}.dfa"
    if not path.is_file():
        raise DfaError(f"no bundled DFA named {name!r}")
    return parse_dfa(path.read_text())


def bundled_dfa_names() -> list:
    root = resources.files("dfapref") / "data" / "dfas"
    return sorted(p.name[:-4] for p in root.iterdir() if p.name.endswith(".dfa"))


def _check_state(dfa: Dfa, q) -> None:
    if q not in dfa.state_index:
        raise DfaError(f"unknown state {q!r} for DFA {dfa.name}")


def step(dfa: Dfa, q, e):
    _check_state(dfa, q)
    if e not in dfa.event_index:
        raise DfaError(f"unknown event {e!r} for DFA {dfa.name}")
    return dfa.transitions[(q, e)]


def distance_to_acceptance(dfa: Dfa, q) -> Optional[int]:
    """BFS distance to the nearest accepting state, or ``None`` if unreachable."""
    _check_state(dfa, q)
    return dfa.distances.get(q)


def _dist(dfa: Dfa, q) -> float:
    return dfa.distances.get(q, math.inf)


def run_trace(dfa: Dfa, events: Sequence[str]) -> DfaTrace:
    q = dfa.initial
    visited = [q]
    progress = 0
    for e in events:
        nxt = step(dfa, q, e)
        if _dist(dfa, nxt) < _dist(dfa, q):
            progress += 1
        q = nxt
        visited.append(q)
    return DfaTrace(tuple(visited), q in dfa.accepting, progress)


def potential(dfa: Dfa, q) -> float:
    """Negated distance to acceptance; zero on accepting states."""
    d = distance_to_acceptance(dfa, q)
    if d is None:
        raise DfaError(f"state {q!r} cannot reach acceptance; potential undefined")
    return -float(d)


def progress_events(dfa: Dfa, q) -> frozenset:
    _check_state(dfa, q)
    here = _dist(dfa, q)
    return frozenset(
        e for e in dfa.events[1:] if _dist(dfa, dfa.transitions[(q, e)]) < here
    )


def is_out_of_order(dfa: Dfa, q, e) -> bool:
    """A subgoal event seen where it only self-loops."""
    if e == NULL or dfa.transitions[(q, e)] != q:
        return False
    return e in dfa.subgoal_events and e not in progress_events(dfa, q)
