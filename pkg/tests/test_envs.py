from collections import deque

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dfapref.automaton import NULL, run_trace
from dfapref.envs import (ENV_NAMES, N_ENERGY, EnvError, ProductMDP, ProductState,
                          build_student_variant, enumerate_product_states, env_step, load_layout,
                          make_env, max_move, parse_layout, product_step, random_policy,
                          render_layout, rollout, split_trajectory)

GRIDS = ("iron_sword", "dungeon_quest", "blind_craftsman", "building_bridge")


def test_make_env_sizes():
    dims = {"iron_sword": (5, 5), "dungeon_quest": (7, 7), "blind_craftsman": (6, 6),
            "building_bridge": (8, 8)}
    for name, shape in dims.items():
        lay = make_env(name).layout
        assert (lay.rows, lay.cols) == shape


def test_make_env_dungeon_cells():
    env = make_env("dungeon_quest")
    assert set(env.subgoal_positions) == {"key", "chest", "shield", "dragon"}
    assert env.subgoal_order == ("key", "chest", "shield", "dragon")


def test_make_env_chain3_and_terrain():
    assert make_env("chain3").states == (0, 1, 2, 3)
    car = make_env("mountain_car")
    assert len(car.layout.terrain["heights"]) == 20
    assert {p for p, _, _ in car.states} == set(range(20))
    assert {e for _, e, _ in car.states} == set(range(N_ENERGY))
    assert len(car.layout.terrain["items"]) == 4  # three items and the base


def test_make_env_errors():
    with pytest.raises(EnvError):
        make_env("nowhere")
    with pytest.raises(EnvError):
        make_env("chain3", {"horizon": 0})
    with pytest.raises(EnvError):
        make_env("chain3", {"colour": "red"})


def test_env_step_chain3():
    env = make_env("chain3")
    assert env_step(env, 0, "right") == (1, NULL)
    assert env_step(env, 1, "right") == (2, "a")
    assert env_step(env, 0, "left") == (0, NULL)


def test_product_step_examples(chain3):
    env, dfa = chain3
    assert product_step(env, dfa, ProductState(1, "q0"), "right") == (ProductState(2, "q1"), "a")
    assert product_step(env, dfa, ProductState(3, "q2"), "right") == (ProductState(3, "q2"), NULL)


def test_product_step_dungeon_key():
    env = make_env("dungeon_quest")
    dfa = env.default_dfa()
    (kr, kc), = env.subgoal_positions["key"]
    for a, (dr, dc) in zip(env.actions, ((-1, 0), (1, 0), (0, -1), (0, 1))):
        src = (kr - dr, kc - dc)
        if src in env.state_index:
            nxt, event = product_step(env, dfa, ProductState(src, "q0"), a)
            assert event == "key" and nxt.dfa_state != "q0"
            return
    pytest.fail("no free neighbour of the key cell")


def test_rollout_examples(chain3):
    env, dfa = chain3
    rng = np.random.default_rng(0)
    tau = rollout(env, dfa, lambda ps, g: "right", rng, 10)
    assert len(tau) == 3 and tau.accepted
    tau = rollout(env, dfa, lambda ps, g: "left", rng, 5)
    assert len(tau) == 5 and not tau.accepted
    with pytest.raises(EnvError):
        rollout(env, dfa, lambda ps, g: "left", rng, 0)


def test_enumerate_product_states(chain3):
    env, dfa = chain3
    states = enumerate_product_states(env, dfa)
    assert len(states) == 12
    assert states == enumerate_product_states(env, dfa)
    dq = make_env("dungeon_quest")
    assert len(enumerate_product_states(dq, dq.default_dfa())) == len(dq.states) * 5


def test_product_index_matches_enumeration(chain3):
    env, dfa = chain3
    prod = ProductMDP(env, dfa)
    for i, ps in enumerate(enumerate_product_states(env, dfa)):
        assert prod.index(ps) == i and prod.state(i) == ps


@pytest.mark.parametrize("name", ENV_NAMES)
def test_product_tables_agree_with_product_step(name):
    env = make_env(name)
    dfa = env.default_dfa()
    prod = ProductMDP(env, dfa)
    for p in range(0, prod.n, max(1, prod.n // 400)):
        ps = prod.state(p)
        for a in range(prod.n_actions):
            nxt, _ = product_step(env, dfa, ps, a)
            assert prod.state(prod.next[p, a]) == nxt


def test_student_variant():
    sword = make_env("iron_sword")
    student = build_student_variant(sword, 10, 7)
    assert (student.layout.rows, student.layout.cols) == (10, 10)
    assert student.events == sword.events
    assert student.dfa_name == sword.dfa_name
    again = build_student_variant(sword, 10, 7)
    assert render_layout(again.layout) == render_layout(student.layout)
    dq = make_env("dungeon_quest")
    assert build_student_variant(dq, 7, 3) is dq
    with pytest.raises(EnvError):
        build_student_variant(dq, 5, 0)
    with pytest.raises(EnvError):
        build_student_variant(make_env("mountain_car"), 30, 0)


def _reachable_cells(env):
    lay = env.layout
    start = env.initial[:2]
    seen, frontier = {start}, deque([start])
    while frontier:
        r, c = frontier.popleft()
        for nxt in ((r - 1, c), (r + 1, c), (r, c - 1), (r, c + 1)):
            if (0 <= nxt[0] < lay.rows and 0 <= nxt[1] < lay.cols
                    and nxt not in lay.blocked and nxt not in seen):
                seen.add(nxt)
                frontier.append(nxt)
    return seen


@pytest.mark.parametrize("name,size", [("iron_sword", 10), ("dungeon_quest", 15),
                                       ("blind_craftsman", 12), ("building_bridge", 20)])
@pytest.mark.parametrize("seed", [0, 1])
def test_subgoals_reachable(name, size, seed):
    for env in (make_env(name), build_student_variant(make_env(name), size, seed)):
        cells = _reachable_cells(env)
        for ev, positions in env.subgoal_positions.items():
            assert all(pos in cells for pos in positions), (env.name, ev)


def test_layout_roundtrip():
    for name in ENV_NAMES:
        lay = load_layout(name)
        assert parse_layout(render_layout(lay)) == lay


@pytest.mark.parametrize("name", GRIDS)
def test_grid_moves_stay_free(name):
    env = make_env(name)
    lay = env.layout
    for s in env.states:
        for a in range(len(env.actions)):
            nxt, _ = env_step(env, s, a)
            r, c = nxt[:2]
            assert 0 <= r < lay.rows and 0 <= c < lay.cols
            assert (r, c) not in lay.blocked


def test_mountain_car_energy_and_range():
    env = make_env("mountain_car")
    for s in env.states:
        for a in range(len(env.actions)):
            nxt, _ = env_step(env, s, a)
            assert 0 <= nxt[1] < N_ENERGY
            assert abs(nxt[0] - s[0]) <= max_move(s[1])


@settings(max_examples=30, deadline=None)
@given(name=st.sampled_from(ENV_NAMES), seed=st.integers(0, 10_000))
def test_rollout_replays_through_dfa(name, seed):
    env = make_env(name)
    dfa = env.default_dfa()
    prod = ProductMDP(env, dfa)
    tau = prod.rollout(random_policy(prod.n_actions), np.random.default_rng(seed), 60)
    trace = run_trace(dfa, tau.events)
    assert trace.visited == (tau.start.dfa_state,) + tuple(s.next_dfa_state for s in tau.steps)
    for a, b in zip(tau.steps, tau.steps[1:]):
        assert (a.next_env_state, a.next_dfa_state) == (b.env_state, b.dfa_state)
    assert tau.accepted == trace.accepted


def test_split_trajectory(chain3_product):
    rng = np.random.default_rng(3)
    tau = chain3_product.rollout(random_policy(2), rng, 25)
    parts = split_trajectory(tau, 4)
    assert sum(len(p) for p in parts) == len(tau)
    assert tuple(s for p in parts for s in p.steps) == tau.steps
    with pytest.raises(EnvError):
        split_trajectory(tau, 0)
