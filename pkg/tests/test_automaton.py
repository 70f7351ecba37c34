import pytest
from hypothesis import given, settings, strategies as st

from dfapref.automaton import (NULL, DfaError, DfaSyntaxError, bundled_dfa_names,
                               distance_to_acceptance, is_out_of_order, load_dfa, make_dfa,
                               parse_dfa, potential, progress_events, run_trace,
                               serialize_dfa, step)

CHAIN3 = """\
dfa chain3
events: a g
states: q0 q1 q2
initial: q0
accepting: q2
q0 -a-> q1
q1 -g-> q2
"""


def test_parse_chain3_document():
    dfa = parse_dfa(CHAIN3)
    assert dfa.states == ("q0", "q1", "q2")
    assert dfa.accepting == frozenset({"q2"})
    assert dfa.events[0] == NULL


def test_parse_missing_initial():
    text = CHAIN3.replace("initial: q0\n", "")
    with pytest.raises(DfaError, match="missing initial"):
        parse_dfa(text)


def test_parse_missing_accepting():
    with pytest.raises(DfaError, match="accepting"):
        parse_dfa(CHAIN3.replace("accepting: q2\n", ""))


def test_parse_duplicate_transition():
    with pytest.raises(DfaError, match="duplicate"):
        parse_dfa(CHAIN3 + "q0 -a-> q2\n")


def test_parse_unknown_state():
    with pytest.raises(DfaError):
        parse_dfa(CHAIN3 + "q1 -a-> q9\n")


def test_syntax_error_reports_line():
    with pytest.raises(DfaSyntaxError) as err:
        parse_dfa(CHAIN3 + "q0 => q1\n")
    assert "8" in str(err.value)


def test_comments_and_blank_lines_ignored():
    text = "# header\n\n" + CHAIN3.replace("q0 -a-> q1", "q0 -a-> q1  # first")
    assert parse_dfa(text).transitions == parse_dfa(CHAIN3).transitions


def test_step_examples():
    dfa = parse_dfa(CHAIN3)
    assert step(dfa, "q0", NULL) == "q0"
    assert step(dfa, "q0", "a") == "q1"
    assert step(dfa, "q1", "a") == "q1"


def test_step_unknown_symbol():
    dfa = parse_dfa(CHAIN3)
    with pytest.raises(DfaError):
        step(dfa, "q7", "a")
    with pytest.raises(DfaError):
        step(dfa, "q0", "zzz")


def test_run_trace_examples():
    dfa = parse_dfa(CHAIN3)
    tr = run_trace(dfa, [NULL, "a", "g"])
    assert tr.visited == ("q0", "q0", "q1", "q2")
    assert tr.accepted and tr.progress_count == 2
    tr = run_trace(dfa, [])
    assert tr.visited == ("q0",) and not tr.accepted
    tr = run_trace(dfa, ["g", "a"])
    assert tr.visited == ("q0", "q0", "q1")
    assert not tr.accepted and tr.progress_count == 1


def test_run_trace_unknown_event():
    with pytest.raises(DfaError):
        run_trace(parse_dfa(CHAIN3), ["a", "boom"])


def test_distance_examples():
    dfa = parse_dfa(CHAIN3)
    assert distance_to_acceptance(dfa, "q0") == 2
    assert distance_to_acceptance(dfa, "q2") == 0


def test_distance_unreachable():
    dfa = make_dfa("split", ["a"], ["q0", "q1", "q2"], "q0", ["q2"], {("q0", "a"): "q1"})
    assert distance_to_acceptance(dfa, "q0") is None
    with pytest.raises(DfaError, match="q0"):
        potential(dfa, "q0")


def test_potential_examples():
    dfa = parse_dfa(CHAIN3)
    assert potential(dfa, "q0") == -2
    assert potential(dfa, "q1") == -1
    assert potential(dfa, "q2") == 0


def test_progress_events_examples():
    dfa = parse_dfa(CHAIN3)
    assert progress_events(dfa, "q0") == {"a"}
    assert progress_events(dfa, "q2") == frozenset()
    bridge = load_dfa("building_bridge")
    assert progress_events(bridge, bridge.initial) == {"wood", "iron"}


def test_out_of_order_detection():
    dfa = parse_dfa(CHAIN3)
    assert is_out_of_order(dfa, "q0", "g")  # self-loop here, progress from q1
    assert not is_out_of_order(dfa, "q1", "g")
    sword = load_dfa("iron_sword")
    assert is_out_of_order(sword, "q0", "stone")
    assert not is_out_of_order(sword, "q0", "wood")
    assert not is_out_of_order(sword, "q0", NULL)


@pytest.mark.parametrize("name", bundled_dfa_names())
def test_bundled_bellman_property(name):
    """d(q) = 0 on accepting states, else 1 + min over events of d(step)."""
    dfa = load_dfa(name)
    inf = float("inf")
    d = {q: distance_to_acceptance(dfa, q) for q in dfa.states}
    d = {q: inf if v is None else v for q, v in d.items()}
    for q in dfa.states:
        if q in dfa.accepting:
            assert d[q] == 0
        else:
            succ = [d[step(dfa, q, e)] for e in dfa.events if e != NULL]
            assert d[q] == 1 + min(succ)
        assert d[q] < inf  # bundled DFAs have no dead states


@pytest.mark.parametrize("name", bundled_dfa_names())
def test_bundled_null_self_loops(name):
    dfa = load_dfa(name)
    for q in dfa.states:
        assert step(dfa, q, NULL) == q


@pytest.mark.parametrize("name", bundled_dfa_names())
def test_serialize_roundtrip(name):
    dfa = load_dfa(name)
    back = parse_dfa(serialize_dfa(dfa))
    assert (back.name, back.states, back.initial, back.events, back.accepting) == \
        (dfa.name, dfa.states, dfa.initial, dfa.events, dfa.accepting)
    assert back.transitions == dfa.transitions


@settings(max_examples=60, deadline=None)
@given(name=st.sampled_from(bundled_dfa_names()), data=st.data())
def test_trace_progress_matches_distance_drop(name, data):
    """On bundled DFAs every transition keeps d or lowers it by one."""
    dfa = load_dfa(name)
    word = data.draw(st.lists(st.sampled_from(dfa.events), max_size=30))
    tr = run_trace(dfa, word)
    assert all(q in dfa.states for q in tr.visited)
    assert len(tr.visited) == len(word) + 1
    assert tr.accepted == (tr.visited[-1] in dfa.accepting)
    d = [distance_to_acceptance(dfa, q) for q in tr.visited]
    assert tr.progress_count == d[0] - d[-1]
