"""Acceptance gate: one test per criterion, each recording a PASS/FAIL line."""

import time

import numpy as np

from conftest import record_criterion
from dfapref.automaton import load_dfa, parse_dfa, serialize_dfa
from dfapref.distill import (collect_teacher_experience, distill_values, load_transition_values,
                             save_transition_values, train_teacher)
from dfapref.envs import (ProductMDP, build_student_variant, load_layout, make_env, parse_layout,
                          render_layout)
from dfapref.harness import (ConvergenceCheckConfig, check_convergence_theorem,
                             enumerate_trajectories, final_acceptance_rate, first_acceptance,
                             parse_config, run_experiment, validate_scoring)
from dfapref.learner import (LearnerConfig, QTable, RewardSource, constant_epsilon,
                             greedy_actions, load_qtable, q_learning, run_dynamic, run_static,
                             save_qtable, value_iteration)
from dfapref.reward_model import (RewardTable, load_reward_model, pair_accuracy, ranking_loss,
                                  ranking_loss_grad, save_reward_model, train,
                                  trajectory_return)
from dfapref.scoring import (Pairing, ScoreWeights, completed_subgoals, generate_preferences,
                             make_scorer, prefer)

BUNDLED = ("iron_sword", "dungeon_quest", "blind_craftsman", "building_bridge", "mountain_car")
BASELINE_KINDS = ("known", "reward_machine", "lpopl", "distill_shaping")


def test_c1_q_learning_matches_value_iteration():
    """Q-learning with persistent exploration converges to the exact solution."""
    worst_time, tallies = 0.0, {}
    for name in ("chain3", "dungeon_mini"):
        env = make_env(name)
        prod = ProductMDP(env, env.default_dfa())
        live = prod.reachable() & ~prod.terminal
        for kind in BASELINE_KINDS:
            R = RewardSource(kind).matrix(prod)
            exact = value_iteration(prod, R, 0.95).q
            ok = 0
            for seed in range(10):
                start = time.perf_counter()
                qt = QTable(prod.n, prod.n_actions, 0.1, 0.95, constant_epsilon(1.0))
                q_learning(prod, R, qt, 5000, np.random.default_rng(seed), env.max_steps)
                worst_time = max(worst_time, time.perf_counter() - start)
                ok += np.abs(qt.q[live] - exact[live]).max() < 0.05
            tallies[(name, kind)] = ok
    passed = min(tallies.values()) >= 9 and worst_time < 10.0
    record_criterion(1, passed, f"min seeds within 0.05: {min(tallies.values())}/10, "
                                f"slowest run {worst_time:.1f}s")
    assert passed, tallies


def test_c2_theorem_check():
    env = make_env("chain3")
    start = time.perf_counter()
    report = check_convergence_theorem(ConvergenceCheckConfig(horizon=8), env, env.default_dfa())
    elapsed = time.perf_counter() - start
    gap = report.optimum - min(report.greedy_values)
    passed = report.passed and not report.vacuous and elapsed < 60
    record_criterion(2, passed, f"worst gap {gap:.2e}, pair accuracy {report.pair_accuracy:.3f}, "
                                f"{elapsed:.1f}s")
    assert passed


def test_c3_potential_shaping_invariance():
    details = []
    for name in BUNDLED:
        env = make_env(name)
        prod = ProductMDP(env, env.default_dfa())
        start = time.perf_counter()
        shaped = greedy_actions(value_iteration(prod, RewardSource("lpopl").matrix(prod), 0.95).q)
        base = greedy_actions(value_iteration(prod, RewardSource("lpopl_base").matrix(prod), 0.95).q)
        elapsed = time.perf_counter() - start
        live = prod.reachable() & ~prod.terminal
        details.append((name, int((shaped[live] != base[live]).sum()), elapsed))
    passed = all(m == 0 and t < 30 for _, m, t in details)
    record_criterion(3, passed, ", ".join(f"{n}: {m} mismatches" for n, m, _ in details))
    assert passed, details


def _trajectory_pool(prod, rng, n=300):
    """Rollouts of mixed quality: random, noisy optimal, various lengths."""
    R = RewardSource("known").matrix(prod)
    best = greedy_actions(value_iteration(prod, R, 0.95).q)
    pool = []
    for i in range(n):
        eps = (1.0, 0.5, 0.2, 0.05)[i % 4]
        horizon = int(rng.integers(1, prod.env.max_steps))

        def policy(p, g, eps=eps):
            return int(g.integers(prod.n_actions)) if g.random() < eps else int(best[p])
        pool.append(prod.rollout(policy, rng, horizon))
    return pool


def test_c4_preference_dominance():
    counts = []
    for name in BUNDLED:
        env = make_env(name)
        dfa = env.default_dfa()
        prod = ProductMDP(env, dfa)
        rng = np.random.default_rng(0)
        pool = _trajectory_pool(prod, rng)
        done = [completed_subgoals(t, dfa) for t in pool]
        scorer = make_scorer(env, dfa, ScoreWeights())
        checked = hits = 0
        while checked < 1000:
            i, j = rng.choice(len(pool), 2, replace=False)
            if done[i] == done[j]:
                continue
            if done[i] < done[j]:
                i, j = j, i
            checked += 1
            pref = prefer(pool[i], pool[j], scorer)
            hits += pref.preferred == 0
        counts.append((name, hits))
    passed = all(h == 1000 for _, h in counts)
    record_criterion(4, passed, ", ".join(f"{n}: {h}/1000" for n, h in counts))
    assert passed, counts


def _gap(model, pref):
    return trajectory_return(model, pref.winner) - trajectory_return(model, pref.loser)


def test_c5_reward_model_separation():
    env = make_env("chain3")
    dfa = env.default_dfa()
    prod = ProductMDP(env, dfa)
    trajs = enumerate_trajectories(prod, 6)
    prefs = generate_preferences(trajs, make_scorer(env, dfa), Pairing(max_all_pairs=len(trajs)))
    model = RewardTable((prod.n_env, prod.n_q, prod.n_actions))
    report = train(model, prefs, lr=0.05, epochs=200, rng=np.random.default_rng(0))
    separated = pair_accuracy(model, prefs) == 1.0 and ranking_loss(model, prefs) == 0.0

    probe = RewardTable(model.shape)
    probe.theta = np.random.default_rng(1).normal(size=model.shape) * 0.3
    gaps = np.array([_gap(probe, p) for p in prefs])
    assert np.min(np.abs(probe.margin - gaps)) > 1e-3  # probe sits away from hinge kinks
    grad = ranking_loss_grad(probe, prefs)
    h, worst = 1e-5, 0.0
    for idx in np.ndindex(probe.shape):
        orig = probe.theta[idx]
        probe.theta[idx] = orig + h
        up = ranking_loss(probe, prefs)
        probe.theta[idx] = orig - h
        down = ranking_loss(probe, prefs)
        probe.theta[idx] = orig
        worst = max(worst, abs((up - down) / (2 * h) - grad[idx]))
    passed = separated and report.epochs_run <= 200 and worst < 1e-6
    record_criterion(5, passed, f"{len(prefs)} pairs separated in {report.epochs_run} epochs, "
                                f"gradient error {worst:.1e}")
    assert passed


def test_c6_end_to_end_dungeon():
    env = make_env("dungeon_quest")
    dfa = env.default_dfa()
    prod = ProductMDP(env, dfa)
    scorer = make_scorer(env, dfa)
    summary, passed = [], True
    for fn in (run_static, run_dynamic):
        rates, slowest, longest = [], 0.0, 0
        for seed in range(5):
            start = time.perf_counter()
            res = fn(env, dfa, scorer, LearnerConfig(), np.random.default_rng(seed), prod)
            slowest = max(slowest, time.perf_counter() - start)
            longest = max(longest, len(res.metrics))
            rates.append(final_acceptance_rate(res.metrics, 200))
        median = float(np.median(rates))
        passed &= median >= 0.9 and longest <= 3000 and slowest < 300
        summary.append(f"{fn.__name__[4:]} median {median:.2f}, {longest} episodes, "
                       f"slowest {slowest:.0f}s")
    record_criterion(6, passed, "; ".join(summary))
    assert passed, summary


def _distilled_table(env, dfa, seed):
    rng = np.random.default_rng(seed)
    teacher = train_teacher(env, dfa, LearnerConfig(), rng)
    return distill_values(collect_teacher_experience(env, dfa, teacher, 100, rng), teacher,
                          dfa_name=dfa.name)


def test_c7_scoring_validation():
    env = make_env("dungeon_quest")
    dfa = env.default_dfa()
    qv = _distilled_table(env, dfa, 0)
    report = validate_scoring(env, dfa, qv, 200, 50, np.random.default_rng(1))
    r, rho = report.pearson_reward, report.spearman_subgoals
    passed = (r is not None and r >= 0.6 and rho is not None and rho >= 0.6
              and report.success_above_median > report.success_below_median)
    record_criterion(7, passed, f"pearson {r:.3f}, spearman {rho:.3f}, success above/below median "
                                f"{report.success_above_median:.2f}/{report.success_below_median:.2f}")
    assert passed


def test_c8_transfer_speedup():
    teacher_env = make_env("iron_sword")
    dfa = teacher_env.default_dfa()
    qv = _distilled_table(teacher_env, dfa, 0)
    student = build_student_variant(teacher_env, 10, 0)
    prod = ProductMDP(student, dfa)
    firsts = {}
    for w_q in (0.0, 1.0):
        scorer = make_scorer(student, dfa, ScoreWeights(w_q=w_q), qv)
        runs = []
        for seed in range(9):
            res = run_static(student, dfa, scorer, LearnerConfig(), np.random.default_rng(seed), prod)
            fa = first_acceptance(res.metrics)
            runs.append(np.inf if fa is None else fa)
        firsts[w_q] = float(np.median(runs))
    passed = firsts[1.0] < firsts[0.0]
    record_criterion(8, passed, f"median first acceptance {firsts[1.0]:.0f} with distilled values "
                                f"vs {firsts[0.0]:.0f} without, 9 seeds")
    assert passed, firsts


def test_c9_determinism_and_formats(tmp_path):
    text = "[experiment]\nenv = dungeon_quest\nmethod = static\nseeds = 0 1\n" \
           "save_snapshots = true\n[learner]\nepisodes = 400\n"
    outputs = []
    for d in ("first", "second"):
        result = run_experiment(parse_config(text, {"out": str(tmp_path / d)}))
        outputs.append({p.split("/")[-1]: open(p, "rb").read() for p in result.files})
    identical = outputs[0] == outputs[1]

    roundtrips = []
    snap = tmp_path / "first"
    qt = load_qtable(snap / "static_seed0.qtable")
    model = load_reward_model(snap / "static_seed0.reward")
    save_qtable(qt, tmp_path / "q2")
    save_reward_model(model, tmp_path / "r2")
    roundtrips.append((tmp_path / "q2").read_bytes() == outputs[0]["static_seed0.qtable"])
    roundtrips.append((tmp_path / "r2").read_bytes() == outputs[0]["static_seed0.reward"])
    env = make_env("chain3")
    qv = _distilled_table(env, env.default_dfa(), 0)
    save_transition_values(qv, tmp_path / "a.tv")
    roundtrips.append(load_transition_values(tmp_path / "a.tv") == qv)
    for name in BUNDLED + ("chain3",):
        dfa = load_dfa(name)
        back = parse_dfa(serialize_dfa(dfa))
        roundtrips.append(back.transitions == dfa.transitions and back.accepting == dfa.accepting)
        roundtrips.append(parse_layout(render_layout(load_layout(name))) == load_layout(name))
    passed = identical and all(roundtrips)
    record_criterion(9, passed, f"byte-identical reruns: {identical}, "
                                f"round-trips {sum(roundtrips)}/{len(roundtrips)}")
    assert passed
