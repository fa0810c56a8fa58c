import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import make_instance, make_task
from twostage import kernels, oracle, rear
from twostage.core import Instance, Resource, Schedule, StructuralError, TimeWindow, TransitionModel, validate

FLAT = TransitionModel(5, 0.0)  # every transition is exactly 5 s


def problem_of(tasks, horizon=(0, 600), transition=FLAT):
    inst = make_instance(tasks, (horizon,), transition=transition)
    return rear.RearStageProblem.from_instance(inst, 0, [t.id for t in tasks]), inst


def as_schedule(problem, result, n):
    return Schedule.from_placements(n, {i: (problem.resource.id, s, e) for i, s, e in result.placed})


def check_feasible(problem, result):
    inst = Instance(problem.tasks, (problem.resource,), problem.transition)
    assert validate(as_schedule(problem, result, len(problem.tasks)), inst) == []


def random_problem(seed, n):
    return rear.random_problem(np.random.default_rng(seed), n)


# --- problem ------------------------------------------------------------------

def test_problem_invariants():
    t = make_task(0, {0: [(10, 20)]})
    inst = make_instance([t], ((0, 100),))
    with pytest.raises(ValueError):
        rear.RearStageProblem(inst.resources[0], (t,), FLAT, 100, 0.0)
    p = rear.RearStageProblem.build(inst.resources[0], [t], FLAT)
    assert p.ET == 20 and p.mean_duration == 5.0


def test_window_outside_horizon_rejected():
    t = make_task(0, {0: [(90, 120)]})
    inst = make_instance([t], ((0, 200),))
    with pytest.raises(ValueError):
        rear.RearStageProblem.build(Resource(0, 150.0, 2000.0, TimeWindow(0, 100)), [t], FLAT)
    assert rear.RearStageProblem.build(inst.resources[0], [t], FLAT).ET == 120


# --- hadrt score --------------------------------------------------------------

def test_hadrt_score_substitution():
    t = make_task(0, {0: [(60, 80)]})
    p = rear.RearStageProblem(make_instance([t], ((0, 100),)).resources[0], (t,), FLAT, 100, 5.0)
    assert rear.hadrt_score(p, 0, 3) == 7
    assert rear.hadrt_score(p, 0, 3, window_end=90) == 5


def test_hadrt_score_prefers_earlier_window_end():
    a, b = make_task(0, {0: [(0, 30)]}), make_task(1, {0: [(0, 50)]})
    p, _ = problem_of([a, b])
    assert rear.hadrt_score(p, 0, 2) > rear.hadrt_score(p, 1, 2)


@given(st.integers(1, 30), st.integers(0, 10_000), st.integers(0, 10_000), st.floats(1, 20))
@settings(max_examples=300, deadline=None)
def test_hadrt_score_count_dominates_small_h_gaps(g, we_a, dwe, mean_d):
    # Windows ending less than one mean duration apart: the higher count wins.
    t = make_task(0, {0: [(0, 20)]})
    res = make_instance([t], ((0, 30_000),)).resources[0]
    p = rear.RearStageProblem(res, (t,), FLAT, 30_000, mean_d)
    we_b = we_a + min(dwe, mean_d * 0.999)
    we_b_low = max(0, we_a - min(dwe, mean_d * 0.999))
    for other in (we_b, we_b_low):
        assert rear.hadrt_score(p, 0, g + 1, we_a) > rear.hadrt_score(p, 0, g, other)


# --- hadrt --------------------------------------------------------------------

def test_hadrt_single_task():
    p, _ = problem_of([make_task(0, {0: [(10, 20)]}, profit=4)])
    r = rear.hadrt(p)
    assert r.placed == ((0, 10, 15),) and r.profit == 4 and r.skipped == ()


def test_hadrt_disjoint_windows_both_placed_in_window_order():
    p, _ = problem_of([make_task(0, {0: [(100, 120)]}), make_task(1, {0: [(10, 30)]})])
    r = rear.hadrt(p)
    assert [x[0] for x in r.placed] == [1, 0] and r.placed[0][1] == 10 and r.placed[1][1] == 100


def test_hadrt_inserts_into_earlier_gap():
    # Task 0 is placed first (earliest window end); task 1 still fits before it.
    p, _ = problem_of([make_task(0, {0: [(40, 50)]}), make_task(1, {0: [(0, 100)]})])
    r = rear.hadrt(p)
    assert r.placed == ((1, 0, 5), (0, 40, 45))


def test_hadrt_skips_infeasible():
    p, _ = problem_of([make_task(0, {0: [(0, 8)]}, profit=1), make_task(1, {0: [(0, 8)]}, profit=2)])
    r = rear.hadrt(p)
    assert len(r.placed) == 1 and len(r.skipped) == 1


def test_hadrt_keeps_fixed_placements():
    p, _ = problem_of([make_task(0, {0: [(0, 100)]}), make_task(1, {0: [(0, 100)]})])
    r = rear.hadrt(p, {1: 50})
    assert (1, 50, 55) in r.placed and r.placed[0] == (0, 0, 5)


@given(st.integers(0, 2**32 - 1), st.integers(1, 12))
@settings(max_examples=150, deadline=None)
def test_hadrt_output_is_feasible(seed, n):
    p = random_problem(seed, n)
    r = rear.hadrt(p)
    check_feasible(p, r)
    assert r.profit == sum(p.task(i).profit for i, _, _ in r.placed)
    assert sorted([i for i, _, _ in r.placed] + list(r.skipped)) == p.ids


def test_hadrt_below_oracle_on_random_six_task_problems():
    equal = 0
    for seed in range(500):
        p = random_problem(seed, 6)
        inst = Instance(p.tasks, (p.resource,), p.transition)
        best, _ = oracle.brute_force_optimal(inst)
        got = rear.hadrt(p).profit
        assert got <= best
        equal += got == best
    print(f"hadrt optimal on {equal}/500 problems")
    assert equal > 250


# --- greedy sequence ----------------------------------------------------------

def test_greedy_sequence_orders_by_window_end():
    p, _ = problem_of([make_task(0, {0: [(0, 50)]}), make_task(1, {0: [(0, 30)]}), make_task(2, {0: [(0, 40)]})])
    assert rear.greedy_sequence(p) == [1, 2, 0]


def test_greedy_sequence_ties_by_id():
    p, _ = problem_of([make_task(i, {0: [(0, 30)]}) for i in range(4)])
    assert rear.greedy_sequence(p) == [0, 1, 2, 3]


@given(st.integers(0, 2**32 - 1), st.integers(0, 10))
@settings(max_examples=50, deadline=None)
def test_greedy_sequence_is_permutation(seed, n):
    p = random_problem(seed, n) if n else problem_of([make_task(0, {0: [(0, 9)]})])[0]
    assert sorted(rear.greedy_sequence(p)) == sorted(p.ids)


# --- dp timing ----------------------------------------------------------------

def test_dp_single_task():
    p, _ = problem_of([make_task(0, {0: [(10, 20)]}, profit=4)])
    r = rear.dp_timing(p, [0])
    assert r.profit == 4 and r.placed == ((0, 10, 15),)


def test_dp_two_tasks_one_fits():
    p, _ = problem_of([make_task(0, {0: [(0, 8)]}, profit=3), make_task(1, {0: [(0, 8)]}, profit=6)])
    for seq in ([0, 1], [1, 0]):
        r = rear.dp_timing(p, seq)
        assert r.profit == 6 and [x[0] for x in r.placed] == [1]


def test_dp_rejects_non_permutation():
    p, _ = problem_of([make_task(0, {0: [(0, 8)]}), make_task(1, {0: [(0, 8)]})])
    for bad in ([0], [0, 0], [0, 1, 2], [0, 3]):
        with pytest.raises(StructuralError):
            rear.dp_timing(p, bad)
    with pytest.raises(StructuralError):
        rear.place_in_order(p, [1])


def test_dp_skips_blocking_task():
    # Task 0 fits but blocks two more profitable successors.
    tasks = [make_task(0, {0: [(0, 12)]}, profit=2),
             make_task(1, {0: [(5, 11)]}, profit=3),
             make_task(2, {0: [(16, 22)]}, profit=3)]
    p, _ = problem_of(tasks)
    assert rear.dp_timing(p, [0, 1, 2]).profit == 6
    assert rear.place_in_order(p, [0, 1, 2]).profit == 5


@given(st.integers(0, 2**32 - 1), st.integers(1, 7))
@settings(max_examples=150, deadline=None)
def test_dp_matches_brute_force(seed, n):
    p = random_problem(seed, n)
    seq = list(np.random.default_rng(seed).permutation(p.ids))
    r = rear.dp_timing(p, seq)
    assert r.profit == oracle.brute_force_timing(p, seq)
    check_feasible(p, r)
    # placements respect the sequence
    pos = {i: k for k, i in enumerate(seq)}
    assert [pos[i] for i, _, _ in r.placed] == sorted(pos[i] for i, _, _ in r.placed)


@given(st.integers(0, 2**32 - 1), st.integers(1, 25))
@settings(max_examples=150, deadline=None)
def test_dp_dominates_place_in_order(seed, n):
    p = random_problem(seed, n)
    seq = list(np.random.default_rng(seed + 1).permutation(p.ids))
    a, b = rear.dp_timing(p, seq), rear.place_in_order(p, seq)
    assert a.profit >= b.profit
    check_feasible(p, b)


def test_place_in_order_strictly_worse_somewhere():
    for seed in range(2000):
        p = random_problem(seed, 8)
        seq = rear.greedy_sequence(p)
        gap = rear.dp_timing(p, seq).profit - rear.place_in_order(p, seq).profit
        if gap > 0:
            break
    assert gap > 0


def test_place_in_order_empty():
    p, _ = problem_of([make_task(0, {0: [(0, 9)]})])
    empty = rear.RearStageProblem.from_instance(make_instance([make_task(0, {0: [(0, 9)]})]), 0, [])
    assert rear.place_in_order(empty, []).profit == 0
    assert rear.dp_timing(empty, []).profit == 0
    assert rear.hadrt(empty).profit == 0


# --- backends -----------------------------------------------------------------

@pytest.fixture
def restore_backend():
    name = kernels.backend_name()
    yield
    kernels.use_backend(name)


@pytest.mark.skipif("cython" not in kernels.BACKENDS, reason="compiled kernels not built")
@given(st.integers(0, 2**32 - 1), st.integers(1, 30))
@settings(max_examples=100, deadline=None)
def test_backends_agree(seed, n):
    p = random_problem(seed, n)
    seq = list(np.random.default_rng(seed).permutation(p.ids))
    out = {}
    try:
        for name in ("python", "cython"):
            kernels.use_backend(name)
            h = rear.hadrt(p)
            pinned = {i: s for i, s, _ in h.placed[::2]}
            out[name] = (rear.dp_timing(p, seq), rear.dp_timing(p, seq).ops, rear.place_in_order(p, seq),
                         h, h.ops, rear.hadrt(p, pinned), rear.hadrt(p, pinned).ops)
    finally:
        kernels.use_backend("cython")
    assert out["python"] == out["cython"]


def test_unknown_backend(restore_backend):
    with pytest.raises(ValueError):
        kernels.use_backend("fortran")


def test_python_backend_usable(restore_backend):
    kernels.use_backend("python")
    assert kernels.backend_name() == "python"
    p = random_problem(0, 6)
    assert rear.dp_timing(p, p.ids).profit == oracle.brute_force_timing(p, p.ids)


# --- complexity ---------------------------------------------------------------

def _dense_problem(rng, n):
    return rear.random_problem(rng, n, horizon=40 * n, window_length=(30, 120), max_windows=2)


@pytest.mark.parametrize("n", [25, 50])
def test_operation_counts_grow_quadratically(n):
    rng = np.random.default_rng(n)
    ratios_h, ratios_d = [], []
    for _ in range(20):
        a, b = _dense_problem(rng, n), _dense_problem(rng, 2 * n)
        ratios_h.append(rear.hadrt(b).ops / rear.hadrt(a).ops)
        ratios_d.append(rear.dp_timing(b, rear.greedy_sequence(b)).ops
                        / rear.dp_timing(a, rear.greedy_sequence(a)).ops)
    assert np.mean(ratios_h) <= 4.5 and np.mean(ratios_d) <= 4.5
