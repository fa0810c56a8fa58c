from conftest import make_instance, make_task
from twostage import bench, cli, env, generate
from twostage.core import evaluate_objective, validate


def small(suite, out, **kw):
    kw.setdefault("log", lambda s: None)
    return bench.SUITES[suite](out, **kw)


def test_hadrt_only_is_valid_on_presets():
    for name in ("H_20", "H_50", "C_100", "C_200"):
        inst = generate.generate_preset(name, 3)
        sched = bench.hadrt_only(inst)
        assert validate(sched, inst) == []
        assert evaluate_objective(sched, inst) > 0


def test_hadrt_only_truncates_at_capacity():
    tasks = [make_task(i, {0: [(20 * i, 20 * i + 10)]}, energy=1.0) for i in range(5)]
    inst = make_instance(tasks, energy=3.0)
    sched = bench.hadrt_only(inst)
    assert sched.scheduled() == [0, 1, 2] and validate(sched, inst) == []


def test_comparison_suite(tmp_path):
    res = small("comparison", tmp_path, presets=["T_8"], seed=3, episodes=10, train_count=2, eval_count=4)
    rows = bench.read_csv(tmp_path / "comparison.csv")
    assert list(rows[0]) == list(bench.COMPARISON_COLUMNS)
    assert len(rows) == 4 * (len(bench.SOLVE_MODES) + 1)
    by_seed = {}
    for r in rows:
        assert r["status"] == "ok" and r["violations"] == "0"
        by_seed.setdefault(r["instance_seed"], {})[r["mode"]] = int(r["profit"])
    for profits in by_seed.values():
        assert all(p <= profits["oracle"] for p in profits.values())
    timing = bench.read_csv(tmp_path / "comparison_timing.csv")
    assert list(timing[0]) == list(bench.TIMING_COLUMNS) and len(timing) == len(rows)
    assert bench.time_ratio(res, "T_8") < 10


def test_comparison_skips_oracle_on_large_presets(tmp_path):
    small("comparison", tmp_path, presets=["H_20"], modes=["hadrt-only"], episodes=0, train_count=1, eval_count=2)
    modes = {r["mode"] for r in bench.read_csv(tmp_path / "comparison.csv")}
    assert modes == {"hadrt-only"}


def test_oracle_timeout_recorded_per_row(tmp_path):
    small("comparison", tmp_path, presets=["T_8"], modes=["hadrt-only"], episodes=0,
          train_count=1, eval_count=2, timeout=0.0)
    rows = bench.read_csv(tmp_path / "comparison.csv")
    assert [r["status"] for r in rows if r["mode"] == "oracle"] == ["timeout", "timeout"]
    assert all(r["status"] == "ok" for r in rows if r["mode"] != "oracle")


def test_generalization_suite(tmp_path):
    small("generalization", tmp_path, presets=["H_20"], modes=["dqn-dp", "hadrt-only"], seed=0,
          episodes=6, train_count=3, eval_count=3)
    rows = bench.read_csv(tmp_path / "generalization.csv")
    assert list(rows[0]) == list(bench.GENERALIZATION_COLUMNS) and len(rows) == 6
    for r in rows:
        assert 0 <= float(r["margin"]) <= 1
        assert float(r["margin"]) == int(r["profit"]) / int(r["candidate_profit"])
        assert int(r["instance_seed"]) >= bench.EVAL_SEED_OFFSET


def test_convergence_suite(tmp_path):
    summary = small("convergence", tmp_path, presets=["H_20"], modes=["dqn-ch", "dqn-dp"], episodes=5)
    rows = bench.read_csv(tmp_path / "convergence.csv")
    assert list(rows[0]) == list(bench.CONVERGENCE_COLUMNS) and len(rows) == 10
    assert set(summary) == {("H_20", "dqn-ch"), ("H_20", "dqn-dp")}


def test_parallel_matches_serial(tmp_path):
    kw = dict(presets=["T_8"], modes=["dqn-dp", "hadrt-only"], seed=1, episodes=5, train_count=2, eval_count=4)
    small("comparison", tmp_path / "a", jobs=1, **kw)
    small("comparison", tmp_path / "b", jobs=2, **kw)
    assert (tmp_path / "a" / "comparison.csv").read_bytes() == (tmp_path / "b" / "comparison.csv").read_bytes()


def test_cell_errors_do_not_stop_the_suite():
    inst = generate.generate_preset("T_8", 0)
    res = bench.run_cells([bench.Cell("T_8", 0, "dqn-dp", inst, None), bench.Cell("T_8", 0, "hadrt-only", inst)])
    assert res[0].status.startswith("error") and res[0].profit is None
    assert res[1].status == "ok"


def test_bench_cli_is_deterministic(tmp_path, capsys):
    for name in ("a", "b"):
        assert cli.main(["--seed", "2", "--out-dir", str(tmp_path / name), "bench", "--suite", "comparison",
                         "--presets", "T_8", "--episodes", "5", "--train-count", "2", "--eval-count", "3"]) == 0
    assert (tmp_path / "a" / "comparison.csv").read_bytes() == (tmp_path / "b" / "comparison.csv").read_bytes()
    assert "time ratio" in capsys.readouterr().out


def test_bench_cli_rejects_unknown_preset(tmp_path):
    assert cli.main(["--out-dir", str(tmp_path), "bench", "--suite", "comparison", "--presets", "Q_9"]) == 2


def test_random_policy_mean_is_reproducible():
    inst = generate.generate_preset("H_20", 0)
    a = bench.random_policy_mean(inst, env.Mode.DP, 10, seed=4)
    assert a == bench.random_policy_mean(inst, env.Mode.DP, 10, seed=4)
    assert 0 < a <= inst.total_profit
