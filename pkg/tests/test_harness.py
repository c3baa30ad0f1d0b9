import math

import numpy as np
import pytest

from hiopt.harness import (
    CSV_HEADER,
    ConfigError,
    RunConfig,
    format_csv,
    load_config,
    parse_config_text,
    parse_csv,
    plot_regret,
    emit_csv,
    run_experiment,
    run_seed,
    worker_count,
    xi_monte_carlo,
)


def test_seeds_are_distinct_and_stable():
    seeds = {run_seed(0, n, r) for n in (10**3, 10**4, 10**5) for r in range(50)}
    assert len(seeds) == 150
    assert run_seed(7, 1000, 3) == run_seed(7, 1000, 3) != run_seed(8, 1000, 3)
    assert all(0 <= s < 2**64 for s in seeds)


def _data_rows(text):
    lines = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
    assert lines[0] == CSV_HEADER
    return [ln.split(",") for ln in lines[1:]]


def test_single_run_csv_has_one_data_row_and_one_summary():
    res = run_experiment(RunConfig(budgets=(100,), repetitions=1, timing=False), threads=1)
    rows = _data_rows(format_csv(res))
    assert [r[4] for r in rows] == ["0", "-1"]


def test_row_counts_for_three_budgets():
    cfg = RunConfig(sigma=0.1, budgets=(50, 100, 200), repetitions=10, timing=False)
    rows = _data_rows(format_csv(run_experiment(cfg, threads=1)))
    assert len(rows) == 33
    assert sum(r[4] == "-1" for r in rows) == 3
    assert [int(r[3]) for r in rows[:30]] == [n for n in (50, 100, 200) for _ in range(10)]


def test_csv_round_trip():
    cfg = RunConfig(objective="garland", sigma=0.05, budgets=(60, 120), repetitions=3, base_seed=4, k=2)
    res = run_experiment(cfg, threads=1)
    back, summary = parse_csv(format_csv(res))
    assert back.config == cfg
    assert back.records == res.records
    for n in cfg.budgets:
        assert summary[n] == (res.mean_regret(n), res.std_regret(n))
        assert summary[n][1] == pytest.approx(np.std(res.regrets(n), ddof=0))


def test_reruns_and_thread_counts_are_bit_identical():
    cfg = RunConfig(sigma=0.3, budgets=(100, 300), repetitions=4, timing=False)
    a = format_csv(run_experiment(cfg, threads=1))
    assert a == format_csv(run_experiment(cfg, threads=1))
    assert a == format_csv(run_experiment(cfg, threads=3))


def test_params_comment_echoes_computed_defaults():
    text = format_csv(run_experiment(RunConfig(budgets=(200,), repetitions=1), threads=1))
    line = next(ln for ln in text.splitlines() if ln.startswith("# params"))
    assert "n=200 " in line and " k=2 " in line and " h_max=10 " in line and " K=3 " in line
    assert "delta=0.07071067811865475" in line
    doo = format_csv(run_experiment(RunConfig(optimizer="stodoo", budgets=(200,), repetitions=1), threads=1))
    assert "L=144 alpha=2" in doo


def test_config_file_and_override(tmp_path):
    p = tmp_path / "run.cfg"
    p.write_text("# experiment\nobjective = garland\nsigma=0.1\nn=1e3,1e4\nreps = 2  # short\nseed=5\nno-reuse=true\n")
    cfg = load_config(p, sigma=0.2)
    assert (cfg.objective, cfg.sigma, cfg.budgets, cfg.repetitions, cfg.base_seed, cfg.reuse) == (
        "garland",
        0.2,
        (1000, 10000),
        2,
        5,
        False,
    )


@pytest.mark.parametrize(
    "text",
    ["objective=garland\nbogus=1\n", "sigma=abc\n", "n=12.5\n", "just a line\n", "timing=maybe\n"],
)
def test_config_parse_errors(text):
    with pytest.raises(ConfigError):
        parse_config_text(text)


@pytest.mark.parametrize(
    "kw",
    [
        dict(objective="rosenbrock"),
        dict(optimizer="hoo"),
        dict(budgets=()),
        dict(budgets=(100, 50)),
        dict(budgets=(0,)),
        dict(repetitions=0),
        dict(sigma=-0.1),
        dict(sigma=math.nan),
        dict(optimizer="soo", sigma=0.1),
        dict(optimizer="stodoo", L=3.0),
        dict(objective="custom-grid"),
        dict(k=500, budgets=(100,)),
        dict(delta=1.5),
    ],
)
def test_config_validation(kw):
    with pytest.raises(ConfigError):
        RunConfig(**kw).validate()


def test_soo_noiseless_run_is_accurate():
    res = run_experiment(RunConfig(optimizer="soo", budgets=(1000,), repetitions=1), threads=1)
    assert res.records[0].regret < 0.01


def test_custom_grid_objective(tmp_path):
    p = tmp_path / "f.csv"
    xs = np.linspace(0, 1, 101)
    p.write_text("x,f\n" + "".join(f"{float(x)!r},{-abs(float(x) - 0.4)!r}\n" for x in xs))
    res = run_experiment(RunConfig(objective="custom-grid", grid_file=str(p), budgets=(300,), repetitions=1), threads=1)
    assert res.records[0].regret < 0.01


def test_dump_tree(tmp_path):
    cfg = RunConfig(budgets=(30,), repetitions=2, dump_tree=str(tmp_path / "trees"))
    run_experiment(cfg, threads=1)
    assert sorted(f.name for f in (tmp_path / "trees").iterdir()) == [
        "tree_stosoo_n30_r0.txt",
        "tree_stosoo_n30_r1.txt",
    ]


def test_emit_csv_unwritable(tmp_path):
    res = run_experiment(RunConfig(budgets=(20,), repetitions=1), threads=1)
    with pytest.raises(OSError):
        emit_csv(res, tmp_path / "missing" / "dir" / "out.csv")


def test_worker_count_env(monkeypatch):
    monkeypatch.setenv("HIOPT_THREADS", "3")
    assert worker_count() == 3
    monkeypatch.setenv("HIOPT_THREADS", "many")
    with pytest.raises(ConfigError):
        worker_count()


def test_plot_writes_svg(tmp_path):
    paths = []
    for opt, sigma in (("stosoo", 0.1), ("stodoo", 0.1)):
        res = run_experiment(RunConfig(optimizer=opt, sigma=sigma, budgets=(50, 200), repetitions=2), threads=1)
        paths.append(emit_csv(res, tmp_path / f"{opt}.csv"))
    out = plot_regret(paths, tmp_path / "regret.svg", title="regret")
    text = out.read_text()
    assert text.lstrip().startswith("<?xml") and "<svg" in text


def test_xi_monte_carlo_small():
    s = xi_monte_carlo(20, 300, 0.1)
    assert s.runs == 20 and 0 <= s.holds <= 20
    assert s.target == pytest.approx(1 - 1 / math.sqrt(300))
    with pytest.raises(ConfigError):
        xi_monte_carlo(0, 300, 0.1)
