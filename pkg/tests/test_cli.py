import os

import pytest
import yaml

from swarm_inertia.cli import build_parser, main
from swarm_inertia.report import CELLS_FILE, RATES_FILE, RECORDS_FILE, load_report
from swarm_inertia.verify import CHECKS, run_verify

SMALL = {
    "objective": "exp_sin_1d",
    "dims": [1],
    "methods": ["sbi_simex", {"label": "SBGD11", "scheme": "sbgd", "p": 1, "q": 1}],
    "swarm_sizes": [3],
    "runs": 2,
    "swarm": {"max_iter": 40},
    "lipschitz": {"samples": 100},
}


@pytest.fixture
def config_path(tmp_path):
    path = tmp_path / "small.yaml"
    path.write_text(yaml.safe_dump(SMALL))
    return str(path)


def test_parser_requires_a_verb():
    with pytest.raises(SystemExit):
        build_parser().parse_args([])
    args = build_parser().parse_args(["run", "--set", "runs=3", "--set", "seed=2", "-t", "4"])
    assert args.overrides == ["runs=3", "seed=2"]
    assert args.threads == 4


def test_run_writes_report(config_path, tmp_path):
    out = str(tmp_path / "out")
    assert main(["run", "-c", config_path, "-o", out, "--seed", "5"]) == 0
    for name in (RATES_FILE, CELLS_FILE, RECORDS_FILE):
        assert os.path.exists(os.path.join(out, name))
    report = load_report(out)
    assert [c.method for c in report.cells] == ["sbi_simex", "SBGD11"]
    assert report.header["config"]["seed"] == 5


def test_trace_writes_trace(config_path, tmp_path):
    out = str(tmp_path / "trace")
    assert main(["trace", "-c", config_path, "-o", out, "--method", "SBGD11", "-N", "3", "--trial", "1"]) == 0
    assert os.path.exists(os.path.join(out, "trace_d1_sbgd11_N3_t1.tsv"))


def test_bench_suite_with_fewer_runs(tmp_path):
    out = str(tmp_path / "ex1")
    argv = ["bench-suite", "--table", "ex1", "-r", "1", "-o", out, "--set", "swarm_sizes=[5]", "--set", "swarm.max_iter=30"]
    assert main(argv) == 0
    report = load_report(out)
    assert len(report.cells) == 6
    assert all(c.trials == 1 for c in report.cells)


def test_bench_suite_with_no_dimension_left(tmp_path):
    assert main(["bench-suite", "--table", "rosenbrock", "--max-dim", "1", "-o", str(tmp_path)]) == 2


def test_configuration_errors_exit_with_two(tmp_path):
    assert main(["run", "-c", str(tmp_path / "absent.yaml")]) == 2
    assert main(["run", "--set", "swarm.stepsize=0.1", "-o", str(tmp_path)]) == 2


def test_quick_verify_passes():
    results = run_verify(seed=0, quick=True)
    assert [r.name for r in results] == [
        "gradients", "known_minima", "mass_bounds", "imex_dissipation", "simex_dissipation", "closed_form"
    ]
    assert len(results) == len(CHECKS)
    assert all(r.passed for r in results), [r for r in results if not r.passed]
    assert main(["verify", "--quick"]) == 0
