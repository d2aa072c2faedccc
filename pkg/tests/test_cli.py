import csv
import math
import subprocess
import sys
from pathlib import Path

import pytest

from samplereuse.cli import main
from samplereuse.config import ConfigError, load_config

MINIMAL = """\
seed = 1
N = 10
trials = 1

[chain]
family = "ball"
dim = 2
radii = [1.0]
"""

DOUBLING = """\
seed = 7
N = 100
trials = {trials}
epsilons = [0.05, 0.5]

[chain]
family = "ball"
dim = 1
volumes = [1, 2, 4]

[predicate]
kind = "inner_ball"
radius = 0.8
"""


def write(tmp_path, text, name="exp.toml"):
    p = tmp_path / name
    p.write_text(text)
    return p


def read_csv(path):
    lines = Path(path).read_text().splitlines()
    meta = {}
    for line in lines:
        if line.startswith("# ") and ": " in line:
            key, value = line[2:].split(": ", 1)
            meta[key] = value
    rows = list(csv.DictReader(line for line in lines if not line.startswith("#")))
    return meta, rows


def test_minimal_run(tmp_path):
    cfg = write(tmp_path, MINIMAL)
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "o"), "-q"]) == 0
    meta, rows = read_csv(tmp_path / "o" / "curve.csv")
    assert len(rows) == 1
    assert float(rows[0]["estimate"]) == 1.0 and rows[0]["k"] == "10"
    assert meta["seed"] == "1" and "config_sha256" in meta
    assert not (tmp_path / "o" / "cost.csv").exists()


def test_rerun_is_byte_identical(tmp_path):
    cfg = write(tmp_path, DOUBLING.format(trials=20))
    for out in ("a", "b"):
        assert main(["run", "--config", str(cfg), "--out", str(tmp_path / out), "-q"]) == 0
    for name in ("curve.csv", "cost.csv", "margins.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_worker_count_does_not_change_output(tmp_path):
    cfg = write(tmp_path, DOUBLING.format(trials=12))
    main(["run", "--config", str(cfg), "--out", str(tmp_path / "a"), "-q"])
    main(["run", "--config", str(cfg), "--out", str(tmp_path / "b"), "--workers", "3", "-q"])
    assert (tmp_path / "a" / "cost.csv").read_bytes() == (tmp_path / "b" / "cost.csv").read_bytes()


def test_seed_override_changes_output(tmp_path):
    cfg = write(tmp_path, DOUBLING.format(trials=5))
    main(["run", "--config", str(cfg), "--out", str(tmp_path / "a"), "-q"])
    main(["run", "--config", str(cfg), "--out", str(tmp_path / "b"), "--seed", "8", "-q"])
    meta, _ = read_csv(tmp_path / "b" / "curve.csv")
    assert meta["seed"] == "8"
    assert (tmp_path / "a" / "curve.csv").read_bytes() != (tmp_path / "b" / "curve.csv").read_bytes()


def test_cost_on_doubling_volumes(tmp_path):
    cfg = write(tmp_path, DOUBLING.format(trials=400))
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path), "-q"]) == 0
    meta, rows = read_csv(tmp_path / "cost.csv")
    total = rows[-1]
    assert total["set_index"] == "total"
    assert float(total["expected_fresh"]) == pytest.approx(200.0)
    assert abs(float(total["mean_fresh"]) - 200.0) < 3 * float(total["stderr"])
    assert meta["truncated_trials"] == "0"
    assert float(meta["theorem_bound"]) == pytest.approx(100 * (1 + math.log(4)))


def test_header_round_trip(tmp_path):
    cfg = write(tmp_path, DOUBLING.format(trials=10))
    main(["run", "--config", str(cfg), "--out", str(tmp_path / "a"), "-q"])
    again = tmp_path / "a" / "curve.csv"
    main(["run", "--config", str(again), "--out", str(tmp_path / "b"), "-q"])
    for name in ("curve.csv", "cost.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    assert load_config(again).digest() == load_config(cfg).digest()


def bench_rows(tmp_path, text):
    cfg = write(tmp_path, text)
    assert main(["bench", "--config", str(cfg), "--out", str(tmp_path), "-q"]) == 0
    _, rows = read_csv(tmp_path / "bench.csv")
    return {r["method"]: r for r in rows}


def test_bench_single_set_ratio_is_one(tmp_path):
    rows = bench_rows(tmp_path, MINIMAL.replace("trials = 1", "trials = 3"))
    assert float(rows["reuse"]["cost_ratio"]) == 1.0
    assert float(rows["naive"]["cost_ratio"]) == 1.0


def test_bench_equal_volumes(tmp_path):
    text = MINIMAL.replace("trials = 1", "trials = 3").replace("radii = [1.0]", "radii = [1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0]")
    rows = bench_rows(tmp_path, text)
    assert float(rows["reuse"]["analytic_ratio"]) == pytest.approx(0.1)
    assert float(rows["reuse"]["cost_ratio"]) == pytest.approx(0.1)


def test_bench_timing_column(tmp_path):
    cfg = write(tmp_path, MINIMAL.replace("trials = 1", "trials = 2"))
    main(["bench", "--config", str(cfg), "--out", str(tmp_path), "--timing", "-q"])
    _, rows = read_csv(tmp_path / "bench.csv")
    assert float(rows[0]["wall_seconds"]) >= 0


AUDIT = """\
seed = 3
N = 10
trials = 2
audit_samples = 500

[chain]
family = "sets"
dim = 2
verify = "audit"
sets = [
  {{ shape = "ball", radius = {r}, norm = 2 }},
  {{ shape = "ball", radius = 1.5, norm = 1 }},
]
"""


def test_audit_pass(tmp_path):
    cfg = write(tmp_path, AUDIT.format(r=0.9))
    assert main(["audit", "--config", str(cfg), "--out", str(tmp_path), "-q"]) == 0
    meta, rows = read_csv(tmp_path / "audit.csv")
    assert meta["verdict"] == "pass" and rows == []


def test_audit_fail(tmp_path):
    cfg = write(tmp_path, AUDIT.format(r=1.15))
    assert main(["audit", "--config", str(cfg), "--out", str(tmp_path), "-q"]) == 3
    meta, rows = read_csv(tmp_path / "audit.csv")
    assert meta["verdict"] == "fail" and rows
    assert rows[0]["source_index"] == "1" and rows[0]["failing_index"] == "2"


def test_run_refuses_chain_failing_audit(tmp_path):
    cfg = write(tmp_path, AUDIT.format(r=1.15))
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path), "-q"]) == 3


def test_audit_needs_K(tmp_path):
    cfg = write(tmp_path, AUDIT.format(r=0.9).replace("audit_samples = 500\n", ""))
    assert main(["audit", "--config", str(cfg), "--out", str(tmp_path), "-q"]) == 2


@pytest.mark.parametrize(
    "text,field",
    [
        (MINIMAL.replace("N = 10", "N = 0"), "N"),
        (MINIMAL.replace("seed = 1\n", ""), "seed"),
        (MINIMAL.replace("radii = [1.0]", "radii = [2.0, 1.0]"), "chain.radii"),
        (MINIMAL + 'audit_samples = 5\n', "chain.audit_samples"),
        (MINIMAL.replace('family = "ball"', 'family = "sphere"'), "chain.family"),
        (MINIMAL + '\n[predicate]\nkind = "oracle"\n', "predicate.kind"),
        ("seed = [", None),
    ],
)
def test_config_errors(tmp_path, capsys, text, field):
    cfg = write(tmp_path, text)
    with pytest.raises(ConfigError) as exc:
        load_config(cfg)
    if field is not None:
        assert exc.value.field == field
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path), "-q"]) == 2
    assert "config error" in capsys.readouterr().err


def test_config_error_reports_line(tmp_path):
    cfg = write(tmp_path, MINIMAL.replace("N = 10", "N = -4"))
    with pytest.raises(ConfigError) as exc:
        load_config(cfg)
    assert exc.value.line == 2
    assert f"{cfg}:2" in str(exc.value)


def test_runtime_error_exit_code(tmp_path):
    cfg = write(tmp_path, MINIMAL)
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert main(["run", "--config", str(cfg), "--out", str(blocker / "sub"), "-q"]) == 1


def test_module_entry_point(tmp_path):
    cfg = write(tmp_path, MINIMAL)
    proc = subprocess.run(
        [sys.executable, "-m", "samplereuse", "run", "--config", str(cfg), "--out", str(tmp_path)],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "curve.csv").exists()
