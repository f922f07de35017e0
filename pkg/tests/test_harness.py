"""Config schema, experiment drivers and the CLI contract."""

import numpy as np
import pytest

from diffsim.harness import (ConfigError, config_hash, main, parse_config,
                             parse_config_text)

BASE_SIR = """
model.variant = sir
sir.agents = 60
sir.nodes = 30
sir.steps = 4
run.seeds = 0,1
"""

BASE_ROAD = """
model.variant = single_road
run.horizon = 5.0
run.seeds = 0
"""


def test_parse_defaults_and_overrides():
    cfg = parse_config_text(BASE_SIR)
    assert cfg["model.variant"] == "sir"
    assert cfg["sir.agents"] == 60
    assert cfg["run.seeds"] == [0, 1]
    assert cfg["model.mode"] == "diff"            # default
    assert cfg["bench.vehicle_counts"] == [64, 256, 1024]


def test_parse_comments_and_blanks():
    cfg = parse_config_text("model.variant = sir  # inline\n\n# full line\n")
    assert cfg["model.variant"] == "sir"


def test_unknown_key_rejected():
    with pytest.raises(ConfigError, match="unknown key"):
        parse_config_text("model.variant = sir\ngrid.widht = 5\n")


def test_duplicate_key_rejected():
    with pytest.raises(ConfigError, match="duplicate"):
        parse_config_text("model.variant = sir\nmodel.variant = sir\n")


def test_missing_required_key():
    with pytest.raises(ConfigError, match="missing required"):
        parse_config_text("grid.width = 5\n")


def test_bad_value_reports_line():
    with pytest.raises(ConfigError, match=":2:"):
        parse_config_text("model.variant = sir\ngrid.width = five\n")
    with pytest.raises(ConfigError, match="expected key"):
        parse_config_text("model.variant sir\n")


def test_config_hash_canonical():
    a = parse_config_text("model.variant = sir\ngrid.width = 5\n")
    b = parse_config_text("grid.width = 5\nmodel.variant = sir\n")
    c = parse_config_text("model.variant = sir\ngrid.width = 6\n")
    assert config_hash(a) == config_hash(b)
    assert config_hash(a) != config_hash(c)


def _write(tmp_path, text):
    p = tmp_path / "exp.cfg"
    p.write_text(text)
    return str(p)


def _read_csv(path):
    lines = open(path).read().splitlines()
    assert lines[0].startswith("# config_hash=")
    header = lines[1].split(",")
    rows = [ln.split(",") for ln in lines[2:]]
    return header, rows


def test_cli_simulate_sir(tmp_path):
    cfg = _write(tmp_path, BASE_SIR)
    out = tmp_path / "out"
    assert main(["simulate", "--config", cfg, "--out", str(out)]) == 0
    header, rows = _read_csv(out / "simulate.csv")
    assert header[:2] == ["seed", "objective"]
    assert len(rows) == 2
    # diff mode writes one gradient column per parameter (p0, rate, coeffs)
    assert len(header) == 2 + 2 + 30
    for row in rows:
        assert np.isfinite([float(x) for x in row[1:]]).all()


def test_cli_simulate_reference_deterministic(tmp_path):
    cfg = _write(tmp_path, BASE_SIR + "model.mode = reference\n")
    out1, out2 = tmp_path / "a", tmp_path / "b"
    assert main(["simulate", "--config", cfg, "--out", str(out1)]) == 0
    assert main(["simulate", "--config", cfg, "--out", str(out2)]) == 0
    assert (out1 / "simulate.csv").read_text() == \
        (out2 / "simulate.csv").read_text()


def test_cli_seed_offset_changes_rows(tmp_path):
    cfg = _write(tmp_path, BASE_SIR + "model.mode = reference\n")
    out1, out2 = tmp_path / "a", tmp_path / "b"
    main(["simulate", "--config", cfg, "--out", str(out1)])
    main(["simulate", "--config", cfg, "--out", str(out2),
          "--seed-offset", "5"])
    _, rows1 = _read_csv(out1 / "simulate.csv")
    _, rows2 = _read_csv(out2 / "simulate.csv")
    assert rows1 != rows2


def test_cli_optimize_single_road(tmp_path):
    cfg = _write(tmp_path, BASE_ROAD + """
optimize.algorithm = adam
optimize.step_size = 0.2
optimize.budget_batches = 3
run.batch_size = 1
""")
    out = tmp_path / "out"
    assert main(["optimize", "--config", cfg, "--out", str(out)]) == 0
    assert (out / "trace.csv").exists()
    assert (out / "params.txt").exists()
    lines = (out / "trace.csv").read_text().splitlines()
    assert lines[1] == "batch,wall_clock_s,candidate_objective,best_objective"
    assert len(lines) >= 2 + 3


def test_cli_optimize_requires_budget(tmp_path):
    cfg = _write(tmp_path, BASE_ROAD + "optimize.algorithm = adam\n")
    assert main(["optimize", "--config", cfg,
                 "--out", str(tmp_path / "o")]) == 2


def test_cli_gradient_algorithm_needs_diff_mode(tmp_path):
    cfg = _write(tmp_path, BASE_ROAD + """
model.mode = reference
optimize.algorithm = adam
optimize.budget_batches = 2
""")
    assert main(["optimize", "--config", cfg,
                 "--out", str(tmp_path / "o")]) == 2


def test_cli_fidelity_sir(tmp_path):
    cfg = _write(tmp_path, BASE_SIR + """
fidelity.samples = 2
fidelity.seeds_per_sample = 2
""")
    out = tmp_path / "out"
    assert main(["fidelity", "--config", cfg, "--out", str(out)]) == 0
    _, rows = _read_csv(out / "fidelity.csv")
    assert len(rows) == 4
    header, srows = _read_csv(out / "fidelity_summary.csv")
    assert header == ["median", "q95", "q99"]
    med, q95, q99 = (float(x) for x in srows[0])
    assert 0.0 <= med <= q95 <= q99 <= 1.0


def test_cli_fidelity_rejects_grid(tmp_path):
    cfg = _write(tmp_path, "model.variant = grid_static\n")
    assert main(["fidelity", "--config", cfg,
                 "--out", str(tmp_path / "o")]) == 2


def test_cli_bench_small(tmp_path):
    cfg = _write(tmp_path, """
model.variant = grid_static
grid.width = 1
grid.height = 1
run.horizon = 3.0
bench.vehicle_counts = 4,8
bench.repeats = 1
""")
    out = tmp_path / "out"
    assert main(["bench", "--config", cfg, "--out", str(out)]) == 0
    header, rows = _read_csv(out / "bench.csv")
    assert header[0] == "vehicles"
    assert [r[0] for r in rows] == ["4", "8"]
    for r in rows:
        assert float(r[1]) > 0 and float(r[2]) > 0


def test_cli_exit_codes(tmp_path):
    # unreadable config
    assert main(["simulate", "--config", str(tmp_path / "nope.cfg"),
                 "--out", str(tmp_path / "o")]) == 2
    # runtime error surfaces as 3: horizon 0 gives an empty trajectory
    cfg = _write(tmp_path, "model.variant = single_road\n"
                           "single_road.vehicles = 0\n")
    assert main(["simulate", "--config", cfg,
                 "--out", str(tmp_path / "o")]) == 3


def test_console_entry_point():
    import subprocess
    r = subprocess.run(["diffsim", "simulate"], capture_output=True)
    assert r.returncode == 2


def test_trace_csv_roundtrip(tmp_path):
    from diffsim import optim
    cfg = _write(tmp_path, BASE_ROAD + """
optimize.algorithm = spsa
optimize.budget_batches = 4
run.batch_size = 1
model.mode = reference
""")
    out = tmp_path / "out"
    assert main(["optimize", "--config", cfg, "--out", str(out)]) == 0
    records = optim.load_trace(out / "trace.csv")
    text = (out / "trace.csv").read_text().splitlines()[2:]
    assert len(records) == len(text)
    for r, ln in zip(records, text):
        b, w, c, v = ln.split(",")
        assert (r.batch, r.wall_clock_s, r.candidate_objective,
                r.best_objective) == (int(b), float(w), float(c), float(v))
