import json
import shutil

import pytest

from conftest import SCENARIOS
from rnexplore.cli import ARTIFACTS, main


def status_line(capsys):
    out = capsys.readouterr().out.strip().splitlines()
    return json.loads(out[-1]), out


def copy_scenario(tmp_path, name, extra=""):
    """Scenario copy next to its world file, with optional extra YAML lines."""
    env = next(p for p in SCENARIOS.glob(f"{name}.txt*"))
    shutil.copy(env, tmp_path / env.name)
    text = (SCENARIOS / f"{name}.yaml").read_text() + extra
    path = tmp_path / f"{name}.yaml"
    path.write_text(text)
    return path


def test_run_writes_artifacts(tmp_path, capsys):
    code = main(["run", "--scenario", str(SCENARIOS / "pocket.yaml"), "--tick", "0.1",
                 "--out", str(tmp_path / "out")])
    assert code == 0
    status, _ = status_line(capsys)
    assert status["status"] == "terminated" and status["exit"] == 0
    assert sorted(p.name for p in (tmp_path / "out").iterdir()) == sorted(ARTIFACTS)
    events = (tmp_path / "out" / "events.log").read_text().splitlines()
    assert events[-1].startswith("tick ") and " event terminated " in events[-1]
    metrics = (tmp_path / "out" / "metrics.csv").read_text().splitlines()
    assert metrics[0] == "tick,sim_time_s,path_length_m,mapped_volume_m3,nodes,edges"


def test_time_limit_exit_code(tmp_path, capsys):
    code = main(["run", "--scenario", str(SCENARIOS / "room.yaml"), "--time-limit", "2",
                 "--out", str(tmp_path)])
    assert code == 2
    assert status_line(capsys)[0]["status"] == "time_limit"


def test_tree_mode_snapshot_is_a_tree(tmp_path, capsys):
    code = main(["run", "--scenario", str(SCENARIOS / "room.yaml"), "--mode", "tree",
                 "--local-sampling", "off", "--out", str(tmp_path)])
    assert code == 0
    lines = (tmp_path / "graph.txt").read_text().splitlines()
    nodes = sum(l.startswith("node ") for l in lines)
    edges = sum(l.startswith("edge ") for l in lines)
    assert nodes > 1 and nodes == edges + 1


def test_repeat_runs_are_byte_identical(tmp_path, capsys):
    args = ["run", "--scenario", str(SCENARIOS / "room.yaml"), "--seed", "4", "--time-limit", "20"]
    main(args + ["--out", str(tmp_path / "a")])
    main(args + ["--out", str(tmp_path / "b")])
    for name in ARTIFACTS:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_overrides_take_precedence(tmp_path, capsys):
    main(["run", "--scenario", str(SCENARIOS / "pocket.yaml"), "--tick", "0.1", "--t-exit", "3",
          "--out", str(tmp_path)])
    assert status_line(capsys)[0]["duration_s"] < 5.0


def test_unknown_flag_and_missing_file(tmp_path, capsys):
    assert main(["run", "--scenario", "x.yaml", "--out", str(tmp_path), "--bogus", "1"]) == 1
    assert status_line(capsys)[0]["exit"] == 1
    assert main(["run", "--scenario", str(tmp_path / "missing.yaml"), "--out", str(tmp_path)]) == 1
    assert status_line(capsys)[0]["status"] == "error"


@pytest.mark.parametrize("name", ["room", "pocket", "maze12", "indoor25"])
def test_shipped_scenarios_validate(name, capsys):
    assert main(["validate", str(SCENARIOS / f"{name}.yaml")]) == 0
    assert status_line(capsys)[0]["status"] == "valid"


def test_spawn_on_wall_is_reported(tmp_path, capsys):
    path = copy_scenario(tmp_path, "room")
    path.write_text(path.read_text().replace("spawn_x: 1.0", "spawn_x: 0.05"))
    assert main(["validate", str(path)]) == 1
    status, out = status_line(capsys)
    assert "violation: spawn not traversable" in out
    assert status["violations"] == ["spawn not traversable"]


def test_footprint_invariant_is_reported(tmp_path, capsys):
    path = copy_scenario(tmp_path, "room", "w_robot: 0.9\n")
    assert main(["validate", str(path)]) == 1
    _, out = status_line(capsys)
    assert any(l.startswith("violation:") and "r_robot >= w_robot / 2" in l for l in out)


def test_validate_does_not_touch_inputs(tmp_path, capsys):
    path = copy_scenario(tmp_path, "room")
    before = {p.name: p.read_bytes() for p in tmp_path.iterdir()}
    main(["validate", str(path)])
    assert {p.name: p.read_bytes() for p in tmp_path.iterdir()} == before


def test_bench_two_seeds_four_variants(tmp_path, capsys):
    code = main(["bench", "--scenario", str(SCENARIOS / "pocket.yaml"), "--seeds", "2", "--tick", "0.1",
                 "--out", str(tmp_path)])
    assert code == 0
    status, out = status_line(capsys)
    assert status["runs"] == 8 and status["failures"] == []
    summary = (tmp_path / "summary.csv").read_text().splitlines()
    assert summary[0].startswith("#")
    header = summary[1].split(",")
    assert {"duration_mu_s", "path_length_mu_m", "mapped_volume_mu_m3"} <= set(header)
    assert [r.split(",")[0] for r in summary[2:]] == ["rne", "rrg", "rrt+ls", "rrt"]


def test_bench_rejects_unknown_variant(capsys):
    assert main(["bench", "--scenario", str(SCENARIOS / "pocket.yaml"), "--variants", "rne,foo"]) == 1
