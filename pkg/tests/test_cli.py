import json
import subprocess
import sys

import numpy as np
import pytest

from armphone.cli import main
from armphone.dataset import dumps, normalize_timestamps, read_episode, write_episode


def test_run_success_writes_episode(tmp_path, capsys):
    assert main(["run", "--task", "notes-write-hi", "--out", str(tmp_path)]) == 0
    path = capsys.readouterr().out.strip()
    assert path.endswith("notes-write-hi.json")
    assert read_episode(path)["metadata"]["terminal_status"] == "agent_done"


def test_run_failure_exit_code(tmp_path):
    assert main(["run", "--task", "news-save-science", "--budget", "1", "--out", str(tmp_path)]) == 1


@pytest.mark.parametrize("argv", [
    ["run", "--task", "nope"],
    ["run", "--task", "shop-add-shoes", "--budget", "0"],
    ["run", "--task", "shop-add-shoes", "--pack", "missing.json"],
    ["run", "--task", "shop-add-shoes", "--env", "live"],
    ["run", "--task", "shop-add-shoes", "--env", "sim:missing.json"],
    ["run", "--task", "shop-add-shoes", "--agent", "human"],
    ["bench", "--jobs", "0"],
    ["validate", "does/not/exist"],
    ["frobnicate"],
])
def test_usage_errors_exit_2(tmp_path, argv, capsys):
    assert main(argv + (["--out", str(tmp_path)] if argv[0] in ("run", "bench") else [])) == 2


def test_calibrate_identity_points(tmp_path, capsys):
    pixels = [(0, 0), (1000, 0), (0, 2000), (1000, 2000), (500, 700)]
    doc = {"profile_version": 1, "device_id": "id", "screen": {"width": 1000, "height": 2000},
           "workspace": {"x_min": 0, "y_min": 0, "x_max": 1000, "y_max": 2000},
           "z_contact": 0, "z_hover": 5,
           "correspondences": [{"pixel": list(p), "workspace": list(p)} for p in pixels]}
    points = tmp_path / "points.json"
    points.write_text(json.dumps(doc))
    out = tmp_path / "profile.json"
    assert main(["calibrate", str(points), "--out", str(out)]) == 0
    cal = json.loads(out.read_text())["calibration"]
    assert np.allclose(cal["affine"], [[1, 0, 0], [0, 1, 0]], atol=1e-9)
    assert cal["residual"] <= 1e-6
    doc["correspondences"] = doc["correspondences"][:2]
    points.write_text(json.dumps(doc))
    assert main(["calibrate", str(points), "--out", str(out)]) == 1


def test_validate_and_replay(scripted_run, tmp_path, capsys):
    out, _, _ = scripted_run
    assert main(["validate", str(out)]) == 0
    assert "12/12 episodes valid" in capsys.readouterr().out
    episode = out / "episodes" / "cross-news-then-shop.json"
    assert main(["replay", str(episode)]) == 0
    assert "identical" in capsys.readouterr().out

    doc = read_episode(episode)
    doc["steps"][1]["action_hardware"] = "tap at (5, 5)"
    tampered = write_episode(tmp_path / "tampered.json", doc)
    assert main(["replay", str(tampered)]) == 1
    assert "DIVERGED" in capsys.readouterr().out


def test_bench_random_agent_is_deterministic(tmp_path, capsys):
    for name, jobs in (("a", "1"), ("b", "4")):
        assert main(["bench", "--agent", "random", "--seed", "5", "--jobs", jobs,
                     "--out", str(tmp_path / name)]) == 0
    assert "all" in capsys.readouterr().out
    a, b = tmp_path / "a", tmp_path / "b"
    assert (a / "report.json").read_bytes() == (b / "report.json").read_bytes()
    for ep in sorted((a / "episodes").glob("*.json")):
        norm = [dumps(normalize_timestamps(read_episode(p))) for p in (ep, b / "episodes" / ep.name)]
        assert norm[0] == norm[1]


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "armphone", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0 and "calibrate" in proc.stdout
