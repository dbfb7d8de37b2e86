import copy
import json

import pytest

from armphone.bench import (
    CROSS_APP_CATEGORIES,
    SINGLE_APP_CATEGORIES,
    RunConfig,
    load_task_pack,
    read_task_pack,
    run_benchmark,
    task_counts,
)
from armphone.errors import PackError


def base_task(**kw):
    doc = {"task_id": "t", "set": "standard", "category": "SystemApps", "level": "simple",
           "apps": ["settings"], "origin": "app_home", "instruction": "Do it.", "golden_steps": 2}
    doc.update(kw)
    return doc


def write_pack(tmp_path, tasks, **extra):
    path = tmp_path / "tasks.json"
    path.write_text(json.dumps({"task_pack_version": 1, "tasks": tasks, **extra}))
    return path


def test_bundled_pack_shape(tasks_path):
    pack = read_task_pack(tasks_path)
    assert len(pack.tasks) >= 10
    challenging = [t for t in pack.tasks
                   if any(s.action.type in ("back", "exit", "text") for s in t.golden_trajectory)]
    assert len(challenging) >= 3
    counts = pack.counts()
    assert counts["total"] == len(pack.tasks)
    assert pack.screen_pack.name == "screens.json"


@pytest.mark.parametrize("override, message", [
    ({"set": "cross_app", "category": "Multi-Apps", "level": None, "apps": ["a", "b"]}, "phone home"),
    ({"set": "cross_app", "category": "Multi-Apps", "level": None, "origin": "phone_home"}, "two apps"),
    ({"golden_steps": 0}, "golden_steps"),
    ({"golden_trajectory": [{"type": "back", "params": {}}]}, "golden_trajectory has 1"),
    ({"category": "Games"}, "category"),
    ({"level": "extreme"}, "level"),
    ({"origin": "phone_home"}, "app home"),
    ({"set": "bonus"}, "unknown set"),
    ({"golden_trajectory": [{"type": "pinch"}, {"type": "back"}]}, "pinch"),
])
def test_task_invariants(tmp_path, override, message):
    path = write_pack(tmp_path, [base_task(**override)])
    with pytest.raises(PackError, match=message) as err:
        load_task_pack(path)
    assert "'t'" in str(err.value)


def test_pack_level_errors(tmp_path):
    with pytest.raises(PackError, match="no tasks"):
        load_task_pack(write_pack(tmp_path, []))
    with pytest.raises(PackError, match="duplicate"):
        load_task_pack(write_pack(tmp_path, [base_task(), base_task()]))
    bad = tmp_path / "v.json"
    bad.write_text(json.dumps({"task_pack_version": 2, "tasks": [base_task()]}))
    with pytest.raises(PackError, match="task_pack_version"):
        load_task_pack(bad)
    with pytest.raises(PackError, match="missing field 'instruction'"):
        t = base_task()
        del t["instruction"]
        load_task_pack(write_pack(tmp_path, [t]))


def test_reference_split_sizes_total_155(tmp_path):
    tasks = []
    levels = ("simple", "medium", "hard")
    for i in range(37):
        tasks.append(base_task(task_id=f"s{i}", category=SINGLE_APP_CATEGORIES[i % 8], level=levels[i % 3]))
    for i in range(103):
        tasks.append(base_task(task_id=f"c{i}", set="challenging", category=SINGLE_APP_CATEGORIES[i % 8],
                               level=levels[i % 3]))
    for i in range(15):
        tasks.append(base_task(task_id=f"x{i}", set="cross_app", category=CROSS_APP_CATEGORIES[i % 6],
                               level=None, apps=["a", "b"], origin="phone_home"))
    counts = task_counts(load_task_pack(write_pack(tmp_path, tasks)))
    assert counts["total"] == 155
    assert counts["set"] == {"standard": 37, "challenging": 103, "cross_app": 15}


def test_scripted_oracle_report(scripted_run, tasks_path):
    out, report, outcomes = scripted_run
    pack = read_task_pack(tasks_path)
    assert all(r.sr == 1.0 and r.se == 1.0 and r.cr == 1.0 for r in report.rows)
    by_id = {t.task_id: t for t in pack.tasks}
    for o in outcomes:
        assert o.agent_steps_total == by_id[o.task_id].golden_steps
    for name in ("report.json", "report.txt", "outcomes.json", "manifest.json"):
        assert (out / name).is_file()
    assert sorted(p.stem for p in (out / "episodes").glob("*.json")) == sorted(by_id)


def test_crashing_task_becomes_failed_outcome(tmp_path, tasks_path):
    pack = read_task_pack(tasks_path)
    task = copy.deepcopy(pack.get("settings-dark-mode"))
    object.__setattr__(task, "apps", ("calculator",))  # no such app in the screen pack
    config = RunConfig(agent="scripted", screen_pack=pack.screen_pack, profile=pack.device_profile,
                       out=tmp_path)
    report, outcomes = run_benchmark([task, pack.get("shop-add-shoes")], config)
    crashed, ok = outcomes
    assert not crashed.success and "calculator" in crashed.diagnostics
    assert ok.success
    assert report.find().successes == 1


@pytest.mark.parametrize("kw, message", [
    ({"agent": "human"}, "unknown agent"),
    ({"env": "live"}, "arm executor"),
    ({"budget": 0}, "budget"),
    ({"jobs": 0}, "jobs"),
    ({"screen_pack": None}, "screen pack"),
])
def test_config_rejections(tasks_path, kw, message):
    pack = read_task_pack(tasks_path)
    args = dict(agent="scripted", screen_pack=pack.screen_pack, profile=pack.device_profile)
    args.update(kw)
    with pytest.raises(PackError, match=message):
        RunConfig(**args).check(pack.tasks)


def test_scripted_needs_golden_trajectories(tmp_path, tasks_path):
    pack = read_task_pack(write_pack(tmp_path, [base_task()]))
    with pytest.raises(PackError, match="golden trajectories"):
        RunConfig(agent="scripted", screen_pack=tasks_path).check(pack.tasks)


def test_random_agent_report_is_reproducible(tmp_path, tasks_path):
    pack = read_task_pack(tasks_path)

    def once(out, jobs):
        config = RunConfig(agent="random", seed=11, screen_pack=pack.screen_pack,
                           profile=pack.device_profile, out=out, jobs=jobs)
        run_benchmark(pack.tasks, config)
        return (out / "report.json").read_text(), (out / "outcomes.json").read_text()

    assert once(tmp_path / "a", 1) == once(tmp_path / "b", 3)
