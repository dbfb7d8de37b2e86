import copy
import json

import pytest

from armphone.arm import DeviceProfile, SimArm
from armphone.bench import bundled
from armphone.device import load_screen_pack

from helpers import minimal_pack


@pytest.fixture(scope="session")
def screens_path():
    return bundled("screens.json")


@pytest.fixture(scope="session")
def tasks_path():
    return bundled("tasks.json")


@pytest.fixture(scope="session")
def profile_path():
    return bundled("device_profile.json")


@pytest.fixture(scope="session")
def screens_doc(screens_path):
    return json.loads(screens_path.read_text(encoding="utf-8"))


@pytest.fixture
def env(screens_path):
    return load_screen_pack(screens_path)


@pytest.fixture(scope="session")
def cmap(profile_path):
    return DeviceProfile.load(profile_path).calibration()


@pytest.fixture
def arm(env, cmap):
    return SimArm(cmap, env)


@pytest.fixture
def pack_factory():
    def make(**extra):
        return copy.deepcopy(minimal_pack(**extra))
    return make


@pytest.fixture(scope="session")
def scripted_run(tmp_path_factory, tasks_path):
    """Scripted oracle over the bundled pack: (out dir, report, outcomes)."""
    from armphone.bench import RunConfig, read_task_pack, run_benchmark

    pack = read_task_pack(tasks_path)
    out = tmp_path_factory.mktemp("scripted")
    config = RunConfig(agent="scripted", screen_pack=pack.screen_pack, profile=pack.device_profile,
                       out=out)
    report, outcomes = run_benchmark(pack.tasks, config)
    return out, report, outcomes
