"""Walk the bundled news app and save each screen with its index badges.

Usage: python demos/marked_screens.py [out_dir]
"""

import argparse
import logging
from pathlib import Path

from armphone.actions import ExecutionContext, execute
from armphone.actionspace import ActionSpec
from armphone.arm import DeviceProfile, SimArm
from armphone.bench import bundled
from armphone.device import load_screen_pack
from armphone.keyboard import LayoutCache
from armphone.perception import MockGrounder, annotate_marks, perceive

logger = logging.getLogger("demo")


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("out", nargs="?", type=Path, default=Path("marked"))
    args = parser.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    args.out.mkdir(parents=True, exist_ok=True)

    env = load_screen_pack(bundled("screens.json"))
    cmap = DeviceProfile.load(bundled("device_profile.json")).calibration()
    grounder = MockGrounder()
    ctx = ExecutionContext(env, SimArm(cmap, env), grounder, LayoutCache())
    env.reset("app_home", "news")

    # search for "mars", then come back with the edge gesture
    plan = [ActionSpec.tap(970, 170), ActionSpec.type_text("mars"), ActionSpec.back()]
    for step in range(len(plan) + 1):
        obs = env.observe()
        marks = perceive(obs, grounder)
        path = args.out / f"{step:02d}_{env.screen_id}.png"
        path.write_bytes(annotate_marks(obs, marks).png)
        logger.info("%s: %d marks -> %s", env.screen_id, len(marks), path)
        for m in marks:
            logger.info("  [%d] %s %s", m.index, m.kind, m.label)
        if step < len(plan):
            report = execute(plan[step], ctx)
            logger.info("%s -> %s", plan[step].type, "; ".join(report.hardware_lines()))


if __name__ == "__main__":
    main()
