"""Score the scripted oracle and a seeded random agent on the bundled pack.

Usage: python demos/agents_compared.py [--seed N] [--out DIR]
"""

import argparse
import logging
from pathlib import Path

from armphone.bench import RunConfig, bundled, read_task_pack, run_benchmark


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", type=Path, default=Path("compare"))
    args = parser.parse_args()
    logging.basicConfig(level=logging.WARNING)

    pack = read_task_pack(bundled("tasks.json"))
    for agent in ("scripted", "random"):
        config = RunConfig(agent=agent, seed=args.seed, screen_pack=pack.screen_pack,
                           profile=pack.device_profile, out=args.out / agent)
        report, _ = run_benchmark(pack.tasks, config)
        print(f"== {agent} ==")
        print(report.to_text())


if __name__ == "__main__":
    main()
