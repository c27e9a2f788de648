"""Midpoint/steepness grid on a bundled task, CSV to stdout.

Example:
    python scripts/run_schedule_ablation.py --task sparse --midpoints 0,25,50,100 --kappas 0.2,1.0
"""

from __future__ import annotations

import argparse

from tooltrain.grpo import GrpoConfig
from tooltrain.sim import SimConfig, load_task, schedule_ablation


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--task", default="default")
    parser.add_argument("--seed", type=int, default=3)
    parser.add_argument("--steps", type=int, default=300)
    parser.add_argument("--lr", type=float, default=8.0)
    parser.add_argument("--midpoints", default="0,25,50,100")
    parser.add_argument("--kappas", default="0.2,1.0")
    args = parser.parse_args()

    cfg = SimConfig(seed=args.seed, steps=args.steps, grpo=GrpoConfig(learning_rate=args.lr))
    report = schedule_ablation(
        load_task(args.task),
        [int(x) for x in args.midpoints.split(",")],
        [float(x) for x in args.kappas.split(",")],
        cfg,
    )
    print(report.to_csv(), end="")


if __name__ == "__main__":
    main()
