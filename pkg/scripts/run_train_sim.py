"""Train the tabular policy on a bundled task and plot-friendly log to stdout.

Examples:
    python scripts/run_train_sim.py --task default --seed 3
    python scripts/run_train_sim.py --task sparse --steps 30 --lr 64 --strict-only
"""

from __future__ import annotations

import argparse
from dataclasses import replace

from tooltrain.grpo import GrpoConfig
from tooltrain.sim import SimConfig, load_task, train


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--task", default="default")
    parser.add_argument("--seed", type=int, default=3)
    parser.add_argument("--steps", type=int, default=300)
    parser.add_argument("--group-size", type=int, default=8)
    parser.add_argument("--lr", type=float, default=8.0)
    parser.add_argument("--midpoint", type=int, default=25)
    parser.add_argument("--kappa", type=float, default=0.2)
    parser.add_argument("--strict-only", action="store_true")
    parser.add_argument("--every", type=int, default=10, help="print every N steps")
    args = parser.parse_args()

    cfg = SimConfig(
        seed=args.seed,
        steps=args.steps,
        group_size=args.group_size,
        strict_only=args.strict_only,
        grpo=GrpoConfig(learning_rate=args.lr),
    )
    cfg = replace(cfg, reward=replace(cfg.reward, midpoint=args.midpoint, kappa=args.kappa))
    log = train(load_task(args.task), cfg)
    for record in log.records:
        if record["step"] % args.every == 0 or record["step"] == args.steps - 1:
            print(
                f"step {record['step']:>4}  reward {record['mean_reward']:7.4f}  "
                f"exact {record['exact_match_rate']:5.2f}  sigma {record['sigma']:6.4f}  "
                f"entropy {record['policy_entropy']:6.4f}"
            )


if __name__ == "__main__":
    main()
