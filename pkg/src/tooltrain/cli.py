"""Command-line entry point: pipeline, reward, simulator, and eval subcommands.

File flags accept ``-`` for standard input/output. Output files are written
atomically (temp file plus rename). A JSON config file passed with
``--config`` may supply any flag's default (keys named like the flags,
dashes as underscores) plus optional ``reward``, ``grpo``, and ``sim``
sections for the scoring and simulator subcommands; explicit flags win.

Exit codes: 0 success, 1 validation error, 2 I/O error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from dataclasses import fields
from pathlib import Path
from typing import Any, Sequence

from .calls import ParseError, SchemaError, parse_answer_text
from .evals import EmptyToolset, evaluate, overlap_matrix_csv, read_eval_records
from .grpo import GrpoConfig
from .pipeline import (
    MaskCollision,
    augment_multi_turn,
    corpus_stats,
    filter_corpus,
    mask_sample,
    read_samples,
    write_samples,
    STRATEGIES,
)
from .rewards import ConfigError, DegenerateGroundTruth, RewardConfig, compute_reward
from .sim import SimConfig, load_task, schedule_ablation, train

__all__ = ["main", "run"]


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> Any:  # argparse defaults to exit code 2
        raise _UsageError(message)


def _read_text(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    return Path(path).read_text(encoding="utf-8")


def _write_text(path: str, data: str) -> None:
    if path == "-":
        sys.stdout.write(data)
        return
    target = Path(path)
    fd, tmp = tempfile.mkstemp(dir=target.parent or Path("."), prefix=f".{target.name}.")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as handle:
            handle.write(data)
        os.replace(tmp, target)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _build_parser() -> _Parser:
    parser = _Parser(prog="tooltrain", description=__doc__)
    parser.add_argument("--config", default=None, help="JSON file with flag defaults")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--quiet", action="store_true", default=None)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("filter", help="drop records with unparseable calls or schemas")
    p.add_argument("--in", dest="in_path", default=None)
    p.add_argument("--out", dest="out_path", default=None)
    p.add_argument("--report", default=None)

    p = sub.add_parser("mask", help="rename tools/parameters to opaque indices")
    p.add_argument("--in", dest="in_path", default=None)
    p.add_argument("--out", dest="out_path", default=None)
    p.add_argument("--mapping", default=None)

    p = sub.add_parser("augment", help="synthesize multi-turn samples")
    p.add_argument("--in", dest="in_path", default=None)
    p.add_argument("--out", dest="out_path", default=None)
    p.add_argument("--strategies", default=None, help="comma-separated strategy names")

    p = sub.add_parser("reward", help="score one prediction against a ground truth")
    p.add_argument("--pred", default=None)
    p.add_argument("--gt", default=None)
    p.add_argument("--step", type=int, default=None)
    p.add_argument("--breakdown", action="store_true", default=None)

    p = sub.add_parser("train-sim", help="run the desk-scale training loop")
    p.add_argument("--task", default=None, help="bundled task name or a task JSON file")
    p.add_argument("--out-log", dest="out_log", default=None)

    p = sub.add_parser("ablate", help="midpoint/steepness schedule grid")
    p.add_argument("--task", default=None)
    p.add_argument("--midpoints", default=None, help="comma-separated integers")
    p.add_argument("--kappas", default=None, help="comma-separated reals")
    p.add_argument("--out", dest="out_path", default=None)

    p = sub.add_parser("eval", help="AST accuracy and F1 over a predictions file")
    p.add_argument("--pred", default=None)
    p.add_argument("--out", dest="out_path", default=None)

    p = sub.add_parser("overlap", help="pairwise toolset overlap matrix")
    p.add_argument("--inventories", default=None)
    p.add_argument("--out", dest="out_path", default=None)

    p = sub.add_parser("stats", help="corpus counts by source and turn shape")
    p.add_argument("--in", dest="in_path", default=None)
    return parser


class _Ctx:
    """Resolved option lookup: explicit flag, then config-file key, then default."""

    def __init__(self, args: argparse.Namespace, config: dict[str, Any]):
        self.args = args
        self.config = config

    def get(self, name: str, default: Any = None) -> Any:
        value = getattr(self.args, name, None)
        if value is not None:
            return value
        if name in self.config:
            return self.config[name]
        return default

    def require(self, name: str, flag: str) -> Any:
        value = self.get(name)
        if value is None:
            raise _UsageError(f"missing required flag {flag}")
        return value

    def reward_config(self) -> RewardConfig:
        section = self.config.get("reward", {})
        return RewardConfig.from_obj(section) if section else RewardConfig()

    def grpo_config(self) -> GrpoConfig:
        section = dict(self.config.get("grpo", {}))
        unknown = set(section) - {f.name for f in fields(GrpoConfig)}
        if unknown:
            raise ConfigError(f"unknown grpo config keys: {sorted(unknown)}")
        return GrpoConfig(**section)

    def sim_config(self) -> SimConfig:
        section = dict(self.config.get("sim", {}))
        known = {f.name for f in fields(SimConfig)} - {"reward", "grpo", "seed"}
        unknown = set(section) - known
        if unknown:
            raise ConfigError(f"unknown sim config keys: {sorted(unknown)}")
        return SimConfig(
            seed=int(self.get("seed", 0)),
            reward=self.reward_config(),
            grpo=self.grpo_config(),
            **section,
        )

    def say(self, text: str) -> None:
        if not self.get("quiet", False):
            print(text)


def _cmd_filter(ctx: _Ctx) -> int:
    raw = _read_text(ctx.require("in_path", "--in"))
    kept, report = filter_corpus(raw.splitlines())
    _write_text(ctx.require("out_path", "--out"), write_samples(kept))
    report_path = ctx.get("report")
    if report_path:
        _write_text(report_path, json.dumps(report.to_obj(), indent=2) + "\n")
    ctx.say(report.to_text())
    return 0


def _cmd_mask(ctx: _Ctx) -> int:
    samples = read_samples(_read_text(ctx.require("in_path", "--in")).splitlines())
    masked = []
    mappings = []
    for sample in samples:
        out, mapping = mask_sample(sample, seed=int(ctx.get("seed", 0)))
        masked.append(out)
        params: dict[str, dict[str, str]] = {}
        for (fn, orig), new in mapping.parameters.items():
            params.setdefault(fn, {})[orig] = new
        mappings.append({"id": sample.id, "functions": mapping.functions, "parameters": params})
    _write_text(ctx.require("out_path", "--out"), write_samples(masked))
    mapping_path = ctx.get("mapping")
    if mapping_path:
        _write_text(mapping_path, json.dumps({"samples": mappings}, indent=2) + "\n")
    ctx.say(f"masked {len(masked)} samples")
    return 0


def _cmd_augment(ctx: _Ctx) -> int:
    seed = ctx.get("seed")
    if seed is None:
        raise _UsageError("augment requires an explicit --seed")
    names = str(ctx.require("strategies", "--strategies")).split(",")
    for name in names:
        if name not in STRATEGIES:
            raise _UsageError(f"unknown strategy {name!r} (choose from {', '.join(STRATEGIES)})")
    corpus = read_samples(_read_text(ctx.require("in_path", "--in")).splitlines())
    out = []
    for name in names:
        produced, report = augment_multi_turn(corpus, name, seed=int(seed))
        out.extend(produced)
        ctx.say(f"{name}: produced {report.produced}, skipped {report.skipped}")
    _write_text(ctx.require("out_path", "--out"), write_samples(out))
    return 0


def _cmd_reward(ctx: _Ctx) -> int:
    pred_path = ctx.require("pred", "--pred")
    gt_path = ctx.require("gt", "--gt")
    step = int(ctx.require("step", "--step"))
    pred = _read_text(pred_path)
    gt_text = _read_text(gt_path).strip()
    gt = parse_answer_text(gt_text)
    breakdown = compute_reward(pred, gt, gt_text, step, ctx.reward_config())
    if ctx.get("breakdown", False):
        print(json.dumps(breakdown.to_obj()))
    else:
        print(json.dumps({"final": breakdown.final}))
    return 0


def _cmd_train_sim(ctx: _Ctx) -> int:
    task = load_task(str(ctx.require("task", "--task")))
    log = train(task, ctx.sim_config())
    _write_text(ctx.require("out_log", "--out-log"), log.to_jsonl())
    if log.records:
        last = log.records[-1]
        ctx.say(
            f"{len(log.records)} steps; final mean_reward {last['mean_reward']:.4f}, "
            f"exact_match_rate {last['exact_match_rate']:.4f}"
        )
    return 0


def _cmd_ablate(ctx: _Ctx) -> int:
    task = load_task(str(ctx.require("task", "--task")))
    midpoints = [int(x) for x in str(ctx.require("midpoints", "--midpoints")).split(",")]
    kappas = [float(x) for x in str(ctx.require("kappas", "--kappas")).split(",")]
    report = schedule_ablation(task, midpoints, kappas, ctx.sim_config())
    _write_text(ctx.require("out_path", "--out"), report.to_csv())
    ctx.say(f"{len(report.rows)} cells")
    return 0


def _cmd_eval(ctx: _Ctx) -> int:
    records = read_eval_records(_read_text(ctx.require("pred", "--pred")).splitlines())
    report = evaluate(records)
    _write_text(ctx.require("out_path", "--out"), json.dumps(report.to_obj(), indent=2) + "\n")
    ctx.say(report.to_text())
    return 0


def _cmd_overlap(ctx: _Ctx) -> int:
    raw = json.loads(_read_text(ctx.require("inventories", "--inventories")))
    if not isinstance(raw, dict):
        raise ValueError("inventories file must map dataset names to tool lists")
    inventories = {name: set(tools) for name, tools in raw.items()}
    _write_text(ctx.require("out_path", "--out"), overlap_matrix_csv(inventories))
    return 0


def _cmd_stats(ctx: _Ctx) -> int:
    samples = read_samples(_read_text(ctx.require("in_path", "--in")).splitlines())
    table = corpus_stats(samples)
    print(json.dumps(table.to_obj(), indent=2))
    ctx.say(table.to_text())
    return 0


_COMMANDS = {
    "filter": _cmd_filter,
    "mask": _cmd_mask,
    "augment": _cmd_augment,
    "reward": _cmd_reward,
    "train-sim": _cmd_train_sim,
    "ablate": _cmd_ablate,
    "eval": _cmd_eval,
    "overlap": _cmd_overlap,
    "stats": _cmd_stats,
}

_VALIDATION_ERRORS = (
    ParseError,
    SchemaError,
    ConfigError,
    DegenerateGroundTruth,
    MaskCollision,
    EmptyToolset,
    json.JSONDecodeError,
    ValueError,
    KeyError,
    TypeError,
)


def run(argv: Sequence[str]) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        config: dict[str, Any] = {}
        if args.config:
            config = json.loads(Path(args.config).read_text(encoding="utf-8"))
            if not isinstance(config, dict):
                raise ValueError("--config file must hold a JSON object")
        ctx = _Ctx(args, config)
        return _COMMANDS[args.command](ctx)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 1
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 2
    except _VALIDATION_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
