"""JSON-over-stdio dispatcher: one request object per line, one response per line.

Request:  {"id": <int>, "op": <name>, "args": {...}}
Response: {"id": <int>, "ok": true, "result": ...}
      or  {"id": <int>, "ok": false, "error": <core error name>, "message": ...}

Delegates every operation to the installed tooltrain package; no scoring or
parsing logic lives here.
"""

from __future__ import annotations

import json
import sys

from tooltrain.calls import (
    ParseError,
    SchemaError,
    answer_set_from_obj,
    answer_set_to_obj,
    ast_equal,
    dump_json,
    parse_answer_text,
    parse_call_expression,
    parse_json_calls,
)
from tooltrain.grpo import GroupTooSmall, GrpoConfig, compute_advantages
from tooltrain.rewards import ConfigError, DegenerateGroundTruth, RewardConfig, compute_reward

_CORE_ERRORS = (
    ParseError,
    SchemaError,
    ConfigError,
    DegenerateGroundTruth,
    GroupTooSmall,
    ValueError,
    TypeError,
)

_config_cache: dict[str, RewardConfig] = {}


def _reward_config(obj: dict | None) -> RewardConfig:
    key = json.dumps(obj or {}, sort_keys=True)
    cached = _config_cache.get(key)
    if cached is None:
        cached = RewardConfig.from_obj(obj or {})
        _config_cache[key] = cached
    return cached


def _grpo_config(obj: dict | None) -> GrpoConfig:
    obj = obj or {}
    known = {"epsilon", "std_floor", "learning_rate"}
    unknown = set(obj) - known
    if unknown:
        raise ConfigError(f"unknown grpo config keys: {sorted(unknown)}")
    return GrpoConfig(**obj)


def _one_reward(pred: str, gt_text: str, step: int, cfg: RewardConfig) -> dict:
    return compute_reward(pred, parse_answer_text(gt_text), gt_text, step, cfg).to_obj()


def op_compute_reward(args: dict) -> dict:
    cfg = _reward_config(args.get("config"))
    return _one_reward(args["pred"], args["gt_text"], int(args["step"]), cfg)


def op_batch_rewards(args: dict) -> list[dict]:
    preds, gt_texts = args["preds"], args["gt_texts"]
    if len(preds) != len(gt_texts):
        raise ValueError(f"length mismatch: {len(preds)} predictions vs {len(gt_texts)} ground truths")
    cfg = _reward_config(args.get("config"))
    step = int(args["step"])
    return [_one_reward(p, g, step, cfg) for p, g in zip(preds, gt_texts)]


def op_parse_call_expression(args: dict) -> dict:
    return answer_set_to_obj(parse_call_expression(args["text"]))


def op_parse_json_calls(args: dict) -> dict:
    return answer_set_to_obj(parse_json_calls(args["text"], lenient=bool(args.get("lenient", False))))


def op_ast_equal(args: dict) -> bool:
    return ast_equal(answer_set_from_obj(args["a"]), answer_set_from_obj(args["b"]))


def op_compute_advantages(args: dict) -> list[float]:
    rewards = [float(r) for r in args["rewards"]]
    return compute_advantages(rewards, _grpo_config(args.get("config")))


_OPS = {
    "compute_reward": op_compute_reward,
    "batch_rewards": op_batch_rewards,
    "parse_call_expression": op_parse_call_expression,
    "parse_json_calls": op_parse_json_calls,
    "ast_equal": op_ast_equal,
    "compute_advantages": op_compute_advantages,
}


def handle(line: str) -> str:
    rid = None
    try:
        request = json.loads(line)
        rid = request.get("id")
        op = _OPS.get(request.get("op"))
        if op is None:
            raise ValueError(f"unknown operation {request.get('op')!r}")
        result = op(request.get("args") or {})
        return dump_json({"id": rid, "ok": True, "result": result})
    except _CORE_ERRORS as exc:
        return json.dumps(
            {"id": rid, "ok": False, "error": type(exc).__name__, "message": str(exc)}
        )


def main() -> None:
    for line in sys.stdin:
        if not line.strip():
            continue
        sys.stdout.write(handle(line) + "\n")
        sys.stdout.flush()


if __name__ == "__main__":
    main()
