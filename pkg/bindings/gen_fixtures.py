"""Generate the committed parity corpus: expected outputs straight from the core.

Run from the repo root with the core installed:
    python bindings/gen_fixtures.py
"""

from __future__ import annotations

import json
import random
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "tests"))

from gen import print_variant, rand_answer, wrap_tags  # noqa: E402

from tooltrain.calls import (  # noqa: E402
    ParseError,
    answer_set_to_obj,
    dump_json,
    parse_answer_text,
    parse_call_expression,
    parse_json_calls,
    print_call_expression,
)
from tooltrain.grpo import compute_advantages  # noqa: E402
from tooltrain.rewards import RewardConfig, compute_reward  # noqa: E402

OUT = Path(__file__).parent / "fixtures" / "parity_cases.jsonl"

CONFIG_VARIANTS = [
    {},
    {"kappa": 1.0, "midpoint": 50},
    {"multi_tool_bonus": 0.5, "value_error_penalty": 0.1},
    {"general_reward_scope": "full", "format_weight": 2.0},
]


def reward_cases(rng: random.Random, n: int) -> list[dict]:
    cases = []
    for i in range(n):
        gt = rand_answer(rng)
        gt_text = print_call_expression(gt)
        roll = rng.random()
        if roll < 0.4:
            source = gt if rng.random() < 0.5 else rand_answer(rng)
            pred = wrap_tags(print_variant(source, rng, permute_args=True))
        elif roll < 0.6:
            pred = wrap_tags("garbled " + " ".join(rng.choices("abc[](),=", k=6)))
        elif roll < 0.8:
            pred = print_call_expression(gt)  # untagged
        else:
            pred = ""
        config = rng.choice(CONFIG_VARIANTS)
        step = rng.randint(0, 200)
        expect = compute_reward(
            pred, parse_answer_text(gt_text), gt_text, step, RewardConfig.from_obj(config)
        ).to_obj()
        cases.append(
            {
                "op": "compute_reward",
                "args": {"pred": pred, "gt_text": gt_text, "step": step, "config": config},
                "expect": expect,
            }
        )
    return cases


def parse_cases(rng: random.Random, n: int) -> list[dict]:
    cases = []
    for _ in range(n):
        answer = rand_answer(rng, min_calls=0)
        text = print_variant(answer, rng, spaces=rng.random() < 0.4,
                             single_quotes=rng.random() < 0.3)
        cases.append(
            {
                "op": "parse_call_expression",
                "args": {"text": text},
                "expect": answer_set_to_obj(parse_call_expression(text)),
            }
        )
    for text in ("[f(a=", "not a call", "[f(a=1) extra]", ""):
        cases.append(
            {"op": "parse_call_expression", "args": {"text": text}, "expect_error": "ParseError"}
        )
    return cases


def json_cases(rng: random.Random, n: int) -> list[dict]:
    cases = []
    for _ in range(n):
        answer = rand_answer(rng)
        payload = [
            {"name": c.name, "arguments": json.loads(dump_json(dict(c.args)))}
            for c in answer.calls
        ]
        text = json.dumps(payload[0] if len(payload) == 1 and rng.random() < 0.5 else payload)
        cases.append(
            {
                "op": "parse_json_calls",
                "args": {"text": text, "lenient": False},
                "expect": answer_set_to_obj(parse_json_calls(text)),
            }
        )
    cases.append(
        {
            "op": "parse_json_calls",
            "args": {"text": '{"name": "f"}', "lenient": True},
            "expect": answer_set_to_obj(parse_json_calls('{"name": "f"}', lenient=True)),
        }
    )
    cases.append(
        {
            "op": "parse_json_calls",
            "args": {"text": '{"name": "f"}', "lenient": False},
            "expect_error": "ParseError",
        }
    )
    return cases


def ast_cases(rng: random.Random, n: int) -> list[dict]:
    from tooltrain.calls import ast_equal, answer_set_from_obj

    cases = []
    for _ in range(n):
        a = rand_answer(rng, min_calls=0)
        if rng.random() < 0.5:
            b = parse_call_expression(print_variant(a, rng, permute_args=True, permute_calls=True))
        else:
            b = rand_answer(rng, min_calls=0)
        a_obj = json.loads(dump_json(answer_set_to_obj(a)))
        b_obj = json.loads(dump_json(answer_set_to_obj(b)))
        cases.append(
            {
                "op": "ast_equal",
                "args": {"a": a_obj, "b": b_obj},
                "expect": ast_equal(answer_set_from_obj(a_obj), answer_set_from_obj(b_obj)),
            }
        )
    cases.append(
        {
            "op": "ast_equal",
            "args": {
                "a": {"calls": [{"name": "f", "args": {"x": 2}}]},
                "b": {"calls": [{"name": "f", "args": {"x": 2.0}}]},
            },
            "expect": True,
        }
    )
    return cases


def advantage_cases(rng: random.Random, n: int) -> list[dict]:
    cases = []
    for _ in range(n):
        rewards = [round(rng.uniform(-3, 3), 6) for _ in range(rng.randint(2, 12))]
        cases.append(
            {
                "op": "compute_advantages",
                "args": {"rewards": rewards, "config": {}},
                "expect": compute_advantages(rewards),
            }
        )
    cases.append(
        {
            "op": "compute_advantages",
            "args": {"rewards": [1.0], "config": {}},
            "expect_error": "GroupTooSmall",
        }
    )
    return cases


def main() -> None:
    rng = random.Random(424242)
    cases = (
        reward_cases(rng, 120)
        + parse_cases(rng, 30)
        + json_cases(rng, 20)
        + ast_cases(rng, 25)
        + advantage_cases(rng, 20)
    )
    OUT.parent.mkdir(parents=True, exist_ok=True)
    OUT.write_text("".join(dump_json(c) + "\n" for c in cases), encoding="utf-8")
    print(f"wrote {len(cases)} cases to {OUT}")


if __name__ == "__main__":
    main()
