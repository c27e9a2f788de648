"""Offline evaluation: AST-match accuracy, call/argument F1, toolset overlap.

Predictions are raw completions; a prediction only counts once its tagged
answer segment parses, the same rule the strict reward applies, so eval
matches and reward-base matches can never disagree.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from decimal import Decimal
from typing import Any, Iterable

from .calls import (
    AnswerSet,
    answer_set_from_obj,
    parse_answer_text,
    parse_structured_response,
    value_key,
)
from .rewards import strict_base

__all__ = [
    "EmptyToolset",
    "EvalRecord",
    "EvalReport",
    "evaluate",
    "overlap_matrix",
    "overlap_rate",
    "read_eval_records",
]


class EmptyToolset(ValueError):
    """Overlap over an empty tool inventory is undefined."""


@dataclass(frozen=True)
class EvalRecord:
    id: str
    prediction: str
    gt: AnswerSet


@dataclass
class EvalReport:
    ast_accuracy: float = 0.0
    function_f1: float = 0.0
    parameter_f1: float = 0.0
    per_sample: list[dict[str, Any]] = field(default_factory=list)

    def to_obj(self) -> dict[str, Any]:
        return {
            "ast_accuracy": self.ast_accuracy,
            "function_f1": self.function_f1,
            "parameter_f1": self.parameter_f1,
            "per_sample": self.per_sample,
        }

    def to_text(self) -> str:
        rows = [
            ("ast_accuracy", self.ast_accuracy),
            ("function_f1", self.function_f1),
            ("parameter_f1", self.parameter_f1),
            ("samples", len(self.per_sample)),
        ]
        width = max(len(k) for k, _ in rows)
        return "\n".join(
            f"{k:<{width}}  {v:.4f}" if isinstance(v, float) else f"{k:<{width}}  {v}"
            for k, v in rows
        )


def _multiset(items: Iterable[Any]) -> dict[Any, int]:
    counts: dict[Any, int] = {}
    for item in items:
        counts[item] = counts.get(item, 0) + 1
    return counts


def _intersection_size(a: dict[Any, int], b: dict[Any, int]) -> int:
    return sum(min(n, b.get(k, 0)) for k, n in a.items())


def _f1(matched: int, predicted: int, actual: int) -> float:
    if predicted == 0 or actual == 0 or matched == 0:
        return 0.0
    precision = matched / predicted
    recall = matched / actual
    return 2 * precision * recall / (precision + recall)


def evaluate(records: list[EvalRecord], param_f1_names_only: bool = False) -> EvalReport:
    """Score a run: exact-match accuracy plus micro-averaged F1 over call-name
    instances and over (call, argument, value) instances.

    Unparseable predictions contribute zero matched instances while the
    ground truth still counts in full.
    """
    report = EvalReport()
    fn_matched = fn_pred = fn_gt = 0
    pr_matched = pr_pred = pr_gt = 0
    matched_count = 0
    for record in records:
        pred = parse_structured_response(record.prediction)
        matched = strict_base(pred, record.gt)
        matched_count += matched
        pred_calls = pred.parsed.calls if pred.parsed is not None else ()
        gt_calls = record.gt.calls
        fn_a = _multiset(c.name for c in pred_calls)
        fn_b = _multiset(c.name for c in gt_calls)
        fn_matched += _intersection_size(fn_a, fn_b)
        fn_pred += len(pred_calls)
        fn_gt += len(gt_calls)

        def triples(calls: Iterable[Any]) -> dict[Any, int]:
            if param_f1_names_only:
                return _multiset((c.name, a) for c in calls for a in c.args)
            return _multiset(
                (c.name, a, value_key(v)) for c in calls for a, v in c.args.items()
            )

        pr_a, pr_b = triples(pred_calls), triples(gt_calls)
        pr_matched += _intersection_size(pr_a, pr_b)
        pr_pred += sum(pr_a.values())
        pr_gt += sum(pr_b.values())
        value_errors = 0
        if pred.parsed is not None and gt_calls:
            from .rewards import _count_value_errors

            value_errors = _count_value_errors(pred_calls, gt_calls)
        report.per_sample.append(
            {"id": record.id, "matched": bool(matched), "value_errors": value_errors}
        )
    n = len(records)
    report.ast_accuracy = matched_count / n if n else 0.0
    report.function_f1 = _f1(fn_matched, fn_pred, fn_gt)
    report.parameter_f1 = _f1(pr_matched, pr_pred, pr_gt)
    return report


def read_eval_records(lines: Iterable[str]) -> list[EvalRecord]:
    """Parse JSONL eval records: {"id", "prediction", "gt"} or {"id",
    "prediction", "gt_text"}."""
    records = []
    seen: set[str] = set()
    for line in lines:
        if not line.strip():
            continue
        obj = json.loads(line, parse_float=Decimal, parse_int=Decimal)
        rid = obj["id"]
        if rid in seen:
            raise ValueError(f"duplicate eval record id {rid!r}")
        seen.add(rid)
        gt = (
            answer_set_from_obj(obj["gt"])
            if obj.get("gt") is not None
            else parse_answer_text(obj["gt_text"])
        )
        records.append(EvalRecord(id=rid, prediction=obj["prediction"], gt=gt))
    return records


def overlap_rate(a: set[str], b: set[str]) -> float:
    """|A ∩ B| / min(|A|, |B|) * 100."""
    if not a or not b:
        raise EmptyToolset("overlap rate needs two non-empty toolsets")
    return len(a & b) / min(len(a), len(b)) * 100.0


def overlap_matrix(inventories: dict[str, set[str]]) -> list[list[float]]:
    """Pairwise overlap grid in the inventories' given order."""
    if len(inventories) < 2:
        raise ValueError("need at least two inventories")
    names = list(inventories)
    return [
        [overlap_rate(inventories[a], inventories[b]) for b in names] for a in names
    ]


def overlap_matrix_csv(inventories: dict[str, set[str]]) -> str:
    names = list(inventories)
    grid = overlap_matrix(inventories)
    lines = ["dataset," + ",".join(names)]
    for name, row in zip(names, grid):
        lines.append(name + "," + ",".join(f"{v:.1f}" for v in row))
    return "\n".join(lines) + "\n"
