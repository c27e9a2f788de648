"""Progressive rule-based reward for tool-calling completions.

The total reward is a format term plus a tool term. The tool term blends a
lenient token-overlap score (dense, exploration-friendly) with a strict
AST-match score (sparse, exact) through a sigmoid schedule over training
steps: early steps weight the overlap score, late steps the strict score.

The strict score adds a bonus for fully correct multi-call answers and
subtracts a penalty per argument whose value disagrees with the aligned
ground-truth call.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Any

from .calls import (
    AnswerSet,
    StructuredResponse,
    ToolCall,
    ast_equal,
    parse_structured_response,
    values_equal,
)

__all__ = [
    "DEFAULT_DELIMITERS",
    "ConfigError",
    "DegenerateGroundTruth",
    "RewardBreakdown",
    "RewardConfig",
    "compute_reward",
    "format_reward",
    "general_reward",
    "sigma",
    "strict_base",
    "strict_reward",
    "tokenize",
]

DEFAULT_DELIMITERS = frozenset("()[],.:'\"=")


class ConfigError(ValueError):
    """Bad reward configuration (unknown key or invalid value)."""


class DegenerateGroundTruth(ValueError):
    """Ground-truth text tokenizes to nothing; the overlap score is undefined."""


@dataclass(frozen=True)
class RewardConfig:
    """Knobs of the reward: schedule shape, signal magnitudes, tokenization."""

    kappa: float = 0.2
    midpoint: int = 25
    multi_tool_bonus: float = 0.3
    value_error_penalty: float = 0.3
    general_floor: float = -0.5
    strict_clamp_min: float = -1.0
    delimiters: frozenset[str] = DEFAULT_DELIMITERS
    format_weight: float = 1.0
    general_reward_scope: str = "answer"

    def __post_init__(self) -> None:
        if self.kappa <= 0:
            raise ConfigError("kappa must be positive")
        if self.midpoint < 0:
            raise ConfigError("midpoint must be non-negative")
        if self.multi_tool_bonus < 0 or self.value_error_penalty < 0:
            raise ConfigError("bonus/penalty magnitudes must be non-negative")
        if self.strict_clamp_min > 0:
            raise ConfigError("strict_clamp_min must be <= 0")
        if self.general_reward_scope not in ("answer", "full"):
            raise ConfigError("general_reward_scope must be 'answer' or 'full'")
        object.__setattr__(self, "delimiters", frozenset(self.delimiters))

    @classmethod
    def from_obj(cls, obj: dict[str, Any]) -> "RewardConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(obj) - known
        if unknown:
            raise ConfigError(f"unknown reward config keys: {sorted(unknown)}")
        kwargs = dict(obj)
        if "delimiters" in kwargs:
            if not isinstance(kwargs["delimiters"], str):
                raise ConfigError("delimiters must be a string of characters")
            kwargs["delimiters"] = frozenset(kwargs["delimiters"])
        if "midpoint" in kwargs:
            if kwargs["midpoint"] != int(kwargs["midpoint"]):
                raise ConfigError("midpoint must be an integer")
            kwargs["midpoint"] = int(kwargs["midpoint"])
        return cls(**kwargs)

    @classmethod
    def from_file(cls, path: str | Path) -> "RewardConfig":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        if not isinstance(data, dict):
            raise ConfigError("reward config file must hold a JSON object")
        return cls.from_obj(data)

    def to_obj(self) -> dict[str, Any]:
        out = {f.name: getattr(self, f.name) for f in fields(self)}
        out["delimiters"] = "".join(sorted(self.delimiters))
        return out


@dataclass(frozen=True)
class RewardBreakdown:
    """All reward components for one scored completion."""

    format: float
    general: float
    strict: float
    sigma: float
    tool: float
    final: float
    value_errors: int
    multi_tool_applied: bool

    def to_obj(self) -> dict[str, Any]:
        return {
            "format": self.format,
            "general": self.general,
            "strict": self.strict,
            "sigma": self.sigma,
            "tool": self.tool,
            "final": self.final,
            "value_errors": self.value_errors,
            "multi_tool_applied": self.multi_tool_applied,
        }


def tokenize(text: str, delimiters: frozenset[str] = DEFAULT_DELIMITERS) -> set[str]:
    """Split on delimiter characters and whitespace runs; returns the token set."""
    tokens: set[str] = set()
    start = -1
    for i, ch in enumerate(text):
        if ch in delimiters or ch.isspace():
            if start >= 0:
                tokens.add(text[start:i])
                start = -1
        elif start < 0:
            start = i
    if start >= 0:
        tokens.add(text[start:])
    return tokens


def general_reward(y: str, y_star: str, cfg: RewardConfig = RewardConfig()) -> float:
    """Token-overlap score: floor + |Y ∩ Y*| / |Y*|, in [floor, floor+1]."""
    gt_tokens = tokenize(y_star, cfg.delimiters)
    if not gt_tokens:
        raise DegenerateGroundTruth(f"ground truth {y_star!r} has no tokens")
    pred_tokens = tokenize(y, cfg.delimiters)
    inter = len(gt_tokens & pred_tokens)
    n = len(gt_tokens)
    # fused form keeps the worked ratios (e.g. 4/5 with floor -0.5) exact
    return (inter + cfg.general_floor * n) / n


def sigma(t: float, cfg: RewardConfig = RewardConfig()) -> float:
    """Schedule weight 1/(1+exp(-kappa*(t-m))): 0.5 at the midpoint, rising with t."""
    z = cfg.kappa * (t - cfg.midpoint)
    if z >= 0:
        e = math.exp(-z)
        # complement form stays strictly monotone in float64 near saturation
        return 1.0 - e / (1.0 + e)
    e = math.exp(z)
    return e / (1.0 + e)


def format_reward(pred: StructuredResponse) -> float:
    """1 when both think and answer segments validated, else 0."""
    return 1.0 if (pred.think is not None and pred.answer is not None) else 0.0


def _matching_arg_count(pred: ToolCall, gt: ToolCall) -> int:
    return sum(1 for a, v in pred.args.items() if a in gt.args and values_equal(v, gt.args[a]))


def _count_value_errors(pred_calls: tuple[ToolCall, ...], gt_calls: tuple[ToolCall, ...]) -> int:
    """Greedy name alignment of predicted calls onto ground-truth calls,
    ties broken by the number of exactly-matching arguments; counts arguments
    present on both sides of an aligned pair whose values differ."""
    unmatched = list(gt_calls)
    errors = 0
    for pc in pred_calls:
        candidates = [g for g in unmatched if g.name == pc.name]
        if not candidates:
            continue
        best = max(candidates, key=lambda g: _matching_arg_count(pc, g))
        unmatched.remove(best)
        errors += sum(
            1
            for a, v in pc.args.items()
            if a in best.args and not values_equal(v, best.args[a])
        )
    return errors


def strict_base(pred: StructuredResponse, gt: AnswerSet) -> bool:
    """Exact-match predicate shared by the strict reward and the eval harness."""
    if gt.kind == "direct":
        no_calls = pred.parsed is None or not pred.parsed.calls
        return no_calls and bool(pred.answer and pred.answer.strip())
    return pred.parsed is not None and ast_equal(pred.parsed, gt)


def strict_reward(
    pred: StructuredResponse, gt: AnswerSet, cfg: RewardConfig = RewardConfig()
) -> tuple[float, int, bool]:
    """AST-match score with the multi-call bonus and per-value-error penalty.

    Returns (score, value_errors, multi_tool_applied). An unparseable
    prediction scores the base 0 with zero value errors.
    """
    base = 1.0 if strict_base(pred, gt) else 0.0
    bonus_applies = base == 1.0 and len(gt.calls) >= 2
    bonus = cfg.multi_tool_bonus if bonus_applies else 0.0
    value_errors = 0
    if gt.kind == "calls" and pred.parsed is not None and pred.parsed.calls:
        value_errors = _count_value_errors(pred.parsed.calls, gt.calls)
    raw = base + bonus - cfg.value_error_penalty * value_errors
    clamped = min(max(raw, cfg.strict_clamp_min), 1.0 + cfg.multi_tool_bonus)
    return clamped, value_errors, bonus_applies


def compute_reward(
    pred_raw: str,
    gt: AnswerSet,
    gt_text: str,
    t: int,
    cfg: RewardConfig = RewardConfig(),
    sigma_override: float | None = None,
) -> RewardBreakdown:
    """Score one completion against its ground truth at training step t.

    The overlap score is computed on the answer segment when tags validate
    (or on the full completion, per ``general_reward_scope``); the strict
    score always requires validated tags. ``sigma_override`` pins the
    schedule weight, e.g. 1.0 for a strict-only comparison run.
    """
    pred = parse_structured_response(pred_raw)
    fmt = format_reward(pred)
    strict, value_errors, multi_tool_applied = strict_reward(pred, gt, cfg)
    if cfg.general_reward_scope == "answer" and pred.answer is not None:
        general_input = pred.answer
    else:
        general_input = pred_raw
    general = general_reward(general_input, gt_text, cfg)
    s = sigma(t, cfg) if sigma_override is None else sigma_override
    tool = s * strict + (1.0 - s) * general
    final = cfg.format_weight * fmt + tool
    return RewardBreakdown(
        format=fmt,
        general=general,
        strict=strict,
        sigma=s,
        tool=tool,
        final=final,
        value_errors=value_errors,
        multi_tool_applied=multi_tool_applied,
    )


def with_schedule(cfg: RewardConfig, midpoint: int, kappa: float) -> RewardConfig:
    return replace(cfg, midpoint=midpoint, kappa=kappa)
