"""Group-relative policy optimization: advantages, ratios, clipped objective.

Rewards are normalized within each group of completions sampled for one
prompt ((r - mean) / population std), which replaces a learned value
baseline. The surrogate objective is the token-mean clipped ratio-weighted
advantage, with no KL regularization term.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np

if TYPE_CHECKING:
    from .sim import PolicyTable

__all__ = [
    "Completion",
    "GroupTooSmall",
    "GrpoConfig",
    "MissingAdvantages",
    "RolloutGroup",
    "compute_advantages",
    "grpo_gradient_tabular",
    "grpo_objective",
    "importance_ratios",
    "objective_from_policy",
]


class GroupTooSmall(ValueError):
    """Advantage normalization needs at least two rewards."""


class MissingAdvantages(ValueError):
    """Objective/gradient called on a group without populated advantages."""


@dataclass(frozen=True)
class GrpoConfig:
    epsilon: float = 0.2
    std_floor: float = 1e-8
    learning_rate: float = 8.0

    def __post_init__(self) -> None:
        if not 0.0 < self.epsilon < 1.0:
            raise ValueError("epsilon must lie in (0, 1)")


@dataclass
class Completion:
    """One sampled sequence with per-token log-likelihoods and its reward."""

    tokens: list[int]
    old_logprobs: list[float]
    new_logprobs: list[float]
    reward: float = 0.0

    def __post_init__(self) -> None:
        if not (len(self.tokens) == len(self.old_logprobs) == len(self.new_logprobs) >= 1):
            raise ValueError("tokens/old_logprobs/new_logprobs must have equal nonzero length")


@dataclass
class RolloutGroup:
    """All completions sampled for one prompt, plus their advantages."""

    prompt_id: str
    completions: list[Completion]
    advantages: list[float] | None = field(default=None)

    def __post_init__(self) -> None:
        if not self.completions:
            raise ValueError("a rollout group needs at least one completion")


def compute_advantages(rewards: list[float], cfg: GrpoConfig = GrpoConfig()) -> list[float]:
    """(r - mean) / population std per reward; all zeros when std < std_floor."""
    if len(rewards) < 2:
        raise GroupTooSmall(f"need >= 2 rewards, got {len(rewards)}")
    mean = sum(rewards) / len(rewards)
    var = sum((r - mean) ** 2 for r in rewards) / len(rewards)
    std = math.sqrt(var)
    if std < cfg.std_floor:
        return [0.0] * len(rewards)
    return [(r - mean) / std for r in rewards]


def importance_ratios(c: Completion) -> list[float]:
    """exp(new - old) per token."""
    return [math.exp(n - o) for n, o in zip(c.new_logprobs, c.old_logprobs)]


def _clipped_token_term(ratio: float, advantage: float, epsilon: float) -> float:
    clipped = min(max(ratio, 1.0 - epsilon), 1.0 + epsilon)
    return min(ratio * advantage, clipped * advantage)


def grpo_objective(groups: list[RolloutGroup], cfg: GrpoConfig = GrpoConfig()) -> float:
    """Mean over groups of (1/G) sum_i (1/|o_i|) sum_t min(rho*A, clip(rho)*A)."""
    if not groups:
        return 0.0
    total = 0.0
    for group in groups:
        if group.advantages is None:
            raise MissingAdvantages(f"group {group.prompt_id!r} has no advantages")
        g_total = 0.0
        for completion, adv in zip(group.completions, group.advantages):
            ratios = importance_ratios(completion)
            g_total += sum(_clipped_token_term(r, adv, cfg.epsilon) for r in ratios) / len(ratios)
        total += g_total / len(group.completions)
    return total / len(groups)


def _completion_states(prompt_id: str, tokens: list[int]) -> list[tuple[str, int, int]]:
    prev = -1
    states = []
    for pos, tok in enumerate(tokens):
        states.append((prompt_id, pos, prev))
        prev = tok
    return states


def objective_from_policy(
    groups: list[RolloutGroup], policy: "PolicyTable", cfg: GrpoConfig = GrpoConfig()
) -> float:
    """Objective with new log-likelihoods recomputed from the live policy.

    This is the function of the policy logits whose exact gradient
    grpo_gradient_tabular returns; the stored old_logprobs stay fixed.
    """
    if not groups:
        return 0.0
    total = 0.0
    for group in groups:
        if group.advantages is None:
            raise MissingAdvantages(f"group {group.prompt_id!r} has no advantages")
        g_total = 0.0
        for completion, adv in zip(group.completions, group.advantages):
            states = _completion_states(group.prompt_id, completion.tokens)
            c_total = 0.0
            for state, token, old in zip(states, completion.tokens, completion.old_logprobs):
                new = policy.log_probs(state)[token]
                ratio = math.exp(new - old)
                c_total += _clipped_token_term(ratio, adv, cfg.epsilon)
            g_total += c_total / len(completion.tokens)
        total += g_total / len(group.completions)
    return total / len(groups)


def grpo_gradient_tabular(
    groups: list[RolloutGroup], policy: "PolicyTable", cfg: GrpoConfig = GrpoConfig()
) -> dict[tuple[str, int, int], np.ndarray]:
    """Exact gradient of objective_from_policy w.r.t. the tabular logits.

    Per token the surrogate derivative w.r.t. the ratio is the advantage,
    except when the min selects the clipped branch with the ratio outside the
    clip range, where it is zero. Composed with d rho / d logits =
    rho * (onehot - softmax), accumulated per state.
    """
    grad: dict[tuple[str, int, int], np.ndarray] = {}
    if not groups:
        return grad
    group_weight = 1.0 / len(groups)
    for group in groups:
        if group.advantages is None:
            raise MissingAdvantages(f"group {group.prompt_id!r} has no advantages")
        comp_weight = group_weight / len(group.completions)
        for completion, adv in zip(group.completions, group.advantages):
            if adv == 0.0:
                continue
            token_weight = comp_weight / len(completion.tokens)
            states = _completion_states(group.prompt_id, completion.tokens)
            for state, token, old in zip(states, completion.tokens, completion.old_logprobs):
                log_probs = policy.log_probs(state)
                ratio = math.exp(log_probs[token] - old)
                clipped_dead = (adv > 0 and ratio > 1.0 + cfg.epsilon) or (
                    adv < 0 and ratio < 1.0 - cfg.epsilon
                )
                if clipped_dead:
                    continue
                coeff = token_weight * adv * ratio
                probs = np.exp(log_probs)
                vec = grad.get(state)
                if vec is None:
                    vec = np.zeros(policy.vocab_size)
                    grad[state] = vec
                vec -= coeff * probs
                vec[token] += coeff
    return grad
