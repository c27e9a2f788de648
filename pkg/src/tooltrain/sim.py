"""Desk-scale training loop over a tabular autoregressive softmax policy.

A tiny stand-in for LLM fine-tuning: per prompt, the policy emits token
sequences that detokenize into call expressions, gets scored by the
progressive reward at the current step, and is updated with group-relative
clipped-surrogate ascent. Logits are conditioned on (prompt, position,
previous token) only, so the model is first-order but still exercises
token-level ratios and clipping.

Sampling uses the configured temperature while recorded log-likelihoods are
temperature-1 values of the sampling-time policy, mirroring the usual
practice of optimizing the untempered policy.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Any, Iterable

import numpy as np

from .calls import AnswerSet, ToolSchema, parse_answer_text, parse_structured_response
from .grpo import Completion, GrpoConfig, RolloutGroup, compute_advantages, grpo_gradient_tabular
from .rewards import RewardConfig, compute_reward, sigma, strict_base

__all__ = [
    "AblationReport",
    "END_TOKEN",
    "PolicyTable",
    "SimConfig",
    "ToyPrompt",
    "ToyTask",
    "TrainingLog",
    "default_task",
    "one_hot_policy",
    "rollout",
    "schedule_ablation",
    "sparse_task",
    "tokenize_with_vocab",
    "train",
]

END_TOKEN = "<end>"

State = tuple[str, int, int]


@dataclass(frozen=True)
class ToyPrompt:
    id: str
    schemas: tuple[ToolSchema, ...]
    gt: AnswerSet
    gt_text: str


@dataclass(frozen=True)
class ToyTask:
    """A handful of prompts plus the shared token inventory.

    When max_len is unset it is derived from the longest ground-truth token
    chain plus room for an end token; a fixed max_len equal to the chain
    length makes episodes terminate positionally instead.
    """

    prompts: tuple[ToyPrompt, ...]
    vocabulary: tuple[str, ...]
    max_len: int | None = None

    def __post_init__(self) -> None:
        if len(self.vocabulary) > 64 or len(self.prompts) > 32:
            raise ValueError("desk scale: vocabulary <= 64 tokens, prompts <= 32")
        if END_TOKEN not in self.vocabulary:
            raise ValueError(f"vocabulary must contain {END_TOKEN}")
        for p in self.prompts:
            tokenize_with_vocab(p.gt_text, self.vocabulary)  # raises if not serializable

    def to_obj(self) -> dict[str, Any]:
        from .calls import schema_to_obj

        return {
            "prompts": [
                {"id": p.id, "schemas": [schema_to_obj(s) for s in p.schemas], "gt_text": p.gt_text}
                for p in self.prompts
            ],
            "vocabulary": list(self.vocabulary),
            "max_len": self.max_len,
        }

    @classmethod
    def from_obj(cls, obj: dict[str, Any]) -> "ToyTask":
        from .calls import schema_from_obj

        prompts = tuple(
            ToyPrompt(
                id=p["id"],
                schemas=tuple(schema_from_obj(s) for s in p.get("schemas", [])),
                gt=parse_answer_text(p["gt_text"]),
                gt_text=p["gt_text"],
            )
            for p in obj["prompts"]
        )
        return cls(
            prompts=prompts,
            vocabulary=tuple(obj["vocabulary"]),
            max_len=obj.get("max_len"),
        )


def tokenize_with_vocab(text: str, vocabulary: Iterable[str]) -> list[int]:
    """Greedy longest-match segmentation of text into vocabulary tokens."""
    vocab = [t for t in vocabulary if t != END_TOKEN]
    order = sorted(range(len(vocab)), key=lambda i: -len(vocab[i]))
    index = {t: i for i, t in enumerate(vocabulary)}
    out: list[int] = []
    pos = 0
    while pos < len(text):
        for i in order:
            tok = vocab[i]
            if text.startswith(tok, pos):
                out.append(index[tok])
                pos += len(tok)
                break
        else:
            raise ValueError(f"vocabulary cannot serialize {text!r} at offset {pos}")
    return out


class PolicyTable:
    """Tabular softmax policy: logits per (prompt, position, previous-token) state."""

    def __init__(self, vocabulary: Iterable[str], max_len: int):
        self.vocabulary = tuple(vocabulary)
        self.vocab_size = len(self.vocabulary)
        self.max_len = max_len
        self.end_id = self.vocabulary.index(END_TOKEN) if END_TOKEN in self.vocabulary else -1
        self.logits: dict[State, np.ndarray] = {}

    def logits_for(self, state: State) -> np.ndarray:
        vec = self.logits.get(state)
        if vec is None:
            vec = np.zeros(self.vocab_size)
            self.logits[state] = vec
        return vec

    def log_probs(self, state: State, temperature: float = 1.0) -> np.ndarray:
        z = self.logits_for(state) / temperature
        z = z - z.max()
        return z - np.log(np.exp(z).sum())

    def probs(self, state: State, temperature: float = 1.0) -> np.ndarray:
        return np.exp(self.log_probs(state, temperature))

    def entropy(self, state: State) -> float:
        lp = self.log_probs(state)
        return float(-(np.exp(lp) * lp).sum())

    def apply_gradient(self, grad: dict[State, np.ndarray], learning_rate: float) -> None:
        for state, vec in grad.items():
            self.logits[state] = self.logits_for(state) + learning_rate * vec

    def detokenize(self, tokens: Iterable[int]) -> str:
        return "".join(self.vocabulary[t] for t in tokens if t != self.end_id)


@dataclass(frozen=True)
class SimConfig:
    group_size: int = 8
    temperature: float = 0.8
    steps: int = 300
    inner_updates: int = 2
    seed: int = 0
    reward: RewardConfig = field(default_factory=RewardConfig)
    grpo: GrpoConfig = field(default_factory=GrpoConfig)
    emit_tags_as_tokens: bool = False
    strict_only: bool = False

    def __post_init__(self) -> None:
        if self.group_size < 2:
            raise ValueError("group_size must be >= 2")
        if self.temperature <= 0:
            raise ValueError("temperature must be positive")


@dataclass
class TrainingLog:
    records: list[dict[str, Any]] = field(default_factory=list)

    def to_jsonl(self) -> str:
        return "".join(json.dumps(rec) + "\n" for rec in self.records)

    @classmethod
    def from_jsonl(cls, text: str) -> "TrainingLog":
        return cls(records=[json.loads(line) for line in text.splitlines() if line.strip()])


@dataclass
class AblationReport:
    rows: list[dict[str, Any]] = field(default_factory=list)

    def to_csv(self) -> str:
        lines = ["midpoint,kappa,final_exact_match,auc_reward"]
        for r in self.rows:
            lines.append(
                f"{r['midpoint']},{r['kappa']},{r['final_exact_match']},{r['auc_reward']}"
            )
        return "\n".join(lines) + "\n"


def rollout(
    policy: PolicyTable,
    prompt: ToyPrompt,
    group_size: int,
    temperature: float,
    rng: np.random.Generator,
) -> RolloutGroup:
    """Sample a group of token sequences for one prompt.

    Sampling divides logits by the temperature before the softmax; recorded
    log-likelihoods are temperature-1 values of the same policy. Sequences
    stop at the end token or max_len.
    """
    completions = []
    for _ in range(group_size):
        tokens: list[int] = []
        logprobs: list[float] = []
        prev = -1
        for pos in range(policy.max_len):
            state = (prompt.id, pos, prev)
            p_sample = policy.probs(state, temperature)
            token = int(rng.choice(policy.vocab_size, p=p_sample))
            tokens.append(token)
            logprobs.append(float(policy.log_probs(state)[token]))
            if token == policy.end_id:
                break
            prev = token
        completions.append(
            Completion(tokens=tokens, old_logprobs=logprobs, new_logprobs=list(logprobs))
        )
    return RolloutGroup(prompt_id=prompt.id, completions=completions)


def completion_text(policy: PolicyTable, tokens: Iterable[int], emit_tags_as_tokens: bool) -> str:
    body = policy.detokenize(tokens)
    if emit_tags_as_tokens:
        return body
    return f"<think></think><answer>{body}</answer>"


def _visited_states(groups: Iterable[RolloutGroup]) -> list[State]:
    states: set[State] = set()
    for group in groups:
        for completion in group.completions:
            prev = -1
            for pos, tok in enumerate(completion.tokens):
                states.add((group.prompt_id, pos, prev))
                prev = tok
    return sorted(states)


def _required_max_len(task: ToyTask) -> int:
    if task.max_len is not None:
        return task.max_len
    longest = max(len(tokenize_with_vocab(p.gt_text, task.vocabulary)) for p in task.prompts)
    return longest + 2  # room for the end token plus one overshoot position


def train(task: ToyTask, cfg: SimConfig = SimConfig()) -> TrainingLog:
    """Run the full loop and log per-step telemetry.

    Per step: roll out every prompt, score completions at the current step,
    normalize rewards within each group, then apply inner_updates
    gradient-ascent steps on the tabular logits.
    """
    policy = PolicyTable(task.vocabulary, max_len=_required_max_len(task))
    log = TrainingLog()
    for t in range(cfg.steps):
        groups: list[RolloutGroup] = []
        rewards: list[float] = []
        matches: list[bool] = []
        for pidx, prompt in enumerate(task.prompts):
            rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(t, pidx)))
            group = rollout(policy, prompt, cfg.group_size, cfg.temperature, rng)
            for completion in group.completions:
                text = completion_text(policy, completion.tokens, cfg.emit_tags_as_tokens)
                breakdown = compute_reward(
                    text,
                    prompt.gt,
                    prompt.gt_text,
                    t,
                    cfg.reward,
                    sigma_override=1.0 if cfg.strict_only else None,
                )
                completion.reward = breakdown.final
                rewards.append(breakdown.final)
                matches.append(strict_base(parse_structured_response(text), prompt.gt))
            group.advantages = compute_advantages(
                [c.reward for c in group.completions], cfg.grpo
            )
            groups.append(group)
        visited = _visited_states(groups)
        entropy = sum(policy.entropy(s) for s in visited) / len(visited) if visited else 0.0
        sigma_t = 1.0 if cfg.strict_only else sigma(t, cfg.reward)
        for _ in range(cfg.inner_updates):
            grad = grpo_gradient_tabular(groups, policy, cfg.grpo)
            policy.apply_gradient(grad, cfg.grpo.learning_rate)
        log.records.append(
            {
                "step": t,
                "mean_reward": sum(rewards) / len(rewards),
                "exact_match_rate": sum(matches) / len(matches),
                "sigma": sigma_t,
                "policy_entropy": entropy,
            }
        )
    return log


def schedule_ablation(
    task: ToyTask,
    midpoints: list[int],
    kappas: list[float],
    cfg: SimConfig = SimConfig(),
) -> AblationReport:
    """Grid over (midpoint, kappa) with shared seeds; reports final exact-match
    rate and the trapezoidal area under the mean-reward curve."""
    report = AblationReport()
    for m in midpoints:
        for k in kappas:
            run_cfg = replace(cfg, reward=replace(cfg.reward, midpoint=m, kappa=k))
            log = train(task, run_cfg)
            curve = [rec["mean_reward"] for rec in log.records]
            auc = sum((a + b) / 2.0 for a, b in zip(curve, curve[1:]))
            final = log.records[-1]["exact_match_rate"] if log.records else 0.0
            report.rows.append(
                {
                    "midpoint": m,
                    "kappa": k,
                    "final_exact_match": final,
                    "auc_reward": auc,
                }
            )
    return report


def one_hot_policy(task: ToyTask, scale: float = 14.0) -> PolicyTable:
    """Policy whose logits put nearly all mass on each prompt's exact answer chain."""
    policy = PolicyTable(task.vocabulary, max_len=_required_max_len(task))
    for prompt in task.prompts:
        chain = tokenize_with_vocab(prompt.gt_text, task.vocabulary)
        if len(chain) < policy.max_len:
            chain = chain + [policy.end_id]
        prev = -1
        for pos, tok in enumerate(chain):
            vec = policy.logits_for((prompt.id, pos, prev))
            vec[tok] = scale
            prev = tok
    return policy


# ---------------------------------------------------------------------------
# bundled tasks
# ---------------------------------------------------------------------------


def _schema(name: str, **params: str) -> ToolSchema:
    from .calls import ParamSpec

    return ToolSchema(
        name=name,
        description=f"toy tool {name}",
        parameters={p: ParamSpec(type_tag=t, required=True) for p, t in params.items()},
    )


def default_task() -> ToyTask:
    """Four three-token prompts, one of them a two-call answer.

    Episodes are exactly three tokens long (fixed max_len), and wrong-value
    tokens sit in the vocabulary so near-miss calls parse and get the
    per-value-error penalty.
    """
    prompts = (
        ToyPrompt(
            id="weather",
            schemas=(_schema("get_weather", city="string"),),
            gt=parse_answer_text('[get_weather(city="Paris")]'),
            gt_text='[get_weather(city="Paris")]',
        ),
        ToyPrompt(
            id="time",
            schemas=(_schema("get_time", zone="string"),),
            gt=parse_answer_text('[get_time(zone="UTC")]'),
            gt_text='[get_time(zone="UTC")]',
        ),
        ToyPrompt(
            id="guard",
            schemas=(_schema("lock_door"), _schema("start_alarm", level="integer")),
            gt=parse_answer_text("[lock_door(), start_alarm(level=3)]"),
            gt_text="[lock_door(), start_alarm(level=3)]",
        ),
        ToyPrompt(
            id="search",
            schemas=(_schema("search", query="string"),),
            gt=parse_answer_text('[search(query="cats")]'),
            gt_text='[search(query="cats")]',
        ),
    )
    vocabulary = (
        "[get_weather(city=",
        "[get_time(zone=",
        "[search(query=",
        "[lock_door(), start_alarm(level=",
        '"Paris"',
        '"London"',
        '"UTC"',
        '"PST"',
        '"cats"',
        '"dogs"',
        "3",
        "4",
        ")]",
        END_TOKEN,
    )
    return ToyTask(prompts=prompts, vocabulary=vocabulary, max_len=3)


def sparse_task() -> ToyTask:
    """Single-call answers eight tokens long, so chance exact matches are
    near-impossible and only the dense overlap signal can start learning.

    Argument tokens come as whole name=value pairs (with wrong-value twins);
    call-order freedom of the AST match makes every pair permutation after
    the opening token an exact answer.
    """
    prompts = (
        ToyPrompt(
            id="trip",
            schemas=(
                _schema(
                    "plan_trip",
                    city="string",
                    day="string",
                    seats="integer",
                    bags="integer",
                    fast="boolean",
                    hotel="string",
                ),
            ),
            gt=parse_answer_text(
                '[plan_trip(city="rome", day="fri", seats=2, bags=1, fast=True, hotel="ada")]'
            ),
            gt_text='[plan_trip(city="rome", day="fri", seats=2, bags=1, fast=True, hotel="ada")]',
        ),
    )
    vocabulary = (
        "[plan_trip(",
        'city="rome"',
        'city="oslo"',
        ', day="fri"',
        ', day="mon"',
        ", seats=2",
        ", seats=5",
        ", bags=1",
        ", bags=4",
        ", fast=True",
        ", fast=False",
        ', hotel="ada"',
        ', hotel="bee"',
        ")]",
        END_TOKEN,
    )
    return ToyTask(prompts=prompts, vocabulary=vocabulary, max_len=8)


def load_task(spec: str) -> ToyTask:
    """Resolve a --task argument: a bundled name or a JSON file path."""
    from pathlib import Path

    if spec == "default":
        return default_task()
    if spec == "sparse":
        return sparse_task()
    path = Path(spec)
    return ToyTask.from_obj(json.loads(path.read_text(encoding="utf-8")))
