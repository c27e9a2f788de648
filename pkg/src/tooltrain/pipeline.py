"""Corpus preparation: validity filtering, name masking, multi-turn
augmentation, and stage statistics.

Records live in JSONL, one sample per line:

    {"id": ..., "schemas": [...], "turns": [{"role", "content", ...}],
     "gt": {"calls": [...]} | {"direct_response": ...}, "gt_text": ...,
     "source": "toolace" | "xlam" | "synthetic", "multi_turn": bool}

Augmented samples additionally carry a "provenance" object naming the
strategy, parent ids, and seed.
"""

from __future__ import annotations

import json
import random
import re
from dataclasses import dataclass, field, replace
from decimal import Decimal
from typing import Any, Iterable

from .calls import (
    AnswerSet,
    ParseError,
    SchemaError,
    ToolCall,
    ToolSchema,
    answer_set_from_obj,
    answer_set_to_obj,
    dump_json,
    parse_answer_text,
    print_call_expression,
    print_value,
    schema_from_obj,
    schema_to_obj,
)

__all__ = [
    "AugmentReport",
    "FilterReport",
    "MaskCollision",
    "MaskMapping",
    "Sample",
    "StatsTable",
    "StrategyInapplicable",
    "Turn",
    "apply_mask_to_answer",
    "augment_multi_turn",
    "corpus_stats",
    "filter_corpus",
    "mask_sample",
    "read_samples",
    "sample_from_obj",
    "sample_to_obj",
    "unmask_sample",
    "write_samples",
]

STRATEGIES = ("combine", "tool_removal", "param_clarification", "result_validation")

_FUNC_MASK_RE = re.compile(r"func_\d+")
_PARAM_MASK_RE = re.compile(r"param_\d+")


class MaskCollision(ValueError):
    """A source name already looks like a mask name; masking would be ambiguous."""


class StrategyInapplicable(ValueError):
    """The augmentation strategy's preconditions fail for this sample."""


@dataclass(frozen=True)
class Turn:
    role: str
    content: str = ""
    calls: AnswerSet | None = None
    observation: str | None = None

    def __post_init__(self) -> None:
        if self.role not in ("user", "assistant", "tool"):
            raise ValueError(f"bad turn role {self.role!r}")
        if self.role == "tool" and self.observation is None:
            raise ValueError("tool turns need an observation")


@dataclass(frozen=True)
class Sample:
    id: str
    schemas: tuple[ToolSchema, ...]
    turns: tuple[Turn, ...]
    gt: AnswerSet
    gt_text: str
    source: str = "synthetic"
    multi_turn: bool = False
    provenance: dict[str, Any] | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "schemas", tuple(self.schemas))
        object.__setattr__(self, "turns", tuple(self.turns))
        if self.source not in ("toolace", "xlam", "synthetic"):
            raise ValueError(f"bad source {self.source!r}")
        if not any(t.role == "user" for t in self.turns):
            raise ValueError("a sample needs at least one user turn")


@dataclass(frozen=True)
class MaskMapping:
    """func_k / param_j renames; parameters are keyed per function."""

    functions: dict[str, str]
    parameters: dict[tuple[str, str], str]

    def inverted(self) -> "MaskMapping":
        inv_fn = {v: k for k, v in self.functions.items()}
        inv_pr = {
            (self.functions[f], masked): orig for (f, orig), masked in self.parameters.items()
        }
        return MaskMapping(functions=inv_fn, parameters=inv_pr)


@dataclass
class FilterReport:
    input: int = 0
    kept: int = 0
    dropped_bad_call: int = 0
    dropped_bad_schema: int = 0

    def to_obj(self) -> dict[str, int]:
        return {
            "input": self.input,
            "kept": self.kept,
            "dropped_bad_call": self.dropped_bad_call,
            "dropped_bad_schema": self.dropped_bad_schema,
        }

    def to_text(self) -> str:
        rows = [("input", self.input), ("kept", self.kept),
                ("dropped_bad_call", self.dropped_bad_call),
                ("dropped_bad_schema", self.dropped_bad_schema)]
        width = max(len(k) for k, _ in rows)
        return "\n".join(f"{k:<{width}}  {v}" for k, v in rows)


@dataclass
class AugmentReport:
    strategy: str
    produced: int = 0
    skipped: int = 0

    def to_obj(self) -> dict[str, Any]:
        return {"strategy": self.strategy, "produced": self.produced, "skipped": self.skipped}


# ---------------------------------------------------------------------------
# JSONL (de)serialization
# ---------------------------------------------------------------------------


def _turn_to_obj(turn: Turn) -> dict[str, Any]:
    obj: dict[str, Any] = {"role": turn.role, "content": turn.content}
    if turn.calls is not None:
        obj["calls"] = answer_set_to_obj(turn.calls)
    if turn.observation is not None:
        obj["observation"] = turn.observation
    return obj


def _turn_from_obj(obj: Any) -> Turn:
    if not isinstance(obj, dict):
        raise ValueError("turn must be an object")
    calls = answer_set_from_obj(obj["calls"]) if obj.get("calls") is not None else None
    return Turn(
        role=obj.get("role", ""),
        content=obj.get("content", ""),
        calls=calls,
        observation=obj.get("observation"),
    )


def sample_to_obj(sample: Sample) -> dict[str, Any]:
    obj: dict[str, Any] = {
        "id": sample.id,
        "schemas": [schema_to_obj(s) for s in sample.schemas],
        "turns": [_turn_to_obj(t) for t in sample.turns],
        "gt": answer_set_to_obj(sample.gt),
        "gt_text": sample.gt_text,
        "source": sample.source,
        "multi_turn": sample.multi_turn,
    }
    if sample.provenance is not None:
        obj["provenance"] = sample.provenance
    return obj


def sample_from_obj(obj: Any) -> Sample:
    if not isinstance(obj, dict):
        raise ValueError("sample must be an object")
    if not isinstance(obj.get("id"), str):
        raise ValueError("sample needs a string id")
    if not isinstance(obj.get("gt_text"), str):
        raise ValueError("sample needs a gt_text string")
    schemas = tuple(schema_from_obj(s) for s in obj.get("schemas", []))
    turns = tuple(_turn_from_obj(t) for t in obj.get("turns", []))
    if obj.get("gt") is not None:
        gt = answer_set_from_obj(obj["gt"])
        if gt.kind == "calls":
            parse_answer_text(obj["gt_text"])  # the declared text must itself parse
    else:
        gt = parse_answer_text(obj["gt_text"])
    return Sample(
        id=obj["id"],
        schemas=schemas,
        turns=turns,
        gt=gt,
        gt_text=obj["gt_text"],
        source=obj.get("source", "synthetic"),
        multi_turn=bool(obj.get("multi_turn", False)),
        provenance=obj.get("provenance"),
    )


def _loads_record(line: str) -> Any:
    return json.loads(line, parse_float=Decimal, parse_int=Decimal)


def read_samples(lines: Iterable[str]) -> list[Sample]:
    return [sample_from_obj(_loads_record(ln)) for ln in lines if ln.strip()]


def write_samples(samples: Iterable[Sample]) -> str:
    return "".join(dump_json(sample_to_obj(s)) + "\n" for s in samples)


# ---------------------------------------------------------------------------
# filtering
# ---------------------------------------------------------------------------


def filter_corpus(records: Iterable[str | dict[str, Any]]) -> tuple[list[Sample], FilterReport]:
    """Keep records whose answer text parses and whose schemas are valid.

    A direct-response ground truth has no call to parse, so only its schemas
    are checked. Records that are not valid JSON objects, or that violate the
    sample shape, count as dropped_bad_call.
    """
    report = FilterReport()
    kept: list[Sample] = []
    for record in records:
        if isinstance(record, str) and not record.strip():
            continue
        report.input += 1
        try:
            obj = _loads_record(record) if isinstance(record, str) else record
            if not isinstance(obj, dict):
                raise ValueError("record must be a JSON object")
        except ValueError:
            report.dropped_bad_call += 1
            continue
        try:
            sample = sample_from_obj(obj)
        except SchemaError:
            report.dropped_bad_schema += 1
            continue
        except (ParseError, ValueError):
            report.dropped_bad_call += 1
            continue
        report.kept += 1
        kept.append(sample)
    return kept, report


# ---------------------------------------------------------------------------
# masking
# ---------------------------------------------------------------------------


def build_mask_mapping(schemas: Iterable[ToolSchema]) -> MaskMapping:
    functions: dict[str, str] = {}
    parameters: dict[tuple[str, str], str] = {}
    for i, schema in enumerate(schemas, start=1):
        if _FUNC_MASK_RE.fullmatch(schema.name):
            raise MaskCollision(f"function name {schema.name!r} already looks masked")
        functions[schema.name] = f"func_{i}"
        for j, param in enumerate(schema.parameters, start=1):
            if _PARAM_MASK_RE.fullmatch(param):
                raise MaskCollision(f"parameter name {param!r} already looks masked")
            parameters[(schema.name, param)] = f"param_{j}"
    return MaskMapping(functions=functions, parameters=parameters)


def apply_mask_to_answer(mapping: MaskMapping, answer: AnswerSet) -> AnswerSet:
    if answer.kind != "calls":
        return answer
    calls = []
    for call in answer.calls:
        new_name = mapping.functions.get(call.name, call.name)
        args = {
            mapping.parameters.get((call.name, a), a): v for a, v in call.args.items()
        }
        calls.append(ToolCall(new_name, args))
    return AnswerSet(calls=tuple(calls))


def _mask_schemas(mapping: MaskMapping, schemas: Iterable[ToolSchema]) -> tuple[ToolSchema, ...]:
    out = []
    for schema in schemas:
        params = {
            mapping.parameters.get((schema.name, p), p): spec
            for p, spec in schema.parameters.items()
        }
        out.append(
            ToolSchema(
                name=mapping.functions.get(schema.name, schema.name),
                description=schema.description,
                parameters=params,
            )
        )
    return tuple(out)


def _apply_mapping(sample: Sample, mapping: MaskMapping) -> Sample:
    gt = apply_mask_to_answer(mapping, sample.gt)
    gt_text = print_call_expression(gt) if gt.kind == "calls" else sample.gt_text
    turns = tuple(
        replace(t, calls=apply_mask_to_answer(mapping, t.calls)) if t.calls is not None else t
        for t in sample.turns
    )
    return replace(
        sample,
        schemas=_mask_schemas(mapping, sample.schemas),
        turns=turns,
        gt=gt,
        gt_text=gt_text,
    )


def mask_sample(sample: Sample, seed: int = 0) -> tuple[Sample, MaskMapping]:
    """Rename functions to func_k and parameters to param_j in schema order.

    Renames reach schemas, the ground truth (re-serialized), and
    assistant-turn calls; free text and descriptions stay untouched. The seed
    parameter is accepted for interface stability; index assignment itself is
    deterministic schema order.
    """
    del seed
    if not sample.schemas:
        raise ValueError("masking needs a non-empty schema list")
    mapping = build_mask_mapping(sample.schemas)
    return _apply_mapping(sample, mapping), mapping


def unmask_sample(sample: Sample, mapping: MaskMapping) -> Sample:
    """Invert mask_sample; exact on samples whose gt_text was canonical."""
    return _apply_mapping(sample, mapping.inverted())


# ---------------------------------------------------------------------------
# multi-turn augmentation
# ---------------------------------------------------------------------------


def _answer_turn(answer: AnswerSet, text: str) -> Turn:
    if answer.kind == "calls":
        return Turn(role="assistant", content=text, calls=answer)
    return Turn(role="assistant", content=answer.direct_response or text)


def _word_pool(sample: Sample) -> list[str]:
    words: list[str] = []
    for turn in sample.turns:
        words.extend(w for w in turn.content.split() if w.isalnum())
    for call in sample.gt.calls:
        for v in call.args.values():
            if isinstance(v, str):
                words.extend(w for w in v.split() if w.isalnum())
    seen: dict[str, None] = {}
    for w in words:
        seen.setdefault(w, None)
    return list(seen)


def _mutate_value(value: Any, rng: random.Random, pool: list[str]) -> Any | None:
    """Type-preserving mutation, or None when the value has no mutable leaf."""
    if isinstance(value, bool):
        return not value
    if isinstance(value, Decimal):
        candidates = [value + 1, value - 1, value * 2]
        candidates = [c for c in candidates if c != value]
        return rng.choice(candidates)
    if isinstance(value, str):
        words = value.split()
        if not words:
            return None
        idx = rng.randrange(len(words))
        options = [w for w in pool if w != words[idx]]
        if not options:
            return None
        words[idx] = rng.choice(options)
        return " ".join(words)
    if isinstance(value, list):
        order = list(range(len(value)))
        rng.shuffle(order)
        for i in order:
            mutated = _mutate_value(value[i], rng, pool)
            if mutated is not None:
                out = list(value)
                out[i] = mutated
                return out
        return None
    if isinstance(value, dict):
        keys = sorted(value)
        rng.shuffle(keys)
        for k in keys:
            mutated = _mutate_value(value[k], rng, pool)
            if mutated is not None:
                out = dict(value)
                out[k] = mutated
                return out
        return None
    return None  # null has no type-preserving mutation


def _corrupt_answer(gt: AnswerSet, rng: random.Random, pool: list[str]) -> tuple[AnswerSet, str]:
    modes = ["drop_call"]
    if any(c.args for c in gt.calls):
        modes.append("drop_param")
    mutable = [
        (i, a)
        for i, c in enumerate(gt.calls)
        for a, v in c.args.items()
        if _mutate_value(v, random.Random(0), pool) is not None
    ]
    if mutable:
        modes.append("alter_value")
    mode = rng.choice(modes)
    calls = [ToolCall(c.name, dict(c.args)) for c in gt.calls]
    if mode == "drop_call":
        calls.pop(rng.randrange(len(calls)))
    elif mode == "drop_param":
        with_args = [i for i, c in enumerate(calls) if c.args]
        i = rng.choice(with_args)
        args = dict(calls[i].args)
        args.pop(rng.choice(sorted(args)))
        calls[i] = ToolCall(calls[i].name, args)
    else:
        i, a = mutable[rng.randrange(len(mutable))]
        args = dict(calls[i].args)
        args[a] = _mutate_value(args[a], rng, pool)
        calls[i] = ToolCall(calls[i].name, args)
    return AnswerSet(calls=tuple(calls)), mode


def _provenance(strategy: str, parents: list[str], seed: int, **extra: Any) -> dict[str, Any]:
    return {"strategy": strategy, "parents": parents, "seed": seed, **extra}


def _combine(corpus: list[Sample], rng: random.Random, seed: int) -> tuple[list[Sample], int]:
    order = list(range(len(corpus)))
    rng.shuffle(order)
    used: set[int] = set()
    pairs: list[tuple[int, int, bool]] = []
    for i in order:
        if i in used:
            continue
        names_i = {s.name for s in corpus[i].schemas}
        partner = None
        for j in order:
            if j == i or j in used:
                continue
            if names_i & {s.name for s in corpus[j].schemas}:
                partner = j
                break
        if partner is not None:
            used.update((i, partner))
            pairs.append((i, partner, False))
    leftovers = [i for i in order if i not in used]
    while len(leftovers) >= 2:
        i, j = leftovers.pop(0), leftovers.pop(0)
        pairs.append((i, j, True))
    out = []
    for i, j, fallback in pairs:
        a, b = corpus[i], corpus[j]
        schemas: dict[str, ToolSchema] = {}
        for s in a.schemas + b.schemas:
            schemas.setdefault(s.name, s)
        turns = a.turns + (_answer_turn(a.gt, a.gt_text),) + b.turns
        out.append(
            Sample(
                id=f"{a.id}+{b.id}",
                schemas=tuple(schemas.values()),
                turns=turns,
                gt=b.gt,
                gt_text=b.gt_text,
                source=a.source if a.source == b.source else "synthetic",
                multi_turn=True,
                provenance=_provenance(
                    "combine", [a.id, b.id], seed, random_fallback=fallback
                ),
            )
        )
    return out, len(leftovers)


def _tool_removal(sample: Sample, rng: random.Random, seed: int) -> Sample:
    in_schema = [c for c in sample.gt.calls if c.name in {s.name for s in sample.schemas}]
    if not in_schema:
        raise StrategyInapplicable("no ground-truth call backed by a schema")
    target = rng.choice(in_schema).name
    turns = sample.turns + (
        Turn(role="assistant", content=f"The tool {target} is not available right now."),
        Turn(
            role="user",
            content=f"The tool {target} is available again; please proceed with the request.",
        ),
    )
    return replace(
        sample,
        id=f"{sample.id}/tool_removal",
        turns=turns,
        multi_turn=True,
        provenance=_provenance("tool_removal", [sample.id], seed, removed_tool=target),
    )


def _param_clarification(sample: Sample, rng: random.Random, seed: int) -> Sample:
    with_args = [c for c in sample.gt.calls if c.args]
    if not with_args:
        raise StrategyInapplicable("no call with parameters to clarify")
    call = rng.choice(with_args)
    by_name = {s.name: s for s in sample.schemas}
    required = [
        a
        for a in call.args
        if call.name in by_name
        and a in by_name[call.name].parameters
        and by_name[call.name].parameters[a].required
    ]
    param = rng.choice(sorted(required) if required else sorted(call.args))
    value = call.args[param]
    mention = value if isinstance(value, str) else print_value(value)
    first_user = next(t for t in sample.turns if t.role == "user")
    blanked = first_user.content.replace(mention, "", 1)
    turns = tuple(
        replace(t, content=blanked) if t is first_user else t for t in sample.turns
    ) + (
        Turn(role="assistant", content=f"Which value should be used for {param}?"),
        Turn(role="user", content=f"Use {print_value(value)} for {param}."),
    )
    return replace(
        sample,
        id=f"{sample.id}/param_clarification",
        turns=turns,
        multi_turn=True,
        provenance=_provenance("param_clarification", [sample.id], seed, parameter=param),
    )


def _result_validation(sample: Sample, rng: random.Random, seed: int) -> Sample:
    if sample.gt.kind != "calls":
        raise StrategyInapplicable("result validation needs a call answer")
    corrupted, mode = _corrupt_answer(sample.gt, rng, _word_pool(sample))
    turns = sample.turns + (
        _answer_turn(corrupted, print_call_expression(corrupted)),
        Turn(role="user", content="That answer looks wrong; please double-check and correct it."),
    )
    return replace(
        sample,
        id=f"{sample.id}/result_validation",
        turns=turns,
        multi_turn=True,
        provenance=_provenance("result_validation", [sample.id], seed, corruption=mode),
    )


def augment_multi_turn(
    corpus: list[Sample], strategy: str, seed: int = 0
) -> tuple[list[Sample], AugmentReport]:
    """Synthesize multi-turn samples from single-turn ones.

    Samples whose preconditions fail are skipped and counted; the output
    always sets multi_turn and provenance.
    """
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}")
    rng = random.Random(seed)
    report = AugmentReport(strategy=strategy)
    singles = [s for s in corpus if not s.multi_turn]
    if strategy == "combine":
        out, skipped = _combine(singles, rng, seed)
        report.produced = len(out)
        report.skipped = skipped + (len(corpus) - len(singles))
        return out, report
    per_sample = {
        "tool_removal": _tool_removal,
        "param_clarification": _param_clarification,
        "result_validation": _result_validation,
    }[strategy]
    out = []
    for sample in singles:
        try:
            out.append(per_sample(sample, rng, seed))
        except StrategyInapplicable:
            report.skipped += 1
    report.skipped += len(corpus) - len(singles)
    report.produced = len(out)
    return out, report


# ---------------------------------------------------------------------------
# statistics
# ---------------------------------------------------------------------------


@dataclass
class StatsTable:
    counts: dict[tuple[str, bool], int] = field(default_factory=dict)

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    def to_obj(self) -> dict[str, Any]:
        rows = {}
        for source in ("xlam", "toolace", "synthetic"):
            rows[source] = {
                "single_turn": self.counts.get((source, False), 0),
                "multi_turn": self.counts.get((source, True), 0),
            }
        rows["total"] = {
            "single_turn": sum(v for (s, m), v in self.counts.items() if not m),
            "multi_turn": sum(v for (s, m), v in self.counts.items() if m),
        }
        return rows

    def to_text(self) -> str:
        obj = self.to_obj()
        lines = [f"{'source':<10}  {'single_turn':>11}  {'multi_turn':>10}"]
        for source, row in obj.items():
            lines.append(f"{source:<10}  {row['single_turn']:>11}  {row['multi_turn']:>10}")
        return "\n".join(lines)


def corpus_stats(corpus: Iterable[Sample]) -> StatsTable:
    """Counts by (source, multi_turn); callers snapshot one table per stage."""
    table = StatsTable()
    for sample in corpus:
        key = (sample.source, sample.multi_turn)
        table.counts[key] = table.counts.get(key, 0) + 1
    return table
