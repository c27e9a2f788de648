"""Canonical tool-call AST: parsing, printing, and structural equality.

Two answer syntaxes are understood:

* bracketed call lists, ``[get_weather(city="Paris", unit="C")]``, with
  literal argument values (strings, numbers, booleans, null, nested lists
  and maps);
* JSON call objects, ``{"name": "f", "arguments": {...}}`` or an array of
  such objects (``"parameters"`` is accepted as an alias for
  ``"arguments"``).

Numbers are kept as exact decimals so that ``2`` and ``2.0`` compare equal
numerically while printing preserves the fractional part as parsed.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from decimal import Decimal
from typing import Any, Iterator

__all__ = [
    "AnswerSet",
    "ParamSpec",
    "ParseError",
    "SchemaError",
    "StructuredResponse",
    "ToolCall",
    "ToolSchema",
    "ast_equal",
    "call_key",
    "parse_answer_text",
    "parse_call_expression",
    "parse_json_calls",
    "parse_structured_response",
    "parse_tool_schemas",
    "print_call_expression",
    "print_value",
    "value_key",
    "values_equal",
]

IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_.]*")

TYPE_TAGS = frozenset({"string", "integer", "float", "boolean", "array", "object", "any"})

# Aliases seen in corpus schema dumps, normalized to the canonical tags.
_TYPE_ALIASES = {"number": "float", "int": "integer", "bool": "boolean", "list": "array", "dict": "object"}

_MAX_DEPTH = 200


class ParseError(ValueError):
    """Malformed call expression or JSON call payload."""

    def __init__(self, position: int, expected: str):
        self.position = position
        self.expected = expected
        super().__init__(f"at position {position}: expected {expected}")


class SchemaError(ValueError):
    """Malformed tool schema document."""


def _normalize_value(value: Any) -> Any:
    """Deep-convert plain ints/floats to exact decimals; leave the rest alone."""
    if isinstance(value, bool) or value is None:
        return value
    if isinstance(value, (int, float)) and not isinstance(value, Decimal):
        return Decimal(str(value))
    if isinstance(value, (list, tuple)):
        return [_normalize_value(v) for v in value]
    if isinstance(value, dict):
        return {k: _normalize_value(v) for k, v in value.items()}
    return value


@dataclass(frozen=True)
class ToolCall:
    """One parsed tool invocation: a name plus named literal arguments."""

    name: str
    args: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not IDENT_RE.fullmatch(self.name):
            raise ValueError(f"invalid tool name: {self.name!r}")
        object.__setattr__(self, "args", {k: _normalize_value(v) for k, v in self.args.items()})


@dataclass(frozen=True)
class AnswerSet:
    """A model's (or the ground truth's) answer for one turn.

    Holds either a list of tool calls, a direct textual response, or neither
    ("no action"). Calls and a direct response are mutually exclusive.
    """

    calls: tuple[ToolCall, ...] = ()
    direct_response: str | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "calls", tuple(self.calls))
        if self.calls and self.direct_response is not None:
            raise ValueError("an answer cannot carry both calls and a direct response")

    @property
    def kind(self) -> str:
        if self.calls:
            return "calls"
        if self.direct_response is not None:
            return "direct"
        return "none"


@dataclass(frozen=True)
class ParamSpec:
    type_tag: str = "any"
    description: str = ""
    required: bool = False


@dataclass(frozen=True)
class ToolSchema:
    """Declared signature of one candidate tool."""

    name: str
    description: str = ""
    parameters: dict[str, ParamSpec] = field(default_factory=dict)


@dataclass(frozen=True)
class StructuredResponse:
    """A raw completion split into its reasoning and answer segments."""

    raw: str
    think: str | None = None
    answer: str | None = None
    parsed: AnswerSet | None = None


# ---------------------------------------------------------------------------
# bracketed call-expression grammar
# ---------------------------------------------------------------------------


class _Scanner:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def eof(self) -> bool:
        return self.pos >= len(self.text)

    def peek(self) -> str:
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def skip_ws(self) -> None:
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def expect(self, ch: str) -> None:
        if self.peek() != ch:
            raise ParseError(self.pos, repr(ch))
        self.pos += 1

    def ident(self) -> str:
        m = IDENT_RE.match(self.text, self.pos)
        if not m:
            raise ParseError(self.pos, "identifier")
        self.pos = m.end()
        return m.group(0)


_NUMBER_RE = re.compile(r"[+-]?[0-9]+(?:\.[0-9]+)?(?:[eE][+-]?[0-9]+)?")
_STRING_ESCAPES = {"\\": "\\", "'": "'", '"': '"', "n": "\n", "t": "\t"}


def _parse_string(s: _Scanner) -> str:
    quote = s.peek()
    if quote not in ("'", '"'):
        raise ParseError(s.pos, "string")
    s.pos += 1
    out: list[str] = []
    while True:
        if s.eof():
            raise ParseError(s.pos, f"closing {quote}")
        ch = s.text[s.pos]
        if ch == quote:
            s.pos += 1
            return "".join(out)
        if ch == "\\":
            esc = s.text[s.pos + 1 : s.pos + 2]
            if esc not in _STRING_ESCAPES:
                raise ParseError(s.pos, "escape sequence")
            out.append(_STRING_ESCAPES[esc])
            s.pos += 2
        else:
            out.append(ch)
            s.pos += 1


def _parse_value(s: _Scanner, depth: int = 0) -> Any:
    if depth > _MAX_DEPTH:
        raise ParseError(s.pos, "shallower nesting")
    s.skip_ws()
    ch = s.peek()
    if ch in ("'", '"'):
        return _parse_string(s)
    if ch == "[":
        s.pos += 1
        items: list[Any] = []
        s.skip_ws()
        if s.peek() == "]":
            s.pos += 1
            return items
        while True:
            items.append(_parse_value(s, depth + 1))
            s.skip_ws()
            if s.peek() == ",":
                s.pos += 1
                continue
            s.expect("]")
            return items
    if ch == "{":
        s.pos += 1
        pairs: dict[str, Any] = {}
        s.skip_ws()
        if s.peek() == "}":
            s.pos += 1
            return pairs
        while True:
            s.skip_ws()
            key = _parse_string(s)
            if key in pairs:
                raise ParseError(s.pos, f"unique map key (duplicate {key!r})")
            s.skip_ws()
            s.expect(":")
            pairs[key] = _parse_value(s, depth + 1)
            s.skip_ws()
            if s.peek() == ",":
                s.pos += 1
                continue
            s.expect("}")
            return pairs
    m = _NUMBER_RE.match(s.text, s.pos)
    if m and (not ch.isalpha()):
        s.pos = m.end()
        return Decimal(m.group(0))
    if ch.isalpha() or ch == "_":
        word = s.ident()
        if word in ("True", "true"):
            return True
        if word in ("False", "false"):
            return False
        if word in ("None", "null"):
            return None
        raise ParseError(s.pos - len(word), "literal value")
    raise ParseError(s.pos, "value")


def _parse_call(s: _Scanner) -> ToolCall:
    s.skip_ws()
    name = s.ident()
    s.skip_ws()
    s.expect("(")
    args: dict[str, Any] = {}
    s.skip_ws()
    if s.peek() == ")":
        s.pos += 1
        return ToolCall(name, args)
    while True:
        s.skip_ws()
        arg = s.ident()
        if arg in args:
            raise ParseError(s.pos, f"unique argument name (duplicate {arg!r})")
        s.skip_ws()
        s.expect("=")
        args[arg] = _parse_value(s)
        s.skip_ws()
        if s.peek() == ",":
            s.pos += 1
            continue
        s.expect(")")
        return ToolCall(name, args)


def parse_call_expression(text: str) -> AnswerSet:
    """Parse a bracketed call list like ``[f(a=1, b="x"), g()]``.

    Raises ParseError on malformed input; never returns a partial answer.
    """
    s = _Scanner(text)
    s.skip_ws()
    s.expect("[")
    calls: list[ToolCall] = []
    s.skip_ws()
    if s.peek() == "]":
        s.pos += 1
    else:
        while True:
            calls.append(_parse_call(s))
            s.skip_ws()
            if s.peek() == ",":
                s.pos += 1
                continue
            s.expect("]")
            break
    s.skip_ws()
    if not s.eof():
        raise ParseError(s.pos, "end of input")
    return AnswerSet(calls=tuple(calls))


# ---------------------------------------------------------------------------
# JSON call payloads
# ---------------------------------------------------------------------------


def _reject_duplicate_keys(pairs: list[tuple[str, Any]]) -> dict[str, Any]:
    out: dict[str, Any] = {}
    for k, v in pairs:
        if k in out:
            raise ValueError(f"duplicate key {k!r}")
        out[k] = v
    return out


def _loads_strict(text: str) -> Any:
    def reject_constant(token: str) -> Any:
        raise ValueError(f"non-finite number {token!r}")

    return json.loads(
        text,
        parse_float=Decimal,
        parse_int=Decimal,
        parse_constant=reject_constant,
        object_pairs_hook=_reject_duplicate_keys,
    )


def _call_from_obj(obj: Any, lenient: bool) -> ToolCall:
    if not isinstance(obj, dict):
        raise ParseError(0, "call object")
    keys = set(obj)
    name = obj.get("name")
    if not isinstance(name, str) or not IDENT_RE.fullmatch(name):
        raise ParseError(0, "call name")
    args_key = "arguments" if "arguments" in obj else "parameters" if "parameters" in obj else None
    if args_key is None:
        if not lenient:
            raise ParseError(0, "'arguments' field")
        args: Any = {}
    else:
        args = obj[args_key]
    if keys - {"name", args_key}:
        raise ParseError(0, "only 'name' and 'arguments'")
    if not isinstance(args, dict):
        raise ParseError(0, "argument object")
    return ToolCall(name, dict(args))


def parse_json_calls(text: str, lenient: bool = False) -> AnswerSet:
    """Parse a JSON call object or array of call objects.

    In lenient mode a call object may omit ``arguments`` (treated as empty);
    the default is strict.
    """
    try:
        data = _loads_strict(text)
    except ValueError as exc:
        raise ParseError(0, f"valid JSON ({exc})") from exc
    if isinstance(data, list):
        return AnswerSet(calls=tuple(_call_from_obj(o, lenient) for o in data))
    return AnswerSet(calls=(_call_from_obj(data, lenient),))


def parse_answer_text(text: str) -> AnswerSet:
    """Parse a ground-truth answer string, bracketed syntax first, then JSON."""
    try:
        return parse_call_expression(text)
    except ParseError:
        return parse_json_calls(text)


# ---------------------------------------------------------------------------
# tagged completions
# ---------------------------------------------------------------------------

_TAGS = ("<think>", "</think>", "<answer>", "</answer>")


def parse_structured_response(raw: str) -> StructuredResponse:
    """Split a completion into think/answer segments and parse the answer.

    The segments are set only when all four tags occur exactly once, in
    think-open, think-close, answer-open, answer-close order. A failed parse
    of the answer segment leaves ``parsed`` unset; this never raises.
    """
    positions = []
    for tag in _TAGS:
        first = raw.find(tag)
        if first < 0 or raw.find(tag, first + 1) >= 0:
            return StructuredResponse(raw=raw)
        positions.append(first)
    if positions != sorted(positions):
        return StructuredResponse(raw=raw)
    # </think> must not sit inside <answer>...</answer> etc.; strictly
    # increasing starts plus uniqueness already guarantee proper nesting here.
    think = raw[positions[0] + len("<think>") : positions[1]]
    answer = raw[positions[2] + len("<answer>") : positions[3]]
    parsed: AnswerSet | None
    try:
        parsed = parse_answer_text(answer)
    except ParseError:
        parsed = None
    return StructuredResponse(raw=raw, think=think, answer=answer, parsed=parsed)


# ---------------------------------------------------------------------------
# tool schemas
# ---------------------------------------------------------------------------


def _param_from_obj(obj: Any) -> ParamSpec:
    if not isinstance(obj, dict):
        raise SchemaError("parameter spec must be an object")
    tag = obj.get("type", "any")
    if not isinstance(tag, str):
        raise SchemaError("parameter type must be a string")
    tag = _TYPE_ALIASES.get(tag, tag)
    if tag not in TYPE_TAGS:
        raise SchemaError(f"unknown parameter type {tag!r}")
    description = obj.get("description", "")
    required = obj.get("required", False)
    if not isinstance(description, str) or not isinstance(required, bool):
        raise SchemaError("bad parameter description/required fields")
    return ParamSpec(type_tag=tag, description=description, required=required)


def schema_from_obj(obj: Any) -> ToolSchema:
    if not isinstance(obj, dict):
        raise SchemaError("schema must be an object")
    name = obj.get("name")
    if not isinstance(name, str) or not IDENT_RE.fullmatch(name):
        raise SchemaError(f"missing or invalid schema name: {name!r}")
    params_obj = obj.get("parameters", {})
    if not isinstance(params_obj, dict):
        raise SchemaError(f"parameters of {name!r} must be an object")
    description = obj.get("description", "")
    if not isinstance(description, str):
        raise SchemaError(f"description of {name!r} must be a string")
    parameters = {p: _param_from_obj(spec) for p, spec in params_obj.items()}
    return ToolSchema(name=name, description=description, parameters=parameters)


def parse_tool_schemas(text: str) -> list[ToolSchema]:
    """Parse a JSON array of candidate tool schemas; extra fields are ignored."""
    try:
        data = _loads_strict(text)
    except ValueError as exc:
        raise SchemaError(f"invalid JSON: {exc}") from exc
    if not isinstance(data, list):
        raise SchemaError("schema document must be a JSON array")
    return [schema_from_obj(o) for o in data]


def schema_to_obj(schema: ToolSchema) -> dict[str, Any]:
    return {
        "name": schema.name,
        "description": schema.description,
        "parameters": {
            p: {"type": s.type_tag, "description": s.description, "required": s.required}
            for p, s in schema.parameters.items()
        },
    }


# ---------------------------------------------------------------------------
# printing
# ---------------------------------------------------------------------------

_STRING_OUT_ESCAPES = {"\\": "\\\\", '"': '\\"', "\n": "\\n", "\t": "\\t"}


def _quote(text: str) -> str:
    return '"' + "".join(_STRING_OUT_ESCAPES.get(ch, ch) for ch in text) + '"'


def print_value(value: Any) -> str:
    """Serialize one literal value in canonical bracketed-call form."""
    if isinstance(value, bool):
        return "True" if value else "False"
    if value is None:
        return "None"
    if isinstance(value, Decimal):
        return str(value)
    if isinstance(value, (int, float)):
        return str(Decimal(str(value)))
    if isinstance(value, str):
        return _quote(value)
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(print_value(v) for v in value) + "]"
    if isinstance(value, dict):
        return "{" + ", ".join(f"{_quote(k)}: {print_value(v)}" for k, v in value.items()) + "}"
    raise TypeError(f"unsupported value type {type(value).__name__}")


def print_call_expression(answer: AnswerSet) -> str:
    """Canonical serialization: double quotes, ``, `` separators, stored order."""
    if answer.direct_response is not None:
        raise ValueError("a direct response has no call serialization")
    parts = []
    for call in answer.calls:
        args = ", ".join(f"{k}={print_value(v)}" for k, v in call.args.items())
        parts.append(f"{call.name}({args})")
    return "[" + ", ".join(parts) + "]"


# ---------------------------------------------------------------------------
# structural equality
# ---------------------------------------------------------------------------


def values_equal(a: Any, b: Any) -> bool:
    """Structural value equality: numbers numerically, lists ordered, maps unordered."""
    if isinstance(a, bool) or isinstance(b, bool):
        return isinstance(a, bool) and isinstance(b, bool) and a == b
    if isinstance(a, Decimal) or isinstance(b, Decimal):
        return isinstance(a, Decimal) and isinstance(b, Decimal) and a == b
    if isinstance(a, str) or isinstance(b, str):
        return isinstance(a, str) and isinstance(b, str) and a == b
    if a is None or b is None:
        return a is None and b is None
    if isinstance(a, (list, tuple)) or isinstance(b, (list, tuple)):
        if not isinstance(a, (list, tuple)) or not isinstance(b, (list, tuple)):
            return False
        return len(a) == len(b) and all(values_equal(x, y) for x, y in zip(a, b))
    if isinstance(a, dict) or isinstance(b, dict):
        if not isinstance(a, dict) or not isinstance(b, dict):
            return False
        return set(a) == set(b) and all(values_equal(a[k], b[k]) for k in a)
    return False


def value_key(value: Any) -> Any:
    """Hashable canonical key; equal keys iff values_equal."""
    if isinstance(value, bool):
        return ("b", value)
    if value is None:
        return ("z",)
    if isinstance(value, Decimal):
        return ("n", "0" if value == 0 else str(value.normalize()))
    if isinstance(value, str):
        return ("s", value)
    if isinstance(value, (list, tuple)):
        return ("l", tuple(value_key(v) for v in value))
    if isinstance(value, dict):
        return ("m", frozenset((k, value_key(v)) for k, v in value.items()))
    raise TypeError(f"unsupported value type {type(value).__name__}")


def call_key(call: ToolCall) -> Any:
    return (call.name, frozenset((a, value_key(v)) for a, v in call.args.items()))


def _call_multiset(answer: AnswerSet) -> dict[Any, int]:
    counts: dict[Any, int] = {}
    for call in answer.calls:
        k = call_key(call)
        counts[k] = counts.get(k, 0) + 1
    return counts


def ast_equal(a: AnswerSet, b: AnswerSet) -> bool:
    """Answer equivalence: call multisets match, argument/call order ignored,
    numbers compared numerically, direct responses compared trimmed."""
    if a.kind != b.kind:
        return False
    if a.kind == "direct":
        assert a.direct_response is not None and b.direct_response is not None
        return a.direct_response.strip() == b.direct_response.strip()
    if a.kind == "none":
        return True
    return _call_multiset(a) == _call_multiset(b)


# ---------------------------------------------------------------------------
# JSON (de)serialization of answers, preserving exact decimals
# ---------------------------------------------------------------------------


def _json_fragments(value: Any) -> Iterator[str]:
    if isinstance(value, bool):
        yield "true" if value else "false"
    elif value is None:
        yield "null"
    elif isinstance(value, Decimal):
        yield str(value)
    elif isinstance(value, (int, float)):
        yield str(Decimal(str(value)))
    elif isinstance(value, str):
        yield json.dumps(value, ensure_ascii=False)
    elif isinstance(value, (list, tuple)):
        yield "["
        for i, v in enumerate(value):
            if i:
                yield ", "
            yield from _json_fragments(v)
        yield "]"
    elif isinstance(value, dict):
        yield "{"
        for i, (k, v) in enumerate(value.items()):
            if i:
                yield ", "
            yield json.dumps(str(k), ensure_ascii=False)
            yield ": "
            yield from _json_fragments(v)
        yield "}"
    else:
        raise TypeError(f"unsupported value type {type(value).__name__}")


def dump_json(value: Any) -> str:
    """json.dumps twin that renders exact decimals as plain number tokens."""
    return "".join(_json_fragments(value))


def answer_set_to_obj(answer: AnswerSet) -> dict[str, Any]:
    if answer.direct_response is not None:
        return {"direct_response": answer.direct_response}
    return {"calls": [{"name": c.name, "args": dict(c.args)} for c in answer.calls]}


def answer_set_from_obj(obj: Any) -> AnswerSet:
    if not isinstance(obj, dict):
        raise ParseError(0, "answer object")
    if obj.get("direct_response") is not None:
        if not isinstance(obj["direct_response"], str):
            raise ParseError(0, "direct_response string")
        return AnswerSet(direct_response=obj["direct_response"])
    calls = []
    for c in obj.get("calls", []):
        if not isinstance(c, dict) or not isinstance(c.get("name"), str):
            raise ParseError(0, "call object with name")
        args = c.get("args", {})
        if not isinstance(args, dict):
            raise ParseError(0, "args object")
        calls.append(ToolCall(c["name"], dict(args)))
    return AnswerSet(calls=tuple(calls))
