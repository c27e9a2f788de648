"""System-prompt template with a serialized candidate tool list."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .calls import ToolSchema, parse_tool_schemas, schema_to_obj

__all__ = [
    "DEFAULT_TEMPLATE",
    "PromptTemplate",
    "extract_tool_list",
    "render_system_prompt",
]

PLACEHOLDER = "{{Tool List}}"

DEFAULT_TEMPLATE_BODY = """\
A conversation between User and Assistant, the user asks a question, and the Assistant solves it.
The assistant first thinks about the reasoning process in the mind and then provides the user with the answer.
The reasoning process and answer are enclosed within <think> </think> and <answer> </answer> tags, respectively,
i.e., <think> reasoning process here </think><answer> answer here </answer>.

You are an expert in composing functions, given a question and a set of possible functions.
Based on the question, you will need to make one or more function/tool calls to achieve the purpose.
1. If none of the function can be used, point it out.
2. If the given question lacks the parameters required by the function, also point it out.
3. You should only return the function call in tools call sections.

If you decide to invoke any function(s), MUST use the format:
[func_name1(params_name1=params_value1, ...), func_name2(params)]

Here is a list of functions in JSON format that you can invoke: {{Tool List}}
"""

_TOOL_LIST_MARKER = "Here is a list of functions in JSON format that you can invoke: "


@dataclass(frozen=True)
class PromptTemplate:
    body: str

    def __post_init__(self) -> None:
        if self.body.count(PLACEHOLDER) != 1:
            raise ValueError(f"template must contain {PLACEHOLDER} exactly once")

    @classmethod
    def from_file(cls, path: str | Path) -> "PromptTemplate":
        return cls(body=Path(path).read_text(encoding="utf-8"))

    def render(self, schemas: list[ToolSchema]) -> str:
        tool_list = json.dumps([schema_to_obj(s) for s in schemas], ensure_ascii=False)
        return self.body.replace(PLACEHOLDER, tool_list)


DEFAULT_TEMPLATE = PromptTemplate(body=DEFAULT_TEMPLATE_BODY)


def render_system_prompt(
    schemas: list[ToolSchema], template: PromptTemplate = DEFAULT_TEMPLATE
) -> str:
    """Fill the template's tool-list placeholder with the schemas as JSON."""
    return template.render(schemas)


def extract_tool_list(prompt: str) -> list[ToolSchema]:
    """Recover the schemas from a rendered default-template prompt."""
    idx = prompt.rfind(_TOOL_LIST_MARKER)
    if idx < 0:
        raise ValueError("prompt carries no tool list marker")
    return parse_tool_schemas(prompt[idx + len(_TOOL_LIST_MARKER) :].strip())
