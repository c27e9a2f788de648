import random

import pytest

from tooltrain.calls import ParamSpec, ToolSchema
from tooltrain.prompts import (
    DEFAULT_TEMPLATE,
    PromptTemplate,
    extract_tool_list,
    render_system_prompt,
)


def rand_schemas(rng: random.Random) -> list[ToolSchema]:
    out = []
    for i in range(rng.randint(0, 4)):
        params = {
            f"p{j}": ParamSpec(
                type_tag=rng.choice(["string", "integer", "float", "boolean", "array"]),
                description=f"param {j}",
                required=rng.random() < 0.5,
            )
            for j in range(rng.randint(0, 3))
        }
        out.append(ToolSchema(name=f"tool_{i}", description=f"does thing {i}", parameters=params))
    return out


def test_empty_schema_list():
    prompt = render_system_prompt([])
    assert prompt.endswith("[]\n")
    assert "{{Tool List}}" not in prompt


def test_single_schema_embedded():
    schema = ToolSchema(name="f", description="d", parameters={"a": ParamSpec("string", "x", True)})
    prompt = render_system_prompt([schema])
    assert '"name": "f"' in prompt
    assert "<think>" in prompt and "<answer>" in prompt


def test_roundtrip_random_schema_lists():
    rng = random.Random(77)
    for _ in range(50):
        schemas = rand_schemas(rng)
        assert extract_tool_list(render_system_prompt(schemas)) == schemas


def test_placeholder_must_occur_exactly_once():
    with pytest.raises(ValueError):
        PromptTemplate(body="no placeholder here")
    with pytest.raises(ValueError):
        PromptTemplate(body="{{Tool List}} and {{Tool List}}")


def test_template_from_file(tmp_path):
    path = tmp_path / "tpl.txt"
    path.write_text("tools: {{Tool List}}", encoding="utf-8")
    template = PromptTemplate.from_file(path)
    assert template.render([]) == "tools: []"


def test_default_template_mentions_call_format():
    assert "[func_name1(params_name1=params_value1, ...), func_name2(params)]" in DEFAULT_TEMPLATE.body
