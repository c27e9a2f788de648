"""Rule-based reward shaping and group-relative policy optimization for
tool-calling RL experiments: call parsing and AST matching, the progressive
overlap-to-strict reward schedule, GRPO math, corpus preparation, an eval
harness, and a desk-scale tabular training simulator."""

from .calls import (
    AnswerSet,
    ParamSpec,
    ParseError,
    SchemaError,
    StructuredResponse,
    ToolCall,
    ToolSchema,
    ast_equal,
    parse_answer_text,
    parse_call_expression,
    parse_json_calls,
    parse_structured_response,
    parse_tool_schemas,
    print_call_expression,
)
from .grpo import (
    Completion,
    GroupTooSmall,
    GrpoConfig,
    MissingAdvantages,
    RolloutGroup,
    compute_advantages,
    grpo_gradient_tabular,
    grpo_objective,
    importance_ratios,
)
from .rewards import (
    DegenerateGroundTruth,
    RewardBreakdown,
    RewardConfig,
    compute_reward,
    format_reward,
    general_reward,
    sigma,
    strict_reward,
    tokenize,
)

__version__ = "0.1.0"

__all__ = [
    "AnswerSet",
    "Completion",
    "DegenerateGroundTruth",
    "GroupTooSmall",
    "GrpoConfig",
    "MissingAdvantages",
    "ParamSpec",
    "ParseError",
    "RewardBreakdown",
    "RewardConfig",
    "RolloutGroup",
    "SchemaError",
    "StructuredResponse",
    "ToolCall",
    "ToolSchema",
    "__version__",
    "ast_equal",
    "compute_advantages",
    "compute_reward",
    "format_reward",
    "general_reward",
    "grpo_gradient_tabular",
    "grpo_objective",
    "importance_ratios",
    "parse_answer_text",
    "parse_call_expression",
    "parse_json_calls",
    "parse_structured_response",
    "parse_tool_schemas",
    "print_call_expression",
    "sigma",
    "strict_reward",
    "tokenize",
]
