import random
from decimal import Decimal

import pytest

from tooltrain.calls import ast_equal, parse_answer_text, print_call_expression
from tooltrain.pipeline import (
    MaskCollision,
    Sample,
    StrategyInapplicable,
    Turn,
    apply_mask_to_answer,
    augment_multi_turn,
    corpus_stats,
    filter_corpus,
    mask_sample,
    read_samples,
    sample_from_obj,
    sample_to_obj,
    unmask_sample,
    write_samples,
    _param_clarification,
    _tool_removal,
)
from tooltrain.calls import ParamSpec, ToolSchema

from conftest import FIXTURES


def make_sample(gt_text: str, *, sid: str = "s", source: str = "xlam",
                schemas: tuple = None, content: str = "do the thing with Paris") -> Sample:
    gt = parse_answer_text(gt_text)
    if schemas is None:
        schemas = tuple(
            ToolSchema(
                name=c.name,
                description=f"tool {c.name}",
                parameters={a: ParamSpec(type_tag="any", required=True) for a in c.args},
            )
            for c in gt.calls
        )
    return Sample(
        id=sid,
        schemas=schemas,
        turns=(Turn(role="user", content=content),),
        gt=gt,
        gt_text=gt_text,
        source=source,
    )


class TestFilter:
    def test_fixture_counts(self):
        lines = (FIXTURES / "filter_fixture.jsonl").read_text().splitlines()
        kept, report = filter_corpus(lines)
        assert report.input == 10
        assert report.kept == 7 and len(kept) == 7
        assert report.dropped_bad_call == 2
        assert report.dropped_bad_schema == 1

    def test_kept_samples_revalidate(self):
        lines = (FIXTURES / "filter_fixture.jsonl").read_text().splitlines()
        kept, _ = filter_corpus(lines)
        again, report = filter_corpus(write_samples(kept).splitlines())
        assert report.kept == len(kept) == len(again)
        assert report.dropped_bad_call == report.dropped_bad_schema == 0

    def test_direct_response_record_kept(self):
        lines = (FIXTURES / "filter_fixture.jsonl").read_text().splitlines()
        kept, _ = filter_corpus(lines)
        direct = [s for s in kept if s.gt.kind == "direct"]
        assert len(direct) == 1 and direct[0].id == "t2"

    def test_non_json_line_counts_as_bad_call(self):
        kept, report = filter_corpus(["{not json"])
        assert not kept and report.dropped_bad_call == 1

    def test_decimal_values_survive_roundtrip(self):
        lines = (FIXTURES / "filter_fixture.jsonl").read_text().splitlines()
        kept, _ = filter_corpus(lines)
        x3 = next(s for s in kept if s.id == "x3")
        assert x3.gt.calls[0].args["input_list"] == [Decimal(1), Decimal(2), Decimal(3)]
        assert write_samples([x3]) == write_samples(read_samples(write_samples([x3]).splitlines()))


class TestMask:
    def test_worked_example(self):
        sample = make_sample('[calculate_sum(input_list=[1, 2])]')
        masked, mapping = mask_sample(sample)
        assert masked.schemas[0].name == "func_1"
        assert list(masked.schemas[0].parameters) == ["param_1"]
        assert masked.gt_text == "[func_1(param_1=[1, 2])]"
        assert mapping.functions == {"calculate_sum": "func_1"}
        assert mapping.parameters == {("calculate_sum", "input_list"): "param_1"}

    def test_direct_response_sample(self):
        sample = Sample(
            id="d",
            schemas=(ToolSchema(name="f", parameters={"a": ParamSpec()}),),
            turns=(Turn(role="user", content="hi"),),
            gt=parse_answer_text("[]").__class__(direct_response="no tool fits"),
            gt_text="no tool fits",
        )
        masked, _ = mask_sample(sample)
        assert masked.schemas[0].name == "func_1"
        assert masked.gt_text == "no tool fits"
        assert masked.gt.direct_response == "no tool fits"

    def test_double_masking_raises(self):
        sample = make_sample("[calculate_sum(input_list=[1, 2])]")
        masked, _ = mask_sample(sample)
        with pytest.raises(MaskCollision):
            mask_sample(masked)

    def test_roundtrip_restores_canonical_sample(self):
        rng = random.Random(17)
        from gen import rand_answer

        for _ in range(50):
            answer = rand_answer(rng, unique_names=True)
            text = print_call_expression(answer)
            sample = make_sample(text, sid=f"m{rng.randint(0, 999)}")
            masked, mapping = mask_sample(sample)
            restored = unmask_sample(masked, mapping)
            assert restored.gt_text == sample.gt_text
            assert restored.schemas == sample.schemas
            assert ast_equal(restored.gt, sample.gt)

    def test_no_original_name_survives(self):
        sample = make_sample('[calculate_sum(input_list=[1, 2]), fetch_rates(unit="eur")]')
        masked, _ = mask_sample(sample)
        for original in ("calculate_sum", "fetch_rates", "input_list", "unit"):
            assert original not in masked.gt_text
            assert all(original != s.name for s in masked.schemas)
            assert all(original not in s.parameters for s in masked.schemas)

    def test_descriptions_and_text_untouched(self):
        sample = make_sample("[calculate_sum(input_list=[1])]",
                             content="please calculate_sum of input_list")
        masked, _ = mask_sample(sample)
        assert masked.turns[0].content == "please calculate_sum of input_list"
        assert masked.schemas[0].description == "tool calculate_sum"

    def test_strict_reward_invariant_under_mask(self):
        from gen import print_variant, rand_answer, wrap_tags
        from tooltrain.calls import parse_structured_response
        from tooltrain.rewards import strict_reward

        rng = random.Random(23)
        for _ in range(100):
            gt = rand_answer(rng, unique_names=True)
            sample = make_sample(print_call_expression(gt), sid="in")
            pred = gt if rng.random() < 0.5 else rand_answer(rng, unique_names=True)
            masked, mapping = mask_sample(sample)
            masked_pred = apply_mask_to_answer(mapping, pred)
            before = strict_reward(
                parse_structured_response(wrap_tags(print_call_expression(pred))), sample.gt
            )
            after = strict_reward(
                parse_structured_response(wrap_tags(print_call_expression(masked_pred))),
                masked.gt,
            )
            assert before == after


class TestAugment:
    def test_combine_shared_schema(self):
        a = make_sample('[get_weather(city="Paris")]', sid="a")
        b = make_sample('[get_weather(city="Oslo")]', sid="b")
        out, report = augment_multi_turn([a, b], "combine", seed=1)
        assert report.produced == 1 and report.skipped == 0
        sample = out[0]
        assert sample.multi_turn
        assert sample.provenance["strategy"] == "combine"
        assert not sample.provenance["random_fallback"]
        assert sum(1 for t in sample.turns if t.role == "user") == 2
        assert len(sample.schemas) == 1  # deduped by name
        assert ast_equal(sample.gt, b.gt) or ast_equal(sample.gt, a.gt)

    def test_combine_random_fallback_flagged(self):
        a = make_sample('[f_one(x=1)]', sid="a")
        b = make_sample('[f_two(y=2)]', sid="b")
        out, _ = augment_multi_turn([a, b], "combine", seed=1)
        assert len(out) == 1 and out[0].provenance["random_fallback"]

    def test_combine_odd_leftover_skipped(self):
        samples = [make_sample(f'[tool_{i}(a={i})]', sid=f"s{i}") for i in range(3)]
        out, report = augment_multi_turn(samples, "combine", seed=2)
        assert report.produced == 1 and report.skipped == 1

    def test_tool_removal_shape(self):
        sample = make_sample('[get_weather(city="Paris")]')
        out, report = augment_multi_turn([sample], "tool_removal", seed=3)
        assert report.produced == 1
        turns = out[0].turns
        assert turns[-2].role == "assistant" and "not available" in turns[-2].content
        assert turns[-1].role == "user"
        assert ast_equal(out[0].gt, sample.gt)

    def test_param_clarification_shape(self):
        sample = make_sample('[f(city="Paris")]')
        out, report = augment_multi_turn([sample], "param_clarification", seed=4)
        assert report.produced == 1
        sample2 = out[0]
        assert "Paris" not in sample2.turns[0].content
        assert sample2.turns[-2].role == "assistant"
        assert "city" in sample2.turns[-2].content
        assert sample2.turns[-1].role == "user" and "Paris" in sample2.turns[-1].content
        assert ast_equal(sample2.gt, sample.gt)

    def test_param_clarification_prefers_required(self):
        schemas = (
            ToolSchema(
                name="f",
                parameters={
                    "opt": ParamSpec(required=False),
                    "req": ParamSpec(required=True),
                },
            ),
        )
        sample = make_sample('[f(opt=1, req=2)]', schemas=schemas)
        out = _param_clarification(sample, random.Random(0), 0)
        assert out.provenance["parameter"] == "req"

    def test_param_clarification_inapplicable_on_zero_args(self):
        sample = make_sample("[f()]")
        with pytest.raises(StrategyInapplicable):
            _param_clarification(sample, random.Random(0), 0)
        out, report = augment_multi_turn([sample], "param_clarification", seed=5)
        assert out == [] and report.skipped == 1

    def test_tool_removal_inapplicable_without_schema(self):
        sample = make_sample('[f(a=1)]', schemas=(ToolSchema(name="other"),))
        with pytest.raises(StrategyInapplicable):
            _tool_removal(sample, random.Random(0), 0)

    def test_result_validation_corruption_differs_and_final_gt_intact(self):
        rng = random.Random(0)
        for seed in range(20):
            sample = make_sample('[f(a=1, b="x y z"), g(c=True)]', sid=f"rv{seed}")
            out, report = augment_multi_turn([sample], "result_validation", seed=seed)
            assert report.produced == 1
            corrupted_turn = out[0].turns[-2]
            assert corrupted_turn.role == "assistant"
            assert corrupted_turn.calls is None or not ast_equal(corrupted_turn.calls, sample.gt)
            assert ast_equal(out[0].gt, sample.gt)
            assert out[0].provenance["corruption"] in ("drop_call", "drop_param", "alter_value")

    def test_direct_response_sample_skipped_by_result_validation(self):
        sample = Sample(
            id="d",
            schemas=(ToolSchema(name="f"),),
            turns=(Turn(role="user", content="hi"),),
            gt=parse_answer_text("[]").__class__(direct_response="cannot help"),
            gt_text="cannot help",
        )
        out, report = augment_multi_turn([sample], "result_validation", seed=1)
        assert out == [] and report.skipped == 1

    def test_augmented_samples_pass_filter(self):
        lines = (FIXTURES / "filter_fixture.jsonl").read_text().splitlines()
        corpus, _ = filter_corpus(lines)
        for strategy in ("combine", "tool_removal", "param_clarification", "result_validation"):
            out, _ = augment_multi_turn(corpus, strategy, seed=11)
            reread, report = filter_corpus(write_samples(out).splitlines())
            assert report.kept == len(out), strategy
            assert all(s.multi_turn and s.provenance for s in reread)

    def test_determinism(self):
        lines = (FIXTURES / "filter_fixture.jsonl").read_text().splitlines()
        corpus, _ = filter_corpus(lines)
        for strategy in ("combine", "result_validation"):
            a, _ = augment_multi_turn(corpus, strategy, seed=9)
            b, _ = augment_multi_turn(corpus, strategy, seed=9)
            assert write_samples(a) == write_samples(b)

    def test_unknown_strategy(self):
        with pytest.raises(ValueError):
            augment_multi_turn([], "shuffle", seed=0)


class TestStats:
    def test_empty(self):
        table = corpus_stats([])
        assert table.total == 0
        assert table.to_obj()["total"] == {"single_turn": 0, "multi_turn": 0}

    def test_fixture_census(self):
        lines = (FIXTURES / "filter_fixture.jsonl").read_text().splitlines()
        kept, _ = filter_corpus(lines)
        table = corpus_stats(kept)
        obj = table.to_obj()
        assert obj["xlam"] == {"single_turn": 3, "multi_turn": 0}
        assert obj["toolace"] == {"single_turn": 3, "multi_turn": 0}
        assert obj["synthetic"] == {"single_turn": 1, "multi_turn": 0}
        assert obj["total"] == {"single_turn": 7, "multi_turn": 0}

    def test_text_grid_alignment(self):
        table = corpus_stats([make_sample("[f(a=1)]")])
        lines = table.to_text().splitlines()
        assert lines[0].split() == ["source", "single_turn", "multi_turn"]
        assert len(lines) == 5


class TestSerialization:
    def test_sample_obj_roundtrip(self):
        sample = make_sample('[f(a=1.50, b="x")]')
        again = sample_from_obj(sample_to_obj(sample))
        assert again == sample

    def test_gt_text_must_parse_when_gt_has_calls(self):
        obj = sample_to_obj(make_sample("[f(a=1)]"))
        obj["gt_text"] = "[f(a="
        with pytest.raises(Exception):
            sample_from_obj(obj)
