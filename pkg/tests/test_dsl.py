import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from e2cfd import dsl
from e2cfd.dsl import (
    Binary,
    Clip,
    Comparison,
    Constant,
    Feature,
    If,
    LimitError,
    ParseError,
    Unary,
    UnboundFeatureError,
    UnknownFeatureError,
    evaluate,
    free_features,
    parse,
    pretty,
    validate,
    weighted_sum,
)

FEATURES = [
    "x", "y", "vx", "vy", "goal_dx", "goal_dy", "dist_goal",
    "dist_hazard_min", "in_hazard", "speed", "progress",
]

ZEROS = {name: 0.0 for name in FEATURES}


def test_parse_builds_expected_tree():
    tree = parse("min(1.0, dist_hazard_min) - 1.0")
    assert tree == Binary(
        "sub",
        Binary("min", Constant(1.0), Feature("dist_hazard_min")),
        Constant(1.0),
    )


def test_parse_whitespace_insensitive():
    a = parse("min(1.0,dist_hazard_min)-1.0")
    b = parse("  min( 1.0 ,  dist_hazard_min )   -  1.0 ")
    assert a == b


def test_incomplete_input_reports_offset():
    with pytest.raises(ParseError) as info:
        parse("1 + ")
    assert info.value.offset == 4
    assert info.value.expected
    assert isinstance(info.value.excerpt, str)


@pytest.mark.parametrize("text", [
    "", "()", "min(1,2,3)", "min(1)", "--3.0", "1.2.3", "2 +* 3",
    "if(x, 1, 2)", "abs", "x $ y", "(1 + 2", "1 + 2)", "unknown(3)",
])
def test_rejected_inputs_raise_parse_error(text):
    with pytest.raises(ParseError):
        parse(text)


def test_left_associativity_and_precedence():
    assert evaluate(parse("2.0 - 3.0 - 4.0"), {}) == -5.0
    assert evaluate(parse("2.0 + 3.0 * 4.0"), {}) == 14.0
    assert evaluate(parse("(2.0 + 3.0) * 4.0"), {}) == 20.0
    assert evaluate(parse("12.0 / 3.0 / 2.0"), {}) == 2.0


def test_division_by_zero_is_guarded():
    assert evaluate(parse("1.0/0.0"), {}) == pytest.approx(1.0e8)
    assert evaluate(parse("-1.0/0.0"), {}) == pytest.approx(-1.0e8)
    assert evaluate(parse("1.0 / -0.0"), {}) == pytest.approx(1.0e8)
    assert evaluate(parse("5.0 / 2.0"), {}) == 2.5


def test_negation_example():
    tree = parse("-(1.0 - min(dist_hazard_min, 1.0))")
    assert evaluate(tree, {"dist_hazard_min": 0.5}) == -0.5


def test_if_selects_branch():
    tree = parse("if(in_hazard > 0.5, -10.0, 0.0)")
    assert evaluate(tree, {"in_hazard": 1.0}) == -10.0
    assert evaluate(tree, {"in_hazard": 0.0}) == 0.0


@pytest.mark.parametrize("op,lhs,rhs,expected", [
    ("<", 1.0, 2.0, True),
    ("<", 2.0, 2.0, False),
    ("<=", 2.0, 2.0, True),
    (">", 3.0, 2.0, True),
    (">=", 2.0, 2.0, True),
    ("==", 2.0, 2.0, True),
    ("==", 2.0, 2.5, False),
])
def test_comparison_operators(op, lhs, rhs, expected):
    tree = parse(f"if({lhs} {op} {rhs}, 1.0, 0.0)")
    assert evaluate(tree, {}) == (1.0 if expected else 0.0)


def test_guarded_log_and_sqrt():
    assert evaluate(parse("log(0.0)"), {}) == pytest.approx(math.log(1e-8))
    assert evaluate(parse("log(-5.0)"), {}) == pytest.approx(math.log(1e-8))
    assert evaluate(parse("sqrt(-4.0)"), {}) == pytest.approx(1e-4)
    assert evaluate(parse("sqrt(9.0)"), {}) == 3.0


def test_exp_overflow_clamps():
    v = evaluate(parse("exp(1000.0)"), {})
    assert v == dsl.HUGE
    assert math.isfinite(v)


def test_step_semantics():
    assert evaluate(parse("step(0.1)"), {}) == 1.0
    assert evaluate(parse("step(0.0)"), {}) == 0.0
    assert evaluate(parse("step(-2.0)"), {}) == 0.0


def test_clip():
    tree = parse("clip(speed, 0.0, 1.0)")
    assert evaluate(tree, {"speed": 2.5}) == 1.0
    assert evaluate(tree, {"speed": -1.0}) == 0.0
    assert evaluate(tree, {"speed": 0.25}) == 0.25


def test_scientific_notation_and_leading_dot():
    assert evaluate(parse("1e3"), {}) == 1000.0
    assert evaluate(parse(".5 + 2."), {}) == 2.5


def test_unbound_feature():
    with pytest.raises(UnboundFeatureError) as info:
        evaluate(parse("speed"), {})
    assert info.value.name == "speed"


def test_free_features():
    tree = parse("x + min(y, x) * if(in_hazard > 0.5, vx, 1.0)")
    assert free_features(tree) == {"x", "y", "in_hazard", "vx"}
    assert free_features(parse("1.0 + 2.0")) == set()


def test_validate_against_registry():
    validate(parse("x + y * speed"), FEATURES)
    with pytest.raises(UnknownFeatureError) as info:
        validate(parse("x + bogus + wat"), FEATURES)
    assert info.value.names == ("bogus", "wat")


def test_node_budget():
    text = " + ".join(["1.0"] * 300)
    with pytest.raises(LimitError):
        parse(text)


def test_depth_budget_on_finished_tree():
    ok = "abs(" * 31 + "x" + ")" * 31
    assert dsl.depth(parse(ok)) == 32
    too_deep = "abs(" * 40 + "x" + ")" * 40
    with pytest.raises(LimitError):
        parse(too_deep)


def test_pathological_paren_nesting_is_rejected_not_crashed():
    text = "(" * 3000 + "1.0" + ")" * 3000
    with pytest.raises(LimitError):
        parse(text)


def test_limit_error_is_a_parse_error():
    assert issubclass(LimitError, ParseError)


def test_pretty_minimal_parens():
    assert pretty(parse("1.0 + (2.0 * x)")) == "1.0 + 2.0 * x"
    assert pretty(parse("(1.0 + 2.0) * x")) == "(1.0 + 2.0) * x"
    assert pretty(parse("-(x + y)")) == "-(x + y)"
    assert pretty(parse("-3.0 * x")) == "-3.0 * x"
    assert pretty(parse("a / (b * c)")) == "a / (b * c)"


def test_pretty_round_trips_examples():
    for text in [
        "min(1.0, dist_hazard_min) - 1.0",
        "if(in_hazard > 0.5, -10.0, 0.0)",
        "clip(speed * 2.0, 0.0, 1.0) + sqrt(dist_goal)",
        "-(1.0 - min(dist_hazard_min, 1.0))",
        "exp(-dist_goal) / (1.0 + speed)",
    ]:
        tree = parse(text)
        assert parse(pretty(tree)) == tree


def test_weighted_sum_identity():
    base = parse("min(1.0, dist_hazard_min) - 1.0")
    combined = weighted_sum([base], [1.0])
    feats = {"dist_hazard_min": 0.3}
    assert evaluate(combined, feats) == evaluate(base, feats)


def test_weighted_sum_matches_direct_sum():
    exprs = [parse("x * 2.0"), parse("y - 1.0"), parse("speed / 4.0")]
    weights = [0.5, 0.25, 0.25]
    feats = {"x": 1.5, "y": -2.0, "speed": 3.0}
    combined = weighted_sum(exprs, weights)
    expected = sum(
        w * evaluate(e, feats) for e, w in zip(exprs, weights)
    )
    assert evaluate(combined, feats) == pytest.approx(expected, abs=1e-12)


def test_weighted_sum_serializes_and_round_trips():
    exprs = [parse("x"), parse("-y + 1.0")]
    combined = weighted_sum(exprs, [0.75, 0.25])
    assert parse(pretty(combined)) == combined


def test_weighted_sum_length_mismatch():
    with pytest.raises(ValueError):
        weighted_sum([parse("x")], [1.0, 2.0])
    with pytest.raises(ValueError):
        weighted_sum([], [])


# --- property tests ---------------------------------------------------

_constants = st.floats(
    allow_nan=False, allow_infinity=False, width=64
).map(Constant)
_leaves = _constants | st.sampled_from(FEATURES).map(Feature)


def _unary(op, arg):
    # The parser folds a minus sign on a literal into the constant, so
    # canonical trees never contain neg-of-constant.
    if op == "neg" and isinstance(arg, Constant):
        return Constant(-arg.value)
    return Unary(op, arg)


def _trees(children):
    unary = st.builds(_unary, st.sampled_from(dsl.UNARY_OPS), children)
    binary = st.builds(
        Binary, st.sampled_from(dsl.BINARY_OPS), children, children
    )
    clip = st.builds(Clip, children, children, children)
    cond = st.builds(
        Comparison, st.sampled_from(dsl.COMPARISON_OPS), children, children
    )
    iff = st.builds(If, cond, children, children)
    return unary | binary | clip | iff


_expr_trees = st.recursive(_leaves, _trees, max_leaves=25)


@settings(max_examples=200)
@given(_expr_trees)
def test_pretty_parse_round_trip(tree):
    assert parse(pretty(tree)) == tree


@settings(max_examples=200)
@given(_expr_trees, st.lists(
    st.floats(min_value=-100.0, max_value=100.0),
    min_size=len(FEATURES), max_size=len(FEATURES),
))
def test_evaluation_is_total(tree, values):
    feats = dict(zip(FEATURES, values))
    out = evaluate(tree, feats)
    assert isinstance(out, float)
    assert math.isfinite(out)


class _Zeros(dict):
    def __missing__(self, key):
        return 0.0


@settings(max_examples=300)
@given(st.text(max_size=80))
def test_parser_never_raises_unexpected(text):
    try:
        tree = parse(text)
    except ParseError:
        return
    assert math.isfinite(evaluate(tree, _Zeros()))
