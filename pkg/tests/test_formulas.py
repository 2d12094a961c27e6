"""Formula parsing, term expansion, and rendering round trips."""

import pytest

from jointgibbs.errors import FormulaError
from jointgibbs.formulas import (
    Comparison,
    SurvivalResponse,
    Variable,
    expand_terms,
    parse_formula,
    render_formula,
    term_dependencies,
)


def names(ast):
    return [t.name for t in expand_terms(ast.fixed)]


class TestExpansion:
    def test_star_expands_to_mains_plus_interaction(self):
        ast = parse_formula("y ~ a*b")
        assert names(ast) == ["a", "b", "a:b"]
        assert ast.intercept

    def test_star_distributes_over_sum(self):
        ast = parse_formula("y ~ gender * (age + smoke + creat)")
        assert names(ast) == [
            "gender",
            "age",
            "smoke",
            "creat",
            "age:gender",
            "gender:smoke",
            "creat:gender",
        ]

    def test_cube_power_gives_all_subsets_up_to_degree_three(self):
        ast = parse_formula("y ~ (a + b + c)^3")
        assert names(ast) == ["a", "b", "c", "a:b", "a:c", "b:c", "a:b:c"]

    def test_square_power(self):
        ast = parse_formula("y ~ (a + b)^2")
        assert names(ast) == ["a", "b", "a:b"]

    def test_colon_is_a_single_interaction(self):
        ast = parse_formula("y ~ a:b:c")
        assert names(ast) == ["a:b:c"]

    def test_minus_removes_a_term(self):
        ast = parse_formula("y ~ a*b - a:b")
        assert names(ast) == ["a", "b"]

    def test_interaction_order_is_canonical(self):
        left = parse_formula("y ~ a*b")
        right = parse_formula("y ~ b*a")
        assert set(names(left)) == set(names(right))
        assert expand_terms(left.fixed)[2] == expand_terms(right.fixed)[2]

    def test_colon_commutes(self):
        assert names(parse_formula("y ~ b:a")) == ["a:b"]

    def test_duplicate_factor_collapses(self):
        assert names(parse_formula("y ~ a:a")) == ["a"]

    def test_mains_keep_formula_order_interactions_sorted_by_degree(self):
        ast = parse_formula("y ~ c + a:b:d + a*b")
        assert names(ast) == ["c", "a", "b", "a:b", "a:b:d"]

    def test_function_terms_are_single_factors(self):
        ast = parse_formula("y ~ log(uricacid) + I(WC^2) + abs(bili - creat)")
        assert names(ast) == ["log(uricacid)", "I(WC^2)", "abs(bili - creat)"]

    def test_nested_function_arithmetic(self):
        ast = parse_formula("y ~ sqrt(exp(creat)/2)")
        assert names(ast) == ["sqrt(exp(creat)/2)"]

    def test_intercept_removal_via_zero(self):
        assert not parse_formula("y ~ 0 + x").intercept

    def test_intercept_removal_via_minus_one(self):
        assert not parse_formula("y ~ x - 1").intercept

    def test_intercept_only_model(self):
        ast = parse_formula("y ~ 1")
        assert ast.fixed is None and ast.intercept


class TestRandomParts:
    def test_intercept_only_part(self):
        ast = parse_formula("y ~ x + (1 | id)")
        assert len(ast.random_parts) == 1
        part = ast.random_parts[0]
        assert part.group == "id"
        assert part.intercept and part.terms is None

    def test_slope_part(self):
        ast = parse_formula("bmi ~ time + age + (time | ID)")
        part = ast.random_parts[0]
        assert part.group == "ID"
        assert [t.name for t in expand_terms(part.terms)] == ["time"]
        assert part.intercept

    def test_part_without_intercept(self):
        ast = parse_formula("y ~ x + (0 + time | id)")
        assert not ast.random_parts[0].intercept

    def test_two_parts_parse(self):
        ast = parse_formula("y ~ x + (1 | id) + (1 | center)")
        assert [p.group for p in ast.random_parts] == ["id", "center"]


class TestSurvivalResponse:
    def test_comparison_event(self):
        ast = parse_formula('Surv(futime, status != "alive") ~ age + sex')
        resp = ast.response
        assert isinstance(resp, SurvivalResponse)
        assert resp.time == Variable("futime")
        assert resp.event == Comparison("!=", Variable("status"), "alive")

    def test_plain_event_variable(self):
        ast = parse_formula("Surv(time, death) ~ x")
        assert ast.response.event == Variable("death")

    def test_dependencies_include_time_and_event(self):
        ast = parse_formula('Surv(futime, status == "dead") ~ age')
        assert term_dependencies(ast.response) == {"futime", "status"}


class TestDependencies:
    def test_arithmetic_term(self):
        ast = parse_formula("y ~ I(creat/albu^2)")
        assert term_dependencies(expand_terms(ast.fixed)[0]) == {"creat", "albu"}

    def test_interaction_term(self):
        ast = parse_formula("y ~ gender:log(bili)")
        assert term_dependencies(expand_terms(ast.fixed)[0]) == {"gender", "bili"}

    def test_whole_formula(self):
        ast = parse_formula("y ~ a + log(b) + (time | id)")
        assert term_dependencies(ast) == {"y", "a", "b", "time", "id"}


ROUND_TRIP_CASES = [
    "y ~ a*b",
    "y ~ a + b + a:b",
    "y ~ gender * (age + smoke)",
    "y ~ (a + b + c)^3",
    "y ~ 0 + x + I(x^2)",
    "y ~ log(uricacid) + abs(bili - creat)",
    "y ~ sqrt(exp(creat)/2) + I(-x + 2)",
    "bmi ~ time + age + (time | ID)",
    "y ~ x + (0 + time | id)",
    'Surv(futime, status != "alive") ~ age + sex',
    "Surv(time, death) ~ x + I(x/2)",
    "~ educ + I(WC^2)",
    "y ~ 1",
    "y ~ I(a*b - c/d^2)",
]


@pytest.mark.parametrize("text", ROUND_TRIP_CASES)
def test_render_round_trip(text):
    ast = parse_formula(text, one_sided_ok=True)
    rendered = render_formula(ast)
    assert parse_formula(rendered, one_sided_ok=True) == ast


def test_whitespace_is_irrelevant():
    assert parse_formula("y~a*b+log( x )") == parse_formula("y ~ a * b + log(x)")


class TestErrors:
    @pytest.mark.parametrize(
        "bad",
        [
            "y ~ x | z",
            "y ~ (a + b",
            "y ~ a ^ 2.5",
            "y ~ a ^ 0",
            "y ~ 2 + x",
            "y ~ ns(x, 3)",
            "y ~ x + Surv(a, b)",
            "",
            "   ",
            "y ~",
            "log(y) ~ x",
        ],
    )
    def test_rejects(self, bad):
        with pytest.raises(FormulaError):
            parse_formula(bad)

    def test_one_sided_requires_opt_in(self):
        with pytest.raises(FormulaError):
            parse_formula("~ x")
        assert parse_formula("~ x", one_sided_ok=True).response is None

    def test_error_carries_position(self):
        with pytest.raises(FormulaError) as err:
            parse_formula("y ~ a ^ 2.5")
        assert err.value.position == 8

    def test_unknown_function_allowed_when_not_strict(self):
        ast = parse_formula("y ~ ns(x, 3)", strict=False)
        assert names(ast) == ["ns(x, 3)"]
