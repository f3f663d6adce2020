"""Expression language: grammar, precedence, vectorization, errors."""

import math

import numpy as np
import pytest

from crackdyn import Expression, ExpressionError, parse_expression


def ev(src, **kw):
    return float(Expression(src)(**kw))


class TestGrammar:
    def test_literals_and_arithmetic(self):
        assert ev("2") == 2.0
        assert ev("2+3*4") == 14.0
        assert ev("(2+3)*4") == 20.0
        assert ev("7-3-2") == 2.0          # left-associative
        assert ev("8/4/2") == 1.0

    def test_power_binds_tightest_and_right_assoc(self):
        assert ev("2^3^2") == 512.0
        assert ev("2*3^2") == 18.0
        assert ev("-2^2") == -4.0          # unary minus outside the power
        assert ev("2^-2") == 0.25          # signed exponent
        assert ev("(-2)^2") == 4.0

    def test_unary_plus_and_minus(self):
        assert ev("--3") == 3.0
        assert ev("+5") == 5.0
        assert ev("-x", x=2.0) == -2.0

    def test_number_formats(self):
        assert ev("1e3") == 1000.0
        assert ev("1.5e-2") == 0.015
        assert ev(".5") == 0.5
        assert ev("2.") == 2.0
        assert ev("1e+3") == 1000.0

    def test_constants_and_functions(self):
        assert ev("pi") == pytest.approx(math.pi)
        assert ev("e") == pytest.approx(math.e)
        assert ev("sin(pi/2)") == pytest.approx(1.0)
        assert ev("cos(0)") == 1.0
        assert ev("exp(1)") == pytest.approx(math.e)

    def test_bare_e_after_number_is_trailing_input(self):
        # "2e" is the literal 2 followed by the constant e, not a number
        with pytest.raises(ExpressionError):
            Expression("2e")

    def test_variables_default_to_zero(self):
        expr = Expression("x + 2*y + 3*t")
        assert float(expr()) == 0.0
        assert float(expr(x=1.0)) == 1.0
        assert float(expr(x=1.0, y=1.0, t=1.0)) == 6.0

    def test_vectorized_broadcast(self):
        expr = Expression("sin(pi*x)*cos(t)")
        x = np.linspace(0.0, 1.0, 11)
        out = expr(x=x, t=0.5)
        assert out.shape == x.shape
        np.testing.assert_allclose(out, np.sin(np.pi * x) * np.cos(0.5),
                                   rtol=0, atol=1e-15)

    def test_is_zero(self):
        assert Expression("0").is_zero()
        assert Expression("0.0").is_zero()
        assert Expression("-0").is_zero()
        assert not Expression("0*x").is_zero()   # syntactic check only
        assert not Expression("1").is_zero()

    def test_parse_expression_helper(self):
        assert isinstance(parse_expression("x+1"), Expression)


class TestErrors:
    @pytest.mark.parametrize("src", [
        "", "  ", "1 +", "sin", "sin 1", "(1", "1)", "1 2", "foo",
        "x & y", "sin()", "*3",
    ])
    def test_rejects(self, src):
        with pytest.raises(ExpressionError):
            Expression(src)

    def test_error_carries_position(self):
        with pytest.raises(ExpressionError) as info:
            Expression("1 + foo")
        assert info.value.pos == 4
        assert "column 5" in str(info.value)

    def test_unknown_function_named(self):
        with pytest.raises(ExpressionError, match="tan"):
            Expression("tan(x)")


def _random_source(rng, depth):
    """Random expression with a straightforward independent meaning."""
    if depth == 0:
        kind = rng.integers(0, 3)
        if kind == 0:
            return format(rng.uniform(-3.0, 3.0), ".6g")
        return rng.choice(["x", "y", "t"])
    a = _random_source(rng, depth - 1)
    b = _random_source(rng, depth - 1)
    op = rng.choice(["+", "-", "*", "sin", "cos", "exp", "neg", "pow"])
    if op in "+-*":
        return f"({a}){op}({b})"
    if op == "neg":
        return f"-({a})"
    if op == "pow":
        return f"({a})^{int(rng.integers(0, 4))}"
    if op == "exp":
        return f"exp(sin({a}))"           # keep the magnitude bounded
    return f"{op}({a})"


def test_random_expressions_match_python_eval(rng):
    """Seeded property check against an independent evaluation route."""
    env_fns = {"sin": math.sin, "cos": math.cos, "exp": math.exp,
               "pi": math.pi, "e": math.e}
    for _ in range(60):
        src = _random_source(rng, int(rng.integers(1, 4)))
        expr = Expression(src)
        for _ in range(3):
            x, y, t = rng.uniform(-2.0, 2.0, size=3)
            want = eval(src.replace("^", "**"), {"__builtins__": {}},
                        dict(env_fns, x=x, y=y, t=t))
            got = float(expr(x=x, y=y, t=t))
            assert got == pytest.approx(want, rel=1e-12, abs=1e-12), src
