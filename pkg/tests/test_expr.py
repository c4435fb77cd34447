import math

import numpy as np
import pytest

from tdlag.diffkernel import Jet
from tdlag.expr import ExpressionError, compile_expression, compile_vector


def test_arithmetic_and_params():
    f = compile_expression("0.5*y[0]**2 - k*x[0] + -t/2", 1, {"k": 2.0})
    assert f(1.0, [1.0], [2.0]) == pytest.approx(2.0 - 2.0 - 0.5)


def test_functions_and_pi():
    f = compile_expression("exp(t) * sin(x[0]) + cos(pi)", 1)
    assert f(0.0, [math.pi / 2], [0.0]) == pytest.approx(0.0)


def test_carries_jets():
    f = compile_expression("x[0]**3", 1)
    out = f(0.0, [Jet.variable(2.0, 0, 1)], [0.0])
    assert out.grad[0] == pytest.approx(12.0) and out.hess[0, 0] == pytest.approx(12.0)


def test_position_only_variables():
    f = compile_expression("x[0] + 2*x[1]", 2, variables=("x",))
    assert f([1.0, 1.0]) == 3.0
    with pytest.raises(ExpressionError):
        compile_expression("y[0]", 2, variables=("x",))


@pytest.mark.parametrize(
    "src",
    [
        "__import__('os')",
        "x.real",
        "x[5]",
        "x[i]",
        "tan(x[0])",
        "sin(x[0], 2)",
        "[1, 2]",
        "1 if t else 2",
        "q",
        "x[0] ==",
        "True",
    ],
)
def test_rejected(src):
    with pytest.raises(ExpressionError):
        compile_expression(src, 2)


def test_not_a_string():
    with pytest.raises(ExpressionError):
        compile_expression(3.0, 1)


def test_vector():
    f = compile_vector(["x[0]", "t * y[1]"], 2, 2)
    np.testing.assert_allclose(f(2.0, [1.0, 0.0], [0.0, 3.0]).astype(float), [1.0, 6.0])
    with pytest.raises(ExpressionError):
        compile_vector(["x[0]"], 2, 2)


def test_wrong_arity():
    with pytest.raises(TypeError):
        compile_expression("t", 1)(0.0)
