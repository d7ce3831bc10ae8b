import math

import numpy as np
import pytest

from stefanctl.expr import ExpressionError, compile_field


def test_precedence_and_unary():
    fn = compile_field("1 + 2*3 - -4/2", 1)
    assert float(fn([np.array(0.0)], 0.0)) == 9.0


def test_coordinates_time_and_functions():
    fn = compile_field("sin(pi*x1)*exp(-t) + cos(x2)", 2)
    x = [np.array([0.5, 0.25]), np.array([0.0, 1.0])]
    expected = np.sin(np.pi * x[0]) * math.exp(-0.3) + np.cos(x[1])
    np.testing.assert_allclose(fn(x, 0.3), expected, rtol=1e-15)


def test_constants_broadcast_to_grid_shape():
    fn = compile_field(2.5, 2)
    out = fn([np.zeros((3, 4)), np.zeros((3, 4))], 0.0)
    assert out.shape == (3, 4) and np.all(out == 2.5)


def test_spatial_fields_take_x_only():
    fn = compile_field("x1*x1", 1, spatial=True)
    np.testing.assert_array_equal(fn([np.array([1.0, 3.0])]), [1.0, 9.0])
    with pytest.raises(ExpressionError):
        compile_field("t", 1, spatial=True)


def test_unicode_minus_is_accepted():
    assert float(compile_field("2 − 3", 1)([np.array(0.0)], 0.0)) == -1.0


@pytest.mark.parametrize("bad", ["x3", "sin(", "1 +", "foo(1)", "2 ** 3", "import os", "(1"])
def test_malformed_expressions_are_rejected(bad):
    with pytest.raises(ExpressionError):
        compile_field(bad, 2)


def test_non_string_sources_are_rejected():
    with pytest.raises(ExpressionError):
        compile_field([1, 2], 1)
