import numpy as np
import pytest
from scipy.optimize import rosen, rosen_der

from abbrevtag.crf import OptimizationError, minimize_owlqn, pseudo_gradient


def quadratic(a, b):
    def fun(x):
        return 0.5 * float(a @ (x - b) ** 2), a * (x - b)

    return fun


def test_soft_threshold_solution():
    rng = np.random.default_rng(0)
    a = rng.uniform(0.5, 3.0, size=12)
    b = rng.normal(scale=2.0, size=12)
    c1 = 0.7
    res = minimize_owlqn(quadratic(a, b), np.zeros(12), c1=c1, max_iterations=500, tol=1e-14, epsilon=1e-12)
    expected = np.sign(b) * np.maximum(np.abs(b) - c1 / a, 0.0)
    np.testing.assert_allclose(res.x, expected, atol=1e-6)
    # exact zeros where the threshold wins
    assert np.all(res.x[expected == 0] == 0.0)


def test_smooth_problem_matches_reference():
    res = minimize_owlqn(lambda x: (rosen(x), rosen_der(x)), np.full(4, -1.0), max_iterations=500, tol=1e-15, epsilon=1e-10)
    np.testing.assert_allclose(res.x, np.ones(4), atol=1e-4)


def test_history_is_monotone():
    rng = np.random.default_rng(1)
    a, b = rng.uniform(1, 2, 8), rng.normal(size=8)
    res = minimize_owlqn(quadratic(a, b), np.zeros(8), c1=0.1, max_iterations=30)
    assert all(y <= x for x, y in zip(res.history, res.history[1:]))
    assert res.n_iter == len(res.history) - 1


def test_max_iterations_respected():
    res = minimize_owlqn(lambda x: (rosen(x), rosen_der(x)), np.zeros(5), max_iterations=3, tol=0)
    assert res.n_iter == 3
    assert res.status == "max_iterations"


def test_gradient_stop_at_optimum():
    res = minimize_owlqn(quadratic(np.ones(3), np.zeros(3)), np.zeros(3))
    assert res.n_iter == 0 and res.status == "gradient_tolerance"


def test_pseudo_gradient_cases():
    x = np.array([0.0, 0.0, 0.0, 1.0, -1.0])
    g = np.array([2.0, -2.0, 0.5, 0.5, 0.5])
    pg = pseudo_gradient(x, g, 1.0)
    np.testing.assert_allclose(pg, [1.0, -1.0, 0.0, 1.5, -0.5])


def test_nonfinite_start_raises():
    with pytest.raises(OptimizationError):
        minimize_owlqn(lambda x: (np.inf, x), np.zeros(2))


def test_argument_validation():
    with pytest.raises(ValueError):
        minimize_owlqn(quadratic(np.ones(1), np.ones(1)), np.zeros(1), c1=-1)
    with pytest.raises(ValueError):
        minimize_owlqn(quadratic(np.ones(1), np.ones(1)), np.zeros(1), max_iterations=0)
