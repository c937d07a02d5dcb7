import pytest
import numpy as np
from extrema.expressions import parse, build_gradient_system
from extrema.hessian import *
from extrema.errors import DimensionMismatch

rng = np.random.default_rng(99)
QUARTIC = build_gradient_system(parse('x1^2 + x2^4', 2))


def test_degenerate_minimum_is_inconclusive():
    report = hessian_verdict(QUARTIC, [0, 0])
    assert np.array_equal(report.matrix, [[2, 0], [0, 0]])
    assert report.minors == (2, 0)
    assert report.eigen_signs == 'has-zero-within-tolerance'
    assert report.verdict == 'Inconclusive-or-Saddle'
    assert report.eigenvalues == (0, 2)
    assert baseline_agrees(report, 'Minimum') is None


def test_perturbed_point_flips_the_verdict():
    delta = 1e-4
    report = hessian_verdict(QUARTIC, [0, delta], zero_tol=1e-12)
    assert report.verdict == 'Minimum'
    # H22 = 12 delta^2, while the quoted product-form value is 2 delta^2; both exceed zero_tol
    assert np.isclose(report.matrix[1, 1], 12 * delta ** 2)
    assert np.isclose(report.conditions[2], 2 * 12 * delta ** 2)
    assert 2 * delta ** 2 > 1e-12
    print(f'H22 = 12 delta^2 = {12 * delta ** 2!r}; 2 delta^2 = {2 * delta ** 2!r}')
    assert hessian_verdict(QUARTIC, [0, delta], zero_tol=1e-6).verdict == 'Inconclusive-or-Saddle'


def test_definite_cases():
    report = hessian_verdict(build_gradient_system(parse('x1^2 + x2^2', 2)), [0, 0])
    assert report.minors == (2, 4)
    assert report.verdict == 'Minimum'
    assert report.eigen_signs == 'all-positive'
    report = hessian_verdict(build_gradient_system(parse('-x1^2 - x2^2 - x3^2', 3)), [0, 0, 0])
    assert report.minors == (-2, 4, -8)
    assert report.verdict == 'Maximum'
    assert report.conditions is None
    report = hessian_verdict(build_gradient_system(parse('x1^2 - x2^2', 2)), [0, 0])
    assert report.eigen_signs == 'mixed'
    assert report.verdict == 'Inconclusive-or-Saddle'


def test_sylvester():
    assert sylvester([1, 2, 3], 1e-9) == ('all-positive', 'Minimum')
    assert sylvester([-1, 2, -3], 1e-9) == ('all-negative', 'Maximum')
    assert sylvester([1, -2], 1e-9) == ('mixed', 'Inconclusive-or-Saddle')
    assert sylvester([1, 1e-10], 1e-9) == ('has-zero-within-tolerance', 'Inconclusive-or-Saddle')


def test_leading_minors_are_exact():
    m = np.array([[0.0, 1.0, 2.0], [1.0, 0.0, 3.0], [2.0, 3.0, 1.0]])
    assert leading_minors(m) == (0, -1, 11)


def test_random_2x2_agree_with_eigenvalues():
    for _ in range(1000):
        a, b, d = rng.uniform(-5, 5, size=3)
        m = np.array([[a, b], [b, d]])
        low, high = eigenvalues_2x2(m)
        assert np.allclose([low, high], np.linalg.eigvalsh(m), atol=1e-9)
        signs, verdict = sylvester(leading_minors(m), 1e-9)
        if low > 1e-3:
            assert verdict == 'Minimum'
        elif high < -1e-3:
            assert verdict == 'Maximum'
        elif low < -1e-3 and high > 1e-3:
            assert verdict == 'Inconclusive-or-Saddle'


def test_baseline_agrees():
    report = hessian_verdict(build_gradient_system(parse('x1^2 + x2^2', 2)), [0, 0])
    assert baseline_agrees(report, 'Minimum') is True
    assert baseline_agrees(report, 'Saddle') is False


def test_invalid_arguments():
    with pytest.raises(DimensionMismatch):
        hessian_verdict(QUARTIC, [0, 0, 0])
    with pytest.raises(ValueError):
        hessian_verdict(QUARTIC, [0, 0], zero_tol=-1)
