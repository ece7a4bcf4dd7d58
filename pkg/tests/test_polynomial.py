import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from slagflow.errors import BranchStep, DegenerateRoots
from slagflow.polynomial import ComplexPoly, branch_power, eval_with_derivative, find_roots


def test_eval_with_derivative_examples(p_pair):
    assert eval_with_derivative(p_pair, 0) == (-1, 0)
    assert eval_with_derivative(p_pair, 1) == (0, 2)
    cubic = ComplexPoly((0, -1, 0, 1))
    assert eval_with_derivative(cubic, 2) == (6, 11)


def test_find_roots_cubic():
    roots = find_roots([0, -1, 0, 1])
    np.testing.assert_allclose(roots, [-1, 0, 1], atol=1e-12)


def test_double_root_rejected():
    with pytest.raises(DegenerateRoots):
        find_roots([1, -2, 1])


def test_roots_round_trip(rng):
    roots = rng.normal(size=5) + 1j * rng.normal(size=5)
    p = ComplexPoly.from_roots(roots)
    for r in roots:
        assert np.min(np.abs(p.root_array - r)) < 1e-9
    p.check()


@st.composite
def separated_roots(draw):
    deg = draw(st.integers(1, 8))
    pts = []
    while len(pts) < deg:
        z = complex(draw(st.floats(-3, 3)), draw(st.floats(-3, 3)))
        if all(abs(z - w) >= 0.1 for w in pts):
            pts.append(z)
    return pts


@settings(max_examples=60, deadline=None)
@given(separated_roots())
def test_find_roots_inverts_from_roots(roots):
    found = ComplexPoly.from_roots(roots).root_array
    for r in roots:
        assert np.min(np.abs(found - r)) < 1e-9


def test_sqrt_monodromy_around_zero():
    p = ComplexPoly((0, 1))
    loop = np.exp(1j * np.linspace(0, 2 * np.pi, 200))
    vals = branch_power(p, loop, 0.5)
    assert abs(vals[0] - 1) < 1e-15
    assert abs(vals[-1] + 1) < 1e-12


def test_principal_branch_without_enclosed_root(p_pair):
    path = np.linspace(2, 3, 50)
    vals = branch_power(p_pair, path, 0.5)
    np.testing.assert_allclose(vals, np.sqrt(path**2 - 1 + 0j), rtol=1e-14)


def test_integer_power_is_exact(p_pair, rng):
    path = np.cumsum(0.01 * (rng.normal(size=100) + 1j * rng.normal(size=100))) + 2j
    np.testing.assert_allclose(branch_power(p_pair, path, 1.0), p_pair(path), rtol=1e-13)


def test_branch_step_on_under_resolved_path():
    p = ComplexPoly((0, 1))
    with pytest.raises(BranchStep):
        branch_power(p, np.array([1, -1 + 0.1j]), 0.5)


@settings(max_examples=40, deadline=None)
@given(st.floats(-2, 2), st.floats(-2, 2), st.floats(0.2, 0.9))
def test_powers_multiply(alpha, beta, radius):
    p = ComplexPoly.from_roots([0.3, -0.4j])
    path = 1.5 + radius * np.exp(1j * np.linspace(0, 5, 300))
    a = branch_power(p, path, alpha)
    b = branch_power(p, path, beta)
    ab = branch_power(p, path, alpha + beta)
    np.testing.assert_allclose(a * b, ab, rtol=1e-12)


def test_refined_path_agrees(p_three):
    coarse = 0.5 + 1.2 * np.exp(1j * np.linspace(0, 2 * np.pi, 200))
    fine = 0.5 + 1.2 * np.exp(1j * np.linspace(0, 2 * np.pi, 399))
    a = branch_power(p_three, coarse, 0.5)
    b = branch_power(p_three, fine, 0.5)[::2]
    np.testing.assert_allclose(a, b, rtol=1e-12)
