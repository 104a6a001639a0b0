import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qptransport.models import (AAH, GOLDEN_RATIO, ChainSpec, Clean, DriveSpec, Fibonacci, aah_potential,
                                build_drift_and_injection, build_hamiltonian, fibonacci_potential,
                                fibonacci_word_recursive, potential_kind, site_potential, theta_grid)

# 2 cos(2 pi g i + theta) evaluated with mpmath at 40 digits
AAH_REFERENCE = [
    (1, 0.0, -1.474737756156639803),
    (2, 0.0, 0.17485144943392079929),
    (3, 0.0, 1.2168777219577232766),
    (1, 0.3, -1.0096287276318692453),
    (10, 1.0, -1.066288283688544235),
]


def fib(n):
    a, b = 1, 1
    for _ in range(n - 1):
        a, b = b, a + b
    return a


@pytest.mark.parametrize("i, theta, expected", AAH_REFERENCE)
def test_aah_matches_high_precision_reference(i, theta, expected):
    assert aah_potential(i, theta) == pytest.approx(expected, abs=1e-13)


def test_aah_first_site_is_two_cos_two_pi_golden():
    assert aah_potential(1) == pytest.approx(2 * math.cos(2 * math.pi * GOLDEN_RATIO), abs=1e-15)


def test_fibonacci_first_digits():
    assert list(fibonacci_potential(np.arange(1, 9))) == [0, 1, 0, 0, 1, 0, 1, 0]


def test_site_indices_start_at_one():
    with pytest.raises(ValueError):
        aah_potential(0)
    with pytest.raises(ValueError):
        fibonacci_potential(0)


def test_recursive_words():
    assert [fibonacci_word_recursive(n) for n in range(5)] == ["0", "01", "010", "01001", "01001010"]


@pytest.mark.parametrize("n", range(17))
def test_recursion_matches_formula(n):
    word = fibonacci_word_recursive(n)
    digits = "".join(map(str, fibonacci_potential(np.arange(1, len(word) + 1))))
    assert word == digits


def test_each_word_prefixes_the_next():
    for n in range(15):
        assert fibonacci_word_recursive(n + 1).startswith(fibonacci_word_recursive(n))


def test_word_lengths_are_fibonacci_numbers():
    # F_1 = F_2 = 1 indexing
    for n in range(21):
        assert len(fibonacci_word_recursive(n)) == fib(n + 2)


def test_formula_matches_recursion_up_to_1e5_sites():
    word = fibonacci_word_recursive(26)
    L = 100_000
    assert len(word) >= L
    digits = fibonacci_potential(np.arange(1, L + 1))
    assert np.array_equal(digits, np.frombuffer(word[:L].encode(), dtype=np.uint8) - ord("0"))


def test_theta_reduced_to_principal_range():
    assert AAH(2 * math.pi + 0.5).theta == pytest.approx(0.5)
    assert AAH(-0.5).theta == pytest.approx(2 * math.pi - 0.5)
    with pytest.raises(ValueError):
        AAH(float("nan"))


def test_potential_kind_parsing():
    assert isinstance(potential_kind("clean"), Clean)
    assert isinstance(potential_kind("Fibonacci"), Fibonacci)
    assert potential_kind("aah", 0.3).theta == pytest.approx(0.3)
    with pytest.raises(ValueError):
        potential_kind("fibonacci", 0.3)
    with pytest.raises(ValueError):
        potential_kind("anderson")


@pytest.mark.parametrize("kwargs", [dict(L=1), dict(L=2.5), dict(L=5, lam=-1), dict(L=5, lam=float("inf"))])
def test_chain_spec_rejects_bad_input(kwargs):
    with pytest.raises(ValueError):
        ChainSpec(**kwargs)


@pytest.mark.parametrize("kwargs", [dict(gamma=0), dict(f1=1.5), dict(fL=-0.1), dict(Gamma=-1)])
def test_drive_spec_rejects_bad_input(kwargs):
    with pytest.raises(ValueError):
        DriveSpec(**kwargs)


def test_hamiltonian_structure():
    spec = ChainSpec(6, 2.0, Fibonacci())
    h = build_hamiltonian(spec)
    assert np.allclose(h, h.T)
    assert np.all(np.diag(h, 1) == -1.0)
    assert np.allclose(np.diag(h), 2.0 * fibonacci_potential(np.arange(1, 7)))
    assert np.count_nonzero(np.triu(h, 2)) == 0


def test_drift_and_injection():
    spec = ChainSpec(4, 1.0, AAH(0.2))
    drive = DriveSpec(gamma=0.8, f1=0.9, fL=0.2)
    W, F = build_drift_and_injection(spec, drive)
    h = build_hamiltonian(spec)
    damping = np.zeros((4, 4))
    damping[0, 0] = damping[3, 3] = 0.4
    assert np.allclose(W, 1j * h + damping)
    assert np.allclose(F, np.diag([0.72, 0, 0, 0.16]))


def test_theta_grid_half_open():
    grid = theta_grid(4)
    assert np.allclose(grid, [0, math.pi / 4, math.pi / 2, 3 * math.pi / 4])
    assert theta_grid(1).tolist() == [0.0]
    with pytest.raises(ValueError):
        theta_grid(0)


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 10_000), st.floats(-20, 20))
def test_aah_bounded_and_periodic_in_theta(i, theta):
    v = aah_potential(i, theta)
    assert -2.0 <= v <= 2.0
    assert aah_potential(i, theta + 2 * math.pi) == pytest.approx(v, abs=1e-9)


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 400))
def test_site_potential_lengths_and_values(L):
    assert site_potential(Clean(), L).shape == (L,)
    fv = site_potential(Fibonacci(), L)
    assert set(np.unique(fv)) <= {0.0, 1.0}
