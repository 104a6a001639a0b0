import numpy as np
import pytest

from qptransport.errors import NonUniqueSteadyState, SizeTooLarge
from qptransport.models import AAH, ChainSpec, Clean, DriveSpec, Fibonacci
from qptransport.oracle import (annihilators, build_liouvillian, covariance_from_density,
                                generator_residual, liouvillian_from_hamiltonian, oracle_covariance,
                                particle_numbers, steady_state_dense)
from qptransport.solver import extract_currents


def test_jordan_wigner_operators_anticommute():
    cs = annihilators(3)
    for i, a in enumerate(cs):
        for j, b in enumerate(cs):
            assert np.allclose(a @ b + b @ a, 0)
            assert np.allclose(a @ b.T + b.T @ a, np.eye(8) * (i == j))


@pytest.mark.parametrize("f", [0.0, 0.3, 1.0])
def test_single_site_relaxes_to_bath_occupation(f):
    gen = liouvillian_from_hamiltonian(np.zeros((1, 1)), DriveSpec(gamma=1.0, f1=f))
    rho = steady_state_dense(gen)
    assert np.allclose(rho, np.diag([1 - f, f]), atol=1e-12)


def test_generator_preserves_trace():
    gen = build_liouvillian(ChainSpec(3, 1.0, AAH(0.2)), DriveSpec(Gamma=0.4, f1=0.7, fL=0.2))
    d = 8
    trace_row = np.eye(d).ravel()
    assert np.abs(trace_row @ gen).max() <= 1e-12


def test_symmetric_driving_gives_half_filling():
    C, _ = oracle_covariance(ChainSpec(2, 0.0, Clean()), DriveSpec(f1=0.5, fL=0.5))
    assert C[0, 0].real == pytest.approx(0.5, abs=1e-12)
    assert C[1, 1].real == pytest.approx(0.5, abs=1e-12)


def test_vacuum_and_full_states():
    L = 3
    vac = np.zeros((8, 8))
    vac[0, 0] = 1
    full = np.zeros((8, 8))
    full[7, 7] = 1
    assert np.allclose(covariance_from_density(vac), 0)
    assert np.allclose(covariance_from_density(full), np.eye(L))


def test_dephasing_does_not_change_particle_number_flow():
    spec = ChainSpec(3, 0.7, AAH(1.1))
    rng = np.random.default_rng(5)
    X = rng.normal(size=(8, 8)) + 1j * rng.normal(size=(8, 8))
    rho = X @ X.conj().T
    rho /= np.trace(rho)
    N = np.diag(particle_numbers(3)).astype(float)
    rates = []
    for Gamma in (0.0, 0.9):
        gen = build_liouvillian(spec, DriveSpec(Gamma=Gamma))
        drho = (gen @ rho.ravel()).reshape(8, 8)
        rates.append(np.trace(N @ drho))
    assert rates[0] == pytest.approx(rates[1], abs=1e-12)


@pytest.mark.parametrize("Gamma", [0.0, 0.5])
def test_oracle_currents_are_homogeneous(Gamma):
    C, res = oracle_covariance(ChainSpec(4, 1.3, Fibonacci()), DriveSpec(Gamma=Gamma, f1=0.8, fL=0.1))
    J, mean = extract_currents(C)
    assert np.abs(J - mean).max() <= 1e-10
    assert mean > 0
    assert res <= 1e-11


def test_random_steady_state_is_physical():
    C, _ = oracle_covariance(ChainSpec(3, 1.9, AAH(4.0)), DriveSpec(gamma=1.7, f1=0.35, fL=0.8, Gamma=1.0))
    assert np.allclose(C, C.conj().T, atol=1e-12)
    ev = np.linalg.eigvalsh(C)
    assert ev.min() >= -1e-10 and ev.max() <= 1 + 1e-10


def test_density_matrix_is_valid():
    gen = build_liouvillian(ChainSpec(3, 0.5, AAH(0.0)), DriveSpec(Gamma=0.1))
    rho = steady_state_dense(gen)
    assert np.trace(rho) == pytest.approx(1.0)
    assert np.allclose(rho, rho.conj().T)
    assert np.linalg.eigvalsh(rho).min() >= -1e-10
    assert generator_residual(gen, rho) <= 1e-11


def test_size_guardrail():
    with pytest.raises(SizeTooLarge):
        build_liouvillian(ChainSpec(7), DriveSpec())


def test_degenerate_null_space_rejected():
    with pytest.raises(NonUniqueSteadyState):
        steady_state_dense(np.zeros((16, 16), dtype=complex))
