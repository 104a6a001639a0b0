"""Brute-force reference: the full many-body master equation for tiny chains.

Fermions are realized by Jordan-Wigner strings on ``(C^2)^{(x) L}`` with the
single-site basis ``(empty, occupied)``:

    c_i = Z (x) ... (x) Z (x) a (x) 1 (x) ... (x) 1,   a = |empty><occupied|,

with ``Z = diag(1, -1)`` on the sites left of ``i``.  Superoperators act on
row-major ``vec(rho)``, where ``vec(A rho B) = (A (x) B^T) vec(rho)``.

The generator conserves ``N_ket - N_bra``, so the steady state lives in the
block of operators with equal particle number on both sides.  Uniqueness is
checked from the two smallest singular values over all blocks.
"""

import numpy as np

from .errors import NonUniqueSteadyState, SizeTooLarge
from .models import ChainSpec, DriveSpec, build_hamiltonian

MAX_SITES = 6
NULLITY_GAP = 1e6

_A = np.array([[0.0, 1.0], [0.0, 0.0]])
_Z = np.diag([1.0, -1.0])
_I2 = np.eye(2)


def annihilators(L):
    """Jordan-Wigner ``c_1..c_L`` as dense ``2^L x 2^L`` matrices."""
    ops = []
    for i in range(L):
        factors = [_Z] * i + [_A] + [_I2] * (L - i - 1)
        op = np.array([[1.0]])
        for f in factors:
            op = np.kron(op, f)
        ops.append(op)
    return ops


def particle_numbers(L):
    """Occupation count of each computational basis state."""
    idx = np.arange(2 ** L)
    return np.array([bin(k).count("1") for k in idx])


def many_body_hamiltonian(h, cs):
    H = np.zeros_like(cs[0], dtype=complex)
    for i, ci in enumerate(cs):
        for j, cj in enumerate(cs):
            if h[i, j] != 0:
                H += h[i, j] * (ci.T @ cj)
    return H


def _dissipator(Lk, eye):
    LdL = Lk.conj().T @ Lk
    return np.kron(Lk, Lk.conj()) - 0.5 * np.kron(LdL, eye) - 0.5 * np.kron(eye, LdL.T)


def liouvillian_from_hamiltonian(h, drive: DriveSpec):
    """Dense generator for single-particle Hamiltonian ``h`` (``L x L``).

    For ``L = 1`` only the first bath (``gamma``, ``f1``) is attached.
    """
    h = np.atleast_2d(np.asarray(h, dtype=float))
    L = h.shape[0]
    if L > MAX_SITES:
        raise SizeTooLarge(f"dense generator limited to L <= {MAX_SITES}, got {L}")
    cs = annihilators(L)
    d = 2 ** L
    eye = np.eye(d)
    H = many_body_hamiltonian(h, cs)
    gen = -1j * (np.kron(H, eye) - np.kron(eye, H.T))
    g = drive.gamma
    baths = [(cs[0], drive.f1)]
    if L > 1:
        baths.append((cs[-1], drive.fL))
    for c, f in baths:
        if f < 1:
            gen += _dissipator(np.sqrt(g * (1 - f)) * c, eye)
        if f > 0:
            gen += _dissipator(np.sqrt(g * f) * c.T, eye)
    if drive.Gamma > 0:
        for c in cs:
            gen += _dissipator(np.sqrt(drive.Gamma) * (c.T @ c), eye)
    return gen


def build_liouvillian(spec: ChainSpec, drive: DriveSpec):
    if spec.L > MAX_SITES:
        raise SizeTooLarge(f"dense generator limited to L <= {MAX_SITES}, got {spec.L}")
    return liouvillian_from_hamiltonian(build_hamiltonian(spec), drive)


def _charge_blocks(L):
    n = particle_numbers(L)
    q = (n[:, None] - n[None, :]).ravel()
    return {int(v): np.flatnonzero(q == v) for v in np.unique(q)}


def steady_state_dense(gen, *, gap=NULLITY_GAP):
    """Unique ``rho`` with ``gen @ vec(rho) = 0``, unit trace, hermitized."""
    D = gen.shape[0]
    d = int(round(np.sqrt(D)))
    L = int(round(np.log2(d)))
    smallest = []
    rho_vec = None
    for q, idx in _charge_blocks(L).items():
        block = gen[np.ix_(idx, idx)]
        if q == 0:
            _, s, vh = np.linalg.svd(block)
            rho_vec = np.zeros(D, dtype=complex)
            rho_vec[idx] = vh[-1].conj()
        else:
            s = np.linalg.svd(block, compute_uv=False)
        smallest.extend(s[-2:])
    smallest = np.sort(np.asarray(smallest))
    floor = max(smallest[0], np.finfo(float).tiny)
    if smallest[1] / floor < gap:
        raise NonUniqueSteadyState(
            f"singular value gap {smallest[1] / floor:.3e} below {gap:.0e}")
    rho = rho_vec.reshape(d, d)
    rho = rho / np.trace(rho)
    return 0.5 * (rho + rho.conj().T)


def covariance_from_density(rho):
    """``C_ij = tr(rho c_j^dag c_i)``."""
    rho = np.asarray(rho)
    L = int(round(np.log2(rho.shape[0])))
    cs = annihilators(L)
    C = np.empty((L, L), dtype=complex)
    for i in range(L):
        for j in range(L):
            C[i, j] = np.trace(rho @ (cs[j].T @ cs[i]))
    return C


def generator_residual(gen, rho):
    return float(np.abs(gen @ np.asarray(rho).ravel()).max())


def oracle_covariance(spec: ChainSpec, drive: DriveSpec):
    """Covariance matrix of the exact steady state, plus the null-space residual."""
    gen = build_liouvillian(spec, drive)
    rho = steady_state_dense(gen)
    return covariance_from_density(rho), generator_residual(gen, rho)
