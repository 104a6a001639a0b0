"""Extended-precision eigendecomposition solve of ``W C + C W^dag = F``.

Used when the chain is so strongly localized that the damping rates
``Re w_k`` of bulk modes fall below double-precision resolution.  Works for
complex-symmetric tridiagonal ``W`` (the only drift matrices the models
produce):

1. eigenvalues from LAPACK are polished with simultaneous Aberth iterations
   on the characteristic polynomial, evaluated through its three-term
   continuant in arbitrary precision (python-flint ``acb``);
2. eigenvectors come from the same three-term recurrence, run inwards from
   both chain ends and joined at the mode's peak so that exponentially small
   tails keep their relative accuracy;
3. ``S^-1 = diag(1 / s_k^T s_k) S^T`` (bilinear orthogonality of a
   complex-symmetric eigenbasis), followed by the usual Cauchy division and
   two ``acb_mat`` products.

Working precision is ``96 + 2 * growth`` bits, where ``growth`` is the log2 of
the largest transfer-matrix amplification along the chain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from flint import acb, acb_mat, ctx

from .errors import NumericalBreakdown, SingularSystem

_ZERO = acb(0)


@dataclass
class ExtendedSolve:
    C: np.ndarray
    site_currents: np.ndarray
    boundary_in: float
    boundary_out: float
    bits: int
    min_damping: float


class _PrecisionExhausted(Exception):
    pass


def tridiagonal_bands(W: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(diag, offdiag)`` of a complex-symmetric tridiagonal matrix, else raise."""
    W = np.asarray(W)
    L = W.shape[0]
    diag = np.diagonal(W).copy()
    off = np.diagonal(W, 1).copy()
    if not np.array_equal(off, np.diagonal(W, -1)):
        raise NumericalBreakdown("extended-precision path needs a complex-symmetric drift matrix")
    band = np.abs(np.triu(W, 2)).sum() + np.abs(np.tril(W, -2)).sum() if L > 2 else 0.0
    if band != 0.0:
        raise NumericalBreakdown("extended-precision path needs a tridiagonal drift matrix")
    if np.any(off == 0):
        raise NumericalBreakdown("extended-precision path needs non-vanishing hoppings")
    return diag, off


def growth_bits(diag: np.ndarray, off: np.ndarray, energies: np.ndarray) -> float:
    """log2 of the largest amplification of the eigen-recurrence started at site 1."""
    L = diag.size
    z = np.asarray(energies, dtype=complex)
    prev = np.zeros_like(z)
    cur = np.ones_like(z)
    logscale = np.zeros(z.size)
    best = np.zeros(z.size)
    for n in range(L - 1):
        back = off[n - 1] * prev if n > 0 else 0.0
        nxt = -((diag[n] - z) * cur + back) / off[n]
        prev, cur = cur, nxt
        scale = np.maximum(np.abs(prev), np.abs(cur))
        scale[scale == 0] = 1.0
        logscale += np.log2(scale)
        prev /= scale
        cur /= scale
        np.maximum(best, logscale, out=best)
    return float(best.max()) if best.size else 0.0


def default_bits(diag: np.ndarray, off: np.ndarray, w0: np.ndarray) -> int:
    bits = 96 + 2.0 * growth_bits(diag, off, w0)
    return max(128, int(math.ceil(bits / 32.0)) * 32)


def _acb(x: complex) -> acb:
    return acb(float(x.real), float(x.imag))


def _aberth(d, e2, z, bits: int, max_iter: int = 16):
    """Polish all roots of det(W - z) simultaneously; returns a list of acb."""
    L = len(d)
    z = np.array(z, dtype=object)
    tol = 2.0 ** (-(bits - 24))
    for _ in range(max_iter):
        P2 = np.full(L, _ZERO, dtype=object)
        P1 = np.full(L, acb(1), dtype=object)
        Q2 = np.full(L, _ZERO, dtype=object)
        Q1 = np.full(L, _ZERO, dtype=object)
        for n in range(L):
            a = d[n] - z
            if n == 0:
                P = a * P1
                Q = a * Q1 - P1
            else:
                P = a * P1 - e2[n - 1] * P2
                Q = a * Q1 - P1 - e2[n - 1] * Q2
            P2, P1, Q2, Q1 = P1, P, Q1, Q
        diff = z[:, None] - z[None, :]
        np.fill_diagonal(diff, acb(1))
        inv = 1 / diff
        np.fill_diagonal(inv, _ZERO)
        repulsion = inv.sum(axis=1)
        worst = 0.0
        new = []
        for k in range(L):
            p, q = P1[k], Q1[k]
            if p.contains(0):
                new.append(z[k])
                continue
            den = (q / p).mid() - repulsion[k].mid()
            if den.contains(0):
                new.append(z[k])
                continue
            step = (1 / den).mid()
            new.append((z[k] - step).mid())
            mag = abs(complex(step)) / max(abs(complex(z[k])), 1.0)
            worst = max(worst, mag)
        z = np.array(new, dtype=object)
        if worst < tol:
            return list(z)
    raise _PrecisionExhausted("Aberth iteration did not converge")


def _eigenvectors(d, off, z, peaks):
    """Columns of the right eigenbasis, twisted at ``peaks[k]``."""
    L = len(d)
    zv = np.array(z, dtype=object)
    neg_inv_off = [-1 / o for o in off]
    X = np.empty((L, L), dtype=object)
    X[0] = acb(1)
    for n in range(L - 1):
        t = (d[n] - zv) * X[n]
        if n > 0:
            t = t + off[n - 1] * X[n - 1]
        X[n + 1] = t * neg_inv_off[n]
    Y = np.empty((L, L), dtype=object)
    Y[L - 1] = acb(1)
    for n in range(L - 1, 0, -1):
        t = (d[n] - zv) * Y[n]
        if n < L - 1:
            t = t + off[n] * Y[n + 1]
        Y[n - 1] = t * neg_inv_off[n - 1]
    S = np.empty((L, L), dtype=object)
    for k in range(L):
        m = int(peaks[k])
        ym = Y[m, k]
        if ym.contains(0):
            raise _PrecisionExhausted("eigenvector recurrences lost all digits")
        scale = X[m, k] / ym
        col = np.concatenate([X[: m + 1, k], Y[m + 1 :, k] * scale])
        S[:, k] = [c.mid() for c in col]
    return S


def _solve_at(W, F, w0, S0, bits, homogeneity_tolerance):
    diag, off = tridiagonal_bands(W)
    L = diag.size
    ctx.prec = bits
    d = [_acb(x) for x in diag]
    o = [_acb(x) for x in off]
    e2 = [x * x for x in o]
    z = _aberth(d, e2, [_acb(x) for x in w0], bits)

    wnorm = float(np.abs(W).max())
    resolution = 2.0 ** (-(bits - 64)) * max(wnorm, 1.0)
    re = np.array([float(zk.real.mid()) for zk in z])
    if np.any(re <= 0):
        if np.all(re > -resolution):
            raise _PrecisionExhausted("damping rates below working resolution")
        raise SingularSystem("drift matrix has eigenvalues with non-positive real part")
    if re.min() < resolution:
        raise _PrecisionExhausted("damping rates below working resolution")
    zc = np.array([complex(zk) for zk in z])
    gaps = np.abs(zc[:, None] - zc[None, :])
    np.fill_diagonal(gaps, np.inf)
    if gaps.min() < 2.0 ** (-bits / 2) * max(wnorm, 1.0):
        raise _PrecisionExhausted("eigenvalues not separated at working precision")

    peaks = np.argmax(np.abs(S0), axis=0)
    S = _eigenvectors(d, o, z, peaks)
    norms = (S * S).sum(axis=0)
    if any(n.contains(0) for n in norms):
        raise _PrecisionExhausted("degenerate bilinear norm in eigenbasis")

    fdiag = np.real(np.diagonal(F))
    nz = np.flatnonzero(fdiag)
    inv_norms = [1 / n for n in norms]
    # rows of S^-1 restricted to the injecting sites, scaled by sqrt(F)
    K = acb_mat([[S[j, k] * inv_norms[k] * acb(float(fdiag[j])).sqrt() for j in nz]
                 for k in range(L)]) if nz.size else None
    if K is None:
        Ct = acb_mat(L, L)
    else:
        Ct = K * K.conjugate().transpose()
        zbar = [zk.conjugate() for zk in z]
        for k in range(L):
            zk = z[k]
            for l in range(L):
                Ct[k, l] = Ct[k, l] / (zk + zbar[l])
    Sm = acb_mat(S.tolist())
    C = Sm * Ct * Sm.conjugate().transpose()

    J = np.array([-2.0 * float(C[i, i + 1].imag.mid()) for i in range(L - 1)])
    gam1 = 2.0 * acb(float(diag[0].real))
    gamL = 2.0 * acb(float(diag[-1].real))
    j0 = float((acb(float(fdiag[0])) - gam1 * C[0, 0]).real.mid())
    jL = float((acb(float(fdiag[-1])) - gamL * C[L - 1, L - 1]).real.mid())
    Jm = J.mean()
    scale = homogeneity_tolerance * abs(Jm)
    if Jm != 0 and (np.abs(J - Jm).max() > scale or abs(j0 - Jm) > scale or abs(jL + Jm) > scale):
        raise _PrecisionExhausted("currents not homogeneous at working precision")

    Cd = np.empty((L, L), dtype=complex)
    for i in range(L):
        for j in range(L):
            Cd[i, j] = complex(C[i, j].mid())
    return ExtendedSolve(Cd, J, j0, jL, bits, float(re.min()))


def lyapunov_extended(W, F, *, w0=None, S0=None, bits=None, max_bits: int = 4096,
                      homogeneity_tolerance: float = 1e-8) -> ExtendedSolve:
    """Solve ``W C + C W^dag = F`` in arbitrary precision, raising the precision until the
    result passes its own damping-resolution and current-homogeneity checks."""
    W = np.asarray(W, dtype=complex)
    diag, off = tridiagonal_bands(W)
    if w0 is None or S0 is None:
        w0, S0 = np.linalg.eig(W)
    if bits is None:
        bits = default_bits(diag, off, w0)
    saved = ctx.prec
    try:
        while True:
            try:
                return _solve_at(W, F, w0, S0, bits, homogeneity_tolerance)
            except _PrecisionExhausted as exc:
                if bits * 2 > max_bits:
                    raise NumericalBreakdown(
                        f"extended-precision solve failed at {bits} bits: {exc}") from exc
                bits *= 2
    finally:
        ctx.prec = saved
