"""Non-equilibrium steady state of the boundary-driven, dephased chain.

The covariance matrix solves

    W C + C W^dag + Gamma * offdiag(C) = F.

Without dephasing this is a Lyapunov equation, solved by diagonalizing ``W``.
With dephasing the equation is vectorized and handed to a sparse LU.

The bond current is ``J_i = -2 Im C_{i,i+1}``, positive when particles flow
from site 1 towards site L (so ``f1 > fL`` gives ``J > 0``).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from . import _extended
from .errors import NumericalBreakdown, ResidualTooLarge, SingularSystem
from .models import ChainSpec, DriveSpec, build_drift_and_injection

METHODS = ("auto", "lyapunov-eigen", "sparse-vectorized")
PRECISIONS = ("auto", "double", "extended")
DOUBLE_BITS = 53


@dataclass(frozen=True)
class SolverOptions:
    """Solver settings.

    Attributes
    ----------
    method : str
        ``"auto"`` uses the eigendecomposition when ``Gamma == 0`` and the
        sparse vectorized system otherwise.
    residual_tolerance : float
        Accepted ``max|W C + C W^dag + Gamma offdiag(C) - F|`` in units of
        ``max(gamma, 1)``.
    homogeneity_tolerance : float
        Relative spread allowed between bond currents and the two bath
        currents.
    hermitize : bool
        Replace ``C`` by ``(C + C^dag) / 2`` after the residual check.
    precision : str
        ``"double"`` never leaves IEEE doubles, ``"extended"`` always uses
        the multiprecision eigensolver (``Gamma == 0`` only), ``"auto"``
        escalates when the double-precision result fails its checks.
    max_precision_bits : int
        Ceiling for the multiprecision retries.
    """

    method: str = "auto"
    residual_tolerance: float = 1e-9
    homogeneity_tolerance: float = 1e-8
    hermitize: bool = True
    precision: str = "auto"
    max_precision_bits: int = 4096

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.precision not in PRECISIONS:
            raise ValueError(f"precision must be one of {PRECISIONS}, got {self.precision!r}")
        if not self.residual_tolerance > 0:
            raise ValueError("residual_tolerance must be positive")
        if not self.homogeneity_tolerance > 0:
            raise ValueError("homogeneity_tolerance must be positive")


@dataclass
class NessSolution:
    C: np.ndarray
    site_currents: np.ndarray
    current: float
    boundary_in: float
    boundary_out: float
    density: np.ndarray
    residual: float
    homogeneity: float
    method: str
    precision_bits: int = DOUBLE_BITS
    notes: list = field(default_factory=list)


def extract_currents(C: np.ndarray) -> tuple[np.ndarray, float]:
    """Bond currents ``J_i = -2 Im C_{i,i+1}`` and their mean."""
    C = np.asarray(C)
    J = -2.0 * np.imag(np.diagonal(C, 1))
    return J, float(J.mean()) if J.size else 0.0


def boundary_currents(C: np.ndarray, drive: DriveSpec) -> tuple[float, float]:
    """Currents injected by the baths: ``J0 = gamma (f1 - C_11)``, ``JL = gamma (fL - C_LL)``."""
    C = np.asarray(C)
    J0 = drive.gamma * (drive.f1 - float(np.real(C[0, 0])))
    JL = drive.gamma * (drive.fL - float(np.real(C[-1, -1])))
    return J0, JL


def homogeneity_deviation(site_currents, current, boundary_in=None, boundary_out=None) -> float:
    """Largest of ``|J_i - J|``, ``|J0 - J|`` and ``|JL + J|`` (absolute)."""
    dev = float(np.max(np.abs(np.asarray(site_currents) - current))) if len(site_currents) else 0.0
    if boundary_in is not None:
        dev = max(dev, abs(boundary_in - current))
    if boundary_out is not None:
        dev = max(dev, abs(boundary_out + current))
    return dev


def steady_state_residual(W, F, C, Gamma: float = 0.0) -> float:
    R = W @ C + C @ W.conj().T - F
    if Gamma:
        off = C.copy()
        np.fill_diagonal(off, 0.0)
        R = R + Gamma * off
    return float(np.abs(R).max())


def _eig(W):
    try:
        w, S = np.linalg.eig(W)
    except np.linalg.LinAlgError as exc:
        raise NumericalBreakdown(f"eigendecomposition failed: {exc}") from exc
    if not (np.all(np.isfinite(w)) and np.all(np.isfinite(S))):
        raise NumericalBreakdown("eigendecomposition returned non-finite values")
    return w, S


def _lyapunov_from_eig(w, S, F):
    L = w.size
    Wnorm = np.abs(w).max() if L else 0.0
    denom = w[:, None] + np.conj(w)[None, :]
    if np.abs(denom).min() < 1e-12 * max(Wnorm, 1e-300):
        raise SingularSystem("w_k + conj(w_l) vanishes: drift matrix is not strictly damped")
    F = np.asarray(F)
    try:
        if np.count_nonzero(F - np.diag(np.diagonal(F))) == 0:
            fd = np.real(np.diagonal(F))
            nz = np.flatnonzero(fd)
            rhs = np.zeros((L, nz.size), dtype=complex)
            rhs[nz, np.arange(nz.size)] = np.sqrt(np.abs(fd[nz]))
            G = np.linalg.solve(S, rhs)
            Ft = (G * np.sign(fd[nz])) @ G.conj().T
        else:
            X = np.linalg.solve(S, F)
            Ft = np.linalg.solve(S, X.conj().T).conj().T
    except np.linalg.LinAlgError as exc:
        raise NumericalBreakdown(f"eigenvector matrix is singular: {exc}") from exc
    return S @ (Ft / denom) @ S.conj().T


def lyapunov_eigen_solve(W: np.ndarray, F: np.ndarray) -> np.ndarray:
    """Solve ``W C + C W^dag = F`` through ``W = S diag(w) S^-1`` in double precision.

    Raises ``SingularSystem`` when some ``|w_k + conj(w_l)|`` drops below
    ``1e-12 ||W||`` and ``NumericalBreakdown`` when the eigenbasis is unusable.
    """
    W = np.asarray(W, dtype=complex)
    w, S = _eig(W)
    return _lyapunov_from_eig(w, S, F)


def vectorized_operator(W: np.ndarray, Gamma: float) -> sp.csc_matrix:
    """``I (x) W + conj(W) (x) I + Gamma * offdiag`` acting on column-major ``vec(C)``."""
    L = W.shape[0]
    Ws = sp.csr_matrix(np.asarray(W, dtype=complex))
    I = sp.identity(L, dtype=complex, format="csr")
    A = sp.kron(I, Ws) + sp.kron(Ws.conj(), I)
    if Gamma:
        mask = np.full(L * L, Gamma, dtype=complex)
        mask[:: L + 1] = 0.0
        A = A + sp.diags(mask)
    return sp.csc_matrix(A)


def sparse_vectorized_solve(W: np.ndarray, F: np.ndarray, Gamma: float, *,
                            refine_steps: int = 2) -> np.ndarray:
    """Solve ``W C + C W^dag + Gamma offdiag(C) = F`` by sparse LU on ``vec(C)``.

    ``Gamma = 0`` is accepted too, which gives an independent route for the
    Lyapunov case.  A couple of iterative-refinement steps reuse the factors.
    """
    if Gamma < 0:
        raise ValueError(f"Gamma must be >= 0, got {Gamma}")
    W = np.asarray(W, dtype=complex)
    L = W.shape[0]
    A = vectorized_operator(W, Gamma)
    b = np.asarray(F, dtype=complex).reshape(-1, order="F")
    try:
        lu = splu(A, permc_spec="COLAMD")
    except RuntimeError as exc:
        raise SingularSystem(f"sparse factorization failed: {exc}") from exc
    x = lu.solve(b)
    if not np.all(np.isfinite(x)):
        raise SingularSystem("sparse solve produced non-finite values")
    for _ in range(refine_steps):
        x = x + lu.solve(b - A @ x)
    return x.reshape((L, L), order="F")


def _finish(C, W, F, drive, opts, method, bits, site=None, bnd=None):
    """Residual and homogeneity gates shared by every path."""
    scale = max(drive.gamma, 1.0)
    residual = steady_state_residual(W, F, C, drive.Gamma)
    if not np.isfinite(residual) or residual > opts.residual_tolerance * scale:
        raise ResidualTooLarge(f"residual {residual:.3e} exceeds {opts.residual_tolerance * scale:.3e}")
    if opts.hermitize:
        C = 0.5 * (C + C.conj().T)
    if site is None:
        site, _ = extract_currents(C)
    current = float(np.mean(site))
    if bnd is None:
        bnd = boundary_currents(C, drive)
    dev = homogeneity_deviation(site, current, *bnd)
    if drive.bias == 0.0:
        limit = 1e-12 * scale
    else:
        limit = opts.homogeneity_tolerance * abs(current)
    if not dev <= max(limit, 1e-300):
        raise ResidualTooLarge(
            f"currents not homogeneous: deviation {dev:.3e} vs allowed {limit:.3e} (J = {current:.3e})")
    return NessSolution(C=C, site_currents=np.asarray(site, dtype=float), current=current,
                        boundary_in=float(bnd[0]), boundary_out=float(bnd[1]),
                        density=np.real(np.diagonal(C)).copy(), residual=residual,
                        homogeneity=dev, method=method, precision_bits=bits)


def solve_ness(spec: ChainSpec, drive: DriveSpec, opts: SolverOptions | None = None) -> NessSolution:
    """Steady-state covariance, currents and diagnostics for one chain.

    Raises ``SingularSystem``, ``ResidualTooLarge`` or ``NumericalBreakdown``;
    a solution that fails its residual or current-homogeneity gate is never
    returned.
    """
    opts = opts or SolverOptions()
    method = opts.method
    if method == "auto":
        method = "lyapunov-eigen" if drive.Gamma == 0 else "sparse-vectorized"
    if method == "lyapunov-eigen" and drive.Gamma != 0:
        raise ValueError("the eigendecomposition method requires Gamma = 0")
    if opts.precision == "extended" and method != "lyapunov-eigen":
        raise ValueError("extended precision is only available for the Gamma = 0 eigen method")
    W, F = build_drift_and_injection(spec, drive)

    if method == "sparse-vectorized":
        C = sparse_vectorized_solve(W, F, drive.Gamma)
        return _finish(C, W, F, drive, opts, method, DOUBLE_BITS)

    w0 = S0 = None
    failure = None
    if opts.precision != "extended":
        try:
            w0, S0 = _eig(W)
            C = _lyapunov_from_eig(w0, S0, F)
            return _finish(C, W, F, drive, opts, method, DOUBLE_BITS)
        except (SingularSystem, ResidualTooLarge, NumericalBreakdown) as exc:
            if opts.precision == "double":
                raise
            failure = exc
    ext = _extended.lyapunov_extended(W, F, w0=w0, S0=S0, max_bits=opts.max_precision_bits,
                                      homogeneity_tolerance=opts.homogeneity_tolerance)
    sol = _finish(ext.C, W, F, drive, opts, method, ext.bits,
                  site=ext.site_currents, bnd=(ext.boundary_in, ext.boundary_out))
    if failure is not None:
        sol.notes.append(f"double precision rejected: {failure}")
    return sol


def solve_with(spec: ChainSpec, drive: DriveSpec, **options) -> NessSolution:
    """``solve_ness`` with keyword overrides of the default options."""
    return solve_ness(spec, drive, replace(SolverOptions(), **options))
