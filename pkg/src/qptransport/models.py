"""Quasiperiodic chain definitions.

Sites are labelled ``1..L`` in every public function of this module; arrays
returned to callers are ordinary zero-based numpy arrays whose entry ``n``
belongs to site ``n + 1``.

The single-particle Hamiltonian is the tight-binding chain

    h_{i,i+1} = h_{i+1,i} = -1,    h_{ii} = lam * V_i,

and the covariance matrix ``C_ij = <c_j^dag c_i>`` of the boundary-driven,
dephased chain evolves as

    dC/dt = -(W C + C W^dag) - Gamma * offdiag(C) + F,

with ``W = i h + (gamma / 2) (P_1 + P_L)`` and
``F = diag(gamma f1, 0, ..., 0, gamma fL)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np

GOLDEN_RATIO = (1.0 + math.sqrt(5.0)) / 2.0
TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class Clean:
    """No on-site potential (``V_i = 0``)."""

    name: str = field(default="clean", init=False, repr=False)


@dataclass(frozen=True)
class AAH:
    """Aubry-Andre-Harper potential ``V_i = 2 cos(2 pi g i + theta)``.

    ``theta`` is reduced to ``[0, 2 pi)`` on construction.
    """

    theta: float = 0.0
    name: str = field(default="aah", init=False, repr=False)

    def __post_init__(self):
        theta = float(self.theta)
        if not math.isfinite(theta):
            raise ValueError(f"theta must be finite, got {self.theta!r}")
        reduced = math.fmod(theta, TWO_PI)
        if reduced < 0.0:
            reduced += TWO_PI
        if reduced >= TWO_PI:  # fmod of a tiny negative number
            reduced = 0.0
        object.__setattr__(self, "theta", reduced)


@dataclass(frozen=True)
class Fibonacci:
    """Binary Fibonacci-word potential, ``V_i`` in ``{0, 1}``."""

    name: str = field(default="fibonacci", init=False, repr=False)


PotentialKind = Union[Clean, AAH, Fibonacci]

KIND_NAMES = ("clean", "aah", "fibonacci")


def potential_kind(name: str, theta: float | None = None) -> PotentialKind:
    """Build a potential kind from its lower-case name.

    ``theta`` is only meaningful for ``"aah"``; passing it for another kind
    raises ``ValueError``.
    """
    key = name.strip().lower()
    if key == "aah":
        return AAH(0.0 if theta is None else theta)
    if theta is not None:
        raise ValueError(f"theta is only defined for the aah potential, not {name!r}")
    if key == "clean":
        return Clean()
    if key in ("fibonacci", "fib"):
        return Fibonacci()
    raise ValueError(f"unknown potential kind {name!r}; expected one of {KIND_NAMES}")


@dataclass(frozen=True)
class ChainSpec:
    """Geometry and potential of the chain.

    Attributes
    ----------
    L : int
        Number of sites, at least 2.
    lam : float
        Potential strength (non-negative).
    kind : PotentialKind
        ``Clean()``, ``AAH(theta)`` or ``Fibonacci()``.
    """

    L: int
    lam: float = 0.0
    kind: PotentialKind = field(default_factory=Clean)

    def __post_init__(self):
        if isinstance(self.L, bool) or int(self.L) != self.L:
            raise ValueError(f"L must be an integer, got {self.L!r}")
        object.__setattr__(self, "L", int(self.L))
        if self.L < 2:
            raise ValueError(f"L must be >= 2, got {self.L}")
        lam = float(self.lam)
        if not (lam >= 0.0 and math.isfinite(lam)):
            raise ValueError(f"lambda must be a finite non-negative number, got {self.lam!r}")
        object.__setattr__(self, "lam", lam)
        if not isinstance(self.kind, (Clean, AAH, Fibonacci)):
            raise TypeError(f"kind must be Clean, AAH or Fibonacci, got {self.kind!r}")

    def potential(self) -> np.ndarray:
        """On-site potential ``V_1..V_L`` (before multiplying by ``lam``)."""
        return site_potential(self.kind, self.L)


@dataclass(frozen=True)
class DriveSpec:
    """Bath coupling ``gamma``, bath fillings ``f1``/``fL`` and dephasing ``Gamma``."""

    gamma: float = 1.0
    f1: float = 1.0
    fL: float = 0.0
    Gamma: float = 0.0

    def __post_init__(self):
        vals = {k: float(getattr(self, k)) for k in ("gamma", "f1", "fL", "Gamma")}
        for k, v in vals.items():
            if not math.isfinite(v):
                raise ValueError(f"{k} must be finite, got {v!r}")
            object.__setattr__(self, k, v)
        if vals["gamma"] <= 0.0:
            raise ValueError(f"gamma must be > 0, got {vals['gamma']}")
        for k in ("f1", "fL"):
            if not 0.0 <= vals[k] <= 1.0:
                raise ValueError(f"{k} must lie in [0, 1], got {vals[k]}")
        if vals["Gamma"] < 0.0:
            raise ValueError(f"Gamma must be >= 0, got {vals['Gamma']}")

    @property
    def bias(self) -> float:
        """``f1 - fL``; positive bias drives particles from site 1 towards site L."""
        return self.f1 - self.fL


def aah_potential(i, theta: float = 0.0):
    """``2 cos(2 pi g i + theta)`` for 1-based site index ``i`` (scalar or array)."""
    i_arr = np.asarray(i)
    if np.any(i_arr < 1):
        raise ValueError("site indices start at 1")
    out = 2.0 * np.cos(TWO_PI * GOLDEN_RATIO * i_arr + theta)
    return float(out) if out.ndim == 0 else out


def fibonacci_potential(i):
    """Fibonacci-word digit ``[(i+1)/g^2] - [i/g^2]`` for 1-based ``i``."""
    i_arr = np.asarray(i, dtype=np.int64)
    if np.any(i_arr < 1):
        raise ValueError("site indices start at 1")
    g2 = GOLDEN_RATIO * GOLDEN_RATIO
    out = np.floor((i_arr + 1) / g2) - np.floor(i_arr / g2)
    out = out.astype(np.int64)
    return int(out) if out.ndim == 0 else out


def fibonacci_word_recursive(n: int) -> str:
    """Fibonacci word ``S_n`` from ``S_0 = "0"``, ``S_1 = "01"``, ``S_n = S_{n-1} + S_{n-2}``.

    This concatenation order makes every word a prefix of the next one and
    reproduces the integer-part formula digit by digit (0, 01, 010, 01001, ...).
    """
    if n < 0:
        raise ValueError(f"word index must be >= 0, got {n}")
    prev, cur = "0", "01"
    if n == 0:
        return prev
    for _ in range(n - 1):
        prev, cur = cur, cur + prev
    return cur


def site_potential(kind: PotentialKind, L: int) -> np.ndarray:
    sites = np.arange(1, L + 1)
    if isinstance(kind, Clean):
        return np.zeros(L)
    if isinstance(kind, AAH):
        return aah_potential(sites, kind.theta)
    if isinstance(kind, Fibonacci):
        return fibonacci_potential(sites).astype(float)
    raise TypeError(f"unsupported potential kind {kind!r}")


def build_hamiltonian(spec: ChainSpec) -> np.ndarray:
    """Dense real symmetric tridiagonal single-particle Hamiltonian."""
    L = spec.L
    h = np.zeros((L, L))
    idx = np.arange(L - 1)
    h[idx, idx + 1] = -1.0
    h[idx + 1, idx] = -1.0
    h[np.arange(L), np.arange(L)] = spec.lam * spec.potential()
    return h


def build_drift_and_injection(spec: ChainSpec, drive: DriveSpec) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(W, F)`` with ``W = i h + (gamma/2)(P_1 + P_L)`` and ``F`` diagonal."""
    h = build_hamiltonian(spec)
    W = 1j * h
    W[0, 0] += drive.gamma / 2.0
    W[-1, -1] += drive.gamma / 2.0
    F = np.zeros((spec.L, spec.L))
    F[0, 0] = drive.gamma * drive.f1
    F[-1, -1] = drive.gamma * drive.fL
    return W, F


def theta_grid(n: int) -> np.ndarray:
    """Half-open phase grid ``theta_k = k pi / n``, ``k = 0..n-1``."""
    if n < 1:
        raise ValueError(f"need at least one phase sample, got {n}")
    return np.arange(n) * (math.pi / n)


THETA_GRID_CONVENTION = "theta_k = k*pi/N, k = 0..N-1 (half-open [0, pi))"
