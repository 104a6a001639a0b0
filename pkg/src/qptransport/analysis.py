"""Finite-size scaling and conductivity fits.

All fits are ordinary least squares on log-transformed data.  A transport
exponent ``nu`` is defined through ``J ~ L^-nu``, a conductivity through
``kappa = J L / (f1 - fL)`` and the small-dephasing exponent ``beta``
through ``kappa ~ Gamma^beta``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy import stats

from .errors import InsufficientPoints, NonPositiveCurrent, ZeroBias

DEFAULT_GAMMA_WINDOW = (1e-3, 1e-2)


@dataclass(frozen=True)
class ScalingSeries:
    """Strictly increasing abscissae ``x`` (sizes or dephasing rates) with values ``y``."""

    x: tuple
    y: tuple
    metadata: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        x = tuple(float(v) for v in self.x)
        y = tuple(float(v) for v in self.y)
        if len(x) != len(y):
            raise ValueError("x and y must have equal length")
        if any(b <= a for a, b in zip(x, x[1:])):
            raise ValueError("abscissae must be strictly increasing")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @classmethod
    def from_pairs(cls, pairs, **metadata):
        pairs = sorted(pairs)
        return cls(tuple(p[0] for p in pairs), tuple(p[1] for p in pairs), metadata)

    def __len__(self):
        return len(self.x)


@dataclass(frozen=True)
class FitResult:
    exponent: float
    intercept: float
    stderr: float
    r_squared: float
    window: str
    n_points: int = 0


class TransportClass(str, Enum):
    BALLISTIC = "ballistic"
    SUPERDIFFUSIVE = "superdiffusive"
    DIFFUSIVE = "diffusive"
    SUBDIFFUSIVE = "subdiffusive"
    INSULATING = "insulating"
    ANOMALOUS = "anomalous"


@dataclass(frozen=True)
class Classification:
    kind: TransportClass
    nu: float
    thresholds: dict


THRESHOLDS = {
    "ballistic_below": 0.1,
    "diffusive_band": 0.1,
    "insulating_r2_margin": 0.02,
    "insulating_min_nu": 3.0,
}


def _select(series: ScalingSeries, window):
    """Apply a window rule; returns (x, y, description)."""
    x = np.asarray(series.x)
    y = np.asarray(series.y)
    if window is None or window == "all":
        return x, y, f"all {len(x)} points"
    if isinstance(window, str) and window.startswith("last"):
        n = int(window[4:] or 5)
        return x[-n:], y[-n:], f"last {min(n, len(x))} points"
    if isinstance(window, int):
        return x[-window:], y[-window:], f"last {min(window, len(x))} points"
    lo, hi = window
    # grid points generated by logspace land a few ulps off the decade edges
    keep = (x >= lo * (1 - 1e-9)) & (x <= hi * (1 + 1e-9))
    return x[keep], y[keep], f"x in [{lo:g}, {hi:g}]"


def _ols(u, v, window):
    if len(u) < 3:
        raise InsufficientPoints(f"fit window '{window}' selected {len(u)} points, need 3")
    res = stats.linregress(u, v)
    r2 = res.rvalue ** 2 if np.isfinite(res.rvalue) else 1.0
    # linregress derives stderr from r, which floors near sqrt(eps) on exact data;
    # use the residuals directly instead
    resid = v - (res.slope * u + res.intercept)
    sxx = np.sum((u - u.mean()) ** 2)
    stderr = float(np.sqrt(np.sum(resid ** 2) / (len(u) - 2) / sxx)) if sxx > 0 else 0.0
    return float(res.slope), float(res.intercept), stderr, float(min(max(r2, 0.0), 1.0))


def _positive(y, what="current"):
    if np.any(~(y > 0)):
        raise NonPositiveCurrent(f"log fits need strictly positive {what} values")


def fit_transport_exponent(series: ScalingSeries, window="last5") -> FitResult:
    """``nu = -slope`` of ``log J`` against ``log L``.

    ``window`` is ``"last5"`` (default), ``"lastN"``, ``"all"``, an integer
    count of trailing points, or an ``(L_min, L_max)`` pair.
    """
    x, y, desc = _select(series, window)
    _positive(y)
    slope, icpt, se, r2 = _ols(np.log(x), np.log(y), desc)
    return FitResult(-slope, icpt, se, r2, desc, len(x))


def fit_localization_decay(series: ScalingSeries, window="all") -> FitResult:
    """Decay rate ``-slope`` of ``log J`` against ``L``."""
    x, y, desc = _select(series, window)
    _positive(y)
    slope, icpt, se, r2 = _ols(x, np.log(y), desc)
    return FitResult(-slope, icpt, se, r2, desc, len(x))


def conductivity(J, L, delta_f):
    """``kappa = J L / delta_f``."""
    if delta_f == 0:
        raise ZeroBias("conductivity needs a non-zero bias f1 - fL")
    return J * L / delta_f


def fit_small_gamma_beta(series: ScalingSeries, window=DEFAULT_GAMMA_WINDOW) -> FitResult:
    """``beta = slope`` of ``log kappa`` against ``log Gamma`` inside ``window``."""
    x, y, desc = _select(series, window)
    _positive(y, "conductivity")
    slope, icpt, se, r2 = _ols(np.log(x), np.log(y), desc)
    return FitResult(slope, icpt, se, r2, desc, len(x))


def predicted_beta(nu):
    return (nu - 1.0) / (nu + 1.0)


def dephasing_length(Gamma, nu):
    """``L_Gamma = Gamma^(-1 / (1 + nu))`` with unit prefactor."""
    if not Gamma > 0:
        raise ValueError(f"Gamma must be > 0, got {Gamma}")
    return Gamma ** (-1.0 / (1.0 + nu))


def piecewise_kappa_model(L, Gamma, nu):
    """``L^(1-nu)`` below the dephasing length, frozen at ``L_Gamma^(1-nu)`` above."""
    LG = dephasing_length(Gamma, nu)
    return min(L, LG) ** (1.0 - nu)


def classify_transport(fit: FitResult, exponential_fit: FitResult | None = None,
                       thresholds: dict | None = None) -> Classification:
    th = dict(THRESHOLDS, **(thresholds or {}))
    nu = fit.exponent
    if (exponential_fit is not None
            and exponential_fit.r_squared >= fit.r_squared + th["insulating_r2_margin"]
            and nu > th["insulating_min_nu"]):
        return Classification(TransportClass.INSULATING, nu, th)
    if abs(nu) < th["ballistic_below"]:
        kind = TransportClass.BALLISTIC
    elif abs(nu - 1.0) <= th["diffusive_band"]:
        kind = TransportClass.DIFFUSIVE
    elif th["ballistic_below"] <= nu < 1.0 - th["diffusive_band"]:
        kind = TransportClass.SUPERDIFFUSIVE
    elif nu > 1.0 + th["diffusive_band"]:
        kind = TransportClass.SUBDIFFUSIVE
    else:
        kind = TransportClass.ANOMALOUS
    return Classification(kind, nu, th)


def loglog_slope(series: ScalingSeries, window=3):
    """Log-log slope over ``window`` (default: the trailing three points)."""
    x, y, desc = _select(series, window)
    _positive(y, "values")
    return _ols(np.log(x), np.log(y), desc)[0]
