"""Pairwise, partial, and deviation correlations between rank profiles."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from .errors import DegenerateProfile, LengthMismatch, ZeroVariance

# Residual variance below this (relative to the profile scale) counts as zero.
_VAR_EPS = 1e-24


@dataclass(frozen=True)
class CorrelationResult:
    kind: str  # pairwise | partial | deviation
    method: str  # pearson | spearman
    rho: float
    roles: tuple[str, ...]  # (A, B) or (A, B, C)


def _check_pair(x: np.ndarray, y: np.ndarray, min_n: int = 3):
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise LengthMismatch(f"vectors of shape {x.shape} and {y.shape}")
    if x.size < min_n:
        raise LengthMismatch(f"need at least {min_n} regions, got {x.size}")
    return x, y


def corr(x: np.ndarray, y: np.ndarray, method: str = "pearson") -> float:
    """Pearson product-moment correlation; spearman re-ranks both inputs."""
    x, y = _check_pair(x, y)
    if method == "spearman":
        x = rankdata(x, method="average")
        y = rankdata(y, method="average")
    elif method != "pearson":
        raise ValueError(f"unknown method {method!r}")
    xc = x - x.mean()
    yc = y - y.mean()
    vx = xc @ xc
    vy = yc @ yc
    # Scale-aware zero test: exact-fit residuals carry rounding noise of
    # order eps * |x|, which must still count as degenerate.
    if vx <= max(_VAR_EPS, 1e-20 * float(x @ x)) or vy <= max(
        _VAR_EPS, 1e-20 * float(y @ y)
    ):
        raise ZeroVariance("correlation input has no variance")
    return float((xc @ yc) / np.sqrt(vx * vy))


def residualize(x: np.ndarray, c: np.ndarray) -> np.ndarray:
    """Residuals of x after least-squares regression on c with intercept.

    A zero-variance regressor degrades to intercept-only (x - mean).
    """
    x, c = _check_pair(x, c, min_n=2)
    xc = x - x.mean()
    cc = c - c.mean()
    denom = cc @ cc
    if denom <= _VAR_EPS:
        return xc
    slope = (xc @ cc) / denom
    return xc - slope * cc


def _residual_degenerate(e: np.ndarray, source: np.ndarray) -> bool:
    """True when residual variance is rounding noise relative to its source."""
    sc = source - source.mean()
    return float(e @ e) <= max(_VAR_EPS, 1e-18 * float(sc @ sc))


def partial_corr(
    a: np.ndarray,
    b: np.ndarray,
    c: np.ndarray,
    method: str = "pearson",
    roles: tuple[str, str, str] = ("A", "B", "C"),
) -> CorrelationResult:
    """Correlation of the residuals of a and b after regressing each on c."""
    a, c = _check_pair(a, c, min_n=4)
    b, _ = _check_pair(b, c, min_n=4)
    e_a = residualize(a, c)
    e_b = residualize(b, c)
    if _residual_degenerate(e_a, a) or _residual_degenerate(e_b, b):
        raise DegenerateProfile("zero-variance residual profile")
    try:
        rho = corr(e_a, e_b, method)
    except ZeroVariance as exc:
        raise DegenerateProfile("zero-variance residual profile") from exc
    return CorrelationResult("partial", method, rho, roles)


def deviation_corr(
    a: np.ndarray,
    b: np.ndarray,
    c: np.ndarray,
    method: str = "pearson",
    roles: tuple[str, str, str] = ("A", "B", "C"),
) -> CorrelationResult:
    """Correlation between the residual of a given c and b on its own scale."""
    a, c = _check_pair(a, c, min_n=4)
    b, _ = _check_pair(b, c, min_n=4)
    e_a = residualize(a, c)
    if _residual_degenerate(e_a, a):
        raise DegenerateProfile("zero-variance residual profile")
    try:
        rho = corr(e_a, b, method)
    except ZeroVariance as exc:
        raise DegenerateProfile("zero-variance residual or b profile") from exc
    return CorrelationResult("deviation", method, rho, roles)


def pairwise_corr(
    a: np.ndarray,
    b: np.ndarray,
    method: str = "pearson",
    roles: tuple[str, str] = ("A", "B"),
) -> CorrelationResult:
    return CorrelationResult("pairwise", method, corr(a, b, method), roles)


def compute(
    kind: str,
    a: np.ndarray,
    b: np.ndarray,
    c: np.ndarray | None = None,
    method: str = "pearson",
    roles: tuple[str, ...] | None = None,
) -> CorrelationResult:
    """Dispatch on correlation kind; c is required except for pairwise."""
    if kind == "pairwise":
        return pairwise_corr(a, b, method, roles or ("A", "B"))
    if c is None:
        raise LengthMismatch(f"{kind} correlation needs a reference profile")
    roles3 = roles or ("A", "B", "C")
    if kind == "partial":
        return partial_corr(a, b, c, method, roles3)
    if kind == "deviation":
        return deviation_corr(a, b, c, method, roles3)
    raise ValueError(f"unknown correlation kind {kind!r}")
