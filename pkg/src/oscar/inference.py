"""Permutation significance and bootstrap uncertainty for profile correlations.

The permutation test shuffles region indices of the B-role profile only and
recomputes the full statistic (residualisation included) per draw; the
bootstrap resamples images with replacement, using the same indices for all
three models so the re-aggregated profiles stay comparable. Replicate
randomness is generated up front from the given seed, so results do not
depend on the worker count used to evaluate them.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import permutations as iter_permutations

import numpy as np
from scipy.stats import rankdata

from . import correlations
from .errors import AllDegenerate, DegenerateProfile, ZeroVariance

_TIE_TOL = 1e-12
_CHUNK = 1024


@dataclass(frozen=True)
class InferenceResult:
    rho_obs: float
    p_value: float
    ci_low: float
    ci_high: float
    n_permutations: int
    n_bootstrap: int
    seed: int
    n_dropped_bootstrap: int = 0
    exhaustive: bool = False

    def to_dict(self) -> dict:
        return {
            "rho": self.rho_obs,
            "p": self.p_value,
            "ci_lo": self.ci_low,
            "ci_hi": self.ci_high,
            "n_permutations": self.n_permutations,
            "n_bootstrap": self.n_bootstrap,
            "n_dropped_bootstrap": self.n_dropped_bootstrap,
            "exhaustive": self.exhaustive,
            "seed": self.seed,
        }


@dataclass(frozen=True)
class BootstrapResult:
    ci_low: float
    ci_high: float
    n_dropped: int
    replicates: np.ndarray = field(repr=False, default=None)


def _rank_rows(X: np.ndarray) -> np.ndarray:
    return rankdata(X, method="average", axis=1)


def _residualize_rows(X: np.ndarray, C: np.ndarray) -> np.ndarray:
    """Row-wise least squares residuals of X on C (intercept included).

    C may be a single vector shared by all rows or one row per replicate.
    Zero-variance regressor rows fall back to plain centering.
    """
    Xc = X - X.mean(axis=1, keepdims=True)
    C = np.atleast_2d(C)
    Cc = C - C.mean(axis=1, keepdims=True)
    denom = np.einsum("ij,ij->i", Cc, Cc)
    num = np.einsum("ij,ij->i", Xc, np.broadcast_to(Cc, Xc.shape))
    slope = np.divide(num, denom, out=np.zeros_like(num), where=denom > 1e-24)
    return Xc - slope[:, None] * Cc


def _corr_rows(X: np.ndarray, Y: np.ndarray, method: str) -> np.ndarray:
    """Row-wise correlation; degenerate rows come back as NaN."""
    if method == "spearman":
        X = _rank_rows(X)
        Y = _rank_rows(Y)
    Xc = X - X.mean(axis=1, keepdims=True)
    Yc = Y - Y.mean(axis=1, keepdims=True)
    vx = np.einsum("ij,ij->i", Xc, Xc)
    vy = np.einsum("ij,ij->i", Yc, Yc)
    sx = np.einsum("ij,ij->i", X, X)
    sy = np.einsum("ij,ij->i", Y, Y)
    ok = (vx > np.maximum(1e-24, 1e-20 * sx)) & (
        vy > np.maximum(1e-24, 1e-20 * sy)
    )
    num = np.einsum("ij,ij->i", Xc, Yc)
    out = np.full(X.shape[0], np.nan)
    out[ok] = num[ok] / np.sqrt(vx[ok] * vy[ok])
    return out


def _stat_rows(
    kind: str,
    A: np.ndarray,
    B: np.ndarray,
    C: np.ndarray | None,
    method: str,
) -> np.ndarray:
    """Vectorised correlation statistic over replicate rows."""
    if kind == "pairwise":
        return _corr_rows(A, B, method)
    if C is None:
        raise DegenerateProfile(f"{kind} correlation needs a reference profile")
    EA = _residualize_rows(A, C)
    if kind == "partial":
        EB = _residualize_rows(B, C)
        rho = _corr_rows(EA, EB, method)
    elif kind == "deviation":
        rho = _corr_rows(EA, B, method)
    else:
        raise ValueError(f"unknown correlation kind {kind!r}")
    # Exact-fit residuals are rounding noise, not signal.
    Ac = A - A.mean(axis=1, keepdims=True)
    bad = np.einsum("ij,ij->i", EA, EA) <= np.maximum(
        1e-24, 1e-18 * np.einsum("ij,ij->i", Ac, Ac)
    )
    rho = np.where(bad, np.nan, rho)
    return rho


def _chunked(total: int, n_workers: int, fn):
    """Apply fn to index chunks, concatenating results in index order."""
    chunks = [
        (lo, min(lo + _CHUNK, total)) for lo in range(0, total, _CHUNK)
    ]
    if n_workers <= 1 or len(chunks) == 1:
        parts = [fn(lo, hi) for lo, hi in chunks]
    else:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            parts = list(pool.map(lambda c: fn(*c), chunks))
    return np.concatenate(parts)


def observed_statistic(
    a: np.ndarray,
    b: np.ndarray,
    c: np.ndarray | None,
    kind: str,
    method: str,
) -> float:
    return correlations.compute(kind, a, b, c, method).rho


def permutation_test(
    a: np.ndarray,
    b: np.ndarray,
    c: np.ndarray | None = None,
    kind: str = "partial",
    method: str = "pearson",
    n_perm: int = 10_000,
    seed: int = 0,
    permute: str = "b",
    n_workers: int = 1,
) -> float:
    """Two-sided region-index permutation p-value.

    Permutes the B-role profile only by default; ``permute="both"`` applies
    the same draw to A and B for comparison. When n <= 8 and n! <= n_perm
    all permutations are enumerated and the p-value is exact; otherwise the
    add-one estimator (1 + #extreme) / (1 + n_perm) is used. Replicates
    whose statistic is degenerate count as extreme.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    c = None if c is None else np.asarray(c, dtype=np.float64)
    if np.ptp(b) == 0.0 and permute == "b":
        # The statistic cannot change under any permutation of b.
        return 1.0
    rho_obs = observed_statistic(a, b, c, kind, method)
    threshold = abs(rho_obs) - _TIE_TOL
    n = b.size

    exhaustive = n <= 8 and math.factorial(n) <= n_perm
    if exhaustive:
        P = np.array(list(iter_permutations(range(n))))
    else:
        rng = np.random.default_rng(seed)
        P = np.argsort(rng.random((n_perm, n)), axis=1)

    def run(lo: int, hi: int) -> np.ndarray:
        rows = P[lo:hi]
        B = b[rows]
        A = a[rows] if permute == "both" else np.broadcast_to(a, B.shape)
        rho = _stat_rows(kind, A, B, c, method)
        return np.isnan(rho) | (np.abs(rho) >= threshold)

    extreme = int(_chunked(len(P), n_workers, run).sum())
    if exhaustive:
        return extreme / len(P)
    return (1 + extreme) / (1 + n_perm)


def percentile_interval(values: np.ndarray, level: float) -> tuple[float, float]:
    """Percentile CI endpoints with linear interpolation between order stats."""
    lo_q = 100.0 * (1.0 - level) / 2.0
    lo, hi = np.percentile(values, [lo_q, 100.0 - lo_q], method="linear")
    return float(lo), float(hi)


def bootstrap_ci(
    rank_vectors: dict[str, np.ndarray],
    roles: tuple[str, str, str] = ("TS", "SA", "BA"),
    kind: str = "partial",
    method: str = "pearson",
    agg: str = "median",
    n_boot: int = 10_000,
    level: float = 0.95,
    seed: int = 0,
    n_workers: int = 1,
) -> BootstrapResult:
    """Image-level bootstrap percentile CI for a profile correlation.

    ``rank_vectors`` maps model tags to (m, n) per-image rank matrices.
    Each replicate draws m image indices with replacement (shared across
    all models), re-aggregates, and recomputes the statistic. Degenerate
    replicates are dropped and counted.
    """
    mats = {tag: np.asarray(rv, dtype=np.float64) for tag, rv in rank_vectors.items()}
    role_a, role_b, role_c = roles
    m = mats[role_a].shape[0]

    rng = np.random.default_rng(seed)
    idx = rng.integers(0, m, size=(n_boot, m))

    def aggregate(mat: np.ndarray, rows: np.ndarray) -> np.ndarray:
        resampled = mat[rows]  # (chunk, m, n)
        if agg == "median":
            return np.median(resampled, axis=1)
        if agg == "mean":
            return resampled.mean(axis=1)
        raise ValueError(f"unknown aggregation {agg!r}")

    def run(lo: int, hi: int) -> np.ndarray:
        rows = idx[lo:hi]
        A = aggregate(mats[role_a], rows)
        B = aggregate(mats[role_b], rows)
        C = aggregate(mats[role_c], rows) if kind != "pairwise" else None
        return _stat_rows(kind, A, B, C, method)

    reps = _chunked(n_boot, n_workers, run)
    good = reps[np.isfinite(reps)]
    dropped = int(n_boot - good.size)
    if good.size == 0:
        raise AllDegenerate("every bootstrap replicate was degenerate")
    lo, hi = percentile_interval(good, level)
    return BootstrapResult(ci_low=lo, ci_high=hi, n_dropped=dropped, replicates=good)


def infer(
    rank_vectors: dict[str, np.ndarray],
    roles: tuple[str, str, str] = ("TS", "SA", "BA"),
    kind: str = "partial",
    method: str = "pearson",
    agg: str = "median",
    n_perm: int = 10_000,
    n_boot: int = 10_000,
    level: float = 0.95,
    seed_perm: int = 0,
    seed_boot: int = 0,
    n_workers: int = 1,
) -> InferenceResult:
    """Full inference on aggregated profiles: observed rho, p-value, CI."""
    from .rank_profiles import aggregate_profiles

    role_a, role_b, role_c = roles
    a = aggregate_profiles(rank_vectors[role_a], agg).values
    b = aggregate_profiles(rank_vectors[role_b], agg).values
    c = (
        aggregate_profiles(rank_vectors[role_c], agg).values
        if kind != "pairwise"
        else None
    )
    rho_obs = observed_statistic(a, b, c, kind, method)
    n = b.size
    exhaustive = n <= 8 and math.factorial(n) <= n_perm
    p = permutation_test(
        a, b, c, kind, method, n_perm=n_perm, seed=seed_perm, n_workers=n_workers
    )
    boot = bootstrap_ci(
        rank_vectors,
        roles=roles,
        kind=kind,
        method=method,
        agg=agg,
        n_boot=n_boot,
        level=level,
        seed=seed_boot,
        n_workers=n_workers,
    )
    return InferenceResult(
        rho_obs=rho_obs,
        p_value=p,
        ci_low=boot.ci_low,
        ci_high=boot.ci_high,
        n_permutations=n_perm,
        n_bootstrap=n_boot,
        seed=seed_perm,
        n_dropped_bootstrap=boot.n_dropped,
        exhaustive=exhaustive,
    )
