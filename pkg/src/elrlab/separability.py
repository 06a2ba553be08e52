"""Homogeneous linear separability, Cover's dichotomy count and the memorization bound."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog
from scipy.special import gammaln, logsumexp

from .datagen import make_dataset


def cover_count(n: int, p: int) -> int:
    """Number of homogeneously separable dichotomies of n points in general position in R^p."""
    if n < 1 or p < 1:
        raise ValueError("n and p must be positive")
    return 2 * sum(math.comb(n - 1, k) for k in range(min(p, n)))


def memorization_prob_bound(n: int, p: int, delta: float) -> float:
    """``2 * P[Bin(n, delta/2) <= n - p]``, summed in log space.

    Returns 0 when ``p > n`` (empty tail).
    """
    if p > n:
        return 0.0
    q = delta / 2.0
    k = np.arange(0, n - p + 1)
    log_binom = gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1)
    with np.errstate(divide="ignore", invalid="ignore"):
        log_terms = log_binom + k * np.log(q) + (n - k) * np.log1p(-q)
    if q == 0.0:
        log_terms = np.where(k == 0, (n - k) * np.log1p(-q), -np.inf)
    return float(min(2.0, 2.0 * np.exp(logsumexp(log_terms))))


@dataclass(frozen=True)
class SeparabilityResult:
    """Outcome of a separability test.

    ``separable`` is True (verified separator), False (verified Farkas
    certificate) or None (neither could be verified).
    """
    separable: bool | None
    theta: np.ndarray | None = None
    certificate: np.ndarray | None = None

    def __bool__(self) -> bool:
        return self.separable is True


def check_separability(X, labels, max_iter: int = 10_000, tol: float = 1e-7) -> SeparabilityResult:
    """Is there a theta with ``labels_i * theta . x_i >= 1`` for all i?

    Solves the margin-1 feasibility LP.  A returned separator is re-verified
    (strictly positive margins on every point).  Infeasibility is confirmed by
    a Farkas vector ``y >= 0`` with ``A^T y ~ 0`` and ``sum(y) = 1``, where
    ``A`` has rows ``labels_i * x_i`` scaled to unit norm.  Such a certificate
    rules out every separator whose normalized margin exceeds ``tol``.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    eps = np.asarray(labels, dtype=float)
    A = eps[:, None] * X
    norms = np.linalg.norm(A, axis=1)
    if np.any(norms == 0):
        # the zero vector cannot be strictly separated
        return SeparabilityResult(False, certificate=(norms == 0).astype(float))
    A = A / norms[:, None]
    n, p = A.shape

    res = linprog(np.zeros(p), A_ub=-A, b_ub=-np.ones(n), bounds=[(None, None)] * p,
                  method="highs", options={"maxiter": max_iter})
    if res.status == 0 and res.x is not None and np.all(A @ res.x > 0):
        raw = (eps[:, None] * X) @ res.x
        return SeparabilityResult(True, theta=res.x / np.min(raw))

    # max sum(y) s.t. A^T y = 0, 0 <= y <= 1; a positive optimum proves infeasibility
    dual = linprog(-np.ones(n), A_eq=A.T, b_eq=np.zeros(p), bounds=[(0, 1)] * n,
                   method="highs", options={"maxiter": max_iter})
    if dual.status == 0 and dual.x is not None:
        y = np.maximum(dual.x, 0.0)
        total = y.sum()
        if total > 1e-6:
            y = y / total
            if np.linalg.norm(A.T @ y) <= tol:
                return SeparabilityResult(False, certificate=y)
    return SeparabilityResult(None)


@dataclass(frozen=True)
class SeparabilityReport:
    separable: bool | None
    cover_count: int
    prob_bound: float


def separability_report(X, labels, delta: float) -> SeparabilityReport:
    n, p = np.shape(X)
    return SeparabilityReport(check_separability(X, labels).separable, cover_count(n, p),
                              memorization_prob_bound(n, p, delta))


@dataclass(frozen=True)
class SweepRow:
    seed: int
    n: int
    p: int
    delta: float
    separable: bool | None
    bound: float


def separability_sweep(n: int, p: int, delta: float, trials: int, seed: int = 0,
                       sigma: float = 0.1) -> list[SweepRow]:
    """Monte Carlo separability of the observed classes of noisy two-class mixtures."""
    bound = memorization_prob_bound(n, p, delta)
    rows = []
    for k in range(trials):
        s = int(np.random.SeedSequence([seed, k]).generate_state(1)[0])
        data = make_dataset(n, p, 2, sigma, delta, s)
        res = check_separability(data.inputs, data.observed_sign)
        rows.append(SweepRow(s, n, p, delta, res.separable, bound))
    return rows
