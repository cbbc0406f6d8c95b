"""Explicit constants, the configuration sum f(R, mu) and the entropy caps.

All caps are evaluated in log space where the exponentials can overflow
(``exp(8M / (mu * alpha))`` reaches ~1e200 for small alpha).
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Mapping, Optional, Sequence

import numpy as np

from .lattice import (
    Configuration,
    RectangleSpec,
    _cost_matrix,
    assignment_cost,
    boundary_distance,
    family_rect_distance,
    rect_depth,
    window_sites,
)


@dataclass(frozen=True)
class BoundConstants:
    M: int
    delta: float
    Delta: float
    C: float
    mu: float
    p: Optional[float] = None
    k_threshold: Optional[int] = None
    lam: Optional[float] = None
    C_tilde: Optional[float] = None


def prop41_constants(M: int, delta: float, Delta: float) -> BoundConstants:
    """Clustering constants C and mu of the droplet projector bound."""
    if M < 1:
        raise ValueError("M must be a positive integer")
    if not delta > 0:
        raise ValueError(f"delta must be positive, got {delta}")
    if not Delta > 1:
        raise ValueError(f"Delta must exceed 1, got {Delta}")
    C = 1.5 * math.sqrt(5.0) * (2 * M + 1) ** 1.5 / min(1.0, delta**1.5)
    mu = 0.5 * math.log1p(delta * Delta / (4 * M + 2))
    return BoundConstants(M=M, delta=delta, Delta=Delta, C=C, mu=mu)


def lemma43_constants(consts: BoundConstants, p: float, k: int) -> BoundConstants:
    """Add lambda = 1 - p + p e^{-mu} and C~ = C e^{mu (k-1)}."""
    if not 0 < p <= 1:
        raise ValueError(f"p must lie in (0, 1], got {p}")
    if k < 1:
        raise ValueError(f"k must be a positive integer, got {k}")
    lam = 1.0 - p + p * math.exp(-consts.mu)
    return replace(consts, p=p, k_threshold=k, lam=lam, C_tilde=consts.C * math.exp(consts.mu * (k - 1)))


def theorem31_bound(M: int, mu: float) -> float:
    """(1 + 2M/mu) exp(4M/mu), the uniform bound on f(R, mu)."""
    if not mu > 0:
        raise ValueError(f"mu must be positive, got {mu}")
    return (1.0 + 2.0 * M / mu) * math.exp(4.0 * M / mu)


# --- f(R, mu) -------------------------------------------------------------------

@dataclass(frozen=True)
class TruncatedSum:
    """Bracket ``lower <= f <= certified_upper`` from a finite window.

    ``window`` is the column range enumerated (R padded by ``pad`` columns on
    both sides); ``n_terms`` counts the enumerated configurations.
    """

    lower: float
    certified_upper: float
    window: tuple[int, int]
    pad: int
    n_terms: int

    @property
    def gap(self) -> float:
        return self.certified_upper - self.lower


@lru_cache(maxsize=64)
def distance_histogram(depth: int, width: int, pad: int) -> dict[int, int]:
    """Counts of d_N(X, R) over all N-subsets X of the padded window of R.

    Translation invariant, so R is placed at column 1.
    """
    R = RectangleSpec(1, depth, width)
    sites = window_sites((1 - pad, R.stop + pad), width)
    D = _cost_matrix(sites, R.sites)
    hist: dict[int, int] = {}
    for comb in itertools.combinations(range(len(sites)), R.particle_count):
        d = assignment_cost(D[list(comb)])
        hist[d] = hist.get(d, 0) + 1
    return hist


def outer_level_sum_bound(j: int, M: int, mu: float) -> float:
    """(1/j!) (2M/mu)^j: integral bound on the j-particle sum over sites outside R."""
    return (2.0 * M / mu) ** j / math.factorial(j)


def hole_level_sums(R: RectangleSpec, mu: float) -> np.ndarray:
    """Exact sums over j-hole sets Y in R of exp(-mu * sum |L_R(y)|), j = 0..N."""
    poly = np.array([1.0])
    for y in R.sites:
        w = math.exp(-mu * boundary_distance(R, y))
        poly = np.concatenate([poly, [0.0]]) + w * np.concatenate([[0.0], poly])
    return poly


def tail_bound(R: RectangleSpec, mu: float, pad: int) -> float:
    """Certified bound on the part of f(R, mu) from configurations leaving the window.

    Such a configuration has an outside particle beyond level ``pad``; the
    sum over that particle is at most (2M/mu) e^{-mu pad}, the remaining
    j-1 outside particles contribute at most ``outer_level_sum_bound`` and
    the holes are summed exactly.
    """
    M = R.width
    beyond = (2.0 * M / mu) * math.exp(-mu * pad)
    holes = hole_level_sums(R, mu)
    return float(
        sum(holes[j] * beyond * outer_level_sum_bound(j - 1, M, mu) for j in range(1, len(holes)))
    )


def f_truncated(R: RectangleSpec, mu: float, pad: int) -> TruncatedSum:
    """Window estimate of f(R, mu) = sum_X exp(-mu d_N(X, R))."""
    rect_depth(R.particle_count, R.width)
    if not mu > 0:
        raise ValueError(f"mu must be positive, got {mu}")
    if pad < 0:
        raise ValueError("pad must be nonnegative")
    hist = distance_histogram(R.depth, R.width, pad)
    lower = math.fsum(n * math.exp(-mu * d) for d, n in sorted(hist.items(), reverse=True))
    return TruncatedSum(
        lower=lower,
        certified_upper=lower + tail_bound(R, mu, pad),
        window=(R.start - pad, R.stop + pad),
        pad=pad,
        n_terms=sum(hist.values()),
    )


# --- family sums ------------------------------------------------------------------

@lru_cache(maxsize=128)
def _family_distances(window: tuple[int, int], width: int, ell: int, N: int, j: int) -> tuple[float, ...]:
    sites = [v for v in window_sites(window, width) if not 1 <= v[0] <= ell]
    return tuple(
        family_rect_distance(Configuration(X), N, ell, width)[0]
        for X in itertools.combinations(sites, j)
    )


def lemma61_check(
    R: RectangleSpec, mu: float, j: int, ell: int, window: tuple[int, int], pad: int = 2
) -> tuple[float, float]:
    """Truncated family sum versus 8 f(R, mu/2) / (1 - e^{-mu/2}).

    The left side sums exp(-mu d_N(A_{X,N}, R^N)) over j-subsets X of the
    window avoiding Lambda_ell; the right side uses the certified upper
    bracket of f(R, mu/2).
    """
    if j < 1:
        raise ValueError("j must be at least 1")
    N = R.particle_count
    rect_depth(N, R.width)
    dists = _family_distances(tuple(window), R.width, ell, N, j)
    lhs = math.fsum(math.exp(-mu * d) for d in dists if d != math.inf)
    f_up = f_truncated(R, mu / 2, pad).certified_upper
    return lhs, 8.0 * f_up / (-math.expm1(-mu / 2))


# --- entropy caps --------------------------------------------------------------------

def _check_alpha(alpha: float):
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")


def thm32_log_argument(alpha: float, ell: int, consts: BoundConstants) -> float:
    _check_alpha(alpha)
    M, mu = consts.M, consts.mu
    ma = mu * alpha
    log_term = (
        math.log(16.0)
        + 2 * alpha * math.log(consts.C)
        - math.log(-math.expm1(-ma))
        + math.log(M * ell)
        + math.log1p(2.0 * M / ma)
        + 4.0 * M / ma
    )
    return float(np.logaddexp(math.log(6.0), log_term))


def thm32_finite_cap(alpha: float, ell: int, consts: BoundConstants) -> float:
    """Finite-ell entropy cap valid for every droplet state, any V >= 0."""
    if ell < 1:
        raise ValueError("ell must be positive")
    return thm32_log_argument(alpha, ell, consts) / (1.0 - alpha)


def thm33_log_K(alpha: float, consts: BoundConstants) -> float:
    """log K_alpha, where K_alpha caps E[sup tr rho^alpha] under i.i.d. fields."""
    _check_alpha(alpha)
    if consts.lam is None or consts.C_tilde is None:
        raise ValueError("lambda and C~ are required; call lemma43_constants first")
    if not 0 < consts.lam < 1:
        raise ValueError(f"lambda must lie in (0, 1), got {consts.lam}")
    M, mu = consts.M, consts.mu
    ma = mu * alpha
    la = consts.lam**alpha
    log_term = (
        math.log(2.0)
        + alpha * math.log(consts.C * consts.C_tilde)
        + math.log(8.0)
        - math.log(-math.expm1(-ma / 2))
        + math.log1p(4.0 * M / ma)
        + 8.0 * M / ma
        + math.log(la)
        - math.log1p(-la)
    )
    return float(np.logaddexp(math.log(6.0), log_term))


def thm33_K(alpha: float, consts: BoundConstants) -> float:
    return math.exp(thm33_log_K(alpha, consts))


def area_law_cap(consts: BoundConstants) -> float:
    """2 log K_{1/2}: ell-independent cap on the expected droplet entropy."""
    return 2.0 * thm33_log_K(0.5, consts)


def prop42_rhs(norms_by_j: Mapping[int, Sequence[float]], alpha: float, tol: float = 1e-9) -> float:
    """6 + 2 sum_j sum_X ||chi_{A_{X,N}} psi||^{2 alpha}."""
    _check_alpha(alpha)
    total = []
    for j, norms in norms_by_j.items():
        arr = np.asarray(norms, dtype=float)
        if arr.size and (arr.min() < -tol or arr.max() > 1 + tol):
            raise ValueError(f"norm outside [0, 1] at j={j}")
        total.append(np.clip(arr, 0.0, 1.0) ** (2 * alpha))
    return 6.0 + 2.0 * (math.fsum(np.concatenate(total)) if total else 0.0)
