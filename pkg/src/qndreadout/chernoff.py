"""Chernoff information of an outcome pair and related statistics.

The central quantity is the infimum over s in [0, 1] of the cumulant
generating function K(s) = ln Int P_plus^s P_minus^(1-s). Its negated
minimum value C sets the exponential decay rate of the cumulative error
per repetition; the optimizer s_star, the curvature k2 = K''(s_star) and
the non-Gaussianity parameter alpha feed the finite-N error predictors.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import optimize, special

from . import distributions as dist
from ._integrate import IntegrationError, log_integral, weighted_moments

__all__ = [
    "CgfEvaluation",
    "ChernoffSummary",
    "SmallCExpansion",
    "DegeneratePairWarning",
    "ExpansionRangeWarning",
    "cgf",
    "chernoff_information",
    "effective_distribution",
    "cumulants_under_eff",
    "small_c_expansion",
]

DEGENERATE_THRESHOLD = 1e-12
_BOUNDARY_MARGIN = 1e-4
_QUAD_EPSREL = 1e-11


class DegeneratePairWarning(UserWarning):
    """The two conditional distributions are numerically indistinguishable."""


class ExpansionRangeWarning(UserWarning):
    """The small-C expansion was evaluated outside its validity range."""


@dataclass(frozen=True)
class CgfEvaluation:
    s: float
    k_minus: float


@dataclass(frozen=True)
class ChernoffSummary:
    """Result of the Chernoff optimization for one outcome pair.

    c: figure of merit in nats per repetition.
    s_star: minimizing exponent in [0, 1].
    alpha: non-Gaussianity parameter 2 s*^2 (1-s*)^2 k2 / c (NaN when
        undefined: degenerate pair or boundary optimum).
    k2: second cumulant of the log-likelihood ratio under the tilted
        distribution, equal to K''(s_star).
    bhattacharyya: -K(1/2); satisfies c/2 <= bhattacharyya <= c.
    s_tol: the s-localization tolerance achieved by the minimizer.
    degenerate: the pair is indistinguishable (c below threshold).
    boundary: the optimum sits at the edge of [0, 1]; alpha is undefined.
    """

    c: float
    s_star: float
    alpha: float
    k2: float
    bhattacharyya: float
    s_tol: float
    degenerate: bool = False
    boundary: bool = False

    def to_json_dict(self):
        return {
            "C": self.c,
            "s_star": self.s_star,
            "alpha": self.alpha,
            "k2": self.k2,
            "bhattacharyya": self.bhattacharyya,
            "s_tol": self.s_tol,
            "degenerate": self.degenerate,
            "boundary": self.boundary,
        }


def _tilted_log_terms(lp, lm, s):
    # s*lp + (1-s)*lm with the s = 0/1 endpoints handled exactly so that
    # 0 * (-inf) never produces NaN for zero-mass outcomes
    if s == 0.0:
        return lm
    if s == 1.0:
        return lp
    return s * lp + (1.0 - s) * lm


def cgf(pair, s):
    """K(s) = ln Int/Sum of P_plus^s P_minus^(1-s) at one exponent s."""
    s = float(s)
    if not 0.0 <= s <= 1.0:
        raise ValueError("s must lie in [0, 1]")
    if pair.enumerable:
        _, lp, lm = pair.enumerated()
        value = float(special.logsumexp(_tilted_log_terms(lp, lm, s)))
    else:
        def log_f(o):
            return _tilted_log_terms(pair.plus.log_density(o),
                                     pair.minus.log_density(o), s)
        value = log_integral(log_f, landmarks=pair.landmarks, epsrel=_QUAD_EPSREL)
    return CgfEvaluation(s, value)


def chernoff_information(pair, s_tol=1e-10):
    """Minimize the cumulant generating function over s in [0, 1].

    Returns a ChernoffSummary. Degenerate pairs (c below 1e-12) are
    flagged and reported with the canonical s_star = 1/2; a boundary
    optimum is flagged rather than raised and leaves alpha undefined.
    """
    if s_tol <= 0:
        raise ValueError("s_tol must be positive")
    res = optimize.minimize_scalar(lambda s: cgf(pair, s).k_minus,
                                   bounds=(0.0, 1.0), method="bounded",
                                   options={"xatol": s_tol})
    s_star = float(res.x)
    c = max(0.0, -float(res.fun))
    bhattacharyya = max(0.0, -cgf(pair, 0.5).k_minus)

    degenerate = c < DEGENERATE_THRESHOLD
    boundary = (not degenerate) and min(s_star, 1.0 - s_star) < _BOUNDARY_MARGIN
    if degenerate:
        warnings.warn("distributions are indistinguishable (C = 0)",
                      DegeneratePairWarning, stacklevel=2)
        s_star = 0.5
        c = 0.0
        bhattacharyya = 0.0

    k2 = cumulants_under_eff(pair, s_star, 2)[0]
    if degenerate or boundary:
        alpha = math.nan
    else:
        alpha = 2.0 * s_star**2 * (1.0 - s_star) ** 2 * k2 / c
    return ChernoffSummary(c=c, s_star=s_star, alpha=alpha, k2=float(k2),
                           bhattacharyya=bhattacharyya, s_tol=float(s_tol),
                           degenerate=degenerate, boundary=boundary)


class TiltedDensity(dist.Density):
    """Normalized geometric interpolation P_plus^s P_minus^(1-s) / Z."""

    def __init__(self, pair, s):
        if not 0.0 < s < 1.0:
            raise ValueError("s must lie strictly inside (0, 1)")
        self.pair = pair
        self.s = float(s)
        self.support = pair.support
        self.log_norm = cgf(pair, s).k_minus
        self._grid = None

    def log_density(self, o):
        lp = self.pair.plus.log_density(o)
        lm = self.pair.minus.log_density(o)
        return _tilted_log_terms(lp, lm, self.s) - self.log_norm

    @property
    def enumerable(self):
        return self.pair.enumerable

    def outcomes(self):
        grid, _, _ = self.pair.enumerated()
        return grid

    def log_mass(self, o):
        lp = self.pair.plus.log_mass(o)
        lm = self.pair.minus.log_mass(o)
        return _tilted_log_terms(lp, lm, self.s) - self.log_norm

    def sample(self, rng, size=None):
        n = 1 if size is None else int(size)
        if self.enumerable:
            grid = self.outcomes()
            probs = np.exp(self.log_mass(grid))
            probs = probs / probs.sum()
            out = rng.choice(grid, size=n, p=probs)
        else:
            # tabulated inverse CDF on the compactified axis; adequate for
            # simulation checks, not for high-accuracy integrals
            if self._grid is None:
                theta = np.linspace(-np.pi / 2, np.pi / 2, 16385)[1:-1]
                o = np.tan(theta)
                pdf_theta = np.exp(self.log_density(o)) / np.cos(theta) ** 2
                cdf = np.concatenate([[0.0], np.cumsum(
                    0.5 * (pdf_theta[1:] + pdf_theta[:-1]) * np.diff(theta))])
                cdf /= cdf[-1]
                self._grid = (cdf, o)
            cdf, o = self._grid
            out = np.interp(rng.random(n), cdf, o)
        return out[0] if size is None else out


def effective_distribution(pair, s_star):
    """The tilted outcome distribution whose mean log-likelihood ratio is 0.

    At the Chernoff optimizer the first moment of the log-likelihood
    ratio under this distribution vanishes (the saddle-point condition).
    """
    return TiltedDensity(pair, s_star)


def _central_cumulants(m1, m2, m3, m4):
    mu2 = m2 - m1 * m1
    mu3 = m3 - 3.0 * m1 * m2 + 2.0 * m1**3
    mu4 = m4 - 4.0 * m1 * m3 + 6.0 * m1 * m1 * m2 - 3.0 * m1**4
    return mu2, mu3, mu4 - 3.0 * mu2 * mu2


def cumulants_under_eff(pair, s_star, max_order=4):
    """Central cumulants (k2, k3, k4) of the log-likelihood ratio under
    the tilted distribution at s_star; k_n equals the n-th derivative of
    the cumulant generating function there.

    Computed by direct moment integrals rather than finite differences of
    the minimized function, which are noise-dominated beyond order two.
    """
    if max_order not in (2, 3, 4):
        raise ValueError("max_order must be 2, 3, or 4")
    if not 0.0 < s_star < 1.0:
        raise ValueError("s_star must lie strictly inside (0, 1)")
    if pair.enumerable:
        _, lp, lm = pair.enumerated()
        logw = _tilted_log_terms(lp, lm, s_star)
        w = np.exp(logw - special.logsumexp(logw))
        lam = lp - lm
        if pair.lambda_clamp is not None:
            lam = np.clip(lam, -pair.lambda_clamp, pair.lambda_clamp)
        lam = np.where(w > 0.0, lam, 0.0)
        moments = [float(np.sum(w * lam**k)) for k in (1, 2, 3, 4)]
    else:
        def log_w(o):
            return _tilted_log_terms(pair.plus.log_density(o),
                                     pair.minus.log_density(o), s_star)

        def lam(o):
            return pair.plus.log_density(o) - pair.minus.log_density(o)

        _, moments = weighted_moments(log_w, lam, (1, 2, 3, 4),
                                      landmarks=pair.landmarks,
                                      epsrel=_QUAD_EPSREL)
    k2, k3, k4 = _central_cumulants(*moments)
    return (float(k2), float(k3), float(k4))[: max_order - 1]


@dataclass(frozen=True)
class SmallCExpansion:
    """Leading-order statistics from the weak-signal expansion.

    Valid when the two distributions nearly overlap (c below about 0.1);
    in_range is False (with a warning) outside that regime.
    """

    c: float
    alpha: float
    s_star: float
    in_range: bool = True


def small_c_expansion(pair):
    """Expand C, alpha, s_star in moments of y = (P_plus - P_minus)/Pbar.

    Pbar is the equal-weight average distribution. Uses
    y = 2 tanh(lambda/2) pointwise, which is the same ratio evaluated
    stably from the log-densities.
    """
    if pair.enumerable:
        _, lp, lm = pair.enumerated()
        with np.errstate(invalid="ignore"):
            y = 2.0 * np.tanh(0.5 * (lp - lm))
        pbar = 0.5 * (np.exp(lp) + np.exp(lm))
        y = np.where(pbar > 0.0, y, 0.0)
        m2, m3, m4 = (float(np.sum(pbar * y**k)) for k in (2, 3, 4))
    else:
        def log_pbar(o):
            return np.logaddexp(pair.plus.log_density(o),
                                pair.minus.log_density(o)) - math.log(2.0)

        def y_stat(o):
            return 2.0 * np.tanh(0.5 * (pair.plus.log_density(o)
                                        - pair.minus.log_density(o)))

        _, (m2, m3, m4) = weighted_moments(log_pbar, y_stat, (2, 3, 4),
                                           landmarks=pair.landmarks,
                                           epsrel=_QUAD_EPSREL)
    if m2 <= 0.0:
        return SmallCExpansion(c=0.0, alpha=1.0, s_star=0.5)
    c = m2 / 8.0
    s_star = 0.5 + m3 / (24.0 * m2)
    alpha = 1.0 + m2 / 16.0 + m3 * m3 / (48.0 * m2 * m2) - m4 / (48.0 * m2)
    in_range = c <= 0.1
    if not in_range:
        warnings.warn(f"expansion evaluated at C ~ {c:.3g} > 0.1; "
                      "results are unreliable", ExpansionRangeWarning,
                      stacklevel=2)
    return SmallCExpansion(c=float(c), alpha=float(alpha),
                           s_star=float(s_star), in_range=in_range)
