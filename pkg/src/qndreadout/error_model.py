"""Analytic predictors for cumulative readout error rates.

Covers the Gaussian ansatz e_N = erfc(sqrt(C N))/2, its saddle-point
refinement in terms of (C, alpha, s_star), the closed-form Chernoff
information of a binarized readout, and the soft-decoding advantage
A = C / C_b that quantifies how many extra repetitions hard decoding
costs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from . import chernoff as chern
from . import distributions as dist
from ._integrate import log_integral

__all__ = [
    "ErrorCurve",
    "BinaryChernoff",
    "AdvantageReport",
    "AdvantageGrid",
    "GAUSSIAN_ANSATZ",
    "SADDLE_POINT",
    "CHERNOFF_BOUND",
    "MONTE_CARLO",
    "gaussian_ansatz",
    "saddle_point",
    "chernoff_upper_bound",
    "summary_from_values",
    "binary_chernoff",
    "advantage",
    "conversion_chernoff",
    "snr_from_binarized_error",
    "advantage_grid",
]

GAUSSIAN_ANSATZ = "gaussian-ansatz"
SADDLE_POINT = "saddle-point"
CHERNOFF_BOUND = "chernoff-upper-bound"
MONTE_CARLO = "monte-carlo"


@dataclass(frozen=True)
class ErrorCurve:
    """Cumulative error rates against repetition count.

    n_values may be real-valued for smooth analytic overlays. For the
    analytic methods e_avg = (e_plus + e_minus)/2 and every entry lies in
    [0, 1/2]; uncertainties are attached by the Monte Carlo engine only.
    fallback marks saddle-point entries replaced by the Chernoff upper
    bound because the correction terms are outside their regime.
    """

    n_values: np.ndarray
    e_avg: np.ndarray
    e_plus: np.ndarray
    e_minus: np.ndarray
    method: str
    uncertainties: np.ndarray | None = None
    fallback: np.ndarray | None = None


def _as_n_array(n_values, allow_zero):
    n = np.atleast_1d(np.asarray(n_values, dtype=float))
    if n.ndim != 1 or n.size == 0:
        raise ValueError("n_values must be a nonempty 1-D sequence")
    if np.any(~np.isfinite(n)) or np.any(n < 0):
        raise ValueError("repetition counts must be finite and nonnegative")
    if not allow_zero and np.any(n == 0):
        raise ValueError("N = 0 is outside the formula's domain")
    return n


def gaussian_ansatz(c, n_values):
    """e_N = erfc(sqrt(C N))/2 for all three (conditioned and average) rates."""
    if c < 0:
        raise ValueError("C must be nonnegative")
    n = _as_n_array(n_values, allow_zero=True)
    e = 0.5 * special.erfc(np.sqrt(c * n))
    return ErrorCurve(n, e, e.copy(), e.copy(), GAUSSIAN_ANSATZ)


def chernoff_upper_bound(c, n_values):
    """The exponential bound e_N <= exp(-C N)/2."""
    if c < 0:
        raise ValueError("C must be nonnegative")
    n = _as_n_array(n_values, allow_zero=True)
    e = 0.5 * np.exp(-c * n)
    return ErrorCurve(n, e, e.copy(), e.copy(), CHERNOFF_BOUND)


def summary_from_values(c, alpha, s_star):
    """Assemble a ChernoffSummary from explicitly supplied statistics."""
    if c <= 0:
        raise ValueError("C must be positive")
    if not 0.0 < s_star < 1.0:
        raise ValueError("s_star must lie strictly inside (0, 1)")
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    k2 = alpha * c / (2.0 * s_star**2 * (1.0 - s_star) ** 2)
    return chern.ChernoffSummary(c=float(c), s_star=float(s_star),
                                 alpha=float(alpha), k2=k2,
                                 bhattacharyya=math.nan, s_tol=math.nan)


def saddle_point(summary, n_values):
    """Saddle-point error rates from (C, alpha, s_star).

    e_N gains the correction (alpha^-1/2 - 1) exp(-CN)/sqrt(4 pi C N) on
    top of the Gaussian ansatz, and the conditioned rates split by
    +-(2 s_star - 1) exp(-CN)/sqrt(4 pi alpha C N). Where alpha*C*N < 0.1
    the corrections are outside their regime and entries fall back to the
    Chernoff upper bound exp(-CN)/2, marked in fallback. When alpha = 1
    and s_star = 1/2 both corrections vanish identically and the curve
    equals the Gaussian ansatz at every N, so no fallback applies.
    """
    c, alpha, s_star = summary.c, summary.alpha, summary.s_star
    if c <= 0:
        raise ValueError("C must be positive")
    if not np.isfinite(alpha) or alpha <= 0:
        raise ValueError("alpha is undefined for this summary")
    if not 0.0 < s_star < 1.0:
        raise ValueError("s_star must lie strictly inside (0, 1)")
    n = _as_n_array(n_values, allow_zero=False)
    cn = c * n
    decay = np.exp(-cn)
    base = 0.5 * special.erfc(np.sqrt(cn))
    corr = (alpha**-0.5 - 1.0) / np.sqrt(4.0 * np.pi * cn) * decay
    asym = (2.0 * s_star - 1.0) / np.sqrt(4.0 * np.pi * alpha * cn) * decay
    e_avg = base + corr
    e_plus = e_avg + asym
    e_minus = e_avg - asym

    corrections_active = alpha != 1.0 or s_star != 0.5
    fallback = (alpha * cn < 0.1) & corrections_active
    if np.any(fallback):
        bound = 0.5 * decay
        e_avg = np.where(fallback, bound, e_avg)
        e_plus = np.where(fallback, bound, e_plus)
        e_minus = np.where(fallback, bound, e_minus)
    return ErrorCurve(n, np.clip(e_avg, 0.0, 0.5), np.clip(e_plus, 0.0, 0.5),
                      np.clip(e_minus, 0.0, 0.5), SADDLE_POINT,
                      fallback=fallback)


@dataclass(frozen=True)
class BinaryChernoff:
    c_b: float
    s_star: float
    reflected: bool = False


def binary_chernoff(eps_plus, eps_minus):
    """Closed-form Chernoff information of a binarized readout.

    The optimization over s has an explicit solution for two-outcome
    distributions. Rate pairs with eps_plus + eps_minus > 1 describe an
    anti-correlated binarizer; relabeling the binary outcome maps them to
    (1 - eps_plus, 1 - eps_minus) without changing the channel, so they
    are reflected jointly and flagged. A single rate above 1/2 with sum
    below 1 is a legitimate lopsided channel and enters the closed form
    as is; reflecting only that component would describe a different,
    more distinguishable channel.
    """
    for e in (eps_plus, eps_minus):
        if not 0.0 < e < 1.0:
            raise ValueError("binary error rates must lie strictly inside (0, 1)")
    reflected = eps_plus + eps_minus > 1.0
    if reflected:
        eps_plus = 1.0 - eps_plus
        eps_minus = 1.0 - eps_minus
    if eps_plus + eps_minus == 1.0:
        # P(y|+) == P(y|-): the binarizer carries no information
        return BinaryChernoff(0.0, 0.5, reflected)

    if eps_plus == eps_minus:
        eps = eps_plus
        c_b = -0.5 * math.log(4.0 * eps * (1.0 - eps))
        return BinaryChernoff(c_b, 0.5, reflected)

    la = math.log((1.0 - eps_minus) / eps_plus)
    lb = math.log((1.0 - eps_plus) / eps_minus)
    denom = math.log((1.0 - eps_plus) * (1.0 - eps_minus) / (eps_plus * eps_minus))
    s_star = math.log(((1.0 - eps_minus) / eps_minus) * (la / lb)) / denom
    c_b = -np.logaddexp(
        s_star * math.log1p(-eps_plus) + (1.0 - s_star) * math.log(eps_minus),
        s_star * math.log(eps_plus) + (1.0 - s_star) * math.log1p(-eps_minus),
    )
    return BinaryChernoff(float(c_b), float(s_star), reflected)


@dataclass(frozen=True)
class AdvantageReport:
    """Soft-versus-hard decoding comparison for one outcome pair.

    advantage = c / c_b is also the factor by which hard decoding
    multiplies the number of repetitions needed for a target error rate.
    c_b_infinite marks perfect binarized readouts (some eps exactly 0),
    where c_b diverges and the ratio is undefined.
    """

    c: float
    c_b: float
    advantage: float
    eps_plus: float
    eps_minus: float
    s_star_b: float
    c_b_infinite: bool = False


def advantage(pair):
    """Compare soft decoding (C) against binarized decoding (C_b)."""
    summary = chern.chernoff_information(pair)
    errors = dist.single_repetition_errors(pair)
    eps_p, eps_m = errors.eps_plus, errors.eps_minus
    if eps_p == 0.0 or eps_m == 0.0:
        return AdvantageReport(c=summary.c, c_b=math.inf, advantage=math.nan,
                               eps_plus=eps_p, eps_minus=eps_m,
                               s_star_b=math.nan, c_b_infinite=True)
    binary = binary_chernoff(eps_p, eps_m)
    if binary.c_b == 0.0:
        ratio = math.nan
    else:
        ratio = summary.c / binary.c_b
    return AdvantageReport(c=summary.c, c_b=binary.c_b, advantage=ratio,
                           eps_plus=eps_p, eps_minus=eps_m,
                           s_star_b=binary.s_star)


def conversion_chernoff(r, eta):
    """Chernoff information of a Gaussian readout with conversion errors.

    Evaluates C = r/2 - ln Int phi(x) sqrt(1 + 4 eta (1-eta) sinh^2(sqrt(r) x)) dx
    with the large-argument limit handled in log space, where the root
    approaches 2 sqrt(eta(1-eta)) cosh(sqrt(r) x).
    """
    if r <= 0:
        raise ValueError("r must be positive")
    if not 0.0 <= eta <= 0.5:
        raise ValueError("eta must lie in [0, 1/2]")
    if eta == 0.0:
        return 0.5 * r
    if eta == 0.5:
        return 0.0
    log_g = math.log(4.0 * eta * (1.0 - eta))
    sqrt_r = math.sqrt(r)

    def log_f(x):
        u = np.abs(sqrt_r * x)
        with np.errstate(divide="ignore"):
            log_sinh = u + np.log1p(-np.exp(-2.0 * u)) - math.log(2.0)
        body = 0.5 * np.logaddexp(0.0, log_g + 2.0 * log_sinh)
        return -0.5 * x * x - 0.5 * math.log(2.0 * math.pi) + body

    value = log_integral(log_f, landmarks=(-sqrt_r, 0.0, sqrt_r))
    return 0.5 * r - value


def snr_from_binarized_error(eps_g):
    """Invert eps_G = erfc(sqrt(r/2))/2 for the signal-to-noise ratio r."""
    if not 0.0 < eps_g < 0.5:
        raise ValueError("eps_g must lie strictly inside (0, 1/2)")
    return 2.0 * float(special.erfcinv(2.0 * eps_g)) ** 2


@dataclass(frozen=True)
class AdvantageGrid:
    """Soft-decoding advantage over a (eps_g, eta) parameter sweep."""

    eps_g: np.ndarray
    eta: np.ndarray
    r: np.ndarray
    c: np.ndarray
    c_b: np.ndarray
    advantage: np.ndarray

    def rows(self):
        """Iterate cells in row-major (eps_g outer, eta inner) order."""
        for i, eg in enumerate(self.eps_g):
            for j, et in enumerate(self.eta):
                yield (float(eg), float(et), float(self.r[i]),
                       float(self.c[i, j]), float(self.c_b[i, j]),
                       float(self.advantage[i, j]))


def advantage_grid(eps_g_values, eta_values):
    """Advantage surface: Gaussian noise of strength eps_G plus conversion
    errors of rate eta, binarized error eps_eta = (1-eta) eps_G + eta (1-eps_G)."""
    eps_g = np.asarray(eps_g_values, dtype=float)
    eta = np.asarray(eta_values, dtype=float)
    if np.any((eps_g <= 0) | (eps_g >= 0.5)):
        raise ValueError("eps_g values must lie strictly inside (0, 1/2)")
    if np.any((eta < 0) | (eta > 0.5)):
        raise ValueError("eta values must lie in [0, 1/2]")
    r = np.array([snr_from_binarized_error(e) for e in eps_g])
    shape = (eps_g.size, eta.size)
    c = np.empty(shape)
    c_b = np.empty(shape)
    adv = np.empty(shape)
    for i, (eg, ri) in enumerate(zip(eps_g, r)):
        for j, et in enumerate(eta):
            c[i, j] = conversion_chernoff(ri, et)
            eps_eta = (1.0 - et) * eg + et * (1.0 - eg)
            binary = binary_chernoff(eps_eta, eps_eta)
            c_b[i, j] = binary.c_b
            adv[i, j] = c[i, j] / binary.c_b if binary.c_b > 0 else math.nan
    return AdvantageGrid(eps_g, eta, r, c, c_b, adv)
