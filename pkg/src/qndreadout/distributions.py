"""Conditional outcome-distribution pairs for binary-observable readout.

Each repetition of a readout produces an outcome O whose distribution is
P_plus or P_minus depending on the eigenvalue a = +1 or a = -1 of the
measured observable. This module defines the built-in families of
(P_plus, P_minus) pairs, their seeded samplers, the per-repetition
log-likelihood ratio, and the single-repetition error rates of the
binarized (sign) decision.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import optimize, special, stats

from ._integrate import IntegrationError, log_integral

__all__ = [
    "SupportError",
    "SupportKind",
    "Support",
    "Density",
    "OutcomePair",
    "SingleRepetitionErrors",
    "gaussian_pair",
    "poissonian_pair",
    "cauchy_pair",
    "gaussian_conversion_pair",
    "binary_pair",
    "gaussian_mixture_pair",
    "empirical_pair",
    "empirical_pair_from_csv",
    "single_repetition_errors",
]

DEFAULT_EMPIRICAL_FLOOR = 1e-8
DEFAULT_LAMBDA_CLAMP = 30.0


class SupportError(ValueError):
    """An outcome lies outside the support of the distribution pair."""


class SupportKind(enum.Enum):
    CONTINUOUS = "continuous-scalar"
    DISCRETE = "discrete-integer"
    BINARY = "binary"


@dataclass(frozen=True)
class Support:
    kind: SupportKind
    lo: float = -np.inf
    hi: float = np.inf


class Density:
    """One conditional outcome distribution.

    Concrete densities expose a vectorized log-density, a seeded sampler
    driven by a caller-provided numpy Generator, and, when the effective
    support is enumerable, the outcome grid with log point masses.
    """

    support: Support

    def log_density(self, o):
        raise NotImplementedError

    def sample(self, rng, size=None):
        raise NotImplementedError

    @property
    def enumerable(self):
        return False

    def outcomes(self):
        raise NotImplementedError("support is not enumerable")

    def log_mass(self, o):
        raise NotImplementedError("support is not enumerable")


class GaussianMixtureDensity(Density):
    """Weighted mixture of normal components on the real line."""

    def __init__(self, weights, means, sigmas):
        weights = np.asarray(weights, dtype=float)
        means = np.asarray(means, dtype=float)
        sigmas = np.asarray(sigmas, dtype=float)
        if weights.ndim != 1 or weights.shape != means.shape != sigmas.shape:
            raise ValueError("weights, means, sigmas must be equal-length 1-D")
        if np.any(weights < 0) or not math.isclose(weights.sum(), 1.0, rel_tol=1e-12):
            raise ValueError("mixture weights must be nonnegative and sum to 1")
        if np.any(sigmas <= 0):
            raise ValueError("mixture sigmas must be positive")
        self.weights = weights
        self.means = means
        self.sigmas = sigmas
        self.support = Support(SupportKind.CONTINUOUS)
        with np.errstate(divide="ignore"):
            self._log_w = np.log(weights)
        self._log_norm = -np.log(sigmas) - 0.5 * np.log(2.0 * np.pi)

    def log_density(self, o):
        o = np.asarray(o, dtype=float)
        if self.weights.size == 1:
            z = (o - self.means[0]) / self.sigmas[0]
            return self._log_w[0] + self._log_norm[0] - 0.5 * z * z
        z = (o[..., None] - self.means) / self.sigmas
        comp = self._log_w + self._log_norm - 0.5 * z * z
        # max-shifted reduction over components; faster than the scipy
        # helper in this hot path and -inf-safe for zero weights
        shift = comp.max(axis=-1)
        safe = np.where(np.isfinite(shift), shift, 0.0)
        total = np.exp(comp - safe[..., None]).sum(axis=-1)
        with np.errstate(divide="ignore"):
            return np.where(np.isfinite(shift), safe + np.log(total), -np.inf)

    def sample(self, rng, size=None):
        n = 1 if size is None else int(size)
        idx = rng.choice(self.weights.size, size=n, p=self.weights)
        out = rng.normal(self.means[idx], self.sigmas[idx])
        return out[0] if size is None else out


class CauchyDensity(Density):
    """Cauchy (Lorentzian) line shape; no finite moments, log-space only."""

    def __init__(self, loc, scale):
        if scale <= 0:
            raise ValueError("scale must be positive")
        self.loc = float(loc)
        self.scale = float(scale)
        self.support = Support(SupportKind.CONTINUOUS)

    def log_density(self, o):
        z = (np.asarray(o, dtype=float) - self.loc) / self.scale
        return -np.log(np.pi * self.scale) - np.log1p(z * z)

    def sample(self, rng, size=None):
        n = 1 if size is None else int(size)
        out = self.loc + self.scale * rng.standard_cauchy(n)
        return out[0] if size is None else out


class PoissonDensity(Density):
    """Photon-count distribution with mean mu."""

    def __init__(self, mu):
        if mu < 0:
            raise ValueError("mu must be nonnegative")
        self.mu = float(mu)
        self.support = Support(SupportKind.DISCRETE, lo=0.0)

    def log_density(self, o):
        k = np.asarray(o, dtype=float)
        if self.mu == 0.0:
            return np.where(k == 0.0, 0.0, -np.inf)
        return k * np.log(self.mu) - self.mu - special.gammaln(k + 1.0)

    def sample(self, rng, size=None):
        out = rng.poisson(self.mu, size=1 if size is None else int(size))
        out = out.astype(float)
        return out[0] if size is None else out

    @property
    def enumerable(self):
        return True

    def outcomes(self):
        # extend until the remaining tail is < 1e-15 of the accumulated mass
        if self.mu == 0.0:
            return np.array([0.0])
        hi = int(stats.poisson.isf(1e-16, self.mu)) + 5
        while stats.poisson.sf(hi, self.mu) > 1e-15 * stats.poisson.cdf(hi, self.mu):
            hi = 2 * hi + 10
        return np.arange(hi + 1, dtype=float)

    def log_mass(self, o):
        return self.log_density(o)


class TwoPointDensity(Density):
    """Distribution over the binarized outcomes {+1, -1}."""

    def __init__(self, p_plus):
        if not 0.0 <= p_plus <= 1.0:
            raise ValueError("p_plus must lie in [0, 1]")
        self.p_plus = float(p_plus)
        self.support = Support(SupportKind.BINARY, lo=-1.0, hi=1.0)

    def log_density(self, o):
        o = np.asarray(o, dtype=float)
        lp = math.log(self.p_plus) if self.p_plus > 0 else -np.inf
        lm = math.log1p(-self.p_plus) if self.p_plus < 1 else -np.inf
        return np.where(o > 0, lp, lm)

    def sample(self, rng, size=None):
        n = 1 if size is None else int(size)
        out = np.where(rng.random(n) < self.p_plus, 1.0, -1.0)
        return out[0] if size is None else out

    @property
    def enumerable(self):
        return True

    def outcomes(self):
        return np.array([1.0, -1.0])

    def log_mass(self, o):
        return self.log_density(o)


class HistogramDensity(Density):
    """Piecewise-constant density over shared uniform bins."""

    def __init__(self, edges, probs):
        edges = np.asarray(edges, dtype=float)
        probs = np.asarray(probs, dtype=float)
        if edges.ndim != 1 or edges.size != probs.size + 1:
            raise ValueError("need len(edges) == len(probs) + 1")
        if np.any(np.diff(edges) <= 0):
            raise ValueError("bin edges must be strictly increasing")
        if np.any(probs <= 0) or not math.isclose(probs.sum(), 1.0, rel_tol=1e-9):
            raise ValueError("bin masses must be positive and sum to 1")
        self.edges = edges
        self.probs = probs
        self.widths = np.diff(edges)
        self.support = Support(SupportKind.CONTINUOUS, lo=edges[0], hi=edges[-1])
        self._log_probs = np.log(probs)

    def _bin_index(self, o):
        o = np.asarray(o, dtype=float)
        idx = np.searchsorted(self.edges, o, side="right") - 1
        return np.clip(idx, 0, self.probs.size - 1)

    def log_density(self, o):
        o = np.asarray(o, dtype=float)
        idx = self._bin_index(o)
        out = self._log_probs[idx] - np.log(self.widths[idx])
        inside = (o >= self.edges[0]) & (o <= self.edges[-1])
        return np.where(inside, out, -np.inf)

    def sample(self, rng, size=None):
        n = 1 if size is None else int(size)
        idx = rng.choice(self.probs.size, size=n, p=self.probs)
        u = rng.random(n)
        out = self.edges[idx] + u * self.widths[idx]
        return out[0] if size is None else out

    @property
    def enumerable(self):
        return True

    def outcomes(self):
        return 0.5 * (self.edges[:-1] + self.edges[1:])

    def log_mass(self, o):
        return self._log_probs[self._bin_index(o)]


@dataclass(frozen=True)
class OutcomePair:
    """The two conditional distributions (P_plus, P_minus) of one readout.

    lambda_clamp, when set, bounds the log-likelihood ratio (used for
    empirical histograms where floored bins would otherwise produce huge
    ratios). landmarks are outcome positions of known structure passed to
    the quadrature as panel hints.
    """

    support: Support
    plus: Density
    minus: Density
    lambda_clamp: float | None = None
    landmarks: tuple = ()

    def __post_init__(self):
        if self.plus.support != self.minus.support:
            raise ValueError("both members must share one support")
        if self.plus.support != self.support:
            raise ValueError("pair support must match member support")

    def validate_outcomes(self, o):
        """Coerce outcomes to a float array, raising SupportError outside."""
        o = _coerce_outcomes(o, self.support.kind)
        kind = self.support.kind
        if kind is SupportKind.BINARY:
            bad = ~np.isin(o, (1.0, -1.0))
        elif kind is SupportKind.DISCRETE:
            bad = ~np.isfinite(o) | (o != np.floor(o)) | (o < self.support.lo)
        else:
            bad = ~np.isfinite(o) | (o < self.support.lo) | (o > self.support.hi)
        if np.any(bad):
            val = np.asarray(o)[bad].ravel()[0]
            raise SupportError(f"outcome {val!r} outside the {kind.value} support")
        return o

    def log_likelihood_ratio(self, o):
        """ln P_plus(o) - ln P_minus(o), clamped when lambda_clamp is set."""
        arr = self.validate_outcomes(o)
        lam = self.plus.log_density(arr) - self.minus.log_density(arr)
        if self.lambda_clamp is not None:
            lam = np.clip(lam, -self.lambda_clamp, self.lambda_clamp)
        return float(lam) if np.isscalar(o) or np.ndim(o) == 0 else lam

    def sample(self, eigenvalue, rng, size=None):
        """Draw outcomes from P_plus (eigenvalue +1) or P_minus (-1)."""
        if eigenvalue not in (1, -1):
            raise ValueError("eigenvalue must be +1 or -1")
        member = self.plus if eigenvalue == 1 else self.minus
        return member.sample(rng, size)

    def swapped(self):
        """The pair with the roles of the two eigenvalues exchanged."""
        return replace(self, plus=self.minus, minus=self.plus)

    @property
    def enumerable(self):
        return self.plus.enumerable and self.minus.enumerable

    def enumerated(self):
        """Shared outcome grid with both log-mass vectors (enumerable only)."""
        out_p = self.plus.outcomes()
        out_m = self.minus.outcomes()
        if out_p.size >= out_m.size:
            grid = out_p
        else:
            grid = out_m
        return grid, self.plus.log_mass(grid), self.minus.log_mass(grid)


def _coerce_outcomes(o, kind):
    arr = np.asarray(o)
    if arr.dtype.kind in "US":
        if kind is not SupportKind.BINARY:
            raise SupportError("string outcomes are only defined for binary support")
        flat = np.char.strip(arr.astype(str))
        mapped = np.where(flat == "+", 1.0, np.where(flat == "-", -1.0, np.nan))
        if np.any(np.isnan(mapped)):
            raise SupportError("binary outcomes must be +1/-1 or '+'/'-'")
        return mapped.astype(float)
    return arr.astype(float)


# ---------------------------------------------------------------------------
# family constructors


def gaussian_pair(r):
    """Additive Gaussian noise: means +-1, common variance 1/r (r = SNR)."""
    if r <= 0:
        raise ValueError("r must be positive")
    sigma = 1.0 / math.sqrt(r)
    plus = GaussianMixtureDensity([1.0], [1.0], [sigma])
    minus = GaussianMixtureDensity([1.0], [-1.0], [sigma])
    return OutcomePair(plus.support, plus, minus, landmarks=(-1.0, 0.0, 1.0))


def poissonian_pair(mu_plus, mu_minus):
    """Photon-count readout with eigenvalue-dependent means."""
    if mu_plus < 0 or mu_minus < 0:
        raise ValueError("means must be nonnegative")
    plus = PoissonDensity(mu_plus)
    minus = PoissonDensity(mu_minus)
    return OutcomePair(plus.support, plus, minus)


def cauchy_pair(gamma):
    """Heavy-tailed noise: Cauchy line shapes at locations +-1, scale gamma."""
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    plus = CauchyDensity(1.0, gamma)
    minus = CauchyDensity(-1.0, gamma)
    return OutcomePair(plus.support, plus, minus, landmarks=(-1.0, 0.0, 1.0))


def gaussian_conversion_pair(r, eta):
    """Gaussian readout whose eigenvalue is misconverted with probability eta.

    Each member is a two-component mixture: with probability 1 - eta the
    outcome is drawn around the true eigenvalue, with probability eta
    around the opposite one.
    """
    if r <= 0:
        raise ValueError("r must be positive")
    if not 0.0 <= eta <= 0.5:
        raise ValueError("eta must lie in [0, 1/2]")
    sigma = 1.0 / math.sqrt(r)
    plus = GaussianMixtureDensity([1.0 - eta, eta], [1.0, -1.0], [sigma, sigma])
    minus = GaussianMixtureDensity([1.0 - eta, eta], [-1.0, 1.0], [sigma, sigma])
    return OutcomePair(plus.support, plus, minus, landmarks=(-1.0, 0.0, 1.0))


def binary_pair(eps_plus, eps_minus):
    """Binarized readout that reports the wrong sign with rates eps_plus/minus."""
    if not 0.0 <= eps_plus <= 1.0 or not 0.0 <= eps_minus <= 1.0:
        raise ValueError("error rates must lie in [0, 1]")
    plus = TwoPointDensity(1.0 - eps_plus)
    minus = TwoPointDensity(eps_minus)
    return OutcomePair(plus.support, plus, minus)


def gaussian_mixture_pair(weights_plus, means_plus, sigmas_plus,
                          weights_minus, means_minus, sigmas_minus):
    """General mixture pair; used for randomized property sweeps."""
    plus = GaussianMixtureDensity(weights_plus, means_plus, sigmas_plus)
    minus = GaussianMixtureDensity(weights_minus, means_minus, sigmas_minus)
    marks = tuple(sorted(set(map(float, list(means_plus) + list(means_minus) + [0.0]))))
    return OutcomePair(plus.support, plus, minus, landmarks=marks)


def empirical_pair(bin_centers, counts_plus, counts_minus,
                   floor=DEFAULT_EMPIRICAL_FLOOR,
                   lambda_clamp=DEFAULT_LAMBDA_CLAMP):
    """Pair built from two histograms sharing one uniform bin grid.

    Zero-count bins are floored at `floor` (a fraction of the total mass)
    so the log-likelihood ratio stays finite; the ratio is additionally
    clamped to [-lambda_clamp, lambda_clamp].
    """
    centers = np.asarray(bin_centers, dtype=float)
    if centers.ndim != 1 or centers.size < 2:
        raise ValueError("need at least two bins")
    steps = np.diff(centers)
    if np.any(steps <= 0) or not np.allclose(steps, steps[0], rtol=1e-6):
        raise ValueError("bin centers must be increasing and uniformly spaced")
    if floor <= 0:
        raise ValueError("floor must be positive")
    width = steps[0]
    edges = np.concatenate([centers - 0.5 * width, [centers[-1] + 0.5 * width]])

    def floored(counts):
        counts = np.asarray(counts, dtype=float)
        if counts.shape != centers.shape or np.any(counts < 0):
            raise ValueError("counts must be nonnegative and match the bin grid")
        total = counts.sum()
        if total <= 0:
            raise ValueError("histogram has no counts")
        probs = np.maximum(counts / total, floor)
        return HistogramDensity(edges, probs / probs.sum())

    plus = floored(counts_plus)
    minus = floored(counts_minus)
    return OutcomePair(plus.support, plus, minus, lambda_clamp=lambda_clamp)


def empirical_pair_from_csv(path_plus, path_minus,
                            floor=DEFAULT_EMPIRICAL_FLOOR,
                            lambda_clamp=DEFAULT_LAMBDA_CLAMP):
    """Load two (bin_center, count) CSV histograms; header row optional."""
    centers_p, counts_p = _read_histogram_csv(path_plus)
    centers_m, counts_m = _read_histogram_csv(path_minus)
    if centers_p.size != centers_m.size or not np.allclose(centers_p, centers_m, rtol=1e-9, atol=1e-12):
        raise ValueError("histograms must share the same bin centers")
    return empirical_pair(centers_p, counts_p, counts_m,
                          floor=floor, lambda_clamp=lambda_clamp)


def _read_histogram_csv(path):
    rows = []
    with open(path, newline="") as fh:
        for rec in csv.reader(fh):
            if not rec or not "".join(rec).strip():
                continue
            try:
                rows.append((float(rec[0]), float(rec[1])))
            except (ValueError, IndexError):
                if rows:
                    raise ValueError(f"{path}: malformed row {rec!r}")
                # header row
    if not rows:
        raise ValueError(f"{path}: no histogram rows found")
    arr = np.asarray(rows, dtype=float)
    return arr[:, 0], arr[:, 1]


# ---------------------------------------------------------------------------
# single-repetition error rates of the sign decision


@dataclass(frozen=True)
class SingleRepetitionErrors:
    eps_plus: float
    eps_minus: float
    eps_avg: float = field(default=None)

    def __post_init__(self):
        if self.eps_avg is None:
            object.__setattr__(self, "eps_avg", 0.5 * (self.eps_plus + self.eps_minus))


def single_repetition_errors(pair, epsrel=1e-10):
    """Error rates of assigning the eigenvalue from a single repetition.

    eps_plus is the probability under P_plus of a negative log-likelihood
    ratio plus half the probability of a tie (ties are assigned at
    random); eps_minus mirrors it under P_minus.
    """
    if pair.enumerable:
        grid, lp, lm = pair.enumerated()
        lam = lp - lm
        if pair.lambda_clamp is not None:
            lam = np.clip(lam, -pair.lambda_clamp, pair.lambda_clamp)
        wp = np.exp(lp)
        wm = np.exp(lm)
        eps_plus = wp[lam < 0].sum() + 0.5 * wp[lam == 0].sum()
        eps_minus = wm[lam > 0].sum() + 0.5 * wm[lam == 0].sum()
        return SingleRepetitionErrors(float(eps_plus), float(eps_minus))
    return _continuous_errors(pair, epsrel)


def _continuous_errors(pair, epsrel):
    lam = lambda o: pair.plus.log_density(o) - pair.minus.log_density(o)
    theta = np.linspace(-np.pi / 2, np.pi / 2, 8193)[1:-1]
    if pair.landmarks:
        theta = np.unique(np.concatenate([theta, np.arctan(pair.landmarks)]))
    o_grid = np.tan(theta)
    with np.errstate(over="ignore", invalid="ignore"):
        vals = np.asarray(lam(o_grid), dtype=float)
    vals = np.where(np.isnan(vals), 0.0, vals)
    if np.all(vals == 0.0):
        # identical distributions: every outcome is a tie
        return SingleRepetitionErrors(0.5, 0.5)

    # sign boundaries: exact zeros on the grid count as crossings so that
    # symmetric pairs (lambda(0) = 0 exactly) split their regions correctly
    crossings = set(float(o) for o in o_grid[vals == 0.0])
    sign = np.sign(vals)
    for i in np.nonzero(sign[:-1] * sign[1:] < 0)[0]:
        root = optimize.brentq(lambda o: float(lam(o)), o_grid[i], o_grid[i + 1],
                               xtol=1e-13, rtol=1e-14)
        crossings.add(float(root))
    bounds = [-np.inf] + sorted(crossings) + [np.inf]

    def region_mass(density, lo, hi):
        return math.exp(log_integral(density.log_density,
                                     landmarks=pair.landmarks,
                                     o_lo=lo, o_hi=hi, epsrel=epsrel))

    eps_plus = 0.0
    eps_minus = 0.0
    for lo, hi in zip(bounds[:-1], bounds[1:]):
        mid_theta = 0.5 * (np.arctan(lo) + np.arctan(hi))
        mid = float(lam(math.tan(mid_theta)))
        if mid < 0.0:
            eps_plus += region_mass(pair.plus, lo, hi)
        elif mid > 0.0:
            eps_minus += region_mass(pair.minus, lo, hi)
        else:
            eps_plus += 0.5 * region_mass(pair.plus, lo, hi)
            eps_minus += 0.5 * region_mass(pair.minus, lo, hi)
    return SingleRepetitionErrors(float(eps_plus), float(eps_minus))
