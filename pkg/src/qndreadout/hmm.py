"""Hidden-Markov Monte Carlo for repeated readout with state transitions.

The eigenvalue is a two-state Markov chain: between repetitions it decays
from +1 to -1 with probability p_relax and climbs back with probability
p_excite. Trajectories of outcomes are sampled forward; the initial
eigenvalue is then decoded from the outcome record alone with the
normalized forward algorithm, and Monte Carlo error rates with binomial
uncertainties are accumulated for every requested prefix length.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .chernoff import ChernoffSummary
from .distributions import OutcomePair

__all__ = [
    "ZeroLikelihoodError",
    "SingleShotRegimeWarning",
    "HmmSpec",
    "McEstimate",
    "CollapseEntry",
    "CollapseCurve",
    "CollapseComparison",
    "CollapseResult",
    "sample_trajectory",
    "forward_loglik",
    "decode",
    "monte_carlo",
    "universality_collapse",
]

DEFAULT_M = 1_000_000
_BLOCK = 1 << 15


class ZeroLikelihoodError(ArithmeticError):
    """The forward recurrence hit an outcome with zero total likelihood."""


class SingleShotRegimeWarning(UserWarning):
    """Transition probability is not small against C; outside the
    single-shot readout regime the collapse description degrades."""


@dataclass(frozen=True)
class HmmSpec:
    """One simulated readout: outcome pair, transition rates, max length."""

    pair: OutcomePair
    p_relax: float
    p_excite: float = 0.0
    n_max: int = 1

    def __post_init__(self):
        for name in ("p_relax", "p_excite"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.n_max < 1:
            raise ValueError("n_max must be at least 1")

    def transition_matrix(self):
        """Row-stochastic matrix over states (+1, -1), rows = from-state."""
        return np.array([[1.0 - self.p_relax, self.p_relax],
                         [self.p_excite, 1.0 - self.p_excite]])


def check_single_shot(spec, c):
    """Warn when the relaxation rate is outside the single-shot regime."""
    limit = min(c, 1.0)
    if spec.p_relax > 0.0 and spec.p_relax >= limit:
        warnings.warn(
            f"p_relax = {spec.p_relax:g} is not small against min(C, 1) = "
            f"{limit:g}; outside the single-shot readout regime",
            SingleShotRegimeWarning, stacklevel=2)
        return False
    return True


def _substream(seed, a0, block_index, lane):
    a0_code = 0 if a0 == 1 else 1
    ss = np.random.SeedSequence(entropy=int(seed),
                                spawn_key=(a0_code, int(block_index), lane))
    return np.random.Generator(np.random.Philox(ss))


def sample_trajectory(spec, a0, rng):
    """Draw one outcome string of length n_max, starting in eigenstate a0.

    Per repetition: draw the outcome from the current state's
    distribution, then draw the next state from the transition row. The
    draw pattern per step is fixed, so a shorter n_max with the same
    stream reproduces a prefix of the longer trajectory.
    """
    if a0 not in (1, -1):
        raise ValueError("a0 must be +1 or -1")
    has_transitions = spec.p_relax > 0.0 or spec.p_excite > 0.0
    state = a0
    outcomes = np.empty(spec.n_max)
    for k in range(spec.n_max):
        outcomes[k] = spec.pair.sample(state, rng)
        if has_transitions:
            u = rng.random()
            if state == 1:
                state = -1 if u < spec.p_relax else 1
            else:
                state = 1 if u < spec.p_excite else -1
    return outcomes


def forward_loglik(spec, outcomes, a0):
    """ln P(outcomes | initial eigenstate a0) by the normalized recurrence.

    Each step multiplies the occupation vector by the per-outcome
    likelihoods (max-shifted in log space), propagates it through the
    transition matrix, renormalizes, and accumulates the log-normalizer.
    """
    if a0 not in (1, -1):
        raise ValueError("a0 must be +1 or -1")
    outcomes = np.atleast_1d(np.asarray(outcomes, dtype=float))
    if outcomes.size == 0:
        return 0.0
    spec.pair.validate_outcomes(outcomes)
    t = spec.transition_matrix()
    occupation = np.array([1.0, 0.0]) if a0 == 1 else np.array([0.0, 1.0])
    log_lik = 0.0
    lp = spec.pair.plus.log_density(outcomes)
    lm = spec.pair.minus.log_density(outcomes)
    for k in range(outcomes.size):
        shift = max(lp[k], lm[k])
        if shift == -np.inf:
            raise ZeroLikelihoodError(f"outcome at step {k} has zero density")
        weighted = occupation * np.exp(np.array([lp[k], lm[k]]) - shift)
        norm = weighted.sum()
        if norm <= 0.0:
            raise ZeroLikelihoodError(
                f"zero likelihood at step {k}: outcome impossible under "
                "every state reachable from this initial eigenstate")
        occupation = t.T @ weighted / norm
        log_lik += shift + math.log(norm)
    return log_lik


def decode(spec, outcomes, rng=None):
    """Assign the initial eigenvalue from an outcome record.

    Returns (assignment, log_likelihood_ratio). Exact ties are resolved
    by a fair coin from rng; pass a seeded Generator for reproducible
    tie-breaking (an unseeded one is created otherwise).
    """
    ratio = forward_loglik(spec, outcomes, 1) - forward_loglik(spec, outcomes, -1)
    if ratio > 0:
        return 1, ratio
    if ratio < 0:
        return -1, ratio
    if rng is None:
        rng = np.random.default_rng()
    return (1 if rng.random() < 0.5 else -1), ratio


@dataclass(frozen=True)
class McEstimate:
    """Monte Carlo error rates per prefix length, with standard errors.

    e_plus[i] is the error rate of trajectories started in +1 decoded
    from the first n_values[i] outcomes; zero-error cells report e = 0
    with delta = 0 and the one-sided 95% bound 3/m in zero_upper_bound.
    """

    n_values: np.ndarray
    e_plus: np.ndarray
    e_minus: np.ndarray
    e_avg: np.ndarray
    delta_plus: np.ndarray
    delta_minus: np.ndarray
    delta_avg: np.ndarray
    m: int
    seed: int
    zero_upper_bound: float


def _simulate_block(spec, a0, size, n_values, positions, rng, tie_rng):
    """Error counts for one block of trajectories, one initial state."""
    pair = spec.pair
    t = spec.transition_matrix()
    has_transitions = spec.p_relax > 0.0 or spec.p_excite > 0.0
    # state index 0 <-> +1, 1 <-> -1
    state = np.full(size, 0 if a0 == 1 else 1, dtype=np.int8)
    occ_plus = np.tile((1.0, 0.0), (size, 1))
    occ_minus = np.tile((0.0, 1.0), (size, 1))
    ll_plus = np.zeros(size)
    ll_minus = np.zeros(size)
    errors = np.zeros(len(n_values), dtype=np.int64)
    outcomes = np.empty(size)

    for k in range(int(n_values[-1])):
        in_plus = state == 0
        n_plus = int(in_plus.sum())
        if n_plus:
            outcomes[in_plus] = pair.plus.sample(rng, n_plus)
        if size - n_plus:
            outcomes[~in_plus] = pair.minus.sample(rng, size - n_plus)
        lp = pair.plus.log_density(outcomes)
        lm = pair.minus.log_density(outcomes)
        shift = np.maximum(lp, lm)
        if np.any(shift == -np.inf):
            raise ZeroLikelihoodError(f"outcome at step {k} has zero density")
        dp = np.exp(lp - shift)
        dm = np.exp(lm - shift)
        for occ, ll in ((occ_plus, ll_plus), (occ_minus, ll_minus)):
            q0 = occ[:, 0] * dp
            q1 = occ[:, 1] * dm
            norm = q0 + q1
            if np.any(norm <= 0.0):
                raise ZeroLikelihoodError(
                    f"zero likelihood at step {k}: outcome impossible under "
                    "every state reachable from this initial eigenstate")
            occ[:, 0] = (t[0, 0] * q0 + t[1, 0] * q1) / norm
            occ[:, 1] = (t[0, 1] * q0 + t[1, 1] * q1) / norm
            ll += shift + np.log(norm)
        if has_transitions:
            u = rng.random(size)
            flip = np.where(state == 0, u < spec.p_relax, u < spec.p_excite)
            state = np.where(flip, 1 - state, state)
        pos = positions.get(k + 1)
        if pos is not None:
            ratio = ll_plus - ll_minus
            wrong = ratio < 0.0 if a0 == 1 else ratio > 0.0
            count = int(wrong.sum())
            ties = int((ratio == 0.0).sum())
            if ties:
                # same convention as decode: coin < 1/2 assigns +1
                assign_plus = tie_rng.random(ties) < 0.5
                count += int((~assign_plus if a0 == 1 else assign_plus).sum())
            errors[pos] += count
    return errors


def monte_carlo(spec, m, n_values, seed=0, threads=1, chernoff_c=None):
    """Estimate cumulative error rates by simulating m trajectories per
    initial eigenstate and decoding every requested prefix length.

    Trajectories are simulated in fixed-size blocks, each driven by its
    own counter-based substream keyed on (seed, initial state, block
    index), so results are bit-identical for a given seed regardless of
    the number of worker threads. Tie-breaking coins come from a separate
    substream lane and never perturb the outcome stream.
    """
    if m < 1:
        raise ValueError("m must be at least 1")
    n_arr = np.unique(np.asarray(n_values, dtype=int))
    if n_arr.size == 0 or n_arr[0] < 1:
        raise ValueError("n_values must contain integers >= 1")
    if n_arr[-1] > spec.n_max:
        raise ValueError(f"requested N = {n_arr[-1]} exceeds n_max = {spec.n_max}")
    if chernoff_c is not None:
        check_single_shot(spec, chernoff_c)
    positions = {int(n): i for i, n in enumerate(n_arr)}

    tasks = []
    for a0 in (1, -1):
        start = 0
        block_index = 0
        while start < m:
            size = min(_BLOCK, m - start)
            tasks.append((a0, block_index, size))
            start += size
            block_index += 1

    def run(task):
        a0, block_index, size = task
        rng = _substream(seed, a0, block_index, lane=0)
        tie_rng = _substream(seed, a0, block_index, lane=1)
        return _simulate_block(spec, a0, size, n_arr, positions, rng, tie_rng)

    counts = {1: np.zeros(n_arr.size, dtype=np.int64),
              -1: np.zeros(n_arr.size, dtype=np.int64)}
    if threads > 1:
        with ThreadPoolExecutor(max_workers=int(threads)) as pool:
            results = list(pool.map(run, tasks))
    else:
        results = [run(task) for task in tasks]
    for (a0, _, _), block_errors in zip(tasks, results):
        counts[a0] += block_errors

    e_plus = counts[1] / m
    e_minus = counts[-1] / m
    delta_plus = np.sqrt(e_plus * (1.0 - e_plus) / m)
    delta_minus = np.sqrt(e_minus * (1.0 - e_minus) / m)
    return McEstimate(
        n_values=n_arr,
        e_plus=e_plus,
        e_minus=e_minus,
        e_avg=0.5 * (e_plus + e_minus),
        delta_plus=delta_plus,
        delta_minus=delta_minus,
        delta_avg=0.5 * np.sqrt(delta_plus**2 + delta_minus**2),
        m=int(m),
        seed=int(seed),
        zero_upper_bound=3.0 / m,
    )


# ---------------------------------------------------------------------------
# universality collapse


@dataclass(frozen=True)
class CollapseEntry:
    """One model to overlay: a simulation spec with its exact statistics."""

    label: str
    spec: HmmSpec
    summary: ChernoffSummary


@dataclass(frozen=True)
class CollapseCurve:
    """ln e_N against CN for one model, with log-space uncertainties."""

    label: str
    c: float
    c_over_p: float
    n_values: np.ndarray
    cn: np.ndarray
    e_avg: np.ndarray
    ln_e: np.ndarray
    delta_ln: np.ndarray


@dataclass(frozen=True)
class CollapseComparison:
    """Pointwise deviation between two curves of one C/p group, evaluated
    on the overlapping CN range by interpolation."""

    label_a: str
    label_b: str
    cn: np.ndarray
    ln_a: np.ndarray
    ln_b: np.ndarray
    deviation: np.ndarray
    stat_tol: np.ndarray
    max_deviation: float


@dataclass(frozen=True)
class CollapseResult:
    curves: tuple
    comparisons: tuple
    max_deviation: float


def _effective_p(spec):
    return max(spec.p_relax, spec.p_excite)


def universality_collapse(entries, m, n_values, seed=0, threads=1):
    """Overlay several models in the reduced coordinates (CN, ln e_N).

    Models with the same C/p (infinite when p = 0) form a group; within
    each group every pair of curves is compared pointwise on the
    overlapping CN range. Zero-error cells carry no log value and are
    excluded from comparisons.
    """
    curves = []
    for entry in entries:
        c = entry.summary.c
        if c <= 0:
            raise ValueError(f"model {entry.label!r} has C = 0")
        check_single_shot(entry.spec, c)
        est = monte_carlo(entry.spec, m, n_values, seed=seed, threads=threads)
        with np.errstate(divide="ignore"):
            ln_e = np.log(est.e_avg)
        delta_ln = np.where(est.e_avg > 0.0, est.delta_avg / np.maximum(est.e_avg, 1e-300), np.inf)
        p_eff = _effective_p(entry.spec)
        curves.append(CollapseCurve(
            label=entry.label, c=c,
            c_over_p=c / p_eff if p_eff > 0 else math.inf,
            n_values=est.n_values, cn=c * est.n_values,
            e_avg=est.e_avg, ln_e=ln_e, delta_ln=delta_ln))

    comparisons = []
    for i in range(len(curves)):
        for j in range(i + 1, len(curves)):
            a, b = curves[i], curves[j]
            if not _same_group(a.c_over_p, b.c_over_p):
                continue
            comparison = _compare_curves(a, b)
            if comparison is not None:
                comparisons.append(comparison)
    max_dev = max((c.max_deviation for c in comparisons), default=math.nan)
    return CollapseResult(tuple(curves), tuple(comparisons), max_dev)


def _same_group(cp_a, cp_b):
    if math.isinf(cp_a) and math.isinf(cp_b):
        return True
    if math.isinf(cp_a) or math.isinf(cp_b):
        return False
    return math.isclose(cp_a, cp_b, rel_tol=0.02)


def _compare_curves(a, b):
    ok_a = np.isfinite(a.ln_e)
    ok_b = np.isfinite(b.ln_e)
    if ok_b.sum() < 2:
        return None
    lo = max(a.cn[ok_a].min(), b.cn[ok_b].min())
    hi = min(a.cn[ok_a].max(), b.cn[ok_b].max())
    # pad so grids that differ only by C rounding keep their edge points
    lo -= 1e-9 * max(abs(lo), 1.0)
    hi += 1e-9 * max(abs(hi), 1.0)
    mask = ok_a & (a.cn >= lo) & (a.cn <= hi)
    if not np.any(mask):
        return None
    cn = a.cn[mask]
    ln_a = a.ln_e[mask]
    ln_b = np.interp(cn, b.cn[ok_b], b.ln_e[ok_b])
    delta_b = np.interp(cn, b.cn[ok_b], b.delta_ln[ok_b])
    deviation = np.abs(ln_a - ln_b)
    stat_tol = 3.0 * np.sqrt(a.delta_ln[mask] ** 2 + delta_b**2)
    return CollapseComparison(
        label_a=a.label, label_b=b.label, cn=cn, ln_a=ln_a, ln_b=ln_b,
        deviation=deviation, stat_tol=stat_tol,
        max_deviation=float(deviation.max()))
