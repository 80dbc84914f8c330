"""Panel-adaptive Gauss-Legendre quadrature on the compactified real line.

Every continuous-support integral in the package goes through here. The
substitution o = tan(theta) maps the line onto (-pi/2, pi/2), so heavy
polynomial tails (Cauchy) and narrow peaks are both handled by panel
subdivision instead of a truncation cutoff. Integrands arrive as
log-values and are shifted by their grid maximum before exponentiation.
"""

from __future__ import annotations

import numpy as np

__all__ = ["IntegrationError", "log_integral", "weighted_moments"]


class IntegrationError(RuntimeError):
    """Adaptive quadrature could not reach the requested tolerance."""


_HALF_PI = np.pi / 2.0
_NODES_LO, _WEIGHTS_LO = np.polynomial.legendre.leggauss(15)
_NODES_HI, _WEIGHTS_HI = np.polynomial.legendre.leggauss(31)
_SCAN_POINTS = 4097
_MAX_PANELS = 4096
_MAX_ROUNDS = 60
# exp() underflows to 0 below this; clamping avoids -inf minus -inf noise
_LOG_TINY = -745.0


def _log_jacobian(theta):
    # d(tan theta)/d(theta) = 1/cos^2(theta)
    return -2.0 * np.log(np.cos(theta))


def _eval_panels(fvec, lo, hi):
    """Integrate fvec over each [lo_i, hi_i] with nested 15/31-node rules.

    fvec maps a theta array (...,) to a value stack (..., K). Returns the
    31-node integrals (P, K) and the |31-node - 15-node| error estimates.
    """
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    x_lo = mid[:, None] + half[:, None] * _NODES_LO
    x_hi = mid[:, None] + half[:, None] * _NODES_HI
    v_lo = fvec(x_lo)
    v_hi = fvec(x_hi)
    i_lo = half[:, None] * np.tensordot(v_lo, _WEIGHTS_LO, axes=([1], [0]))
    i_hi = half[:, None] * np.tensordot(v_hi, _WEIGHTS_HI, axes=([1], [0]))
    return i_hi, np.abs(i_hi - i_lo)


def _adaptive(fvec, edges, epsrel, epsabs):
    """Refine panels until every component meets max(epsabs, epsrel*|I|)."""
    lo = np.asarray(edges[:-1], dtype=float)
    hi = np.asarray(edges[1:], dtype=float)
    vals, errs = _eval_panels(fvec, lo, hi)
    for _ in range(_MAX_ROUNDS):
        total = vals.sum(axis=0)
        err = errs.sum(axis=0)
        tol = np.maximum(epsabs, epsrel * np.abs(total))
        if np.all(err <= tol):
            return total, err
        if lo.size >= _MAX_PANELS:
            break
        share = tol / (2.0 * lo.size)
        split = (errs > share).any(axis=1)
        if not split.any():
            split[int(np.argmax(errs.max(axis=1)))] = True
        mid = 0.5 * (lo[split] + hi[split])
        child_lo = np.concatenate([lo[split], mid])
        child_hi = np.concatenate([mid, hi[split]])
        child_vals, child_errs = _eval_panels(fvec, child_lo, child_hi)
        lo = np.concatenate([lo[~split], child_lo])
        hi = np.concatenate([hi[~split], child_hi])
        vals = np.concatenate([vals[~split], child_vals])
        errs = np.concatenate([errs[~split], child_errs])
    raise IntegrationError(
        f"quadrature stalled at {lo.size} panels, error {errs.sum(axis=0)!r} "
        f"above tolerance {np.maximum(epsabs, epsrel * np.abs(vals.sum(axis=0)))!r}"
    )


def _scan(log_f, theta_lo, theta_hi, landmark_thetas):
    """Locate the max of the theta-space log-integrand on a fine grid."""
    grid = np.linspace(theta_lo, theta_hi, _SCAN_POINTS)[1:-1]
    if landmark_thetas.size:
        grid = np.unique(np.concatenate([grid, landmark_thetas]))
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        g = log_f(np.tan(grid)) + _log_jacobian(grid)
    g = np.where(np.isnan(g), -np.inf, g)
    k = int(np.argmax(g))
    spacing = (theta_hi - theta_lo) / (_SCAN_POINTS - 1)
    return grid, g, float(g[k]), float(grid[k]), spacing


def _initial_edges(theta_lo, theta_hi, landmark_thetas, theta_peak, spacing):
    pts = {theta_lo, theta_hi, theta_peak}
    pts.update(float(t) for t in landmark_thetas)
    for t in (theta_peak - spacing, theta_peak + spacing):
        if theta_lo < t < theta_hi:
            pts.add(t)
    edges = np.array(sorted(pts))
    # a handful of starting panels so structure between landmarks is seen
    while edges.size - 1 < 8:
        mids = 0.5 * (edges[:-1] + edges[1:])
        edges = np.unique(np.concatenate([edges, mids]))
    return edges


def _landmark_thetas(landmarks, theta_lo, theta_hi):
    lms = np.arctan(np.asarray(landmarks, dtype=float))
    return lms[(lms > theta_lo) & (lms < theta_hi)]


def log_integral(log_f, landmarks=(), o_lo=-np.inf, o_hi=np.inf, epsrel=1e-11):
    """ln of the integral of exp(log_f(o)) over (o_lo, o_hi).

    log_f must accept numpy arrays. landmarks are o-positions of known
    structure (means, crossing points); they seed the panel edges and the
    peak scan so narrow features are not stepped over.
    """
    theta_lo = float(np.arctan(o_lo))
    theta_hi = float(np.arctan(o_hi))
    if not theta_hi > theta_lo:
        raise ValueError("empty integration range")
    lms = _landmark_thetas(landmarks, theta_lo, theta_hi)
    _, _, shift, theta_peak, spacing = _scan(log_f, theta_lo, theta_hi, lms)
    if not np.isfinite(shift):
        return -np.inf
    edges = _initial_edges(theta_lo, theta_hi, lms, theta_peak, spacing)

    def fvec(theta):
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            g = log_f(np.tan(theta)) + _log_jacobian(theta) - shift
        g = np.where(np.isnan(g), -np.inf, g)
        return np.exp(np.clip(g, _LOG_TINY, 60.0))[..., None]

    total, _ = _adaptive(fvec, edges, epsrel, np.array([1e-300]))
    val = float(total[0])
    if val <= 0.0:
        return -np.inf
    return shift + float(np.log(val))


def weighted_moments(log_w, statistic, powers, landmarks=(), epsrel=1e-11):
    """Moments of a statistic under an unnormalized log-weight on the line.

    Returns (log_norm, ratios) where log_norm = ln of the integral of
    exp(log_w) and ratios[i] is the integral of exp(log_w)*statistic**k
    over the norm, for k in powers. All K+1 integrals share one panel
    refinement, with per-power absolute tolerances scaled by the observed
    magnitude of the statistic so near-zero moments still converge.
    """
    powers = tuple(int(k) for k in powers)
    lms = _landmark_thetas(landmarks, -_HALF_PI, _HALF_PI)
    grid, g, shift, theta_peak, spacing = _scan(log_w, -_HALF_PI, _HALF_PI, lms)
    if not np.isfinite(shift):
        raise IntegrationError("weight is identically zero")
    edges = _initial_edges(-_HALF_PI, _HALF_PI, lms, theta_peak, spacing)

    live = g - shift > -40.0
    with np.errstate(over="ignore", invalid="ignore"):
        t_scan = np.asarray(statistic(np.tan(grid[live])), dtype=float)
    scale = max(1.0, float(np.nanmax(np.abs(t_scan))) if t_scan.size else 1.0)
    w_scan = np.exp(np.clip(g - shift, _LOG_TINY, 0.0))
    norm_scan = float(((w_scan[1:] + w_scan[:-1]) * 0.5 * np.diff(grid)).sum())
    norm_scan = max(norm_scan, 1e-30)

    def fvec(theta):
        o = np.tan(theta)
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            lw = log_w(o) + _log_jacobian(theta) - shift
        lw = np.where(np.isnan(lw), -np.inf, lw)
        w = np.exp(np.clip(lw, _LOG_TINY, 60.0))
        t = np.where(w > 0.0, statistic(o), 0.0)
        cols = [w] + [w * t**k for k in powers]
        return np.stack(cols, axis=-1)

    epsabs = np.array([1e-300] + [epsrel * norm_scan * scale**k for k in powers])
    total, _ = _adaptive(fvec, edges, epsrel, epsabs)
    norm = float(total[0])
    if norm <= 0.0:
        raise IntegrationError("weight integrates to zero")
    return shift + float(np.log(norm)), total[1:] / norm
