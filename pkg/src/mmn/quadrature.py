"""Shared quadrature helpers.

The gamma-mixing closed-form density reduces to the tilted integral

    G(a, nu) = int_0^inf t^(nu-1) exp(-t^2/2 + a*t) dt,

evaluated here in log space with Gauss-Legendre nodes after factoring out
the integrand maximum, so it is stable for any real ``a`` (including the
far tails where the naive form under- or overflows).  Conditional moments
of the mixing variable for gamma mixing are ratios G(a, nu+k) / G(a, nu).
"""

from __future__ import annotations

import functools
import math

import numpy as np

GAMMA_TILT_NODES = 128


@functools.lru_cache(maxsize=32)
def unit_leggauss(n: int):
    """Gauss-Legendre nodes and weights on [0, 1], cached."""
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def row_logsumexp(mat: np.ndarray) -> np.ndarray:
    """logsumexp along the last axis (max-subtract form, -inf safe)."""
    m = np.max(mat, axis=-1, keepdims=True)
    m_safe = np.where(np.isfinite(m), m, 0.0)
    out = m_safe[..., 0] + np.log(np.sum(np.exp(mat - m_safe), axis=-1))
    return np.where(np.isfinite(m[..., 0]), out, m[..., 0])


def log_gamma_tilt(a, nu: float, n_nodes: int = GAMMA_TILT_NODES):
    """log G(a, nu) for scalar or array ``a``.

    The integration window adapts to the tilt: around the interior peak of
    ``t^(nu-1) exp(-t^2/2 + a t)`` for moderate and large positive ``a``,
    and shrunk to the ``O(1/|a|)`` boundary layer for strongly negative
    ``a``, where the integrand is essentially ``t^(nu-1) e^{a t}``.  When a
    window touches the origin and ``nu < 1`` the substitution
    ``t = s**(1/nu)`` removes the endpoint singularity.
    """
    a = np.asarray(a, dtype=float)
    scalar = a.ndim == 0
    a2 = np.atleast_1d(a).astype(float)

    x, w = unit_leggauss(n_nodes)
    logw = np.log(w)

    disc = np.maximum(a2 * a2 + 4.0 * (nu - 1.0), 0.0)
    center = np.maximum(0.5 * (a2 + np.sqrt(disc)), 0.0)
    lo = np.maximum(center - 18.0, 0.0)
    hi = center + 18.0
    neg = a2 < -1.0
    lo[neg] = 0.0
    hi[neg] = (nu + 36.0) / (-a2[neg])

    out = np.empty_like(a2)
    touches_zero = lo == 0.0
    with np.errstate(divide="ignore"):
        if nu < 1.0 and np.any(touches_zero):
            idx = touches_zero
            s_hi = hi[idx] ** nu
            s = s_hi[:, None] * x[None, :]
            t = s ** (1.0 / nu)
            log_f = (-0.5 * t * t + a2[idx, None] * t - math.log(nu)
                     + logw[None, :] + np.log(s_hi)[:, None])
            out[idx] = row_logsumexp(log_f)
            idx = ~touches_zero
        else:
            idx = np.ones_like(a2, dtype=bool)
        if np.any(idx):
            span = hi[idx] - lo[idx]
            t = lo[idx, None] + span[:, None] * x[None, :]
            log_f = ((nu - 1.0) * np.log(t) - 0.5 * t * t + a2[idx, None] * t
                     + logw[None, :] + np.log(span)[:, None])
            out[idx] = row_logsumexp(log_f)

    return float(out[0]) if scalar else out


def make_tilt_evaluator(a, nu_lo: float, nu_hi: float,
                        n_nodes: int = GAMMA_TILT_NODES):
    """Factory for evaluating log G(a, nu) at many shapes on one grid.

    Precomputes nodes covering every shape in ``[nu_lo, nu_hi]`` and
    returns ``f(nu) -> log G(a, nu)`` (vectorized over the fixed ``a``).
    For ``nu_lo < 1`` the grid lives in ``s = t**nu_lo`` coordinates so
    the endpoint singularity is absorbed for the smallest shape and every
    larger shape stays smooth.
    """
    a2 = np.atleast_1d(np.asarray(a, dtype=float))
    x, w = unit_leggauss(n_nodes)
    logw = np.log(w)

    def center(nu):
        disc = np.maximum(a2 * a2 + 4.0 * (nu - 1.0), 0.0)
        return np.maximum(0.5 * (a2 + np.sqrt(disc)), 0.0)

    hi = center(nu_hi) + 18.0
    neg = a2 < -1.0
    hi[neg] = (nu_hi + 36.0) / (-a2[neg])

    with np.errstate(divide="ignore"):
        if nu_lo >= 1.0:
            lo = np.maximum(center(nu_lo) - 18.0, 0.0)
            lo[neg] = 0.0
            span = hi - lo
            t = lo[:, None] + span[:, None] * x[None, :]
            log_t = np.log(t)
            base = (-0.5 * t * t + a2[:, None] * t
                    + logw[None, :] + np.log(span)[:, None])

            def evaluate(nu: float) -> np.ndarray:
                return row_logsumexp(base + (nu - 1.0) * log_t)
        else:
            s_hi = hi ** nu_lo
            s = s_hi[:, None] * x[None, :]
            t = s ** (1.0 / nu_lo)
            log_s = np.log(s)
            base = (-0.5 * t * t + a2[:, None] * t - math.log(nu_lo)
                    + logw[None, :] + np.log(s_hi)[:, None])

            def evaluate(nu: float) -> np.ndarray:
                return row_logsumexp(base + ((nu - nu_lo) / nu_lo) * log_s)

    return evaluate


def gamma_tilt_estep(a, nu: float, k_max: int = 2,
                     n_nodes: int = GAMMA_TILT_NODES):
    """One-pass E-step quantities for gamma mixing.

    Returns ``(log_g, moments)`` where ``log_g[i] = log G(a_i, nu)`` and
    ``moments[i, k-1] = G(a_i, nu+k) / G(a_i, nu)`` for ``k = 1..k_max``.
    Shares a single node grid and exponential evaluation across the
    numerator and denominator integrals.
    """
    a2 = np.atleast_1d(np.asarray(a, dtype=float))
    x, w = unit_leggauss(n_nodes)
    logw = np.log(w)

    disc = np.maximum(a2 * a2 + 4.0 * (nu - 1.0), 0.0)
    center = np.maximum(0.5 * (a2 + np.sqrt(disc)), 0.0)
    lo = np.maximum(center - 18.0, 0.0)
    hi = center + 18.0 + k_max
    neg = a2 < -1.0
    lo[neg] = 0.0
    hi[neg] = (nu + k_max + 36.0) / (-a2[neg])

    with np.errstate(divide="ignore"):
        if nu < 1.0:
            # same substitution as log_gamma_tilt; valid for every moment
            # order since the extra t^k factor is smooth at the origin
            s_hi = hi ** nu
            s = s_hi[:, None] * x[None, :]
            t = s ** (1.0 / nu)
            log_f = (-0.5 * t * t + a2[:, None] * t - math.log(nu)
                     + logw[None, :] + np.log(s_hi)[:, None])
        else:
            span = hi - lo
            t = lo[:, None] + span[:, None] * x[None, :]
            log_f = ((nu - 1.0) * np.log(t) - 0.5 * t * t + a2[:, None] * t
                     + logw[None, :] + np.log(span)[:, None])

    m = log_f.max(axis=1, keepdims=True)
    wgt = np.exp(log_f - m)
    denom = wgt.sum(axis=1)
    log_g = m[:, 0] + np.log(denom)
    moments = np.empty((a2.shape[0], k_max))
    tk = np.ones_like(t)
    for k in range(1, k_max + 1):
        tk = tk * t
        moments[:, k - 1] = (wgt * tk).sum(axis=1) / denom
    return log_g, moments


def log_gamma_tilt_closed_nu1(a):
    """Exact log G(a, 1), stable in both tails.

    G(a, 1) = sqrt(2 pi) e^{a^2/2} Phi(a) = 1 / mills(a) with
    mills(a) = phi(a) / Phi(a), so the left tail reduces to a single
    scaled-erfc evaluation with no cancellation.
    """
    from scipy.special import erfcx, log_ndtr

    a = np.asarray(a, dtype=float)
    neg = a <= 0
    out = np.empty_like(a)
    an = a[neg]
    out[neg] = np.log(erfcx(-an / math.sqrt(2.0))) + 0.5 * math.log(math.pi / 2.0)
    ap = a[~neg]
    out[~neg] = 0.5 * math.log(2.0 * math.pi) + 0.5 * ap * ap + log_ndtr(ap)
    return out if out.ndim else float(out)
