"""Univariate canonical-scale helpers.

After the canonical linear transform the whole family collapses to a single
skewed coordinate ``Z = d*U + N(0, 1 - d^2)`` with ``0 <= d < 1``.  The mode
solver, the Isogai measures, and the univariate density all work on this
scale.  The score of a location mixture satisfies

    d/dz log f(z) = (d * E[U | Z=z] - z) / (1 - d^2),

so the mode is the fixed point ``z = d * E[U | Z=z]`` and only the
conditional mean of the mixing variable is needed.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import optimize, special

from .errors import DegenerateSkewness, RootNotBracketed
from .mixing import ExponentialMixing, GammaMixing, MixingLaw
from .quadrature import log_gamma_tilt, log_gamma_tilt_closed_nu1

#: switch to the tilted-integral evaluation of truncated-normal moments
#: below this value of A, where the direct recursion cancels catastrophically
MILLS_SWITCH = -8.0

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


def mills_ratio(a):
    """phi(a) / Phi(a), stable for arbitrarily negative ``a``."""
    a = np.asarray(a, dtype=float)
    return np.sqrt(2.0 / math.pi) / special.erfcx(-a / math.sqrt(2.0))


def log_phi_plus_log_ndtr(a):
    """a^2/2 + log Phi(a) computed without cancellation.

    Equals ``-log mills(a) - log sqrt(2 pi)``; appears in the closed-form
    exponential-mixing density.
    """
    a = np.asarray(a, dtype=float)
    out = np.where(
        a <= 0,
        np.log(special.erfcx(-np.minimum(a, 0.0) / math.sqrt(2.0))) - math.log(2.0),
        0.5 * np.square(np.maximum(a, 0.0)) + special.log_ndtr(a),
    )
    return out if out.ndim else float(out)


def truncnorm_std_moments(a, k_max: int):
    """Moments ``E[T^k]`` for ``T ~ N(a, 1)`` truncated to (0, inf), k=1..k_max.

    Uses the two-term recursion ``m_k = a m_{k-1} + (k-1) m_{k-2}`` where it
    is stable and the tilted integral ``G(a, k+1)/G(a, 1)`` in the deep left
    tail, where the recursion cancels.
    """
    a = np.atleast_1d(np.asarray(a, dtype=float))
    out = np.empty((a.shape[0], k_max), dtype=float)

    safe = a >= MILLS_SWITCH
    if np.any(safe):
        asafe = a[safe]
        prev2 = np.ones_like(asafe)
        prev1 = asafe + mills_ratio(asafe)
        out[safe, 0] = prev1
        for k in range(2, k_max + 1):
            cur = asafe * prev1 + (k - 1) * prev2
            out[safe, k - 1] = cur
            prev2, prev1 = prev1, cur
    if np.any(~safe):
        adeep = a[~safe]
        log_g1 = log_gamma_tilt_closed_nu1(adeep)
        for k in range(1, k_max + 1):
            out[~safe, k - 1] = np.exp(log_gamma_tilt(adeep, k + 1.0) - log_g1)
    return out


def canonical_scale(d: float, law: MixingLaw):
    """Working scalars (sigma2, eta) of the canonical coordinate.

    ``sigma2 = 1 - d^2`` is the conditional variance and
    ``eta = d / sqrt(1 - d^2)``.
    """
    if not 0.0 < d < 1.0:
        raise DegenerateSkewness(f"canonical skewness must be in (0, 1), got {d}")
    sigma2 = 1.0 - d * d
    return sigma2, d / math.sqrt(sigma2)


def canonical_a(z, d: float):
    """A(z) = (z / sqrt(1-d^2)) - sqrt(1-d^2)/d on the canonical scale."""
    sigma2 = 1.0 - d * d
    s = math.sqrt(sigma2)
    return np.asarray(z, dtype=float) / s - s / d


def canonical_cond_mean(z, d: float, law: MixingLaw):
    """E[U | Z = z] for the canonical coordinate under the given law."""
    sigma2, eta = canonical_scale(d, law)
    a = np.atleast_1d(canonical_a(z, d))
    if isinstance(law, ExponentialMixing):
        m1 = truncnorm_std_moments(a, 1)[:, 0] / eta
    elif isinstance(law, GammaMixing):
        m1 = np.exp(log_gamma_tilt(a, law.nu + 1.0) - log_gamma_tilt(a, law.nu)) / eta
    else:
        u, logw = law.quad_points(512)
        # f(u|z) proportional to exp(u (eta A + 1) - u^2 eta^2 / 2) h(u);
        # the +1 cancels against the e^{-u} factor only for gamma-type laws
        expo = logw[None, :] + np.outer(a * eta + 1.0, u) - 0.5 * (eta * u) ** 2
        m = expo.max(axis=1, keepdims=True)
        wgt = np.exp(expo - m)
        m1 = (wgt @ u) / wgt.sum(axis=1)
    return m1 if np.asarray(z).ndim else float(m1[0])


def canonical_log_pdf(z, d: float, law: MixingLaw):
    """Log-density of the canonical coordinate ``MMN_1(0, 1, d; law)``."""
    sigma2, eta = canonical_scale(d, law)
    z = np.asarray(z, dtype=float)
    a = canonical_a(z, d)
    log_norm = -0.5 * z * z / sigma2 - 0.5 * math.log(sigma2) - _LOG_SQRT_2PI
    if isinstance(law, ExponentialMixing):
        out = log_norm - math.log(eta) + _LOG_SQRT_2PI + log_phi_plus_log_ndtr(a)
    elif isinstance(law, GammaMixing):
        out = (log_norm - law.nu * math.log(eta) - special.gammaln(law.nu)
               + log_gamma_tilt(a, law.nu))
    else:
        u, logw = law.quad_points(512)
        a1 = np.atleast_1d(a)
        expo = logw[None, :] + np.outer(a1 * eta + 1.0, u) - 0.5 * (eta * u) ** 2
        out = np.atleast_1d(log_norm) + special.logsumexp(expo, axis=1)
        out = out if z.ndim else out[0]
    return out if z.ndim else float(out)


def canonical_mode(d: float, law: MixingLaw, xtol: float = 1e-10) -> float:
    """Mode of the canonical coordinate by bracketed root finding.

    Solves ``g(z) = d E[U | Z=z] - z = 0`` (the zero of the score) on an
    expanding bracket starting at ``[0, d E(U) + 3]``.

    Raises
    ------
    RootNotBracketed
        If no sign change appears after expanding the bracket.
    """
    if d == 0.0:
        return 0.0

    def score_root(z):
        return d * canonical_cond_mean(z, d, law) - z

    lo = 0.0
    hi = d * law.mean() + 3.0
    cap = max(10.0, 8.0 * hi)
    g_lo = score_root(lo)
    g_hi = score_root(hi)
    while g_lo * g_hi > 0:
        if hi >= cap:
            raise RootNotBracketed(
                f"mode bracket [0, {hi:.3g}] has no sign change (d={d})")
        hi = min(2.0 * hi, cap)
        g_hi = score_root(hi)
    return float(optimize.brentq(score_root, lo, hi, xtol=xtol))


def univariate_mmne_pdf(z, lam: float):
    """Closed-form density of the standardized univariate exponential mixture.

    Parameterized by ``lam = d / sqrt(1 - d^2) != 0`` at zero location and
    unit scale.  Evaluated in log space so the light tail does not
    underflow.

    Raises
    ------
    DegenerateSkewness
        If ``lam == 0`` (the limit is the standard normal density).
    """
    return np.exp(univariate_mmne_log_pdf(z, lam))


def univariate_mmne_log_pdf(z, lam: float):
    if lam == 0.0:
        raise DegenerateSkewness("lam must be nonzero; use the normal density")
    z = np.asarray(z, dtype=float)
    t = math.sqrt(1.0 + lam * lam)
    arg = (lam * t * z - 1.0) / abs(lam)
    out = (math.log(t / abs(lam)) - (t / lam) * z + 0.5 / (lam * lam)
           + special.log_ndtr(arg))
    return out if z.ndim else float(out)
