"""Multivariate skewness measures for the family.

All eight measures reduce to combinations of the canonical skewness radius
``d* = sqrt(delta' corr^-1 delta)``, the mixing-law moments, and the third
central moment tensor of the standardized variable
``Z = cov^-1/2 (Y - mean)``:

- Mardia / Malkovich-Afifi: squared skewness of the single skewed
  canonical coordinate.
- Srivastava: averaged squared skewness along covariance eigenvectors.
- Mori-Rohatgi-Szekely ``s`` and Kollo ``b``: partial sums of the third
  standardized moments.
- Directional vector ``T`` with squared norm ``q_star`` (the covariance
  of ``T`` is replaced by the identity of the standardized scale, which
  sidesteps sixth-order moments).
- Pearson-type mode distance ``s_i`` with direction vector ``s_c``.

``sample_report`` evaluates everything at maximum-likelihood estimates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EigenFailure
from .em import FitConfig, FitResult, fit_best
from .mixing import ExponentialMixing, MixingLaw
from .moments import central_third_affine, moments_y
from .params import MmnParams
from .univariate import canonical_mode

#: canonical radius below which a distribution is treated as symmetric
SYMMETRY_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class SkewnessReport:
    """All measures for one parameter set, plus sum/max scalarizations."""

    mardia: float
    malkovich_afifi: float
    srivastava: float
    mori: np.ndarray
    kollo: np.ndarray
    bbq_t: np.ndarray
    bbq_qstar: float
    isogai_si: float
    isogai_sc: np.ndarray
    scalarized: dict

    def to_dict(self) -> dict:
        return {
            "mardia": self.mardia,
            "malkovich_afifi": self.malkovich_afifi,
            "srivastava": self.srivastava,
            "mori": list(self.mori),
            "kollo": list(self.kollo),
            "bbq_t": list(self.bbq_t),
            "bbq_qstar": self.bbq_qstar,
            "isogai_si": self.isogai_si,
            "isogai_sc": list(self.isogai_sc),
            "scalarized": dict(self.scalarized),
        }


def gamma1_canonical(delta_star: float, law: MixingLaw) -> float:
    """Skewness coefficient of the canonical coordinate ``d* U + N(0, 1-d*^2)``.

    Third central moment ``d*^3 E(U - EU)^3`` over variance
    ``(1 + d*^2 (var U - 1))^{3/2}``.
    """
    var = 1.0 + delta_star ** 2 * (law.var() - 1.0)
    return delta_star ** 3 * law.central_third() / var ** 1.5


def mardia(params: MmnParams) -> float:
    """Squared canonical skewness; ``4 d*^6`` for exponential mixing."""
    d = params.delta_star
    if isinstance(params.mixing, ExponentialMixing):
        return 4.0 * d ** 6
    return gamma1_canonical(d, params.mixing) ** 2


def malkovich_afifi(params: MmnParams) -> float:
    """Maximal directional skewness; coincides with :func:`mardia`."""
    return gamma1_canonical(params.delta_star, params.mixing) ** 2


def _sym_inv_sqrt(mat: np.ndarray) -> np.ndarray:
    """Symmetric inverse square root via eigendecomposition."""
    try:
        w, v = np.linalg.eigh(mat)
    except np.linalg.LinAlgError as exc:
        raise EigenFailure("eigendecomposition failed") from exc
    if np.any(w <= 0):
        raise EigenFailure("covariance has non-positive eigenvalues")
    return (v / np.sqrt(w)) @ v.T


def srivastava(params: MmnParams) -> float:
    """Principal-component skewness.

    Averages the squared standardized third central moments along the
    eigenvectors of ``var(Y)``, eigenvalues sorted descending (the squares
    make eigenvector signs irrelevant; eigenvalue ties only permute equal
    terms).
    """
    cov = params.cov
    try:
        lam, gam = np.linalg.eigh(cov)
    except np.linalg.LinAlgError as exc:
        raise EigenFailure("eigendecomposition failed") from exc
    if np.any(lam <= 0):
        raise EigenFailure("covariance has non-positive eigenvalues")
    order = np.argsort(lam)[::-1]
    lam, gam = lam[order], gam[:, order]
    raw = moments_y(params)
    total = 0.0
    for i in range(params.p):
        third = float(central_third_affine(raw, gam[:, [i]])[0, 0])
        total += (third / lam[i] ** 1.5) ** 2
    return total / params.p


def _standardized_third(params: MmnParams) -> np.ndarray:
    """Third central moment tensor of ``Z = cov^-1/2 (Y - mean)``."""
    a = _sym_inv_sqrt(params.cov)
    return central_third_affine(moments_y(params), a)


def mori(params: MmnParams) -> np.ndarray:
    """Coordinate sums ``s_r = sum_i E[Z_i^2 Z_r]``."""
    m3z = _standardized_third(params)
    p = params.p
    rows = [i * p + i for i in range(p)]
    return m3z[rows, :].sum(axis=0)


def kollo(params: MmnParams) -> np.ndarray:
    """All-pairs sums ``b_r = sum_{i,j} E[Z_i Z_j Z_r]``."""
    return _standardized_third(params).sum(axis=0)


def bbq(params: MmnParams):
    """Directional measure ``(T, q_star)``.

    ``T_r`` weights the own-cube moment by ``3/(p(p+2))`` and each cross
    moment ``E[Z_i^2 Z_r]`` by ``3 * 1/(p(p+2))``, which makes ``T``
    proportional to the coordinate-sum vector; ``q_star = T'T``.
    """
    p = params.p
    t_vec = (3.0 / (p * (p + 2.0))) * mori(params)
    return t_vec, float(t_vec @ t_vec)


def isogai(params: MmnParams):
    """Mode-distance measure ``(s_i, s_c)``.

    ``s_i = (d* E(U) - m0)^2 / (1 + d*^2 (var U - 1))`` with ``m0`` the
    canonical mode; ``s_c = (E(U) - m0/d*) delta``.
    """
    d = params.delta_star
    if d < SYMMETRY_TOL:
        return 0.0, np.zeros(params.p)
    law = params.mixing
    m0 = canonical_mode(d, law)
    si = (d * law.mean() - m0) ** 2 / (1.0 + d * d * (law.var() - 1.0))
    sc = (law.mean() - m0 / d) * params.delta
    return float(si), sc


def population_report(params: MmnParams) -> SkewnessReport:
    """All measures for a parameter set, including sum/max scalarizations."""
    if params.delta_star < SYMMETRY_TOL:
        p = params.p
        zeros = np.zeros(p)
        scal = {k: 0.0 for k in ("s_sum", "s_max", "b_sum", "b_max",
                                 "t_sum", "t_max", "s_c_sum", "s_c_max")}
        return SkewnessReport(0.0, 0.0, 0.0, zeros, zeros.copy(),
                              zeros.copy(), 0.0, 0.0, zeros.copy(), scal)
    s_vec = mori(params)
    b_vec = kollo(params)
    t_vec, q_star = bbq(params)
    s_i, s_c = isogai(params)
    scal = {
        "s_sum": float(s_vec.sum()), "s_max": float(s_vec.max()),
        "b_sum": float(b_vec.sum()), "b_max": float(b_vec.max()),
        "t_sum": float(t_vec.sum()), "t_max": float(t_vec.max()),
        "s_c_sum": float(s_c.sum()), "s_c_max": float(s_c.max()),
    }
    return SkewnessReport(
        mardia=mardia(params),
        malkovich_afifi=malkovich_afifi(params),
        srivastava=srivastava(params),
        mori=s_vec,
        kollo=b_vec,
        bbq_t=t_vec,
        bbq_qstar=q_star,
        isogai_si=s_i,
        isogai_sc=s_c,
        scalarized=scal,
    )


def report_from_fit(result: FitResult) -> SkewnessReport:
    """Plug-in report at fitted parameters."""
    return population_report(result.params)


def sample_report(data: np.ndarray, law: MixingLaw,
                  config: FitConfig | None = None) -> SkewnessReport:
    """Fit by maximum likelihood, then report measures at the estimates.

    Uses the multi-start fit: sample versions are plug-ins of the global
    maximum-likelihood estimates, and weakly skewed data has sign-flipped
    local modes a single start can get caught in.
    """
    return report_from_fit(fit_best(data, law, config))
