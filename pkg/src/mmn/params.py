"""Parameter model for the mean-mixture-of-normals family.

A distribution in the family is ``Y = xi + omega_diag (delta U + Z)`` where
``Z ~ N_p(0, corr - delta delta')`` and ``U`` follows a mixing law.  The
scale matrix Omega factors as ``omega_diag @ corr @ omega_diag`` with
``omega_diag`` the diagonal matrix of square-rooted Omega diagonals and
``corr`` the induced correlation matrix.

:class:`MmnParams` validates the full invariant set on construction:
Omega symmetric positive definite, every ``|delta_i| < 1``, and the
skewness radius ``delta' corr^-1 delta < 1`` (equivalently, the conditional
covariance ``sigma_y = Omega - alpha alpha'`` positive definite, where
``alpha = omega_diag * delta``).
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import cached_property

import numpy as np
from scipy import linalg

from .errors import (
    DimensionMismatch,
    NotPositiveDefinite,
    RankDeficient,
    SkewnessOutOfRange,
)
from .mixing import MixingLaw
from .univariate import canonical_mode

#: Cholesky pivot tolerance, relative to the max-norm of the matrix
PIVOT_RTOL = 1e-12


def _spd_cholesky(mat: np.ndarray, name: str) -> np.ndarray:
    """Lower Cholesky factor, rejecting non-SPD input.

    The matrix must be symmetric and its Cholesky pivots must exceed
    ``sqrt(PIVOT_RTOL * ||mat||_inf)``.
    """
    mat = np.asarray(mat, dtype=float)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise DimensionMismatch(f"{name} must be square, got shape {mat.shape}")
    scale = np.abs(mat).max()
    if not np.isfinite(scale) or scale == 0.0:
        raise NotPositiveDefinite(f"{name} is zero or non-finite")
    if np.abs(mat - mat.T).max() > 1e-8 * scale:
        raise NotPositiveDefinite(f"{name} is not symmetric")
    try:
        chol = np.linalg.cholesky(mat)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(f"{name} is not positive definite") from exc
    if np.min(np.diag(chol)) ** 2 <= PIVOT_RTOL * scale:
        raise NotPositiveDefinite(f"{name} has a near-zero Cholesky pivot")
    return chol


@dataclass(frozen=True, eq=False)
class MmnParams:
    """Location ``xi``, scale matrix ``omega``, skewness ``delta``, mixing law.

    All invariants are checked on construction; instances are immutable and
    thread-safe.  Derived quantities (correlation matrix, conditional
    covariance, canonical skewness radius) are cached properties.
    """

    xi: np.ndarray
    omega: np.ndarray
    delta: np.ndarray
    mixing: MixingLaw

    def __post_init__(self):
        xi = np.atleast_1d(np.asarray(self.xi, dtype=float))
        omega = np.asarray(self.omega, dtype=float)
        if omega.ndim == 0:
            omega = omega.reshape(1, 1)
        delta = np.atleast_1d(np.asarray(self.delta, dtype=float))
        object.__setattr__(self, "xi", xi)
        object.__setattr__(self, "omega", omega)
        object.__setattr__(self, "delta", delta)
        p = xi.shape[0]
        if xi.ndim != 1 or delta.ndim != 1 or delta.shape[0] != p:
            raise DimensionMismatch(
                f"xi and delta must be vectors of equal length, got "
                f"{xi.shape} and {delta.shape}")
        if omega.shape != (p, p):
            raise DimensionMismatch(
                f"omega must be {p}x{p}, got {omega.shape}")
        if not (np.isfinite(xi).all() and np.isfinite(omega).all()
                and np.isfinite(delta).all()):
            raise DimensionMismatch("parameters must be finite")
        self._validate()

    def _validate(self) -> None:
        _spd_cholesky(self.omega, "omega")
        if np.any(np.abs(self.delta) >= 1.0):
            raise SkewnessOutOfRange(
                f"every |delta_i| must be < 1, got {self.delta}")
        radius = self.delta_star_sq
        if not radius < 1.0:
            raise SkewnessOutOfRange(
                f"skewness radius delta' corr^-1 delta = {radius:.6g} >= 1")
        _spd_cholesky(self.sigma_y, "sigma_y")

    # -- derived quantities --------------------------------------------------

    @property
    def p(self) -> int:
        """Dimension."""
        return self.xi.shape[0]

    @cached_property
    def omega_diag(self) -> np.ndarray:
        """Vector of per-coordinate scales, the square roots of diag(omega)."""
        d = np.diag(self.omega)
        if np.any(d <= 0):
            raise NotPositiveDefinite("omega has non-positive diagonal entries")
        return np.sqrt(d)

    @cached_property
    def omega_bar(self) -> np.ndarray:
        """Correlation matrix omega rescaled to unit diagonal."""
        w = self.omega_diag
        return self.omega / np.outer(w, w)

    @cached_property
    def alpha(self) -> np.ndarray:
        """Scaled skewness ``omega_diag * delta``."""
        return self.omega_diag * self.delta

    @cached_property
    def sigma_y(self) -> np.ndarray:
        """Conditional covariance of ``Y`` given ``U``: omega - alpha alpha'."""
        return self.omega - np.outer(self.alpha, self.alpha)

    @cached_property
    def delta_star_sq(self) -> float:
        """Squared canonical skewness radius ``delta' corr^-1 delta``."""
        if not np.any(self.delta):
            return 0.0
        chol = _spd_cholesky(self.omega_bar, "omega_bar")
        half = linalg.solve_triangular(chol, self.delta, lower=True)
        return float(half @ half)

    @property
    def delta_star(self) -> float:
        """Canonical skewness radius (nonnegative)."""
        return float(np.sqrt(self.delta_star_sq))

    @cached_property
    def mean(self) -> np.ndarray:
        """E(Y) = xi + E(U) alpha."""
        return self.xi + self.mixing.mean() * self.alpha

    @cached_property
    def cov(self) -> np.ndarray:
        """var(Y) = omega + (var(U) - 1) alpha alpha'."""
        return self.omega + (self.mixing.var() - 1.0) * np.outer(self.alpha, self.alpha)

    def with_mixing(self, mixing: MixingLaw) -> "MmnParams":
        """Same shape parameters under a different mixing law."""
        return replace(self, mixing=mixing)


@dataclass(frozen=True, eq=False)
class CanonicalInfo:
    """Canonical linear transform ``z = transform_a @ (y - xi)``.

    The transformed variable has identity scale matrix and skewness
    ``(delta_star, 0, ..., 0)``; ``inverse_transform`` maps back.
    """

    transform_a: np.ndarray
    delta_star: float
    inverse_transform: np.ndarray


def validate(params: MmnParams) -> None:
    """Re-run the full invariant check on an existing instance."""
    params._validate()


def clamp_skewness(omega: np.ndarray, delta: np.ndarray,
                   max_radius_sq: float = 1.0 - 1e-6) -> np.ndarray:
    """Radially shrink ``delta`` so that ``delta' corr^-1 delta <= cap``.

    Leaves ``delta`` unchanged when already inside; useful for boundary or
    literature parameter sets that violate the positive-definiteness
    constraint.
    """
    omega = np.asarray(omega, dtype=float)
    delta = np.asarray(delta, dtype=float)
    if not np.any(delta):
        return delta
    w = np.sqrt(np.diag(omega))
    corr = omega / np.outer(w, w)
    qf = float(delta @ np.linalg.solve(corr, delta))
    if qf <= max_radius_sq:
        return delta
    return delta * np.sqrt(max_radius_sq / qf)


def std_decompose(params: MmnParams):
    """Standard decomposition ``(omega_diag, omega_bar, sigma_y, alpha)``."""
    return params.omega_diag, params.omega_bar, params.sigma_y, params.alpha


def affine_transform(params: MmnParams, a: np.ndarray,
                     c: np.ndarray | None = None) -> MmnParams:
    """Parameters of ``T = c + a' Y`` for full-rank ``a`` of shape (p, h).

    The family is closed under full-rank affine maps with ``h <= p``; the
    mixing law carries over unchanged.

    Raises
    ------
    RankDeficient
        If ``a`` does not have full column rank.
    """
    a = np.asarray(a, dtype=float)
    if a.ndim == 1:
        a = a[:, None]
    p = params.p
    if a.shape[0] != p:
        raise DimensionMismatch(f"a must have {p} rows, got {a.shape}")
    h = a.shape[1]
    if h > p:
        raise DimensionMismatch(f"a must have at most {p} columns, got {h}")
    if np.linalg.matrix_rank(a) < h:
        raise RankDeficient("transform matrix is rank deficient")
    if c is None:
        c = np.zeros(h)
    c = np.atleast_1d(np.asarray(c, dtype=float))
    if c.shape != (h,):
        raise DimensionMismatch(f"c must have length {h}, got {c.shape}")

    omega_t = a.T @ params.omega @ a
    omega_t = 0.5 * (omega_t + omega_t.T)
    xi_t = c + a.T @ params.xi
    w_t = np.sqrt(np.diag(omega_t))
    delta_t = (a.T @ params.alpha) / w_t
    return MmnParams(xi_t, omega_t, delta_t, params.mixing)


def convolve_with_normal(params: MmnParams, mu: np.ndarray,
                         sigma: np.ndarray) -> MmnParams:
    """Parameters of ``Y + N_p(mu, sigma)`` for an independent normal."""
    mu = np.atleast_1d(np.asarray(mu, dtype=float))
    sigma = np.asarray(sigma, dtype=float)
    if sigma.ndim == 0:
        sigma = sigma.reshape(1, 1)
    p = params.p
    if mu.shape != (p,) or sigma.shape != (p, p):
        raise DimensionMismatch("mu or sigma shape mismatch")
    _spd_cholesky(sigma, "sigma")
    omega_y = params.omega + sigma
    w_y = np.sqrt(np.diag(omega_y))
    delta_y = params.alpha / w_y
    return MmnParams(params.xi + mu, omega_y, delta_y, params.mixing)


def canonical_form(params: MmnParams) -> CanonicalInfo:
    """Construct the canonical whitening transform.

    Factor the correlation matrix as ``C' C`` (Cholesky), take an
    orthogonal ``P`` whose first column is the normalized ``C'^-1 delta``
    (Householder completion, deterministic signs), and set
    ``transform_a = (C^-1 P)' omega_diag^-1``.  For ``delta = 0`` the
    transform is plain Cholesky whitening (``P = I``).
    """
    p = params.p
    w = params.omega_diag
    chol_lower = _spd_cholesky(params.omega_bar, "omega_bar")  # corr = L L'
    c_mat = chol_lower.T  # corr = C' C

    if not np.any(params.delta):
        p_mat = np.eye(p)
        d_star = 0.0
    else:
        v = linalg.solve_triangular(chol_lower, params.delta, lower=True)
        d_star = float(np.linalg.norm(v))
        q1 = v / d_star
        # Householder reflection mapping e1 to q1; P is orthogonal with
        # first column q1
        wv = q1 - np.eye(p)[:, 0]
        nrm2 = wv @ wv
        if nrm2 < 1e-28:
            p_mat = np.eye(p)
        else:
            p_mat = np.eye(p) - 2.0 * np.outer(wv, wv) / nrm2
        # sign convention: first nonzero entry of each remaining column
        # positive (column 1 is pinned by q1)
        for j in range(1, p):
            col = p_mat[:, j]
            nz = np.nonzero(np.abs(col) > 1e-14)[0]
            if nz.size and col[nz[0]] < 0:
                p_mat[:, j] = -col

    inv_c = linalg.solve_triangular(c_mat, np.eye(p), lower=False)
    transform = (inv_c @ p_mat).T @ np.diag(1.0 / w)
    inverse = np.diag(w) @ c_mat.T @ p_mat
    return CanonicalInfo(transform_a=transform, delta_star=d_star,
                         inverse_transform=inverse)


def mode(params: MmnParams) -> np.ndarray:
    """Mode of the distribution.

    Equal to ``xi`` when ``delta = 0``; otherwise the canonical mode is
    found by bracketed root finding on the score of the univariate
    canonical density and mapped back along the skewness ray:
    ``xi + (m0 / delta_star) * alpha``.
    """
    if not np.any(params.delta):
        return params.xi.copy()
    d_star = params.delta_star
    m0 = canonical_mode(d_star, params.mixing)
    return params.xi + (m0 / d_star) * params.alpha
