"""Mixing laws for the mean-mixture-of-normals family.

The family is built from a positive mixing variable ``U`` that shifts the
mean of a multivariate normal.  Three concrete laws are provided:

- :class:`GammaMixing` -- standard gamma with shape ``nu`` (scale 1),
- :class:`ExponentialMixing` -- standard exponential (gamma with shape 1),
- :class:`TruncatedNormalMixing` -- normal truncated to ``(0, inf)``, which
  recovers the classical skew-normal when ``a = 0`` and ``b = 1``.

Each law exposes its log-density, MGF/CF, raw moments up to order four, a
sampler taking an explicit :class:`numpy.random.Generator`, the quantile
function, and quadrature nodes for integrating smooth functions against the
law.  Laws are immutable and safe to share across threads.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np
from scipy import special, stats

from .errors import DomainError, UnsupportedOrder

_MAX_MOMENT = 4


class MixingLaw(ABC):
    """Abstract positive mixing variable ``U``."""

    #: short identifier used by the CLI and serialization ("gamma", ...)
    kind: str = ""

    # -- density -----------------------------------------------------------

    @abstractmethod
    def log_pdf(self, u):
        """Log-density of ``U`` (``-inf`` outside the support)."""

    def pdf(self, u):
        """Density of ``U``."""
        return np.exp(self.log_pdf(u))

    # -- transforms --------------------------------------------------------

    @abstractmethod
    def mgf(self, t: float) -> float:
        """Moment generating function ``E exp(tU)``.

        Raises
        ------
        DomainError
            If ``t`` is at or beyond a pole of the MGF.
        """

    @abstractmethod
    def cf(self, s: float) -> complex:
        """Characteristic function ``E exp(isU)``."""

    # -- moments -----------------------------------------------------------

    @abstractmethod
    def raw_moment(self, k: int) -> float:
        """Raw moment ``E U^k`` for ``k`` in ``0..4``.

        Raises
        ------
        UnsupportedOrder
            If ``k`` is negative or larger than four.
        """

    def mean(self) -> float:
        return self.raw_moment(1)

    def var(self) -> float:
        m1 = self.raw_moment(1)
        return self.raw_moment(2) - m1 * m1

    def std(self) -> float:
        return math.sqrt(self.var())

    def central_third(self) -> float:
        """Third central moment ``E (U - EU)^3``."""
        m1, m2, m3 = (self.raw_moment(k) for k in (1, 2, 3))
        return m3 - 3.0 * m1 * m2 + 2.0 * m1 ** 3

    # -- sampling and quantiles ---------------------------------------------

    @abstractmethod
    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """Draw ``n`` i.i.d. variates using the caller-owned generator."""

    @abstractmethod
    def ppf(self, q):
        """Quantile function."""

    # -- quadrature ---------------------------------------------------------

    def quad_upper(self) -> float:
        """Upper truncation point for quadrature against the law.

        The 0.9999 quantile plus twelve standard deviations; the mass
        beyond it is far below quadrature tolerances for the light-tailed
        laws implemented here.
        """
        return float(self.ppf(0.9999)) + 12.0 * self.std()

    def quad_points(self, n: int, upper: float | None = None):
        """Gauss-Legendre nodes/log-weights for ``int g(u) h(u) du``.

        Returns ``(u, logw)`` such that the integral of a smooth ``g`` is
        approximated by ``sum(exp(logw) * g(u))``.  The density is folded
        into the weights; laws with an integrable singularity at zero
        substitute it away so the transformed integrand is smooth.
        """
        if upper is None:
            upper = self.quad_upper()
        x, w = np.polynomial.legendre.leggauss(n)
        u = 0.5 * upper * (x + 1.0)
        logw = np.log(0.5 * upper * w) + self.log_pdf(u)
        return u, logw

    def _check_order(self, k: int) -> None:
        if not 0 <= k <= _MAX_MOMENT:
            raise UnsupportedOrder(f"moment order {k} outside 0..{_MAX_MOMENT}")


@dataclass(frozen=True)
class GammaMixing(MixingLaw):
    """Standard gamma mixing law with shape ``nu`` and unit scale."""

    nu: float
    kind = "gamma"

    def __post_init__(self):
        if not self.nu > 0:
            raise DomainError(f"gamma shape must be positive, got {self.nu}")

    def log_pdf(self, u):
        u = np.asarray(u, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = special.xlogy(self.nu - 1.0, u) - u - special.gammaln(self.nu)
        return np.where(u > 0, out, -np.inf)

    def mgf(self, t: float) -> float:
        if t >= 1.0:
            raise DomainError(f"gamma MGF undefined for t >= 1, got t={t}")
        return (1.0 - t) ** (-self.nu)

    def cf(self, s: float) -> complex:
        return (1.0 - 1j * s) ** (-self.nu)

    def raw_moment(self, k: int) -> float:
        self._check_order(k)
        # rising factorial nu (nu+1) ... (nu+k-1)
        return float(special.poch(self.nu, k))

    def sample(self, rng, n):
        return rng.gamma(self.nu, 1.0, size=n)

    def ppf(self, q):
        return stats.gamma.ppf(q, self.nu)

    def quad_points(self, n, upper=None):
        if self.nu >= 1.0:
            return super().quad_points(n, upper)
        # u = s**(1/nu) removes the u**(nu-1) singularity at the origin:
        # h(u) du = exp(-u) / (nu * Gamma(nu)) ds
        if upper is None:
            upper = self.quad_upper()
        s_hi = upper ** self.nu
        x, w = np.polynomial.legendre.leggauss(n)
        s = 0.5 * s_hi * (x + 1.0)
        u = s ** (1.0 / self.nu)
        logw = (np.log(0.5 * s_hi * w) - u
                - math.log(self.nu) - special.gammaln(self.nu))
        return u, logw


@dataclass(frozen=True)
class ExponentialMixing(MixingLaw):
    """Standard exponential mixing law (unit rate)."""

    kind = "exponential"

    def log_pdf(self, u):
        u = np.asarray(u, dtype=float)
        return np.where(u > 0, -u, -np.inf)

    def mgf(self, t: float) -> float:
        if t >= 1.0:
            raise DomainError(f"exponential MGF undefined for t >= 1, got t={t}")
        return 1.0 / (1.0 - t)

    def cf(self, s: float) -> complex:
        return 1.0 / (1.0 - 1j * s)

    def raw_moment(self, k: int) -> float:
        self._check_order(k)
        return float(math.factorial(k))

    def sample(self, rng, n):
        return rng.exponential(1.0, size=n)

    def ppf(self, q):
        return -np.log1p(-np.asarray(q, dtype=float))


@dataclass(frozen=True)
class TruncatedNormalMixing(MixingLaw):
    """Normal with mean parameter ``a`` and variance ``b``, truncated to (0, inf).

    ``a = 0``, ``b = 1`` gives the half-normal mixing of the skew-normal
    special case.
    """

    a: float = 0.0
    b: float = 1.0
    kind = "truncnormal"

    def __post_init__(self):
        if not self.b > 0:
            raise DomainError(f"variance parameter must be positive, got {self.b}")

    @property
    def _s(self) -> float:
        return math.sqrt(self.b)

    @property
    def _log_mass(self) -> float:
        # log P(N(a, b) > 0)
        return float(special.log_ndtr(self.a / self._s))

    def log_pdf(self, u):
        u = np.asarray(u, dtype=float)
        z = (u - self.a) / self._s
        out = -0.5 * z * z - 0.5 * math.log(2.0 * math.pi) - math.log(self._s)
        return np.where(u > 0, out - self._log_mass, -np.inf)

    def mgf(self, t: float) -> float:
        s = self._s
        log_num = special.log_ndtr(self.a / s + s * t)
        return float(np.exp(self.a * t + 0.5 * self.b * t * t
                            + log_num - self._log_mass))

    def cf(self, s: float) -> complex:
        # Phi at a complex argument via the scaled complementary error
        # function: Phi(z) = 0.5 * exp(-z^2/2) * wofz(-i z / sqrt(2)).
        sd = self._s
        z = self.a / sd + 1j * sd * s
        log_phi_z = -0.5 * z * z + np.log(0.5 * special.wofz(-1j * z / math.sqrt(2.0)))
        return complex(np.exp(1j * self.a * s - 0.5 * self.b * s * s
                              + log_phi_z - self._log_mass))

    def raw_moment(self, k: int) -> float:
        self._check_order(k)
        a, b = self.a, self.b
        s = self._s
        # lower truncation at zero: m_k = a m_{k-1} + (k-1) b m_{k-2},
        # seeded with the usual Mills-ratio mean
        mills = math.sqrt(2.0 / math.pi) / special.erfcx(-a / (s * math.sqrt(2.0)))
        m = [1.0, a + s * mills]
        for j in range(2, k + 1):
            m.append(a * m[j - 1] + (j - 1) * b * m[j - 2])
        return float(m[k])

    def sample(self, rng, n):
        return self.ppf(rng.uniform(size=n))

    def ppf(self, q):
        q = np.asarray(q, dtype=float)
        lo = special.ndtr(-self.a / self._s)  # P(N(a,b) <= 0)
        return self.a + self._s * special.ndtri(lo + q * (1.0 - lo))


def law_from_spec(model: str, nu: float | None = None) -> MixingLaw:
    """Build a mixing law from the CLI/JSON model identifier."""
    model = model.lower()
    if model == "mmne":
        return ExponentialMixing()
    if model == "mmng":
        return GammaMixing(1.0 if nu is None else float(nu))
    raise ValueError(f"unknown model {model!r}; expected 'mmne' or 'mmng'")


def model_name(law: MixingLaw) -> str:
    """Inverse of :func:`law_from_spec` for the laws the CLI supports."""
    if isinstance(law, ExponentialMixing):
        return "mmne"
    if isinstance(law, GammaMixing):
        return "mmng"
    raise ValueError(f"no CLI model name for mixing law {law!r}")
