"""Kronecker-layout tensor moments of the family.

The first four moments are stored in the flattened layouts

    m1: (p,)      m1[a]            = E Y_a
    m2: (p, p)    m2[a, b]         = E Y_a Y_b
    m3: (p^2, p)  m3[a*p + c, b]   = E Y_a Y_b Y_c
    m4: (p^2,p^2) m4[a*p+c, b*p+d] = E Y_a Y_b Y_c Y_d

which is exactly the arrangement produced by ``E[Y (x) Y' (x) Y]`` and
``E[Y (x) Y' (x) Y (x) Y']`` with a column-major ``vec``.  The moment
formulas for the normalized variable ``X = delta U + Z`` and the
location/scale transport to ``Y = xi + omega_diag X`` are implemented
term-by-term; ``moments_y_mmne`` is an independent code path specialized
to exponential mixing, used as a cross-check.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, FlagMismatch
from .mixing import ExponentialMixing, MixingLaw
from .params import MmnParams

MAX_COMMUTATION_DIM = 12


def kron(a, b) -> np.ndarray:
    """Kronecker product (thin wrapper for a consistent import surface)."""
    return np.kron(np.asarray(a, dtype=float), np.asarray(b, dtype=float))


def vec(a) -> np.ndarray:
    """Column-stacking vectorization."""
    return np.asarray(a, dtype=float).reshape(-1, order="F")


@functools.lru_cache(maxsize=16)
def commutation(p: int) -> np.ndarray:
    """Permutation matrix sending ``vec(A)`` to ``vec(A')`` for p x p ``A``."""
    if not 1 <= p <= MAX_COMMUTATION_DIM:
        raise DimensionMismatch(
            f"commutation matrix supported for 1 <= p <= {MAX_COMMUTATION_DIM}")
    k = np.zeros((p * p, p * p))
    for i in range(p):
        for j in range(p):
            k[j * p + i, i * p + j] = 1.0
    return k


def _col(a) -> np.ndarray:
    return np.asarray(a, dtype=float).reshape(-1, 1)


def _row(a) -> np.ndarray:
    return np.asarray(a, dtype=float).reshape(1, -1)


@dataclass(frozen=True, eq=False)
class MomentSet:
    """First four tensor moments, raw (``central=False``) or central."""

    m1: np.ndarray
    m2: np.ndarray
    m3: np.ndarray
    m4: np.ndarray
    central: bool = False

    @property
    def p(self) -> int:
        return self.m1.shape[0]

    @property
    def mean(self) -> np.ndarray:
        if self.central:
            raise FlagMismatch("central moment set does not carry the mean")
        return self.m1

    @property
    def cov(self) -> np.ndarray:
        if self.central:
            return self.m2
        return self.m2 - np.outer(self.m1, self.m1)


def moments_x(omega_bar: np.ndarray, delta: np.ndarray,
              law: MixingLaw) -> MomentSet:
    """Raw moments of the normalized variable ``X = delta U + Z``.

    ``Z ~ N_p(0, sigma_x)`` with ``sigma_x = omega_bar - delta delta'``.
    """
    omega_bar = np.asarray(omega_bar, dtype=float)
    delta = np.asarray(delta, dtype=float)
    p = delta.shape[0]
    if omega_bar.shape != (p, p):
        raise DimensionMismatch("omega_bar and delta shapes do not conform")
    sx = omega_bar - np.outer(delta, delta)
    e1, e2, e3, e4 = (law.raw_moment(k) for k in (1, 2, 3, 4))
    eye = np.eye(p)

    m1 = e1 * delta
    m2 = sx + e2 * np.outer(delta, delta)
    m3 = (e1 * (kron(_col(delta), sx) + np.outer(vec(sx), delta)
                + kron(eye, _col(delta)) @ sx)
          + e3 * kron(eye, _col(delta)) @ np.outer(delta, delta))
    m4 = ((np.eye(p * p) + commutation(p)) @ kron(sx, sx)
          + np.outer(vec(sx), vec(sx))
          + e2 * (kron(np.outer(delta, delta), sx)
                  + kron(kron(_col(delta), sx), _row(delta))
                  + kron(sx, np.outer(delta, delta))
                  + kron(kron(_row(delta), sx), _col(delta))
                  + kron(kron(_row(delta), _col(vec(sx))), _row(delta))
                  + np.outer(kron(delta, delta), vec(sx)))
          + e4 * kron(np.outer(delta, delta), np.outer(delta, delta)))
    return MomentSet(m1=m1, m2=m2, m3=m3, m4=m4, central=False)


def _shift_scale(ms_x: MomentSet, xi: np.ndarray, w: np.ndarray) -> MomentSet:
    """Location/scale transport of raw moments to ``Y = xi + diag(w) X``.

    Written as the explicit term expansion over placements of the constant
    ``xi`` and the random part in each tensor slot.
    """
    ww = np.outer(w, w)
    m1w = w * ms_x.m1
    m2w = ww * ms_x.m2
    m3w = kron(np.diag(w), np.diag(w)) @ ms_x.m3 @ np.diag(w)
    m4w = kron(np.diag(w), np.diag(w)) @ ms_x.m4 @ kron(np.diag(w), np.diag(w))

    xx = np.outer(xi, xi)
    m1 = xi + m1w
    m2 = xx + np.outer(xi, m1w) + np.outer(m1w, xi) + m2w
    m3 = (kron(xx, _col(xi))
          + kron(xx, _col(m1w))
          + kron(np.outer(xi, m1w), _col(xi))
          + kron(_col(m1w), xx)
          + kron(m2w, _col(xi))
          + kron(_col(xi), m2w)
          + np.outer(vec(m2w), xi)
          + m3w)
    m4 = (kron(xx, xx)
          + kron(xx, np.outer(xi, m1w))
          + kron(xx, np.outer(m1w, xi))
          + kron(xx, m2w)
          + kron(np.outer(xi, m1w), xx)
          + np.outer(kron(xi, xi), vec(m2w))
          + kron(kron(_col(xi), m2w), _row(xi))
          + kron(_col(xi), m3w.T)
          + kron(np.outer(m1w, xi), xx)
          + kron(kron(_row(xi), m2w), _col(xi))
          + kron(kron(_row(xi), _col(vec(m2w))), _row(xi))
          + kron(_row(xi), m3w)
          + kron(m2w, xx)
          + kron(m3w.T, _col(xi))
          + kron(m3w, _row(xi))
          + m4w)
    return MomentSet(m1=m1, m2=m2, m3=m3, m4=m4, central=False)


def moments_y(params: MmnParams) -> MomentSet:
    """Raw moments of ``Y`` via the normalized moments and transport."""
    ms_x = moments_x(params.omega_bar, params.delta, params.mixing)
    return _shift_scale(ms_x, params.xi, params.omega_diag)


def moments_y_mmne(params: MmnParams) -> MomentSet:
    """Raw moments of ``Y`` for exponential mixing, specialized formulas.

    Independent of :func:`moments_y`: plugs the exponential moments
    ``E U^m = m!`` into the expanded displays and assembles the second
    moment as ``sigma_y + 2 alpha alpha'`` directly.
    """
    if not isinstance(params.mixing, ExponentialMixing):
        raise FlagMismatch("specialized path requires exponential mixing")
    xi = params.xi
    w = params.omega_diag
    a = params.alpha
    p = params.p
    eye = np.eye(p)
    sy = params.sigma_y
    sx = params.omega_bar - np.outer(params.delta, params.delta)
    delta = params.delta

    s2 = sy + 2.0 * np.outer(a, a)  # omega m2x omega for E U^2 = 2
    m3x = (kron(_col(delta), sx) + np.outer(vec(sx), delta)
           + kron(eye, _col(delta)) @ sx
           + 6.0 * kron(eye, _col(delta)) @ np.outer(delta, delta))
    m4x = ((np.eye(p * p) + commutation(p)) @ kron(sx, sx)
           + np.outer(vec(sx), vec(sx))
           + 2.0 * (kron(np.outer(delta, delta), sx)
                    + kron(kron(_col(delta), sx), _row(delta))
                    + kron(sx, np.outer(delta, delta))
                    + kron(kron(_row(delta), sx), _col(delta))
                    + kron(kron(_row(delta), _col(vec(sx))), _row(delta))
                    + np.outer(kron(delta, delta), vec(sx)))
           + 24.0 * kron(np.outer(delta, delta), np.outer(delta, delta)))
    dw = np.diag(w)
    m3w = kron(dw, dw) @ m3x @ dw
    m4w = kron(dw, dw) @ m4x @ kron(dw, dw)

    xx = np.outer(xi, xi)
    m1 = xi + a
    m2 = xx + np.outer(xi, a) + np.outer(a, xi) + s2
    m3 = (kron(xx, _col(xi)) + kron(xx, _col(a))
          + kron(np.outer(xi, a), _col(xi)) + kron(_col(a), xx)
          + kron(s2, _col(xi)) + kron(_col(xi), s2)
          + np.outer(vec(s2), xi)
          + kron(_col(a), sy) + np.outer(vec(sy), a)
          + kron(eye, _col(a)) @ (sy + 6.0 * np.outer(a, a)))
    m4 = (kron(xx, xx)
          + kron(xx, np.outer(xi, a))
          + kron(xx, np.outer(a, xi))
          + kron(np.outer(xi, a), xx)
          + kron(xx, s2)
          + np.outer(kron(xi, xi), vec(s2))
          + kron(kron(_col(xi), s2), _row(xi))
          + kron(_col(xi), m3w.T)
          + kron(np.outer(a, xi), xx)
          + kron(kron(_row(xi), s2), _col(xi))
          + kron(kron(_row(xi), _col(vec(s2))), _row(xi))
          + kron(_row(xi), m3w)
          + kron(s2, xx)
          + kron(m3w.T, _col(xi))
          + kron(m3w, _row(xi))
          + m4w)
    return MomentSet(m1=m1, m2=m2, m3=m3, m4=m4, central=False)


def central_from_raw(ms: MomentSet) -> MomentSet:
    """Central moments from raw moments.

    Raises
    ------
    FlagMismatch
        If the set is already central.
    """
    if ms.central:
        raise FlagMismatch("moment set is already central")
    e = ms.m1
    m2, m3, m4 = ms.m2, ms.m3, ms.m4
    ee = np.outer(e, e)

    c2 = m2 - ee
    c3 = (m3 - kron(m2, _col(e)) - kron(_col(e), m2)
          - np.outer(vec(m2), e) + 2.0 * kron(ee, _col(e)))
    c4 = (m4
          - kron(m3.T, _col(e))
          - kron(m3, _row(e))
          - kron(_col(e), m3.T)
          - kron(_row(e), m3)
          + kron(m2, ee)
          + np.outer(kron(e, e), vec(m2))
          + kron(kron(_col(e), m2), _row(e))
          + kron(kron(_row(e), m2), _col(e))
          + kron(kron(_row(e), _col(vec(m2))), _row(e))
          + kron(ee, m2)
          - 3.0 * kron(ee, ee))
    return MomentSet(m1=np.zeros_like(e), m2=c2, m3=c3, m4=c4, central=True)


def transport_affine(ms: MomentSet, a: np.ndarray) -> MomentSet:
    """Moments of ``a @ Y`` from moments of ``Y`` (raw or central)."""
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[1] != ms.p:
        raise DimensionMismatch(
            f"a must have {ms.p} columns, got shape {a.shape}")
    aa = kron(a, a)
    return MomentSet(
        m1=a @ ms.m1,
        m2=a @ ms.m2 @ a.T,
        m3=aa @ ms.m3 @ a.T,
        m4=aa @ ms.m4 @ aa.T,
        central=ms.central,
    )


def central_third_affine(ms: MomentSet, a: np.ndarray) -> np.ndarray:
    """Third central moment of ``a' (Y - E Y)`` from raw moments of ``Y``.

    Direct expansion in terms of the raw moments and the mean; with
    ``a = I`` it coincides with ``central_from_raw(ms).m3``.
    """
    if ms.central:
        raise FlagMismatch("requires a raw moment set")
    a = np.asarray(a, dtype=float)
    if a.ndim == 1:
        a = a[:, None]
    if a.shape[0] != ms.p:
        raise DimensionMismatch(f"a must have {ms.p} rows, got {a.shape}")
    e = ms.m1
    m2t = a.T @ ms.m2 @ a
    et = a.T @ e
    return (kron(a.T, a.T) @ ms.m3 @ a
            - kron(m2t, _col(et))
            - kron(_col(et), m2t)
            - np.outer(vec(m2t), et)
            + 2.0 * kron(np.outer(et, et), _col(et)))
