"""Real spherical-harmonic basis evaluation.

The basis is the standard real orthonormal one: for order ``l`` and degree
``m`` the function is ``N(l,0) * P_l^0(cos t)`` for ``m = 0`` and
``sqrt(2) * N(l,|m|) * P_l^|m|(cos t) * cos/sin(|m| p)`` for positive /
negative ``m``, with ``N`` the orthonormalization factor.  The associated
Legendre functions are evaluated WITHOUT the Condon-Shortley phase; the
sign convention cancels between encoding and decoding.

Basis functions are linearly indexed as ``j = l*l + l + m + 1`` (1-based,
orders ascending, degrees ascending within an order), giving
``(l_max + 1)**2`` functions up to order ``l_max``.
"""

import math
import warnings
from dataclasses import dataclass

import numpy as np

SQRT_4PI = math.sqrt(4.0 * math.pi)


def coefficient_count(l_max):
    """Number of basis functions up to order ``l_max``."""
    if l_max < 0:
        raise ValueError("l_max must be >= 0")
    return (l_max + 1) ** 2


@dataclass(frozen=True)
class HarmonicIndex:
    j: int   # 1-based linear index
    l: int   # order
    m: int   # degree, -l <= m <= l


def index_table(l_max):
    """All harmonic indices up to ``l_max``, ordered by (l, m)."""
    if l_max < 0:
        raise ValueError("l_max must be >= 0")
    return [
        HarmonicIndex(j=l * l + l + m + 1, l=l, m=m)
        for l in range(l_max + 1)
        for m in range(-l, l + 1)
    ]


def associated_legendre(l, m, x):
    """Associated Legendre function ``P_l^m(x)`` without Condon-Shortley phase.

    Uses the stable diagonal-start recurrence: ``P_m^m`` directly, then
    upward in ``l``.  Accepts scalar or array ``x`` in ``[-1, 1]``.
    """
    if m < 0 or m > l:
        raise ValueError("require 0 <= m <= l")
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 0
    x = np.atleast_1d(x)
    if np.any(np.abs(x) > 1.0):
        raise ValueError("require |x| <= 1")
    somx2 = np.sqrt((1.0 - x) * (1.0 + x))
    pmm = np.ones_like(x)
    for k in range(1, m + 1):
        pmm = pmm * (2.0 * k - 1.0) * somx2
    if l == m:
        result = pmm
    else:
        pmmp1 = x * (2.0 * m + 1.0) * pmm
        if l == m + 1:
            result = pmmp1
        else:
            for ll in range(m + 2, l + 1):
                pll = (x * (2.0 * ll - 1.0) * pmmp1 - (ll + m - 1.0) * pmm) / (ll - m)
                pmm, pmmp1 = pmmp1, pll
            result = pmmp1
    return float(result[0]) if scalar else result


def _legendre_table(l_max, x):
    """``P_l^m(x)`` for all 0 <= m <= l <= l_max, keyed by (l, m)."""
    somx2 = np.sqrt((1.0 - x) * (1.0 + x))
    table = {}
    pmm = np.ones_like(x)
    for m in range(l_max + 1):
        if m > 0:
            pmm = table[(m - 1, m - 1)] * (2.0 * m - 1.0) * somx2
        table[(m, m)] = pmm
        if m < l_max:
            table[(m + 1, m)] = x * (2.0 * m + 1.0) * pmm
        for l in range(m + 2, l_max + 1):
            table[(l, m)] = (
                x * (2.0 * l - 1.0) * table[(l - 1, m)]
                - (l + m - 1.0) * table[(l - 2, m)]
            ) / (l - m)
    return table


def _norm_factor(l, m):
    # log-factorial form avoids overflow at high orders
    log_ratio = math.lgamma(l - m + 1) - math.lgamma(l + m + 1)
    return math.sqrt((2.0 * l + 1.0) / (4.0 * math.pi) * math.exp(log_ratio))


def evaluate_basis(theta, phi, l_max):
    """Real orthonormal SH values ``[Y_1 .. Y_R]`` at direction(s).

    Scalar angles give a vector of length ``R``; length-n angle arrays
    give an ``(n, R)`` matrix.
    """
    if l_max < 0:
        raise ValueError("l_max must be >= 0")
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    scalar = theta.ndim == 0
    theta = np.atleast_1d(theta)
    phi = np.atleast_1d(phi)
    x = np.cos(theta)
    table = _legendre_table(l_max, x)
    sqrt2 = math.sqrt(2.0)
    out = np.empty((theta.size, coefficient_count(l_max)))
    for h in index_table(l_max):
        am = abs(h.m)
        col = _norm_factor(h.l, am) * table[(h.l, am)]
        if h.m > 0:
            col = sqrt2 * col * np.cos(am * phi)
        elif h.m < 0:
            col = sqrt2 * col * np.sin(am * phi)
        out[:, h.j - 1] = col
    return out[0] if scalar else out


@dataclass(frozen=True)
class BasisMatrix:
    """Sampling-pattern basis matrix: rows are orientations, columns the
    ``(l_max + 1)**2`` real SH basis functions."""

    values: np.ndarray
    l_max: int

    @property
    def orientation_count(self):
        return self.values.shape[0]

    @property
    def function_count(self):
        return self.values.shape[1]

    def truncated(self, l_max):
        """Basis for a lower maximum order (a column prefix)."""
        if l_max > self.l_max:
            raise ValueError("can only truncate to a lower order")
        return BasisMatrix(values=self.values[:, :coefficient_count(l_max)],
                           l_max=l_max)


def build_basis_matrix(orientations, l_max):
    """Evaluate the basis at every orientation of the sampling pattern."""
    n = len(orientations)
    if n == 0:
        raise ValueError("empty orientation set")
    r = coefficient_count(l_max)
    if n < r:
        warnings.warn(
            f"only {n} orientations for {r} basis functions; "
            "least-squares fits will be underdetermined",
            stacklevel=2,
        )
    values = evaluate_basis(orientations.theta, orientations.phi, l_max)
    return BasisMatrix(values=np.atleast_2d(values), l_max=l_max)
