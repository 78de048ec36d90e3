"""Inner loops with an optional numba backend.

Set ``ARTIFACT_DISABLE_NUMBA=1`` to force the pure numpy path. Both paths
share the same scalar formulas, so results agree to rounding.
"""

import cmath
import os

import numpy as np

_DISABLED = os.environ.get("ARTIFACT_DISABLE_NUMBA", "").strip().lower() in ("1", "true", "yes")

try:
    if _DISABLED:
        raise ImportError
    from numba import njit
    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - depends on environment
    HAVE_NUMBA = False

BACKEND = "numba" if HAVE_NUMBA else "numpy"


def _riccati_pair(ell, z):
    """Return (z j_l(z), z h_l^(1)(z)) for complex z != 0."""
    if abs(z) <= ell + 2.0:
        # ascending series for the regular solution, no cancellation near 0
        term = z ** (ell + 1)
        dfact = 1.0
        for k in range(1, 2 * ell + 2, 2):
            dfact *= k
        term = term / dfact
        jh = term
        mz2 = -0.5 * z * z
        for k in range(1, 80):
            term = term * mz2 / (k * (2 * ell + 2 * k + 1))
            jh += term
            if abs(term) < 1e-17 * abs(jh):
                break
    else:
        jh = 0j
    s1 = 0j
    s2 = 0j
    coef = 1.0
    for k in range(ell + 1):
        if k > 0:
            coef = coef * (ell + k) * (ell - k + 1) / k
        s1 += coef * (1j / (2.0 * z)) ** k
        s2 += coef * (-1j / (2.0 * z)) ** k
    h1 = (-1j) ** (ell + 1) * cmath.exp(1j * z) * s1
    if abs(z) > ell + 2.0:
        h2 = (1j) ** (ell + 1) * cmath.exp(-1j * z) * s2
        jh = 0.5 * (h1 + h2)
    return jh, h1


def _green_fill(jr, hr, rr, jc, hc, rc, pref):
    n, m = rr.shape[0], rc.shape[0]
    out = np.empty((n, m), dtype=np.complex128)
    for i in range(n):
        for j in range(m):
            if rr[i] <= rc[j]:
                out[i, j] = pref * jr[i] * hc[j]
            else:
                out[i, j] = pref * jc[j] * hr[i]
    return out


def _static_fill(ell, rr, rc):
    n, m = rr.shape[0], rc.shape[0]
    out = np.empty((n, m))
    c = 1.0 / (2 * ell + 1)
    for i in range(n):
        for j in range(m):
            lo = min(rr[i], rc[j])
            hi = max(rr[i], rc[j])
            out[i, j] = c * lo ** (ell + 1) / hi ** ell
    return out


def _mu_profile(r, t, nodes, weights):
    out = np.empty(r.shape[0], dtype=np.complex128)
    for i in range(r.shape[0]):
        ph = r[i] * r[i] / (4.0 * t)
        e0 = cmath.exp(1j * ph)
        acc = 0j
        for k in range(nodes.shape[0]):
            acc += weights[k] * (e0 - cmath.exp(1j * ph * nodes[k] * nodes[k]))
        out[i] = 1j * acc / r[i]
    return out


# numpy fallbacks: the scalar pieces stay in Python, the O(N^2) parts vectorize

def _green_fill_np(jr, hr, rr, jc, hc, rc, pref):
    below = rr[:, None] <= rc[None, :]
    return pref * np.where(below, jr[:, None] * hc[None, :], jc[None, :] * hr[:, None])


def _static_fill_np(ell, rr, rc):
    lo = np.minimum.outer(rr, rc)
    hi = np.maximum.outer(rr, rc)
    return lo ** (ell + 1) / hi ** ell / (2 * ell + 1)


def _mu_profile_np(r, t, nodes, weights):
    ph = r * r / (4.0 * t)
    inner = np.exp(1j * ph)[:, None] - np.exp(1j * np.outer(ph, nodes * nodes))
    return 1j * (inner @ weights) / r


if HAVE_NUMBA:
    _pair = njit(cache=True)(_riccati_pair)

    @njit(cache=True)
    def riccati_arrays(ell, z):
        n = z.shape[0]
        jh = np.empty(n, dtype=np.complex128)
        hh = np.empty(n, dtype=np.complex128)
        for i in range(n):
            a, b = _pair(ell, z[i])
            jh[i] = a
            hh[i] = b
        return jh, hh

    green_fill = njit(cache=True)(_green_fill)
    static_fill = njit(cache=True)(_static_fill)
    mu_profile = njit(cache=True)(_mu_profile)
else:
    def riccati_arrays(ell, z):
        jh = np.empty(z.shape[0], dtype=np.complex128)
        hh = np.empty(z.shape[0], dtype=np.complex128)
        for i, zi in enumerate(z):
            jh[i], hh[i] = _riccati_pair(ell, complex(zi))
        return jh, hh

    green_fill = _green_fill_np
    static_fill = _static_fill_np
    mu_profile = _mu_profile_np


def riccati(ell, z):
    """Vectorized Riccati-Bessel pair at complex points ``z`` (all nonzero)."""
    z = np.ascontiguousarray(np.atleast_1d(z), dtype=np.complex128)
    return riccati_arrays(int(ell), z)
