"""Free resolvent kernels, per-wave reductions and the Birman-Schwinger operator.

Conventions: a 3D function in wave (l, m=0) is F(r) Y_l0 and is stored through
its reduced profile U = r F. Integral operators act on U with kernels k(r, r')
and the quadrature rule of the grid, so (K U)_i = sum_j k(r_i, r_j) U_j w_j.
"""

from dataclasses import dataclass
from functools import lru_cache
from enum import Enum

import numpy as np
from scipy.special import roots_legendre

from . import _kernels
from .errors import DimensionError, SingularityError, ThresholdProximityError

FOUR_PI = 4.0 * np.pi


@dataclass(frozen=True)
class RadialGrid:
    """Uniform midpoint rule on (0, R_max]: r_i = (i - 1/2) h, w_i = h."""

    n: int
    r_max: float

    def __post_init__(self):
        if int(self.n) < 1 or not self.r_max > 0:
            raise DimensionError("grid needs n >= 1 and r_max > 0")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "r_max", float(self.r_max))

    @property
    def h(self):
        return self.r_max / self.n

    @property
    def nodes(self):
        return (np.arange(self.n) + 0.5) * self.h

    @property
    def weights(self):
        return np.full(self.n, self.h)

    def refined(self, factor=2):
        return RadialGrid(self.n * factor, self.r_max)

    def __len__(self):
        return self.n


def free_kernel_3d(lam, d):
    """Outgoing kernel e^{i lam d} / (4 pi d) of (-Laplace - lam^2)^{-1}."""
    d = np.asarray(d, dtype=float)
    if np.any(d <= 0):
        raise SingularityError("free kernel is singular at d = 0")
    return np.exp(1j * lam * d) / (FOUR_PI * d)


class KernelKind(str, Enum):
    RESOLVENT = "resolvent"
    D_RESOLVENT = "d_resolvent"
    DIFFQ1 = "diffq1"
    D_DIFFQ1 = "d_diffq1"
    DIFFQ2 = "diffq2"
    D_DIFFQ2 = "d_diffq2"


def kernel_mass(kind, d):
    kind = KernelKind(kind)
    if kind is KernelKind.RESOLVENT:
        return 1.0 / (FOUR_PI * d)
    if kind in (KernelKind.D_RESOLVENT, KernelKind.DIFFQ1):
        return 1.0 / FOUR_PI
    if kind in (KernelKind.D_DIFFQ1, KernelKind.DIFFQ2):
        return d / (8.0 * np.pi)
    return d * d / (24.0 * np.pi)


def kernel_value(kind, lam, d):
    """The lam-side kernel of each kind at distance d; lam = 0 uses the limits."""
    kind = KernelKind(kind)
    lam = complex(lam)
    e = np.exp(1j * lam * d)
    small = abs(lam) * d < 1.0
    if kind is KernelKind.RESOLVENT:
        return e / (FOUR_PI * d)
    if kind is KernelKind.D_RESOLVENT:
        return 1j * e / FOUR_PI
    if kind is KernelKind.DIFFQ1:
        if lam == 0:
            return 1j / FOUR_PI
        return (e - 1.0) / (FOUR_PI * d * lam)
    if kind is KernelKind.DIFFQ2:
        if small:
            return _series(lambda k: -(1j * lam) ** k * d ** (k + 2) / _fact(k + 2), d)
        return (e - 1.0 - 1j * lam * d) / (FOUR_PI * d * lam * lam)
    if kind is KernelKind.D_DIFFQ1:
        if small:
            return _series(lambda k: -(1j * lam) ** k * d ** (k + 2) / (_fact(k) * (k + 2)), d)
        return (1j * lam * d * e - e + 1.0) / (FOUR_PI * d * lam * lam)
    if small:
        return _series(lambda k: -1j * (1j * lam) ** k * d ** (k + 3) / (_fact(k) * (k + 2) * (k + 3)), d)
    return (1j * lam * d * e - 2.0 * e + 2.0 + 1j * lam * d) / (FOUR_PI * d * lam ** 3)


def _fact(k):
    out = 1.0
    for j in range(2, k + 1):
        out *= j
    return out


def _series(term, d):
    return sum(term(k) for k in range(30)) / (FOUR_PI * d)


@dataclass(frozen=True)
class TimeProfile:
    """sigma-side representation: kernel(lam) = int e^{i lam s} density(s) ds + atom e^{i lam d}."""

    density: object
    atom: complex
    d: float


def time_profile(kind, d):
    kind = KernelKind(kind)
    c = 1.0 / (FOUR_PI * d)
    zero = lambda s: np.zeros_like(np.asarray(s, dtype=float), dtype=complex)
    if kind is KernelKind.RESOLVENT:
        return TimeProfile(zero, c, d)
    if kind is KernelKind.D_RESOLVENT:
        return TimeProfile(zero, 1j / FOUR_PI, d)
    if kind is KernelKind.DIFFQ1:
        return TimeProfile(lambda s: 1j * c * np.ones_like(np.asarray(s, dtype=float)), 0.0, d)
    if kind is KernelKind.D_DIFFQ1:
        return TimeProfile(lambda s: -c * np.asarray(s, dtype=float) + 0j, 0.0, d)
    if kind is KernelKind.DIFFQ2:
        return TimeProfile(lambda s: -c * (d - np.asarray(s, dtype=float)) + 0j, 0.0, d)
    return TimeProfile(lambda s: -1j * c * np.asarray(s) * (d - np.asarray(s)), 0.0, d)


@lru_cache(maxsize=8)
def _gauss_legendre(n):
    x, w = roots_legendre(n)
    x.flags.writeable = False
    w.flags.writeable = False
    return x, w


def verify_kernel_mass(kind, d, quad_points=4096):
    """Relative error between the quadrature of |time profile| and the closed form."""
    if quad_points < 16:
        raise ValueError("quad_points must be >= 16")
    prof = time_profile(kind, d)
    x, wx = _gauss_legendre(int(quad_points))
    s = 0.5 * d * (x + 1.0)
    total = 0.5 * d * np.sum(wx * np.abs(prof.density(s))) + abs(prof.atom)
    exact = kernel_mass(kind, d)
    return abs(total - exact) / exact


# per-wave kernels -----------------------------------------------------------

def wave_kernel(ell, lam, r, rp):
    """Reduced kernel g_l(lam; r, r') acting on U = r F (scalar inputs)."""
    return complex(wave_green_matrix(ell, lam, np.array([float(r)]), np.array([float(rp)]))[0, 0])


def wave_green_matrix(ell, lam, rows, cols=None):
    """Matrix g_l(lam; rows_i, cols_j) = (i/lam) jhat(lam r<) hhat(lam r>)."""
    rows = np.ascontiguousarray(rows, dtype=float)
    cols = rows if cols is None else np.ascontiguousarray(cols, dtype=float)
    lam = complex(lam)
    if lam == 0:
        return _kernels.static_fill(int(ell), rows, cols).astype(complex)
    jr, hr = _kernels.riccati(ell, lam * rows)
    if cols is rows:
        jc, hc = jr, hr
    else:
        jc, hc = _kernels.riccati(ell, lam * cols)
    return _kernels.green_fill(jr, hr, rows, jc, hc, cols, 1j / lam)


def static_green_matrix(ell, rows, cols=None):
    rows = np.ascontiguousarray(rows, dtype=float)
    cols = rows if cols is None else np.ascontiguousarray(cols, dtype=float)
    return _kernels.static_fill(int(ell), rows, cols)


def wave_diffq1_matrix(ell, lam, rows, cols=None):
    """(g_l(lam) - g_l(0)) / lam with the exact lam = 0 branch.

    At lam = 0 the 3D limit is the constant i/(4 pi), which lives in l = 0
    only and reduces to i r r'.
    """
    rows = np.asarray(rows, dtype=float)
    cols = rows if cols is None else np.asarray(cols, dtype=float)
    if complex(lam) == 0:
        if ell == 0:
            return 1j * np.outer(rows, cols)
        return np.zeros((rows.size, cols.size), dtype=complex)
    return (wave_green_matrix(ell, lam, rows, cols) - static_green_matrix(ell, rows, cols)) / lam


def multipole_kernel(power, ell, rows, cols=None):
    """Reduced wave-l kernel of |x - y|^power for power in (1, 2).

    With |x - y|^p = sum_l c_l(r, r') P_l(cos gamma), the operator on the
    wave-l subspace has reduced kernel r r' 4 pi c_l / (2l + 1).
    """
    rows = np.asarray(rows, dtype=float)
    cols = rows if cols is None else np.asarray(cols, dtype=float)
    lo = np.minimum.outer(rows, cols)
    hi = np.maximum.outer(rows, cols)
    if power == 1:
        c = lo ** (ell + 2) / ((2 * ell + 3) * hi ** (ell + 1)) - lo ** ell / ((2 * ell - 1) * hi ** (ell - 1))
    elif power == 2:
        if ell == 0:
            c = lo * lo + hi * hi
        elif ell == 1:
            c = -2.0 * lo * hi
        else:
            c = np.zeros_like(lo)
    else:
        raise ValueError("power must be 1 or 2")
    return np.outer(rows, cols) * FOUR_PI * c / (2 * ell + 1)


# Birman-Schwinger operator --------------------------------------------------

@dataclass(frozen=True)
class WaveOperatorMatrix:
    ell: int
    lam: complex
    entries: np.ndarray

    @property
    def shape(self):
        return self.entries.shape


def assemble_T(ell, lam, grid, fact, green=None):
    """T_ij = v2_i g_l(lam; r_i, r_j) v1_j w_j."""
    if len(fact) != grid.n:
        raise DimensionError(f"potential has {len(fact)} nodes, grid has {grid.n}")
    if green is None:
        green = wave_green_matrix(ell, lam, grid.nodes)
    ent = fact.v2_values[:, None] * green * (fact.v1_values * grid.weights)[None, :]
    return WaveOperatorMatrix(int(ell), complex(lam), ent)


def _free_apply(green, f, w):
    return green @ (f * w)


def perturbed_resolvent_apply(lam, f, ell, grid, fact, tau_rel=1e-8):
    """R_V((lam + i0)^2) f = R0 f - R0 v1 (I + T)^{-1} v2 R0 f on the reduced line."""
    f = np.asarray(f, dtype=complex)
    if f.shape != (grid.n,):
        raise DimensionError("f must live on the grid")
    green = wave_green_matrix(ell, lam, grid.nodes)
    w = grid.weights
    r0f = _free_apply(green, f, w)
    sup = fact.support
    if not np.any(sup):
        return r0f
    idx = np.flatnonzero(sup)
    T = assemble_T(ell, lam, grid, fact, green).entries[np.ix_(idx, idx)]
    A = np.eye(idx.size) + T
    svals = np.linalg.svd(A, compute_uv=False)
    if svals[-1] < tau_rel * svals[0]:
        raise ThresholdProximityError(
            f"I + T is near singular at lam={lam}", float(svals[-1]))
    x = np.linalg.solve(A, fact.v2_values[idx] * r0f[idx])
    corr = green[:, idx] @ (fact.v1_values[idx] * x * w[idx])
    return r0f - corr
