"""Grid estimators for L^p and Lorentz quasi-norms, and power-law fits.

A field is a mapping ``{l: F_l}`` of radial profiles on the grid nodes,
standing for the 3D function sum_l F_l(r) Y_l0(theta).
"""

from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.special import eval_legendre

from .errors import FitError

N_ANGLES = 16


class NormKind(str, Enum):
    SUP = "sup_interior"
    L2 = "l2"
    WEAK_L3 = "lorentz_3_inf"
    LORENTZ_32_1 = "lorentz_1.5_1"


def radial_field(values):
    """Field of a purely radial function f(|x|) = values."""
    return {0: np.sqrt(4.0 * np.pi) * np.asarray(values)}


def _window_mask(grid, window):
    r = grid.nodes
    if window is None:
        return np.ones(r.size, dtype=bool)
    lo, hi = (0.0, window) if np.isscalar(window) else window
    return (r >= lo) & (r <= hi)


def _angular(n=N_ANGLES, poles=False):
    x, wx = np.polynomial.legendre.leggauss(n)
    if poles:
        x = np.concatenate([x, [-1.0, 1.0]])
        wx = np.concatenate([wx, [0.0, 0.0]])
    return x, wx


def _ylm0(ell, x):
    return np.sqrt((2 * ell + 1) / (4.0 * np.pi)) * eval_legendre(ell, x)


def field_on_sphere(field, mask, poles=False):
    """|f| at (radial node, cos theta) pairs plus the solid-angle weights."""
    x, wx = _angular(poles=poles)
    total = 0
    for ell, prof in field.items():
        total = total + np.asarray(prof)[mask][:, None] * _ylm0(ell, x)[None, :]
    return np.abs(total), 2.0 * np.pi * wx


def _single_radial(field):
    return list(field.keys()) == [0]


def lp_norm(field, p, grid, window=None):
    mask = _window_mask(grid, window)
    r, w = grid.nodes[mask], grid.weights[mask]
    if p == np.inf:
        if _single_radial(field):
            return float(np.max(np.abs(field[0][mask])) * _ylm0(0, 1.0)) if mask.any() else 0.0
        vals, _ = field_on_sphere(field, mask, poles=True)
        return float(vals.max()) if vals.size else 0.0
    if p == 2:
        tot = sum(np.sum(np.abs(np.asarray(f)[mask]) ** 2 * r * r * w) for f in field.values())
        return float(np.sqrt(tot))
    if _single_radial(field):
        a = np.abs(field[0][mask]) * _ylm0(0, 1.0)
        return float(np.sum(a ** p * 4.0 * np.pi * r * r * w) ** (1.0 / p))
    vals, omega = field_on_sphere(field, mask)
    meas = (r * r * w)[:, None] * omega[None, :]
    return float(np.sum(vals ** p * meas) ** (1.0 / p))


@dataclass
class RearrangementProfile:
    levels: np.ndarray
    measures: np.ndarray


def rearrangement(field, grid, window=None):
    """Distinct |f| levels in decreasing order with measures of {|f| >= level}."""
    mask = _window_mask(grid, window)
    r, w = grid.nodes[mask], grid.weights[mask]
    if _single_radial(field):
        vals = np.abs(field[0][mask]) * _ylm0(0, 1.0)
        meas = 4.0 * np.pi * r * r * w
    else:
        v, omega = field_on_sphere(field, mask)
        vals = v.ravel()
        meas = ((r * r * w)[:, None] * omega[None, :]).ravel()
    order = np.argsort(-vals, kind="stable")
    vals, meas = vals[order], np.cumsum(meas[order])
    keep = vals > 0
    vals, meas = vals[keep], meas[keep]
    if vals.size == 0:
        return RearrangementProfile(np.zeros(0), np.zeros(0))
    last = np.r_[vals[1:] != vals[:-1], True]
    return RearrangementProfile(vals[last], meas[last])


def lorentz_norm(field, p, q, grid, window=None):
    prof = rearrangement(field, grid, window)
    if prof.levels.size == 0:
        return 0.0
    if (p, q) == (3, np.inf):
        return float(np.max(prof.levels * prof.measures ** (1.0 / 3.0)))
    if (p, q) == (1.5, 1):
        steps = prof.levels - np.r_[prof.levels[1:], 0.0]
        return float(np.sum(prof.measures ** (2.0 / 3.0) * steps))
    raise ValueError("only (3, inf) and (1.5, 1) are implemented")


def norm(field, kind, grid, window=None):
    kind = NormKind(kind)
    if kind is NormKind.SUP:
        return lp_norm(field, np.inf, grid, window)
    if kind is NormKind.L2:
        return lp_norm(field, 2, grid, window)
    if kind is NormKind.WEAK_L3:
        return lorentz_norm(field, 3, np.inf, grid, window)
    return lorentz_norm(field, 1.5, 1, grid, window)


@dataclass
class PowerFit:
    exponent: float
    intercept: float
    r_squared: float
    window: tuple

    def to_dict(self):
        return {"exponent": self.exponent, "intercept": self.intercept,
                "r_squared": self.r_squared, "window": list(self.window)}


def fit_power(times, values, window=None):
    """Least squares slope of log(value) against log(t)."""
    t = np.asarray(times, dtype=float)
    v = np.asarray(values, dtype=float)
    sel = np.ones(t.size, dtype=bool) if window is None else (t >= window[0]) & (t <= window[1])
    t, v = t[sel], v[sel]
    if t.size < 6:
        raise FitError(f"need at least 6 points in the fit window, got {t.size}")
    if np.any(v <= 0):
        raise FitError("power fit needs positive values")
    x, y = np.log(t), np.log(v)
    slope, icpt = np.polyfit(x, y, 1)
    ss = np.sum((y - y.mean()) ** 2)
    r2 = 1.0 if ss == 0 else 1.0 - np.sum((y - slope * x - icpt) ** 2) / ss
    return PowerFit(float(slope), float(icpt), float(r2), (float(t[0]), float(t[-1])))
