"""Spectral propagation of e^{-itH} P_c in a Dirichlet box, the explicit slow
operators R(t) and S(t), and decay experiments on the residual Z(t)."""

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from . import _kernels
from .norms import NormKind, fit_power, norm
from .resolvent import multipole_kernel
from .threshold import Kind

PHASE = np.exp(-0.75j * np.pi)


def tau_zero(grid):
    return 5.0 * (np.pi / grid.r_max) ** 2


@dataclass
class WaveEigensystem:
    """Eigenpairs of A psi = E M psi with psi orthonormal for <u, v> = h u^T M v."""

    ell: int
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    mass: np.ndarray
    h: float
    neg_count: int
    zero_modes: np.ndarray
    tau: float

    def inner(self, u, v):
        return self.h * np.conj(u) @ (self.mass @ v)

    def coefficients(self, u):
        return self.h * self.eigenvectors.T @ (self.mass @ u)

    def norm(self, u):
        return float(np.sqrt(np.real(self.inner(u, u))))


def green_matched_stencil(ell, grid):
    """Tridiagonal radial operator whose inverse reproduces the static wave-l Green matrix.

    Rows annihilate the regular solution p = r^{l+1}/(2l+1); the couplings
    come from the Wronskians of p and q = r^{-l} at neighbouring nodes. A
    virtual node at r_N + h imposes the Dirichlet wall. For l = 0 this is
    the standard cell-centred second difference.
    """
    h, r = grid.h, grid.nodes
    p = lambda x: x ** (ell + 1) / (2 * ell + 1)
    q = lambda x: x ** (-float(ell))
    right = np.r_[r[1:], r[-1] + h]
    wr = p(right) * q(r) - p(r) * q(right)
    off = -1.0 / (h * wr)
    diag = np.empty(grid.n)
    diag[0] = -off[0] * p(r[1]) / p(r[0]) if grid.n > 1 else 2.0 / h ** 2
    if grid.n > 1:
        diag[1:] = -(off[:-1] * p(r[:-1]) + off[1:] * p(right[1:])) / p(r[1:])
    diag[-1] -= off[-1]
    return diag, off[:-1]


def numerov_mass(ell, n):
    """Tridiagonal mass (1, 10, 1)/12 with ghost reflections at both ends."""
    d = np.full(n, 10.0 / 12.0)
    d[0] += (-1.0) ** (ell + 1) / 12.0
    d[-1] -= 1.0 / 12.0
    return d, np.full(n - 1, 1.0 / 12.0)


def discretize_H(ell, grid, values, tau=None):
    """Reduced Dirichlet operator -d^2/dr^2 + l(l+1)/r^2 + V on (0, R_max].

    The stiffness part is the Green-matched stencil plus diag(V), so the box
    operator has a zero mode exactly where the Nystrom threshold analysis
    finds one. The Numerov mass makes the free dispersion fourth order.
    """
    kd, ko = green_matched_stencil(ell, grid)
    md, mo = numerov_mass(ell, grid.n)
    a = np.diag(kd + values) + np.diag(ko, 1) + np.diag(ko, -1)
    m = np.diag(md) + np.diag(mo, 1) + np.diag(mo, -1)
    e, vec = sla.eigh(a, m)
    vec = vec / np.sqrt(grid.h)
    tz = tau_zero(grid) if tau is None else tau
    neg = int(np.sum(e < -tz))
    zero = np.flatnonzero(np.abs(e) < tz)
    return WaveEigensystem(int(ell), e, vec, m, grid.h, neg, zero, tz)


def wave_systems(grid, values, ells, workers=1):
    """Eigensystems for each wave; LAPACK releases the GIL, so threads overlap."""
    ells = sorted(ells)
    if workers <= 1 or len(ells) < 2:
        return {ell: discretize_H(ell, grid, values) for ell in ells}
    with ThreadPoolExecutor(max_workers=workers) as pool:
        done = pool.map(lambda ell: discretize_H(ell, grid, values), ells)
        return dict(zip(ells, done))


# projection and propagation --------------------------------------------------

def _removal_basis(system, extra):
    """M-orthonormal basis spanning negative modes and the given extra profiles."""
    cols = [system.eigenvectors[:, system.eigenvalues < -system.tau]]
    if extra:
        cols.append(np.column_stack(extra))
    b = np.hstack(cols)
    if b.shape[1] == 0:
        return b
    gram = system.h * b.T @ (system.mass @ b)
    lam, vec = np.linalg.eigh(gram)
    keep = lam > 1e-12 * lam.max()
    return b @ (vec[:, keep] / np.sqrt(lam[keep]))


def pc_project(u, systems, p0_basis=None, zero_policy="continuum"):
    """Orthogonal projection (mass inner product) off negative modes and the zero eigenspace.

    ``p0_basis`` ({l: [NullState]}) carries the zero-energy eigenfunctions of
    the infinite-volume problem. With ``zero_policy="continuum"`` those
    profiles span the removed zero eigenspace, and the box modes that approximate
    them stay in as continuum approximants. ``"box"`` removes the box eigenvectors
    with |E| < tau_zero instead, for waves that carry eigenfunctions.
    """
    out = {}
    for ell, vec in u.items():
        sysm = systems[ell]
        states = (p0_basis or {}).get(ell, [])
        if zero_policy == "box":
            near = sysm.zero_modes[np.argsort(np.abs(sysm.eigenvalues[sysm.zero_modes]))]
            extra = [sysm.eigenvectors[:, i] for i in near[:len(states)]]
        elif zero_policy == "continuum":
            extra = [s.profile for s in states]
        else:
            raise ValueError(f"unknown zero_policy {zero_policy!r}")
        b = _removal_basis(sysm, extra)
        v = np.array(vec, dtype=complex)
        if b.shape[1]:
            v = v - b @ (sysm.h * b.T @ (sysm.mass @ v))
        out[ell] = v
    return out


class Propagator:
    """Spectral sum sum_n e^{-itE_n} <psi_n, u0> psi_n, wave by wave."""

    def __init__(self, u0, systems):
        self.systems = systems
        self.coef = {ell: systems[ell].coefficients(np.asarray(v, dtype=complex)) for ell, v in u0.items()}

    def at(self, t):
        out = {}
        for ell, c in self.coef.items():
            s = self.systems[ell]
            out[ell] = s.eigenvectors @ (np.exp(-1j * t * s.eigenvalues) * c)
        return out

    def norm(self, state):
        return float(np.sqrt(sum(self.systems[ell].norm(v) ** 2 for ell, v in state.items())))


def evolve(u0, t, systems):
    return Propagator(u0, systems).at(t)


def spectral_cutoff(u, systems, fraction=0.999):
    """E_cut holding ``fraction`` of ||u||^2, and u filtered to E <= E_cut."""
    es, ws = [], []
    for ell, v in u.items():
        c = systems[ell].coefficients(np.asarray(v, dtype=complex))
        es.append(systems[ell].eigenvalues)
        ws.append(np.abs(c) ** 2)
    e, wgt = np.concatenate(es), np.concatenate(ws)
    order = np.argsort(e)
    cum = np.cumsum(wgt[order]) / np.sum(wgt)
    e_cut = float(e[order][min(np.searchsorted(cum, fraction), e.size - 1)])
    return e_cut, bandlimit(u, systems, e_cut)


def bandlimit(u, systems, e_cut):
    out = {}
    for ell, v in u.items():
        s = systems[ell]
        c = s.coefficients(np.asarray(v, dtype=complex))
        c[s.eigenvalues > e_cut] = 0.0
        out[ell] = s.eigenvectors @ c
    return out


def reflection_budget(r_max, r_obs, e_cut, r_src=None, policy="round_trip"):
    """Latest time before waves reflected by the wall can re-enter r <= r_obs.

    Group velocity is at most 2 sqrt(E_cut). ``round_trip`` follows the
    fastest front from the source edge to the wall and back; ``one_way``
    is the stricter travel time from r_obs to the wall.
    """
    v = 2.0 * np.sqrt(e_cut)
    if policy == "one_way":
        return 0.8 * (r_max - r_obs) / v
    src = r_max / 8.0 if r_src is None else r_src
    return 0.8 * (2.0 * r_max - r_obs - src) / v


# slow operators ------------------------------------------------------------------

_TH, _TW = np.polynomial.legendre.leggauss(64)
_TH = 0.5 * (_TH + 1.0)
_TW = 0.5 * _TW


def mu_t(r, t):
    """mu_t(x) = (i/|x|) int_0^1 (e^{i|x|^2/4t} - e^{i theta^2 |x|^2/4t}) d theta."""
    if t <= 0:
        raise ValueError("t must be positive")
    r = np.ascontiguousarray(r, dtype=float)
    return _kernels.mu_profile(r, float(t), _TH, _TW)


def r_t_apply(t, u, phi, a_const, grid):
    """a e^{-3i pi/4} (pi t)^{-1/2} zeta_t <u, zeta_t>, zeta_t = e^{i r^2/4t} phi (l = 0 only)."""
    if t <= 0:
        raise ValueError("t must be positive")
    out = {ell: np.zeros(grid.n, dtype=complex) for ell in u}
    if 0 not in u:
        return out
    zeta = np.exp(1j * grid.nodes ** 2 / (4.0 * t)) * phi.profile
    pair = np.sum(zeta * u[0] * grid.weights)
    out[0] = a_const * PHASE / np.sqrt(np.pi * t) * zeta * pair
    return out


class SlowOperatorS:
    """The three-term operator S(t) for a given L^2-orthonormal E-basis.

    Wave by wave: -i P0 V |x-y|^2/(24 pi) V P0 + mu_t (|x-y|/c) V P0
    + P0 V (|x-y|/c) mu_t, with the multipoles expanded per wave. The
    stationary-phase evaluation of the lam^0 cross terms gives c = 4 pi;
    ``cross_scale=2`` reproduces c = 8 pi for comparison.
    """

    def __init__(self, basis, values, grid, cross_scale=1.0):
        self.grid, self.values = grid, values
        self.cross = 1.0 / (4.0 * np.pi * cross_scale)
        self.basis = {ell: np.array([s.profile for s in states]) for ell, states in basis.items() if states}
        self.k1 = {ell: multipole_kernel(1, ell, grid.nodes) for ell in self.basis}
        w = grid.weights
        self.m2 = {}
        for ell, phi in self.basis.items():
            vphi = phi * values * w
            self.m2[ell] = vphi @ multipole_kernel(2, ell, grid.nodes) @ vphi.T

    def apply(self, t, u):
        if t <= 0:
            raise ValueError("t must be positive")
        g, w, v = self.grid, self.grid.weights, self.values
        out = {ell: np.zeros(g.n, dtype=complex) for ell in u}
        mu = None
        for ell, phi in self.basis.items():
            if ell not in u:
                continue
            if mu is None:
                mu = mu_t(g.nodes, t)
            uu = np.asarray(u[ell], dtype=complex)
            ov = phi @ (uu * w)
            p0u = ov @ phi
            term1 = -1j / (24.0 * np.pi) * ((self.m2[ell] @ ov) @ phi)
            term2 = self.cross * mu * (self.k1[ell] @ (v * p0u * w))
            src = v * (self.k1[ell] @ (mu * uu * w))
            term3 = self.cross * ((phi @ (src * w)) @ phi)
            out[ell] = PHASE / np.sqrt(np.pi * t) * (term1 + term2 + term3)
        return out


def s_t_apply(t, u, basis, values, grid, cross_scale=1.0):
    return SlowOperatorS(basis, values, grid, cross_scale).apply(t, u)


# experiments ---------------------------------------------------------------------

def gaussian_data(grid, waves, width=0.15):
    """U_l = amp r^{l+1} exp(-r^2 / 4 width) for {l: amp}."""
    r = grid.nodes
    return {int(ell): amp * r ** (int(ell) + 1) * np.exp(-r * r / (4.0 * width)) + 0j
            for ell, amp in waves.items()}


def to_field(u, grid):
    return {ell: v / grid.nodes for ell, v in u.items()}


@dataclass
class EvolutionTrace:
    times: np.ndarray
    norms: dict
    residual_norms: dict
    fitted_exponents: dict
    residual_exponents: dict
    subtracted: list
    wave_breakdown: list
    l2_drift: float
    semigroup_error: float
    e_cut: float
    t_budget: float
    r_obs: float
    states: list = field(default_factory=list)
    notes: list = field(default_factory=list)

    def csv_rows(self):
        rows = []
        for i, t in enumerate(self.times):
            wb = ";".join(f"l{ell}={val:.17g}" for ell, val in sorted(self.wave_breakdown[i].items()))
            for kind in self.norms:
                rows.append([repr(float(t)), kind, repr(float(self.norms[kind][i])),
                             repr(float(self.residual_norms[kind][i])), wb])
        return rows

    def summary(self):
        return {
            "times": [float(t) for t in self.times],
            "subtracted": list(self.subtracted),
            "fitted_exponents": {k: v.to_dict() for k, v in self.fitted_exponents.items()},
            "residual_exponents": {k: v.to_dict() for k, v in self.residual_exponents.items()},
            "l2_drift": self.l2_drift,
            "semigroup_error": self.semigroup_error,
            "e_cut": self.e_cut,
            "t_budget": self.t_budget,
            "r_obs": self.r_obs,
            "notes": list(self.notes),
        }


def _regrowth_cut(values, tol=0.05):
    """Index after which a decaying series turns back up by more than ``tol``."""
    best = values[0]
    for i, v in enumerate(values):
        if v > best * (1.0 + tol):
            return i
        best = min(best, v)
    return len(values)


def decay_experiment(grid, values, report, data, times=None, norm_kinds=None, r_obs=None,
                     fraction=0.999, subtract=None, budget_policy="round_trip",
                     n_times=12, keep_states=False, zero_policy="continuum", workers=1,
                     cross_scale=1.0):
    """Propagate bandlimited data and fit decay exponents of full and residual norms.

    ``subtract`` defaults by classification: generic none, kind1 R, kind2 S,
    kind3 R and S.
    """
    kinds = [NormKind(k).value for k in (norm_kinds or (NormKind.SUP, NormKind.WEAK_L3, NormKind.L2))]
    r_obs = grid.r_max / 4.0 if r_obs is None else r_obs
    ells = sorted(data)
    systems = wave_systems(grid, values, ells, workers)
    basis = report.projector_basis(grid, values)
    # the cutoff is set by the continuum part; bound-state mass would hide its tail
    e_cut, _ = spectral_cutoff(pc_project(data, systems, basis, zero_policy), systems, fraction)
    u = bandlimit(data, systems, e_cut)
    t_budget = reflection_budget(grid.r_max, r_obs, e_cut, policy=budget_policy)
    notes = []
    if times is None:
        times = np.geomspace(t_budget / 10.0, t_budget, n_times)
    times = np.asarray(times, dtype=float)
    if times.max() > t_budget * (1 + 1e-12):
        notes.append(f"times beyond reflection budget {t_budget:.4g}")
        warnings.warn("trace contains times beyond the anti-reflection budget", RuntimeWarning)
    if subtract is None:
        subtract = {Kind.GENERIC: [], Kind.KIND1: ["R"], Kind.KIND2: ["S"],
                    Kind.KIND3: ["R", "S"]}[report.classification]
    u_pc = pc_project(u, systems, basis, zero_policy)
    prop = Propagator(u_pc, systems)
    s_op = SlowOperatorS(basis, values, grid, cross_scale) if "S" in subtract else None
    l0 = prop.norm(u_pc)
    norms_full = {k: [] for k in kinds}
    norms_res = {k: [] for k in kinds}
    breakdown, states, drift = [], [], 0.0
    window = (0.0, r_obs)
    for t in times:
        st = prop.at(t)
        drift = max(drift, abs(prop.norm(st) - l0) / l0)
        res = {ell: v.copy() for ell, v in st.items()}
        if "R" in subtract:
            for ell, v in r_t_apply(t, u, report.phi, report.a_const, grid).items():
                res[ell] -= v
        if s_op is not None:
            for ell, v in s_op.apply(t, u).items():
                res[ell] -= v
        ff, rf = to_field(st, grid), to_field(res, grid)
        for k in kinds:
            norms_full[k].append(norm(ff, k, grid, window))
            norms_res[k].append(norm(rf, k, grid, window))
        breakdown.append({ell: norm({ell: rf[ell]}, NormKind.SUP, grid, window) for ell in rf})
        if keep_states:
            states.append(st)
    # semigroup: e^{-i t2 H} e^{-i t1 H} against e^{-i (t1 + t2) H}
    t1, t2 = times[0], times[-1] - times[0]
    mid = evolve(prop.at(t1), t2, systems)
    end = prop.at(times[-1])
    sg = max(np.linalg.norm(mid[ell] - end[ell]) / max(np.linalg.norm(end[ell]), 1e-300) for ell in end)
    fits_full, fits_res = {}, {}
    for k in kinds:
        vf, vr = np.array(norms_full[k]), np.array(norms_res[k])
        fits_full[k] = _fit_clean(times, vf, f"{k} (full)", notes)
        fits_res[k] = _fit_clean(times, vr, f"{k} (residual)", notes)
        norms_full[k], norms_res[k] = vf, vr
    return EvolutionTrace(times, norms_full, norms_res, fits_full, fits_res, list(subtract),
                          breakdown, drift, float(sg), e_cut, t_budget, r_obs, states, notes)


def _fit_clean(times, values, label, notes):
    cut = _regrowth_cut(values)
    if cut < len(times):
        notes.append(f"{label}: re-growth at t={times[cut]:.4g}, fit window truncated")
        if cut < 6:
            notes.append(f"{label}: fewer than 6 clean samples, first 6 kept")
            cut = 6
    return fit_power(times[:cut], values[:cut])
