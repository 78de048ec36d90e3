"""Zero-energy analysis: null space, classification, canonical resonance,
moments, coupling tuner, block inversion and Laurent coefficients."""

from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.optimize import brentq

from .errors import (ClassificationError, ConfigError, FitError, SingularBlockError,
                     TuningError, WindowError)
from .potential import PotentialSpec, factorize, sample
from .resolvent import (FOUR_PI, RadialGrid, multipole_kernel, static_green_matrix,
                        wave_diffq1_matrix, wave_green_matrix)

TAU_NULL = 1e-6
TAU_MOM = 1e-8
SQRT_4PI = np.sqrt(FOUR_PI)


class Kind(str, Enum):
    GENERIC = "generic"
    KIND1 = "kind1"
    KIND2 = "kind2"
    KIND3 = "kind3"


@dataclass
class NullState:
    """A zero-energy state F(r) Y_l0 with reduced profile U = r F on the grid."""

    ell: int
    profile: np.ndarray
    singular_value: float = 0.0

    def to_dict(self):
        return {"ell": self.ell, "singular_value": self.singular_value,
                "profile": [float(x) for x in self.profile]}

    @classmethod
    def from_dict(cls, d):
        return cls(int(d["ell"]), np.asarray(d["profile"], dtype=float),
                   float(d.get("singular_value", 0.0)))


# inner products on the reduced line -----------------------------------------

def v_pairing(state, grid, values):
    """<V, phi>; nonzero only in the l = 0 wave."""
    if state.ell != 0:
        return 0.0
    return SQRT_4PI * float(np.sum(values * state.profile * grid.nodes * grid.weights))


def gram_entry(a, b, grid, values):
    """-<u, V v>; states in different waves are orthogonal."""
    if a.ell != b.ell:
        return 0.0
    return -float(np.sum(a.profile * values * b.profile * grid.weights))


def far_field_coefficient(state, grid, values):
    """C with U(r) = C r^{-l} outside the support of V."""
    ell, r, w = state.ell, grid.nodes, grid.weights
    return -float(np.sum(r ** (ell + 1) * values * state.profile * w)) / (2 * ell + 1)


def l2_norm_sq(state, grid, values):
    """Squared L^2 norm, completing the profile beyond R_max by its far field."""
    inside = float(np.sum(state.profile ** 2 * grid.weights))
    if state.ell == 0:
        return inside
    c = far_field_coefficient(state, grid, values)
    return inside + c * c * grid.r_max ** (1 - 2 * state.ell) / (2 * state.ell - 1)


def evaluate_profile(state, grid, values, r):
    """Off-grid values U(r) = -sum_j g_l(0; r, r_j) V_j U_j w_j."""
    g = static_green_matrix(state.ell, np.atleast_1d(np.asarray(r, dtype=float)), grid.nodes)
    return -g @ (values * state.profile * grid.weights)


# null space ------------------------------------------------------------------

def _symmetrized(ell, grid, fact, idx):
    d = np.sqrt(grid.weights[idx])
    g = static_green_matrix(ell, grid.nodes[idx])
    k = (d * fact.v1_values[idx])[:, None] * g * (d * fact.v1_values[idx])[None, :]
    return k, d


def wave_singular_values(ell, grid, fact):
    """Singular values of I + T(0) in wave l, computed on the support of V.

    With D = diag(sqrt w) and S = sgn V, D (I + T) D^{-1} = S (S + K) where
    K = D v1 G v1 D is symmetric, so the spectrum of S + K gives them.
    """
    idx = np.flatnonzero(fact.support)
    if idx.size == 0:
        return np.ones(1), np.zeros((0, 1)), idx
    k, _ = _symmetrized(ell, grid, fact, idx)
    s = np.sign(fact.v2_values[idx])
    mu, vec = np.linalg.eigh(np.diag(s) + k)
    order = np.argsort(np.abs(mu))
    return np.abs(mu[order]), vec[:, order], idx


def zero_null_space(grid, fact, ell_max, tau_null=TAU_NULL):
    """Zero-energy states wave by wave, as profiles U = -G0 v1 x."""
    states = []
    for ell in range(ell_max + 1):
        sv, vec, idx = wave_singular_values(ell, grid, fact)
        if idx.size == 0:
            continue
        scale = max(sv.max(), 1.0)
        for j in np.flatnonzero(sv < tau_null * scale):
            x = vec[:, j] / np.sqrt(grid.weights[idx])
            g = static_green_matrix(ell, grid.nodes, grid.nodes[idx])
            u = -g @ (fact.v1_values[idx] * x * grid.weights[idx])
            states.append(NullState(ell, u, float(sv[j] / scale)))
    return states


# classification ----------------------------------------------------------------

def _gram_orthonormalize(states, grid, values):
    if not states:
        return []
    g = np.array([[gram_entry(a, b, grid, values) for b in states] for a in states])
    lam, vec = np.linalg.eigh(g)
    if lam.min() <= 0:
        raise ClassificationError("Gram matrix -<u, Vv> is not positive definite")
    coef = vec / np.sqrt(lam)
    out = []
    for j in range(len(states)):
        u = sum(coef[i, j] * states[i].profile for i in range(len(states)))
        out.append(NullState(states[0].ell, u, max(s.singular_value for s in states)))
    return out


@dataclass
class MomentReport:
    first: np.ndarray
    second: np.ndarray
    e1_member: bool

    def to_dict(self):
        return {"first": self.first.tolist(), "second": self.second.tolist(),
                "e1_member": self.e1_member}


def _angular_rule(n=24):
    x, wx = np.polynomial.legendre.leggauss(n)
    ph = 2.0 * np.pi * np.arange(2 * n) / (2 * n)
    ct, az = np.meshgrid(x, ph, indexing="ij")
    st = np.sqrt(1.0 - ct * ct)
    dirs = np.stack([st * np.cos(az), st * np.sin(az), ct], axis=-1)
    wts = (wx[:, None] * np.full(ph.size, 2.0 * np.pi / ph.size)[None, :])
    return dirs.reshape(-1, 3), wts.ravel(), ct.ravel()


def _ylm0(ell, ct):
    from scipy.special import eval_legendre
    return np.sqrt((2 * ell + 1) / FOUR_PI) * eval_legendre(ell, ct)


def moments(state, grid, values, tau_mom=TAU_MOM):
    """Cartesian moments <V phi, y_k> and <V phi, y_k y_m> of F(r) Y_l0.

    Each factorizes into a radial integral of V U r^{1+n} and an angular
    integral of Y_l0 against a degree-n monomial.
    """
    r, w, u = grid.nodes, grid.weights, state.profile
    dirs, wts, ct = _angular_rule()
    y = _ylm0(state.ell, ct)
    rad1 = float(np.sum(values * u * r ** 2 * w))
    rad2 = float(np.sum(values * u * r ** 3 * w))
    ang1 = np.array([np.sum(wts * y * dirs[:, k]) for k in range(3)])
    ang2 = np.array([[np.sum(wts * y * dirs[:, k] * dirs[:, m]) for m in range(3)] for k in range(3)])
    ang1[np.abs(ang1) < 1e-13] = 0.0
    ang2[np.abs(ang2) < 1e-13] = 0.0
    first = rad1 * ang1
    second = rad2 * ang2
    s1 = float(np.sum(np.abs(values * u) * r ** 2 * w))
    s2 = float(np.sum(np.abs(values * u) * r ** 3 * w))
    member = bool(np.all(np.abs(first) <= tau_mom * s1) and np.all(np.abs(second) <= tau_mom * s2))
    return MomentReport(first, second, member)


@dataclass
class ThresholdReport:
    classification: Kind
    m_basis: list
    e_basis: list
    e1_flags: list
    phi: object = None
    a_const: complex = 0j
    gram: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    pairing: float = 0.0
    singular_values: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    @property
    def dims(self):
        return {"M": len(self.m_basis), "E": len(self.e_basis)}

    def projector_basis(self, grid, values):
        """E-basis orthonormalized in L^2 (far-field completed), grouped by wave."""
        out = {}
        for ell in sorted({s.ell for s in self.e_basis}):
            group = [s for s in self.e_basis if s.ell == ell]
            g = np.array([[_l2_inner(a, b, grid, values) for b in group] for a in group])
            lam, vec = np.linalg.eigh(g)
            coef = vec / np.sqrt(lam)
            out[ell] = [NullState(ell, sum(coef[i, j] * group[i].profile for i in range(len(group))))
                        for j in range(len(group))]
        return out

    def to_dict(self):
        return {
            "classification": self.classification.value,
            "dims": self.dims,
            "m_basis": [s.to_dict() for s in self.m_basis],
            "e_basis": [s.to_dict() for s in self.e_basis],
            "e1_flags": list(self.e1_flags),
            "phi": None if self.phi is None else self.phi.to_dict(),
            "a": [float(np.real(self.a_const)), float(np.imag(self.a_const))],
            "pairing_V_phi": self.pairing,
            "gram": np.asarray(self.gram).tolist(),
            "gram_eigenvalues": (np.linalg.eigvalsh(self.gram).tolist() if np.size(self.gram) else []),
            "singular_values": {str(k): v for k, v in self.singular_values.items()},
            "notes": list(self.notes),
        }

    @classmethod
    def from_dict(cls, d):
        phi = d.get("phi")
        return cls(
            classification=Kind(d["classification"]),
            m_basis=[NullState.from_dict(s) for s in d["m_basis"]],
            e_basis=[NullState.from_dict(s) for s in d["e_basis"]],
            e1_flags=list(d["e1_flags"]),
            phi=None if phi is None else NullState.from_dict(phi),
            a_const=complex(*d["a"]),
            gram=np.asarray(d["gram"], dtype=float).reshape(len(d["m_basis"]), -1),
            pairing=float(d["pairing_V_phi"]),
            singular_values={int(k): v for k, v in d.get("singular_values", {}).items()},
            notes=list(d.get("notes", [])),
        )


def _l2_inner(a, b, grid, values):
    if a.ell != b.ell:
        return 0.0
    inside = float(np.sum(a.profile * b.profile * grid.weights))
    if a.ell == 0:
        return inside
    ca = far_field_coefficient(a, grid, values)
    cb = far_field_coefficient(b, grid, values)
    return inside + ca * cb * grid.r_max ** (1 - 2 * a.ell) / (2 * a.ell - 1)


def classify(states, grid, fact, tau_mom=TAU_MOM):
    values = fact.values
    m_basis, e_basis, resonance = [], [], None
    for ell in sorted({s.ell for s in states}):
        group = _gram_orthonormalize([s for s in states if s.ell == ell], grid, values)
        if ell > 0:
            m_basis += group
            e_basis += group
            continue
        p = np.array([v_pairing(s, grid, values) for s in group])
        scale = np.array([SQRT_4PI * np.sum(np.abs(values * s.profile) * grid.nodes * grid.weights)
                          for s in group])
        if np.all(np.abs(p) <= tau_mom * scale):
            m_basis += group
            e_basis += group
            continue
        # rotate so that only the first direction pairs with V
        q, _ = np.linalg.qr(np.column_stack([p, np.eye(len(p))[:, 1:]]) if len(p) > 1
                            else p[:, None])
        rot = [NullState(0, sum(q[i, j] * group[i].profile for i in range(len(group))),
                         group[0].singular_value) for j in range(len(group))]
        resonance = rot[0]
        m_basis += rot
        e_basis += rot[1:]
    gram = np.array([[gram_entry(a, b, grid, values) for b in m_basis] for a in m_basis]) \
        if m_basis else np.zeros((0, 0))
    if m_basis and np.linalg.eigvalsh(gram).min() <= 0:
        raise ClassificationError("Gram matrix on M is not positive definite")
    if not m_basis:
        kind = Kind.GENERIC
    elif not e_basis:
        kind = Kind.KIND1
    elif len(e_basis) == len(m_basis):
        kind = Kind.KIND2
    else:
        kind = Kind.KIND3
    if len(m_basis) - len(e_basis) > 1:
        raise ClassificationError("more than one resonance direction")
    e1 = [moments(s, grid, values).e1_member for s in e_basis]
    rep = ThresholdReport(kind, m_basis, e_basis, e1, gram=gram)
    if resonance is not None:
        phi, a = canonical_resonance(resonance, rep, grid, fact)
        rep.phi, rep.a_const = phi, a
        rep.pairing = v_pairing(phi, grid, values)
        if kind is Kind.KIND3:
            rep.notes.append("kind3 resonance normalized by -<phi, V phi> = 1; "
                             f"<phi, V> = {rep.pairing:.12g} recorded separately")
    return rep


def analyze(spec, grid, ell_max=2, tau_null=TAU_NULL, tau_mom=TAU_MOM):
    fact = factorize(sample(spec, grid))
    states = zero_null_space(grid, fact, ell_max, tau_null)
    rep = classify(states, grid, fact, tau_mom)
    for ell in range(ell_max + 1):
        sv, _, _ = wave_singular_values(ell, grid, fact)
        rep.singular_values[ell] = float(sv[0] / max(sv.max(), 1.0))
    return rep, fact


def canonical_resonance(direction, report, grid, fact):
    """Normalize a resonance direction; returns (phi, a).

    For kind 3 the direction is first made Gram-orthogonal to E and then
    corrected by P0 V (|x - y| / 8 pi) V phi1, which only sees E-states in
    the same wave.
    """
    values = fact.values
    phi = NullState(direction.ell, np.array(direction.profile, dtype=float), direction.singular_value)
    if report.classification is Kind.KIND3 or report.e_basis:
        for e in report.e_basis:
            if e.ell == phi.ell:
                phi.profile = phi.profile - gram_entry(e, phi, grid, values) * e.profile
        norm = gram_entry(phi, phi, grid, values)
        phi.profile = phi.profile / np.sqrt(norm)
        if v_pairing(phi, grid, values) < 0:
            phi.profile = -phi.profile
        basis = report.projector_basis(grid, values).get(phi.ell, [])
        if basis:
            k1 = multipole_kernel(1, phi.ell, grid.nodes)
            vphi = values * phi.profile * grid.weights
            src = values * (k1 @ vphi) / (8.0 * np.pi)
            corr = sum(b.profile * np.sum(b.profile * src * grid.weights) for b in basis)
            phi.profile = phi.profile - corr
    else:
        norm = gram_entry(phi, phi, grid, values)
        if norm <= 0:
            raise ClassificationError("resonance has nonpositive Gram norm")
        phi.profile = phi.profile / np.sqrt(norm)
        if v_pairing(phi, grid, values) < 0:
            phi.profile = -phi.profile
    pair = v_pairing(phi, grid, values)
    if abs(pair) == 0:
        raise ClassificationError("claimed resonance has <V, phi> = 0")
    return phi, FOUR_PI * 1j / pair ** 2


# tail checks ---------------------------------------------------------------------

@dataclass
class TailCheck:
    coefficient: float
    expected: float
    rel_error: float
    window: tuple
    fit_residual: float


def tail_fit(state, grid, power, window=None):
    """Least squares fit of F(r) Y_l0 along the z axis against c / r^power."""
    r = grid.nodes
    lo, hi = window if window is not None else (grid.r_max / 2.0, 0.9 * grid.r_max)
    sel = (r >= lo) & (r <= hi)
    f = state.profile[sel] / r[sel] * np.sqrt((2 * state.ell + 1) / FOUR_PI)
    basis = r[sel] ** (-float(power))
    c = float(basis @ f / (basis @ basis))
    res = float(np.linalg.norm(f - c * basis) / max(np.linalg.norm(f), 1e-300))
    return c, res, (lo, hi)


def refined_pairing(state, grid, spec, factor=4):
    """<V, phi> on a finer grid, with phi extended off-grid through the bootstrap identity."""
    fine = RadialGrid(grid.n * factor, grid.r_max)
    u = evaluate_profile(state, grid, sample(spec, grid), fine.nodes)
    return SQRT_4PI * float(np.sum(sample(spec, fine) * u * fine.nodes * fine.weights))


def resonance_tail_check(phi, grid, values, spec=None, window=None):
    """Fit phi ~ c/|x| on the outer third and compare with -<V, phi>/(4 pi).

    When ``spec`` is given the pairing is recomputed on a refined grid so the
    two sides are not produced by the same quadrature.
    """
    lo, hi = window if window is not None else (2.0 * grid.r_max / 3.0, grid.r_max)
    sel = (grid.nodes >= lo) & (grid.nodes <= hi)
    if np.any(values[sel] != 0) and np.max(np.abs(values[sel])) > 1e-3 * np.max(np.abs(values)):
        raise WindowError("tail fit window overlaps the potential")
    c, res, win = tail_fit(phi, grid, 1, (lo, hi))
    pair = refined_pairing(phi, grid, spec) if spec is not None else v_pairing(phi, grid, values)
    expected = -pair / FOUR_PI
    return TailCheck(c, expected, abs(c - expected) / abs(c), win, res)


# coupling tuner -------------------------------------------------------------------

def tune_coupling(spec, ell, grid, index=0, bracket=None):
    """Coupling g* at which wave l acquires a zero-energy state.

    The unit-coupling operator S K (S = sgn V_base, K symmetric and positive)
    has real eigenvalues nu; g nu = -1 picks g* = -1/nu. ``index`` counts
    thresholds upward from the weakest attractive coupling.
    """
    base = spec.with_coupling(1.0)
    fact = factorize(sample(base, grid))
    idx = np.flatnonzero(fact.support)
    if idx.size == 0:
        raise TuningError("potential vanishes on the grid")
    k, _ = _symmetrized(ell, grid, fact, idx)
    s = np.sign(fact.v2_values[idx])
    if np.all(s < 0):
        nu = -np.linalg.eigvalsh(k)
    else:
        lam, vec = np.linalg.eigh(k)
        root = (vec * np.sqrt(np.clip(lam, 0.0, None))) @ vec.T
        nu = np.linalg.eigvalsh(root @ (s[:, None] * root))
    nu = nu[nu < 0]
    g = np.sort(-1.0 / nu)
    if bracket is not None:
        g = g[(g >= bracket[0]) & (g <= bracket[1])]
    if g.size <= index:
        raise TuningError(f"no threshold #{index} for l={ell} in bracket {bracket}")
    return float(g[index])


def tune_shape(spec, grid, waves, indices, param, bracket):
    """Shape parameter and coupling at which two waves reach threshold together.

    Solves g*_{waves[0]}(p) = g*_{waves[1]}(p) for ``params[param] = p``
    inside ``bracket``; each side is an independent call to tune_coupling.
    Returns the retuned spec at the common coupling.
    """
    if len(waves) != 2 or len(indices) != 2:
        raise ConfigError("joint tuning needs exactly two waves")

    def with_param(p):
        ps = list(spec.params)
        ps[param] = p
        return PotentialSpec(spec.family, ps, 1.0, spec.critical)

    def gap(p):
        b = with_param(p)
        return (tune_coupling(b, waves[0], grid, indices[0])
                - tune_coupling(b, waves[1], grid, indices[1]))

    lo, hi = bracket
    try:
        p = brentq(gap, lo, hi, xtol=1e-13, rtol=4 * np.finfo(float).eps)
    except ValueError:
        raise TuningError(f"thresholds of waves {waves} do not cross for params[{param}] "
                          f"in {bracket}") from None
    b = with_param(p)
    g = 0.5 * (tune_coupling(b, waves[0], grid, indices[0]) + tune_coupling(b, waves[1], grid, indices[1]))
    return b.with_coupling(g)


# block inversion ------------------------------------------------------------------

@dataclass(frozen=True)
class BlockSystem:
    L00: np.ndarray
    L01: np.ndarray
    L10: np.ndarray
    L11: np.ndarray

    def __post_init__(self):
        n0, n1 = self.L00.shape[0], self.L11.shape[0]
        ok = (self.L00.shape == (n0, n0) and self.L11.shape == (n1, n1)
              and self.L01.shape == (n0, n1) and self.L10.shape == (n1, n0))
        if not ok:
            from .errors import DimensionError
            raise DimensionError("inconsistent block dimensions")

    @classmethod
    def split(cls, mat, k):
        mat = np.asarray(mat)
        return cls(mat[:k, :k], mat[:k, k:], mat[k:, :k], mat[k:, k:])

    def dense(self):
        return np.block([[self.L00, self.L01], [self.L10, self.L11]])


def _checked_inverse(mat, name, tau):
    s = np.linalg.svd(mat, compute_uv=False)
    if s.size and s[-1] <= tau * max(s[0], 1.0):
        raise SingularBlockError(name)
    return np.linalg.inv(mat)


def feshbach_invert(bs, tau=1e-13):
    """Inverse of the 2x2 block operator through the Schur complement C = L11 - L10 L00^-1 L01."""
    k = _checked_inverse(bs.L00, "L00", tau)
    c = bs.L11 - bs.L10 @ k @ bs.L01
    ci = _checked_inverse(c, "C", tau)
    kl01 = k @ bs.L01
    l10k = bs.L10 @ k
    top_left = k + kl01 @ ci @ l10k
    return np.block([[top_left, -kl01 @ ci], [-ci @ l10k, ci]])


# Laurent coefficients ------------------------------------------------------------

DEFAULT_LAMBDAS = np.concatenate([-np.geomspace(1e-3, 1e-1, 12)[::-1], np.geomspace(1e-3, 1e-1, 12)])


@dataclass
class LaurentCoefficients:
    A_minus2: np.ndarray
    A_minus1: np.ndarray
    A_0: np.ndarray
    fit_lambdas: np.ndarray
    fit_residual: float
    blocks: list = field(default_factory=list)

    def summary(self):
        n0 = np.linalg.norm(self.A_0, 2)
        return {
            "norm_A_minus2": float(np.linalg.norm(self.A_minus2, 2)),
            "norm_A_minus1": float(np.linalg.norm(self.A_minus1, 2)),
            "norm_A_0": float(n0),
            "fit_residual": self.fit_residual,
            "n_lambdas": int(len(self.fit_lambdas)),
            "blocks": [[int(ell), int(len(ix))] for ell, ix in self.blocks],
        }


def _block_diag(mats):
    n = sum(m.shape[0] for m in mats)
    out = np.zeros((n, n), dtype=complex)
    i = 0
    for m in mats:
        out[i:i + m.shape[0], i:i + m.shape[0]] = m
        i += m.shape[0]
    return out


def laurent_extract(grid, fact, ells, lambda_samples=None, tol=1e-3, regular_order=3):
    """Entrywise least squares fit of (I + T(lam))^{-1} on the support of V.

    Basis lam^-2, lam^-1, 1 and regular powers up to ``regular_order``; the
    extra powers keep the O(lam) terms from leaking into the singular part.
    Waves are fitted separately and assembled block diagonally.
    """
    lams = DEFAULT_LAMBDAS if lambda_samples is None else np.asarray(lambda_samples, dtype=float)
    idx = np.flatnonzero(fact.support)
    w = grid.weights[idx]
    r = grid.nodes[idx]
    design = np.column_stack([lams ** p for p in range(-2, regular_order + 1)]).astype(complex)
    out2, out1, out0, resid, blocks = [], [], [], 0.0, []
    for ell in ells:
        ys = []
        for lam in lams:
            g = wave_green_matrix(ell, lam, r)
            t = fact.v2_values[idx][:, None] * g * (fact.v1_values[idx] * w)[None, :]
            ys.append(np.linalg.inv(np.eye(idx.size) + t).ravel())
        y = np.array(ys)
        coef, *_ = np.linalg.lstsq(design, y, rcond=None)
        resid = max(resid, float(np.linalg.norm(y - design @ coef) / np.linalg.norm(y)))
        shp = (idx.size, idx.size)
        out2.append(coef[0].reshape(shp))
        out1.append(coef[1].reshape(shp))
        out0.append(coef[2].reshape(shp))
        blocks.append((ell, idx))
    res = LaurentCoefficients(_block_diag(out2), _block_diag(out1), _block_diag(out0),
                              lams, resid, blocks)
    if resid > tol:
        raise FitError(f"Laurent fit residual {resid:.3e} exceeds {tol:.1e}; "
                       "shrink the lambda window or refine the grid")
    return res


def bs_outer(states_by_wave, grid, fact, blocks):
    """Block-diagonal sum_k (v2 u_k)_i (v1 u_k)_j w_j over the given states."""
    mats = []
    for ell, idx in blocks:
        m = np.zeros((idx.size, idx.size), dtype=complex)
        for s in states_by_wave.get(ell, []):
            u = s.profile[idx]
            m += np.outer(fact.v2_values[idx] * u, fact.v1_values[idx] * u * grid.weights[idx])
        mats.append(m)
    return _block_diag(mats)


def c0_scalar(lam, phi, grid, fact):
    """c0(lam) = -<(R0(lam) - R0(0)) V phi, V phi> / lam in the l = 0 wave."""
    idx = np.flatnonzero(fact.support)
    r, w = grid.nodes[idx], grid.weights[idx]
    vphi = fact.values[idx] * phi.profile[idx] * w
    d = wave_diffq1_matrix(0, lam, r)
    return complex(-(vphi @ d @ vphi))
