"""Radial potential families and the square-root factorization V = v2 * v1."""

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import ConfigError


class Family(str, Enum):
    SQUARE_WELL = "square_well"
    EXPONENTIAL = "exponential"
    POLY_DECAY = "poly_decay"
    SUM_OF_WELLS = "sum_of_wells"


@dataclass(frozen=True)
class PotentialSpec:
    """V(r) = coupling * V_base(r).

    Shape parameters per family:

    * square_well: ``[R]``, V_base = -1 on r < R
    * exponential: ``[alpha]``, V_base = -exp(-alpha r)
    * poly_decay: ``[beta]``, V_base = -(1 + r^2)^(-beta/2)
    * sum_of_wells: ``[R1, d1, R2, d2, ...]``, V_base = -sum d_k 1{r < R_k}

    A poly_decay exponent beta <= 2 must be declared with ``critical=True``.
    """

    family: Family
    params: tuple
    coupling: float = 1.0
    critical: bool = False

    def __post_init__(self):
        try:
            fam = Family(self.family)
        except ValueError:
            raise ConfigError(f"unknown potential family {self.family!r}") from None
        object.__setattr__(self, "family", fam)
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))
        object.__setattr__(self, "coupling", float(self.coupling))
        p = self.params
        if not np.all(np.isfinite(p)) or not np.isfinite(self.coupling):
            raise ConfigError("potential parameters must be finite")
        if fam is Family.SQUARE_WELL:
            if len(p) != 1 or p[0] <= 0:
                raise ConfigError("square_well needs params = [R] with R > 0")
        elif fam is Family.EXPONENTIAL:
            if len(p) != 1 or p[0] <= 0:
                raise ConfigError("exponential needs params = [alpha] with alpha > 0")
        elif fam is Family.POLY_DECAY:
            if len(p) != 1 or p[0] <= 0:
                raise ConfigError("poly_decay needs params = [beta] with beta > 0")
            if p[0] <= 2 and not self.critical:
                raise ConfigError("poly_decay with beta <= 2 must be flagged critical")
        else:
            if len(p) < 2 or len(p) % 2:
                raise ConfigError("sum_of_wells needs params = [R1, d1, R2, d2, ...]")
            if any(R <= 0 for R in p[::2]):
                raise ConfigError("sum_of_wells radii must be positive")

    def with_coupling(self, g):
        return PotentialSpec(self.family, self.params, g, self.critical)

    def base(self, r):
        r = np.asarray(r, dtype=float)
        p = self.params
        if self.family is Family.SQUARE_WELL:
            return -(r < p[0]).astype(float)
        if self.family is Family.EXPONENTIAL:
            return -np.exp(-p[0] * r)
        if self.family is Family.POLY_DECAY:
            return -(1.0 + r * r) ** (-0.5 * p[0])
        out = np.zeros_like(r)
        for R, d in zip(p[::2], p[1::2]):
            out -= d * (r < R)
        return out

    @property
    def support_radius(self):
        """Radius beyond which V vanishes identically, or inf."""
        if self.family is Family.SQUARE_WELL:
            return self.params[0]
        if self.family is Family.SUM_OF_WELLS:
            return max(self.params[::2])
        return np.inf

    def to_dict(self):
        return {"family": self.family.value, "params": list(self.params),
                "coupling": self.coupling, "critical": self.critical}

    @classmethod
    def from_dict(cls, d):
        try:
            return cls(d["family"], tuple(d.get("params", ())), d.get("coupling", 1.0),
                       bool(d.get("critical", False)))
        except KeyError as exc:
            raise ConfigError(f"potential table is missing {exc}") from None
        except TypeError as exc:
            raise ConfigError(f"malformed potential table: {exc}") from None


def sample(spec, grid):
    """V(r_i) at every grid node."""
    nodes = getattr(grid, "nodes", grid)
    if np.size(nodes) == 0:
        raise ConfigError("grid has no nodes")
    if spec.coupling == 0.0:
        return np.zeros(np.shape(nodes))
    return spec.coupling * spec.base(nodes)


@dataclass(frozen=True)
class FactorizedPotential:
    v1_values: np.ndarray
    v2_values: np.ndarray

    @property
    def values(self):
        return self.v2_values * self.v1_values

    @property
    def support(self):
        return self.v1_values > 0

    def __len__(self):
        return len(self.v1_values)


def factorize(values):
    values = np.asarray(values, dtype=float)
    v1 = np.sqrt(np.abs(values))
    return FactorizedPotential(v1, np.sign(values) * v1)


_WEIGHTS = (0, 2, 4)


@dataclass
class DecayWeightReport:
    r_max: float
    proxies: dict = field(default_factory=dict)
    tail_convergent: dict = field(default_factory=dict)
    hypotheses: dict = field(default_factory=dict)
    critical: bool = False

    def to_dict(self):
        return {"r_max": self.r_max, "critical": self.critical,
                "proxies": {str(k): v for k, v in self.proxies.items()},
                "tail_convergent": {str(k): v for k, v in self.tail_convergent.items()},
                "hypotheses": dict(self.hypotheses)}


def _tail_convergent(spec, k):
    # L^{3/2} integrability at infinity of <r>^k V
    if spec.family is Family.POLY_DECAY:
        return spec.params[0] - k > 2.0
    return True


def decay_weight_report(spec, grid):
    """Grid proxies for ||<x>^k V||_{L^{3/2}}, k in (0, 2, 4).

    Each proxy is the quadrature of (<r>^k |V|)^{3/2} against 4 pi r^2 dr,
    raised to 2/3, so it grows monotonically with the grid radius. Whether
    the infinite-volume value is finite comes from the closed-form tail of
    each family, not from the grid.
    """
    r, w = grid.nodes, grid.weights
    absv = np.abs(sample(spec, grid))
    bracket = np.sqrt(1.0 + r * r)
    rep = DecayWeightReport(r_max=float(grid.r_max), critical=spec.critical)
    for k in _WEIGHTS:
        integrand = (bracket ** k * absv) ** 1.5 * 4.0 * np.pi * r * r * w
        rep.proxies[k] = float(np.sum(integrand) ** (2.0 / 3.0))
        rep.tail_convergent[k] = _tail_convergent(spec, k)
    ok = not spec.critical
    rep.hypotheses = {
        "V in L^{3/2,1}": ok and rep.tail_convergent[0],
        "<x>^2 V in L^{3/2,1}": ok and rep.tail_convergent[2],
        "<x>^4 V in L^{3/2,1}": ok and rep.tail_convergent[4],
    }
    return rep
