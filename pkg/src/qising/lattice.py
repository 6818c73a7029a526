"""Semi-discrete domains, model parameters and the flattened lattice.

Primal columns sit at x = 2*delta*j, dual columns at odd multiples of delta.
A rectangular domain of W primal columns carries W + 1 dual columns, two of
which flank the box and couple it to the boundary ghost.
"""
import math
from dataclasses import dataclass, field

import numpy as np


class ParameterError(ValueError):
    pass


BCS = ("plus", "free", "periodic")


@dataclass(frozen=True)
class ModelParams:
    delta: float
    tau: float
    theta: float

    def __post_init__(self):
        for name in ("delta", "tau", "theta"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise ParameterError(f"{name} must be positive and finite, got {v!r}")

    @property
    def tau_star(self):
        return self.theta / 2

    @property
    def theta_star(self):
        return 2 * self.tau

    @property
    def critical(self):
        return self.theta == 2 * self.tau

    def dual(self):
        return dual_params(self)


def make_params(delta, tau, theta):
    return ModelParams(float(delta), float(tau), float(theta))


def dual_params(p):
    # (tau*, theta*) = (theta/2, 2 tau); halving and doubling are exact in binary
    return ModelParams(p.delta, p.theta / 2, 2 * p.tau)


def critical_params(delta=0.5):
    """Isotropic critical point theta = theta* = 1/(2 delta)."""
    theta = 1.0 / (2 * delta)
    return ModelParams(delta, theta / 2, theta)


@dataclass(frozen=True)
class SemiDiscreteDomain:
    delta: float
    width: int
    height: float
    bc: str
    xs: np.ndarray = field(repr=False)
    kinds: tuple = field(repr=False)

    @property
    def primal_x(self):
        return self.xs[np.array(self.kinds) == "primal"]

    @property
    def dual_x(self):
        return self.xs[np.array(self.kinds) == "dual"]

    @property
    def n_dual(self):
        # the torus closes with a single wrapping dual column
        return self.width if self.bc == "periodic" else self.width + 1

    def boundary_columns(self):
        if self.bc == "periodic":
            return ()
        return (0, self.width - 1)

    def inside(self, col, y):
        return 0 <= col < self.width and 0 < y < self.height


def build_domain(width, height, bc="plus", delta=0.5):
    """Rectangle of `width` primal columns and vertical extent (0, height)."""
    if int(width) != width or width < 1:
        raise ParameterError(f"width must be a positive integer, got {width!r}")
    if not (math.isfinite(height) and height > 0):
        raise ParameterError(f"height must be positive, got {height!r}")
    if bc not in BCS:
        raise ParameterError(f"unknown boundary condition {bc!r}")
    if not delta > 0:
        raise ParameterError("delta must be positive")
    width = int(width)
    xs, kinds = [], []
    ncols = 2 * width + 1 if bc != "periodic" else 2 * width
    for m in range(ncols):
        x = (m - 1) * delta
        xs.append(x)
        kinds.append("primal" if (m - 1) % 2 == 0 else "dual")
    return SemiDiscreteDomain(delta, width, float(height), bc, np.array(xs), tuple(kinds))


@dataclass(frozen=True)
class FlattenedLattice:
    epsilon: float
    J_h: float
    J_v: float
    rows: int
    cols: int
    bc: str

    @property
    def p_h(self):
        return -math.expm1(-2 * self.J_h)

    @property
    def p_v(self):
        return -math.expm1(-2 * self.J_v)

    @property
    def n_sites(self):
        return self.rows * self.cols


def flatten(domain, params, epsilon):
    """Anisotropic Ising lattice with exp(-2 J_h) = 1 - theta*eps, exp(-2 J_v) = tau*eps."""
    if not epsilon > 0:
        raise ParameterError("epsilon must be positive")
    if params.theta * epsilon >= 1 or params.tau * epsilon >= 1:
        raise ParameterError(
            f"epsilon={epsilon} too large: need theta*eps < 1 and tau*eps < 1")
    J_h = -0.5 * math.log1p(-params.theta * epsilon)
    J_v = -0.5 * math.log(params.tau * epsilon)
    rows = math.ceil(domain.height / epsilon - 1e-9)
    return FlattenedLattice(float(epsilon), J_h, J_v, rows, domain.width, domain.bc)


def couplings_lattice(J_h, J_v, rows, cols, bc="free"):
    """Flattened lattice with explicit couplings, for oracle tests."""
    if bc not in BCS:
        raise ParameterError(f"unknown boundary condition {bc!r}")
    return FlattenedLattice(float("nan"), float(J_h), float(J_v), int(rows), int(cols), bc)
