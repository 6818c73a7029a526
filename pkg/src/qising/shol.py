"""Semi-discrete complex analysis on the corner and medial lattices.

Medial points sit at integer multiples of delta (primal at even, dual at odd
multiples), corners at half-integer multiples.  A corner is western when its
primal neighbor is on its left.  Points are complex numbers x + iy in
physical units; internally everything is rescaled to delta = 1.
"""
import cmath
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_simpson, quad

from .lattice import ParameterError

NU = cmath.exp(-1j * math.pi / 4)
POLE_TOL = 1e-12
CORNER_SIGN = -1


class PoleError(ValueError):
    pass


class BranchError(ValueError):
    pass


class InconsistencyError(ValueError):
    pass


# ---------------------------------------------------------------------------
# lattice geometry

def _units(z, delta):
    return complex(z) / delta


def _offset(x):
    # x in lattice units; returns (kind, integer part)
    k = round(2 * x)
    if abs(2 * x - k) > 1e-9:
        raise ParameterError(f"x = {x} is neither a medial point nor a corner")
    return ("medial" if k % 2 == 0 else "corner"), k


def is_corner(z, delta=1.0):
    return _offset(_units(z, delta).real)[0] == "corner"


def is_medial(z, delta=1.0):
    return _offset(_units(z, delta).real)[0] == "medial"


def medial_kind(z, delta=1.0):
    kind, k = _offset(_units(z, delta).real)
    if kind != "medial":
        raise ParameterError("not a medial point")
    return "primal" if (k // 2) % 2 == 0 else "dual"


def corner_kind(z, delta=1.0):
    kind, k = _offset(_units(z, delta).real)
    if kind != "corner":
        raise ParameterError("not a corner")
    left = (k - 1) // 2
    return "western" if left % 2 == 0 else "eastern"


def eta(z, delta=1.0):
    """Dirac spinor [i(v_c - u_c)]^{-1/2}: nu on western corners, i nu on eastern."""
    return NU if corner_kind(z, delta) == "western" else 1j * NU


@dataclass(frozen=True)
class CornerPoint:
    x: float
    y: float
    delta: float = 1.0

    def __post_init__(self):
        corner_kind(self.z, self.delta)

    @property
    def z(self):
        return complex(self.x, self.y)

    @property
    def kind(self):
        return corner_kind(self.z, self.delta)

    @property
    def eta(self):
        return eta(self.z, self.delta)

    @property
    def u(self):
        s = -1 if self.kind == "western" else 1
        return self.z + s * self.delta / 2

    @property
    def v(self):
        return 2 * self.z - self.u

    @property
    def minus(self):
        return CornerPoint(self.x - self.delta, self.y, self.delta)

    @property
    def plus(self):
        return CornerPoint(self.x + self.delta, self.y, self.delta)


# ---------------------------------------------------------------------------
# semi-discrete exponential

def _check(den):
    if abs(den) < POLE_TOL:
        raise PoleError("lambda sits on a pole of the semi-discrete exponential")
    return den


def _step_factor(l, p, q):
    """exp(q)/exp(p) for one elementary move in lattice units."""
    dx, dy = q.real - p.real, q.imag - p.imag
    if abs(dx) < 1e-12:
        if dy == 0:
            return 1.0
        den = _check((1 + l / 2) * (1 - l / 2))
        return cmath.exp(1j * l * dy / den)
    if abs(dy) > 1e-12 or abs(abs(dx) - 0.5) > 1e-9:
        raise ParameterError(f"{p} -> {q} is not an elementary move")
    pk = _offset(p.real)[0]
    s = CORNER_SIGN
    if pk == "medial":
        # corner c = q from medial p: factor (1 + s l (c - p))^{-1}
        return 1 / _check(1 + s * l * dx)
    return 1 + s * l * (p.real - q.real)


def _canonical_path(b, t, via):
    path = [b]
    cur = b
    if _offset(cur.real)[0] == "corner":
        cur = complex(cur.real + (0.5 if via == "right" else -0.5), cur.imag)
        path.append(cur)
    tk = _offset(t.real)[0]
    if tk == "corner":
        end = complex(t.real + (-0.5 if via == "right" else 0.5), t.imag)
    else:
        end = t
    n = round(end.real - cur.real)
    step = 0.5 if n > 0 else -0.5
    for _ in range(2 * abs(n)):
        cur = complex(cur.real + step, cur.imag)
        path.append(cur)
    if cur.imag != t.imag:
        cur = complex(cur.real, t.imag)
        path.append(cur)
    if tk == "corner":
        path.append(t)
    return path


def semidiscrete_exp(lam, target, base, delta=1.0, path=None, via="right"):
    """exp_delta(lambda, target, base) composed along a lattice path.

    The path is a list of medial/corner points from base to target whose
    consecutive entries are horizontal half-steps or vertical moves; by default
    a canonical path is used.  Corner moves carry (1 + s lambda (c - q))^{-1}
    with the orientation s chosen at import (s = -1, see `select_orientation`).
    """
    l = complex(lam) * delta
    b, t = _units(base, delta), _units(target, delta)
    _offset(b.real), _offset(t.real)
    pts = _canonical_path(b, t, via) if path is None else [_units(p, delta) for p in path]
    if abs(pts[0] - b) > 1e-12 or abs(pts[-1] - t) > 1e-12:
        raise ParameterError("path must run from base to target")
    out = 1.0 + 0j
    for p, q in zip(pts[:-1], pts[1:]):
        out *= _step_factor(l, p, q)
    return out


def select_orientation(lam=0.3 + 0.2j, tol=1e-6):
    """Orientation s of the corner half-step for which exponentials are holomorphic."""
    global CORNER_SIGN
    keep = CORNER_SIGN
    good = []
    for s in (1, -1):
        CORNER_SIGN = s
        f = lambda c: semidiscrete_exp(lam, c, 0.5)
        r = max(abs(dbar_residual(f, c, h=1e-4)) for c in (2.5 + 1j, -3.5 + 0.4j))
        if r < tol:
            good.append(s)
    CORNER_SIGN = keep
    if len(good) != 1:
        raise InconsistencyError(f"no unique holomorphic orientation: {good}")
    return good[0]


def exp_field(lam, base, delta=1.0, coef=1.0):
    """Corner s-holomorphic field c -> Proj[coef exp(lam, c, base), eta_c R]."""
    def f(c):
        e = coef * semidiscrete_exp(lam, c, base, delta)
        return project(e, eta(c, delta))
    return f


def project(X, e):
    """Projection of X on the line e R (|e| = 1)."""
    return 0.5 * (X + e * e * np.conj(X))


# ---------------------------------------------------------------------------
# local operators on callables

def dbar_residual(F, c, delta=1.0, h=1e-4):
    """1/2 [(F(c+) - F(c-))/(2 delta) + i dF/dy] at the corner c."""
    c = complex(c)
    corner_kind(c, delta)
    try:
        dx = (F(c + delta) - F(c - delta)) / (2 * delta)
        dy = (F(c + 1j * h) - F(c - 1j * h)) / (2 * h)
    except (IndexError, KeyError) as exc:
        raise ParameterError("corner lacks horizontal neighbors") from exc
    return 0.5 * (dx + 1j * dy)


def massive_laplacian_residual(F, params, c, h=1e-3):
    """d_yy F - (theta^2 + theta*^2) F + theta theta* [F(c++) + F(c--)]."""
    c = complex(c)
    d = params.delta
    th, ts = params.theta, params.theta_star
    f0 = F(c)
    dyy = (F(c + 1j * h) - 2 * f0 + F(c - 1j * h)) / (h * h)
    return dyy - (th * th + ts * ts) * f0 + th * ts * (F(c + 2 * d) + F(c - 2 * d))


def normalized_laplacian(F, c, delta=1.0, h=1e-3):
    """1/2 d_yy F + [F(c++) + F(c--) - 2 F(c)]/(8 delta^2), neighbors 2 delta apart."""
    c = complex(c)
    f0 = F(c)
    dyy = (F(c + 1j * h) - 2 * f0 + F(c - 1j * h)) / (h * h)
    return 0.5 * dyy + (F(c + 2 * delta) + F(c - 2 * delta) - 2 * f0) / (8 * delta * delta)


# ---------------------------------------------------------------------------
# fields on grids

@dataclass
class CornerField:
    """Values on consecutive corner columns x0, x0 + delta, ... sampled at ys."""
    delta: float
    x0: float
    ys: np.ndarray
    values: np.ndarray
    cut: tuple = None

    def __post_init__(self):
        self.ys = np.asarray(self.ys, float)
        self.values = np.asarray(self.values, complex)
        corner_kind(self.x0, self.delta)
        if self.values.shape != (self.values.shape[0], self.ys.size):
            raise ParameterError("values must have shape (columns, len(ys))")

    @property
    def xs(self):
        return self.x0 + self.delta * np.arange(self.values.shape[0])

    @property
    def etas(self):
        return np.array([eta(x, self.delta) for x in self.xs])

    @classmethod
    def from_callable(cls, F, x0, ncols, ys, delta=1.0):
        ys = np.asarray(ys, float)
        xs = x0 + delta * np.arange(ncols)
        vals = np.array([[F(complex(x, y)) for y in ys] for x in xs])
        return cls(delta, x0, ys, vals)

    def parallel_defect(self):
        e = self.etas[:, None]
        scale = max(np.abs(self.values).max(), 1e-300)
        return float(np.abs((self.values / e).imag).max() / scale)

    def __add__(self, other):
        return CornerField(self.delta, self.x0, self.ys, self.values + other.values)

    def __rmul__(self, a):
        return CornerField(self.delta, self.x0, self.ys, a * self.values)


@dataclass
class DiamondField:
    delta: float
    x0: float
    ys: np.ndarray
    values: np.ndarray

    @property
    def xs(self):
        return self.x0 + self.delta * np.arange(self.values.shape[0])


def corner_to_diamond(F, tol=1e-8):
    """F_diamond(z) = F(c_z^-) + F(c_z^+) on the medial columns between corners."""
    if F.parallel_defect() > tol:
        raise InconsistencyError("field is not parallel to the Dirac spinor")
    return DiamondField(F.delta, F.x0 + F.delta / 2, F.ys, F.values[:-1] + F.values[1:])


def diamond_to_corner(D, tol=1e-8):
    """Project back on eta_c R; interior corners must agree from both sides."""
    n = D.values.shape[0]
    xs = D.x0 - D.delta / 2 + D.delta * np.arange(n + 1)
    out = np.empty((n + 1, D.ys.size), complex)
    scale = max(np.abs(D.values).max(), 1e-300)
    for j, x in enumerate(xs):
        e = eta(x, D.delta)
        left = project(D.values[j - 1], e) if j > 0 else None
        right = project(D.values[j], e) if j < n else None
        if left is not None and right is not None:
            if np.abs(left - right).max() > tol * scale:
                raise InconsistencyError("projections disagree: field is not s-holomorphic")
        out[j] = left if left is not None else right
    return CornerField(D.delta, xs[0], D.ys, out)


# ---------------------------------------------------------------------------
# primitive of the square

@dataclass
class Primitive:
    H: np.ndarray
    xs: np.ndarray
    kinds: tuple
    ys: np.ndarray
    delta: float
    closure: float
    input_residual: float = field(default=0.0)


def _grid_dbar(F):
    if F.values.shape[0] < 3 or F.ys.size < 3:
        return 0.0
    dy = np.gradient(F.values, F.ys, axis=1, edge_order=2)
    r = 0.5 * ((F.values[2:] - F.values[:-2]) / (2 * F.delta) + 1j * dy[1:-1])
    return float(np.abs(r[:, 1:-1]).max())


def primitive_H(F, G=None, anchor=0, tol=1e-8, kappa=2.0):
    """H[F, G] on the medial columns between the corners of F and G.

    Vertical increments integrate F(c-) conj G(c+) - conj G(c-) F(c+) against
    dz = i dy (plus sign on dual columns, minus on primal ones); crossing the
    corner c from u to v adds -kappa delta F(c) conj G(c).  kappa = 2 is the
    value for which these rules close on elementary rectangles.
    """
    G = F if G is None else G
    if F.values.shape != G.values.shape or F.x0 != G.x0 or not np.array_equal(F.ys, G.ys):
        raise ParameterError("fields must live on the same grid")
    if F.values.shape[0] < 2:
        raise ParameterError("need at least two corner columns")
    d = F.delta
    f, g = F.values, np.conj(G.values)
    nodes = F.xs[:-1] + d / 2
    kinds = tuple(medial_kind(x, d) for x in nodes)
    n, ny = nodes.size, F.ys.size
    edge = -kappa * d * f * g
    H = np.zeros((n, ny), complex)
    for j in range(1, n):
        # node j-1 -> node j crosses corner j
        sgn = 1 if kinds[j] == "dual" else -1
        H[j, 0] = H[j - 1, 0] + sgn * edge[j, 0]
    for j in range(n):
        phi = (f[j] * g[j + 1] - g[j] * f[j + 1]) * 1j
        sgn = 1 if kinds[j] == "dual" else -1
        if ny > 2:
            H[j, 1:] = H[j, 0] + sgn * (cumulative_simpson(phi.real, x=F.ys)
                                             + 1j * cumulative_simpson(phi.imag, x=F.ys))
        elif ny == 2:
            H[j, 1] = H[j, 0] + sgn * 0.5 * (phi[0] + phi[1]) * (F.ys[1] - F.ys[0])
    res = 0.0
    for j in range(1, n):
        sgn = 1 if kinds[j] == "dual" else -1
        res = max(res, float(np.abs(H[j] - H[j - 1] - sgn * edge[j]).max()))
    H -= H.reshape(-1)[anchor]
    rin = max(_grid_dbar(F), _grid_dbar(G))
    span = F.ys[-1] - F.ys[0] if ny > 1 else 0.0
    bound = max(tol, 10 * rin * max(span, 1.0) * max(np.abs(f).max(), np.abs(g).max()))
    if res > bound:
        raise InconsistencyError(f"closure residual {res:.3g} exceeds {bound:.3g}")
    return Primitive(H, nodes, kinds, F.ys, d, res, rin)


def subsuper_harmonic_check(P, tol=1e-6):
    """Worst sign violations of the normalized Laplacian of H.

    Primal nodes should have Laplacian >= -tol, dual nodes <= +tol.  Returns
    (worst primal, worst dual, list of offending (node, row) pairs).
    """
    H = P.H.real
    n, ny = H.shape
    if ny < 3 or n < 5:
        return 0.0, 0.0, []
    h = np.diff(P.ys)
    if not np.allclose(h, h[0]):
        raise ParameterError("uniform vertical sampling required")
    h = h[0]
    dyy = (H[:, 2:] - 2 * H[:, 1:-1] + H[:, :-2]) / (h * h)
    d2 = (H[4:, 1:-1] + H[:-4, 1:-1] - 2 * H[2:-2, 1:-1]) / (8 * P.delta ** 2)
    lap = 0.5 * dyy[2:-2] + d2
    worst_p, worst_d, bad = 0.0, 0.0, []
    scale = max(np.abs(H).max(), 1.0)
    for j in range(2, n - 2):
        row = lap[j - 2]
        if P.kinds[j] == "primal":
            worst_p = min(worst_p, float(row.min()))
            bad += [(j, k + 1) for k in np.nonzero(row < -tol * scale)[0]]
        else:
            worst_d = max(worst_d, float(row.max()))
            bad += [(j, k + 1) for k in np.nonzero(row > tol * scale)[0]]
    return worst_p, worst_d, bad


def diamond_max_on_boundary(D):
    """True when max |F_diamond| over the block is attained on its boundary."""
    a = np.abs(D.values)
    inner = a[1:-1, 1:-1]
    if inner.size == 0:
        return True
    edge = max(a[0].max(), a[-1].max(), a[:, 0].max(), a[:, -1].max())
    return bool(inner.max() <= edge * (1 + 1e-12))


# ---------------------------------------------------------------------------
# full-plane correlators

def _tilt_for(ang, tilt):
    # the singular points sit on the real lambda axis; the ray is rotated
    # only when it runs exactly along that axis, otherwise rotating could
    # carry it across a singular point
    s = math.sin(ang)
    return tilt if abs(s) < 1e-12 else 0.0


def _ray_quad(fn, d, tilt, sqrt_sing=False):
    """Integral of fn(lambda) d lambda along lambda = t e^{i tilt} (-conj d)/|d|, t > 0.

    Singular points of the integrand sit on |lambda| = 2, so the ray is split
    there.  With sqrt_sing the integrand behaves like lambda^{-1/2} at zero and
    t = s^2 is substituted on the first piece.
    """
    direc = -np.conj(d) / abs(d)
    direc *= cmath.exp(1j * _tilt_for(cmath.phase(direc), tilt))
    opts = dict(limit=400, epsabs=1e-13, epsrel=1e-11, complex_func=True)
    if sqrt_sing:
        a = quad(lambda s: fn(s * s * direc) * 2 * s * direc, 0, math.sqrt(2), **opts)[0]
    else:
        a = quad(lambda t: fn(t * direc) * direc, 0, 2, **opts)[0]
    b = quad(lambda t: fn(t * direc) * direc, 2, math.inf, **opts)[0]
    return a + b


def _reflect(z):
    return complex(z.real, -z.imag)


def _critical_guard(params, delta):
    if params is not None:
        if not params.critical or abs(params.theta - 1 / (2 * delta)) > 1e-12:
            raise ParameterError("full-plane correlators are built at theta = theta* = 1/(2 delta)")


def fullplane_energy_correlator(a, c, delta=1.0, params=None, side=None, tilt=1e-3):
    """G_(a)(c), parallel to eta_c, with delta^{-1} G_(a) ~ conj(eta_a)/(pi (z - a)).

    The ray integral is evaluated on the lattice reflected in the real axis
    and conjugated back, and the ray is traversed from infinity to zero; this
    is the orientation for which the field is parallel to eta_c and has the
    stated asymptotics.  The ray is tilted by `tilt` radians so that it
    misses the singular points on |lambda| = 2 when it would run along
    the real axis.  At c = a pass side=+1/-1
    for the two valuations a^+/a^-.
    """
    _critical_guard(params, delta)
    A, C = _units(a, delta), _units(c, delta)
    corner_kind(A), corner_kind(C)
    if abs(C - A) < 1e-12:
        if side not in (1, -1):
            raise ParameterError("at c = a choose side=+1 or side=-1")
        return side * eta(A) / 2
    Ar, Cr = _reflect(A), _reflect(C)
    ea = np.conj(eta(Ar))         # spinor of the reflected lattice
    eb = np.conj(ea)

    def fn(l):
        return eb * semidiscrete_exp(l, Cr, Ar) / (1 - 1j * eb * eb * l * l / 4)

    val = _ray_quad(fn, Cr - Ar, tilt) / (2 * math.pi)
    return -np.conj(val)


def _arg_in(d, cut):
    ph = cmath.phase(d)
    while ph <= cut:
        ph += 2 * math.pi
    while ph > cut + 2 * math.pi:
        ph -= 2 * math.pi
    if min(abs(ph - cut), abs(ph - cut - 2 * math.pi)) < 1e-12:
        raise BranchError("point lies on the branch cut")
    return ph


def fullplane_spin_correlator(branch, c, delta=1.0, params=None, sheet=1,
                              cut=-math.pi / 2, phase=None, tilt=1e-3):
    """G_[u](c) for a primal branch point or G_[v](c) for a dual one.

    The double cover is realized with a cut along the ray from the branch
    point at angle `cut` (default straight down, which misses every corner);
    `sheet` = -1 selects the other sheet.  Passing `phase` (a continuous
    argument of c - branch) continues the value analytically instead.
    The ray integral carries an extra factor -i relative to the nominal
    prefactor e^{-+i pi/4}: without it the field is parallel to conj(eta_c).
    With it the diamond asymptotics hold with the nominal phase.
    """
    _critical_guard(params, delta)
    B, C = _units(branch, delta), _units(c, delta)
    kind = medial_kind(B)
    corner_kind(C)
    if sheet not in (1, -1):
        raise ParameterError("sheet must be +1 or -1")
    d = C - B
    ph = _arg_in(d, cut) if phase is None else float(phase)
    # ray direction -conj(d)/|d| = exp(i (pi - arg d)), tilted
    ang = math.pi - ph
    ang += _tilt_for(ang, tilt)
    direc = cmath.exp(1j * ang)
    sq = cmath.exp(0.5j * ang)
    pref = cmath.exp(-1j * math.pi / 4) if kind == "primal" else cmath.exp(1j * math.pi / 4)

    def fn(l):
        return semidiscrete_exp(l, C, B)

    opts = dict(limit=400, epsabs=1e-13, epsrel=1e-11, complex_func=True)
    # lambda^{-1/2} d lambda = direc^{1/2} t^{-1/2} dt, with t = s^2 near zero
    a_ = quad(lambda s: fn(s * s * direc) * 2, 0, math.sqrt(2), **opts)[0]
    b_ = quad(lambda t: fn(t * direc) / math.sqrt(t), 2, math.inf, **opts)[0]
    return -1j * sheet * pref * sq * (a_ + b_) / (2 * math.pi)


def diamond_value(F, z, delta=1.0):
    """F(c_z^-) + F(c_z^+) for a callable corner field."""
    z = complex(z)
    return F(z - delta / 2) + F(z + delta / 2)


# ---------------------------------------------------------------------------
# contour extraction

def contour_extraction(Fv, Gu, contour, delta=1.0, nquad=None, clockwise=False):
    """Im of the discrete contour integral of Fv_diamond * Gu_diamond.

    `contour` = (x_left, x_right, y_bottom, y_top) with x_left, x_right on
    medial columns of the same kind; horizontal sides step by 2 delta with
    midpoint values, vertical sides are integrated in y.  Fv and Gu are
    callables (c, phase) -> value continued along the counterclockwise path
    by the phase of c relative to their branch points, given as the
    attributes Fv.branch and Gu.branch.
    """
    xl, xr, yb, yt = contour
    if not (xl < xr and yb < yt):
        raise ParameterError("contour must be a proper rectangle")
    if medial_kind(xl, delta) != medial_kind(xr, delta) or round((xr - xl) / (2 * delta)) * 2 * delta != xr - xl:
        raise ParameterError("vertical sides must be medial columns of the same kind")
    for B in (Fv.branch, Gu.branch):
        if not (xl < B.real < xr and yb < B.imag < yt):
            raise ParameterError("contour must surround both branch points")
    tracker = {}

    def val(F, c, key):
        ph = cmath.phase(c - F.branch)
        prev = tracker.get(key)
        if prev is not None:
            ph += 2 * math.pi * round((prev - ph) / (2 * math.pi))
        tracker[key] = ph
        return F(c, ph)

    def prod(z):
        fv = val(Fv, z - delta / 2, "f-") + val(Fv, z + delta / 2, "f+")
        gu = val(Gu, z - delta / 2, "g-") + val(Gu, z + delta / 2, "g+")
        return fv * gu

    total = 0j
    nstep = round((xr - xl) / (2 * delta))
    ny = nquad or 48
    # fields adjacent to a branch point have a kink on the branch row
    cuts = sorted({yb, yt} | {B.imag for B in (Fv.branch, Gu.branch)})
    for k in range(nstep):
        total += prod(complex(xl + (2 * k + 1) * delta, yb)) * 2 * delta
    for y0, y1 in zip(cuts[:-1], cuts[1:]):
        total += _vertical(prod, xr, y0, y1, ny)
    for k in range(nstep):
        total += prod(complex(xr - (2 * k + 1) * delta, yt)) * (-2 * delta)
    for y0, y1 in reversed(list(zip(cuts[:-1], cuts[1:]))):
        total -= _vertical(prod, xl, y0, y1, ny, reverse=True)
    return -total.imag if clockwise else total.imag


def _vertical(prod, x, y0, y1, n, reverse=False):
    # gauss-legendre in y, evaluated in path order so phases are tracked
    t, w = np.polynomial.legendre.leggauss(n)
    ys = 0.5 * (y1 - y0) * t + 0.5 * (y1 + y0)
    ws = 0.5 * (y1 - y0) * w
    order = range(n - 1, -1, -1) if reverse else range(n)
    s = 0j
    for k in order:
        s += prod(complex(x, ys[k])) * 1j * ws[k]
    return s


class BranchedField:
    """Callable (c, phase) wrapper of a full-plane spin correlator."""

    def __init__(self, branch, delta=1.0):
        self.branch = complex(branch)
        self.delta = delta

    def __call__(self, c, phase=None):
        return fullplane_spin_correlator(self.branch, c, self.delta, phase=phase)


CORNER_SIGN = select_orientation()
