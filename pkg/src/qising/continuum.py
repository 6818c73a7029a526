"""Continuum predictions: elliptic functions, hyperbolic metrics, Pfaffians,
energy and spin formulas in the half-plane and rectangles."""
import math
from dataclasses import dataclass
from itertools import product

import numpy as np
from scipy.optimize import brentq

from .lattice import ParameterError
from .opuc import critical_amplitude_sq

SQRT2PI = math.sqrt(2) * math.pi


class DomainError(ValueError):
    pass


def spin_constant():
    """C = 2^{1/6} e^{(3/2) zeta'(-1)}."""
    return math.sqrt(critical_amplitude_sq())


# ---------------------------------------------------------------------------
# elliptic functions

def agm(a, b, tol=1e-16):
    a, b = float(a), float(b)
    for _ in range(64):
        if abs(a - b) <= tol * a:
            break
        a, b = 0.5 * (a + b), math.sqrt(a * b)
    return a


@dataclass(frozen=True)
class EllipticParams:
    k: float
    K: float
    Kp: float

    @property
    def width(self):
        return 2 * self.K

    @property
    def height(self):
        return self.Kp


def elliptic_K(k):
    """(K(k), K'(k)) by the arithmetic-geometric mean."""
    if not 0 < k < 1:
        raise ParameterError("modulus must lie in (0, 1)")
    kp = math.sqrt((1 - k) * (1 + k))
    return math.pi / (2 * agm(1.0, kp)), math.pi / (2 * agm(1.0, k))


def elliptic_params(k):
    K, Kp = elliptic_K(k)
    return EllipticParams(k, K, Kp)


def _jacobi_real(u, m):
    """sn, cn, dn at real u, parameter m = k^2 in [0, 1), by descending AGM."""
    if m == 0:
        return math.sin(u), math.cos(u), 1.0
    a = [1.0]
    c = [math.sqrt(m)]
    b = math.sqrt(1 - m)
    while abs(c[-1]) > 1e-17 and len(a) < 40:
        an = 0.5 * (a[-1] + b)
        c.append(0.5 * (a[-1] - b))
        b = math.sqrt(a[-1] * b)
        a.append(an)
    n = len(a) - 1
    phi = 2 ** n * a[-1] * u
    for j in range(n, 0, -1):
        phi = 0.5 * (phi + math.asin(c[j] / a[j] * math.sin(phi)))
    sn, cn = math.sin(phi), math.cos(phi)
    return sn, cn, math.sqrt(1 - m * sn * sn)


def jacobi(z, k):
    """(sn, cn, dn)(z, k) for complex z via the real-imaginary addition formulas."""
    if not 0 <= k < 1:
        raise ParameterError("modulus must lie in [0, 1)")
    z = complex(z)
    m = k * k
    s, c, d = _jacobi_real(z.real, m)
    if z.imag == 0:
        return complex(s), complex(c), complex(d)
    s1, c1, d1 = _jacobi_real(z.imag, 1 - m) if m > 0 else _circ_limit(z.imag)
    den = c1 * c1 + m * s * s * s1 * s1
    if abs(den) < 1e-28:
        raise DomainError(f"pole of the Jacobi functions at {z}")
    sn = complex(s * d1, c * d * s1 * c1) / den
    cn = complex(c * c1, -s * d * s1 * d1) / den
    dn = complex(d * c1 * d1, -m * s * c * s1) / den
    return sn, cn, dn


def _circ_limit(y):
    # modulus-1 functions: sn = tanh, cn = dn = sech
    return math.tanh(y), 1 / math.cosh(y), 1 / math.cosh(y)


def modulus_for_aspect(aspect):
    """k with 2K(k)/K'(k) = aspect (width over height)."""
    if not 0.15 <= aspect <= 15:
        raise ParameterError("aspect ratio must lie in [0.15, 15]")

    def g(lk):
        K, Kp = elliptic_K(1 / (1 + math.exp(-lk)))
        return math.log(2 * K / Kp) - math.log(aspect)

    return 1 / (1 + math.exp(-brentq(g, -30, 30, xtol=1e-14)))


# ---------------------------------------------------------------------------
# metrics

def hyperbolic_metric(geometry, a, k=None):
    """l_Omega(a) normalized so that l = 2 at the center of the unit disk."""
    a = complex(a)
    if geometry == "halfplane":
        if a.imag <= 0:
            raise DomainError("point must lie in the upper half-plane")
        return 1 / a.imag
    if geometry == "disk":
        r2 = abs(a) ** 2
        if r2 >= 1:
            raise DomainError("point must lie in the unit disk")
        return 2 / (1 - r2)
    if geometry == "rectangle":
        e = elliptic_params(k)
        if not (-e.K < a.real < e.K and 0 < a.imag < e.Kp):
            raise DomainError("point must lie inside R(k)")
        sn, cn, dn = jacobi(a, k)
        return abs(cn * dn) / sn.imag
    raise ParameterError(f"unknown geometry {geometry!r}")


def box_metric(x, y, width, height):
    """Hyperbolic metric of the box (0, width) x (0, height) at (x, y)."""
    if not (0 < x < width and 0 < y < height):
        raise DomainError("point outside the box")
    k = modulus_for_aspect(width / height)
    e = elliptic_params(k)
    s = e.width / width
    return hyperbolic_metric("rectangle", complex((x - width / 2) * s, y * s), k) * s


# ---------------------------------------------------------------------------
# Pfaffians

def pfaffian(A):
    """Pfaffian by Parlett-Reid skew elimination with pivoting; Pf([[0,a],[-a,0]]) = a."""
    A = np.array(A, dtype=complex if np.iscomplexobj(A) else float)
    n = A.shape[0]
    if A.shape != (n, n):
        raise ParameterError("matrix must be square")
    if n % 2:
        raise ParameterError("Pfaffian needs even dimension")
    if n == 0:
        return 1.0
    pf = 1.0
    for k in range(0, n - 1, 2):
        kp = k + 1 + int(np.argmax(np.abs(A[k + 1:, k])))
        if kp != k + 1:
            A[[k + 1, kp], :] = A[[kp, k + 1], :]
            A[:, [k + 1, kp]] = A[:, [kp, k + 1]]
            pf = -pf
        if A[k + 1, k] == 0:
            return 0.0 * pf
        pf *= A[k, k + 1]
        if k + 2 < n:
            tau = A[k, k + 2:] / A[k, k + 1]
            A[k + 2:, k + 2:] += np.outer(tau, A[k + 2:, k + 1]) - np.outer(A[k + 2:, k + 1], tau)
    return pf


def skew_from_upper(n, upper):
    """Skew matrix from its strict upper triangle given row by row."""
    A = np.zeros((n, n), dtype=np.result_type(*upper) if len(upper) else float)
    iu = np.triu_indices(n, 1)
    A[iu] = upper
    return A - A.T


def kernel_matrix(pts):
    pts = np.asarray(pts, complex)
    diff = pts[:, None] - pts[None, :]
    if np.any(np.abs(diff[~np.eye(len(pts), dtype=bool)]) == 0):
        raise DomainError("points must be distinct")
    with np.errstate(divide="ignore"):
        K = np.where(np.eye(len(pts), dtype=bool), 0, 1 / np.where(diff == 0, 1, diff))
    return K


# ---------------------------------------------------------------------------
# energy

def predict_energy(geometry, point, bc="plus", k=None):
    """Limit of delta^{-1} E[centered energy] = +-l_Omega(a)/(sqrt2 pi)."""
    if bc not in ("plus", "free"):
        raise ParameterError(f"unknown boundary condition {bc!r}")
    sign = 1 if bc == "plus" else -1
    return sign * hyperbolic_metric(geometry, point, k) / SQRT2PI


def rectangle_energy_literal(point, k):
    """The rectangle expression cn dn / (i sn) taken literally (complex off the axis)."""
    sn, cn, dn = jacobi(point, k)
    return cn * dn / (1j * sn) / SQRT2PI


def predict_multi_energy_halfplane(points):
    """(i sqrt2/pi)^n Pf K over the points (a_1, conj a_1, a_2, conj a_2, ...).

    The prefactor makes n = 1 reproduce 1/(sqrt2 pi t); interleaving the
    conjugates makes distant groups factorize with the right sign.
    """
    a = np.asarray([complex(p) for p in points])
    if np.any(a.imag <= 0):
        raise DomainError("points must lie in the upper half-plane")
    n = a.size
    pf = pfaffian(kernel_matrix(np.ravel(np.column_stack([a, a.conj()]))))
    return ((1j * math.sqrt(2) / math.pi) ** n * pf).real


# ---------------------------------------------------------------------------
# spins

def _ratio(p, q):
    (x1, t1), (x2, t2) = p, q
    return ((x1 - x2) ** 2 + (t1 - t2) ** 2) / ((x1 - x2) ** 2 + (t1 + t2) ** 2)


def predict_spins_halfplane(points, bc="plus", form="general"):
    """Half-plane spin correlations delta^{-n/8} E[sigma...] in the limit.

    form="general" is the n-point display; form="particular" uses the separate
    one- and two-point displays (they differ from the general one by 2^{1/4}).
    Free boundary is available for two points only.
    """
    pts = [(float(x), float(t)) for x, t in points]
    n = len(pts)
    if any(t <= 0 for _, t in pts):
        raise DomainError("times must be positive")
    if len(set(pts)) != n:
        raise DomainError("points must be distinct")
    if bc == "free" and n != 2:
        raise ParameterError("free boundary formula is for two points")
    C = spin_constant()
    if form == "particular":
        if n == 1:
            return C * (2 / pts[0][1]) ** 0.125
        if n != 2:
            raise ParameterError("particular form covers one and two points")
        X = _ratio(*pts)
        sgn = 1 if bc == "plus" else -1
        return C * C * (1 / (pts[0][1] * pts[1][1])) ** 0.125 * (X ** -0.25 + sgn * X ** 0.25) ** 0.5
    if form != "general":
        raise ParameterError(f"unknown form {form!r}")
    pref = C ** n * math.prod((2 / t) ** 0.125 for _, t in pts)
    logX = {(r, m): math.log(_ratio(pts[r], pts[m])) for r in range(n) for m in range(r + 1, n)}
    total = 0.0
    for mu in product((1, -1), repeat=n):
        total += math.exp(sum(mu[r] * mu[m] * lx / 4 for (r, m), lx in logX.items()))
    plus = pref * (2 ** (-n / 2) * total) ** 0.5
    if bc == "plus":
        return plus
    X = math.exp(logX[(0, 1)])
    return plus * ((X ** -0.25 - X ** 0.25) / (X ** -0.25 + X ** 0.25)) ** 0.5


def predict_rectangle_spin_ratio(points, k):
    """Product of |cn dn| over the points of R(k)."""
    e = elliptic_params(k)
    out = 1.0
    for x, t in points:
        if not (-e.K < x < e.K and 0 < t < e.Kp):
            raise DomainError("point outside R(k)")
        _, cn, dn = jacobi(complex(x, t), k)
        out *= abs(cn * dn)
    return out


def predict_fullplane_spin(r):
    """C^2 |2r|^{-1/4}, isotropic."""
    return critical_amplitude_sq() * abs(2 * r) ** -0.25
