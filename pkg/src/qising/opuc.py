"""Horizontal correlations on Z x R from orthogonal polynomials on the circle.

The weight is w(t) = |theta - theta* e^{it}| and w# = 1/w. The D/L ladder is
run on the normalized pair (theta, theta*)/c with c = sqrt(theta^2 + theta*^2),
which makes every D_n dimensionless; L_n is reported in units of 1/c.
"""
import math
import warnings
from dataclasses import dataclass

import mpmath as mp
import numpy as np
from scipy import integrate, linalg

from .lattice import ParameterError

# Glaisher-Kinkelin constant, 30 digits
GLAISHER_DIGITS = "1.28242712910062263687534256886979"


class RegimeError(ValueError):
    pass


class ConditioningError(ArithmeticError):
    pass


@dataclass(frozen=True)
class TrigMoments:
    c: np.ndarray
    weight: str
    theta: float
    theta_star: float

    def toeplitz(self, n):
        return linalg.toeplitz(np.asarray(self.c[:n + 1], float))


@dataclass(frozen=True)
class VerblunskyData:
    alpha: np.ndarray
    beta: np.ndarray
    weight: str


@dataclass(frozen=True)
class CorrelationLadder:
    theta: float
    theta_star: float
    D: np.ndarray
    Dstar: np.ndarray
    L: np.ndarray
    Lstar: np.ndarray

    @property
    def N(self):
        return self.D.size - 1


def _weight_fn(theta, theta_star, weight):
    a, b = float(theta), float(theta_star)

    def w(t):
        return np.sqrt(np.maximum(a * a + b * b - 2 * a * b * np.cos(t), 0.0))

    if weight == "w":
        return w
    return lambda t: 1.0 / w(t)


def circle_moments(theta, theta_star, N, weight="w", dps=None):
    """c_k = (1/2pi) int e^{ikt} w(t) dt for k = 0..N.

    With `dps` set, mpmath quadrature at that many digits is used and the
    moments are returned as an object array of mpf.
    """
    if theta <= 0 and weight == "w#" or theta_star < 0 or theta < 0:
        raise ParameterError("theta, theta* must be non-negative")
    if weight not in ("w", "w#"):
        raise ParameterError(f"unknown weight {weight!r}")
    if weight == "w#" and theta == theta_star:
        raise RegimeError("w# is not integrable at theta = theta*")
    if theta_star == 0 or theta == 0:
        # constant weight
        v = theta + theta_star
        c = np.zeros(N + 1, dtype=object if dps else float)
        c[:] = 0
        c[0] = (v if weight == "w" else 1.0 / v)
        if dps:
            c = np.array([mp.mpf(x) for x in c], dtype=object)
        return TrigMoments(c, weight, theta, theta_star)
    if dps:
        with mp.workdps(dps):
            a, b = mp.mpf(theta), mp.mpf(theta_star)
            p = 1 if weight == "w" else -1

            def f(t):
                return mp.power(a * a + b * b - 2 * a * b * mp.cos(t), mp.mpf(p) / 2)

            out = []
            for k in range(N + 1):
                nodes = mp.linspace(0, mp.pi, max(2, k + 2))
                out.append(mp.quad(lambda t: f(t) * mp.cos(k * t), nodes) / mp.pi)
        return TrigMoments(np.array(out, dtype=object), weight, theta, theta_star)
    f = _weight_fn(theta, theta_star, weight)
    if theta != theta_star:
        return TrigMoments(_periodic_coeffs(f, N), weight, theta, theta_star)
    # |t|-type kink at t = 0: adaptive oscillatory quadrature on [0, pi]
    c = np.empty(N + 1)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        for k in range(N + 1):
            if k == 0:
                val = integrate.quad(f, 0, np.pi, epsabs=1e-14, epsrel=1e-13, limit=400)[0]
            else:
                val = integrate.quad(f, 0, np.pi, weight="cos", wvar=k,
                                     epsabs=1e-14, epsrel=1e-13, limit=400)[0]
            c[k] = val / np.pi
    return TrigMoments(c, weight, theta, theta_star)


def _periodic_coeffs(f, N, tol=1e-15, max_log2=22):
    """Cosine coefficients of a smooth even periodic function by trapezoid doubling."""
    prev = None
    M = 256
    while M <= 2 ** max_log2:
        M = max(M, 4 * (N + 1))
        t = 2 * np.pi * np.arange(M) / M
        cf = np.fft.rfft(f(t)).real / M
        cur = cf[:N + 1].copy()
        if prev is not None and np.max(np.abs(cur - prev)) < tol:
            return cur
        prev = cur
        M *= 2
    raise ConditioningError("trapezoid doubling did not converge")


def verblunsky(moments, n):
    """Levinson-Szego recursion: Phi_{k+1} = z Phi_k - alpha_k Phi_k^*, beta_k = ||Phi_k||^2."""
    c = moments.c if isinstance(moments, TrigMoments) else np.asarray(moments)
    tag = moments.weight if isinstance(moments, TrigMoments) else "w"
    if len(c) < n + 1:
        raise ParameterError(f"need moments up to order {n}")
    use_mp = c.dtype == object
    if use_mp:
        phi = [mp.mpf(1)]
        beta = [mp.mpf(c[0])]
    else:
        c = np.asarray(c, np.longdouble)
        phi = np.array([1.0], np.longdouble)
        beta = [c[0]]
    alpha = []
    if not beta[0] > 0:
        raise ConditioningError("c_0 must be positive")
    for k in range(n):
        if use_mp:
            s = mp.fsum(phi[j] * c[j + 1] for j in range(len(phi)))
        else:
            s = np.dot(phi, c[1:k + 2])
        a = s / beta[-1]
        if not abs(a) < 1:
            raise ConditioningError(f"|alpha_{k}| >= 1: moments not positive definite")
        alpha.append(a)
        if use_mp:
            z = [mp.mpf(0)] + phi
            st = phi[::-1] + [mp.mpf(0)]
            phi = [z[i] - a * st[i] for i in range(len(z))]
        else:
            z = np.concatenate([[0.0], phi]).astype(np.longdouble)
            st = np.concatenate([phi[::-1], [0.0]]).astype(np.longdouble)
            phi = z - a * st
        b = beta[-1] * (1 - a * a)
        if not b > 0:
            raise ConditioningError("non-positive norm in Levinson recursion")
        beta.append(b)
    if use_mp:
        return VerblunskyData(np.array(alpha, dtype=object), np.array(beta, dtype=object), tag)
    return VerblunskyData(np.array(alpha, float), np.array(beta, float), tag)


def _normalized(theta, theta_star):
    c = math.hypot(theta, theta_star)
    return theta / c, theta_star / c, c


def subcritical_ladder(theta, theta_star, N):
    """D_n, D_n*, L_n, L_n* for n = 0..N away from self-duality.

    Two interleaved chains: L_0 -> D_1 -> L_2 -> ... and L_1 -> D_2 -> L_3 -> ...
    with the even chain seeded by L_1 = theta* D_1, L_1* = theta D_1*
    (normalized units).
    """
    if not (theta > 0 and theta_star > 0):
        raise ParameterError("theta, theta* must be positive")
    if theta == theta_star:
        raise RegimeError("subcritical ladder needs theta != theta*")
    if N < 0:
        raise ParameterError("N must be non-negative")
    a, b, c = _normalized(theta, theta_star)
    order = N + 2
    vw = verblunsky(circle_moments(a, b, order + 1, "w"), order)
    vh = verblunsky(circle_moments(a, b, order + 1, "w#"), order)
    al, be, ah, bh = vw.alpha, vw.beta, vh.alpha, vh.beta
    D = np.zeros(N + 2)
    Ds = np.zeros(N + 2)
    L = np.zeros(N + 2)
    Ls = np.zeros(N + 2)
    D[0] = Ds[0] = 1.0
    L[0], Ls[0] = b, a
    for n in range(N + 1):
        if n == 1:
            L[1], Ls[1] = b * D[1], a * Ds[1]
        elif n >= 2:
            L[n] = be[n - 2] * (al[n - 2] * Ds[n - 1] + D[n - 1])
            Ls[n] = be[n - 2] * (Ds[n - 1] + al[n - 2] * D[n - 1])
        D[n + 1] = bh[n] * (L[n] - ah[n] * Ls[n])
        Ds[n + 1] = bh[n] * (Ls[n] - ah[n] * L[n])
    return CorrelationLadder(theta, theta_star, D[:N + 1], Ds[:N + 1], L[:N + 1] / c, Ls[:N + 1] / c)


def square_difference_product(theta, theta_star, m):
    """Right side of D_{2m+1}^2 - D*_{2m+1}^2 as a product of norms (normalized units)."""
    a, b, _ = _normalized(theta, theta_star)
    order = 2 * m + 2
    vw = verblunsky(circle_moments(a, b, order + 1, "w"), order)
    vh = verblunsky(circle_moments(a, b, order + 1, "w#"), order)
    return float(np.prod(vh.beta[:2 * m + 2]) * np.prod(vw.beta[:2 * m]) * (b * b - a * a))


def magnetization(theta, theta_star):
    """Closed form (theta^2 + theta*^2)^{-1/2} (1 - (theta/theta*)^2)^{1/8}, prefactor included."""
    if not (0 <= theta < theta_star):
        raise RegimeError("magnetization formula needs theta < theta*")
    return (theta ** 2 + theta_star ** 2) ** -0.5 * (1 - (theta / theta_star) ** 2) ** 0.125


def spontaneous_magnetization(theta, theta_star):
    """lim D_n^{1/2} of the ladder: (1 - (theta/theta*)^2)^{1/8} for theta < theta*."""
    if not (0 <= theta < theta_star):
        raise RegimeError("ordered regime of the ladder needs theta < theta*")
    return (1 - (theta / theta_star) ** 2) ** 0.125


def correlation_length(theta, theta_star):
    """Nominal decay rate 1/2 log(theta/theta*) for theta > theta*."""
    if not theta > theta_star:
        raise RegimeError("correlation length needs theta > theta*")
    return 0.5 * math.log(theta / theta_star)


def decay_rate(theta, theta_star):
    """Exact exponential rate of D_n: |log(theta/theta*)|."""
    if theta == theta_star:
        raise RegimeError("no exponential decay at self-duality")
    return abs(math.log(theta / theta_star))


def glaisher_series(terms=12):
    """log A from the Euler-Maclaurin expansion of sum k log k (independent of GLAISHER_DIGITS)."""
    with mp.workdps(40):
        n = mp.mpf(200)
        s = mp.fsum(k * mp.log(k) for k in range(1, 201))
        main = (n * n / 2 + n / 2 + mp.mpf(1) / 12) * mp.log(n) - n * n / 4
        # f = x log x has f^(2j-1)(n) = -(2j-3)! n^(2-2j) for j >= 2
        corr = mp.fsum(mp.bernoulli(2 * j) / mp.factorial(2 * j) * -mp.factorial(2 * j - 3) * n ** (2 - 2 * j)
                       for j in range(2, terms))
        return s - main - corr


def zeta_prime_minus_one():
    return mp.mpf(1) / 12 - mp.log(mp.mpf(GLAISHER_DIGITS))


def critical_amplitude_sq():
    """C_sigma^2 = 2^{1/3} e^{3 zeta'(-1)}."""
    return float(mp.mpf(2) ** (mp.mpf(1) / 3) * mp.exp(3 * zeta_prime_minus_one()))


def critical_prediction(m):
    if m < 1:
        raise ParameterError("m must be >= 1")
    return critical_amplitude_sq() * (2.0 * m) ** -0.25


def segment_norms(n, power):
    """Squared norms of the monic orthogonal polynomials for (1 - x^2)^power on [-1, 1].

    Gram-Schmidt in the monomial basis with exact Beta-function moments, run
    in mpmath to keep the Hankel conditioning harmless.
    """
    with mp.workdps(60):
        p = mp.mpf(power)

        def mom(k):
            if k % 2:
                return mp.mpf(0)
            return mp.beta((k + 1) / mp.mpf(2), p + 1)

        H = [[mom(i + j) for j in range(n + 1)] for i in range(n + 1)]
        polys = []
        norms = []
        for deg in range(n + 1):
            v = [mp.mpf(0)] * (n + 1)
            v[deg] = mp.mpf(1)
            for q, nq in zip(polys, norms):
                ip = mp.fsum(v[i] * q[j] * H[i][j] for i in range(n + 1) for j in range(n + 1))
                v = [v[i] - ip / nq * q[i] for i in range(n + 1)]
            nn = mp.fsum(v[i] * v[j] * H[i][j] for i in range(n + 1) for j in range(n + 1))
            polys.append(v)
            norms.append(nn)
        return np.array([float(x) for x in norms])


@dataclass(frozen=True)
class CriticalLadderReport:
    D: np.ndarray
    L: np.ndarray
    product: np.ndarray
    prediction: np.ndarray
    consistent: bool
    max_rel_dev: float


def critical_ladder(m, rtol=0.05):
    """Evaluate the literal critical recursions as they stand and compare with the asymptotic.

    L_0 = 1, 2 L_1 = (2/pi) ||P_0||^2, L_{n+1} = pi^{-1} 4^n ||P_n||^2 D_n (n >= 1),
    D_{n+1} = pi^{-1} 4^n ||P#_n||^2 L_n (n >= 0). `product` holds the
    closed form for D_{k+1} D_k.
    """
    if m < 1:
        raise ParameterError("m must be >= 1")
    P = segment_norms(m + 1, 0.5)
    Ph = segment_norms(m + 1, -0.5)
    D = np.zeros(m + 2)
    L = np.zeros(m + 2)
    D[0] = 1.0
    L[0] = 1.0
    L[1] = P[0] / math.pi
    for n in range(m + 1):
        D[n + 1] = 4.0 ** n * Ph[n] * L[n] / math.pi
        if n + 1 <= m and n >= 1:
            L[n + 1] = 4.0 ** n * P[n] * D[n] / math.pi
    prod = np.array([math.pi ** (-2 * k - 1) * 2.0 ** (2 * k * k)
                     * np.prod(P[:k]) * np.prod(Ph[:k + 1]) for k in range(1, m + 1)])
    pred = np.array([critical_prediction(k) for k in range(1, m + 1)])
    dev = np.abs(D[1:m + 1] / pred - 1)
    return CriticalLadderReport(D[:m + 1], L[:m + 1], prod, pred, bool(np.all(dev < rtol)), float(dev.max()))


def bvp_eval(Q, theta, theta_star, k, s):
    """V(k, s) = (1/2pi) int e^{-ikt} Q(e^{it}) e^{-s w(t)} dt.

    Q is a mapping {power: coefficient} of a trigonometric polynomial.
    """
    if s < 0:
        raise ParameterError("s must be non-negative")
    w = _weight_fn(theta, theta_star, "w")
    items = list(Q.items())

    def f(t):
        q = sum(complex(cf) * np.exp(1j * p * t) for p, cf in items)
        return np.exp(-1j * k * t) * q * np.exp(-s * w(t))

    opts = dict(epsabs=1e-13, epsrel=1e-12, limit=400, points=[0.0])
    re = integrate.quad(lambda t: f(t).real, -np.pi, np.pi, **opts)[0]
    im = integrate.quad(lambda t: f(t).imag, -np.pi, np.pi, **opts)[0]
    return complex(re, im) / (2 * np.pi)


def fermion_symbol_coeffs(theta, theta_star, n):
    """Fourier coefficients c_j, |j| <= n, of (q - e^{-ik})/|q - e^{-ik}|, q = theta/theta*."""
    q = theta / theta_star
    out = {}
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        for j in range(-n, n + 1):
            def f(k):
                z = q - np.exp(-1j * k)
                return (np.exp(-1j * j * k) * z / abs(z)).real
            out[j] = integrate.quad(f, -np.pi, np.pi, points=[0.0], limit=400,
                                    epsabs=1e-14, epsrel=1e-13)[0] / (2 * np.pi)
    return out


def fermion_correlation(theta, theta_star, r):
    """<sigma_0 sigma_r> of the chain as |det T_r|, T_ij = c_{i-j-1} (free-fermion oracle)."""
    if r == 0:
        return 1.0
    c = fermion_symbol_coeffs(theta, theta_star, r + 1)
    T = np.array([[c[(i - j) - 1] for j in range(r)] for i in range(r)])
    return abs(float(np.linalg.det(T)))
