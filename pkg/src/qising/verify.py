"""Invariant suite behind `qising verify`.

Each check returns a Result with status PASS, FAIL or WARN.  WARN marks
known discrepancies that are reported but never fail the run.
"""
import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Result:
    name: str
    status: str
    value: float
    detail: str = ""


def _res(name, err, tol, detail=""):
    return Result(name, "PASS" if err <= tol else "FAIL", float(err), detail or f"tol={tol:g}")


def _toeplitz_oracle(c, n):
    """beta_k and alpha_k from a Cholesky factorization of the Toeplitz matrix."""
    from scipy.linalg import toeplitz
    T = toeplitz(np.asarray(c[:n + 1], float))
    L = np.linalg.cholesky(T)
    beta = np.diag(L) ** 2
    # monic orthogonal polynomials are the rows of L^{-1} rescaled
    Li = np.linalg.inv(L)
    alpha = np.array([-Li[k + 1, 0] / Li[k + 1, k + 1] for k in range(n)])
    return alpha, beta


def check_opuc(quick=True):
    from . import opuc
    out = []
    th, ts = 0.5, 1.0
    m = opuc.circle_moments(th, ts, 20)
    v = opuc.verblunsky(m, 20)
    a_or, b_or = _toeplitz_oracle(m.c, 20)
    err = max(np.abs(v.alpha - a_or).max(), np.abs(v.beta[:21] - b_or).max())
    out.append(_res("opuc.levinson_vs_cholesky", err, 1e-10))
    q = opuc.square_difference_product(th, ts, 3)
    lad = opuc.subcritical_ladder(th / math.hypot(th, ts), ts / math.hypot(th, ts), 8)
    lhs = lad.D[7] ** 2 - lad.Dstar[7] ** 2
    out.append(_res("opuc.square_difference", abs(lhs - q), 1e-9))
    fer = [opuc.fermion_correlation(th, ts, r) for r in (1, 2, 5)]
    lad = opuc.subcritical_ladder(th, ts, 5)
    err = max(abs(lad.D[r] - f) for r, f in zip((1, 2, 5), fer))
    out.append(_res("opuc.ladder_vs_free_fermions", err, 1e-8))
    rep = opuc.critical_ladder(8)
    out.append(Result("opuc.critical_recursion", "PASS" if rep.consistent else "WARN",
                      rep.max_rel_dev, "literal critical recursions vs C^2 (2m)^{-1/4}"))
    out.append(regime_check())
    return out


def regime_check(mc=False):
    """Which regime convention makes the magnetization formula match the plateau."""
    from . import opuc
    th, ts = 0.5, 1.0
    target = opuc.magnetization(th, ts)
    got = {}
    for label, (a, b) in (("literal", (th, ts)), ("swapped", (ts, th))):
        # sampled chain with bond rate a and death rate b/2 orders for a > b,
        # which is the free-fermion correlation with the arguments exchanged
        got[label] = math.sqrt(opuc.fermion_correlation(b, a, 20))
    match = [k for k, v in got.items() if abs(v / target - 1) < 0.02]
    detail = "plateau literal=%.6g swapped=%.6g formula=%.6g" % (got["literal"], got["swapped"], target)
    if len(match) == 1:
        return Result("opuc.magnetization_convention", "PASS", got[match[0]], f"{match[0]}; {detail}")
    return Result("opuc.magnetization_convention", "WARN", float("nan"), f"no unique match; {detail}")


def check_continuum():
    from . import continuum as ct
    out = []
    k = 0.6
    worst = 0.0
    for z in (0.3 + 0.2j, -0.7 + 0.9j, 1.1 + 0.4j):
        sn, cn, dn = ct.jacobi(z, k)
        worst = max(worst, abs(sn * sn + cn * cn - 1), abs(dn * dn + k * k * sn * sn - 1))
    out.append(_res("special.jacobi_identities", worst, 1e-12))
    K, Kp = ct.elliptic_K(2 ** -0.5)
    out.append(_res("special.K_symmetric", abs(K - Kp), 1e-12))
    rng = np.random.default_rng(7)
    A = rng.normal(size=(8, 8))
    A = A - A.T
    pf = ct.pfaffian(A)
    out.append(_res("special.pfaffian_sq_det", abs(pf * pf - np.linalg.det(A)) / abs(np.linalg.det(A)), 1e-9))
    a = ct.predict_multi_energy_halfplane([0.3 + 1j])
    out.append(_res("special.multi_energy_n1", abs(a - ct.predict_energy("halfplane", 0.3 + 1j)), 1e-15))
    # metric of R(k) pulled back through sn from the half-plane
    e = ct.elliptic_params(k)
    worst = 0.0
    for z in (0.2 + 0.5j, -0.9 + 0.3j * e.Kp, 0.4 + 0.8j * e.Kp):
        sn, cn, dn = ct.jacobi(z, k)
        worst = max(worst, abs(ct.hyperbolic_metric("rectangle", z, k)
                              - ct.hyperbolic_metric("halfplane", sn) * abs(cn * dn)))
    out.append(_res("special.metric_covariance", worst, 1e-8))
    return out


def check_shol(quick=True):
    from . import shol
    out = []
    lam, base, tgt = 0.3 + 0.2j, 0.5, 4.5 + 1.3j
    p1 = shol.semidiscrete_exp(lam, tgt, base, via="right")
    p2 = shol.semidiscrete_exp(lam, tgt, base, via="left")
    p3 = shol.semidiscrete_exp(lam, tgt, base, path=[0.5, 0.5 + 1.3j, 1 + 1.3j, 1.5 + 1.3j, 2 + 1.3j,
                                                    2.5 + 1.3j, 3 + 1.3j, 3.5 + 1.3j, 4 + 1.3j, 4.5 + 1.3j])
    out.append(_res("shol.exp_path_independence", max(abs(p1 - p2), abs(p1 - p3)) / abs(p1), 1e-12))
    F = lambda c: shol.semidiscrete_exp(lam, c, base)
    r1 = abs(shol.dbar_residual(F, 2.5 + 1j, h=1e-2))
    r2 = abs(shol.dbar_residual(F, 2.5 + 1j, h=5e-3))
    ratio = r1 / r2
    out.append(Result("shol.exp_dbar_richardson", "PASS" if 3.5 <= ratio <= 4.5 else "FAIL", ratio, "[3.5, 4.5]"))
    g = shol.fullplane_energy_correlator(0.5, 1.5)
    out.append(Result("shol.energy_normalization", "PASS" if abs(abs(g) - 1 / math.pi) < 1e-6 else "FAIL",
                      abs(g), "|G(a + delta)| = 1/pi"))
    if not quick:
        Fv, Gu = shol.BranchedField(1.0), shol.BranchedField(0.0)
        val = shol.contour_extraction(Fv, Gu, (-2, 2, -1.3, 1.7), nquad=16)
        ref = 4 * (Fv(0.5 + 0j) * np.conj(Gu(0.5 + 0j))).real
        out.append(_res("shol.contour_extraction", abs(val - ref), 1e-6))
    return out


def check_sampler(mc=False):
    from .lattice import build_domain, couplings_lattice, flatten, make_params
    from .sampler import SpaceTimeConfig, chain_rng, enumerate_flattened, flattened_row_marginal, sweep
    out = []
    lat = couplings_lattice(0.3, 0.7, 4, 3, "plus")
    e = enumerate_flattened(lat).marginal([(1, 0), (1, 1), (1, 2), (3, 0), (3, 1), (3, 2)])
    t = flattened_row_marginal(lat, [1, 3])
    out.append(_res("sampler.enumeration_vs_transfer", max(abs(e[k] - t[k]) for k in t), 1e-12))
    p = make_params(0.5, 1.0, 1.0)
    cfg = SpaceTimeConfig.constant(3, 2.0, "plus")
    for s in range(50):
        cfg = sweep(cfg, p, chain_rng(5, 0, s), keep_bridges=True)
    try:
        cfg.check()
        out.append(Result("sampler.config_invariants", "PASS", 0.0))
    except AssertionError as exc:
        out.append(Result("sampler.config_invariants", "FAIL", 1.0, str(exc)))
    if mc:
        dom = build_domain(2, 1.0, "free")
        lat = flatten(dom, p, 2 ** -7)
        rows = [32, 95]
        ex = flattened_row_marginal(lat, rows)
        ys = [(r + 0.5) * 2 ** -7 for r in rows]
        cfg = SpaceTimeConfig.constant(2, 1.0, "free")
        cnt, N = {}, 20000
        for s in range(N):
            cfg = sweep(cfg, p, chain_rng(3, 0, s))
            k = tuple(cfg.spin_at(c, y) for y in ys for c in (0, 1))
            cnt[k] = cnt.get(k, 0) + 1
        tv = 0.5 * sum(abs(cnt.get(k, 0) / N - v) for k, v in ex.items())
        out.append(_res("sampler.tv_vs_transfer_matrix", tv, 0.03, "eps = 2^-7 proxy"))
    return out


def run_checks(quick=True, mc=False):
    return check_opuc(quick) + check_continuum() + check_shol(quick) + check_sampler(mc)
