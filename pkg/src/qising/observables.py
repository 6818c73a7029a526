"""Point observables on space-time configurations and batch statistics."""
import math
from dataclasses import dataclass

import numpy as np

from .lattice import ParameterError
from .sampler import EvaluationError


@dataclass(frozen=True)
class SpacePoint:
    col: int
    y: float


def _as_point(p):
    return p if isinstance(p, SpacePoint) else SpacePoint(int(p[0]), float(p[1]))


def spin_product(cfg, points):
    out = 1
    for p in points:
        p = _as_point(p)
        out *= cfg.spin_at(p.col, p.y)
    return out


def energy_pair(cfg, a):
    a = _as_point(a)
    if not 0 <= a.col + 1 < cfg.width:
        raise EvaluationError("right primal neighbor lies outside the domain")
    return spin_product(cfg, [a, SpacePoint(a.col + 1, a.y)])


class SpinProduct:
    """Observable sigma_A; `improved=True` uses the FK connectivity of pairs."""

    def __init__(self, points, name=None, improved=False):
        self.points = [(p.col, p.y) if isinstance(p, SpacePoint) else tuple(p) for p in points]
        self.improved = improved
        self.name = name or "sigma" + "".join(f"[{c},{y:g}]" for c, y in self.points)
        if improved and len(self.points) != 2:
            raise ParameterError("improved estimator is defined for two points")

    def __call__(self, cfg):
        if self.improved:
            (c1, y1), (c2, y2) = self.points
            lab = cfg.labels_at([c1, c2], [y1, y2])
            return float(lab[0] == lab[1])
        return spin_product(cfg, self.points)


class EnergyPair(SpinProduct):
    def __init__(self, a, name=None, improved=False):
        a = _as_point(a)
        super().__init__([(a.col, a.y), (a.col + 1, a.y)], name or f"energy[{a.col},{a.y:g}]", improved)


class Constant:
    name = "one"
    points = ()

    def __init__(self, value=1.0):
        self.value = value

    def __call__(self, cfg):
        return self.value


def connectivity_profile(labels_grid, offsets, axis=0, periodic=True):
    """Mean of 1{label(x) == label(x+m)} along `axis` for each offset m.

    labels_grid is (columns, samples); on a torus every column is a start.
    """
    lab = np.asarray(labels_grid)
    n = lab.shape[axis]
    out = []
    for m in offsets:
        if periodic:
            shifted = np.roll(lab, -m, axis=axis)
            out.append(float(np.mean(lab == shifted)))
        else:
            a = np.take(lab, range(0, n - m), axis=axis)
            b = np.take(lab, range(m, n), axis=axis)
            out.append(float(np.mean(a == b)))
    return np.array(out)


def _autocorr(x):
    x = np.asarray(x, float) - np.mean(x)
    n = x.size
    f = np.fft.rfft(x, 2 * n)
    acf = np.fft.irfft(f * np.conj(f))[:n]
    if acf[0] <= 0:
        return None
    return acf / acf[0]


def tau_int(x):
    """Integrated autocorrelation time by initial positive sequence (>= 1/2)."""
    rho = _autocorr(x)
    if rho is None:
        return 0.5
    s = 0.0
    for m in range(rho.size // 2):
        g = rho[2 * m] + rho[2 * m + 1]
        if g <= 0:
            break
        s += g
    return max(0.5, s - 0.5)


def batch_stats(samples, n_batches=20):
    x = np.asarray(samples, float).ravel()
    if n_batches < 1 or x.size < 2 * n_batches:
        raise ParameterError(f"need at least {2 * n_batches} samples, got {x.size}")
    nb = x.size // n_batches
    bm = x[:nb * n_batches].reshape(n_batches, nb).mean(axis=1)
    mean = float(x.mean())
    err = float(bm.std(ddof=1) / math.sqrt(n_batches)) if n_batches > 1 else 0.0
    if np.ptp(x) == 0:
        err = 0.0
    return mean, err, tau_int(x)


def flat_row(lattice, y):
    """Row of the flattened lattice containing height y (rows have height eps)."""
    r = int(math.floor(y / lattice.epsilon))
    if not 0 <= r < lattice.rows:
        raise EvaluationError(f"height {y} outside the flattened lattice")
    return r


class FlatSpinProduct:
    """sigma_A on a flattened state; points are (col, y) in physical units."""

    def __init__(self, lattice, points, name=None, improved=False):
        self.points = [tuple(p) for p in points]
        self.sites = [(flat_row(lattice, y), int(c)) for c, y in self.points]
        for r, c in self.sites:
            if not 0 <= c < lattice.cols:
                raise EvaluationError(f"column {c} outside the flattened lattice")
        if improved and len(self.sites) != 2:
            raise ParameterError("improved estimator is defined for two points")
        self.improved = improved
        self.name = name or "sigma" + "".join(f"[{c},{y:g}]" for c, y in self.points)

    def __call__(self, st):
        if self.improved:
            (r1, c1), (r2, c2) = self.sites
            return float(st.labels[r1, c1] == st.labels[r2, c2])
        out = 1
        for r, c in self.sites:
            out *= int(st.spins[r, c])
        return out


def window_agreement(cfg, col_a, col_b, y0, y1, improved=False):
    """Mean of sigma(col_a, y) sigma(col_b, y) over y in [y0, y1], exact for
    piecewise-constant columns.  improved=True averages 1{a and b in one FK
    cluster} instead, which has the same expectation."""
    if not (0 <= y0 < y1 <= cfg.height):
        raise EvaluationError("window must lie inside (0, height)")
    cuts = [y0, y1]
    for c in (col_a, col_b):
        d = cfg.deaths(c)
        cuts.extend(d[(d > y0) & (d < y1)])
    cuts = np.unique(np.asarray(cuts, float))
    mids = 0.5 * (cuts[:-1] + cuts[1:])
    n = mids.size
    if improved:
        s = (cfg.labels_at(np.full(n, col_a), mids) == cfg.labels_at(np.full(n, col_b), mids)).astype(float)
    else:
        s = cfg.spins_at(np.full(n, col_a), mids) * cfg.spins_at(np.full(n, col_b), mids)
    return float(np.dot(s, np.diff(cuts)) / (y1 - y0))


class WindowEnergy:
    """Energy sigma_j sigma_{j+1} averaged over a vertical window and over column pairs."""

    def __init__(self, cols, y0, y1, name=None, improved=False):
        self.improved = improved
        self.cols = [int(c) for c in cols]
        self.y0, self.y1 = float(y0), float(y1)
        self.points = [(c, 0.5 * (y0 + y1)) for c in self.cols] + [(c + 1, 0.5 * (y0 + y1)) for c in self.cols]
        self.name = name or f"energy[{self.cols[0]}..{self.cols[-1]},{y0:g}:{y1:g}]"

    def __call__(self, cfg):
        return float(np.mean([window_agreement(cfg, c, c + 1, self.y0, self.y1, self.improved) for c in self.cols]))
