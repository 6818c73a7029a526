"""Monte Carlo for the space-time spin measure and its flattened proxy.

The continuous-time chain alternates two exact conditional draws: death
points given spins (jumps plus fresh Poisson(tau) points) and spins given
deaths (bridges of rate theta on agreeing dual segments, clusters recolored).
The flattened Swendsen-Wang sampler and the enumeration / transfer-matrix
oracles exist to validate it.
"""
import itertools
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from numba import njit

from .lattice import ParameterError

BC_CODE = {"plus": 0, "free": 1, "periodic": 2}
MAX_ENUM_SITES = 20


def chain_rng(seed, chain, sweep):
    """Counter-style generator keyed by (seed, chain, sweep)."""
    ss = np.random.SeedSequence([int(seed) & (2**64 - 1), int(chain), int(sweep)])
    return np.random.Generator(np.random.Philox(ss))


def n_threads():
    try:
        return max(1, int(os.environ.get("QISING_THREADS", "1")))
    except ValueError:
        return 1


# ---------------------------------------------------------------------------
# union-find and kernels

@njit(cache=True, nogil=True)
def _find(parent, i):
    root = i
    while parent[root] != root:
        root = parent[root]
    while parent[i] != root:
        nxt = parent[i]
        parent[i] = root
        i = nxt
    return root


@njit(cache=True, nogil=True)
def _union(parent, a, b):
    ra = _find(parent, a)
    rb = _find(parent, b)
    if ra != rb:
        if ra < rb:
            parent[rb] = ra
        else:
            parent[ra] = rb


@njit(cache=True, nogil=True)
def _resample_deaths(doff, dpts, spins, fcount, fpts):
    W = doff.size - 1
    cap = dpts.size + fpts.size
    new_off = np.empty(W + 1, np.int64)
    new_pts = np.empty(cap, np.float64)
    new_sp = np.empty(cap + W, np.int8)
    new_off[0] = 0
    pos = 0
    spos = 0
    fo = 0
    for j in range(W):
        a = doff[j]
        b = doff[j + 1]
        so = a + j
        nf = fcount[j]
        fresh = np.sort(fpts[fo:fo + nf])
        fo += nf
        k = a
        f = 0
        old = 0
        new_sp[spos] = spins[so]
        spos += 1
        while k < b or f < nf:
            if f >= nf or (k < b and dpts[k] < fresh[f]):
                kk = k - a
                if spins[so + kk] != spins[so + kk + 1]:
                    new_pts[pos] = dpts[k]
                    pos += 1
                    new_sp[spos] = spins[so + kk + 1]
                    spos += 1
                old = kk + 1
                k += 1
            else:
                new_pts[pos] = fresh[f]
                pos += 1
                new_sp[spos] = spins[so + old]
                spos += 1
                f += 1
        new_off[j + 1] = pos
    return new_off, new_pts[:pos].copy(), new_sp[:spos].copy()


@njit(cache=True, nogil=True)
def _cluster(doff, dpts, spins, bcount, bpts, coins, bc):
    W = doff.size - 1
    n = spins.size
    ghost = n
    parent = np.arange(n + 1)
    for j in range(W):
        first = doff[j] + j
        last = doff[j + 1] + j
        if bc == 0:
            _union(parent, first, ghost)
            _union(parent, last, ghost)
        elif bc == 2:
            _union(parent, first, last)
    kept_d = np.empty(bpts.size, np.int64)
    kept_y = np.empty(bpts.size, np.float64)
    nk = 0
    bo = 0
    for d in range(bcount.size):
        nb = bcount[d]
        ys = np.sort(bpts[bo:bo + nb])
        bo += nb
        if bc == 2:
            L = d
            R = (d + 1) % W
        else:
            L = d - 1
            R = d
        if bc == 1 and (L < 0 or R >= W):
            continue
        il = 0
        ir = 0
        for y in ys:
            if L >= 0:
                while doff[L] + il < doff[L + 1] and dpts[doff[L] + il] < y:
                    il += 1
                nl = doff[L] + L + il
                sl = spins[nl]
            else:
                nl = ghost
                sl = 1
            if R < W:
                while doff[R] + ir < doff[R + 1] and dpts[doff[R] + ir] < y:
                    ir += 1
                nr = doff[R] + R + ir
                sr = spins[nr]
            else:
                nr = ghost
                sr = 1
            if sl == sr:
                _union(parent, nl, nr)
                kept_d[nk] = d
                kept_y[nk] = y
                nk += 1
    labels = np.empty(n, np.int64)
    new_sp = np.empty(n, np.int8)
    groot = _find(parent, ghost)
    for i in range(n):
        r = _find(parent, i)
        labels[i] = r
        if bc == 0 and r == groot:
            new_sp[i] = 1
        else:
            new_sp[i] = coins[r]
    return new_sp, labels, groot, kept_d[:nk].copy(), kept_y[:nk].copy()


@njit(cache=True, nogil=True)
def _values_at(doff, dpts, vals, cols, ys):
    out = np.empty(cols.size, vals.dtype)
    for m in range(cols.size):
        j = cols[m]
        a = doff[j]
        b = doff[j + 1]
        k = np.searchsorted(dpts[a:b], ys[m])
        out[m] = vals[a + j + k]
    return out


@njit(cache=True, nogil=True)
def _sw(spins, p_h, p_v, uh, uv, coins, bc):
    R, C = spins.shape
    n = R * C
    ghost = n
    parent = np.arange(n + 1)
    for i in range(R):
        for j in range(C):
            s = spins[i, j]
            idx = i * C + j
            if j + 1 < C:
                if spins[i, j + 1] == s and uh[i, j + 1] < p_h:
                    _union(parent, idx, idx + 1)
            elif bc == 2:
                if spins[i, 0] == s and uh[i, C] < p_h:
                    _union(parent, idx, i * C)
            elif bc == 0:
                if s == 1 and uh[i, C] < p_h:
                    _union(parent, idx, ghost)
            if bc == 0 and j == 0 and s == 1 and uh[i, 0] < p_h:
                _union(parent, idx, ghost)
            if i + 1 < R:
                if spins[i + 1, j] == s and uv[i + 1, j] < p_v:
                    _union(parent, idx, idx + C)
            elif bc == 2:
                if spins[0, j] == s and uv[R, j] < p_v:
                    _union(parent, idx, j)
            elif bc == 0:
                if s == 1 and uv[R, j] < p_v:
                    _union(parent, idx, ghost)
            if bc == 0 and i == 0 and s == 1 and uv[0, j] < p_v:
                _union(parent, idx, ghost)
    labels = np.empty((R, C), np.int64)
    out = np.empty((R, C), np.int8)
    groot = _find(parent, ghost)
    for i in range(R):
        for j in range(C):
            r = _find(parent, i * C + j)
            labels[i, j] = r
            if bc == 0 and r == groot:
                out[i, j] = 1
            else:
                out[i, j] = coins[r]
    return out, labels


# ---------------------------------------------------------------------------
# continuous-time configurations

class EvaluationError(ValueError):
    pass


@dataclass
class SpaceTimeConfig:
    """Death points and interval spins, stored column-major in flat arrays.

    Column j owns death points dpts[doff[j]:doff[j+1]] and the
    doff[j+1]-doff[j]+1 interval spins starting at spins[doff[j]+j].
    """
    width: int
    height: float
    bc: str
    doff: np.ndarray
    dpts: np.ndarray
    spins: np.ndarray
    labels: np.ndarray = None
    ghost_label: int = -1
    bridges: tuple = None

    @classmethod
    def constant(cls, width, height, bc="plus", spin=1):
        doff = np.zeros(width + 1, np.int64)
        return cls(width, float(height), bc, doff, np.empty(0), np.full(width, spin, np.int8))

    @classmethod
    def from_columns(cls, height, bc, deaths, spins):
        doff = np.concatenate([[0], np.cumsum([len(d) for d in deaths])]).astype(np.int64)
        dpts = np.concatenate([np.asarray(d, float) for d in deaths]) if deaths else np.empty(0)
        sp = np.concatenate([np.asarray(s, np.int8) for s in spins])
        cfg = cls(len(deaths), float(height), bc, doff, dpts, sp)
        cfg.check()
        return cfg

    def deaths(self, j):
        return self.dpts[self.doff[j]:self.doff[j + 1]]

    def column_spins(self, j):
        a = self.doff[j] + j
        return self.spins[a:a + self.doff[j + 1] - self.doff[j] + 1]

    def spin_at(self, j, y):
        d = self.deaths(j)
        k = np.searchsorted(d, y)
        if (k < d.size and d[k] == y) or not (0 <= j < self.width) or not (0 < y < self.height):
            raise EvaluationError(f"cannot evaluate spin at column {j}, height {y}")
        return int(self.column_spins(j)[k])

    def spins_at(self, cols, ys):
        cols = np.asarray(cols, np.int64)
        ys = np.asarray(ys, float)
        return _values_at(self.doff, self.dpts, self.spins, cols.ravel(), ys.ravel()).reshape(cols.shape)

    def labels_at(self, cols, ys):
        """FK cluster labels at points, from the last cluster update."""
        if self.labels is None:
            raise EvaluationError("no cluster labels: run cluster_update first")
        cols = np.asarray(cols, np.int64)
        ys = np.asarray(ys, float)
        return _values_at(self.doff, self.dpts, self.labels, cols.ravel(), ys.ravel()).reshape(cols.shape)

    def check(self):
        """Raise if the stored configuration breaks its invariants."""
        if self.doff.size != self.width + 1 or self.spins.size != self.dpts.size + self.width:
            raise AssertionError("inconsistent array sizes")
        for j in range(self.width):
            d = self.deaths(j)
            if d.size and (np.any(np.diff(d) <= 0) or d[0] <= 0 or d[-1] >= self.height):
                raise AssertionError(f"death points of column {j} not strictly inside and increasing")
            s = self.column_spins(j)
            if not np.all(np.abs(s) == 1):
                raise AssertionError("spins must be +-1")
            if self.bc == "plus" and (s[0] != 1 or s[-1] != 1):
                raise AssertionError("plus boundary intervals must carry +1")
            if self.bc == "periodic" and s[0] != s[-1]:
                raise AssertionError("periodic column must close up")
        if self.bridges is not None:
            for d, y in zip(*self.bridges):
                L, R = (d, (d + 1) % self.width) if self.bc == "periodic" else (d - 1, d)
                sl = self.spin_at(L, y) if L >= 0 else 1
                sr = self.spin_at(R, y) if R < self.width else 1
                if sl != sr:
                    raise AssertionError("bridge joins disagreeing spins")

    def jump_count(self):
        return int(sum(np.count_nonzero(np.diff(self.column_spins(j))) for j in range(self.width)))


def sample_poisson(rate, length, rng):
    if rate < 0:
        raise ParameterError("Poisson rate must be non-negative")
    if not length > 0:
        raise ParameterError("length must be positive")
    n = rng.poisson(rate * length)
    return np.sort(rng.uniform(0.0, length, n))


def resample_deaths(cfg, params, rng):
    W, T = cfg.width, cfg.height
    fcount = rng.poisson(params.tau * T, W).astype(np.int64)
    fpts = rng.uniform(0.0, T, int(fcount.sum()))
    doff, dpts, spins = _resample_deaths(cfg.doff, cfg.dpts, cfg.spins, fcount, fpts)
    return SpaceTimeConfig(W, T, cfg.bc, doff, dpts, spins)


def cluster_update(cfg, params, bc=None, rng=None, keep_bridges=False):
    bc = cfg.bc if bc is None else bc
    code = BC_CODE[bc]
    W, T = cfg.width, cfg.height
    nd = W if code == 2 else W + 1
    bcount = rng.poisson(params.theta * T, nd).astype(np.int64)
    bpts = rng.uniform(0.0, T, int(bcount.sum()))
    coins = np.where(rng.random(cfg.spins.size) < 0.5, 1, -1).astype(np.int8)
    spins, labels, groot, kd, ky = _cluster(cfg.doff, cfg.dpts, cfg.spins, bcount, bpts, coins, code)
    out = SpaceTimeConfig(W, T, bc, cfg.doff, cfg.dpts, spins, labels,
                          int(groot) if code == 0 else -1)
    if keep_bridges:
        out.bridges = (kd, ky)
    return out


def sweep(cfg, params, rng, keep_bridges=False):
    return cluster_update(resample_deaths(cfg, params, rng), params, rng=rng, keep_bridges=keep_bridges)


# ---------------------------------------------------------------------------
# runs and estimates

@dataclass(frozen=True)
class SamplerSettings:
    sweeps: int = 2000
    burn_in: int = 200
    chains: int = 1
    seed: int = 1
    thinning: int = 1

    def __post_init__(self):
        if not (self.sweeps > self.burn_in >= 0):
            raise ParameterError("need sweeps > burn_in >= 0")
        if self.chains < 1 or self.thinning < 1:
            raise ParameterError("chains and thinning must be >= 1")

    @property
    def n_samples(self):
        return len(range(self.burn_in, self.sweeps, self.thinning))


@dataclass(frozen=True)
class Estimate:
    mean: float
    stderr: float
    tau_int: float
    n: int


class EstimateTable(dict):
    """Observable name -> Estimate, in insertion order."""

    def rows(self):
        return [(k, v.mean, v.stderr, v.tau_int, v.n) for k, v in self.items()]


def _run_single(domain, params, settings, observables, chain, init, stepper):
    state = init()
    recs = []
    for s in range(settings.sweeps):
        state = stepper(state, chain_rng(settings.seed, chain, s))
        if s >= settings.burn_in and (s - settings.burn_in) % settings.thinning == 0:
            recs.append([float(ob(state)) for ob in observables])
    return np.array(recs).reshape(-1, len(observables))


def _merge(per_chain, names, n_batches):
    from .observables import batch_stats
    table = EstimateTable()
    for k, name in enumerate(names):
        means, bms, taus = [], [], []
        for arr in per_chain:
            x = arr[:, k]
            m, _, tau = batch_stats(x, n_batches)
            nb = x.size // n_batches
            bms.append(x[:nb * n_batches].reshape(n_batches, nb).mean(axis=1))
            means.append(m)
            taus.append(tau)
        bm = np.concatenate(bms)
        mean = float(np.mean(means))
        err = float(bm.std(ddof=1) / math.sqrt(bm.size)) if bm.size > 1 else 0.0
        if not np.isfinite(err) or np.ptp(bm) == 0:
            err = 0.0
        table[name] = Estimate(mean, err, float(np.mean(taus)), int(sum(a.shape[0] for a in per_chain)))
    return table


def _observable_name(ob, k):
    return getattr(ob, "name", None) or getattr(ob, "__name__", None) or f"obs{k}"


def _check_observables(domain, observables):
    for ob in observables:
        for col, y in getattr(ob, "points", ()):
            if not domain.inside(col, y):
                raise ParameterError(f"observable point ({col}, {y}) outside the domain")


def _pool_map(fn, items):
    nt = min(n_threads(), len(items))
    if nt <= 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(nt) as ex:
        return list(ex.map(fn, items))


def run_chain(domain, params, settings, observables, bc=None, n_batches=20):
    """Continuous-time Gibbs chain(s); observables are callables on SpaceTimeConfig."""
    bc = domain.bc if bc is None else bc
    _check_observables(domain, observables)
    if settings.n_samples < 2 * n_batches:
        raise ParameterError("too few post-burn-in samples for the requested batches")

    def init():
        return SpaceTimeConfig.constant(domain.width, domain.height, bc)

    def step(cfg, rng):
        return sweep(cfg, params, rng)

    per_chain = _pool_map(
        lambda c: _run_single(domain, params, settings, observables, c, init, step),
        list(range(settings.chains)))
    names = [_observable_name(ob, k) for k, ob in enumerate(observables)]
    return _merge(per_chain, names, n_batches)


# ---------------------------------------------------------------------------
# flattened lattice

@dataclass
class FlatState:
    spins: np.ndarray
    labels: np.ndarray = None


def flattened_sw_step(lattice, spins, rng):
    """One Swendsen-Wang sweep; returns (spins, cluster labels)."""
    R, C = lattice.rows, lattice.cols
    spins = np.asarray(spins, np.int8)
    if spins.shape != (R, C):
        raise ParameterError(f"spin grid shape {spins.shape} does not match {(R, C)}")
    uh = rng.random((R, C + 1))
    uv = rng.random((R + 1, C))
    coins = np.where(rng.random(R * C + 1) < 0.5, 1, -1).astype(np.int8)
    return _sw(spins, lattice.p_h, lattice.p_v, uh, uv, coins, BC_CODE[lattice.bc])


def run_flattened(lattice, settings, observables, n_batches=20):
    """SW chain(s); observables are callables on FlatState."""
    if settings.n_samples < 2 * n_batches:
        raise ParameterError("too few post-burn-in samples for the requested batches")

    def init():
        return FlatState(np.ones((lattice.rows, lattice.cols), np.int8))

    def step(st, rng):
        s, lab = flattened_sw_step(lattice, st.spins, rng)
        return FlatState(s, lab)

    per_chain = _pool_map(
        lambda c: _run_single(None, None, settings, observables, c, init, step),
        list(range(settings.chains)))
    names = [_observable_name(ob, k) for k, ob in enumerate(observables)]
    return _merge(per_chain, names, n_batches)


def _bonds(lattice):
    R, C = lattice.rows, lattice.cols
    idx = lambda i, j: i * C + j
    bonds, field_terms = [], []
    for i in range(R):
        for j in range(C):
            if j + 1 < C:
                bonds.append((idx(i, j), idx(i, j + 1), lattice.J_h))
            elif lattice.bc == "periodic" and C > 1:
                bonds.append((idx(i, j), idx(i, 0), lattice.J_h))
            if i + 1 < R:
                bonds.append((idx(i, j), idx(i + 1, j), lattice.J_v))
            elif lattice.bc == "periodic" and R > 1:
                bonds.append((idx(i, j), idx(0, j), lattice.J_v))
            if lattice.bc == "plus":
                h = 0.0
                h += lattice.J_h * ((j == 0) + (j == C - 1))
                h += lattice.J_v * ((i == 0) + (i == R - 1))
                field_terms.append((idx(i, j), h))
    return bonds, field_terms


@dataclass(frozen=True)
class ExactDistribution:
    shape: tuple
    states: np.ndarray
    probs: np.ndarray

    def expect(self, fn):
        vals = np.array([fn(s.reshape(self.shape)) for s in self.states], float)
        return float(vals @ self.probs)

    def marginal(self, sites):
        """Exact distribution of the spins at (row, col) sites as {pattern: prob}."""
        flat = [i * self.shape[1] + j for i, j in sites]
        out = {}
        for s, p in zip(self.states, self.probs):
            key = tuple(int(v) for v in s[flat])
            out[key] = out.get(key, 0.0) + float(p)
        return out


def enumerate_flattened(lattice):
    n = lattice.rows * lattice.cols
    if n > MAX_ENUM_SITES:
        raise ParameterError(f"{n} sites exceeds the enumeration limit {MAX_ENUM_SITES}")
    states = np.array(list(itertools.product((1, -1), repeat=n)), np.int8)
    bonds, fields = _bonds(lattice)
    logw = np.zeros(len(states))
    s = states.astype(float)
    for a, b, J in bonds:
        logw += J * s[:, a] * s[:, b]
    for a, h in fields:
        logw += h * s[:, a]
    w = np.exp(logw - logw.max())
    return ExactDistribution((lattice.rows, lattice.cols), states, w / w.sum())


def flattened_row_marginal(lattice, rows):
    """Exact joint law of whole spin rows by transfer matrices (free or plus bc).

    Returns {pattern: prob} with patterns ordered row by row.
    """
    if lattice.bc == "periodic":
        raise ParameterError("transfer oracle supports free and plus only")
    C = lattice.cols
    if C * len(rows) > MAX_ENUM_SITES:
        raise ParameterError("too many selected sites")
    row_states = np.array(list(itertools.product((1, -1), repeat=C)), float)
    S = row_states.shape[0]
    lw = lattice.J_h * np.sum(row_states[:, :-1] * row_states[:, 1:], axis=1)
    if lattice.bc == "plus":
        lw = lw + lattice.J_h * (row_states[:, 0] + row_states[:, -1])
    edge = lattice.J_v * row_states.sum(axis=1) if lattice.bc == "plus" else np.zeros(S)
    R = lattice.rows

    def weight(r):
        w = lw + edge * ((r == 0) + (r == R - 1))
        return np.exp(w - w.max())

    T = np.exp(lattice.J_v * (row_states @ row_states.T - C))
    sel = sorted(rows)
    P = weight(0)[None, :]
    for i in range(R):
        if i in sel:
            m = P.shape[0]
            Q = np.zeros((m * S, S))
            for s in range(S):
                Q[np.arange(m) * S + s, s] = P[:, s]
            P = Q
        if i + 1 < R:
            P = (P @ T) * weight(i + 1)[None, :]
            P /= P.max()
    probs = P.sum(axis=1)
    probs /= probs.sum()
    out = {}
    for flat, p in enumerate(probs):
        key = []
        for r in range(len(sel)):
            s = (flat // S ** (len(sel) - 1 - r)) % S
            key.extend(int(v) for v in row_states[s])
        out[tuple(key)] = float(p)
    return out
