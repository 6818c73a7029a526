import math
import os
import subprocess
import sys
from types import SimpleNamespace

import numpy as np
import pytest
from scipy import stats

from oracles import enumerate_plus_chain_free, tfim_two_site, two_site_agree
from qising.lattice import ParameterError, build_domain, couplings_lattice, critical_params, flatten, make_params
from qising.observables import EnergyPair, SpinProduct
from qising.sampler import (EvaluationError, SamplerSettings, SpaceTimeConfig, chain_rng, cluster_update,
                            enumerate_flattened, flattened_row_marginal, flattened_sw_step, resample_deaths,
                            run_chain, run_flattened, sample_poisson, sweep)


def test_poisson_counts_and_uniformity():
    rng = np.random.default_rng(3)
    counts = [sample_poisson(2.0, 3.0, rng).size for _ in range(4000)]
    assert np.mean(counts) == pytest.approx(6.0, abs=0.15)
    assert np.var(counts) == pytest.approx(6.0, rel=0.1)
    pts = np.concatenate([sample_poisson(2.0, 3.0, rng) for _ in range(500)])
    assert stats.kstest(pts / 3.0, "uniform").pvalue > 1e-3
    gaps = np.diff(sample_poisson(5.0, 2000.0, rng))
    assert stats.kstest(gaps, "expon", args=(0, 0.2)).pvalue > 1e-3


def test_poisson_edge_cases():
    rng = np.random.default_rng(0)
    assert sample_poisson(0.0, 1.0, rng).size == 0
    with pytest.raises(ParameterError):
        sample_poisson(-1.0, 1.0, rng)
    with pytest.raises(ParameterError):
        sample_poisson(1.0, 0.0, rng)


def test_resample_deaths_without_fresh_points():
    rng = np.random.default_rng(0)
    cfg = SpaceTimeConfig.from_columns(1.0, "free", [[0.3, 0.7]], [[1, -1, 1]])
    out = resample_deaths(cfg, SimpleNamespace(tau=0.0), rng)
    # deaths at spin jumps are forced and survive
    assert out.deaths(0).tolist() == [0.3, 0.7] and out.column_spins(0).tolist() == [1, -1, 1]
    cfg = SpaceTimeConfig.from_columns(1.0, "free", [[0.5]], [[1, 1]])
    out = resample_deaths(cfg, SimpleNamespace(tau=0.0), rng)
    assert out.deaths(0).size == 0 and out.column_spins(0).tolist() == [1]


def test_resample_deaths_keeps_invariants():
    p = make_params(0.5, 3.0, 1.0)
    cfg = SpaceTimeConfig.constant(5, 4.0, "plus")
    for s in range(30):
        cfg = sweep(cfg, p, chain_rng(1, 0, s), keep_bridges=True)
        cfg.check()
    assert cfg.jump_count() >= 0


def test_cluster_update_no_bridges_gives_free_coins():
    # theta = 0: every interval is its own cluster, plus intervals touching the top/bottom excluded
    p = SimpleNamespace(theta=0.0, tau=1.0)
    cfg = SpaceTimeConfig.from_columns(1.0, "free", [[0.5]], [[1, 1]])
    seen = {tuple(cluster_update(cfg, p, rng=chain_rng(0, 0, s)).column_spins(0)) for s in range(64)}
    assert seen == {(1, 1), (1, -1), (-1, 1), (-1, -1)}


def test_config_check_catches_violations():
    with pytest.raises(AssertionError):
        SpaceTimeConfig.from_columns(1.0, "plus", [[0.5]], [[1, -1]])
    with pytest.raises(AssertionError):
        SpaceTimeConfig.from_columns(1.0, "free", [[0.5, 0.2]], [[1, -1, 1]])
    with pytest.raises(EvaluationError):
        SpaceTimeConfig.constant(2, 1.0).spin_at(0, 1.5)


def test_single_free_column_two_point():
    # a lone column is the single-site chain -tau X, with correlation exp(-2 tau dy)
    tau = 1.3
    p = make_params(0.5, tau, 1.0)
    dom = build_domain(1, 3.0, "free")
    obs = [SpinProduct([(0, 1.0), (0, 1.5)]), SpinProduct([(0, 0.5), (0, 2.5)])]
    est = run_chain(dom, p, SamplerSettings(20000, 100, seed=4), obs)
    for ob, dy in zip(obs, (0.5, 2.0)):
        e = est[ob.name]
        assert abs(e.mean - math.exp(-2 * tau * dy)) < 4 * e.stderr + 5e-3


@pytest.mark.parametrize("bc", ["plus", "free"])
def test_two_columns_match_operator_oracle(bc):
    tau, theta, T, y = 0.7, 1.3, 1.0, 0.3
    exact_e, exact_m = tfim_two_site(tau, theta, T, y, bc)
    est = run_chain(build_domain(2, T, bc), make_params(0.5, tau, theta), SamplerSettings(30000, 200, seed=8),
                    [SpinProduct([(0, y), (1, y)], name="e"), SpinProduct([(0, y)], name="m")])
    assert abs(est["e"].mean - exact_e) < 4 * est["e"].stderr + 3e-3
    assert abs(est["m"].mean - exact_m) < 4 * est["m"].stderr + 3e-3


def test_tv_against_transfer_matrix():
    p = make_params(0.5, 1.0, 1.0)
    eps = 2 ** -7
    lat = flatten(build_domain(2, 1.0, "free"), p, eps)
    rows = [32, 95]
    ex = flattened_row_marginal(lat, rows)
    ys = [(r + 0.5) * eps for r in rows]
    cfg, cnt, N = SpaceTimeConfig.constant(2, 1.0, "free"), {}, 20000
    for s in range(N):
        cfg = sweep(cfg, p, chain_rng(3, 0, s))
        k = tuple(cfg.spin_at(c, y) for y in ys for c in (0, 1))
        cnt[k] = cnt.get(k, 0) + 1
    tv = 0.5 * sum(abs(cnt.get(k, 0) / N - v) for k, v in ex.items())
    assert tv < 0.03


def test_run_chain_errors():
    dom = build_domain(2, 1.0)
    p = critical_params(0.5)
    with pytest.raises(ParameterError):
        SamplerSettings(10, 10)
    with pytest.raises(ParameterError):
        run_chain(dom, p, SamplerSettings(30, 0), [SpinProduct([(0, 0.5)])])
    with pytest.raises(ParameterError):
        run_chain(dom, p, SamplerSettings(200, 0), [SpinProduct([(5, 0.5)])])


def test_run_chain_deterministic_and_multichain():
    dom = build_domain(3, 2.0)
    p = critical_params(0.5)
    obs = [EnergyPair((0, 1.0))]
    a = run_chain(dom, p, SamplerSettings(300, 20, chains=2, seed=5), obs)
    b = run_chain(dom, p, SamplerSettings(300, 20, chains=2, seed=5), obs)
    c = run_chain(dom, p, SamplerSettings(300, 20, chains=2, seed=6), obs)
    assert a.rows() == b.rows() and a.rows() != c.rows()
    assert a.rows()[0][4] == 2 * 280


def test_thread_count_does_not_change_results(tmp_path):
    code = ("from qising.lattice import *; from qising.sampler import *; from qising.observables import *;"
            "print(run_chain(build_domain(3,2.0), critical_params(0.5), SamplerSettings(200,10,chains=3,seed=2),"
            "[EnergyPair((0,1.0))]).rows())")
    outs = []
    for t in ("1", "3"):
        env = dict(os.environ, QISING_THREADS=t)
        outs.append(subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True).stdout)
    assert outs[0] == outs[1] and outs[0]


def test_enumeration_examples():
    J = 0.4
    lat = couplings_lattice(J, J, 1, 2, "free")
    d = enumerate_flattened(lat)
    assert d.expect(lambda s: s[0, 0] == s[0, 1]) == pytest.approx(two_site_agree(J), abs=1e-14)
    lat = couplings_lattice(J, 0.1, 1, 4, "free")
    d = enumerate_flattened(lat)
    assert d.expect(lambda s: len(set(s.ravel())) == 1) == pytest.approx(enumerate_plus_chain_free(J, 4), abs=1e-14)
    with pytest.raises(ParameterError):
        enumerate_flattened(couplings_lattice(J, J, 5, 5))


def test_sw_matches_enumeration():
    lat = couplings_lattice(0.35, 0.6, 3, 3, "plus")
    d = enumerate_flattened(lat)
    exact = d.expect(lambda s: s[1, 1] * s[0, 2])
    spins, acc = np.ones((3, 3), np.int8), []
    for s in range(20000):
        spins, _ = flattened_sw_step(lat, spins, chain_rng(2, 0, s))
        acc.append(spins[1, 1] * spins[0, 2])
    se = np.std(acc) / math.sqrt(len(acc))
    assert abs(np.mean(acc) - exact) < 5 * se
    with pytest.raises(ParameterError):
        flattened_sw_step(lat, np.ones((2, 3)), chain_rng(0, 0, 0))


def test_run_flattened_small_box():
    lat = couplings_lattice(0.3, 0.8, 2, 3, "free")
    exact = enumerate_flattened(lat).expect(lambda s: s[0, 0] * s[1, 2])
    est = run_flattened(lat, SamplerSettings(8000, 100), [lambda st: st.spins[0, 0] * st.spins[1, 2]])
    e = next(iter(est.values()))
    assert abs(e.mean - exact) < 5 * e.stderr + 2e-3


def test_fkg_plus_dominates_free():
    lat_p = couplings_lattice(0.3, 0.5, 3, 3, "plus")
    lat_f = couplings_lattice(0.3, 0.5, 3, 3, "free")
    for f in (lambda s: s[1, 1] * s[1, 2], lambda s: s[0, 0] * s[2, 2]):
        assert enumerate_flattened(lat_p).expect(f) >= enumerate_flattened(lat_f).expect(f) - 1e-14
    # positive association of increasing events under plus
    d = enumerate_flattened(lat_p)
    pa = d.expect(lambda s: s[0, 0] > 0)
    pb = d.expect(lambda s: s[2, 1] > 0)
    pab = d.expect(lambda s: s[0, 0] > 0 and s[2, 1] > 0)
    assert pab >= pa * pb - 1e-14


def test_plus_symmetry_of_free_bc():
    lat = couplings_lattice(0.3, 0.5, 2, 3, "free")
    d = enumerate_flattened(lat)
    assert abs(d.expect(lambda s: s[0, 1])) < 1e-14
