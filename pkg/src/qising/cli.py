"""Command line runner: sample, ladder, predict, special, correlator, verify.

Every subcommand writes CSV (header row, 12 significant digits, LF line
endings) followed by a metadata comment line.  Options can come from a flat
key=value file given with --config; explicit flags override it.
"""
import argparse
import csv
import io
import math
import sys
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .lattice import ParameterError, build_domain, flatten, make_params

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    subcommand: str
    delta: float = 0.5
    tau: float = 0.5
    theta: float = 1.0
    width: int = 8
    height: float = 8.0
    bc: str = "plus"
    sweeps: int = 2000
    burnin: int = 200
    chains: int = 1
    seed: int = 1
    thinning: int = 1
    epsilon: list = field(default_factory=list)
    output: str = None

    def params(self):
        return make_params(self.delta, self.tau, self.theta)

    def domain(self):
        return build_domain(self.width, self.height, self.bc, self.delta)


# ---------------------------------------------------------------------------
# output

def fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return format(x, ".12g")
    return "" if x is None else str(x)


def write_csv(header, rows, meta, out=None):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt(v) for v in r])
    buf.write("# qising v%s %s\n" % (__version__, " ".join(f"{k}={fmt(v)}" for k, v in meta.items())))
    text = buf.getvalue()
    if out:
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return text


def _pair(s, n=2):
    try:
        vals = [float(v) for v in s.split(",")]
    except ValueError as exc:
        raise ConfigError(f"cannot parse {s!r} as numbers") from exc
    if len(vals) != n:
        raise ConfigError(f"expected {n} comma-separated numbers, got {s!r}")
    return vals


def read_config(path):
    """Flat key=value file; '#' starts a comment."""
    out = {}
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    for n, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{n}: expected key=value")
        k, v = (s.strip() for s in line.split("=", 1))
        out[k.replace("-", "_")] = v
    return out


# ---------------------------------------------------------------------------
# subcommands

def _observables(specs, lattice=None):
    from .observables import Constant, EnergyPair, FlatSpinProduct, SpinProduct
    obs = []
    for s in specs:
        kind, _, arg = s.partition(":")
        nums = [float(v) for v in arg.split(",")] if arg else []
        improved = kind.endswith("+")
        kind = kind.rstrip("+")
        if kind == "one":
            obs.append(Constant())
            continue
        if len(nums) % 2:
            raise ConfigError(f"observable {s!r} needs (col, y) pairs")
        pts = [(int(nums[i]), nums[i + 1]) for i in range(0, len(nums), 2)]
        if kind == "energy":
            if len(pts) != 1:
                raise ConfigError("energy observable takes one point")
            pts = [pts[0], (pts[0][0] + 1, pts[0][1])]
            name = f"energy[{pts[0][0]},{pts[0][1]:g}]"
        elif kind == "spin":
            name = None
        else:
            raise ConfigError(f"unknown observable kind {kind!r}")
        if lattice is None:
            obs.append(EnergyPair(pts[0], improved=improved) if kind == "energy"
                       else SpinProduct(pts, improved=improved))
        else:
            obs.append(FlatSpinProduct(lattice, pts, name=name, improved=improved))
    return obs


def cmd_sample(cfg, args):
    from .sampler import SamplerSettings, run_chain, run_flattened
    params, dom = cfg.params(), cfg.domain()
    st = SamplerSettings(cfg.sweeps, cfg.burnin, cfg.chains, cfg.seed, cfg.thinning)
    specs = args.observable or [f"spin:{cfg.width // 2},{cfg.height / 2}"]
    rows = []
    if cfg.epsilon:
        for eps in cfg.epsilon:
            lat = flatten(dom, params, eps)
            tab = run_flattened(lat, st, _observables(specs, lat), n_batches=args.batches)
            rows += [(f"{k}@eps={fmt(eps)}", *rest) for k, *rest in tab.rows()]
    else:
        tab = run_chain(dom, params, st, _observables(specs), n_batches=args.batches)
        rows = tab.rows()
    return ["observable", "mean", "stderr", "tau_int", "n"], rows, None


def cmd_ladder(cfg, args):
    from .opuc import critical_ladder, decay_rate, spontaneous_magnetization, subcritical_ladder
    th, ts = cfg.theta, args.theta_star if args.theta_star is not None else 2 * cfg.tau
    if args.swap_regime:
        th, ts = ts, th
    n = args.n
    header = ["n", "D_n", "Dstar_n", "L_n", "Lstar_n"]
    if th == ts:
        rep = critical_ladder(max(n, 1))
        rows = [(k, rep.D[k], rep.D[k], rep.L[k], rep.L[k]) for k in range(n + 1)]
        status = "ok" if rep.consistent else "WARN"
        rows.append((f"critical_check_{status}", rep.max_rel_dev, "", "", ""))
        return header, rows, None
    lad = subcritical_ladder(th, ts, n)
    rows = [(k, lad.D[k], lad.Dstar[k], lad.L[k], lad.Lstar[k]) for k in range(n + 1)]
    try:
        m = spontaneous_magnetization(th, ts)
    except ValueError:
        m = 0.0
    rows.append(("magnetization", m, "", "", ""))
    rows.append(("xi", 1 / decay_rate(th, ts), "", "", ""))
    return header, rows, None


def cmd_predict(cfg, args):
    from . import continuum as ct
    pts = [_pair(p) for p in args.point] or [[0.0, 1.0]]
    what, geo = args.what, args.geometry
    k = args.k
    if geo == "box":
        if what != "metric":
            raise ConfigError("box geometry supports --what metric")
        vals = [ct.box_metric(x, y, cfg.width, cfg.height) for x, y in pts]
        return ["x", "y", "metric"], [(x, y, v) for (x, y), v in zip(pts, vals)], None
    if what in ("energy", "metric"):
        rows = []
        for x, y in pts:
            z = complex(x, y)
            v = ct.predict_energy(geo, z, cfg.bc, k) if what == "energy" else ct.hyperbolic_metric(geo, z, k)
            rows.append((x, y, v))
        return ["x", "y", what], rows, None
    if geo != "halfplane" and what != "spin-ratio":
        raise ConfigError(f"--what {what} is available in the half-plane only")
    if what == "multi-energy":
        v = ct.predict_multi_energy_halfplane([complex(x, y) for x, y in pts])
    elif what == "spin":
        v = ct.predict_spins_halfplane(pts, cfg.bc, args.form)
    elif what == "spin-ratio":
        if k is None:
            raise ConfigError("--what spin-ratio needs --k")
        v = ct.predict_rectangle_spin_ratio(pts, k)
    else:
        raise ConfigError(f"unknown prediction {what!r}")
    return ["points", what], [(";".join(f"{fmt(x)},{fmt(y)}" for x, y in pts), v)], None


def cmd_special(cfg, args):
    from . import continuum as ct
    if args.what == "K":
        K, Kp = ct.elliptic_K(args.k)
        return ["k", "K", "Kp"], [(args.k, K, Kp)], None
    if args.what == "jacobi":
        z = complex(*_pair(args.z))
        sn, cn, dn = ct.jacobi(z, args.k)
        rows = [(name, v.real, v.imag) for name, v in (("sn", sn), ("cn", cn), ("dn", dn))]
        return ["function", "re", "im"], rows, None
    if args.what == "modulus":
        return ["aspect", "k"], [(args.aspect, ct.modulus_for_aspect(args.aspect))], None
    if args.what == "pfaffian":
        vals = [float(v) for v in args.matrix.split(",")]
        n = int(round((1 + math.sqrt(1 + 8 * len(vals))) / 2))
        if n * (n - 1) // 2 != len(vals):
            raise ConfigError("--matrix must list the strict upper triangle")
        A = ct.skew_from_upper(n, vals)
        pf = ct.pfaffian(A)
        return ["n", "pfaffian", "det"], [(n, pf, float(np.linalg.det(A)))], None
    raise ConfigError(f"unknown special function {args.what!r}")


def cmd_correlator(cfg, args):
    from . import shol
    d = args.delta_lattice
    pts = [complex(*_pair(p)) for p in args.point]
    if not pts:
        raise ConfigError("give at least one --point")
    rows = []
    if args.kind == "energy":
        a = complex(*_pair(args.source))
        F = lambda c: shol.fullplane_energy_correlator(a, c, d)
        ref = lambda z: np.conj(shol.eta(a, d)) * d / (math.pi * (z - a))
    else:
        u = complex(*_pair(args.source))
        F = lambda c: shol.fullplane_spin_correlator(u, c, d)
        pref = (np.exp(-1j * math.pi / 4) if shol.medial_kind(u, d) == "primal"
                else np.exp(1j * math.pi / 4))
        ref = lambda z: pref * math.sqrt(d) / np.sqrt(math.pi * (z - u))
    for c in pts:
        g = F(c)
        e = shol.eta(c, d)
        par = float((g / e).imag / max(abs(g), 1e-300))
        try:
            res = abs(shol.dbar_residual(F, c, d))
        except ValueError:
            res = float("nan")
        rows.append((c.real, c.imag, g.real, g.imag, abs(g), par, res))
    return ["x", "y", "re", "im", "abs", "parallel_defect", "dbar_residual"], rows, None


def cmd_verify(cfg, args):
    from .verify import run_checks
    results = run_checks(quick=not args.full, mc=args.mc)
    rows = [(r.name, r.status, r.value, r.detail) for r in results]
    failed = any(r.status == "FAIL" for r in results)
    return ["check", "status", "value", "detail"], rows, EXIT_FAIL if failed else EXIT_OK


COMMANDS = {
    "sample": cmd_sample, "ladder": cmd_ladder, "predict": cmd_predict,
    "special": cmd_special, "correlator": cmd_correlator, "verify": cmd_verify,
}


# ---------------------------------------------------------------------------
# parsing

def _common(p):
    p.add_argument("--config", help="key=value file; flags override its entries")
    p.add_argument("--delta", type=float)
    p.add_argument("--tau", type=float)
    p.add_argument("--theta", type=float)
    p.add_argument("--width", type=int)
    p.add_argument("--height", type=float)
    p.add_argument("--bc", choices=["plus", "free", "periodic"])
    p.add_argument("--seed", type=int)
    p.add_argument("--output", "-o")


def build_parser():
    ap = argparse.ArgumentParser(prog="qising", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"qising {__version__}")
    sub = ap.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("sample", help="Monte Carlo estimates")
    _common(p)
    p.add_argument("--sweeps", type=int)
    p.add_argument("--burnin", type=int)
    p.add_argument("--chains", type=int)
    p.add_argument("--thinning", type=int)
    p.add_argument("--epsilon", help="comma-separated mesh list: run the flattened lattice")
    p.add_argument("--observable", action="append",
                   help="spin:c,y[,c,y...] | energy:c,y | one; suffix + for the FK estimator")
    p.add_argument("--batches", type=int, default=20)

    p = sub.add_parser("ladder", help="correlation ladder D_n, D*_n, L_n, L*_n")
    _common(p)
    p.add_argument("--theta-star", type=float)
    p.add_argument("-n", type=int, default=10)
    p.add_argument("--swap-regime", action="store_true",
                   help="exchange theta and theta* before evaluating")

    p = sub.add_parser("predict", help="continuum predictions")
    _common(p)
    p.add_argument("--geometry", choices=["halfplane", "disk", "rectangle", "box"], default="halfplane")
    p.add_argument("--point", action="append", default=[], help="x,y (repeatable)")
    p.add_argument("--what", default="energy",
                   choices=["energy", "metric", "multi-energy", "spin", "spin-ratio"])
    p.add_argument("--k", type=float)
    p.add_argument("--form", choices=["general", "particular"], default="general")

    p = sub.add_parser("special", help="elliptic functions and Pfaffians")
    _common(p)
    p.add_argument("--what", choices=["K", "jacobi", "modulus", "pfaffian"], default="K")
    p.add_argument("--k", type=float, default=2 ** -0.5)
    p.add_argument("--z", default="0.3,0.2")
    p.add_argument("--aspect", type=float, default=1.0)
    p.add_argument("--matrix", default="1,2,3,4,5,6")

    p = sub.add_parser("correlator", help="full-plane lattice correlators")
    _common(p)
    p.add_argument("--kind", choices=["energy", "spin"], default="energy")
    p.add_argument("--source", default="0.5,0", help="corner a (energy) or medial u (spin)")
    p.add_argument("--point", action="append", default=[])
    p.add_argument("--delta-lattice", type=float, default=1.0)

    p = sub.add_parser("verify", help="invariant suite")
    _common(p)
    p.add_argument("--full", action="store_true", help="include the slower checks")
    p.add_argument("--mc", action="store_true", help="identify the regime convention by Monte Carlo")
    return ap


_CFG_KEYS = {"delta", "tau", "theta", "width", "height", "bc", "sweeps", "burnin",
             "chains", "seed", "thinning", "epsilon", "output"}


def resolve(args):
    """Merge --config entries and flags into a validated RunConfig."""
    base = RunConfig(args.subcommand)
    file_cfg = read_config(args.config) if getattr(args, "config", None) else {}
    for k in file_cfg:
        if k not in _CFG_KEYS:
            raise ConfigError(f"unknown config key {k!r}")
    for k in _CFG_KEYS:
        raw = getattr(args, k, None)
        if raw is None:
            raw = file_cfg.get(k)
        if raw is None:
            continue
        typ = type(getattr(base, k)) if getattr(base, k) is not None else str
        try:
            if k == "epsilon":
                val = [float(v) for v in str(raw).split(",") if v.strip()] if raw != "" else []
            elif typ is list:
                val = raw
            else:
                val = typ(raw)
        except ValueError as exc:
            raise ConfigError(f"bad value for {k}: {raw!r}") from exc
        setattr(base, k, val)
    base.params()
    base.domain()
    return base


def run(argv=None):
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    try:
        cfg = resolve(args)
        header, rows, code = COMMANDS[args.subcommand](cfg, args)
    except (ConfigError, ParameterError) as exc:
        print(f"qising: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        # domain and regime errors of the numerical modules
        print(f"qising: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    meta = {"seed": cfg.seed,
            "params": f"delta={fmt(cfg.delta)};tau={fmt(cfg.tau)};theta={fmt(cfg.theta)}"}
    if args.subcommand == "sample":
        meta["domain"] = f"{cfg.width}x{fmt(cfg.height)};bc={cfg.bc}"
        meta["sweeps"] = f"{cfg.sweeps};burnin={cfg.burnin};chains={cfg.chains};thinning={cfg.thinning}"
    write_csv(header, rows, meta, cfg.output)
    return EXIT_OK if code is None else code


def main():
    sys.exit(run())
