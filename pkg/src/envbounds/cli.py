"""Command-line interface: ``envbounds {bound,isvar,compare,mc}``.

Settings come from an optional JSON file (``--config``) with flags taking
precedence. Recognized keys::

    {
      "target": {"kind": "logreg", "seed": 0, "n_data": 10, "w_range": [-2, 2],
                 "prior_std": 1.2, "scale": 1.0}
             |  {"kind": "logreg", "labels": [...], "features": [...], "prior_std": 1.2}
             |  {"kind": "table1", "components": [{"name": "quadratic", "delta": 1.0}]},
      "k": 2, "tau": 1e-4, "eps": 1e-6, "ell": 10000, "t1": 1.0, "absolute": false,
      "proposal": {"mean": 2.0, "theta": 1.5, "thetas": [1.0, 1.5, 2.0]},
      "is": {"n_samples": 20, "n_runs": 1000},
      "seed": 0
    }

``k`` defaults to 0 for ``bound`` and to 2 (the moment ``x**2``) elsewhere.

Exit codes: 0 success, 1 configuration error, 2 ill-posed target,
3 candidate pool exhausted before convergence.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from contextlib import contextmanager

from .baseline import evans_compound, integrand_from_density
from .bounds import POOL_EXHAUSTED, refine, refinement_compact, write_history_csv
from .density import (
    LogisticRegressionConfig,
    ProposalConfig,
    make_logreg_target,
    make_squared_ratio_target,
    make_table1,
    random_logreg_config,
    sum_densities,
)
from .errors import EnvBoundsError, IllPosedRatio
from .gaussmath import REAL_LINE
from .isvar import (
    ISConfig,
    bootstrap_variance_se,
    empirical_variance_mse,
    is_estimates,
    theta_sweep,
    variance_bounds,
    write_sweep_csv,
)
from .oracle import integrate

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_ILL_POSED = 2
EXIT_POOL = 3

COMPARE_HEADER = ["method", "budget", "lower", "upper", "abs_err", "rel_err"]
DEFAULT_BUDGETS = (3, 50, 100)


class ConfigError(Exception):
    pass


DEFAULTS = {
    "target": {"kind": "logreg"},
    "tau": 1e-4,
    "eps": 1e-6,
    "ell": 10_000,
    "t1": 1.0,
    "absolute": False,
    "proposal": {"mean": 2.0, "theta": 1.5},
    "is": {"n_samples": 20, "n_runs": 1000},
    "seed": 0,
}


def _merge(base: dict, extra: dict) -> dict:
    out = dict(base)
    for key, val in extra.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], val)
        else:
            out[key] = val
    return out


def load_config(args) -> dict:
    cfg = dict(DEFAULTS)
    if args.config:
        try:
            with open(args.config) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        cfg = _merge(cfg, data)
    for key in ("k", "tau", "eps", "ell", "t1", "seed"):
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    if getattr(args, "absolute", False):
        cfg["absolute"] = True
    if getattr(args, "theta", None) is not None:
        cfg["proposal"] = _merge(cfg["proposal"], {"theta": args.theta})
    if getattr(args, "thetas", None):
        cfg["proposal"] = _merge(cfg["proposal"], {"thetas": args.thetas})
    if getattr(args, "mu_q", None) is not None:
        cfg["proposal"] = _merge(cfg["proposal"], {"mean": args.mu_q})
    for key in ("n_samples", "n_runs"):
        val = getattr(args, key, None)
        if val is not None:
            cfg["is"] = _merge(cfg["is"], {key: val})
    if getattr(args, "target", None):
        cfg["target"] = _target_from_flag(args.target, args.delta)
    _validate(cfg)
    return cfg


def _target_from_flag(name: str, delta) -> dict:
    if name == "logreg":
        return {"kind": "logreg"}
    parts = [p for p in name.split("+") if p]
    comps = [{"name": p, "delta": 1.0 if delta is None else delta} for p in parts]
    return {"kind": "table1", "components": comps}


def _validate(cfg: dict) -> None:
    if "k" in cfg and (int(cfg["k"]) != cfg["k"] or cfg["k"] < 0):
        raise ConfigError("k must be a nonnegative integer")
    if not cfg["tau"] > 0:
        raise ConfigError("tau must be positive")
    if not 0 < cfg["eps"] < 1:
        raise ConfigError("eps must lie in (0, 1)")
    if int(cfg["ell"]) != cfg["ell"] or cfg["ell"] < 1:
        raise ConfigError("ell must be a positive integer")
    if not math.isfinite(cfg["t1"]):
        raise ConfigError("t1 must be finite")
    if int(cfg["seed"]) != cfg["seed"] or not 0 <= cfg["seed"] < 2**64:
        raise ConfigError("seed must be an unsigned 64-bit integer")
    if not cfg["proposal"].get("theta", 1.0) > 0:
        raise ConfigError("theta must be positive")
    if any(not th > 0 for th in cfg["proposal"].get("thetas", [])):
        raise ConfigError("every theta must be positive")


def build_target(cfg: dict):
    spec = cfg["target"]
    kind = spec.get("kind", "logreg")
    try:
        if kind == "logreg":
            if "labels" in spec:
                lr = LogisticRegressionConfig(
                    spec["labels"], spec["features"], spec.get("prior_std", 1.2),
                    spec.get("scale", 1.0),
                )
            else:
                n_data = spec.get("n_data", 10)
                prior = spec.get("prior_std", 1.2)
                lr = random_logreg_config(
                    int(spec.get("seed", cfg["seed"])),
                    n_data=tuple(n_data) if isinstance(n_data, list) else n_data,
                    w_range=tuple(spec.get("w_range", (-2.0, 2.0))),
                    prior_std=tuple(prior) if isinstance(prior, list) else prior,
                    scale=spec.get("scale", 1.0),
                )
            return make_logreg_target(lr)
        if kind == "table1":
            comps = spec.get("components") or [{"name": "quadratic"}]
            parts = [make_table1(c["name"], c.get("delta", 1.0)) for c in comps]
            return parts[0] if len(parts) == 1 else sum_densities(parts)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid target: {exc}") from exc
    raise ConfigError(f"unknown target kind {kind!r}")


def _refine_kwargs(cfg: dict) -> dict:
    return dict(tau=cfg["tau"], t1=cfg["t1"], eps=cfg["eps"], ell=int(cfg["ell"]),
                relative=not cfg["absolute"])


def _proposal(cfg: dict, theta=None) -> ProposalConfig:
    prop = cfg["proposal"]
    return ProposalConfig(prop.get("mean", 2.0), prop.get("theta", 1.5) if theta is None else theta)


@contextmanager
def _output(path):
    if path is None or path == "-":
        yield sys.stdout
    else:
        with open(path, "w", newline="") as fh:
            yield fh


def cmd_bound(args, cfg) -> int:
    target = build_target(cfg)
    if args.ratio:
        target = make_squared_ratio_target(target, _proposal(cfg))
    report = refine(target, int(cfg.get("k", 0)), **_refine_kwargs(cfg))
    with _output(args.out) as fh:
        fh.write(f"lower {report.lower!r}\n")
        fh.write(f"upper {report.upper!r}\n")
        fh.write(f"gap {report.gap!r}\n")
        fh.write(f"n_stop {report.n_stop}\n")
        fh.write(f"status {report.status}\n")
    if args.history:
        write_history_csv(report, args.history)
    if report.status == POOL_EXHAUSTED:
        return EXIT_POOL
    return EXIT_OK


def _thetas(cfg: dict) -> list:
    return list(cfg["proposal"].get("thetas") or [cfg["proposal"].get("theta", 1.5)])


def cmd_isvar(args, cfg) -> int:
    target = build_target(cfg)
    is_cfg = ISConfig(_proposal(cfg), cfg["is"]["n_samples"], max(2, cfg["is"]["n_runs"]),
                      int(cfg["seed"]), int(cfg.get("k", 2)))
    rows = theta_sweep(target, _thetas(cfg), is_cfg, mc=args.mc, jobs=args.jobs,
                       normalized=not args.unnormalized, **_refine_kwargs(cfg))
    for row in rows:
        if not row.ok:
            print(f"theta={row.theta!r}: {row.error}", file=sys.stderr)
    with _output(args.out) as fh:
        written = write_sweep_csv(rows, fh)
    return EXIT_OK if written else EXIT_ILL_POSED


def compare_rows(target, ks, budgets, cfg) -> list:
    """Rows of the comparison table (oracle, ours, Evans d=0 and d=1)."""
    kw = _refine_kwargs(cfg)
    domain = refinement_compact(target, kw["t1"], kw["eps"])
    rows = []
    for k in ks:
        exact = integrate(lambda x, k=k: x**k * target.pi(x), REAL_LINE).value
        rows.append((f"oracle:k{k}", "", exact, exact, 0.0, 0.0))

        def err_row(name, budget, lo, hi):
            abs_err = abs(0.5 * (lo + hi) - exact)
            rows.append((name, budget, lo, hi, abs_err, abs_err / abs(exact)))

        f = integrand_from_density(target, k)
        for budget in budgets:
            rep = refine(target, k, **dict(kw, tau=0.0), max_points=budget)
            err_row(f"ours:k{k}", budget, rep.lower, rep.upper)
            for d in (0, 1):
                ev = evans_compound(f, domain, budget, d)
                err_row(f"evans_d{d}:k{k}", budget, ev.lower, ev.upper)
    return rows


def cmd_compare(args, cfg) -> int:
    target = build_target(cfg)
    ks = sorted({0, int(cfg.get("k", 2))})
    rows = compare_rows(target, ks, args.budgets or list(DEFAULT_BUDGETS), cfg)
    with _output(args.out) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(COMPARE_HEADER)
        for name, budget, lo, hi, ae, re_ in rows:
            w.writerow([name, budget, repr(float(lo)), repr(float(hi)), repr(float(ae)),
                        repr(float(re_))])
    return EXIT_OK


def cmd_mc(args, cfg) -> int:
    target = build_target(cfg)
    degree = int(cfg.get("k", 2))
    proposal = _proposal(cfg)
    is_cfg = ISConfig(proposal, cfg["is"]["n_samples"], max(2, cfg["is"]["n_runs"]),
                      int(cfg["seed"]), degree)
    kw = _refine_kwargs(cfg)
    rep_z = refine(target, 0, **kw)
    rep_i = rep_z if degree == 0 else refine(target, degree, **kw)
    z_ref = rep_z.midpoint
    est = is_estimates(target, is_cfg, z_ref)
    v_e, mse = empirical_variance_mse(target, is_cfg, rep_i.midpoint / z_ref, z_ref, est)
    with _output(args.out) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["theta", "n_samples", "n_runs", "mean", "V_empirical", "V_empirical_se",
                    "mse", "V_lower", "V_upper"])
        try:
            rep_j = refine(make_squared_ratio_target(target, proposal), 2 * degree, **kw)
            vb = variance_bounds((rep_i, rep_z, rep_j), is_cfg.n_samples)
            v_lo, v_hi = repr(vb.v_lower), repr(vb.v_upper)
        except IllPosedRatio as exc:
            print(f"variance bounds unavailable: {exc}", file=sys.stderr)
            v_lo = v_hi = ""
        w.writerow([repr(proposal.theta), is_cfg.n_samples, is_cfg.n_runs,
                    repr(float(est.mean())), repr(v_e),
                    repr(bootstrap_variance_se(est, seed=int(cfg["seed"]))), repr(mse),
                    v_lo, v_hi])
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON configuration file")
    common.add_argument("--tau", type=float, help="stopping precision (relative by default)")
    common.add_argument("--absolute", action="store_true", help="treat tau as an absolute gap")
    common.add_argument("--ell", type=int, help="dyadic pool size parameter")
    common.add_argument("--eps", type=float, help="mass left outside the compact")
    common.add_argument("--t1", type=float, help="initial tangency point")
    common.add_argument("--seed", type=int, help="base seed for the dataset and Monte Carlo")
    common.add_argument("--out", help="output file (default stdout)")
    common.add_argument("--history", help="write per-iteration history CSV here")
    common.add_argument("--jobs", type=int, default=1, help="parallel sweep workers")
    common.add_argument("--k", type=int, help="monomial degree")
    common.add_argument("--target", help="'logreg' or named potentials joined by '+', "
                        "e.g. quadratic+huber")
    common.add_argument("--delta", type=float, help="scale parameter of the named potentials")
    common.add_argument("--mu-q", dest="mu_q", type=float, help="proposal mean")
    common.add_argument("--theta", type=float, help="proposal variance")
    common.add_argument("--n-samples", dest="n_samples", type=int, help="IS sample size N")
    common.add_argument("--n-runs", dest="n_runs", type=int, help="number of IS runs")

    parser = argparse.ArgumentParser(
        prog="envbounds", description="Certified bounds on one-dimensional moment integrals.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("bound", parents=[common], help="bound int x^k exp(-phi)")
    p.add_argument("--ratio", action="store_true", help="bound the p^2/q target instead")
    p.set_defaults(func=cmd_bound)

    p = sub.add_parser("isvar", parents=[common], help="variance bounds over a theta sweep")
    p.add_argument("--thetas", type=float, nargs="+", help="proposal variances to sweep")
    p.add_argument("--mc", action="store_true", help="add the empirical variance column")
    p.add_argument("--unnormalized", action="store_true",
                   help="subtract I^2/N instead of (I/Z)^2/N")
    p.set_defaults(func=cmd_isvar)

    p = sub.add_parser("compare", parents=[common], help="compare against Evans bounds")
    p.add_argument("--budgets", type=int, nargs="+", help="point budgets (default 3 50 100)")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("mc", parents=[common], help="Monte Carlo variance and MSE")
    p.set_defaults(func=cmd_mc)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args)
        return args.func(args, cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except IllPosedRatio as exc:
        print(f"ill-posed target: {exc}", file=sys.stderr)
        return EXIT_ILL_POSED
    except (ValueError, EnvBoundsError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
