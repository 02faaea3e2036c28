"""Command-line interface.

Every run is determined by its arguments; absent ``--seed`` means seed 0.
Output goes to ``--out`` (written atomically) or to stdout.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field
from fractions import Fraction

from .errors import DomainError, HorizonError, InfeasibleRunError, ParameterError
from .free_energy import ModelParams, ScalingPoint, free_energy, renewal_moments
from .io import atomic_write_text, fmt, json_ready
from .regimes import check_feasible, classify, predicted_orders, run_experiment
from .renewal import build_renewal, horizon_for_tail, regime_profile_report
from .srw import INFINITY, verify_hitting_bounds

EXIT_PARAM = 2


@dataclass
class RunConfig:
    """Command name plus its options; round-trips through JSON."""

    command: str
    options: dict = field(default_factory=dict)

    def to_json(self):
        return json.dumps({"command": self.command, "options": _plain(self.options)},
                          sort_keys=True, indent=2)

    @classmethod
    def from_json(cls, text):
        data = json.loads(text)
        return cls(data["command"], dict(data.get("options", {})))


def _plain(options):
    out = {}
    for k, v in options.items():
        if isinstance(v, Fraction):
            v = str(v)
        out[k] = v
    return out


def exponent(text):
    """Parse an exponent exactly (``0.45`` -> 9/20) so border ties are exact."""
    try:
        value = Fraction(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from exc
    return value


def int_list(text):
    out = []
    for part in text.split(","):
        part = part.strip()
        if part.lower() in ("inf", "infinity"):
            out.append(INFINITY)
        else:
            out.append(int(part))
    return out


def _common(parser):
    parser.add_argument("--seed", type=int, default=0, help="64-bit seed (default 0)")
    parser.add_argument("--threads", type=int, default=None,
                        help="worker cap (default: $POLYPIN_THREADS or 1)")
    parser.add_argument("--out", default=None, help="output file (default stdout)")
    parser.add_argument("--format", choices=("json", "csv"), default=None, dest="fmt")
    parser.add_argument("--config", default=None, help="JSON RunConfig supplying defaults")


def _point_args(parser, need_n=True):
    parser.add_argument("--a", type=exponent, required=True)
    parser.add_argument("--b", type=exponent, required=True)
    parser.add_argument("--beta", type=float, default=1.0)
    parser.add_argument("--n", type=int, required=need_n, default=None)


def build_parser(cfg=None):
    parser = argparse.ArgumentParser(prog="polypin",
                                     description="Directed polymer with repulsive interfaces.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("phase", help="classify (a, b) and print predicted orders")
    _point_args(p, need_n=False)
    _common(p)
    _apply_config(p, p.prog.split()[-1], cfg)

    p = sub.add_parser("free-energy", help="free energy and tilted moments")
    p.add_argument("--t", type=int, required=True)
    p.add_argument("--delta", type=float, required=True)
    _common(p)
    _apply_config(p, p.prog.split()[-1], cfg)

    p = sub.add_parser("renewal", help="renewal law, mass function and profile report")
    p.add_argument("--t", type=int, required=True)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--horizon", type=int, default=None,
                   help="even horizon (default: geometric tail below --tail-tol)")
    p.add_argument("--tail-tol", type=float, default=1e-9)
    p.add_argument("--dump", action="store_true", help="emit the n,f,u table as CSV")
    _common(p)
    _apply_config(p, p.prog.split()[-1], cfg)

    p = sub.add_parser("sample", help="exact polymer samples as CSV")
    _point_args(p)
    p.add_argument("--samples", type=int, required=True)
    _common(p)
    _apply_config(p, p.prog.split()[-1], cfg)

    p = sub.add_parser("experiment", help="desk-scale regime experiment")
    _point_args(p)
    p.add_argument("--samples", type=int, required=True)
    p.add_argument("--criteria", default=None, help="comma-separated tags, e.g. C6,C7")
    _common(p)
    _apply_config(p, p.prog.split()[-1], cfg)

    p = sub.add_parser("verify-bounds", help="k-fold hitting bound table")
    p.add_argument("--t", type=int_list, required=True, help="comma-separated T values")
    p.add_argument("--k-max", type=int, required=True)
    p.add_argument("--horizon-inf", type=int, default=None)
    _common(p)
    _apply_config(p, p.prog.split()[-1], cfg)
    return parser


def _apply_config(parser, name, cfg):
    if cfg is None or cfg.command != name:
        return
    defaults = {}
    for k, v in cfg.options.items():
        if k in ("a", "b") and isinstance(v, str):
            v = Fraction(v)
        defaults[k] = v
    parser.set_defaults(**defaults)
    for action in parser._actions:
        if action.dest in defaults:
            action.required = False


def parse(argv):
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config", default=None)
    known, _rest = pre.parse_known_args(argv)
    cfg = None
    if known.config:
        with open(known.config, encoding="utf-8") as fh:
            cfg = RunConfig.from_json(fh.read())
    args = build_parser(cfg).parse_args(argv)
    if cfg is not None and cfg.command != args.command:
        raise ParameterError(f"config is for {cfg.command!r}, not {args.command!r}")
    return args


def config_of(args):
    skip = {"command", "config"}
    return RunConfig(args.command, {k: v for k, v in vars(args).items() if k not in skip})


def _emit(args, text):
    if args.out:
        atomic_write_text(args.out, text)
    else:
        sys.stdout.write(text)


def _json(obj):
    return json.dumps(json_ready(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"


def _csv(header, rows):
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_cell(v) for v in row))
    return "\n".join(lines) + "\n"


def _cell(v):
    if v is None:
        return ""
    return fmt(v) if isinstance(v, float) else str(v)


def _point(args):
    return ScalingPoint(args.a, args.b, args.beta, args.n)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_phase(args):
    cls = classify(args.a, args.b)
    out = {"command": "phase", "a": float(args.a), "b": float(args.b),
           "label": cls.label.value, "subcase": cls.subcase}
    if args.n is not None:
        pt = _point(args)
        pred = predicted_orders(pt)
        out.update({"beta": args.beta, "N": pt.N, "T": pt.T_N, "delta": pt.delta_N,
                    "endpoint_scale": pred.endpoint_scale,
                    "last_contact_scale": pred.last_contact_scale,
                    "contacts_scale": pred.contacts_scale,
                    "contacts_renewal": pred.contacts_renewal,
                    "constant": pred.constant})
    if args.fmt == "csv":
        return _csv(list(out), [list(out.values())])
    return _json(out)


def cmd_free_energy(args):
    params = ModelParams(args.t, args.delta)
    fe = free_energy(params)
    out = {"command": "free-energy", "T": params.T, "delta": params.delta,
           "phi": fe.phi, "gamma": fe.gamma, "g": fe.g, "residual": fe.residual}
    if params.delta > 0:
        mo = renewal_moments(params)
        out.update({"mean_tau": mo.mean_tau, "second_tau": mo.second_tau,
                    "switch_prob": mo.switch_prob})
    if args.fmt == "csv":
        return _csv(list(out), [list(out.values())])
    return _json(out)


def cmd_renewal(args):
    params = ModelParams(args.t, args.delta)
    horizon = args.horizon if args.horizon is not None else horizon_for_tail(params, args.tail_tol)
    model = build_renewal(params, horizon, tail_tol=args.tail_tol if args.horizon is None else None)
    if args.dump or args.fmt == "csv":
        rows = [(2 * i, float(model.f[i]), float(model.u[i])) for i in range(model.f.shape[0])]
        return _csv(("n", "f", "u"), rows)
    out = {"command": "renewal", "T": params.T, "delta": params.delta, "phi": model.phi,
           "horizon": model.horizon, "normalization_defect": model.normalization_defect,
           "tail_bound": model.tail_bound, "support": 2 * model.support}
    if params.delta > 0:
        rep = regime_profile_report(model)
        out["profile"] = {
            "kind": rep.kind, "mean_tau": rep.mean_tau, "stationary_n": rep.stationary_n,
            "stationary_ratio": rep.stationary_ratio,
            "ranges": [{"name": r.name, "lo": r.lo, "hi": r.hi, "sup": r.sup, "inf": r.inf,
                        "coverage": r.coverage} for r in rep.ranges],
        }
    return _json(out)


def cmd_sample(args):
    from .polymer import build_instance, sample_polymer, write_samples_csv

    pt = _point(args)
    check_feasible(pt, args.samples)
    inst = build_instance(pt.params(), pt.N)
    batch = sample_polymer(inst, args.samples, seed=args.seed, threads=args.threads)
    if args.fmt == "json":
        return _json({"command": "sample", "N": pt.N, "T": pt.T_N, "delta": pt.delta_N,
                      "seed": args.seed, "S_N": batch.S_N.tolist(),
                      "tau_last": batch.tau_last.tolist(), "L": batch.L.tolist(),
                      "m": batch.m.tolist()})
    if args.out:
        write_samples_csv(batch, args.out)
        return None
    rows = [(i, int(batch.S_N[i]), int(batch.tau_last[i]), int(batch.L[i]), int(batch.m[i]),
             int(batch.m[i] > 0)) for i in range(len(batch))]
    return _csv(("sample_id", "S_N", "tau_last", "L", "m", "visited_other"), rows)


def cmd_experiment(args):
    pt = _point(args)
    criteria = args.criteria.split(",") if args.criteria else None
    report = run_experiment(pt, args.samples, seed=args.seed, criteria=criteria,
                            threads=args.threads)
    if args.fmt == "csv":
        rows = [(c.name, c.statistic, c.threshold, c.verdict) for c in report.checks]
        return _csv(("name", "statistic", "threshold", "verdict"), rows)
    out = report.to_dict()
    out["command"] = "experiment"
    return _json(out)


def cmd_verify_bounds(args):
    rep = verify_hitting_bounds(args.t, args.k_max, horizon_inf=args.horizon_inf)
    rows = rep.as_rows()
    if args.fmt == "csv":
        keys = sorted({k for r in rows for k in r})
        keys.remove("T")
        keys = ["T"] + keys
        return _csv(keys, [[r.get(k, "") for k in keys] for r in rows])
    T_arg, k_arg, n_arg = rep.argmax
    return _json({"command": "verify-bounds", "grid_max": rep.grid_max,
                  "argmax": {"T": str(T_arg), "k": k_arg, "n": n_arg},
                  "interior": rep.interior, "rows": rows})


COMMANDS = {
    "phase": cmd_phase,
    "free-energy": cmd_free_energy,
    "renewal": cmd_renewal,
    "sample": cmd_sample,
    "experiment": cmd_experiment,
    "verify-bounds": cmd_verify_bounds,
}


def main(argv=None):
    try:
        args = parse(argv)
        text = COMMANDS[args.command](args)
    except (ParameterError, DomainError, HorizonError, InfeasibleRunError) as exc:
        extra = ""
        if isinstance(exc, InfeasibleRunError):
            extra = f" (estimated {exc.estimate:.3g} operations)"
        elif isinstance(exc, HorizonError):
            extra = f" (achievable defect {exc.achievable:.3g})"
        print(f"polypin: error: {exc}{extra}", file=sys.stderr)
        return EXIT_PARAM
    if text is not None:
        try:
            _emit(args, text)
        except BrokenPipeError:
            sys.stderr.close()
    return 0


if __name__ == "__main__":
    sys.exit(main())
