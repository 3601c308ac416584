"""Command line entry point: ``spiral-lab <subcommand>``."""
from __future__ import annotations

import argparse
import json
import sys

from . import experiment as ex
from .increments import SeedSpec, parse_generator, validate_conditions
from .metricspace import GH_EXACT_CELL_CAP, Correspondence, gh_exact, gh_upper_bound, read_space
from .spiral import lattice_net, parse_measure, spiral_net
from .vcfam import parse_family, shatters, traces, vc_dim


def _d_list(text: str) -> list:
    return [int(tok) for tok in text.split(",") if tok.strip()]


def _add_run_args(sp: argparse.ArgumentParser):
    sp.add_argument("--config", help="JSON config file; explicit flags override its fields")
    sp.add_argument("--d-list", type=_d_list)
    sp.add_argument("--reps", type=int)
    sp.add_argument("--gen", help="sphere|gauss|rademacher|coord|aniso:<theta>")
    sp.add_argument("--seed", type=int, dest="master_seed")
    sp.add_argument("--out", dest="out_path")
    sp.add_argument("--format", choices=["csv", "json"])
    sp.add_argument("--threads", type=int, help=f"worker threads (fallback: ${ex.THREADS_ENV}, then 1)")
    sp.add_argument("--no-gh", dest="with_gh", action="store_false", default=None)
    sp.add_argument("--timing", action="store_true", default=None, help="fill elapsed_ms (makes output nondeterministic)")


def _run(args, setting: str) -> int:
    base = {}
    if args.config:
        base = json.loads(open(args.config).read())
    base["setting"] = setting
    overrides = {
        "idxdim": args.idxdim,
        "d_list": args.d_list,
        "n_rule": args.n_rule,
        "reps": args.reps,
        "gen": args.gen,
        "master_seed": args.master_seed,
        "out_path": args.out_path,
        "format": args.format,
        "threads": args.threads,
        "with_gh": args.with_gh,
        "timing": args.timing,
    }
    if setting == "SI":
        overrides.update(measure=args.measure, family=args.family, net_resolution=args.net_resolution)
    base.update({k: v for k, v in overrides.items() if v is not None})
    unknown = sorted(set(base) - set(ex.ExperimentConfig.__dataclass_fields__))
    if unknown:
        raise ex.ConfigError([f"{k}: unknown field" for k in unknown])
    cfg = ex.ExperimentConfig(**base)
    report = ex.run_experiment(cfg)
    if cfg.out_path:
        ex.emit(report, cfg.out_path, cfg.format)
    else:
        sys.stdout.write(ex.report_to_csv(report) if cfg.format == "csv" else ex.report_to_json(report))
    return 0


def _n_rule_ms(text: str) -> str:
    if text == "auto":
        return None
    if text.isdigit():
        return f"fixed:{text}"
    return text


def cmd_gh(args) -> int:
    X, Y = read_space(args.file_a), read_space(args.file_b)
    out = {"size_a": X.size, "size_b": Y.size}
    if X.size == Y.size:
        out["upper_bound_identity"] = gh_upper_bound(X, Y, Correspondence.identity(X.size))
    if X.size * Y.size <= GH_EXACT_CELL_CAP:
        out["exact"] = gh_exact(X, Y)
    if len(out) == 2:
        print(f"spaces of sizes {X.size} and {Y.size}: no index correspondence and too large for "
              f"exact search (cap {GH_EXACT_CELL_CAP} cells)", file=sys.stderr)
        return 2
    print(json.dumps(out))
    return 0


def cmd_vc(args) -> int:
    family = parse_family(args.family)
    if args.op == "dim":
        res = vc_dim(family, args.variant, args.budget, args.max_points, args.seed)
        print(json.dumps({"family": args.family, "variant": res.variant, "value": res.value, "exact": res.exact,
                          "saturated": res.saturated, "budget": res.budget, "max_points": res.max_points,
                          "display": str(res)}))
        return 0
    points = json.loads(args.points)
    if args.op == "traces":
        print(json.dumps({"traces": sorted(traces(family, points))}))
    else:
        print(json.dumps({"shatters": shatters(family, points)}))
    return 0


def cmd_validate_gen(args) -> int:
    gen = parse_generator(args.gen, args.d)
    report = validate_conditions(gen, args.reps, SeedSpec(args.seed, 0))
    print(json.dumps(report.as_dict(), indent=2))
    return 0


def cmd_spiral_net(args) -> int:
    mu = parse_measure(args.measure, args.m)
    text = spiral_net(lattice_net(args.m, args.n), mu).to_csv()
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="spiral-lab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    ms = sub.add_parser("ms-run", help="multiple-sum sweep over d")
    ms.add_argument("--m", type=int, dest="idxdim")
    ms.add_argument("--n", type=_n_rule_ms, dest="n_rule", help="integer, 'auto', or a rule d|sqrt_d|pow:<a>")
    _add_run_args(ms)
    ms.set_defaults(func=lambda a: _run(a, "MS"))

    si = sub.add_parser("si-run", help="set-indexed sweep over d")
    si.add_argument("--p", type=int, dest="idxdim")
    si.add_argument("--family")
    si.add_argument("--measure")
    si.add_argument("--n-rule", dest="n_rule")
    si.add_argument("--net-resolution", type=int)
    _add_run_args(si)
    si.set_defaults(func=lambda a: _run(a, "SI"))

    gh = sub.add_parser("gh", help="GH distance between two '# fms v1' CSV distance matrices")
    gh.add_argument("file_a")
    gh.add_argument("file_b")
    gh.set_defaults(func=cmd_gh)

    vc = sub.add_parser("vc", help="traces, shattering and VC dimension")
    vc.add_argument("--family", required=True)
    vc.add_argument("--op", choices=["dim", "traces", "shatters"], default="dim")
    vc.add_argument("--variant", choices=["some", "all"], default="some")
    vc.add_argument("--budget", type=int, default=2000)
    vc.add_argument("--max-points", type=int, default=8)
    vc.add_argument("--points", default="[]", help="JSON list of points for traces/shatters")
    vc.add_argument("--seed", type=int, default=0)
    vc.set_defaults(func=cmd_vc)

    vg = sub.add_parser("validate-gen", help="empirical check of the increment conditions")
    vg.add_argument("--gen", required=True)
    vg.add_argument("--d", type=int, required=True)
    vg.add_argument("--reps", type=int, default=10000)
    vg.add_argument("--seed", type=int, default=0)
    vg.set_defaults(func=cmd_validate_gen)

    sn = sub.add_parser("spiral-net", help="lattice spiral net as a '# fms v1' CSV")
    sn.add_argument("--m", type=int, required=True)
    sn.add_argument("--n", type=int, required=True)
    sn.add_argument("--measure", default="lebesgue")
    sn.add_argument("--out")
    sn.set_defaults(func=cmd_spiral_net)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ex.ConfigError as exc:
        print(exc, file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
