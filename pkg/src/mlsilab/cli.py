"""Command-line entry point: ``mlsilab <subcommand> ...``.

Exit status is 0 when every report holds, 1 when at least one report is
violated and 2 on usage, configuration or I/O errors.
"""
import argparse
import json
import os
import sys

import numpy as np

from . import potential as potmod
from ._util import to_builtin
from .conjugate import GridFunction1D, conjugate_at
from .errors import ConfigError, PreconditionError
from .inequality import check_prekopa_leindler
from .suite import ExperimentConfig, emit_report, load_suite, run_suite, summary_table

SHORTHAND = {"gaussian": potmod.gaussian, "quartic": potmod.quartic, "sextic": potmod.sextic}


def parse_potential(text):
    """JSON object, path to a JSON file, or shorthand: gaussian[:d], quartic, sextic, power:p[:d]."""
    text = text.strip()
    if text.startswith("{"):
        return potmod.from_spec(json.loads(text))
    if os.path.isfile(text):
        with open(text) as fh:
            return potmod.from_spec(json.load(fh))
    name, *args = text.split(":")
    if name == "power":
        if not args:
            raise ValueError("power shorthand needs an exponent, e.g. power:4")
        return potmod.power(float(args[0]), int(args[1]) if len(args) > 1 else 1)
    if name == "gaussian":
        return potmod.gaussian(int(args[0]) if args else 1)
    if name in SHORTHAND and not args:
        return SHORTHAND[name]()
    raise ValueError(f"unrecognised potential {text!r}")


def _common():
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--accuracy", type=float, default=argparse.SUPPRESS,
                   help="quadrature accuracy in [1e-12, 1e-4]")
    p.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="master random seed")
    p.add_argument("--out", default=argparse.SUPPRESS, help="output directory")
    return p


def build_parser():
    common = _common()
    parser = argparse.ArgumentParser(prog="mlsilab", parents=[common],
                                     description="Convex conjugation and functional-inequality lab.")
    sub = parser.add_subparsers(dest="command", required=True)
    v = sub.add_parser("verify", parents=[common], help="run a verifier suite from a config")
    v.add_argument("--config", required=True)
    c = sub.add_parser("conjugate", parents=[common], help="evaluate phi*(y)")
    c.add_argument("--potential", required=True, help="JSON spec, spec file or shorthand")
    c.add_argument("--at", required=True, help="comma-separated point y")
    pl = sub.add_parser("plcheck", parents=[common], help="Prekopa-Leindler check on grid CSVs")
    for name in ("u", "v", "w"):
        pl.add_argument(f"--{name}", required=True, help="CSV with header x,value")
    pl.add_argument("--a", type=float, required=True)
    k = sub.add_parser("concentration", parents=[common], help="run the concentration sweep")
    k.add_argument("--config", required=True)
    r = sub.add_parser("report", parents=[common], help="print the summary of a written suite")
    r.add_argument("--dir", required=True)
    return parser


def _load_config(args, only=None):
    cfg = ExperimentConfig.load(args.config)
    kw = {}
    for name in ("accuracy", "seed"):
        if hasattr(args, name):
            kw[name] = getattr(args, name)
    if hasattr(args, "out"):
        kw["output"] = args.out
    if only is not None:
        kw["verifiers"] = [only]
    return cfg.replace(**kw) if kw else cfg


def _run(cfg):
    rep = run_suite(cfg)
    files = emit_report(rep, cfg.output)
    sys.stdout.write(summary_table(rep.to_dict()))
    sys.stdout.write(f"wrote {len(files)} files to {cfg.output}: {', '.join(files)}\n")
    return 1 if rep.violated else 0


def cmd_verify(args):
    return _run(_load_config(args))


def cmd_concentration(args):
    return _run(_load_config(args, only="concentration"))


def cmd_conjugate(args):
    pot = parse_potential(args.potential)
    y = np.array([float(t) for t in args.at.split(",")])
    res = conjugate_at(pot, y)
    out = {"potential": pot.name or pot.kind, "y": y.tolist(), "value": res.value,
           "argmax": res.argmax.tolist(), "newton_iters": res.newton_iters,
           "residual": res.residual}
    print(json.dumps(to_builtin(out), sort_keys=True))
    return 0


def cmd_plcheck(args):
    u, v, w = (GridFunction1D.from_csv(getattr(args, n)) for n in ("u", "v", "w"))
    rep = check_prekopa_leindler(u, v, w, args.a)
    text = rep.to_json()
    print(text)
    if hasattr(args, "out"):
        os.makedirs(args.out, exist_ok=True)
        with open(os.path.join(args.out, "plcheck.json"), "w") as fh:
            fh.write(text + "\n")
    return 0 if rep.ok else 1


def cmd_report(args):
    d = load_suite(args.dir)
    d["reports"] = {k: [r.to_dict() for r in v] for k, v in d["reports"].items()}
    sys.stdout.write(summary_table(d))
    bad = d["summary"]["violated"] + d["summary"]["violated-hypothesis"]
    return 1 if bad else 0


COMMANDS = {"verify": cmd_verify, "concentration": cmd_concentration, "conjugate": cmd_conjugate,
            "plcheck": cmd_plcheck, "report": cmd_report}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, PreconditionError, ValueError, OSError) as exc:
        print(f"mlsilab {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
