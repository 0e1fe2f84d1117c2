"""Command line front end: monitoring, soundness sampling, synthesis.

Subcommands::

    istl monitor SPEC TRACE [--radii ...] [--at T] [--out FILE]
    istl check-soundness SPEC TRACE [--samples K] [--seed S] [--out FILE]
    istl synth SYSTEM SPEC --steps T --x0 a,b,... [--N] [--b] [--seed]
               [--out FILE] [--emit-lp DIR]
    istl encode SYSTEM SPEC --x0 a,b,... [--N] [--b] [--objective ...]
               [--out FILE]

Every subcommand accepts ``--until-convention paper|classical``. Reports
start with ``#`` config-echo lines so a run can be reproduced from its
output alone. Exit codes: 0 True/success, 1 False/violation/infeasible,
2 Undef, 3 parse or usage errors, 4 input format errors, 5 other errors.

A trace path of ``-`` reads the trace from stdin (format sniffed).
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from .embedding import EmbeddingState, LinearSystem
from .errors import FormatError, IstlError, ParseError, StepInfeasible, TraceTooShort
from .formula import parse_spec, realize
from .semantics import Verdict, monitor, rho, rho_point, verdict_of
from .milp import emit_lp
from .synthesis import SynthesisProblem, encode, receding_horizon
from .traces import IntervalTrace, Trace, parse_trace_text, read_trace

_VERDICT_EXIT = {Verdict.TRUE: 0, Verdict.FALSE: 1, Verdict.UNDEF: 2}


class _Parser(argparse.ArgumentParser):
    # exit 2 is taken by the Undef verdict; usage errors leave at 3
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(3)


def _load_spec(path):
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    _, f = parse_spec(text)
    return f


def _load_trace(path):
    if path == "-":
        return parse_trace_text(sys.stdin.read())
    return read_trace(path)


def _parse_radii(text):
    if "=" not in text:
        return float(text)
    radii = {}
    for part in text.split(","):
        name, _, value = part.partition("=")
        if not name or not value:
            raise FormatError(f"bad radii entry {part!r}; expected name=radius")
        radii[name.strip()] = float(value)
    return radii


def _parse_vector(text, what):
    try:
        return np.array([float(p) for p in text.split(",")], dtype=np.float64)
    except ValueError:
        raise FormatError(f"bad {what} {text!r}; expected comma-separated numbers") from None


def _emit(text, out_path):
    if out_path:
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _float(v):
    return repr(float(v))


# --------------------------------------------------------------------------
# subcommands
# --------------------------------------------------------------------------


def cmd_monitor(args):
    f = _load_spec(args.spec)
    tr = _load_trace(args.trace)
    if args.radii is not None:
        if isinstance(tr, IntervalTrace):
            raise FormatError("--radii applies to point traces only")
        tr = tr.widen(_parse_radii(args.radii))
    elif isinstance(tr, Trace):
        tr = tr.to_interval()
    rt = monitor(f, tr, until=args.until_convention)
    header = [
        "# istl monitor",
        f"# spec={args.spec}",
        f"# trace={args.trace}",
        f"# until={args.until_convention}",
    ]
    if args.radii is not None:
        header.append(f"# radii={args.radii}")
    at = 0
    if args.at is not None:
        at = args.at
        if not (0 <= at < len(rt)):
            raise TraceTooShort(needed=at + 1, got=len(rt))
        header.append(f"# at={at}")
        body = "t,rho_lo,rho_hi,verdict\n" + ",".join(
            [str(at), _float(rt.rho_lo[at]), _float(rt.rho_hi[at]), str(rt.verdict(at))]
        ) + "\n"
    else:
        body = rt.to_csv()
    _emit("\n".join(header) + "\n" + body, args.out)
    return _VERDICT_EXIT[rt.verdict(at)]


def cmd_check_soundness(args):
    f = _load_spec(args.spec)
    tr = _load_trace(args.trace)
    if isinstance(tr, Trace):
        tr = tr.to_interval()
    rng = np.random.default_rng(args.seed)
    r = rho(f, tr, 0, until=args.until_convention)
    v0 = verdict_of(r)
    violations = 0
    smin = np.inf
    smax = -np.inf
    for _ in range(args.samples):
        tr_k = tr.sample(rng)
        f_k = realize(f, rng)
        v = rho_point(f_k, tr_k, 0, until=args.until_convention)
        smin = min(smin, v)
        smax = max(smax, v)
        if not (r.lo <= v <= r.hi):
            violations += 1
        elif v0 is Verdict.TRUE and v < 0:
            violations += 1
        elif v0 is Verdict.FALSE and v >= 0:
            violations += 1
    lines = [
        "# istl check-soundness",
        f"# spec={args.spec}",
        f"# trace={args.trace}",
        f"# samples={args.samples}",
        f"# seed={args.seed}",
        f"# until={args.until_convention}",
        f"rho_lo,{_float(r.lo)}",
        f"rho_hi,{_float(r.hi)}",
        f"verdict,{v0}",
        f"sampled_min,{_float(smin)}",
        f"sampled_max,{_float(smax)}",
        f"violations,{violations}",
    ]
    _emit("\n".join(lines) + "\n", args.out)
    return 0 if violations == 0 else 1


def cmd_synth(args):
    sys_model = LinearSystem.from_file(args.system)
    spec = _load_spec(args.spec)
    x0 = _parse_vector(args.x0, "--x0")
    if args.emit_lp:
        os.makedirs(args.emit_lp, exist_ok=True)
    try:
        result = receding_horizon(
            sys_model,
            spec,
            x0,
            args.steps,
            seed=args.seed,
            N=args.N,
            b=args.b,
            until=args.until_convention,
            step_budget=args.step_budget,
            emit_dir=args.emit_lp,
        )
    except StepInfeasible as e:
        print(f"infeasible: {e}", file=sys.stderr)
        return 1
    header = [
        "# istl synth",
        f"# system={args.system}",
        f"# spec={args.spec}",
        f"# x0={args.x0}",
        f"# steps={args.steps}",
        f"# N={args.N}",
        f"# b={args.b}",
        f"# seed={args.seed}",
        f"# until={args.until_convention}",
    ]
    _emit("\n".join(header) + "\n" + result.to_csv(), args.out)
    return 0 if (result.robustness.rho_lo >= 0).all() else 1


def cmd_encode(args):
    sys_model = LinearSystem.from_file(args.system)
    spec = _load_spec(args.spec)
    x0 = _parse_vector(args.x0, "--x0")
    out_idx = list(sys_model.output_indices)
    history = IntervalTrace(
        sys_model.output_names, x0[out_idx].reshape(1, -1), x0[out_idx].reshape(1, -1)
    )
    problem = SynthesisProblem(
        sys_model,
        spec,
        0,
        history,
        EmbeddingState.degenerate(x0),
        N=args.N,
        b=args.b,
        until=args.until_convention,
    )
    enc = encode(problem, objective=args.objective)
    comments = [
        "\\ istl encode",
        f"\\ system={args.system}",
        f"\\ spec={args.spec}",
        f"\\ x0={args.x0}",
        f"\\ N={args.N} b={args.b} objective={args.objective}",
        f"\\ until={args.until_convention}",
        f"\\ binaries={enc.model.n_binaries} rows={len(enc.model.rows)} big_M={_float(enc.big_M)}",
    ]
    _emit("\n".join(comments) + "\n" + emit_lp(enc.model), args.out)
    return 0


# --------------------------------------------------------------------------
# parser
# --------------------------------------------------------------------------


def _seed(text):
    value = int(text)
    if not (0 <= value < 2**64):
        raise argparse.ArgumentTypeError("seed must be a 64-bit unsigned integer")
    return value


def _build_parser():
    parser = _Parser(prog="istl", description=__doc__.splitlines()[0])
    common = _Parser(add_help=False)
    common.add_argument(
        "--until-convention",
        choices=("paper", "classical"),
        default="paper",
        help="Until semantics variant (default: paper)",
    )
    common.add_argument("--out", default=None, help="write the report here instead of stdout")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("monitor", parents=[common], help="interval robustness of a trace")
    p.add_argument("spec")
    p.add_argument("trace", help="point or interval trace (.csv/.json, or - for stdin)")
    p.add_argument("--radii", default=None, help="widen a point trace: scalar or name=r,...")
    p.add_argument("--at", type=int, default=None, help="report a single evaluation step")
    p.set_defaults(func=cmd_monitor)

    p = sub.add_parser(
        "check-soundness", parents=[common], help="sampled containment check of the interval bound"
    )
    p.add_argument("spec")
    p.add_argument("trace")
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--seed", type=_seed, default=0)
    p.set_defaults(func=cmd_check_soundness)

    p = sub.add_parser("synth", parents=[common], help="receding-horizon input synthesis")
    p.add_argument("system", help="linear system JSON file")
    p.add_argument("spec")
    p.add_argument("--steps", type=int, required=True, help="closed-loop steps to run")
    p.add_argument("--x0", required=True, help="initial state, comma separated")
    p.add_argument("--N", type=int, default=16, help="prediction horizon (default 16)")
    p.add_argument("--b", type=int, default=1, help="commitment horizon (default 1)")
    p.add_argument("--seed", type=_seed, default=0)
    p.add_argument("--step-budget", type=float, default=None, help="solver seconds per step")
    p.add_argument("--emit-lp", default=None, metavar="DIR", help="write per-step models here")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("encode", parents=[common], help="emit one step's model in LP format")
    p.add_argument("system")
    p.add_argument("spec")
    p.add_argument("--x0", required=True, help="initial state, comma separated")
    p.add_argument("--N", type=int, default=16)
    p.add_argument("--b", type=int, default=1)
    p.add_argument(
        "--objective",
        choices=("min_input", "max_robustness"),
        default="min_input",
    )
    p.set_defaults(func=cmd_encode)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ParseError as e:
        print(f"parse error: {e}", file=sys.stderr)
        return 3
    except (FormatError, OSError) as e:
        print(f"input error: {e}", file=sys.stderr)
        return 4
    except IstlError as e:
        print(f"error: {e}", file=sys.stderr)
        return 5


if __name__ == "__main__":
    sys.exit(main())
