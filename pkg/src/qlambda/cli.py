"""Command-line frontend: ``check``, ``run``, ``props`` and ``gates``."""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass
from pathlib import Path

from .analysis import SUITES, run_suite
from .gates import DEFAULT_GATES, GateError, GateTable
from .program import MultiDistribution, ProgramError, canonicalize, parse_program_text
from .quantum import DEFAULT_MAX_QUBITS, CapacityError
from .rewrite import Mode, ResourceLimit, Rewriter, RewriteError, SCHEDULERS, run
from .syntax import ParseError, validate

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_PARSE = 2
EXIT_RESOURCE = 3
EXIT_PROPERTY = 4


@dataclass(frozen=True)
class RunConfig:
    mode: Mode = Mode.STRICT
    scheduler: str = "leftmost"
    seed: int | None = None
    max_steps: int = 1000
    delta: float = 1e-9
    window: int = 8
    max_qubits: int = DEFAULT_MAX_QUBITS

    def __post_init__(self):
        if self.max_steps < 1:
            raise ValueError("max_steps must be at least 1")
        if not self.delta > 0:
            raise ValueError("delta must be positive")
        if self.window < 1:
            raise ValueError("window must be at least 1")


def _load_gates(path: str | None) -> GateTable:
    return GateTable.from_json(path) if path else DEFAULT_GATES


def _read(path: str) -> str:
    return sys.stdin.read() if path == "-" else Path(path).read_text()


def cmd_check(args, out) -> int:
    gates = _load_gates(args.gates)
    state, term = parse_program_text(_read(args.file), gates)
    report = validate(term)
    print(str(report), file=out)
    if not report.ok:
        return EXIT_INVALID
    canonicalize(state, term)  # register/memory agreement
    return EXIT_OK


def _script_scheduler(path: str):
    """Schedules from a JSON list; each step lists, per entry, null or a position."""
    steps = iter(json.loads(Path(path).read_text()))

    def choose(rw, m, mode):
        step = next(steps, None)
        if step is None:
            return None
        if len(step) != len(m):
            raise RewriteError(f"script step has {len(step)} choices for {len(m)} entries")
        out = []
        for pos, (_, p) in zip(step, m):
            if pos is None:
                out.append(None)
                continue
            match = [r for r in rw.find_redexes(p) if list(r.pos) == list(pos)]
            if not match:
                raise RewriteError(f"no redex at {pos} in {p}")
            out.append(match[0])
        return out

    return choose


def cmd_run(args, out) -> int:
    cfg = RunConfig(Mode(args.mode), args.scheduler, args.seed, args.max_steps, args.delta, args.window, args.max_qubits)
    gates = _load_gates(args.gates)
    state, term = parse_program_text(_read(args.file), gates)
    report = validate(term)
    if not report.ok:
        print(str(report), file=out)
        return EXIT_INVALID
    p = canonicalize(state, term)
    rw = Rewriter(gates, cfg.max_qubits)
    if cfg.scheduler == "script":
        if not args.script:
            raise SystemExit("--scheduler script needs --script FILE")
        sched = _script_scheduler(args.script)
    else:
        sched = SCHEDULERS[cfg.scheduler](cfg.seed)
    trace = run(MultiDistribution.unit(p), cfg.mode, sched, cfg.max_steps, cfg.delta, cfg.window, rw)
    if not args.quiet:
        for k, (m, pr) in enumerate(zip(trace.steps, trace.pr)):
            print(f"{k:4d}  pr={pr:.12g}  {m}", file=out)
    if args.json:
        with open(args.json, "w") as fh:
            trace.write_jsonl(fh, rw)
    if args.csv:
        Path(args.csv).write_text("step,pr\n" + "".join(f"{k},{pr!r}\n" for k, pr in enumerate(trace.pr)))
    print(
        f"final: steps={len(trace.steps) - 1} pr={trace.pr[-1]:.12g} limit_estimate={trace.pr[-1]:.12g} "
        f"stop={trace.stop_reason} entries={len(trace.final)}",
        file=out,
    )
    return EXIT_OK


def cmd_props(args, out) -> int:
    kw = {}
    if args.suite == "random-descent" and args.depth is not None:
        kw["depth"] = args.depth
    verdicts = run_suite(args.suite, args.count, args.size, args.seed, **kw)
    report = [v.to_json() for v in verdicts]
    for v in verdicts:
        print(v.summary(), file=out)
    if args.json:
        Path(args.json).write_text(json.dumps(report, indent=1))
    else:
        print(json.dumps(report), file=out)
    return EXIT_PROPERTY if any(v.failed for v in verdicts) else EXIT_OK


def cmd_gates(args, out) -> int:
    table = _load_gates(args.gates)
    for name in table:
        g = table[name]
        print(f"{name}  arity={g.arity}", file=out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qlambda", description="Quantum lambda-calculus with measurement.")
    sub = ap.add_subparsers(dest="command", required=True)

    c = sub.add_parser("check", help="parse and validate a program")
    c.add_argument("file")
    c.add_argument("--gates")
    c.set_defaults(fn=cmd_check)

    r = sub.add_parser("run", help="reduce a program and print its trace")
    r.add_argument("file")
    r.add_argument("--mode", choices=[m.value for m in Mode], default="strict")
    r.add_argument("--scheduler", choices=["leftmost", "rightmost", "random", "script"], default="leftmost")
    r.add_argument("--script", help="JSON schedule list for --scheduler script")
    r.add_argument("--seed", type=int)
    r.add_argument("--max-steps", type=int, default=1000)
    r.add_argument("--delta", type=float, default=1e-9)
    r.add_argument("--window", type=int, default=8)
    r.add_argument("--max-qubits", type=int, default=DEFAULT_MAX_QUBITS)
    r.add_argument("--gates")
    r.add_argument("--json", help="write the trace as JSON lines")
    r.add_argument("--csv", help="write the Pr curve as CSV")
    r.add_argument("--quiet", action="store_true", help="only print the final line")
    r.set_defaults(fn=cmd_run)

    p = sub.add_parser("props", help="run a property suite over generated programs")
    p.add_argument("suite", choices=sorted(SUITES))
    p.add_argument("--count", type=int)
    p.add_argument("--size", type=int, default=12)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--depth", type=int, help="enumeration depth (random-descent)")
    p.add_argument("--json", help="write the report here instead of stdout")
    p.set_defaults(fn=cmd_props)

    g = sub.add_parser("gates", help="list the gate table")
    g.add_argument("--gates")
    g.set_defaults(fn=cmd_gates)
    return ap


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args, out)
    except (ParseError, GateError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except ProgramError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (CapacityError, ResourceLimit) as exc:
        print(f"resource guard: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except (ValueError, RewriteError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
