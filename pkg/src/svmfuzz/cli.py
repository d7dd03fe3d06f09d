"""Command line entry point.

Every option can also be set through an environment variable named
SVMFUZZ_<OPTION> (for example SVMFUZZ_DURATION=30); explicit flags win.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor

from svmfuzz.engine.campaign import ATTACKER_MODES
from svmfuzz.runner import InputError, RunOptions, command_line, run_contract

log = logging.getLogger("svmfuzz")


def _env(name, default=None):
    return os.environ.get("SVMFUZZ_" + name.upper().replace("-", "_"), default)


def build_parser():
    p = argparse.ArgumentParser(prog="svmfuzz", description="Coverage-guided EVM bytecode fuzzer.")
    p.add_argument("--bytecode", default=_env("bytecode"), help="hex file with the deployment bytecode")
    p.add_argument("--abi", default=_env("abi"), help="JSON ABI of the contract")
    p.add_argument("--manifest", default=_env("manifest"),
                   help="file with one 'bytecode abi' path pair per line; fuzzes each contract")
    p.add_argument("--out", default=_env("out", "svmfuzz-out"), help="output directory")
    p.add_argument("--duration", type=float, default=float(_env("duration", 120)),
                   help="wall-clock budget per contract, in seconds")
    p.add_argument("--seed", type=int, default=int(_env("seed", 0)))
    p.add_argument("--adaptive", choices=("on", "off"), default=_env("adaptive", "on"),
                   help="keep the closest seed for each just-missed branch")
    p.add_argument("--attacker", choices=ATTACKER_MODES, default=_env("attacker", "normal"))
    p.add_argument("--max-execs", type=int, default=_env("max_execs") and int(_env("max_execs")),
                   help="stop after this many executions (deterministic budget)")
    p.add_argument("--max-generations", type=int,
                   default=_env("max_generations") and int(_env("max_generations")))
    p.add_argument("--pool-size", type=int, default=_env("pool_size") and int(_env("pool_size")))
    p.add_argument("--suite-in", default=_env("suite_in"),
                   help="directory of test case JSON files used as initial seeds")
    p.add_argument("--jobs", type=int, default=int(_env("jobs", 1)),
                   help="contracts fuzzed in parallel with --manifest")
    p.add_argument("--emit-script", default=_env("emit_script"),
                   help="write a shell script with the equivalent per-contract commands and exit")
    p.add_argument("--dump-cfg", action="store_true", default=bool(_env("dump_cfg")),
                   help="write the discovered branches as cfg.dot")
    p.add_argument("--dump-trace", action="store_true", default=bool(_env("dump_trace")),
                   help="replay the suite and write full traces to trace.tsv")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def _read_manifest(path):
    pairs = []
    with open(path) as fh:
        for n, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 2:
                raise InputError(f"{path}:{n}: expected 'bytecode abi'")
            base = os.path.dirname(os.path.abspath(path))
            pairs.append(tuple(os.path.join(base, x) for x in parts))
    return pairs


def _jobs(args):
    common = dict(duration=args.duration, seed=args.seed, adaptive=args.adaptive == "on",
                  attacker=args.attacker, max_execs=args.max_execs,
                  max_generations=args.max_generations, pool_size=args.pool_size,
                  suite_in=args.suite_in, dump_cfg=args.dump_cfg, dump_trace=args.dump_trace)
    if args.manifest:
        out = []
        for bc, abi in _read_manifest(args.manifest):
            name = os.path.basename(bc).split(".")[0]
            out.append(RunOptions(bc, abi, os.path.join(args.out, name), **common))
        return out
    return [RunOptions(args.bytecode, args.abi, args.out, **common)]


def _run_one(opts):
    try:
        res = run_contract(opts)
    except InputError as exc:
        return opts.bytecode, None, str(exc)
    return opts.bytecode, (len(res.suite), len(res.registry.covered), len(res.registry.known),
                           sorted(res.report_ids()), res.execs), None


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if not args.manifest and not (args.bytecode and args.abi):
        parser.error("either --manifest or both --bytecode and --abi are required")
    if args.duration <= 0:
        parser.error("--duration must be positive")
    if args.jobs < 1:
        parser.error("--jobs must be at least 1")
    try:
        jobs = _jobs(args)
    except (OSError, InputError) as exc:
        print(f"svmfuzz: {exc}", file=sys.stderr)
        return 1
    if args.emit_script:
        with open(args.emit_script, "w") as fh:
            fh.write("#!/bin/sh\nset -e\n")
            for j in jobs:
                fh.write(command_line(j) + "\n")
        os.chmod(args.emit_script, 0o755)
        return 0
    if len(jobs) > 1 and args.jobs > 1:
        with ProcessPoolExecutor(args.jobs) as pool:
            results = list(pool.map(_run_one, jobs))
    else:
        results = [_run_one(j) for j in jobs]
    status = 0
    for path, summary, err in results:
        if err:
            print(f"svmfuzz: {err}", file=sys.stderr)
            status = 1
            continue
        suite, cov, known, found, execs = summary
        print(f"{path}: {execs} execs, {cov}/{known} branches, {suite} test cases, "
              f"findings: {', '.join(found) or 'none'}")
    return status


if __name__ == "__main__":
    sys.exit(main())
