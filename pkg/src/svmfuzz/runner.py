"""Campaign runner: load a contract, fuzz it, and write the result files.

Output directory layout::

    suite/tc-NNNNN.json    one file per suite member
    vulnerabilities.json   one entry per oracle that fired
    stats.csv              one row per generation
    cfg.dot                (optional) discovered branches
    trace.tsv              (optional) full traces of the suite, replayed
"""

from __future__ import annotations

import copy
import csv
import json
import os
import shlex
from dataclasses import dataclass

from svmfuzz.abi import AbiError, parse_abi
from svmfuzz.engine.campaign import ATTACKER_ADDRESSES, Campaign, CampaignOptions, Executor, GenerationStats
from svmfuzz.engine.testcase import decode, from_json, to_json
from svmfuzz.evm.hexio import dump_trace, read_hex
from svmfuzz.evm.vm import ATTACKER_NORMAL


@dataclass
class RunOptions:
    bytecode: str
    abi: str
    out: str
    duration: float = 120.0
    seed: int = 0
    adaptive: bool = True
    attacker: str = "normal"
    max_execs: int | None = None
    max_generations: int | None = None
    pool_size: int | None = None
    suite_in: str | None = None
    dump_cfg: bool = False
    dump_trace: bool = False


class InputError(Exception):
    pass


def load_contract(bytecode_path, abi_path):
    try:
        code = read_hex(bytecode_path)
    except (OSError, ValueError) as exc:
        raise InputError(f"cannot read bytecode {bytecode_path}: {exc}") from None
    if not code:
        raise InputError(f"empty bytecode in {bytecode_path}")
    try:
        with open(abi_path, "rb") as fh:
            specs = parse_abi(fh.read())
    except OSError as exc:
        raise InputError(f"cannot read ABI {abi_path}: {exc}") from None
    except AbiError as exc:
        raise InputError(f"bad ABI {abi_path}: {exc}") from None
    return code, specs


def _import_suite(directory, ctx):
    out = []
    for name in sorted(os.listdir(directory)):
        if name.endswith(".json"):
            with open(os.path.join(directory, name)) as fh:
                out.append(from_json(json.load(fh), ctx))
    return out


def run_contract(opts: RunOptions):
    """Fuzz one contract and write its result files; returns the CampaignResult."""
    code, specs = load_contract(opts.bytecode, opts.abi)
    copts = CampaignOptions(
        duration=opts.duration, seed=opts.seed, adaptive=opts.adaptive,
        attacker=opts.attacker, max_execs=opts.max_execs,
        max_generations=opts.max_generations, pool_size=opts.pool_size,
    )
    try:
        campaign = Campaign(code, specs, copts)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    if opts.suite_in:
        copts.initial_suite = _import_suite(opts.suite_in, campaign.ctx)
    result = campaign.run()
    write_outputs(opts.out, result)
    if opts.dump_cfg:
        dump_cfg(os.path.join(opts.out, "cfg.dot"), result)
    if opts.dump_trace:
        dump_suite_traces(os.path.join(opts.out, "trace.tsv"), result, code)
    return result


def _ctx_for(ctx, attacker_kind):
    # the sender/caller index space depends on which attacker was loaded
    c = copy.copy(ctx)
    c.attacker = ATTACKER_ADDRESSES[attacker_kind]
    return c


def write_outputs(out, result):
    suite_dir = os.path.join(out, "suite")
    os.makedirs(suite_dir, exist_ok=True)
    for old in os.listdir(suite_dir):
        if old.startswith("tc-") and old.endswith(".json"):
            os.remove(os.path.join(suite_dir, old))
    for k, entry in enumerate(result.suite):
        ctx = _ctx_for(result.ctx, entry.attacker)
        tc = decode(entry.chromosome, ctx)
        doc = to_json(tc, ctx, id=entry.test_id, provenance=entry.provenance,
                      generation=entry.generation, attacker=entry.attacker,
                      covered_branches=[[b.phase, b.src, b.dst] for b in entry.new_branches])
        with open(os.path.join(suite_dir, f"tc-{k:05d}.json"), "w") as fh:
            json.dump(doc, fh, indent=1, sort_keys=True)
            fh.write("\n")
    with open(os.path.join(out, "vulnerabilities.json"), "w") as fh:
        json.dump([r.to_json() for r in result.reports], fh, indent=1, sort_keys=True)
        fh.write("\n")
    with open(os.path.join(out, "stats.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(GenerationStats.FIELDS)
        for row in result.stats:
            w.writerow([row.generation, f"{row.elapsed:.3f}", row.execs, f"{row.execs_per_sec:.2f}",
                        row.known, row.covered, row.just_missed, row.suite_size,
                        f"{row.adaptive_pct:.2f}"])
    return out


def dump_cfg(path, result):
    with open(path, "w") as fh:
        fh.write(result.registry.to_dot())


def dump_suite_traces(path, result, code):
    """Replay every suite member with full traces and write them tab-separated."""
    ex = Executor(code, _ctx_for(result.ctx, ATTACKER_NORMAL))
    with open(path, "w") as fh:
        for entry in result.suite:
            ex.set_attacker(entry.attacker)
            tc = decode(entry.chromosome, ex.ctx)
            log, _, _ = ex.run(tc, entry.test_id, entry.chromosome, full_traces=True)
            for tx in log.txs:
                fh.write(f"# test {entry.test_id} tx {tx.index} {tx.status}\n")
                dump_trace(tx.trace, fh)


def command_line(opts: RunOptions):
    """The shell command that reproduces `opts`."""
    args = ["svmfuzz", "--bytecode", opts.bytecode, "--abi", opts.abi, "--out", opts.out,
            "--duration", str(opts.duration), "--seed", str(opts.seed),
            "--adaptive", "on" if opts.adaptive else "off", "--attacker", opts.attacker]
    if opts.max_execs:
        args += ["--max-execs", str(opts.max_execs)]
    if opts.max_generations:
        args += ["--max-generations", str(opts.max_generations)]
    return " ".join(shlex.quote(a) for a in args)
