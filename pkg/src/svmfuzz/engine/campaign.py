"""The test-generation loop.

Each generation executes the current population, adds test cases that cover
new branches to the suite, selects seeds (new-branch finders plus the
closest seed for every just-missed branch) and breeds the next population
by crossover and mutation.
"""

from __future__ import annotations

import logging
import random
import time
from dataclasses import dataclass, field

from svmfuzz.abi import constructor_of, encode_args, fuzzable
from svmfuzz.coverage import DEPLOY, RUNTIME, BranchRegistry, CoverageHook, ExecutionCoverage
from svmfuzz.engine.mutation import WALKING_BYTE_OPS, Mutator, crossover, dictionary_from_code
from svmfuzz.engine.population import init_population
from svmfuzz.engine.selection import ADAPTIVE, AFL, fit_to_survive
from svmfuzz.engine.testcase import (
    DEFAULT_ACCOUNT,
    DEFAULT_BALANCE,
    CodecContext,
    NetworkConfig,
    decode,
    encode,
)
from svmfuzz.evm.vm import (
    ATTACKER_NORMAL,
    ATTACKER_REENTRANCY,
    SUCCESS,
    VM,
    Account,
    Message,
    World,
    contract_address,
)
from svmfuzz import oracles as OR

log = logging.getLogger(__name__)

ATTACKER_ADDRESSES = {ATTACKER_NORMAL: 0xAA, ATTACKER_REENTRANCY: 0xAB}
ATTACKER_BALANCE = DEFAULT_BALANCE
GAS_LIMIT = 1_000_000
MAX_POOL = 4
ATTACKER_MODES = ("normal", "reentrancy", "alternate")


def count_address_params(specs):
    def n(t):
        if t.kind == "address":
            return 1
        if t.kind == "array":
            return n(t.elem)
        return 0

    return sum(n(t) for s in specs for t in s.inputs)


def pool_size_for(specs, requested=None):
    """Pool size: at most the number of address parameters, at least 1."""
    limit = max(1, count_address_params(specs))
    if requested is not None:
        return max(1, min(requested, limit))
    return min(limit, MAX_POOL)


def default_config(pool_size, rng=None):
    """Block 0, timestamp 0, account 0xf0 with balance 0xff<<88, then random extras."""
    rng = rng or random.Random(0)
    accounts = [(DEFAULT_ACCOUNT, DEFAULT_BALANCE)]
    for i in range(1, pool_size):
        accounts.append((DEFAULT_ACCOUNT + i, rng.getrandbits(88) | 1))
    return NetworkConfig(0, 0, accounts)


def setup_world(config, loaded_kind=ATTACKER_NORMAL):
    """Fresh test network: the pool accounts plus both native attackers.

    Only the `loaded_kind` attacker is used as constructor caller and sender.
    """
    w = World(config.block_number, config.timestamp)
    for addr, bal in config.accounts:
        w.accounts[addr] = Account(addr, bal)
    for kind, addr in ATTACKER_ADDRESSES.items():
        w.accounts[addr] = Account(addr, ATTACKER_BALANCE if kind == loaded_kind else 0, kind=kind)
    return w


class NullHook:
    """A hook that ignores every event; the baseline for overhead measurement."""

    __slots__ = ("cov", "phase", "address")

    def __init__(self):
        self.cov = ExecutionCoverage()
        self.phase = RUNTIME
        self.address = None

    def start(self, phase=RUNTIME, address=None):
        self.cov = ExecutionCoverage()

    def __call__(self, ev):
        pass


class Executor:
    """Runs test cases against fresh worlds and returns logs plus coverage."""

    def __init__(self, init_code, ctx, attacker_kind=ATTACKER_NORMAL, hook=None,
                 gas_limit=GAS_LIMIT, gas_schedule=None):
        self.init_code = bytes(init_code)
        self.ctx = ctx
        self.gas_limit = gas_limit
        self.gas_schedule = gas_schedule
        self.hook = hook if hook is not None else CoverageHook(BranchRegistry())
        self.set_attacker(attacker_kind)

    def set_attacker(self, kind):
        self.attacker_kind = kind
        self.ctx.attacker = ATTACKER_ADDRESSES[kind]
        self.cut = contract_address(self.ctx.attacker, 0)

    def run(self, tc, test_id=0, chromosome=b"", full_traces=False):
        ctx = self.ctx
        world = setup_world(tc.config, self.attacker_kind)
        hook = self.hook
        cut = self.cut
        hook.start(DEPLOY, cut)
        vm = VM(world, hook, self.gas_schedule)
        ctor = tc.constructor
        data = self.init_code + encode_args(ctx.constructor.inputs, ctor.args, ctx.bound)
        res = vm.create(ctx.attacker, data, ctor.value, self.gas_limit)
        results = [res]
        logr = OR.ExecutionLog(test_id, chromosome, cut, self.attacker_kind)
        logr.txs.append(OR.TxLog(0, res.status, ctor.value,
                                 res.trace if full_traces else OR.compact_trace(res.trace, cut),
                                 res.frames))
        if res.status == SUCCESS:
            hook.phase = RUNTIME
            for i, call in enumerate(tc.calls, 1):
                sender = ctx.sender_address(tc.config, call.sender)
                msg = Message(sender, cut, call.value, ctx.calldata(call), self.gas_limit)
                res = vm.execute(msg)
                results.append(res)
                logr.txs.append(OR.TxLog(i, res.status, call.value,
                                         res.trace if full_traces else OR.compact_trace(res.trace, cut),
                                         res.frames))
        return logr, hook.cov.finish(), results


@dataclass
class CampaignOptions:
    duration: float = 120.0
    seed: int = 0
    adaptive: bool = True
    attacker: str = "normal"
    generation_size: int = 100
    crossover_rate: float = 0.1
    max_generations: int | None = None
    max_execs: int | None = None
    pool_size: int | None = None
    batch_size: int = OR.BATCH_SIZE
    gas_limit: int = GAS_LIMIT
    max_calls: int = 5
    stop_when: object = None  # callable(campaign) -> bool, checked after each generation
    initial_suite: list | None = None  # TestCases to seed the first generation with

    def validate(self):
        if not self.duration > 0:
            raise ValueError("duration must be positive")
        if self.attacker not in ATTACKER_MODES:
            raise ValueError(f"attacker mode must be one of {ATTACKER_MODES}")
        if self.generation_size < 1:
            raise ValueError("generation size must be positive")


@dataclass
class SuiteEntry:
    test_id: int
    chromosome: bytes
    provenance: str
    new_branches: list
    generation: int
    elapsed: float
    attacker: str = ATTACKER_NORMAL


@dataclass
class GenerationStats:
    generation: int
    elapsed: float
    execs: int
    execs_per_sec: float
    known: int
    covered: int
    just_missed: int
    suite_size: int
    adaptive_pct: float

    FIELDS = ("generation", "elapsed", "execs", "execs_per_sec", "known", "covered",
              "just_missed", "suite_size", "adaptive_pct")


@dataclass
class _Seed:
    chromosome: bytes
    provenance: str
    signature: tuple
    effector: dict
    probes: dict
    focus: int | None


@dataclass
class CampaignResult:
    suite: list
    reports: list
    stats: list
    registry: BranchRegistry
    execs: int
    generations: int
    elapsed: float
    ctx: CodecContext
    report_times: dict = field(default_factory=dict)

    def adaptive_pct(self, until=None):
        entries = [e for e in self.suite if until is None or e.elapsed <= until]
        if not entries:
            return 0.0
        return 100.0 * sum(e.provenance == ADAPTIVE for e in entries) / len(entries)

    def report_ids(self):
        return {r.oracle for r in self.reports}


class Campaign:
    def __init__(self, init_code, specs, options=None):
        self.options = options or CampaignOptions()
        self.options.validate()
        self.specs = list(specs)
        functions = fuzzable(self.specs)
        ctor = constructor_of(self.specs)
        if not functions and not ctor.inputs and not ctor.payable:
            raise ValueError("nothing to fuzz: the ABI has no state-changing functions")
        self.rng = random.Random(self.options.seed)
        pool = pool_size_for(functions + [ctor], self.options.pool_size)
        self.ctx = CodecContext(
            functions=functions, constructor=ctor, pool_size=pool,
            attacker_balance=ATTACKER_BALANCE,
            reserved=frozenset(ATTACKER_ADDRESSES.values()),
            max_calls=self.options.max_calls,
        )
        first = ATTACKER_REENTRANCY if self.options.attacker == "reentrancy" else ATTACKER_NORMAL
        self.registry = BranchRegistry()
        self.hook = CoverageHook(self.registry)
        self.executor = Executor(init_code, self.ctx, first, self.hook, self.options.gas_limit)
        self.config = default_config(pool, self.rng)
        addrs = self.config.addresses + list(ATTACKER_ADDRESSES.values()) + [
            contract_address(a, 0) for a in ATTACKER_ADDRESSES.values()]
        self.mutator = Mutator(self.ctx, dictionary_from_code(init_code), addrs)
        self.suite = []
        self.reports = {}
        self.report_times = {}
        self.stats = []
        self.oracle_state = OR.OracleState()
        self._batch = []
        self.execs = 0
        self.generation = 0
        self.start = None
        self._seen = set()
        self._next_id = 0
        self._store = {}
        self._pool_members = []
        self._swept = set()

    # -- helpers -----------------------------------------------------------

    def elapsed(self):
        return time.perf_counter() - self.start

    def _flush(self):
        if not self._batch:
            return
        now = self.elapsed()
        for rep in OR.check_batch(self._batch, self.oracle_state):
            if rep.oracle not in self.reports:
                self.reports[rep.oracle] = rep
                self.report_times[rep.oracle] = now
        self._batch = []

    def _budget_spent(self, phase_end):
        if self.elapsed() >= phase_end[0]:
            return True
        if phase_end[1] is not None and self.execs >= phase_end[1]:
            return True
        return False

    def covered(self, branch):
        return branch in self.registry.covered

    def found(self, oracle):
        """Whether `oracle` has fired; checks the pending batch first."""
        self._flush()
        return oracle in self.reports

    # -- main loop -----------------------------------------------------------

    def run(self):
        o = self.options
        self.start = time.perf_counter()
        if o.attacker == "alternate":
            half_t = o.duration / 2
            half_x = o.max_execs // 2 if o.max_execs else None
            half_g = o.max_generations // 2 if o.max_generations else None
            self._loop((half_t, half_x, half_g))
            self.executor.set_attacker(ATTACKER_REENTRANCY)
            # a chromosome run against the other attacker is a different test
            self._seen = set()
            self._swept = set()
            self._loop((o.duration, o.max_execs, o.max_generations), resume=True)
        else:
            self._loop((o.duration, o.max_execs, o.max_generations))
        self._flush()
        frozen = OR.freezing_ether(self.oracle_state)
        if frozen is not None:
            self.reports[OR.FREEZING_ETHER] = frozen
            self.report_times[OR.FREEZING_ETHER] = self.elapsed()
        order = {k: i for i, k in enumerate(OR.ORACLE_IDS)}
        reports = sorted(self.reports.values(), key=lambda r: order[r.oracle])
        return CampaignResult(self.suite, reports, self.stats, self.registry, self.execs,
                              self.generation, self.elapsed(), self.ctx, dict(self.report_times))

    def _initial(self):
        o = self.options
        tcs = list(o.initial_suite or []) + init_population(self.ctx, self.config, self.rng)
        out = []
        for tc in tcs:
            c = encode(tc, self.ctx)
            if c not in self._seen and decode(c, self.ctx) is not None:
                self._seen.add(c)
                out.append((c, None))
        return out

    def _loop(self, end, resume=False):
        o = self.options
        if resume:
            population = [(e.chromosome, None) for e in self.suite]
            self._seen.update(c for c, _ in population)
            population += self._breed(self._pool_members)
        else:
            population = self._initial()
        store = self._store if resume else {}
        gen_limit = end[2]
        stop = False
        while True:
            ids = []
            new_by_id = {}
            reports = {}
            for chrom, parent in population:
                tid = self._next_id
                self._next_id += 1
                tc = decode(chrom, self.ctx)
                logr, cov, _ = self.executor.run(tc, tid, chrom)
                self.execs += 1
                elapsed = self.elapsed()
                new = self.registry.merge(cov, self.generation, elapsed)
                prov = parent[1] if parent else AFL
                if new:
                    self.suite.append(SuiteEntry(tid, chrom, prov, new, self.generation, elapsed,
                                                 self.executor.attacker_kind))
                ids.append(tid)
                new_by_id[tid] = new
                reports[tid] = cov.report
                sig = (frozenset(cov.covered), frozenset(cov.report.items()))
                store[tid] = self._seed_record(chrom, prov, sig, parent, store)
                self._batch.append(logr)
                if len(self._batch) >= o.batch_size:
                    self._flush()
                if self._budget_spent(end):
                    stop = True
                    break
            jm = self.registry.just_missed()
            pool = fit_to_survive(ids, new_by_id, reports, jm, self.registry.best, o.adaptive)
            self.registry.best = dict(pool.adaptive)
            self._record_stats(len(jm))
            self.generation += 1
            members = pool.members()
            if not members:
                # nothing new and nothing close: fall back to the suite, round robin
                members = self._fallback(store)
            keep = {m for m, _ in members} | {e.test_id for e in self.suite}
            store = {k: v for k, v in store.items() if k in keep}
            self._store = store
            self._pool_members = members
            if stop or (gen_limit is not None and self.generation >= gen_limit):
                break
            if o.stop_when is not None and o.stop_when(self):
                break
            population = self._breed(members)
            if not population:
                log.warning("no new offspring could be produced; stopping")
                break

    def _fallback(self, store):
        if not self.suite:
            return [(k, AFL) for k in list(store)[:1]]
        n = max(1, min(len(self.suite), 4))
        start = (self.generation * n) % len(self.suite)
        picks = [self.suite[(start + i) % len(self.suite)] for i in range(n)]
        return [(e.test_id, e.provenance) for e in picks if e.test_id in store]

    def _seed_record(self, chrom, prov, sig, parent, store):
        focus = None
        if parent is not None:
            pid, _, op, seg = parent
            p = store.get(pid)
            if p is not None:
                # each seed learns its own effector map: a block that did not
                # matter for the parent may matter once the child passes a branch
                focus = seg
                if op in WALKING_BYTE_OPS and seg is not None and p.effector.get(seg) is None:
                    if sig != p.signature:
                        p.effector[seg] = True
                    else:
                        p.probes[seg] = p.probes.get(seg, 0) + 1
                        if p.probes[seg] >= 2:
                            p.effector[seg] = False
        return _Seed(chrom, prov, sig, {}, {}, focus)

    def _breed(self, members):
        o = self.options
        rng = self.rng
        store = self._store
        members = [(m, p) for m, p in members if m in store]
        if not members:
            return []
        out = []
        n = o.generation_size
        share, extra = divmod(n, len(members))
        suite_ids = {e.test_id for e in self.suite}
        for k, (mid, prov) in enumerate(members):
            seed = store[mid]
            quota = share + (1 if k < extra else 0)
            if mid in suite_ids and mid not in self._swept:
                # deterministic stage, once per suite member: try each other sender
                self._swept.add(mid)
                for child in self.mutator.sender_sweep(seed.chromosome):
                    if child not in self._seen:
                        self._seen.add(child)
                        out.append((child, (mid, prov, "senderSweep", None)))
            for _ in range(quota):
                for _attempt in range(4):
                    child, op, seg = None, None, None
                    if len(members) > 1 and rng.random() < o.crossover_rate:
                        other = store[rng.choice([m for m, _ in members if m != mid])].chromosome
                        kids = crossover(seed.chromosome, other, rng, self.ctx)
                        if kids:
                            child, op = rng.choice(kids), "crossover"
                    else:
                        res = self.mutator.random_offspring(seed.chromosome, rng, seed.effector, seed.focus)
                        if res is not None:
                            child, op, seg = res
                    if child is None or child in self._seen:
                        continue
                    if decode(child, self.ctx) is None:
                        continue
                    self._seen.add(child)
                    out.append((child, (mid, prov, op, seg)))
                    break
        return out

    def _record_stats(self, n_jm):
        el = self.elapsed()
        pct = 100.0 * sum(e.provenance == ADAPTIVE for e in self.suite) / len(self.suite) if self.suite else 0.0
        self.stats.append(GenerationStats(
            self.generation, el, self.execs, self.execs / el if el > 0 else 0.0,
            len(self.registry.known), len(self.registry.covered), n_jm, len(self.suite), pct))


def run_campaign(init_code, specs, options=None):
    """Convenience wrapper: build a Campaign and run it."""
    return Campaign(init_code, specs, options).run()
