"""Acceptance gate: one test per criterion, each reporting a PASS/FAIL line.

The budgets are the real ones (120 s campaigns), so this module takes
roughly forty minutes on one core.
"""

import copy
import random
import time

import conftest
from svmfuzz import oracles as OR
from svmfuzz.coverage import BranchRegistry, CoverageHook, distance
from svmfuzz.engine.campaign import (
    CampaignOptions,
    Executor,
    NullHook,
    run_campaign,
)
from svmfuzz.engine.mutation import Mutator
from svmfuzz.engine.testcase import decode, encode
from svmfuzz.fixtures import load, names, sources

BUDGET = 120.0
RUNS = 10
SHORT = 5.0  # budget for runs that can only end by timing out (silent fixtures)


def report(n, ok, text):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {n}: {text}"
    conftest.ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def _attacker(fx):
    return "reentrancy" if fx.attacker == "reentrancy" else "normal"


def test_criterion_1_strict_equality_differential():
    fx = load("quiz")
    (reward,) = fx.targets
    hits_on, hits_off, times = 0, 0, []
    for seed in range(RUNS):
        res = run_campaign(fx.init_code, fx.specs, CampaignOptions(
            seed=seed, duration=BUDGET,
            stop_when=lambda c: c.covered(reward) and c.found(OR.GASLESS_SEND)))
        if reward in res.registry.covered and OR.GASLESS_SEND in res.report_ids():
            hits_on += 1
            times.append(res.elapsed)
    for seed in range(RUNS):
        res = run_campaign(fx.init_code, fx.specs, CampaignOptions(
            seed=seed, duration=BUDGET, adaptive=False,
            stop_when=lambda c: c.covered(reward)))
        hits_off += reward in res.registry.covered
    ok = hits_on >= 9 and hits_off <= 2
    assert report(1, ok, f"quiz reward+GaslessSend adaptive on {hits_on}/{RUNS} (need >=9, "
                         f"max {max(times, default=0):.1f}s), adaptive off {hits_off}/{RUNS} (need <=2)")


def test_criterion_2_nonlinear_branches():
    fx = load("nonlinear")
    hits, times = 0, []
    for seed in range(RUNS):
        res = run_campaign(fx.init_code, fx.specs, CampaignOptions(
            seed=seed, duration=BUDGET, stop_when=lambda c: all(c.covered(t) for t in fx.targets)))
        if all(t in res.registry.covered for t in fx.targets):
            hits += 1
            times.append(res.elapsed)
    assert report(2, hits >= 9, f"nonlinear y==110 and y==10010 covered {hits}/{RUNS} "
                                f"(need >=9, max {max(times, default=0):.1f}s)")


def test_criterion_3_oracle_fixtures():
    rows = []
    for name in sorted(n for n in names() if load(n).oracle):
        fx = load(name)
        flagged = 0
        for seed in range(RUNS):
            stop = None
            budget = SHORT
            if fx.positive and fx.oracle != OR.FREEZING_ETHER:
                budget = BUDGET
                stop = lambda c, o=fx.oracle: c.found(o)
            res = run_campaign(fx.init_code, fx.specs, CampaignOptions(
                seed=seed, duration=budget, attacker=_attacker(fx), stop_when=stop))
            flagged += fx.oracle in res.report_ids()
        good = flagged == (RUNS if fx.positive else 0)
        rows.append((name, fx.oracle, fx.positive, flagged, good))
    bad = [r for r in rows if not r[4]]
    detail = ", ".join(f"{n}={f}/{RUNS}" for n, _, _, f, _ in rows)
    assert report(3, not bad, f"{len(rows) - len(bad)}/{len(rows)} fixtures correct "
                              f"(positives flagged 10/10, patched 0/10): {detail}")


def test_criterion_4_throughput():
    execs, elapsed = 0, 0.0
    for name in names():
        fx = load(name)
        res = run_campaign(fx.init_code, fx.specs, CampaignOptions(
            seed=0, duration=3.0, attacker=_attacker(fx)))
        execs += res.execs
        elapsed += res.elapsed
    rate = execs / elapsed
    assert report(4, rate >= 100, f"{rate:.0f} test cases/s over {len(names())} fixtures (need >=100)")


def _corpus(fx, n):
    """The campaign's codec context and `n` valid chromosomes: a short
    campaign's suite topped up with random mutants."""
    res = run_campaign(fx.init_code, fx.specs, CampaignOptions(seed=1, max_execs=n, duration=BUDGET,
                                                               attacker=_attacker(fx)))
    ctx = copy.copy(res.ctx)
    out = [e.chromosome for e in res.suite]
    rng = random.Random(0)
    m = Mutator(ctx)
    for _ in range(100 * n):
        if len(out) >= n:
            break
        r = m.random_offspring(rng.choice(out), rng)
        if r and decode(r[0], ctx) is not None:
            out.append(r[0])
    return ctx, out


def _replay(fx, ctx, corpus, hook):
    ex = Executor(fx.init_code, ctx, hook=hook)
    if fx.attacker == "reentrancy":
        ex.set_attacker("attacker-reentrancy")
    registry = getattr(hook, "registry", None)
    t0 = time.perf_counter()
    for i, chrom in enumerate(corpus):
        _, cov, _ = ex.run(decode(chrom, ctx), i, chrom)
        if registry is not None:
            registry.merge(cov)
            registry.offer(cov.report, i)
    return time.perf_counter() - t0


def test_criterion_5_instrumentation_overhead():
    base, instrumented = 0.0, 0.0
    for name in names():
        fx = load(name)
        ctx, corpus = _corpus(fx, 300)
        b = min(_replay(fx, ctx, corpus, NullHook()) for _ in range(3))
        h = min(_replay(fx, ctx, corpus, CoverageHook(BranchRegistry())) for _ in range(3))
        base += b
        instrumented += h
    overhead = 100.0 * (instrumented / base - 1)
    assert report(5, overhead <= 25.0, f"coverage+distance overhead {overhead:.1f}% vs no-op hook (need <=25%)")


def test_criterion_6_adaptive_attribution_trend():
    early, late, per = [], [], []
    for name in sources.STRICT_CONDITION:
        fx = load(name)
        res = run_campaign(fx.init_code, fx.specs, CampaignOptions(seed=0, duration=BUDGET))
        e = [x for x in res.suite if x.elapsed <= BUDGET / 10]
        early += e
        late += res.suite
        per.append(f"{name} {res.adaptive_pct(BUDGET / 10):.0f}%->{res.adaptive_pct():.0f}%")
    pct = lambda xs: 100.0 * sum(x.provenance == "adaptive" for x in xs) / len(xs) if xs else 0.0
    p12, p120 = pct(early), pct(late)
    assert report(6, p120 > p12, f"adaptive attribution {p12:.1f}% at 12s -> {p120:.1f}% at 120s "
                                 f"({'; '.join(per)})")


def test_criterion_7_property_suites():
    from test_coverage import _brute
    from test_oracles import _fixture_logs, _holds
    from test_testcase import fixture_ctx, random_tc, wide_ctx

    # codec round trip
    rng = random.Random(77)
    contexts = [wide_ctx(1), wide_ctx(3), fixture_ctx("quiz"), fixture_ctx("delegatecall_patched")]
    codec_fail = 0
    for i in range(10_000):
        ctx = contexts[i % len(contexts)]
        tc = random_tc(ctx, rng)
        buf = encode(tc, ctx)
        codec_fail += decode(buf, ctx) != tc
    # distance formula against the brute-force oracle, exhaustively on small operands
    dist_fail = 0
    for op in ("EQ", "LT", "GT", "SLT", "SGT"):
        for a in range(24):
            for b in range(24):
                for neg in range(3):
                    for wanted in (False, True):
                        dist_fail += distance((op, a, b, neg), wanted) != _brute(op, a, b, neg, wanted)
    # predicate tags agree with the JUMPI outcome on every fixture trace
    tag_fail, tags = 0, 0
    for name in names():
        for _, log in _fixture_logs(name, 60):
            for t in log.txs:
                for ev in t.trace:
                    if ev.op == 0x57 and len(ev.tags) > 1 and ev.tags[1] and ev.tags[1][0]:
                        op, a, b, neg = ev.tags[1][0]
                        tags += 1
                        tag_fail += (_holds(op, a, b) ^ bool(neg & 1)) != (ev.stack[1] != 0)
    # determinism with a fixed seed and an execution budget
    fx = load("staircase")

    def sig():
        r = run_campaign(fx.init_code, fx.specs, CampaignOptions(seed=42, max_execs=2000, duration=BUDGET))
        return ([(e.chromosome, e.provenance, e.new_branches) for e in r.suite],
                [x.to_json() for x in r.reports])

    same = sig() == sig()
    ok = codec_fail == 0 and dist_fail == 0 and tag_fail == 0 and tags > 0 and same
    assert report(7, ok, f"codec 10^4 round trips {codec_fail} failures; distance oracle {dist_fail} "
                         f"mismatches; predicate tags {tag_fail}/{tags} unsound; deterministic={same}")
