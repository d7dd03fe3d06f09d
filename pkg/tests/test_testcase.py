import json
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from svmfuzz.abi import FunctionSpec, constructor_of, fuzzable, parse_abi, parse_type
from svmfuzz.engine.population import init_population, random_call, random_constructor
from svmfuzz.engine.testcase import (
    Call,
    CodecContext,
    NetworkConfig,
    TestCase,
    decode,
    encode,
    from_json,
    layout,
    to_json,
)
from svmfuzz.fixtures import load, names

ALL_TYPES = ["uint8", "uint256", "int16", "int256", "address", "bool", "bytes4", "bytes32",
             "bytes", "string", "uint256[]", "int8[3]", "address[]"]


def _spec(name, types, mut="nonpayable", ctor=False):
    return FunctionSpec(name, tuple(parse_type(t) for t in types), mut, ctor)


def wide_ctx(pool_size=2):
    funcs = [_spec("a", ALL_TYPES[:7], "payable"), _spec("b", ALL_TYPES[7:]), _spec("c", [])]
    return CodecContext(functions=funcs, constructor=_spec("constructor", ["bytes", "uint8"], "payable", True),
                        pool_size=pool_size, reserved=frozenset({0xAA, 0xAB}), bound=16)


def fixture_ctx(name):
    specs = load(name).specs
    return CodecContext(functions=fuzzable(specs), constructor=constructor_of(specs),
                        reserved=frozenset({0xAA, 0xAB}))


def random_tc(ctx, rng):
    accounts = []
    for i in range(ctx.pool_size):
        accounts.append((0xF0 + i, rng.getrandbits(88)))
    config = NetworkConfig(rng.getrandbits(256), rng.getrandbits(256), accounts)
    ncalls = rng.randrange(ctx.max_calls) if ctx.functions else 0
    return TestCase(config, random_constructor(ctx, config, rng),
                    [random_call(ctx, config, rng) for _ in range(ncalls)])


def test_ten_thousand_round_trips():
    rng = random.Random(1234)
    contexts = [wide_ctx(1), wide_ctx(3)] + [fixture_ctx(n) for n in ("quiz", "nonlinear", "delegatecall_patched")]
    failures = 0
    for i in range(10_000):
        ctx = contexts[i % len(contexts)]
        tc = random_tc(ctx, rng)
        buf = encode(tc, ctx)
        back = decode(buf, ctx)
        if back != tc or encode(back, ctx) != buf:
            failures += 1
    assert failures == 0


def test_quiz_two_call_layout():
    ctx = fixture_ctx("quiz")
    f = {s.name: i for i, s in enumerate(ctx.functions)}
    tc = TestCase(NetworkConfig(), Call(-1, 1, 0, []),
                  [Call(f["start_quiz_game"], 0, 0, [b"q" * 5, b"r" * 5]),
                   Call(f["Try"], 0, 100, [b"a" * 5])])
    buf = encode(tc, ctx)
    # block, timestamp, one pool account record
    assert buf[:64] == bytes(64)
    assert buf[64:96].hex() == "ff" + "00" * 11 + "00" * 19 + "f0"
    segs = layout(buf, ctx)
    lengths = [buf[s.start] for s in segs if s.kind == "len"]
    assert lengths == [5, 5, 5]
    assert len(buf) == 96 + 32 + (34 + 12) + (34 + 6)


def test_length_prefix_past_payload_is_invalid():
    ctx = fixture_ctx("quiz")
    tc = TestCase(NetworkConfig(), Call(-1, 1, 0, []), [Call(0, 0, 0, [b"abcde"])])
    buf = bytearray(encode(tc, ctx))
    (seg,) = [s for s in layout(bytes(buf), ctx) if s.kind == "len"]
    buf[seg.start] |= 0x80
    assert decode(bytes(buf), ctx) is None


def test_value_to_non_payable_is_invalid():
    ctx = fixture_ctx("quiz")
    stop = [s.name for s in ctx.functions].index("StopGame")
    buf = encode(TestCase(NetworkConfig(), Call(-1, 1, 0, []), [Call(stop, 0, 0, [])]), ctx)
    bad = bytearray(buf)
    bad[-1] = 1
    assert decode(buf, ctx) is not None
    assert decode(bytes(bad), ctx) is None


def test_too_many_calls_invalid():
    ctx = fixture_ctx("quiz")
    stop = [s.name for s in ctx.functions].index("StopGame")
    calls = [Call(stop, 0, 0, [])] * ctx.max_calls
    assert decode(encode(TestCase(NetworkConfig(), Call(-1, 1, 0, []), calls), ctx), ctx) is None


@settings(max_examples=1000, deadline=None)
@given(st.binary(min_size=0, max_size=400))
def test_decode_is_total_and_canonical(buf):
    ctx = wide_ctx(1)
    tc = decode(buf, ctx)
    if tc is not None:
        assert encode(tc, ctx) == buf


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2 ** 32))
def test_mutable_ranges_inside_fields(seed):
    rng = random.Random(seed)
    ctx = wide_ctx(2)
    buf = encode(random_tc(ctx, rng), ctx)
    segs = layout(buf, ctx)
    prev = 0
    for s in segs:
        assert s.start <= s.lo <= s.hi <= s.end
        assert s.start >= prev
        prev = s.start


@pytest.mark.parametrize("name", ["quiz", "staircase", "gasless"])
def test_json_round_trip(name):
    ctx = fixture_ctx(name)
    rng = random.Random(7)
    for _ in range(20):
        tc = random_tc(ctx, rng)
        doc = json.loads(json.dumps(to_json(tc, ctx)))
        assert from_json(doc, ctx) == tc


def test_init_population_one_case_per_function():
    ctx = fixture_ctx("quiz")
    pop = init_population(ctx, NetworkConfig(), random.Random(0))
    assert len(pop) == 3
    assert [tc.calls[0].function for tc in pop] == [0, 1, 2]
    for tc in pop:
        for c in tc.all_calls:
            for t, v in zip(ctx.spec(c).inputs, c.args):
                if t.kind == "string":
                    assert 0 <= len(v) <= 255


def test_parameterless_population_differs_only_in_target():
    specs = parse_abi('[{"type":"function","name":"x","inputs":[]},{"type":"function","name":"y","inputs":[]}]')
    ctx = CodecContext(functions=fuzzable(specs), constructor=constructor_of(specs))
    pop = init_population(ctx, NetworkConfig(), random.Random(3))
    assert [tc.calls[0].function for tc in pop] == [0, 1]
    assert all(tc.calls[0].args == [] and tc.calls[0].value == 0 for tc in pop)


def test_every_fixture_population_encodes():
    for name in names():
        ctx = fixture_ctx(name)
        for tc in init_population(ctx, NetworkConfig(), random.Random(0)):
            assert decode(encode(tc, ctx), ctx) == tc
