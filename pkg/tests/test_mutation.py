import random

from hypothesis import given, settings
from hypothesis import strategies as st

from svmfuzz.abi import FunctionSpec, parse_type
from svmfuzz.engine.mutation import (
    BYTE_OPS,
    CALL_OPS,
    LENGTH_OP,
    OPERATORS,
    WALKING_BYTE_OPS,
    Mutator,
    crossover,
    dictionary_from_code,
    interesting_values,
)
from svmfuzz.engine.testcase import Call, CodecContext, NetworkConfig, TestCase, decode, encode, layout
from svmfuzz.evm.asm import assemble


def _spec(name, types, mut="nonpayable", ctor=False):
    return FunctionSpec(name, tuple(parse_type(t) for t in types), mut, ctor)


CTOR = _spec("constructor", [], ctor=True)


def ctx_for(*funcs):
    return CodecContext(functions=list(funcs), constructor=CTOR, reserved=frozenset({0xAA}))


def tc(*calls):
    return TestCase(NetworkConfig(), Call(-1, 1, 0, []), list(calls))


def test_seventeen_operators():
    assert len(OPERATORS) == 17
    assert set(CALL_OPS) <= set(OPERATORS)


def test_prune_keeps_constructor():
    ctx = ctx_for(_spec("f", []), _spec("g", []))
    m = Mutator(ctx)
    buf = encode(tc(Call(0, 0), Call(1, 0)), ctx)
    kids = [decode(k, ctx) for k in m.mutate(buf, "pruneMethodCall")]
    assert sorted([c.function for c in k.calls] for k in kids) == [[0], [1]]
    assert all(k.constructor == Call(-1, 1, 0, []) for k in kids)


def test_prune_on_constructor_only_is_empty():
    ctx = ctx_for(_spec("f", []))
    assert Mutator(ctx).mutate(encode(tc(), ctx), "pruneMethodCall") == []


def test_swap_and_add():
    ctx = ctx_for(_spec("f", []), _spec("g", []))
    m = Mutator(ctx)
    buf = encode(tc(Call(0, 0), Call(1, 0)), ctx)
    (kid,) = m.mutate(buf, "swapMethodCall")
    assert [c.function for c in decode(kid, ctx).calls] == [1, 0]
    added = m.mutate(buf, "addMethodCall", random.Random(0))
    assert added and all(len(decode(k, ctx).calls) == 3 for k in added)


def _diff(a, b):
    return [i for i in range(len(a)) if a[i] != b[i]]


def test_single_walking_bit_on_one_byte_field():
    ctx = ctx_for(_spec("f", ["uint8"]))
    buf = encode(tc(Call(0, 0, 0, [0x5A])), ctx)
    arg = [s for s in layout(buf, ctx) if s.kind == "arg"][-1]
    assert arg.hi - arg.lo == 1
    kids = [k for k in Mutator(ctx).mutate(buf, "singleWalkingBit")
            if set(_diff(buf, k)) <= set(range(arg.lo, arg.hi))]
    assert len(kids) == 8
    for k in kids:
        assert bin(k[arg.lo] ^ buf[arg.lo]).count("1") == 1


def test_single_arith_decrement():
    ctx = ctx_for(_spec("f", ["uint8"]))
    buf = encode(tc(Call(0, 0, 0, [0x64])), ctx)
    kids = Mutator(ctx).mutate(buf, "singleArith")
    assert any(decode(k, ctx).calls[0].args == [0x63] for k in kids)
    assert any(decode(k, ctx).calls[0].args == [0x64 + 35] for k in kids)


def test_type_preserving_mutations_stay_valid():
    ctx = ctx_for(_spec("f", ["address", "bool", "int8", "bytes"], "payable"), _spec("g", ["uint16[2]"]))
    m = Mutator(ctx, dictionary=[b"\x01\x02", (7).to_bytes(32, "big")], addresses=[0xF0, 0xAA])
    buf = encode(tc(Call(0, 0, 5, [0xF0, True, -3, b"xyz"]), Call(1, 1, 0, [[1, 2]])), ctx)
    for op in OPERATORS + (LENGTH_OP,):
        for kid in m.mutate(buf, op, random.Random(1)):
            assert decode(kid, ctx) is not None, op
            assert kid != buf


def test_interesting_values_fit_width():
    assert b"\xff" in interesting_values(1)
    assert all(len(v) == 2 for v in interesting_values(2))
    assert (100).to_bytes(1, "big") in interesting_values(1)


def test_dictionary_contains_push_operands():
    code, _ = assemble("PUSH 100 PUSH 0x2710 STOP")
    d = dictionary_from_code(code)
    assert d[:2] == [b"\x64", b"\x27\x10"]
    assert (2 ** 255).to_bytes(32, "big") in d


def test_effector_skips_ineffective_segments():
    ctx = ctx_for(_spec("f", ["uint256", "uint256"]))
    m = Mutator(ctx)
    buf = encode(tc(Call(0, 0, 0, [1, 2])), ctx)
    segs = layout(buf, ctx)
    statics = [i for i, s in enumerate(segs) if s.kind == "arg"]
    effector = {i: False for i in range(len(segs)) if i != statics[1]}
    effector[statics[1]] = True
    rng = random.Random(5)
    byte_ops = tuple(BYTE_OPS)
    for _ in range(500):
        m.random_offspring(buf, rng, effector, ops=byte_ops)
    for op, i in m.log:
        if op not in WALKING_BYTE_OPS:
            assert effector.get(i) is not False, (op, i)
    walked = {i for op, i in m.log if op in WALKING_BYTE_OPS}
    assert walked - {statics[1]}  # walking bytes still probe everything


def test_sender_sweep_moves_one_call_or_all_calls():
    f = _spec("f", ["uint8"])
    ctx = CodecContext(functions=[f], constructor=CTOR, pool_size=2, reserved=frozenset({0xAA}))
    base = TestCase(NetworkConfig(accounts=[(0xF0, 10), (0xF1, 10)]), Call(-1, 2, 0, []),
                    [Call(0, 0, 0, [1]), Call(0, 1, 0, [2])])
    kids = [decode(k, ctx) for k in Mutator(ctx).sender_sweep(encode(base, ctx))]
    pairs = sorted((c.calls[0].sender, c.calls[1].sender) for c in kids)
    assert pairs == [(0, 0), (0, 2), (1, 1), (2, 1), (2, 2)]
    assert all([c.args for c in k.calls] == [[1], [2]] for k in kids)


def test_crossover_degenerate_cut():
    ctx = ctx_for(_spec("f", ["uint256"]))
    a = encode(tc(Call(0, 0, 0, [1])), ctx)
    b = encode(tc(Call(0, 0, 0, [2])), ctx)
    assert crossover(a, b, random.Random(0), ctx, cut=0) == []
    assert crossover(a, a, random.Random(0), ctx) == []


def test_crossover_inside_static_word_mixes_argument():
    ctx = ctx_for(_spec("f", ["uint256"]))
    a = encode(tc(Call(0, 0, 0, [0x1111 << 240])), ctx)
    b = encode(tc(Call(0, 0, 0, [0x2222])), ctx)
    arg = [s for s in layout(a, ctx) if s.kind == "arg"][-1]
    kids = crossover(a, b, random.Random(0), ctx, cut=arg.start + 16)
    vals = sorted(decode(k, ctx).calls[0].args[0] for k in kids)
    assert vals == [0, (0x1111 << 240) | 0x2222]


def _enumerate_cuts(a, b, ctx):
    out = {}
    for cut in range(1, min(len(a), len(b))):
        kids = crossover(a, b, random.Random(0), ctx, cut=cut)
        expect = []
        for child in (a[:cut] + b[cut:], b[:cut] + a[cut:]):
            if child not in (a, b) and child not in expect and decode(child, ctx) is not None:
                expect.append(child)
        assert kids == expect
        out[cut] = len(kids)
    return out


def test_crossover_enumeration_matches_decoder():
    ctx = ctx_for(_spec("f", ["string"]), _spec("g", ["uint8"]))
    # different payload lengths: every cut misaligns the tail, nothing survives
    a = encode(tc(Call(0, 0, 0, [b"abc"]), Call(1, 0, 0, [3])), ctx)
    b = encode(tc(Call(0, 0, 0, [b"wxyz!"]), Call(1, 0, 0, [4])), ctx)
    assert sum(_enumerate_cuts(a, b, ctx).values()) == 0
    # equal lengths: cuts inside the payload or the last word recombine
    b = encode(tc(Call(0, 0, 0, [b"xyz"]), Call(1, 0, 0, [4])), ctx)
    counts = _enumerate_cuts(a, b, ctx)
    segs = layout(a, ctx)
    payload = next(s for s in segs if s.kind == "payload")
    assert all(counts[c] == 2 for c in range(payload.start + 1, payload.end))
    assert all(counts[c] == 0 for c in range(1, payload.start + 1))


@settings(max_examples=300, deadline=None)
@given(st.integers(0, 2 ** 32), st.sampled_from(OPERATORS + (LENGTH_OP,)))
def test_random_offspring_valid_or_discarded(seed, op):
    ctx = ctx_for(_spec("f", ["bytes", "uint256[]"], "payable"), _spec("g", ["address"]))
    rng = random.Random(seed)
    m = Mutator(ctx, addresses=[0xF0, 0xAA])
    buf = encode(tc(Call(0, 0, 1, [b"hi", [1, 2, 3]]), Call(1, 1, 0, [0xF0])), ctx)
    res = m.random_offspring(buf, rng, ops=(op,))
    if res is not None:
        child, used, _ = res
        assert used == op
        assert isinstance(child, bytes)
