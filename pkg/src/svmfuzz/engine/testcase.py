"""Test cases and their fixed-layout byte encoding (the chromosome).

Layout, all integers big-endian:

    config   block number (32) | timestamp (32) | pool_size x account record (32)
             account record = balance (12) ++ address (20)
    ctor     call value (32) | constructor arguments
    call*    function index (1) | sender index (1) | call value (32) | arguments

Static arguments take one 32-byte word each (fixed arrays one word per
element). Dynamic arguments take a 1-byte length followed by the payload:
raw bytes for ``bytes``/``string``, one word per element for arrays. Every
field also has a *mutable range*: the bytes a byte-level mutation may touch
without breaking the type (for example the low 20 bytes of an address word,
or nothing at all for the value of a non-payable function).
"""

from __future__ import annotations

from collections import namedtuple
from dataclasses import dataclass, field

from svmfuzz.abi import MAX_DYNAMIC_LENGTH, FunctionSpec, ParamType, encode_call

DEFAULT_BLOCK = 0
DEFAULT_TIMESTAMP = 0
DEFAULT_ACCOUNT = 0xF0
DEFAULT_BALANCE = 0xFF << 88  # record 0xff00..00f0: balance 0xff0000000000000000000000
VALUE_BYTES = 12
MAX_CALLS = 5

Segment = namedtuple("Segment", "start end kind lo hi call ptype")
Segment.__doc__ = """One field of a chromosome.

`start`/`end` delimit the field, `lo`/`hi` its mutable bytes (lo == hi when
immutable). `call` is 0 for the constructor, i >= 1 for the i-th call and
None for configuration fields.
"""


class Invalid(ValueError):
    pass


@dataclass
class NetworkConfig:
    block_number: int = DEFAULT_BLOCK
    timestamp: int = DEFAULT_TIMESTAMP
    accounts: list = field(default_factory=lambda: [(DEFAULT_ACCOUNT, DEFAULT_BALANCE)])

    @property
    def addresses(self):
        return [a for a, _ in self.accounts]

    @property
    def balances(self):
        return {a: b for a, b in self.accounts}


@dataclass
class Call:
    function: int  # index into the fuzzable functions; -1 for the constructor
    sender: int  # index into pool accounts, pool_size means the loaded attacker
    value: int = 0
    args: list = field(default_factory=list)


@dataclass
class TestCase:
    __test__ = False  # not a pytest class

    config: NetworkConfig
    constructor: Call
    calls: list

    @property
    def all_calls(self):
        return [self.constructor] + list(self.calls)


@dataclass
class CodecContext:
    """Everything the codec needs to know about the contract and the pool."""

    functions: list  # fuzzable FunctionSpecs
    constructor: FunctionSpec
    pool_size: int = 1
    attacker: int = 0xAA
    attacker_balance: int = DEFAULT_BALANCE
    reserved: frozenset = frozenset()  # addresses pool accounts may not take
    bound: int = MAX_DYNAMIC_LENGTH
    max_calls: int = MAX_CALLS

    @property
    def n_senders(self):
        return self.pool_size + 1

    def sender_address(self, config, index):
        return self.attacker if index == self.pool_size else config.accounts[index][0]

    def sender_balance(self, config, index):
        return self.attacker_balance if index == self.pool_size else config.accounts[index][1]

    def spec(self, call):
        return self.constructor if call.function < 0 else self.functions[call.function]

    def calldata(self, call, bound=None):
        return encode_call(self.spec(call), call.args, bound or self.bound)


# -- encoding ---------------------------------------------------------------


def _word(v):
    return v.to_bytes(32, "big")


def _static_bytes(t: ParamType, v):
    k = t.kind
    if k == "uint" or k == "address":
        return _word(v)
    if k == "int":
        return _word(v % (1 << t.bits))
    if k == "bool":
        return _word(1 if v else 0)
    if k == "fixedbytes":
        return bytes(v).ljust(32, b"\x00")
    if k == "array":
        return b"".join(_static_bytes(t.elem, x) for x in v)
    raise Invalid(f"{t} is not static")


def _arg_bytes(t: ParamType, v):
    if t.kind in ("bytes", "string"):
        if isinstance(v, str):
            v = v.encode()
        return bytes([len(v)]) + bytes(v)
    if t.kind == "array" and t.length is None:
        return bytes([len(v)]) + b"".join(_static_bytes(t.elem, x) for x in v)
    return _static_bytes(t, v)


def encode(tc: TestCase, ctx: CodecContext) -> bytes:
    out = bytearray()
    cfg = tc.config
    out += _word(cfg.block_number) + _word(cfg.timestamp)
    for addr, bal in cfg.accounts:
        out += bal.to_bytes(VALUE_BYTES, "big") + addr.to_bytes(20, "big")
    out += _word(tc.constructor.value)
    for t, v in zip(ctx.constructor.inputs, tc.constructor.args):
        out += _arg_bytes(t, v)
    for c in tc.calls:
        out.append(c.function)
        out.append(c.sender)
        out += _word(c.value)
        for t, v in zip(ctx.functions[c.function].inputs, c.args):
            out += _arg_bytes(t, v)
    return bytes(out)


# -- decoding ---------------------------------------------------------------


def _mut_range(t: ParamType, start):
    k = t.kind
    if k in ("uint", "int"):
        return start + 32 - t.bits // 8, start + 32
    if k == "address":
        return start + 12, start + 32
    if k == "bool":
        return start + 31, start + 32
    if k == "fixedbytes":
        return start, start + t.bits
    raise Invalid(f"{t} has no word layout")


def _read_static(buf, pos, t: ParamType, segs, call):
    if t.kind == "array":
        vals = []
        for _ in range(t.length):
            v, pos = _read_static(buf, pos, t.elem, segs, call)
            vals.append(v)
        return vals, pos
    end = pos + 32
    if end > len(buf):
        raise Invalid("truncated word")
    w = int.from_bytes(buf[pos:end], "big")
    lo, hi = _mut_range(t, pos)
    k = t.kind
    if k == "uint":
        if w >> t.bits:
            raise Invalid("uint out of range")
        v = w
    elif k == "int":
        if w >> t.bits:
            raise Invalid("int word not canonical")
        v = w - (1 << t.bits) if w >> (t.bits - 1) else w
    elif k == "address":
        if w >> 160:
            raise Invalid("address out of range")
        v = w
    elif k == "bool":
        if w > 1:
            raise Invalid("bool out of range")
        v = bool(w)
    else:  # fixedbytes
        if any(buf[pos + t.bits:end]):
            raise Invalid("bytesN padding not zero")
        v = bytes(buf[pos:pos + t.bits])
    segs.append(Segment(pos, end, "arg", lo, hi, call, t))
    return v, end


def _read_arg(buf, pos, t: ParamType, segs, call, bound):
    if t.kind in ("bytes", "string") or (t.kind == "array" and t.length is None):
        if pos >= len(buf):
            raise Invalid("missing length byte")
        n = buf[pos]
        if n > bound:
            raise Invalid("length beyond bound")
        segs.append(Segment(pos, pos + 1, "len", pos, pos, call, t))
        pos += 1
        if t.kind == "array":
            vals = []
            for _ in range(n):
                v, pos = _read_static(buf, pos, t.elem, segs, call)
                vals.append(v)
            return vals, pos
        end = pos + n
        if end > len(buf):
            raise Invalid("truncated payload")
        segs.append(Segment(pos, end, "payload", pos, end, call, t))
        return bytes(buf[pos:end]), end
    return _read_static(buf, pos, t, segs, call)


def parse(buf, ctx: CodecContext):
    """Decode and validate; returns ``(TestCase, segments)`` or raises Invalid."""
    segs = []
    n = len(buf)
    head = 64 + 32 * ctx.pool_size
    if n < head + 32:
        raise Invalid("truncated header")
    block = int.from_bytes(buf[0:32], "big")
    ts = int.from_bytes(buf[32:64], "big")
    segs.append(Segment(0, 32, "block", 0, 32, None, None))
    segs.append(Segment(32, 64, "timestamp", 32, 64, None, None))
    accounts = []
    seen = set(ctx.reserved)
    pos = 64
    for _ in range(ctx.pool_size):
        bal = int.from_bytes(buf[pos:pos + VALUE_BYTES], "big")
        addr = int.from_bytes(buf[pos + VALUE_BYTES:pos + 32], "big")
        if addr == 0 or addr in seen:
            raise Invalid("pool address zero or duplicated")
        seen.add(addr)
        accounts.append((addr, bal))
        segs.append(Segment(pos, pos + 32, "account", pos, pos + 32, None, None))
        pos += 32
    config = NetworkConfig(block, ts, accounts)

    def read_value(pos, spec, sender_balance, call):
        v = int.from_bytes(buf[pos:pos + 32], "big")
        if v and not spec.payable:
            raise Invalid("value sent to non-payable function")
        if v >> (8 * VALUE_BYTES):
            raise Invalid("value wider than a balance")
        if v > sender_balance:
            raise Invalid("value exceeds sender balance")
        lo = pos + 32 - VALUE_BYTES if spec.payable else pos
        segs.append(Segment(pos, pos + 32, "value", lo, pos + 32 if spec.payable else pos, call, None))
        return v

    cvalue = read_value(pos, ctx.constructor, ctx.attacker_balance, 0)
    pos += 32
    cargs = []
    for t in ctx.constructor.inputs:
        v, pos = _read_arg(buf, pos, t, segs, 0, ctx.bound)
        cargs.append(v)
    ctor = Call(-1, ctx.pool_size, cvalue, cargs)
    calls = []
    while pos < n:
        if len(calls) + 1 >= ctx.max_calls:
            raise Invalid("too many calls")
        if pos + 34 > n:
            raise Invalid("truncated call header")
        fidx, sidx = buf[pos], buf[pos + 1]
        if fidx >= len(ctx.functions):
            raise Invalid("function index out of range")
        if sidx >= ctx.n_senders:
            raise Invalid("sender index out of range")
        ci = len(calls) + 1
        segs.append(Segment(pos, pos + 1, "function", pos, pos, ci, None))
        segs.append(Segment(pos + 1, pos + 2, "sender", pos + 1, pos + 2, ci, None))
        spec = ctx.functions[fidx]
        value = read_value(pos + 2, spec, ctx.sender_balance(config, sidx), ci)
        pos += 34
        args = []
        for t in spec.inputs:
            v, pos = _read_arg(buf, pos, t, segs, ci, ctx.bound)
            args.append(v)
        calls.append(Call(fidx, sidx, value, args))
    return TestCase(config, ctor, calls), segs


def decode(buf, ctx: CodecContext):
    """The TestCase encoded by `buf`, or None if it is not a valid encoding."""
    try:
        return parse(buf, ctx)[0]
    except Invalid:
        return None


def layout(buf, ctx: CodecContext):
    return parse(buf, ctx)[1]


def is_valid(buf, ctx):
    return decode(buf, ctx) is not None


# -- persistence ------------------------------------------------------------


def to_json(tc: TestCase, ctx: CodecContext, **extra):
    """JSON-ready dict for one suite member."""
    calls = []
    for c in tc.all_calls:
        spec = ctx.spec(c)
        data = ctx.calldata(c)
        calls.append({
            "function": spec.signature if not spec.is_constructor else "constructor",
            "args": data.hex() if spec.is_constructor else data[4:].hex(),
            "value": c.value,
            "caller": f"{ctx.sender_address(tc.config, c.sender):#042x}",
        })
    doc = {
        "config": {
            "block_number": tc.config.block_number,
            "timestamp": tc.config.timestamp,
            "accounts": [{"address": f"{a:#042x}", "balance": b} for a, b in tc.config.accounts],
        },
        "calls": calls,
        "chromosome": encode(tc, ctx).hex(),
    }
    doc.update(extra)
    return doc


def from_json(doc, ctx: CodecContext):
    """Rebuild a TestCase from :func:`to_json` output; validated via the codec."""
    tc = decode(bytes.fromhex(doc["chromosome"]), ctx)
    if tc is None:
        raise Invalid("imported test case is not valid for this contract")
    return tc
