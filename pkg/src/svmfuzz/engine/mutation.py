"""Mutation operators and single-point crossover over chromosomes.

Byte-level operators only touch a field's mutable range and never cross a
field boundary. Call-level operators (prune/add/swap) act on the decoded call
list and re-encode, so arguments move together with their call.
"""

from __future__ import annotations

from svmfuzz.engine.population import argument_addresses, random_call
from svmfuzz.engine.testcase import Invalid, TestCase, encode, parse

ARITH_MAX = 35
INTERESTING = (
    0, 1, -1, 16, 32, 64, 100, 127, 128, 255, 256,
    2**15 - 1, 2**16, 2**31 - 1, 2**32, 2**255, 2**256 - 1,
)

BYTE_OPS = {
    "singleWalkingBit": ("bit", 1),
    "twoWalkingBit": ("bit", 2),
    "fourWalkingBit": ("bit", 4),
    "singleWalkingByte": ("byte", 1),
    "twoWalkingByte": ("byte", 2),
    "fourWalkingByte": ("byte", 4),
    "singleArith": ("arith", 1),
    "twoArith": ("arith", 2),
    "fourArith": ("arith", 4),
    "singleInterest": ("interest", 1),
    "twoInterest": ("interest", 2),
    "fourInterest": ("interest", 4),
    "overwriteWithDictionary": ("dict", 1),
    "overwriteWithAddressDictionary": ("addr", 20),
}
CALL_OPS = ("pruneMethodCall", "addMethodCall", "swapMethodCall")
OPERATORS = tuple(BYTE_OPS) + CALL_OPS
LENGTH_OP = "mutateLength"
WALKING_BYTE_OPS = frozenset({"singleWalkingByte", "twoWalkingByte", "fourWalkingByte"})


def interesting_values(width):
    """Interesting values that fit in `width` bytes, as byte strings (−1 = all ones)."""
    top = 1 << (8 * width)
    out = []
    for v in INTERESTING:
        v = top - 1 if v == -1 else v
        if v < top:
            b = v.to_bytes(width, "big")
            if b not in out:
                out.append(b)
    return out


_INTEREST = {w: interesting_values(w) for w in (1, 2, 4)}
# the values too wide for 4-byte windows are offered as whole-word dictionary tokens
WIDE_TOKENS = tuple(
    v.to_bytes(32, "big") for v in INTERESTING if v >= 1 << 32
)


def dictionary_from_code(code):
    """Distinct PUSH operands of `code`, in first-seen order, plus wide interesting words."""
    from svmfuzz.evm.opcodes import push_operands

    seen = []
    for tok in push_operands(code):
        if tok not in seen:
            seen.append(tok)
    for tok in WIDE_TOKENS:
        if tok not in seen:
            seen.append(tok)
    return seen


def _eligible(op, seg):
    kind, w = BYTE_OPS[op]
    if kind == "addr":
        return seg.ptype is not None and seg.ptype.kind == "address"
    return seg.hi - seg.lo >= w


def _apply(buf, op, seg, pos, param):
    """Apply byte-level `op` at `pos` (a bit index for walking bits) in place."""
    kind, w = BYTE_OPS[op]
    if kind == "bit":
        for b in range(pos, pos + w):
            buf[b >> 3] ^= 0x80 >> (b & 7)
    elif kind == "byte":
        for i in range(pos, pos + w):
            buf[i] ^= 0xFF
    elif kind == "arith":
        x = int.from_bytes(buf[pos:pos + w], "big")
        buf[pos:pos + w] = ((x + param) % (1 << (8 * w))).to_bytes(w, "big")
    elif kind == "interest" or kind == "dict":
        buf[pos:pos + len(param)] = param
    elif kind == "addr":
        buf[seg.hi - 20:seg.hi] = param.to_bytes(20, "big")


class Mutator:
    """Produces offspring chromosomes for one contract."""

    def __init__(self, ctx, dictionary=(), addresses=()):
        self.ctx = ctx
        self.dictionary = list(dictionary)
        self.addresses = list(addresses)
        self.log = []  # (operator, segment index) of every random byte-level mutation

    # -- exhaustive enumeration ------------------------------------------

    def _sites(self, op, seg):
        kind, w = BYTE_OPS[op]
        if kind == "bit":
            for b in range(seg.lo * 8, seg.hi * 8 - w + 1):
                yield b, None
        elif kind == "byte":
            for p in range(seg.lo, seg.hi - w + 1):
                yield p, None
        elif kind == "arith":
            for p in range(seg.lo, seg.hi - w + 1):
                for d in range(1, ARITH_MAX + 1):
                    yield p, d
                    yield p, -d
        elif kind == "interest":
            for p in range(seg.lo, seg.hi - w + 1):
                for v in _INTEREST[w]:
                    yield p, v
        elif kind == "dict":
            for tok in self.dictionary:
                for p in range(seg.lo, seg.hi - len(tok) + 1):
                    yield p, tok
        elif kind == "addr":
            for a in self.addresses:
                yield seg.lo, a

    def mutate(self, buf, op, rng=None):
        """Every distinct valid offspring of `buf` under `op` (input excluded)."""
        buf = bytes(buf)
        try:
            tc, segs = parse(buf, self.ctx)
        except Invalid:
            return []
        out = []
        seen = {buf}

        def keep(child):
            if child not in seen and _valid(child, self.ctx):
                seen.add(child)
                out.append(child)

        if op in CALL_OPS:
            for child in self._call_level(tc, op, rng, exhaustive=True):
                keep(child)
            return out
        if op == LENGTH_OP:
            for i, seg in enumerate(segs):
                if seg.kind == "len":
                    keep(self._relength(buf, segs, i, rng.randint(0, self.ctx.bound)))
            return out
        if op not in BYTE_OPS:
            raise ValueError(f"unknown operator {op}")
        for seg in segs:
            if not _eligible(op, seg):
                continue
            for pos, param in self._sites(op, seg):
                child = bytearray(buf)
                _apply(child, op, seg, pos, param)
                keep(bytes(child))
        return out

    def sender_sweep(self, buf):
        """Valid offspring of `buf` that move calls to other senders: each call
        alone to every other sender, then the whole sequence to each sender.

        Only a few of the 256 values of a sender byte are valid, so random byte
        operators rarely move a call to another account. A new seed gets this
        sweep once.
        """
        buf = bytes(buf)
        try:
            _, segs = parse(buf, self.ctx)
        except Invalid:
            return []
        where = [seg.lo for seg in segs if seg.kind == "sender"]
        variants = []
        for p in where:
            for s in range(self.ctx.n_senders):
                variants.append(((p, s),))
        for s in range(self.ctx.n_senders):
            variants.append(tuple((p, s) for p in where))
        out = []
        seen = {buf}
        for v in variants:
            child = bytearray(buf)
            for p, s in v:
                child[p] = s
            child = bytes(child)
            if child not in seen and _valid(child, self.ctx):
                seen.add(child)
                out.append(child)
        return out

    # -- call-level operators -------------------------------------------

    def _call_level(self, tc, op, rng, exhaustive=False):
        ctx = self.ctx
        calls = tc.calls
        variants = []
        if op == "pruneMethodCall":
            for i in range(len(calls)):
                variants.append(calls[:i] + calls[i + 1:])
        elif op == "swapMethodCall":
            for i in range(len(calls)):
                for j in range(i + 1, len(calls)):
                    v = list(calls)
                    v[i], v[j] = v[j], v[i]
                    variants.append(v)
        elif op == "addMethodCall":
            if len(calls) + 1 < ctx.max_calls and ctx.functions:
                addrs = argument_addresses(ctx, tc.config)
                positions = range(len(calls) + 1) if exhaustive else [rng.randint(0, len(calls))]
                for i in positions:
                    new = random_call(ctx, tc.config, rng, addresses=addrs)
                    variants.append(calls[:i] + [new] + calls[i:])
        if not exhaustive and variants:
            variants = [rng.choice(variants)]
        return [encode(TestCase(tc.config, tc.constructor, v), ctx) for v in variants]

    def _relength(self, buf, segs, i, n):
        seg = segs[i]
        t = seg.ptype
        old = buf[seg.start]
        unit = 1 if t.kind in ("bytes", "string") else 32
        body_start = seg.end
        body_end = body_start + old * unit
        body = buf[body_start:body_end]
        if n <= old:
            body = body[:n * unit]
        else:
            body = body + bytes((n - old) * unit)
        return bytes(buf[:seg.start]) + bytes([n]) + bytes(body) + bytes(buf[body_end:])

    # -- random single offspring ----------------------------------------

    def random_offspring(self, buf, rng, effector=None, focus=None, ops=None):
        """One random offspring ``(child, op, segment index)``, or None.

        `effector` maps segment index to True (effective) / False (ineffective);
        ineffective segments are skipped by all but the walking-byte operators.
        `focus` is a segment index favoured half of the time.
        """
        try:
            tc, segs = parse(buf, self.ctx)
        except Invalid:
            return None
        op = rng.choice(ops or OPERATORS + (LENGTH_OP,))
        if op in CALL_OPS:
            kids = self._call_level(tc, op, rng)
            return (kids[0], op, None) if kids else None
        if op == LENGTH_OP:
            idx = [i for i, s in enumerate(segs) if s.kind == "len"]
            if not idx:
                return None
            i = rng.choice(idx)
            return self._relength(buf, segs, i, rng.randint(0, self.ctx.bound)), op, i
        kind, w = BYTE_OPS[op]
        idx = [i for i, s in enumerate(segs) if _eligible(op, s)]
        if effector and op not in WALKING_BYTE_OPS:
            live = [i for i in idx if effector.get(i) is not False]
            if live:
                idx = live
        if not idx:
            return None
        if focus is not None and focus in idx and rng.random() < 0.5:
            i = focus
        else:
            i = rng.choice(idx)
        seg = segs[i]
        if kind == "bit":
            pos = rng.randint(seg.lo * 8, seg.hi * 8 - w)
            param = None
        elif kind == "byte":
            pos = rng.randint(seg.lo, seg.hi - w)
            param = None
        elif kind == "arith":
            pos = rng.randint(seg.lo, seg.hi - w)
            param = rng.randint(1, ARITH_MAX) * rng.choice((1, -1))
        elif kind == "interest":
            pos = rng.randint(seg.lo, seg.hi - w)
            param = rng.choice(_INTEREST[w])
        elif kind == "dict":
            toks = [t for t in self.dictionary if len(t) <= seg.hi - seg.lo]
            if not toks:
                return None
            param = rng.choice(toks)
            pos = rng.randint(seg.lo, seg.hi - len(param))
        else:
            if not self.addresses:
                return None
            pos, param = seg.lo, rng.choice(self.addresses)
        child = bytearray(buf)
        _apply(child, op, seg, pos, param)
        self.log.append((op, i))
        if len(self.log) > 100_000:
            del self.log[:50_000]
        return bytes(child), op, i


def _valid(buf, ctx):
    try:
        parse(buf, ctx)
        return True
    except Invalid:
        return False


def crossover(a, b, rng, ctx, cut=None):
    """Single-point crossover; returns the valid offspring (0 to 2)."""
    a, b = bytes(a), bytes(b)
    if a == b:
        return []
    n = min(len(a), len(b))
    if n < 2:
        return []
    if cut is None:
        cut = rng.randint(1, n - 1)
    kids = []
    for child in (a[:cut] + b[cut:], b[:cut] + a[cut:]):
        if child not in (a, b) and child not in kids and _valid(child, ctx):
            kids.append(child)
    return kids
