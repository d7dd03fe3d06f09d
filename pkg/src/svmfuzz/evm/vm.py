"""Instrumented mini EVM.

The interpreter runs a documented opcode subset over 256-bit words and emits
one :class:`TraceEvent` per executed opcode, before the opcode's effects are
applied. Every stack slot carries an optional predicate tag (set by the
comparison opcodes, carried through ISZERO) and a taint bitmask recording
whether the value derives from TIMESTAMP, NUMBER, calldata or the success
flag of a particular CALL.
"""

from __future__ import annotations

from collections import namedtuple
from dataclasses import dataclass, field

from svmfuzz.evm import opcodes as O
from svmfuzz.hashing import keccak256

WORD_MOD = 1 << 256
WORD_MASK = WORD_MOD - 1
ADDR_MASK = (1 << 160) - 1
SIGN_BIT = 1 << 255
MAX_DEPTH = 64
STACK_LIMIT = 1024
MEMORY_LIMIT = 1 << 20

TAINT_TIMESTAMP = 1
TAINT_NUMBER = 2
TAINT_CALLDATA = 4
# bit (CALLFLAG_SHIFT + k) marks values derived from the k-th CALL's success flag
CALLFLAG_SHIFT = 3

EXTERNAL = "external"
CONTRACT_UNDER_TEST = "contract-under-test"
ATTACKER_NORMAL = "attacker-normal"
ATTACKER_REENTRANCY = "attacker-reentrancy"
ATTACKER_KINDS = (ATTACKER_NORMAL, ATTACKER_REENTRANCY)

SUCCESS = "success"
REVERT = "revert"
EXCEPTION = "exception"

TraceEvent = namedtuple(
    "TraceEvent", "index pc op gas depth address stack tags aux"
)
TraceEvent.__doc__ = """One executed opcode.

`address` is the account whose code is running (for DELEGATECALL this is
the library, not the storage context). `stack` and `tags` hold up to four topmost slots, top first. A tag is either
None or a pair ``(predicate, taint)`` where predicate is None or
``(opname, a, b, negations)``.
"""

_new_event = tuple.__new__


class VMError(Exception):
    pass


class OutOfGas(VMError):
    pass


class StackError(VMError):
    pass


class BadJump(VMError):
    pass


class InvalidOpcode(VMError):
    pass


class DeploymentFailed(Exception):
    def __init__(self, result):
        super().__init__(f"constructor ended with {result.status}")
        self.result = result


def to_signed(x):
    return x - WORD_MOD if x & SIGN_BIT else x


@dataclass(slots=True)
class Account:
    address: int
    balance: int = 0
    code: bytes = b""
    storage: dict = field(default_factory=dict)
    storage_taint: dict = field(default_factory=dict)
    kind: str = EXTERNAL
    nonce: int = 0

    def copy(self):
        return Account(self.address, self.balance, self.code, dict(self.storage),
                       dict(self.storage_taint), self.kind, self.nonce)


class World:
    """Account state plus the block environment, with a rollback journal."""

    def __init__(self, block_number=0, timestamp=0):
        self.accounts = {}
        self.block_number = block_number
        self.timestamp = timestamp
        self._journal = []
        self._destroyed = set()

    def add(self, account):
        if account.address in self.accounts:
            raise ValueError(f"duplicate address {account.address:#x}")
        self.accounts[account.address] = account
        return account

    def get(self, address):
        return self.accounts.get(address)

    def balance(self, address):
        acct = self.accounts.get(address)
        return acct.balance if acct else 0

    def copy(self):
        w = World(self.block_number, self.timestamp)
        w.accounts = {a: acct.copy() for a, acct in self.accounts.items()}
        return w

    def state_digest(self):
        """Hashable view of all account state, used by rollback tests."""
        return tuple(sorted(
            (a.address, a.balance, a.code, tuple(sorted(a.storage.items())), a.nonce)
            for a in self.accounts.values()
        ))

    # journaled mutation -------------------------------------------------

    def snapshot(self):
        return len(self._journal)

    def revert(self, mark):
        journal = self._journal
        accounts = self.accounts
        while len(journal) > mark:
            entry = journal.pop()
            tag = entry[0]
            if tag == "s":
                _, acct, key, old, old_taint = entry
                if old is None:
                    acct.storage.pop(key, None)
                else:
                    acct.storage[key] = old
                if old_taint:
                    acct.storage_taint[key] = old_taint
                else:
                    acct.storage_taint.pop(key, None)
            elif tag == "b":
                entry[1].balance = entry[2]
            elif tag == "n":
                entry[1].nonce = entry[2]
            elif tag == "c":
                entry[1].code = entry[2]
            elif tag == "new":
                accounts.pop(entry[1], None)
            elif tag == "d":
                self._destroyed.discard(entry[1])

    def commit(self):
        for address in self._destroyed:
            acct = self.accounts.get(address)
            if acct is not None:
                acct.code = b""
                acct.storage.clear()
                acct.storage_taint.clear()
        self._destroyed.clear()
        self._journal.clear()

    def set_storage(self, acct, key, value, taint):
        self._journal.append(("s", acct, key, acct.storage.get(key), acct.storage_taint.get(key, 0)))
        if value:
            acct.storage[key] = value
        else:
            acct.storage.pop(key, None)
        if taint:
            acct.storage_taint[key] = taint
        else:
            acct.storage_taint.pop(key, None)

    def set_balance(self, acct, value):
        self._journal.append(("b", acct, acct.balance))
        acct.balance = value

    def set_code(self, acct, code):
        self._journal.append(("c", acct, acct.code))
        acct.code = code

    def bump_nonce(self, acct):
        self._journal.append(("n", acct, acct.nonce))
        acct.nonce += 1

    def create_account(self, address, kind=EXTERNAL):
        acct = Account(address, kind=kind)
        self.accounts[address] = acct
        self._journal.append(("new", address))
        return acct

    def mark_destroyed(self, address):
        if address not in self._destroyed:
            self._destroyed.add(address)
            self._journal.append(("d", address))

    def transfer(self, src, dst, value):
        """Move `value` wei; False (and no change) if `src` cannot pay."""
        if not value:
            return True
        a = self.accounts.get(src)
        if a is None or a.balance < value:
            return False
        b = self.accounts.get(dst)
        if b is None:
            b = self.create_account(dst)
        self.set_balance(a, a.balance - value)
        self.set_balance(b, b.balance + value)
        return True


def contract_address(creator, nonce):
    """Deterministic address for the `nonce`-th contract created by `creator`."""
    digest = keccak256(creator.to_bytes(20, "big") + nonce.to_bytes(32, "big"))
    return int.from_bytes(digest[12:], "big")


@dataclass
class Message:
    caller: int
    callee: int
    value: int = 0
    data: bytes = b""
    gas: int = 1_000_000
    depth: int = 0
    is_delegate: bool = False
    code_address: int | None = None

    def __post_init__(self):
        if self.depth > MAX_DEPTH:
            raise ValueError(f"message depth {self.depth} exceeds {MAX_DEPTH}")
        if self.gas < 0:
            raise ValueError("negative gas")


@dataclass
class FrameRecord:
    depth: int
    address: int
    code_address: int
    caller: int
    value: int
    kind: str
    start: int
    end: int = -1
    status: str | None = None


@dataclass
class ExecResult:
    status: str
    return_data: bytes
    gas_used: int
    trace: list
    frames: list
    created: int | None = None

    @property
    def nested_results(self):
        return [f.status for f in self.frames[1:]]

    def compact(self, keep_ops):
        """Copy keeping only events whose opcode is in `keep_ops`."""
        kept = [ev for ev in self.trace if ev.op in keep_ops]
        return ExecResult(self.status, self.return_data, self.gas_used, kept,
                          self.frames, self.created)


_JUMPDEST_CACHE = {}


def _dests(code):
    d = _JUMPDEST_CACHE.get(code)
    if d is None:
        if len(_JUMPDEST_CACHE) > 4096:
            _JUMPDEST_CACHE.clear()
        d = _JUMPDEST_CACHE[code] = O.jumpdests(code)
    return d


_STACK_IN = [-1] * 256
for _op, _n in O.STACK_IN.items():
    _STACK_IN[_op] = _n

_CMP_NAMES = {O.LT: "LT", O.GT: "GT", O.SLT: "SLT", O.SGT: "SGT", O.EQ: "EQ"}


def _sdiv(a, b):
    if b == 0:
        return 0
    sa, sb = to_signed(a), to_signed(b)
    q = abs(sa) // abs(sb)
    if (sa < 0) != (sb < 0):
        q = -q
    return q & WORD_MASK


def _byte(i, x):
    return (x >> (8 * (31 - i))) & 0xFF if i < 32 else 0


_BINARY = {
    O.ADD: lambda a, b: (a + b) & WORD_MASK,
    O.MUL: lambda a, b: (a * b) & WORD_MASK,
    O.SUB: lambda a, b: (a - b) & WORD_MASK,
    O.DIV: lambda a, b: a // b if b else 0,
    O.SDIV: _sdiv,
    O.MOD: lambda a, b: a % b if b else 0,
    O.EXP: lambda a, b: pow(a, b, WORD_MOD),
    O.AND: lambda a, b: a & b,
    O.OR: lambda a, b: a | b,
    O.XOR: lambda a, b: a ^ b,
    O.BYTE: _byte,
}

_COMPARE = {
    O.LT: lambda a, b: a < b,
    O.GT: lambda a, b: a > b,
    O.SLT: lambda a, b: to_signed(a) < to_signed(b),
    O.SGT: lambda a, b: to_signed(a) > to_signed(b),
    O.EQ: lambda a, b: a == b,
}


def _merge(ma, mb):
    if ma is None:
        if mb is None:
            return None
        t = mb[1]
    elif mb is None:
        t = ma[1]
    else:
        t = ma[1] | mb[1]
    return (None, t) if t else None


def _taint_only(m):
    if m is None or not m[1]:
        return None
    return (None, m[1]) if m[0] is not None else m


def _expand(mem, off, size):
    if size:
        end = off + size
        if end > MEMORY_LIMIT:
            raise OutOfGas("memory limit")
        if end > len(mem):
            mem.extend(bytes(((end + 31) // 32) * 32 - len(mem)))


def _mem_taint(mtaint, off, size):
    if not size or not mtaint:
        return 0
    t = 0
    for w in range(off >> 5, ((off + size - 1) >> 5) + 1):
        t |= mtaint.get(w, 0)
    return t


def _set_mem_taint(mtaint, off, size, taint):
    if not size:
        return
    for w in range(off >> 5, ((off + size - 1) >> 5) + 1):
        if taint:
            mtaint[w] = taint
        else:
            mtaint.pop(w, None)


class VM:
    """Executes messages against a :class:`World`, feeding events to `hook`."""

    def __init__(self, world, hook=None, gas_schedule=None):
        self.world = world
        self.hook = hook
        self.costs = O.gas_table(gas_schedule)
        self.trace = []
        self.frames = []
        self.active = []
        self.call_count = 0

    # public entry points -----------------------------------------------

    def execute(self, msg):
        """Run one top-level transaction and return its full result."""
        self._reset()
        status, ret, left = self._call(msg, "call")
        if status == SUCCESS:
            self.world.commit()
        else:
            self.world._journal.clear()
        return ExecResult(status, ret, msg.gas - left, self.trace, self.frames)

    def create(self, creator, init_code, value=0, gas=3_000_000, kind=CONTRACT_UNDER_TEST):
        """Deploy `init_code`; returns an ExecResult whose `created` is the address."""
        self._reset()
        mark = self.world.snapshot()
        status, ret, left, addr = self._create(creator, value, bytes(init_code), gas, 0, kind)
        if status == SUCCESS:
            self.world.commit()
        else:
            self.world.revert(mark)
            self.world._journal.clear()
        return ExecResult(status, ret, gas - left, self.trace, self.frames,
                          addr if status == SUCCESS else None)

    def _reset(self):
        self.trace = []
        self.frames = []
        self.active = []
        self.call_count = 0

    # frames ------------------------------------------------------------

    def _call(self, msg, kind):
        world = self.world
        mark = world.snapshot()
        storage_addr = msg.callee
        code_addr = msg.code_address if msg.is_delegate else msg.callee
        frame = FrameRecord(msg.depth, storage_addr, code_addr, msg.caller, msg.value,
                            kind, len(self.trace))
        self.frames.append(frame)
        self.active.append(msg)
        try:
            if not msg.is_delegate and msg.value:
                if not world.transfer(msg.caller, msg.callee, msg.value):
                    status, ret, left = EXCEPTION, b"", 0
                    return status, ret, left
            target = world.accounts.get(code_addr)
            if target is None:
                if world.accounts.get(storage_addr) is None:
                    world.create_account(storage_addr)
                status, ret, left = SUCCESS, b"", msg.gas
            elif target.kind in ATTACKER_KINDS:
                from svmfuzz.evm.attackers import attacker_behavior
                status, ret, left = attacker_behavior(target.kind, msg, world, self)
            elif not target.code:
                status, ret, left = SUCCESS, b"", msg.gas
            else:
                status, ret, left = self._run(msg, target.code, storage_addr, code_addr)
        finally:
            self.active.pop()
        if status != SUCCESS:
            world.revert(mark)
        frame.end = len(self.trace)
        frame.status = status
        return status, ret, left

    def _create(self, creator, value, init_code, gas, depth, kind=CONTRACT_UNDER_TEST):
        world = self.world
        creator_acct = world.accounts.get(creator)
        if creator_acct is None:
            creator_acct = world.create_account(creator)
        addr = contract_address(creator, creator_acct.nonce)
        world.bump_nonce(creator_acct)
        mark = world.snapshot()
        if addr in world.accounts:
            return EXCEPTION, b"", 0, addr
        world.create_account(addr, kind)
        msg = Message(creator, addr, value, b"", gas, depth)
        frame = FrameRecord(depth, addr, addr, creator, value, "create", len(self.trace))
        self.frames.append(frame)
        self.active.append(msg)
        try:
            if value and not world.transfer(creator, addr, value):
                status, ret, left = EXCEPTION, b"", 0
            else:
                status, ret, left = self._run(msg, init_code, addr)
        finally:
            self.active.pop()
        if status == SUCCESS:
            world.set_code(world.accounts[addr], bytes(ret))
        else:
            world.revert(mark)
        frame.end = len(self.trace)
        frame.status = status
        return status, ret, left, addr

    # interpreter loop ----------------------------------------------------

    def _run(self, msg, code, address, code_owner=None):
        world = self.world
        account = world.accounts[address]
        trace = self.trace
        hook = self.hook
        costs = self.costs
        stack_in = _STACK_IN
        dests = _dests(code)
        depth = msg.depth
        data = msg.data
        owner = address if code_owner is None else code_owner
        stack = []
        metas = []
        mem = bytearray()
        mtaint = {}
        gas = msg.gas
        pc = 0
        n = len(code)
        push = stack.append
        mpush = metas.append
        pop = stack.pop
        mpop = metas.pop
        try:
            while True:
                op = code[pc] if pc < n else 0
                cost = costs[op]
                aux = None
                if op >= 0xF0 or op == O.SSTORE or op == O.SHA3 or op == O.EXP:
                    cost, aux = self._pre(op, stack, metas, cost, gas)
                if cost > gas:
                    raise OutOfGas(op)
                trace.append(_new_event(TraceEvent, (
                    len(trace), pc, op, gas, depth, owner,
                    tuple(stack[-1:-5:-1]), tuple(metas[-1:-5:-1]), aux)))
                if hook is not None:
                    hook(trace[-1])
                gas -= cost
                need = stack_in[op]
                if need < 0:
                    raise InvalidOpcode(op)
                if len(stack) < need:
                    raise StackError(f"underflow at pc {pc}")

                if 0x60 <= op <= 0x7F:
                    size = op - 0x5F
                    push(int.from_bytes(code[pc + 1:pc + 1 + size].ljust(size, b"\x00"), "big"))
                    mpush(None)
                    pc += size + 1
                    if len(stack) > STACK_LIMIT:
                        raise StackError("overflow")
                    continue
                if 0x80 <= op <= 0x8F:
                    i = op - 0x7F
                    push(stack[-i])
                    mpush(metas[-i])
                    if len(stack) > STACK_LIMIT:
                        raise StackError("overflow")
                elif 0x90 <= op <= 0x9F:
                    i = op - 0x8E
                    stack[-1], stack[-i] = stack[-i], stack[-1]
                    metas[-1], metas[-i] = metas[-i], metas[-1]
                elif op in _BINARY:
                    a = pop()
                    b = pop()
                    ma = mpop()
                    mb = mpop()
                    push(_BINARY[op](a, b))
                    mpush(None if ma is None and mb is None else _merge(ma, mb))
                elif op in _COMPARE:
                    a = pop()
                    b = pop()
                    ma = mpop()
                    mb = mpop()
                    push(1 if _COMPARE[op](a, b) else 0)
                    t = (ma[1] if ma else 0) | (mb[1] if mb else 0)
                    mpush(((_CMP_NAMES[op], a, b, 0), t))
                elif op == O.JUMPI:
                    dest = pop()
                    cond = pop()
                    mpop()
                    mpop()
                    if cond:
                        if dest not in dests:
                            raise BadJump(dest)
                        pc = dest
                        continue
                elif op == O.JUMP:
                    dest = pop()
                    mpop()
                    if dest not in dests:
                        raise BadJump(dest)
                    pc = dest
                    continue
                elif op == O.JUMPDEST:
                    pass
                elif op == O.POP:
                    pop()
                    mpop()
                elif op == O.ISZERO:
                    v = pop()
                    m = mpop()
                    push(0 if v else 1)
                    if m is not None and m[0] is not None:
                        p = m[0]
                        mpush(((p[0], p[1], p[2], p[3] + 1), m[1]))
                    else:
                        mpush(m)
                elif op == O.NOT:
                    push(WORD_MASK ^ pop())
                    mpush(_taint_only(mpop()))
                elif op == O.MLOAD:
                    off = pop()
                    mpop()
                    _expand(mem, off, 32)
                    push(int.from_bytes(mem[off:off + 32], "big"))
                    t = _mem_taint(mtaint, off, 32)
                    mpush((None, t) if t else None)
                elif op == O.MSTORE:
                    off = pop()
                    v = pop()
                    mpop()
                    m = mpop()
                    _expand(mem, off, 32)
                    mem[off:off + 32] = v.to_bytes(32, "big")
                    _set_mem_taint(mtaint, off, 32, m[1] if m else 0)
                elif op == O.MSTORE8:
                    off = pop()
                    v = pop()
                    mpop()
                    m = mpop()
                    _expand(mem, off, 1)
                    mem[off] = v & 0xFF
                    if m and m[1]:
                        mtaint[off >> 5] = mtaint.get(off >> 5, 0) | m[1]
                elif op == O.SLOAD:
                    key = pop()
                    mpop()
                    push(account.storage.get(key, 0))
                    t = account.storage_taint.get(key, 0)
                    mpush((None, t) if t else None)
                elif op == O.SSTORE:
                    key = pop()
                    v = pop()
                    mpop()
                    m = mpop()
                    world.set_storage(account, key, v, m[1] if m else 0)
                elif op == O.CALLDATALOAD:
                    off = pop()
                    m = mpop()
                    push(int.from_bytes(data[off:off + 32].ljust(32, b"\x00"), "big")
                         if off < len(data) else 0)
                    mpush((None, TAINT_CALLDATA | (m[1] if m else 0)))
                elif op == O.CALLDATASIZE:
                    push(len(data))
                    mpush((None, TAINT_CALLDATA))
                elif op == O.CALLDATACOPY:
                    dst = pop()
                    off = pop()
                    size = pop()
                    mpop()
                    mpop()
                    mpop()
                    _expand(mem, dst, size)
                    chunk = data[off:off + size] if off < len(data) else b""
                    mem[dst:dst + size] = chunk.ljust(size, b"\x00")
                    _set_mem_taint(mtaint, dst, size, TAINT_CALLDATA)
                elif op == O.CODECOPY:
                    dst = pop()
                    off = pop()
                    size = pop()
                    mpop()
                    mpop()
                    mpop()
                    _expand(mem, dst, size)
                    chunk = code[off:off + size] if off < n else b""
                    mem[dst:dst + size] = chunk.ljust(size, b"\x00")
                    _set_mem_taint(mtaint, dst, size, 0)
                elif op == O.SHA3:
                    off = pop()
                    size = pop()
                    mpop()
                    mpop()
                    _expand(mem, off, size)
                    push(int.from_bytes(keccak256(bytes(mem[off:off + size])), "big"))
                    t = _mem_taint(mtaint, off, size)
                    mpush((None, t) if t else None)
                elif op == O.CALLER:
                    push(msg.caller)
                    mpush(None)
                elif op == O.CALLVALUE:
                    push(msg.value)
                    mpush(None)
                elif op == O.ADDRESS:
                    push(address)
                    mpush(None)
                elif op == O.BALANCE:
                    a = pop() & ADDR_MASK
                    mpop()
                    push(world.balance(a))
                    mpush(None)
                elif op == O.TIMESTAMP:
                    push(world.timestamp)
                    mpush((None, TAINT_TIMESTAMP))
                elif op == O.NUMBER:
                    push(world.block_number)
                    mpush((None, TAINT_NUMBER))
                elif op == O.PC:
                    push(pc)
                    mpush(None)
                elif op == O.GAS:
                    push(gas)
                    mpush(None)
                elif O.LOG0 <= op <= O.LOG4:
                    off = pop()
                    size = pop()
                    for _ in range(op - O.LOG0):
                        pop()
                    del metas[len(metas) - (op - O.LOG0 + 2):]
                    _expand(mem, off, size)
                elif op == O.STOP:
                    return SUCCESS, b"", gas
                elif op == O.RETURN or op == O.REVERT:
                    off = pop()
                    size = pop()
                    mpop()
                    mpop()
                    _expand(mem, off, size)
                    out = bytes(mem[off:off + size])
                    return (SUCCESS if op == O.RETURN else REVERT), out, gas
                elif op == O.CALL or op == O.DELEGATECALL:
                    gas = self._do_call(op, msg, address, stack, metas, mem, mtaint, gas, aux)
                elif op == O.CREATE:
                    value = pop()
                    off = pop()
                    size = pop()
                    del metas[-3:]
                    _expand(mem, off, size)
                    fwd = gas - gas // 64
                    gas -= fwd
                    if depth + 1 > MAX_DEPTH or account.balance < value:
                        push(0)
                        gas += fwd
                    else:
                        status, _, left, addr = self._create(
                            address, value, bytes(mem[off:off + size]), fwd, depth + 1,
                            EXTERNAL)
                        gas += left
                        push(addr if status == SUCCESS else 0)
                    mpush(None)
                elif op == O.SELFDESTRUCT:
                    beneficiary = pop() & ADDR_MASK
                    mpop()
                    bal = account.balance
                    if bal:
                        world.set_balance(account, 0)
                        dst = world.accounts.get(beneficiary) or world.create_account(beneficiary)
                        world.set_balance(dst, dst.balance + bal)
                    world.mark_destroyed(address)
                    return SUCCESS, b"", gas
                else:
                    raise InvalidOpcode(op)
                pc += 1
        except VMError:
            return EXCEPTION, b"", 0

    def _pre(self, op, stack, metas, cost, gas):
        """Dynamic gas and the aux payload, computed before the event is emitted."""
        aux = None
        if op == O.SHA3:
            if len(stack) >= 2:
                cost += O.SHA3_WORD_GAS * ((stack[-2] + 31) // 32)
        elif op == O.EXP:
            if len(stack) >= 2:
                cost += O.EXP_BYTE_GAS * ((stack[-2].bit_length() + 7) // 8)
        elif op == O.SSTORE:
            if len(stack) >= 2:
                m = metas[-2]
                aux = {"key": stack[-1], "value": stack[-2], "taint": m[1] if m else 0}
        elif op == O.CALL:
            if len(stack) >= 7:
                avail = gas - cost
                cap = avail - avail // 64 if avail > 0 else 0
                fwd = min(stack[-1], cap)
                value = stack[-3]
                aux = {"callee": stack[-2] & ADDR_MASK, "value": value,
                       "forwarded": fwd, "gas": fwd + (O.CALL_STIPEND if value else 0),
                       "flag_bit": 1 << (CALLFLAG_SHIFT + self.call_count),
                       "success": None}
        elif op == O.DELEGATECALL:
            if len(stack) >= 6:
                avail = gas - cost
                cap = avail - avail // 64 if avail > 0 else 0
                fwd = min(stack[-1], cap)
                aux = {"target": stack[-2] & ADDR_MASK, "forwarded": fwd, "gas": fwd,
                       "flag_bit": 1 << (CALLFLAG_SHIFT + self.call_count),
                       "success": None}
        elif op == O.SELFDESTRUCT:
            if stack:
                aux = {"beneficiary": stack[-1] & ADDR_MASK,
                       "value": self.world.balance(self.active[-1].callee)}
        return cost, aux

    def _do_call(self, op, msg, address, stack, metas, mem, mtaint, gas, aux):
        world = self.world
        pop = stack.pop
        pop()  # requested gas; the forwarded amount is already in aux
        to = pop() & ADDR_MASK
        if op == O.CALL:
            value = pop()
            nargs = 7
        else:
            value = 0
            nargs = 6
        in_off = pop()
        in_size = pop()
        out_off = pop()
        out_size = pop()
        del metas[-nargs:]
        _expand(mem, in_off, in_size)
        _expand(mem, out_off, out_size)
        self.call_count += 1
        fwd = aux["forwarded"]
        gas -= fwd
        callee_gas = aux["gas"]
        flag = 0
        if msg.depth + 1 <= MAX_DEPTH and (value == 0 or world.balance(address) >= value):
            payload = bytes(mem[in_off:in_off + in_size])
            if op == O.CALL:
                child = Message(address, to, value, payload, callee_gas, msg.depth + 1)
                status, ret, left = self._call(child, "call")
            else:
                child = Message(msg.caller, address, msg.value, payload, callee_gas,
                                msg.depth + 1, True, to)
                status, ret, left = self._call(child, "delegatecall")
            gas += left
            if status == SUCCESS:
                flag = 1
            if out_size and ret:
                k = min(out_size, len(ret))
                mem[out_off:out_off + k] = ret[:k]
                _set_mem_taint(mtaint, out_off, k, 0)
        else:
            gas += fwd
        aux["success"] = flag
        stack.append(flag)
        metas.append((None, aux["flag_bit"]))
        return gas


def execute_message(world, msg, hook=None, gas_schedule=None):
    """Execute one top-level message; `world` is mutated only on success."""
    if msg.callee not in world.accounts:
        raise KeyError(f"unknown callee {msg.callee:#x}")
    if msg.gas <= 0:
        raise ValueError("message gas must be positive")
    return VM(world, hook, gas_schedule).execute(msg)


def deploy(world, creator, init_code, value=0, hook=None, gas=3_000_000):
    """Run `init_code` and install the returned runtime code at a fresh address."""
    if creator not in world.accounts:
        raise KeyError(f"unknown creator {creator:#x}")
    if not init_code:
        raise ValueError("empty init code")
    result = VM(world, hook).create(creator, init_code, value, gas)
    if result.status != SUCCESS:
        raise DeploymentFailed(result)
    return result.created
