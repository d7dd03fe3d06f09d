"""Opcode table for the supported EVM subset and the flat gas schedule."""

STOP = 0x00
ADD = 0x01
MUL = 0x02
SUB = 0x03
DIV = 0x04
SDIV = 0x05
MOD = 0x06
EXP = 0x0A
LT = 0x10
GT = 0x11
SLT = 0x12
SGT = 0x13
EQ = 0x14
ISZERO = 0x15
AND = 0x16
OR = 0x17
XOR = 0x18
NOT = 0x19
BYTE = 0x1A
SHA3 = 0x20
ADDRESS = 0x30
BALANCE = 0x31
CALLER = 0x33
CALLVALUE = 0x34
CALLDATALOAD = 0x35
CALLDATASIZE = 0x36
CALLDATACOPY = 0x37
CODECOPY = 0x39
TIMESTAMP = 0x42
NUMBER = 0x43
POP = 0x50
MLOAD = 0x51
MSTORE = 0x52
MSTORE8 = 0x53
SLOAD = 0x54
SSTORE = 0x55
JUMP = 0x56
JUMPI = 0x57
PC = 0x58
GAS = 0x5A
JUMPDEST = 0x5B
PUSH1 = 0x60
PUSH32 = 0x7F
DUP1 = 0x80
DUP16 = 0x8F
SWAP1 = 0x90
SWAP16 = 0x9F
LOG0 = 0xA0
LOG4 = 0xA4
CREATE = 0xF0
CALL = 0xF1
RETURN = 0xF3
DELEGATECALL = 0xF4
REVERT = 0xFD
INVALID = 0xFE
SELFDESTRUCT = 0xFF

NAMES = {
    STOP: "STOP", ADD: "ADD", MUL: "MUL", SUB: "SUB", DIV: "DIV", SDIV: "SDIV",
    MOD: "MOD", EXP: "EXP", LT: "LT", GT: "GT", SLT: "SLT", SGT: "SGT", EQ: "EQ",
    ISZERO: "ISZERO", AND: "AND", OR: "OR", XOR: "XOR", NOT: "NOT", BYTE: "BYTE",
    SHA3: "SHA3", ADDRESS: "ADDRESS", BALANCE: "BALANCE", CALLER: "CALLER",
    CALLVALUE: "CALLVALUE", CALLDATALOAD: "CALLDATALOAD",
    CALLDATASIZE: "CALLDATASIZE", CALLDATACOPY: "CALLDATACOPY",
    CODECOPY: "CODECOPY", TIMESTAMP: "TIMESTAMP", NUMBER: "NUMBER", POP: "POP",
    MLOAD: "MLOAD", MSTORE: "MSTORE", MSTORE8: "MSTORE8", SLOAD: "SLOAD",
    SSTORE: "SSTORE", JUMP: "JUMP", JUMPI: "JUMPI", PC: "PC", GAS: "GAS",
    JUMPDEST: "JUMPDEST", CREATE: "CREATE", CALL: "CALL", RETURN: "RETURN",
    DELEGATECALL: "DELEGATECALL", REVERT: "REVERT", INVALID: "INVALID",
    SELFDESTRUCT: "SELFDESTRUCT",
}
for _i in range(32):
    NAMES[PUSH1 + _i] = f"PUSH{_i + 1}"
for _i in range(16):
    NAMES[DUP1 + _i] = f"DUP{_i + 1}"
    NAMES[SWAP1 + _i] = f"SWAP{_i + 1}"
for _i in range(5):
    NAMES[LOG0 + _i] = f"LOG{_i}"

SUPPORTED = frozenset(NAMES) - {INVALID}
BY_NAME = {name: op for op, name in NAMES.items()}

# stack items consumed by each opcode (used for underflow checks)
STACK_IN = {
    STOP: 0, ADD: 2, MUL: 2, SUB: 2, DIV: 2, SDIV: 2, MOD: 2, EXP: 2, LT: 2,
    GT: 2, SLT: 2, SGT: 2, EQ: 2, ISZERO: 1, AND: 2, OR: 2, XOR: 2, NOT: 1,
    BYTE: 2, SHA3: 2, ADDRESS: 0, BALANCE: 1, CALLER: 0, CALLVALUE: 0,
    CALLDATALOAD: 1, CALLDATASIZE: 0, CALLDATACOPY: 3, CODECOPY: 3,
    TIMESTAMP: 0, NUMBER: 0, POP: 1, MLOAD: 1, MSTORE: 2, MSTORE8: 2, SLOAD: 1,
    SSTORE: 2, JUMP: 1, JUMPI: 2, PC: 0, GAS: 0, JUMPDEST: 0, CREATE: 3,
    CALL: 7, RETURN: 2, DELEGATECALL: 6, REVERT: 2, INVALID: 0, SELFDESTRUCT: 1,
}
for _i in range(32):
    STACK_IN[PUSH1 + _i] = 0
for _i in range(16):
    STACK_IN[DUP1 + _i] = _i + 1
    STACK_IN[SWAP1 + _i] = _i + 2
for _i in range(5):
    STACK_IN[LOG0 + _i] = _i + 2

DEFAULT_GAS = {
    "default": 3,
    SSTORE: 5000,
    CALL: 700,
    DELEGATECALL: 700,
    CREATE: 32000,
    SHA3: 30,
    EXP: 10,
    JUMPDEST: 1,
    STOP: 0,
    RETURN: 0,
    REVERT: 0,
    INVALID: 0,
}
SHA3_WORD_GAS = 6
EXP_BYTE_GAS = 50
CALL_STIPEND = 2300


def gas_table(overrides=None):
    """Expand a sparse schedule into a 256-entry list of base costs."""
    schedule = dict(DEFAULT_GAS)
    if overrides:
        schedule.update(overrides)
    base = schedule.pop("default")
    table = [base] * 256
    for op, cost in schedule.items():
        table[op] = cost
    return table


def is_push(op):
    return PUSH1 <= op <= PUSH32


def jumpdests(code):
    """Valid JUMPDEST offsets, skipping PUSH immediates."""
    dests = set()
    i, n = 0, len(code)
    while i < n:
        op = code[i]
        if op == JUMPDEST:
            dests.add(i)
        elif PUSH1 <= op <= PUSH32:
            i += op - PUSH1 + 1
        i += 1
    return frozenset(dests)


def push_operands(code):
    """All PUSH immediates in `code`, in order of appearance."""
    out = []
    i, n = 0, len(code)
    while i < n:
        op = code[i]
        if PUSH1 <= op <= PUSH32:
            size = op - PUSH1 + 1
            out.append(bytes(code[i + 1:i + 1 + size]).ljust(size, b"\x00"))
            i += size
        i += 1
    return out
