"""Assembly sources for the fixture contracts.

There is no Solidity compiler in the build, so each fixture is written in
the small assembly dialect of :mod:`svmfuzz.evm.asm`, following the code
shape solc emits: a selector dispatcher, a call-value guard on non-payable
functions, and ``send``/``transfer``/``call`` idioms. The Solidity each
fixture stands for is given in its docstring-like comment.

Branch targets used by the tests are marked with labels placed right before
a JUMPI; the target is that JUMPI's fall-through edge.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from svmfuzz.abi import selector

REVERT_BLOCK = "@revert PUSH 0 DUP1 REVERT"
NONPAYABLE = "CALLVALUE PUSH @revert JUMPI"


def send(value, to="CALLER"):
    """``to.send(value)``: 2300 stipend, leaves the success flag on the stack."""
    return f"PUSH 0 PUSH 0 PUSH 0 PUSH 0 {value} {to} DUP2 ISZERO PUSH 2300 MUL CALL"


def transfer(value, to="CALLER"):
    """``to.transfer(value)``: a send that reverts on failure."""
    return send(value, to) + " ISZERO PUSH @revert JUMPI"


def call_all_gas(value="PUSH 0", to="CALLER"):
    """``to.call.value(value)()`` forwarding all remaining gas."""
    return f"PUSH 0 PUSH 0 PUSH 0 PUSH 0 {value} {to} GAS CALL"


def arg(i):
    """Load the i-th static argument word."""
    return f"PUSH {4 + 32 * i} CALLDATALOAD"


def dispatcher(entries, fallback="revert"):
    """Selector dispatch; `entries` are ``(signature, label)`` pairs."""
    lines = [
        f"PUSH 4 CALLDATASIZE LT PUSH @{fallback} JUMPI",
        "PUSH29 0x0100000000000000000000000000000000000000000000000000000000 PUSH 0 CALLDATALOAD DIV",
    ]
    for sig, label in entries:
        lines.append(f"DUP1 PUSH4 0x{selector(sig).hex()} EQ PUSH @{label} JUMPI")
    lines.append(f"PUSH @{fallback} JUMP")
    return "\n".join(lines)


@dataclass
class Fixture:
    name: str
    runtime: str
    abi: list
    ctor: str = ""
    targets: tuple = ()  # labels of JUMPIs whose fall-through edge is a target
    oracle: str | None = None  # oracle this fixture exists for
    positive: bool = True
    attacker: str = "normal"
    notes: str = ""
    ctor_args: list = field(default_factory=list)


def fn(name, inputs=(), mutability="nonpayable"):
    return {"type": "function", "name": name, "stateMutability": mutability, "outputs": [],
            "inputs": [{"name": f"a{i}", "type": t} for i, t in enumerate(inputs)]}


def ctor(inputs=(), mutability="nonpayable"):
    return {"type": "constructor", "stateMutability": mutability,
            "inputs": [{"name": f"a{i}", "type": t} for i, t in enumerate(inputs)]}


CTOR_NONPAYABLE = "CALLVALUE PUSH @ctor_revert JUMPI PUSH @ctor_ok JUMP @ctor_revert PUSH 0 DUP1 REVERT @ctor_ok"

# -- the quiz game ---------------------------------------------------------
#
# contract Quiz {
#     bytes32 responseHash;      // slot 0
#     address questionSender;    // slot 1
#     function Try(string _response) external payable {
#         if (responseHash != 0) {
#             if (msg.value == 100) {
#                 msg.sender.send(address(this).balance);   // result ignored
#             }
#         }
#     }
#     function start_quiz_game(string _question, string _response) public payable {
#         if (responseHash == 0) {
#             responseHash = keccak256(_response);
#             questionSender = msg.sender;
#         }
#     }
#     function StopGame() public {
#         if (msg.sender == questionSender) msg.sender.transfer(address(this).balance);
#     }
#     function NewQuestion(bytes32) public view returns (address) { return questionSender; }
# }

QUIZ = Fixture(
    name="quiz",
    abi=[
        fn("Try", ["string"], "payable"),
        fn("start_quiz_game", ["string", "string"], "payable"),
        fn("StopGame"),
        fn("NewQuestion", ["bytes32"], "view"),
        ctor(),
    ],
    ctor=CTOR_NONPAYABLE,
    runtime="\n".join([
        dispatcher([("Try(string)", "Try"), ("start_quiz_game(string,string)", "start"),
                    ("StopGame()", "stop"), ("NewQuestion(bytes32)", "question")]),
        "@Try",
        "PUSH 0 SLOAD ISZERO PUSH @try_end JUMPI",
        "PUSH 100 CALLVALUE EQ ISZERO PUSH @try_end reward: JUMPI",
        send("ADDRESS BALANCE") + " POP",
        "@try_end STOP",
        "@start",
        "PUSH 0 SLOAD PUSH @start_end JUMPI",
        "PUSH 36 CALLDATALOAD PUSH 4 ADD DUP1 CALLDATALOAD DUP1 SWAP2 PUSH 32 ADD PUSH 0 CALLDATACOPY",
        "PUSH 0 SHA3 PUSH 0 SSTORE CALLER PUSH 1 SSTORE",
        "@start_end STOP",
        "@stop",
        NONPAYABLE,
        "PUSH 1 SLOAD CALLER EQ ISZERO PUSH @stop_end JUMPI",
        transfer("ADDRESS BALANCE"),
        "@stop_end STOP",
        "@question",
        NONPAYABLE,
        "PUSH 1 SLOAD PUSH 0 MSTORE PUSH 32 PUSH 0 RETURN",
        REVERT_BLOCK,
    ]),
    targets=("reward",),
    oracle="GaslessSend",
)

# -- nonlinear arithmetic ---------------------------------------------------
#
# contract Nonlinear {
#     uint a; uint b;
#     function foo(uint x) public {
#         uint y = x * x + 10;
#         if (y == 110) a = 1;
#         if (y == 10010) b = 1;
#     }
# }

NONLINEAR = Fixture(
    name="nonlinear",
    abi=[fn("foo", ["uint256"]), ctor()],
    ctor=CTOR_NONPAYABLE,
    runtime="\n".join([
        dispatcher([("foo(uint256)", "foo")]),
        "@foo",
        NONPAYABLE,
        "PUSH 10 " + arg(0) + " DUP1 MUL ADD",
        "PUSH 110 DUP2 EQ ISZERO PUSH @skip1 y110: JUMPI PUSH 1 PUSH 0 SSTORE @skip1",
        "PUSH 10010 DUP2 EQ ISZERO PUSH @skip2 y10010: JUMPI PUSH 1 PUSH 1 SSTORE @skip2",
        "STOP",
        REVERT_BLOCK,
    ]),
    targets=("y110", "y10010"),
)

# -- strict conditions of several widths -----------------------------------
#
# contract Staircase {
#     uint8 level;
#     function step(uint8 k) public { if (k > 128) level = 1; if (k % 2 == 1) level = 2; }
#     function gate16(uint16 a) public { if (a == 4660) level = 3; }
#     function gate32(uint32 a, uint64 b) public {
#         if (a == 3735928559) { if (b == 123456789) level = 4; }
#     }
#     function window(uint256 x) public { if (x > 1000) { if (x < 1010) level = 5; } }
#     function gate128(uint128 x) public { if (x == 77777777) level = 6; }
#     function signedGate(int64 s) public { if (s < -5000) { if (s > -5010) level = 7; } }
# }

STAIRCASE = Fixture(
    name="staircase",
    abi=[
        fn("step", ["uint8"]),
        fn("gate16", ["uint16"]),
        fn("gate32", ["uint32", "uint64"]),
        fn("window", ["uint256"]),
        fn("gate128", ["uint128"]),
        fn("signedGate", ["int64"]),
        ctor(),
    ],
    ctor=CTOR_NONPAYABLE,
    runtime="\n".join([
        dispatcher([("step(uint8)", "step"), ("gate16(uint16)", "g16"),
                    ("gate32(uint32,uint64)", "g32"), ("window(uint256)", "win"),
                    ("gate128(uint128)", "g128"), ("signedGate(int64)", "sg")]),
        "@step", NONPAYABLE,
        "PUSH 128 " + arg(0) + " GT ISZERO PUSH @st1 JUMPI PUSH 1 PUSH 0 SSTORE @st1",
        "PUSH 2 " + arg(0) + " MOD PUSH 1 EQ ISZERO PUSH @st2 JUMPI PUSH 2 PUSH 0 SSTORE @st2",
        "STOP",
        "@g16", NONPAYABLE,
        "PUSH 4660 " + arg(0) + " EQ ISZERO PUSH @g16e t16: JUMPI PUSH 3 PUSH 0 SSTORE @g16e STOP",
        "@g32", NONPAYABLE,
        "PUSH 3735928559 " + arg(0) + " EQ ISZERO PUSH @g32e t32: JUMPI",
        "PUSH 123456789 " + arg(1) + " EQ ISZERO PUSH @g32e t64: JUMPI PUSH 4 PUSH 0 SSTORE @g32e STOP",
        "@win", NONPAYABLE,
        "PUSH 1000 " + arg(0) + " GT ISZERO PUSH @wine JUMPI",
        "PUSH 1010 " + arg(0) + " LT ISZERO PUSH @wine twin: JUMPI PUSH 5 PUSH 0 SSTORE @wine STOP",
        "@g128", NONPAYABLE,
        "PUSH 77777777 " + arg(0) + " EQ ISZERO PUSH @g128e t128: JUMPI PUSH 6 PUSH 0 SSTORE @g128e STOP",
        "@sg", NONPAYABLE,
        # -5000 and -5010 as 256-bit two's complement words
        "PUSH -5000 " + arg(0) + " SLT ISZERO PUSH @sge JUMPI",
        "PUSH -5010 " + arg(0) + " SGT ISZERO PUSH @sge tsg: JUMPI PUSH 7 PUSH 0 SSTORE @sge STOP",
        REVERT_BLOCK,
    ]),
    targets=("t16", "t32", "t64", "twin", "t128", "tsg"),
)

# -- oracle pairs -----------------------------------------------------------

# function pay() payable { msg.sender.send(msg.value); }            (result ignored)
GASLESS = Fixture(
    name="gasless", oracle="GaslessSend",
    abi=[fn("pay", [], "payable"), ctor()], ctor=CTOR_NONPAYABLE,
    runtime="\n".join([dispatcher([("pay()", "pay")]), "@pay",
                       send("CALLVALUE") + " POP STOP", REVERT_BLOCK]),
)
# function pay() payable { require(msg.sender.send(msg.value)); }
GASLESS_PATCHED = Fixture(
    name="gasless_patched", oracle="GaslessSend", positive=False,
    abi=[fn("pay", [], "payable"), ctor()], ctor=CTOR_NONPAYABLE,
    runtime="\n".join([dispatcher([("pay()", "pay")]), "@pay",
                       transfer("CALLVALUE") + " STOP", REVERT_BLOCK]),
)

# function ping() { msg.sender.call(); }                             (result ignored)
DISORDER = Fixture(
    name="exception_disorder", oracle="ExceptionDisorder",
    abi=[fn("ping"), ctor()], ctor=CTOR_NONPAYABLE,
    runtime="\n".join([dispatcher([("ping()", "ping")]), "@ping", NONPAYABLE,
                       call_all_gas() + " POP STOP", REVERT_BLOCK]),
)
# function ping() { require(msg.sender.call()); }
DISORDER_PATCHED = Fixture(
    name="exception_disorder_patched", oracle="ExceptionDisorder", positive=False,
    abi=[fn("ping"), ctor()], ctor=CTOR_NONPAYABLE,
    runtime="\n".join([dispatcher([("ping()", "ping")]), "@ping", NONPAYABLE,
                       call_all_gas() + " ISZERO PUSH @revert JUMPI STOP", REVERT_BLOCK]),
)

# mapping(address => uint) bal;
# function deposit() payable { bal[msg.sender] += msg.value; }
# function withdraw() {
#     uint b = bal[msg.sender];
#     if (b != 0) { msg.sender.call.value(b)(); bal[msg.sender] = 0; }
# }
_DEPOSIT = "@deposit CALLVALUE CALLER SLOAD ADD CALLER SSTORE STOP"
REENTRANCY = Fixture(
    name="reentrancy", oracle="Reentrancy", attacker="reentrancy",
    abi=[fn("deposit", [], "payable"), fn("withdraw"), ctor()], ctor=CTOR_NONPAYABLE,
    runtime="\n".join([
        dispatcher([("deposit()", "deposit"), ("withdraw()", "withdraw")]),
        _DEPOSIT,
        "@withdraw", NONPAYABLE,
        "CALLER SLOAD DUP1 ISZERO PUSH @wd_end JUMPI",
        call_all_gas("DUP5") + " POP",
        "PUSH 0 CALLER SSTORE",
        "@wd_end STOP",
        REVERT_BLOCK,
    ]),
)
# function withdraw() {
#     uint b = bal[msg.sender];
#     require(b != 0);
#     bal[msg.sender] = 0;
#     require(msg.sender.call.value(b)());
# }
REENTRANCY_PATCHED = Fixture(
    name="reentrancy_patched", oracle="Reentrancy", attacker="reentrancy", positive=False,
    abi=[fn("deposit", [], "payable"), fn("withdraw"), ctor()], ctor=CTOR_NONPAYABLE,
    runtime="\n".join([
        dispatcher([("deposit()", "deposit"), ("withdraw()", "withdraw")]),
        _DEPOSIT,
        "@withdraw", NONPAYABLE,
        "CALLER SLOAD DUP1 ISZERO PUSH @revert JUMPI",
        "PUSH 0 CALLER SSTORE",
        call_all_gas("DUP5") + " ISZERO PUSH @revert JUMPI",
        "STOP",
        REVERT_BLOCK,
    ]),
)

# function play() payable { if (now % 2 == 0) msg.sender.transfer(msg.value); }
TIMESTAMP = Fixture(
    name="timestamp", oracle="TimestampDependency",
    abi=[fn("play", [], "payable"), ctor()], ctor=CTOR_NONPAYABLE,
    runtime="\n".join([dispatcher([("play()", "play")]), "@play",
                       "PUSH 2 TIMESTAMP MOD PUSH @play_end JUMPI",
                       transfer("CALLVALUE"), "@play_end STOP", REVERT_BLOCK]),
)
# function play() payable { if (msg.value % 2 == 0) msg.sender.transfer(msg.value); }
TIMESTAMP_PATCHED = Fixture(
    name="timestamp_patched", oracle="TimestampDependency", positive=False,
    abi=[fn("play", [], "payable"), ctor()], ctor=CTOR_NONPAYABLE,
    runtime="\n".join([dispatcher([("play()", "play")]), "@play",
                       "PUSH 2 CALLVALUE MOD PUSH @play_end JUMPI",
                       transfer("CALLVALUE"), "@play_end STOP", REVERT_BLOCK]),
)
# uint lastPing;
# function ping() payable { if (lastPing < now) lastPing = now; msg.sender.transfer(msg.value); }
# The timestamp never influences the transfer, yet the tainted branch and the
# Ether transfer share a transaction: the oracle's documented false positive.
TIMESTAMP_FP = Fixture(
    name="timestamp_false_positive", oracle="TimestampDependency",
    abi=[fn("ping", [], "payable"), ctor()], ctor=CTOR_NONPAYABLE,
    notes="known false positive: flagged although the transfer ignores the timestamp",
    runtime="\n".join([dispatcher([("ping()", "ping")]), "@ping",
                       "TIMESTAMP PUSH 0 SLOAD LT ISZERO PUSH @keep JUMPI TIMESTAMP PUSH 0 SSTORE @keep",
                       transfer("CALLVALUE"), "STOP", REVERT_BLOCK]),
)

# function play() payable { if (block.number % 2 == 0) msg.sender.transfer(msg.value); }
BLOCKNUMBER = Fixture(
    name="blocknumber", oracle="BlockNumberDependency",
    abi=[fn("play", [], "payable"), ctor()], ctor=CTOR_NONPAYABLE,
    runtime="\n".join([dispatcher([("play()", "play")]), "@play",
                       "PUSH 2 NUMBER MOD PUSH @play_end JUMPI",
                       transfer("CALLVALUE"), "@play_end STOP", REVERT_BLOCK]),
)
BLOCKNUMBER_PATCHED = Fixture(
    name="blocknumber_patched", oracle="BlockNumberDependency", positive=False,
    abi=[fn("play", [], "payable"), ctor()], ctor=CTOR_NONPAYABLE,
    runtime="\n".join([dispatcher([("play()", "play")]), "@play",
                       "PUSH 2 CALLVALUE MOD PUSH @play_end JUMPI",
                       transfer("CALLVALUE"), "@play_end STOP", REVERT_BLOCK]),
)

_DELEGATE = "PUSH 0 PUSH 0 PUSH 0 PUSH 0 {target} GAS DELEGATECALL POP STOP"
# function forward(address lib) { lib.delegatecall(); }
DELEGATE = Fixture(
    name="delegatecall", oracle="DangerousDelegateCall",
    abi=[fn("forward", ["address"]), ctor()], ctor=CTOR_NONPAYABLE,
    runtime="\n".join([dispatcher([("forward(address)", "fwd")]), "@fwd", NONPAYABLE,
                       _DELEGATE.format(target=arg(0)), REVERT_BLOCK]),
)
# address lib;  constructor(address _lib) { lib = _lib; }
# function forward(address) { lib.delegatecall(); }
DELEGATE_PATCHED = Fixture(
    name="delegatecall_patched", oracle="DangerousDelegateCall", positive=False,
    abi=[fn("forward", ["address"]), ctor(["address"])],
    ctor=CTOR_NONPAYABLE + " PUSH 32 PUSH $args PUSH 0 CODECOPY PUSH 0 MLOAD PUSH 0 SSTORE",
    runtime="\n".join([dispatcher([("forward(address)", "fwd")]), "@fwd", NONPAYABLE,
                       _DELEGATE.format(target="PUSH 0 SLOAD"), REVERT_BLOCK]),
)

# uint sum;  function add(uint a, uint b) { sum = a + b; }
OVERFLOW = Fixture(
    name="overflow", oracle="IntegerOverflow",
    abi=[fn("add", ["uint256", "uint256"]), ctor()], ctor=CTOR_NONPAYABLE,
    runtime="\n".join([dispatcher([("add(uint256,uint256)", "add")]), "@add", NONPAYABLE,
                       arg(1) + " " + arg(0) + " ADD PUSH 0 SSTORE STOP", REVERT_BLOCK]),
)
# function add(uint a, uint b) { require(b <= ~a); sum = a + b; }    (checked before adding)
OVERFLOW_PATCHED = Fixture(
    name="overflow_patched", oracle="IntegerOverflow", positive=False,
    abi=[fn("add", ["uint256", "uint256"]), ctor()], ctor=CTOR_NONPAYABLE,
    runtime="\n".join([dispatcher([("add(uint256,uint256)", "add")]), "@add", NONPAYABLE,
                       arg(0) + " NOT " + arg(1) + " GT PUSH @revert JUMPI",
                       arg(1) + " " + arg(0) + " ADD PUSH 0 SSTORE STOP", REVERT_BLOCK]),
)

# mapping(address => uint) bal;  function withdraw(uint amt) { bal[msg.sender] = bal[msg.sender] - amt; }
UNDERFLOW = Fixture(
    name="underflow", oracle="IntegerUnderflow",
    abi=[fn("withdraw", ["uint256"]), ctor()], ctor=CTOR_NONPAYABLE,
    runtime="\n".join([dispatcher([("withdraw(uint256)", "wd")]), "@wd", NONPAYABLE,
                       arg(0) + " CALLER SLOAD SUB CALLER SSTORE STOP", REVERT_BLOCK]),
)
# function withdraw(uint amt) { require(amt <= bal[msg.sender]); bal[msg.sender] -= amt; }
UNDERFLOW_PATCHED = Fixture(
    name="underflow_patched", oracle="IntegerUnderflow", positive=False,
    abi=[fn("withdraw", ["uint256"]), ctor()], ctor=CTOR_NONPAYABLE,
    runtime="\n".join([dispatcher([("withdraw(uint256)", "wd")]), "@wd", NONPAYABLE,
                       "CALLER SLOAD " + arg(0) + " GT PUSH @revert JUMPI",
                       arg(0) + " CALLER SLOAD SUB CALLER SSTORE STOP", REVERT_BLOCK]),
)

# function deposit() payable {}                                      (no way out)
FREEZING = Fixture(
    name="freezing", oracle="FreezingEther",
    abi=[fn("deposit", [], "payable"), ctor()], ctor=CTOR_NONPAYABLE,
    runtime="\n".join([dispatcher([("deposit()", "deposit")]), "@deposit STOP", REVERT_BLOCK]),
)
# function deposit() payable {}
# function withdraw() { if (address(this).balance > 0) msg.sender.transfer(address(this).balance); }
FREEZING_PATCHED = Fixture(
    name="freezing_patched", oracle="FreezingEther", positive=False,
    abi=[fn("deposit", [], "payable"), fn("withdraw"), ctor()], ctor=CTOR_NONPAYABLE,
    runtime="\n".join([
        dispatcher([("deposit()", "deposit"), ("withdraw()", "withdraw")]),
        "@deposit STOP",
        "@withdraw", NONPAYABLE,
        "PUSH 0 ADDRESS BALANCE GT ISZERO PUSH @wd_end JUMPI",
        transfer("ADDRESS BALANCE"),
        "@wd_end STOP",
        REVERT_BLOCK,
    ]),
)

ALL = [
    QUIZ, NONLINEAR, STAIRCASE,
    GASLESS, GASLESS_PATCHED, DISORDER, DISORDER_PATCHED, REENTRANCY, REENTRANCY_PATCHED,
    TIMESTAMP, TIMESTAMP_PATCHED, TIMESTAMP_FP, BLOCKNUMBER, BLOCKNUMBER_PATCHED,
    DELEGATE, DELEGATE_PATCHED, OVERFLOW, OVERFLOW_PATCHED, UNDERFLOW, UNDERFLOW_PATCHED,
    FREEZING, FREEZING_PATCHED,
]
BY_NAME = {f.name: f for f in ALL}
STRICT_CONDITION = ("quiz", "nonlinear", "staircase")
