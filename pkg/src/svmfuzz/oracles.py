"""Vulnerability oracles evaluated offline over batches of execution logs.

Each oracle is a predicate over one transaction's (compacted) trace and
frame list. FreezingEther is the exception: it looks at the whole campaign
and is evaluated once, at the end.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

from svmfuzz.evm import opcodes as O
from svmfuzz.evm.vm import (
    ATTACKER_REENTRANCY,
    EXCEPTION,
    REVERT,
    SUCCESS,
    TAINT_CALLDATA,
    TAINT_NUMBER,
    TAINT_TIMESTAMP,
    WORD_MOD,
)

BATCH_SIZE = 500
STIPEND = O.CALL_STIPEND

GASLESS_SEND = "GaslessSend"
EXCEPTION_DISORDER = "ExceptionDisorder"
REENTRANCY = "Reentrancy"
TIMESTAMP_DEPENDENCY = "TimestampDependency"
BLOCKNUMBER_DEPENDENCY = "BlockNumberDependency"
DANGEROUS_DELEGATECALL = "DangerousDelegateCall"
INTEGER_OVERFLOW = "IntegerOverflow"
INTEGER_UNDERFLOW = "IntegerUnderflow"
FREEZING_ETHER = "FreezingEther"

ORACLE_IDS = (
    GASLESS_SEND, EXCEPTION_DISORDER, REENTRANCY, TIMESTAMP_DEPENDENCY,
    BLOCKNUMBER_DEPENDENCY, DANGEROUS_DELEGATECALL, INTEGER_OVERFLOW,
    INTEGER_UNDERFLOW, FREEZING_ETHER,
)

_KEEP = frozenset({O.JUMPI, O.CALL, O.DELEGATECALL, O.SSTORE, O.SELFDESTRUCT})


@dataclass
class TxLog:
    index: int  # 0 = constructor
    status: str
    value: int
    trace: list  # compacted events, original indices preserved in ev.index
    frames: list


@dataclass
class ExecutionLog:
    test_id: int
    chromosome: bytes
    cut: int  # address of the contract under test
    attacker_kind: str
    txs: list = field(default_factory=list)


@dataclass
class VulnerabilityReport:
    oracle: str
    test_id: int
    tx_index: int
    evidence: tuple  # (first, last) event index within that transaction's trace
    confidence: str = "definite"
    chromosome: str = ""
    detail: str = ""

    def to_json(self):
        d = asdict(self)
        d["evidence"] = list(self.evidence)
        return d


def compact_trace(trace, cut):
    """Keep only the events the oracles read.

    Control-flow, call, storage and self-destruct events are kept as they
    are; ADD/MUL/SUB of the contract under test are kept only when they wrap.
    """
    out = []
    keep = _KEEP
    for ev in trace:
        op = ev.op
        if op in keep:
            out.append(ev)
        elif (op == O.ADD or op == O.MUL or op == O.SUB) and ev.address == cut and len(ev.stack) >= 2:
            a, b = ev.stack[0], ev.stack[1]
            if (op == O.ADD and a + b >= WORD_MOD) or (op == O.MUL and a * b >= WORD_MOD) \
                    or (op == O.SUB and a < b):
                out.append(ev)
    return out


# -- per-transaction predicates --------------------------------------------


def gasless_send(tx):
    trace = tx.trace
    for i, ev in enumerate(trace):
        if ev.op != O.CALL or ev.aux is None:
            continue
        aux = ev.aux
        if aux["gas"] == STIPEND and aux["value"] > 0 and aux["success"] == 0:
            bit = aux["flag_bit"]
            checked = any(
                later.op == O.JUMPI and len(later.tags) > 1 and later.tags[1] is not None
                and later.tags[1][1] & bit
                for later in trace[i + 1:]
            )
            if not checked:
                return (ev.index, ev.index)
    return None


def exception_disorder(tx):
    if tx.status != SUCCESS:
        return None
    for f in tx.frames[1:]:
        if f.status in (EXCEPTION, REVERT):
            return (f.start, max(f.start, f.end - 1))
    return None


def reentrancy(tx, cut, attacker_kind):
    if attacker_kind != ATTACKER_REENTRANCY:
        return None
    cut_frames = [f for f in tx.frames if f.address == cut and f.kind != "create"]
    for outer in cut_frames:
        for inner in cut_frames:
            if inner.depth < outer.depth + 2 or not outer.start < inner.start < outer.end:
                continue
            for ev in tx.trace:
                if inner.start <= ev.index < inner.end and ev.depth == inner.depth:
                    if ev.op == O.SSTORE or (ev.op == O.CALL and ev.aux and ev.aux["value"] > 0):
                        return (inner.start, ev.index)
    return None


def _tainted_jumpi(trace, bit):
    for ev in trace:
        if ev.op == O.JUMPI and len(ev.tags) > 1 and ev.tags[1] is not None and ev.tags[1][1] & bit:
            return ev
    return None


def _value_call(trace):
    for ev in trace:
        if ev.op == O.CALL and ev.aux and ev.aux["value"] > 0:
            return ev
    return None


def _dependency(tx, bit):
    j = _tainted_jumpi(tx.trace, bit)
    if j is None:
        return None
    c = _value_call(tx.trace)
    if c is None:
        return None
    return (min(j.index, c.index), max(j.index, c.index))


def timestamp_dependency(tx):
    return _dependency(tx, TAINT_TIMESTAMP)


def blocknumber_dependency(tx):
    return _dependency(tx, TAINT_NUMBER)


def dangerous_delegatecall(tx):
    for ev in tx.trace:
        if ev.op == O.DELEGATECALL and len(ev.tags) > 1 and ev.tags[1] is not None \
                and ev.tags[1][1] & TAINT_CALLDATA:
            return (ev.index, ev.index)
    return None


def _arith(tx, ops):
    for ev in tx.trace:
        if ev.op in ops and len(ev.stack) >= 2:
            a, b = ev.stack[0], ev.stack[1]
            if ev.op == O.ADD and a + b >= WORD_MOD:
                return (ev.index, ev.index)
            if ev.op == O.MUL and a * b >= WORD_MOD:
                return (ev.index, ev.index)
            if ev.op == O.SUB and a < b:
                return (ev.index, ev.index)
    return None


def integer_overflow(tx):
    return _arith(tx, (O.ADD, O.MUL))


def integer_underflow(tx):
    return _arith(tx, (O.SUB,))


# -- campaign-level state ----------------------------------------------------


@dataclass
class OracleState:
    """What FreezingEther needs to know about the campaign so far."""

    received: tuple | None = None  # (test id, tx index, chromosome hex) of first deposit
    sends_ether: bool = False

    def observe(self, log: ExecutionLog):
        for tx in log.txs:
            if tx.status == SUCCESS and tx.value > 0 and self.received is None:
                self.received = (log.test_id, tx.index, log.chromosome.hex())
            if not self.sends_ether:
                for ev in tx.trace:
                    if ev.address == log.cut and (
                        (ev.op == O.CALL and ev.aux and ev.aux["value"] > 0)
                        or ev.op == O.SELFDESTRUCT
                    ):
                        self.sends_ether = True
                        break


def check_log(log: ExecutionLog):
    """All definite reports for one executed test case."""
    out = []
    for tx in log.txs:
        checks = (
            (GASLESS_SEND, gasless_send(tx)),
            (EXCEPTION_DISORDER, exception_disorder(tx)),
            (REENTRANCY, reentrancy(tx, log.cut, log.attacker_kind)),
            (TIMESTAMP_DEPENDENCY, timestamp_dependency(tx)),
            (BLOCKNUMBER_DEPENDENCY, blocknumber_dependency(tx)),
            (DANGEROUS_DELEGATECALL, dangerous_delegatecall(tx)),
            (INTEGER_OVERFLOW, integer_overflow(tx)),
            (INTEGER_UNDERFLOW, integer_underflow(tx)),
        )
        for oracle, ev in checks:
            if ev is not None:
                out.append(VulnerabilityReport(oracle, log.test_id, tx.index, ev,
                                               chromosome=log.chromosome.hex()))
    return out


def check_batch(batch, state: OracleState | None = None):
    """Reports for a batch of at most BATCH_SIZE logs, in log order."""
    reports = []
    for log in batch:
        reports.extend(check_log(log))
        if state is not None:
            state.observe(log)
    return reports


def freezing_ether(state: OracleState):
    """Campaign-end check: Ether came in and nothing ever sent any out."""
    if state.received is None or state.sends_ether:
        return None
    test_id, tx_index, chrom = state.received
    return VulnerabilityReport(FREEZING_ETHER, test_id, tx_index, (0, 0), "warning", chrom,
                               "contract accepted Ether but no test case sent Ether from it")
