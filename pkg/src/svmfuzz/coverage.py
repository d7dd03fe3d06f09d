"""Branch coverage, the on-the-fly CFG, and branch distances.

A branch is one outcome of a JUMPI in the contract under test, identified
by ``(phase, jumpi_pc, destination_pc)``. The phase separates constructor
code (``deploy``) from runtime code (``runtime``) so their pcs never collide.
"""

from __future__ import annotations

from collections import namedtuple

from svmfuzz.evm import opcodes as O
from svmfuzz.evm.vm import WORD_MOD, SIGN_BIT

K = 1
DEPLOY = "deploy"
RUNTIME = "runtime"

Branch = namedtuple("Branch", "phase src dst")


def _signed(x):
    return x - WORD_MOD if x & SIGN_BIT else x


def distance(tag, wanted):
    """Distance from taking the JUMPI outcome `wanted` under predicate `tag`.

    `tag` is ``(op, a, b, negations)``; `wanted` is the truth value of the
    JUMPI condition that would take the missed branch. Computed over
    unbounded integers and never below K.
    """
    op, a, b, neg = tag
    rel = bool(wanted) ^ bool(neg & 1)  # truth value wanted of op(a, b)
    if op == "SLT" or op == "SGT":
        a, b = _signed(a), _signed(b)
    if op == "EQ":
        d = abs(a - b) + K if rel else K
    elif op == "LT" or op == "SLT":
        # a < b wanted: a - b + K; a >= b wanted: b - a + K
        d = a - b + K if rel else b - a + K
    elif op == "GT" or op == "SGT":
        # a > b wanted: b - a + K; a <= b wanted: a - b + K
        d = b - a + K if rel else a - b + K
    else:
        raise ValueError(f"unknown predicate {op}")
    return d if d > K else K


class BranchRegistry:
    """Campaign-wide branch knowledge: known, covered, and best seeds."""

    def __init__(self):
        self.known = set()
        self.covered = set()
        self.best = {}  # just-missed Branch -> (distance, seed id)
        self.first_covered = {}  # Branch -> (generation, elapsed seconds)
        self._sibling = {}

    def sibling(self, br):
        return self._sibling.get(br)

    def just_missed(self):
        covered = self.covered
        return {b for b, s in self._sibling.items() if b not in covered and s in covered}

    def merge(self, cov, generation=0, elapsed=0.0):
        """Fold one execution's coverage in; returns the newly covered branches."""
        for b in cov.known:
            if b not in self.known:
                self.known.add(b)
                if b.dst == b.src + 1:
                    continue
                fall = Branch(b.phase, b.src, b.src + 1)
                self._sibling[b] = fall
                self._sibling[fall] = b
                self.known.add(fall)
        new = [b for b in cov.covered_order if b not in self.covered]
        for b in new:
            self.covered.add(b)
            self.first_covered[b] = (generation, elapsed)
            self.best.pop(b, None)
        return new

    def offer(self, report, seed_id):
        """Record `seed_id` as best for branches where it strictly improves.

        Returns the branches whose best entry changed.
        """
        improved = []
        for b, d in report.items():
            if b in self.covered:
                continue
            cur = self.best.get(b)
            if cur is None or d < cur[0]:
                self.best[b] = (d, seed_id)
                improved.append(b)
        return improved

    def to_dot(self):
        """DOT digraph of the discovered CFG fragment, colored by coverage."""
        jm = self.just_missed()
        lines = ["digraph cfg {", "  node [shape=box];"]
        for b in sorted(self.known):
            color = "green" if b in self.covered else ("orange" if b in jm else "gray")
            src = f'"{b.phase}:{b.src}"'
            dst = f'"{b.phase}:{b.dst}"'
            lines.append(f"  {src} -> {dst} [color={color}];")
        lines.append("}")
        return "\n".join(lines) + "\n"


class ExecutionCoverage:
    """Coverage and distances observed in one execution."""

    __slots__ = ("known", "covered_order", "covered", "report")

    def __init__(self):
        self.known = set()
        self.covered = set()
        self.covered_order = []
        self.report = {}

    def finish(self):
        """Drop distance entries for branches this execution itself covered."""
        for b in self.covered:
            self.report.pop(b, None)
        return self


def observe_jumpi(registry, event, taken, cov, phase=RUNTIME):
    """Register both outcomes of one JUMPI event and fold its distance.

    `taken` is the branch outcome (condition nonzero). The missed sibling's
    distance is recorded when it is not yet covered in the campaign and the
    condition slot carries a predicate.
    """
    pc = event.pc
    dest = event.stack[0]
    jump = Branch(phase, pc, dest)
    fall = Branch(phase, pc, pc + 1)
    if jump not in cov.known:
        cov.known.add(jump)
        cov.known.add(fall)
    hit, other = (jump, fall) if taken else (fall, jump)
    if hit not in cov.covered:
        cov.covered.add(hit)
        cov.covered_order.append(hit)
    if other not in registry.covered:
        tag = event.tags[1] if len(event.tags) > 1 else None
        if tag is not None and tag[0] is not None:
            d = distance(tag[0], not taken)
            cur = cov.report.get(other)
            if cur is None or d < cur:
                cov.report[other] = d


class CoverageHook:
    """Trace hook feeding JUMPI events of the contract under test to the registry."""

    __slots__ = ("registry", "address", "phase", "cov")

    def __init__(self, registry, address=None):
        self.registry = registry
        self.address = address
        self.phase = RUNTIME
        self.cov = ExecutionCoverage()

    def start(self, phase=RUNTIME, address=None):
        self.phase = phase
        if address is not None:
            self.address = address
        self.cov = ExecutionCoverage()

    def __call__(self, ev):
        if ev.op == O.JUMPI and ev.address == self.address and len(ev.stack) >= 2:
            observe_jumpi(self.registry, ev, ev.stack[1] != 0, self.cov, self.phase)
