"""Native attacker accounts.

Attackers carry no bytecode. The normal attacker throws on every incoming
call. The reentrancy attacker calls straight back into the caller with the
calldata of the function that called it, then succeeds; if it cannot call
back (depth cap, not enough gas, or the callback fails) it throws like the
normal attacker.
"""

from svmfuzz.evm import opcodes as O
from svmfuzz.evm import vm as V


def attacker_behavior(kind, incoming, world, vm):
    """Return ``(status, return_data, gas_left)`` for a call into an attacker."""
    if kind == V.ATTACKER_NORMAL:
        return V.EXCEPTION, b"", 0
    if kind != V.ATTACKER_REENTRANCY:
        raise ValueError(f"not an attacker kind: {kind}")
    active = vm.active
    me = incoming.callee
    # already re-entering: accept the payment quietly so the outer callback can finish
    if any(m.callee == me and not m.is_delegate for m in active[:-1]):
        return V.SUCCESS, b"", incoming.gas
    if incoming.depth + 1 > V.MAX_DEPTH or len(active) < 2:
        return V.EXCEPTION, b"", 0
    caller_msg = active[-2]
    cb_gas = incoming.gas - vm.costs[O.CALL]
    if cb_gas <= 0:
        return V.EXCEPTION, b"", 0
    cb = V.Message(me, incoming.caller, 0, caller_msg.data, cb_gas, incoming.depth + 1)
    status, _, left = vm._call(cb, "callback")
    if status != V.SUCCESS:
        return V.EXCEPTION, b"", 0
    return V.SUCCESS, b"", left
