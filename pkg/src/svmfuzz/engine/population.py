"""Random test-case generation: the initial population and fresh calls."""

from __future__ import annotations

import logging

from svmfuzz.engine.testcase import VALUE_BYTES, Call, NetworkConfig, TestCase

log = logging.getLogger(__name__)


def random_arg(t, rng, addresses, bound):
    k = t.kind
    if k == "uint":
        return rng.getrandbits(t.bits)
    if k == "int":
        return rng.getrandbits(t.bits) - (1 << (t.bits - 1))
    if k == "address":
        return rng.choice(addresses)
    if k == "bool":
        return rng.random() < 0.5
    if k == "fixedbytes":
        return rng.randbytes(t.bits)
    if k in ("bytes", "string"):
        return rng.randbytes(rng.randint(0, bound))
    if k == "array":
        n = t.length if t.length is not None else rng.randint(0, bound)
        return [random_arg(t.elem, rng, addresses, bound) for _ in range(n)]
    raise ValueError(f"unsupported type {t}")


def random_value(spec, rng, limit):
    if not spec.payable:
        return 0
    return min(rng.getrandbits(8 * VALUE_BYTES - 8), limit)


def random_call(ctx, config, rng, fidx=None, addresses=None):
    if fidx is None:
        fidx = rng.randrange(len(ctx.functions))
    spec = ctx.functions[fidx]
    sender = rng.randrange(ctx.n_senders)
    addrs = addresses or argument_addresses(ctx, config)
    value = random_value(spec, rng, ctx.sender_balance(config, sender))
    args = [random_arg(t, rng, addrs, ctx.bound) for t in spec.inputs]
    return Call(fidx, sender, value, args)


def random_constructor(ctx, config, rng, addresses=None):
    spec = ctx.constructor
    addrs = addresses or argument_addresses(ctx, config)
    value = random_value(spec, rng, ctx.attacker_balance)
    args = [random_arg(t, rng, addrs, ctx.bound) for t in spec.inputs]
    return Call(-1, ctx.pool_size, value, args)


def argument_addresses(ctx, config):
    """Addresses handed to address-typed parameters: the pool plus the attacker."""
    return config.addresses + [ctx.attacker]


def init_population(ctx, config: NetworkConfig, rng):
    """One test case per fuzzable function: the constructor, then that function."""
    if not ctx.functions:
        log.warning("no fuzzable functions; fuzzing the constructor only")
        return [TestCase(config, random_constructor(ctx, config, rng), [])]
    out = []
    for i in range(len(ctx.functions)):
        ctor = random_constructor(ctx, config, rng)
        out.append(TestCase(config, ctor, [random_call(ctx, config, rng, i)]))
    return out
