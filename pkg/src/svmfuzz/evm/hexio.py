"""Bytecode hex files and the tab-separated trace dump."""

from svmfuzz.evm import opcodes as O


def parse_hex(text):
    """Decode hex text; tolerates an optional 0x prefix and any whitespace."""
    s = "".join(text.split())
    if s[:2] in ("0x", "0X"):
        s = s[2:]
    if len(s) % 2:
        raise ValueError("odd number of hex digits")
    return bytes.fromhex(s)


def read_hex(path):
    with open(path) as fh:
        return parse_hex(fh.read())


def write_hex(path, data):
    with open(path, "w") as fh:
        fh.write(data.hex() + "\n")


def format_event(ev):
    stack = [f"{v:#x}" for v in ev.stack] + [""] * (4 - len(ev.stack))
    name = O.NAMES.get(ev.op, f"0x{ev.op:02x}")
    return "\t".join([str(ev.depth), str(ev.pc), name, str(ev.gas)] + stack)


def dump_trace(trace, fh):
    for ev in trace:
        fh.write(format_event(ev) + "\n")
