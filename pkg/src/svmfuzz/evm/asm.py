"""Tiny two-pass assembler used to build the fixture contracts.

Syntax, one token per item (whitespace separated, `;` starts a comment):

- an opcode mnemonic, e.g. ``CALLVALUE``;
- ``PUSH <int>`` picks the narrowest PUSH; ``PUSHn <int>`` forces width n;
- ``PUSH @name`` pushes a label address as PUSH2;
- ``@name`` emits a JUMPDEST and defines the label there;
- ``name:`` defines a label without emitting anything;
- ``PUSH $name`` pushes a caller-supplied constant as PUSH2;
- ``DATA <hex>`` emits raw bytes.
"""

from svmfuzz.evm import opcodes as O


class AsmError(ValueError):
    pass


def _int(tok):
    try:
        return int(tok, 0)
    except ValueError:
        raise AsmError(f"bad integer {tok!r}") from None


def _tokens(src):
    out = []
    for line in src.splitlines():
        line = line.split(";", 1)[0]
        out.extend(line.split())
    return out


def _items(src, symbols):
    toks = _tokens(src)
    items = []
    i = 0
    while i < len(toks):
        t = toks[i]
        up = t.upper()
        if t.startswith("@"):
            items.append(("label", t[1:]))
            items.append(("op", O.JUMPDEST))
        elif t.endswith(":"):
            items.append(("label", t[:-1]))
        elif up == "DATA":
            i += 1
            items.append(("raw", bytes.fromhex(toks[i].removeprefix("0x"))))
        elif up == "PUSH" or (up.startswith("PUSH") and up[4:].isdigit()):
            i += 1
            arg = toks[i]
            width = int(up[4:]) if up != "PUSH" else None
            if arg.startswith("@"):
                items.append(("ref", arg[1:], width or 2))
            elif arg.startswith("$"):
                if arg[1:] not in symbols:
                    raise AsmError(f"undefined symbol {arg}")
                items.append(("push", symbols[arg[1:]], width or 2))
            else:
                v = _int(arg)
                if v < 0:
                    v &= (1 << 256) - 1
                need = max(1, (v.bit_length() + 7) // 8)
                if width is None:
                    width = need
                if need > width or not 1 <= width <= 32:
                    raise AsmError(f"{arg} does not fit PUSH{width}")
                items.append(("push", v, width))
        elif up in O.BY_NAME:
            items.append(("op", O.BY_NAME[up]))
        else:
            raise AsmError(f"unknown token {t!r}")
        i += 1
    return items


def assemble(src, symbols=None):
    """Assemble `src` to bytecode; returns ``(code, labels)``."""
    items = _items(src, symbols or {})
    labels = {}
    pos = 0
    for it in items:
        kind = it[0]
        if kind == "label":
            if it[1] in labels:
                raise AsmError(f"duplicate label {it[1]}")
            labels[it[1]] = pos
        elif kind == "op":
            pos += 1
        elif kind == "raw":
            pos += len(it[1])
        else:
            pos += 1 + it[2]
    out = bytearray()
    for it in items:
        kind = it[0]
        if kind == "op":
            out.append(it[1])
        elif kind == "raw":
            out += it[1]
        elif kind == "push":
            out.append(O.PUSH1 + it[2] - 1)
            out += it[1].to_bytes(it[2], "big")
        elif kind == "ref":
            if it[1] not in labels:
                raise AsmError(f"undefined label {it[1]}")
            out.append(O.PUSH1 + it[2] - 1)
            out += labels[it[1]].to_bytes(it[2], "big")
    return bytes(out), labels


def init_code(runtime, ctor_src=""):
    """Wrap `runtime` in init code that runs `ctor_src` and returns the runtime.

    Constructor arguments, if any, are appended after the init code; inside
    `ctor_src` the token ``$args`` (``PUSH $args``) is their code offset.
    """
    tail = 15  # PUSH2 n PUSH2 off PUSH1 0 CODECOPY PUSH2 n PUSH1 0 RETURN
    body, _ = assemble(ctor_src, {"args": 0})
    start = len(body) + tail
    body, _ = assemble(ctor_src, {"args": start + len(runtime)})
    n = len(runtime)
    trailer, _ = assemble(f"PUSH2 {n} PUSH2 {start} PUSH1 0 CODECOPY PUSH2 {n} PUSH1 0 RETURN")
    return body + trailer + bytes(runtime)


def disassemble(code):
    """Human-readable listing, one instruction per line with its offset."""
    lines = []
    i = 0
    while i < len(code):
        op = code[i]
        name = O.NAMES.get(op, f"UNKNOWN_{op:02x}")
        if O.is_push(op):
            size = op - O.PUSH1 + 1
            lines.append(f"{i:5d} {name} 0x{code[i + 1:i + 1 + size].hex()}")
            i += size + 1
        else:
            lines.append(f"{i:5d} {name}")
            i += 1
    return "\n".join(lines)
