"""Solidity ABI: parsing, selectors, and call encoding.

Values are plain Python objects: ints for integers and addresses, bool for
bool, bytes for ``bytes``/``bytesN``/``string`` (strings are kept as raw bytes
so arbitrary fuzzed payloads round-trip), and lists for arrays.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field

from svmfuzz.hashing import keccak256

log = logging.getLogger(__name__)

MAX_DYNAMIC_LENGTH = 255
EXCLUDED_MUTABILITY = ("view", "pure", "constant")


class AbiError(ValueError):
    pass


@dataclass(frozen=True)
class ParamType:
    kind: str  # uint, int, address, bool, fixedbytes, bytes, string, array
    bits: int = 0  # integer width, or N for bytesN
    length: int | None = None  # fixed array length; None means dynamic array
    elem: ParamType | None = None

    @property
    def canonical(self):
        k = self.kind
        if k in ("uint", "int"):
            return f"{k}{self.bits}"
        if k == "fixedbytes":
            return f"bytes{self.bits}"
        if k == "array":
            n = "" if self.length is None else str(self.length)
            return f"{self.elem.canonical}[{n}]"
        return k

    @property
    def is_dynamic(self):
        if self.kind in ("bytes", "string"):
            return True
        if self.kind == "array":
            return self.length is None or self.elem.is_dynamic
        return False

    def __str__(self):
        return self.canonical


_ARRAY_RE = re.compile(r"^(.*)\[(\d*)\]$")


def parse_type(name: str) -> ParamType:
    """Parse a canonical type name; raises AbiError for unsupported kinds."""
    m = _ARRAY_RE.match(name)
    if m:
        elem = parse_type(m.group(1))
        if elem.is_dynamic:
            raise AbiError(f"arrays of dynamic types are not supported: {name}")
        n = int(m.group(2)) if m.group(2) else None
        if n is not None and n == 0:
            raise AbiError(f"zero-length array: {name}")
        return ParamType("array", length=n, elem=elem)
    if name in ("address", "bool", "string", "bytes"):
        return ParamType(name)
    for k in ("uint", "int"):
        if name.startswith(k) and (name[len(k):].isdigit() or name == k):
            bits = int(name[len(k):] or 256)
            if bits % 8 or not 8 <= bits <= 256:
                raise AbiError(f"bad integer width: {name}")
            return ParamType(k, bits)
    if name.startswith("bytes") and name[5:].isdigit():
        n = int(name[5:])
        if not 1 <= n <= 32:
            raise AbiError(f"bad bytesN width: {name}")
        return ParamType("fixedbytes", n)
    raise AbiError(f"unsupported parameter type: {name}")


def selector(signature: str) -> bytes:
    return keccak256(signature.encode())[:4]


@dataclass(frozen=True)
class FunctionSpec:
    name: str
    inputs: tuple = ()
    mutability: str = "nonpayable"
    is_constructor: bool = False
    input_names: tuple = field(default=(), compare=False)

    @property
    def signature(self):
        return f"{self.name}({','.join(t.canonical for t in self.inputs)})"

    @property
    def selector(self):
        return None if self.is_constructor else selector(self.signature)

    @property
    def payable(self):
        return self.mutability == "payable"

    @property
    def excluded(self):
        """True for functions that cannot change state and are not fuzzed."""
        return self.mutability in EXCLUDED_MUTABILITY


def _mutability(entry):
    sm = entry.get("stateMutability")
    if sm:
        return sm
    if entry.get("constant"):
        return "constant"
    if entry.get("payable"):
        return "payable"
    return "nonpayable"


def parse_abi(document) -> list:
    """Parse a Solidity ABI JSON array into FunctionSpecs (constructor included)."""
    if isinstance(document, (bytes, bytearray)):
        try:
            document = document.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise AbiError(f"ABI is not UTF-8 (byte offset {exc.start})") from None
    try:
        entries = json.loads(document)
    except json.JSONDecodeError as exc:
        offset = len(document[:exc.pos].encode("utf-8"))
        raise AbiError(f"malformed ABI JSON at byte offset {offset}: {exc.msg}") from None
    if not isinstance(entries, list):
        raise AbiError("ABI document must be a JSON array (byte offset 0)")
    specs = []
    for entry in entries:
        if not isinstance(entry, dict):
            raise AbiError("ABI entries must be objects")
        kind = entry.get("type", "function")
        if kind not in ("function", "constructor"):
            continue
        try:
            inputs = tuple(parse_type(p["type"]) for p in entry.get("inputs", []))
        except (AbiError, KeyError, TypeError) as exc:
            log.warning("skipping ABI entry %s: %s", entry.get("name", kind), exc)
            continue
        names = tuple(p.get("name", "") for p in entry.get("inputs", []))
        specs.append(FunctionSpec(
            name=entry.get("name", "") if kind == "function" else "constructor",
            inputs=inputs,
            mutability=_mutability(entry),
            is_constructor=kind == "constructor",
            input_names=names,
        ))
    return specs


def constructor_of(specs):
    for s in specs:
        if s.is_constructor:
            return s
    return FunctionSpec("constructor", (), "nonpayable", True)


def fuzzable(specs):
    """Non-view, non-constructor functions in ABI order."""
    return [s for s in specs if not s.is_constructor and not s.excluded]


# -- encoding ---------------------------------------------------------------


def check_value(t: ParamType, v, bound=MAX_DYNAMIC_LENGTH):
    k = t.kind
    if k == "uint":
        if not isinstance(v, int) or isinstance(v, bool) or not 0 <= v < 1 << t.bits:
            raise AbiError(f"{v!r} out of range for {t}")
    elif k == "int":
        lim = 1 << (t.bits - 1)
        if not isinstance(v, int) or isinstance(v, bool) or not -lim <= v < lim:
            raise AbiError(f"{v!r} out of range for {t}")
    elif k == "address":
        if not isinstance(v, int) or not 0 <= v < 1 << 160:
            raise AbiError(f"bad address {v!r}")
    elif k == "bool":
        if not isinstance(v, bool):
            raise AbiError(f"bad bool {v!r}")
    elif k == "fixedbytes":
        if not isinstance(v, (bytes, bytearray)) or len(v) != t.bits:
            raise AbiError(f"bad {t} value {v!r}")
    elif k in ("bytes", "string"):
        if isinstance(v, str):
            v = v.encode()
        if not isinstance(v, (bytes, bytearray)):
            raise AbiError(f"bad {t} value {v!r}")
        if len(v) > bound:
            raise AbiError(f"dynamic length {len(v)} exceeds bound {bound}")
    elif k == "array":
        if not isinstance(v, (list, tuple)):
            raise AbiError(f"bad array value {v!r}")
        if t.length is None and len(v) > bound:
            raise AbiError(f"dynamic length {len(v)} exceeds bound {bound}")
        if t.length is not None and len(v) != t.length:
            raise AbiError(f"{t} needs exactly {t.length} elements")
        for x in v:
            check_value(t.elem, x, bound)


def _pad(b):
    return bytes(b) + bytes(-len(b) % 32)


def _encode_static(t, v):
    k = t.kind
    if k in ("uint", "address"):
        return v.to_bytes(32, "big")
    if k == "int":
        return (v % (1 << 256)).to_bytes(32, "big")
    if k == "bool":
        return (1 if v else 0).to_bytes(32, "big")
    if k == "fixedbytes":
        return bytes(v).ljust(32, b"\x00")
    if k == "array":
        return b"".join(_encode_static(t.elem, x) for x in v)
    raise AbiError(f"{t} is not static")


def _encode_one(t, v):
    if not t.is_dynamic:
        return _encode_static(t, v)
    if t.kind in ("bytes", "string"):
        if isinstance(v, str):
            v = v.encode()
        return len(v).to_bytes(32, "big") + _pad(v)
    # dynamic array of static elements
    return len(v).to_bytes(32, "big") + b"".join(_encode_static(t.elem, x) for x in v)


def static_size(t):
    if t.kind == "array" and not t.is_dynamic:
        return t.length * static_size(t.elem)
    return 32


def encode_args(types, values, bound=MAX_DYNAMIC_LENGTH) -> bytes:
    if len(types) != len(values):
        raise AbiError(f"arity mismatch: {len(types)} types, {len(values)} values")
    for t, v in zip(types, values):
        check_value(t, v, bound)
    head_size = sum(32 if t.is_dynamic else static_size(t) for t in types)
    heads, tails = [], []
    offset = head_size
    for t, v in zip(types, values):
        if t.is_dynamic:
            heads.append(offset.to_bytes(32, "big"))
            enc = _encode_one(t, v)
            tails.append(enc)
            offset += len(enc)
        else:
            heads.append(_encode_static(t, v))
    return b"".join(heads) + b"".join(tails)


def encode_call(f: FunctionSpec, args, bound=MAX_DYNAMIC_LENGTH) -> bytes:
    body = encode_args(f.inputs, list(args), bound)
    return body if f.is_constructor else f.selector + body


def _word(data, pos):
    if pos + 32 > len(data):
        raise AbiError(f"truncated data at offset {pos}")
    return int.from_bytes(data[pos:pos + 32], "big")


def _decode_static(t, data, pos):
    k = t.kind
    w = _word(data, pos)
    if k == "uint":
        if w >> t.bits:
            raise AbiError(f"dirty high bits for {t}")
        return w
    if k == "int":
        v = w - (1 << 256) if w >> 255 else w
        check_value(t, v)
        return v
    if k == "address":
        if w >> 160:
            raise AbiError("dirty address")
        return w
    if k == "bool":
        if w > 1:
            raise AbiError("bad bool")
        return bool(w)
    if k == "fixedbytes":
        return bytes(data[pos:pos + t.bits])
    if k == "array":
        size = static_size(t.elem)
        return [_decode_static(t.elem, data, pos + i * size) for i in range(t.length)]
    raise AbiError(f"{t} is not static")


def decode_args(types, data, bound=MAX_DYNAMIC_LENGTH):
    out = []
    pos = 0
    for t in types:
        if t.is_dynamic:
            off = _word(data, pos)
            n = _word(data, off)
            if n > bound:
                raise AbiError(f"dynamic length {n} exceeds bound {bound}")
            if t.kind in ("bytes", "string"):
                if off + 32 + n > len(data):
                    raise AbiError("truncated dynamic payload")
                out.append(bytes(data[off + 32:off + 32 + n]))
            else:
                size = static_size(t.elem)
                out.append([_decode_static(t.elem, data, off + 32 + i * size) for i in range(n)])
            pos += 32
        else:
            out.append(_decode_static(t, data, pos))
            pos += static_size(t)
    return out


def decode_call(f: FunctionSpec, data: bytes, bound=MAX_DYNAMIC_LENGTH):
    if not f.is_constructor:
        if data[:4] != f.selector:
            raise AbiError("selector mismatch")
        data = data[4:]
    return decode_args(f.inputs, data, bound)


def abi_json(specs) -> str:
    """Serialize FunctionSpecs back to ABI JSON (used to write fixture files)."""
    out = []
    for s in specs:
        names = s.input_names or tuple(f"a{i}" for i in range(len(s.inputs)))
        entry = {"type": "constructor" if s.is_constructor else "function",
                 "inputs": [{"name": n, "type": t.canonical} for n, t in zip(names, s.inputs)],
                 "stateMutability": s.mutability}
        if not s.is_constructor:
            entry["name"] = s.name
            entry["outputs"] = []
        out.append(entry)
    return json.dumps(out, indent=1)
